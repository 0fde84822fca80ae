//! Salient weights: the same exponent gets two codes, one for ordinary
//! values and one for important values that keep a wider mantissa.

use crate::error::{Error, Result};
use crate::model::Mapping;
use crate::pair::CodingPair;

use super::float::{FloatFormat, Narrowing};
use super::{CodeMap, Symbol};

#[derive(Clone, Copy, Debug)]
pub struct Salient {
    ordinary: Narrowing,
    important: Narrowing,
}

impl Salient {
    /// Values arrive as `source` patterns and are narrowed to `ordinary_mant`
    /// or `important_mant` mantissa bits.
    pub fn new(source: FloatFormat, ordinary_mant: u8, important_mant: u8) -> Result<Self> {
        if source.total_bits() > 31 {
            return Err(Error::contract("salient values need a spare top bit"));
        }
        let narrow = |m| {
            Narrowing::new(
                source,
                FloatFormat::new(source.exp_bits, m, source.has_sign, source.bias)?,
            )
        };
        Ok(Self {
            ordinary: narrow(ordinary_mant)?,
            important: narrow(important_mant)?,
        })
    }

    /// Returns the symbol and whether the value saturated.
    #[inline]
    pub fn symbol(&self, bits: u32, important: bool) -> (Symbol, bool) {
        if important {
            let (mut s, sat) = self.important.symbol(bits);
            if let Mapping::Exponent(e) = s.mapping {
                s.mapping = Mapping::ImportantExponent(e);
            }
            (s, sat)
        } else {
            self.ordinary.symbol(bits)
        }
    }

    /// Value (as a source pattern) and importance flag.
    #[inline]
    pub fn value(&self, s: &Symbol) -> Result<(u32, bool)> {
        match s.mapping {
            Mapping::Exponent(_) => Ok((self.ordinary.value(s)?, false)),
            Mapping::ImportantExponent(e) => {
                let plain = Symbol::new(Mapping::Exponent(e), s.payload, s.len);
                Ok((self.important.value(&plain)?, true))
            }
            other => Err(Error::Unmapped(format!("{other} in a salient stream"))),
        }
    }
}

pub fn saliency_pair(
    bits: u32,
    important: bool,
    salient: &Salient,
    dual_map: &CodeMap,
) -> Result<(CodingPair, bool)> {
    let (s, sat) = salient.symbol(bits, important);
    Ok((s.to_pair(dual_map)?, sat))
}

pub fn pair_to_salient(pair: &CodingPair, salient: &Salient, dual_map: &CodeMap) -> Result<(u32, bool)> {
    salient.value(&Symbol::from_pair(pair, dual_map)?)
}
