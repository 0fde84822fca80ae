//! One code per distinct value. The value lives in the model's mapping, so
//! the payload is empty (or a lone sign bit for the signed variant).

use crate::error::{Error, Result};
use crate::model::Mapping;
use crate::pair::CodingPair;

use super::{CodeMap, Symbol};

#[inline]
pub fn symbol(v: u32) -> Symbol {
    Symbol::new(Mapping::DirectValue(v), 0, 0)
}

#[inline]
pub fn value(s: &Symbol) -> Result<u32> {
    match s.mapping {
        Mapping::DirectValue(v) if s.len == 0 => Ok(v),
        other => Err(Error::Unmapped(format!("{other} in a direct-value stream"))),
    }
}

/// Magnitude as the code, sign as a one-bit payload.
#[inline]
pub fn signed_symbol(v: i32) -> Symbol {
    Symbol::new(Mapping::DirectValue(v.unsigned_abs()), (v < 0) as u32, 1)
}

pub fn signed_value(s: &Symbol) -> Result<i64> {
    match s.mapping {
        Mapping::DirectValue(m) if s.len == 1 => {
            Ok(if s.payload & 1 == 1 { -(m as i64) } else { m as i64 })
        }
        other => Err(Error::Unmapped(format!("{other} in a signed direct-value stream"))),
    }
}

pub fn direct_value_pair(v: u32, value_to_code: &CodeMap) -> Result<CodingPair> {
    symbol(v).to_pair(value_to_code)
}

pub fn pair_to_direct(pair: &CodingPair, code_to_value: &CodeMap) -> Result<u32> {
    value(&Symbol::from_pair(pair, code_to_value)?)
}
