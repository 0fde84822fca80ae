//! Bridge between coding pairs and two's complement fixed point, the way a
//! decompressor feeds an integer datapath: rebuild the mantissa with its
//! hidden bit, apply the sign, shift by the exponent. The other direction
//! finds the leading one, picks the code from its position and rounds the
//! bits below it into the payload.

use crate::error::{Error, Result};
use crate::model::Mapping;
use crate::pair::{low_mask, CodingPair};

use super::float::round_shift;
use super::int::magnitude_class;
use super::{CodeMap, Symbol};

/// Normalizes `v / 2^frac_bits` to `mant_bits` mantissa bits (nearest,
/// ties to even). Zero maps to `DirectValue(0)`.
pub fn symbol(v: i64, frac_bits: u8, mant_bits: u8) -> Result<Symbol> {
    if v == 0 {
        return Ok(Symbol::new(Mapping::DirectValue(0), 0, 0));
    }
    if mant_bits > 31 {
        return Err(Error::contract("mantissa wider than 31 bits"));
    }
    let (q, e) = normalize(v.unsigned_abs(), frac_bits, mant_bits);
    let sign = (v < 0) as u32;
    Ok(Symbol::new(
        Mapping::Exponent(e),
        (sign << mant_bits) | (q as u32 & low_mask(mant_bits)),
        mant_bits + 1,
    ))
}

/// Mantissa with hidden bit (`mant_bits + 1` bits) and exponent.
fn normalize(mag: u64, frac_bits: u8, mant_bits: u8) -> (u64, i32) {
    let msb = magnitude_class(mag) - 1;
    let m = mant_bits as u32;
    let mut e = msb as i32 - frac_bits as i32;
    let q = if msb > m {
        let mut q = round_shift(mag, msb - m);
        if q >> (m + 1) != 0 {
            q >>= 1;
            e += 1;
        }
        q
    } else {
        mag << (m - msb)
    };
    (q, e)
}

/// Fixed-point value of a symbol, rounded to nearest even when the
/// exponent leaves bits below the binary point.
pub fn value(s: &Symbol, frac_bits: u8) -> Result<i64> {
    match s.mapping {
        Mapping::DirectValue(0) if s.len == 0 => return Ok(0),
        Mapping::Exponent(e) if s.len >= 1 => {
            let m = s.len as i32 - 1;
            let q = (1u64 << m) | (s.payload & low_mask(m as u8)) as u64;
            let shift = e + frac_bits as i32 - m;
            let mag = if shift >= 0 {
                if shift + m >= 63 {
                    return Err(Error::contract(format!("exponent {e} overflows 64 bits")));
                }
                q << shift
            } else {
                round_shift(q, (-shift) as u32)
            } as i64;
            Ok(if s.payload >> m & 1 == 1 { -mag } else { mag })
        }
        other => Err(Error::Unmapped(format!("{other} in a fixed-point stream"))),
    }
}

/// Decodes a pair into a `width`-bit fixed-point integer with `frac_bits`
/// fraction bits. Out-of-range values saturate; the flag reports it.
pub fn fixed_point_bridge(
    pair: &CodingPair,
    code_to_exp: &CodeMap,
    frac_bits: u8,
    width: u8,
) -> Result<(i64, bool)> {
    let s = Symbol::from_pair(pair, code_to_exp)?;
    let v = match value(&s, frac_bits) {
        Ok(v) => v,
        Err(Error::Contract(_)) if matches!(s.mapping, Mapping::Exponent(_)) => {
            if s.payload >> (s.len - 1) & 1 == 1 {
                i64::MIN
            } else {
                i64::MAX
            }
        }
        Err(e) => return Err(e),
    };
    let hi = (1i64 << (width - 1)) - 1;
    let lo = -(1i64 << (width - 1));
    Ok((v.clamp(lo, hi), v > hi || v < lo))
}

/// Encodes a fixed-point integer, rounding the mantissa to the payload
/// width of the code its exponent maps to.
pub fn fixed_to_pair(v: i64, frac_bits: u8, exp_to_code: &CodeMap) -> Result<CodingPair> {
    if v == 0 {
        return symbol(0, frac_bits, 0)?.to_pair(exp_to_code);
    }
    let mag = v.unsigned_abs();
    let e = magnitude_class(mag) as i32 - 1 - frac_bits as i32;
    let code = exp_to_code
        .exponent(e)
        .ok_or_else(|| Error::Unmapped(format!("exponent {e}")))?;
    let bits = exp_to_code.payload_bits(code);
    if bits == 0 {
        return Err(Error::contract("exponent code without a sign bit"));
    }
    let mut s = symbol(v, frac_bits, bits - 1)?;
    if s.mapping != Mapping::Exponent(e) {
        // rounding carried into the next exponent; the mantissa is now
        // zero, so any payload width represents it exactly
        let Mapping::Exponent(e1) = s.mapping else { unreachable!() };
        let c1 = exp_to_code
            .exponent(e1)
            .ok_or_else(|| Error::Unmapped(format!("exponent {e1}")))?;
        let w = exp_to_code.payload_bits(c1);
        if w == 0 {
            return Err(Error::contract("exponent code without a sign bit"));
        }
        s = Symbol::new(s.mapping, ((v < 0) as u32) << (w - 1), w);
    }
    s.to_pair(exp_to_code)
}
