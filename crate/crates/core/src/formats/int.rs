//! Integers as coding pairs. The code is the position of the most
//! significant nonzero bit plus one; the payload is the sign followed by the
//! bits below that MSB.

use crate::error::{Error, Result};
use crate::model::Mapping;
use crate::pair::{low_mask, CodingPair};

use super::float::round_shift;
use super::Symbol;

/// Magnitude class of `|v|`: 0 for zero, else MSB position plus one.
#[inline]
pub fn magnitude_class(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Splits `v`. With `max_payload = Some(b)`, payloads longer than `b` bits
/// keep only their top bits, rounded to nearest with ties to even.
#[inline]
pub fn symbol(v: i32, max_payload: Option<u8>) -> Symbol {
    if v == 0 {
        return Symbol::new(Mapping::IntMagnitude(0), 0, 0);
    }
    let sign = (v < 0) as u32;
    let mag = v.unsigned_abs() as u64;
    let mut k = magnitude_class(mag);
    match max_payload {
        Some(b) if (b as u32) < k && b > 0 => {
            let b = b as u32;
            let mut q = round_shift(mag, k - b);
            if q >> b != 0 {
                q >>= 1;
                k += 1;
            }
            Symbol::new(
                Mapping::IntMagnitude(k),
                (sign << (b - 1)) | (q as u32 & low_mask(b as u8 - 1)),
                b as u8,
            )
        }
        _ => Symbol::new(
            Mapping::IntMagnitude(k),
            (sign << (k - 1)) | (mag as u32 & low_mask(k as u8 - 1)),
            k as u8,
        ),
    }
}

/// Inverse of [`symbol`]. Payloads shorter than the class are scaled back up.
#[inline]
pub fn value(s: &Symbol) -> Result<i64> {
    let Mapping::IntMagnitude(k) = s.mapping else {
        return Err(Error::Unmapped(format!("{} in an integer stream", s.mapping)));
    };
    if k == 0 {
        return if s.len == 0 {
            Ok(0)
        } else {
            Err(Error::contract("zero code with payload"))
        };
    }
    let len = s.len as u32;
    if len == 0 || len > k || k > 33 {
        return Err(Error::contract(format!(
            "magnitude class {k} with {len} payload bits"
        )));
    }
    let low = (s.payload & low_mask(len as u8 - 1)) as i64;
    let mag = ((1i64 << (len - 1)) | low) << (k - len);
    Ok(if s.payload >> (len - 1) & 1 == 1 { -mag } else { mag })
}

/// Splits `v` into a pair whose code is its magnitude class.
pub fn int_to_pair(v: i32, max_payload: Option<u8>) -> CodingPair {
    let s = symbol(v, max_payload);
    let Mapping::IntMagnitude(k) = s.mapping else {
        unreachable!()
    };
    CodingPair::masked(k as u8, s.payload, s.len)
}

/// Inverse of [`int_to_pair`].
pub fn pair_to_int(pair: &CodingPair) -> Result<i64> {
    value(&Symbol::new(
        Mapping::IntMagnitude(pair.code() as u32),
        pair.payload(),
        pair.payload_len(),
    ))
}
