use std::fmt;

use crate::error::{Error, Result};

/// A code index together with up to 32 raw payload bits.
///
/// The code is entropy coded; the payload travels through the coder
/// untouched. Bits of `payload` at or above `payload_len` are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CodingPair {
    code: u8,
    payload_len: u8,
    payload: u32,
}

impl CodingPair {
    pub fn new(code: u8, payload: u32, payload_len: u8) -> Result<Self> {
        if payload_len > 32 {
            return Err(Error::contract(format!(
                "payload length {payload_len} exceeds 32 bits"
            )));
        }
        if payload_len < 32 && payload >> payload_len != 0 {
            return Err(Error::contract(format!(
                "payload {payload:#x} has bits above its length {payload_len}"
            )));
        }
        Ok(Self {
            code,
            payload_len,
            payload,
        })
    }

    /// Builds a pair keeping only the low `payload_len` bits of `payload`.
    #[inline]
    pub fn masked(code: u8, payload: u32, payload_len: u8) -> Self {
        debug_assert!(payload_len <= 32);
        Self {
            code,
            payload_len,
            payload: payload & low_mask(payload_len),
        }
    }

    /// A pair with no payload.
    #[inline]
    pub const fn bare(code: u8) -> Self {
        Self {
            code,
            payload_len: 0,
            payload: 0,
        }
    }

    #[inline]
    pub const fn code(&self) -> u8 {
        self.code
    }

    #[inline]
    pub const fn payload(&self) -> u32 {
        self.payload
    }

    #[inline]
    pub const fn payload_len(&self) -> u8 {
        self.payload_len
    }

    #[inline]
    pub(crate) fn with_code(self, code: u8) -> Self {
        Self { code, ..self }
    }
}

impl fmt::Debug for CodingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.payload_len == 0 {
            write!(f, "({}, -)", self.code)
        } else {
            write!(
                f,
                "({}, {:0width$b})",
                self.code,
                self.payload,
                width = self.payload_len as usize
            )
        }
    }
}

#[inline]
pub(crate) const fn low_mask(bits: u8) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_stray_high_bits() {
        assert!(CodingPair::new(3, 0b100, 2).is_err());
        assert!(CodingPair::new(3, 0b11, 2).is_ok());
        assert!(CodingPair::new(0, u32::MAX, 32).is_ok());
        assert!(CodingPair::new(0, 0, 33).is_err());
    }

    #[test]
    fn debug_shows_payload_width() {
        let p = CodingPair::new(4, 0b0101, 4).unwrap();
        assert_eq!(format!("{p:?}"), "(4, 0101)");
        assert_eq!(format!("{:?}", CodingPair::bare(0)), "(0, -)");
    }
}
