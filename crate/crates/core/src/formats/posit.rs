//! Posits as coding pairs. Regime and exponent fields together make one
//! effective exponent, which picks the code; the fraction and sign ride as
//! payload, so the payload width depends on the code.

use crate::error::{Error, Result};
use crate::model::Mapping;
use crate::pair::{low_mask, CodingPair};

use super::{CodeMap, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PositFormat {
    pub n: u8,
    pub es: u8,
}

impl PositFormat {
    pub fn new(n: u8, es: u8) -> Result<Self> {
        if !(2..=32).contains(&n) || es > 4 || es as u32 >= n as u32 - 1 {
            return Err(Error::contract(format!("unsupported posit({n},{es})")));
        }
        Ok(Self { n, es })
    }

    /// The Not-a-Real pattern: sign bit set, all others clear.
    pub fn nar(&self) -> u32 {
        1 << (self.n - 1)
    }

    pub fn mask(&self) -> u32 {
        low_mask(self.n)
    }

    /// Fraction bits carried by values with effective exponent `eff`.
    pub fn fraction_bits(&self, eff: i32) -> u8 {
        let (m, term) = self.regime_len(eff.div_euclid(1 << self.es));
        let rem = self.n as i32 - 1 - m - term;
        (rem - (self.es as i32).min(rem)).max(0) as u8
    }

    /// Smallest and largest effective exponents.
    pub fn exponent_range(&self) -> (i32, i32) {
        let max_k = self.n as i32 - 2;
        (-max_k << self.es, max_k << self.es)
    }

    /// Regime run length and terminator bits for regime value `k`.
    fn regime_len(&self, k: i32) -> (i32, i32) {
        let m = if k >= 0 { k + 1 } else { -k };
        let term = (m < self.n as i32 - 1) as i32;
        (m, term)
    }
}

/// Splits a posit pattern. Zero and NaR map to direct-value codes.
pub fn symbol(pattern: u32, fmt: PositFormat) -> Result<Symbol> {
    let n = fmt.n as u32;
    if pattern & !fmt.mask() != 0 {
        return Err(Error::contract(format!(
            "pattern {pattern:#x} wider than {n} bits"
        )));
    }
    if pattern == 0 || pattern == fmt.nar() {
        return Ok(Symbol::new(Mapping::DirectValue(pattern), 0, 0));
    }
    let sign = pattern >> (n - 1);
    let p = if sign == 1 {
        pattern.wrapping_neg() & fmt.mask()
    } else {
        pattern
    };
    // bits below the sign, regime first
    let body = p & low_mask(fmt.n - 1);
    let width = n - 1;
    let first = (body >> (width - 1)) & 1;
    let shifted = body << (32 - width);
    let m = if first == 1 {
        shifted.leading_ones()
    } else {
        shifted.leading_zeros()
    }
    .min(width);
    let k = if first == 1 { m as i32 - 1 } else { -(m as i32) };
    let used = (m + 1).min(width);
    let rem = width - used;
    let es = fmt.es as u32;
    let taken = es.min(rem);
    let fl = rem - taken;
    let e_bits = (body >> fl) & low_mask(taken as u8);
    let e = (e_bits << (es - taken)) as i32;
    let frac = body & low_mask(fl as u8);
    let eff = k * (1 << es) + e;
    Ok(Symbol::new(
        Mapping::Exponent(eff),
        (sign << fl) | frac,
        1 + fl as u8,
    ))
}

/// Inverse of [`symbol`].
pub fn value(s: &Symbol, fmt: PositFormat) -> Result<u32> {
    let n = fmt.n as u32;
    let eff = match s.mapping {
        Mapping::DirectValue(v) if (v == 0 || v == fmt.nar()) && s.len == 0 => return Ok(v),
        Mapping::Exponent(e) => e,
        other => return Err(Error::Unmapped(format!("{other} in a posit stream"))),
    };
    let (lo, hi) = fmt.exponent_range();
    if eff < lo || eff > hi || s.len == 0 {
        return Err(Error::contract(format!("{} outside posit({},{})", s.mapping, fmt.n, fmt.es)));
    }
    let es = fmt.es as u32;
    let k = eff.div_euclid(1 << es);
    let e = eff.rem_euclid(1 << es) as u32;
    let (m, term) = fmt.regime_len(k);
    let (m, term) = (m as u32, term as u32);
    let width = n - 1;
    let rem = width - m - term;
    let taken = es.min(rem);
    let fl = rem - taken;
    if s.len as u32 != fl + 1 || e & low_mask((es - taken) as u8) != 0 {
        return Err(Error::contract(format!(
            "{} with {} payload bits is not a posit({},{}) value",
            s.mapping, s.len, fmt.n, fmt.es
        )));
    }
    let regime = if k >= 0 {
        // m ones, then a zero terminator if there is room
        low_mask(m as u8) << term
    } else {
        term
    };
    let frac = s.payload & low_mask(fl as u8);
    let sign = s.payload >> fl;
    let body = (regime << rem) | ((e >> (es - taken)) << fl) | frac;
    Ok(if sign == 1 {
        body.wrapping_neg() & fmt.mask()
    } else {
        body
    })
}

pub fn posit_to_pair(pattern: u32, fmt: PositFormat, exp_to_code: &CodeMap) -> Result<CodingPair> {
    symbol(pattern, fmt)?.to_pair(exp_to_code)
}

pub fn pair_to_posit(pair: &CodingPair, fmt: PositFormat, code_to_exp: &CodeMap) -> Result<u32> {
    value(&Symbol::from_pair(pair, code_to_exp)?, fmt)
}

/// Real value of a posit pattern (NaR is NaN).
pub fn posit_to_real(pattern: u32, fmt: PositFormat) -> f64 {
    match symbol(pattern, fmt) {
        Ok(Symbol {
            mapping: Mapping::Exponent(eff),
            payload,
            len,
        }) => {
            let fl = len - 1;
            let frac = (payload & low_mask(fl)) as f64 / 2f64.powi(fl as i32);
            let s = if payload >> fl == 1 { -1.0 } else { 1.0 };
            s * (1.0 + frac) * 2f64.powi(eff)
        }
        Ok(_) if pattern == 0 => 0.0,
        _ => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook decoding from a string of bits.
    fn oracle(pattern: u32, n: u8, es: u8) -> f64 {
        let bits: Vec<u8> = (0..n).rev().map(|i| ((pattern >> i) & 1) as u8).collect();
        if bits.iter().all(|&b| b == 0) {
            return 0.0;
        }
        if bits[0] == 1 && bits[1..].iter().all(|&b| b == 0) {
            return f64::NAN;
        }
        let negative = bits[0] == 1;
        let mut v: i64 = pattern as i64;
        if negative {
            v = (1i64 << n) - v;
        }
        let bits: Vec<u8> = (0..n).rev().map(|i| ((v >> i) & 1) as u8).collect();
        let mut i = 1;
        let r0 = bits[1];
        let mut run = 0;
        while i < n as usize && bits[i] == r0 {
            run += 1;
            i += 1;
        }
        i += 1; // terminator (may run past the end)
        let k: i32 = if r0 == 1 { run - 1 } else { -run };
        let mut e = 0i32;
        for _ in 0..es {
            e <<= 1;
            if i < n as usize {
                e |= bits[i] as i32;
            }
            i += 1;
        }
        let mut f = 1.0f64;
        let mut w = 0.5;
        while i < n as usize {
            if bits[i] == 1 {
                f += w;
            }
            w /= 2.0;
            i += 1;
        }
        let useed_pow = k * (1 << es) + e;
        let x = f * 2f64.powi(useed_pow);
        if negative {
            -x
        } else {
            x
        }
    }

    #[test]
    fn one_is_exponent_zero() {
        for (n, es) in [(8, 0), (16, 1), (32, 2), (12, 3)] {
            let f = PositFormat::new(n, es).unwrap();
            let s = symbol(1 << (n - 2), f).unwrap();
            assert_eq!(s.mapping, Mapping::Exponent(0));
            assert_eq!(s.payload, 0);
            assert_eq!(s.len as u32, 1 + f.fraction_bits(0) as u32);
        }
    }

    #[test]
    fn posit16_exhaustive_against_oracle() {
        let f = PositFormat::new(16, 1).unwrap();
        for p in 0..=u16::MAX as u32 {
            let s = symbol(p, f).unwrap();
            assert_eq!(value(&s, f).unwrap(), p, "{p:#06x}");
            let want = oracle(p, 16, 1);
            let got = posit_to_real(p, f);
            assert!(want == got || (want.is_nan() && got.is_nan()), "{p:#06x}: {got} vs {want}");
            if let Mapping::Exponent(e) = s.mapping {
                assert_eq!(s.len, 1 + f.fraction_bits(e));
            }
        }
    }

    #[test]
    fn small_formats_exhaustive() {
        for n in 3..=12u8 {
            for es in 0..=4u8 {
                let Ok(f) = PositFormat::new(n, es) else { continue };
                for p in 0..(1u32 << n) {
                    let s = symbol(p, f).unwrap();
                    assert_eq!(value(&s, f).unwrap(), p);
                    let (want, got) = (oracle(p, n, es), posit_to_real(p, f));
                    assert!(want == got || (want.is_nan() && got.is_nan()));
                }
            }
        }
    }

    #[test]
    fn zero_and_nar_need_direct_codes() {
        let f = PositFormat::new(16, 1).unwrap();
        let map = CodeMap::from_entries([(Mapping::DirectValue(0), 0), (Mapping::Exponent(0), 14)]);
        assert_eq!(posit_to_pair(0, f, &map).unwrap(), CodingPair::bare(0));
        assert!(matches!(posit_to_pair(0x8000, f, &map), Err(Error::Unmapped(_))));
        let with_nar = CodeMap::from_entries([(Mapping::DirectValue(0x8000), 0)]);
        let p = posit_to_pair(0x8000, f, &with_nar).unwrap();
        assert_eq!(pair_to_posit(&p, f, &with_nar).unwrap(), 0x8000);
    }

    #[test]
    fn rejects_bad_formats() {
        assert!(PositFormat::new(1, 0).is_err());
        assert!(PositFormat::new(3, 2).is_err());
        assert!(PositFormat::new(33, 0).is_err());
        assert!(PositFormat::new(16, 5).is_err());
    }
}
