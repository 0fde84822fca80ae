//! Floating-point values as coding pairs: the exponent field picks the code,
//! sign and mantissa ride along as payload.

use crate::error::{Error, Result};
use crate::model::Mapping;
use crate::pair::{low_mask, CodingPair};

use super::{CodeMap, Symbol};

/// Layout of an IEEE-style binary float. The all-ones exponent field is
/// reserved for infinities and NaNs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FloatFormat {
    pub exp_bits: u8,
    pub mant_bits: u8,
    pub has_sign: bool,
    pub bias: i32,
}

impl FloatFormat {
    pub const FP32: Self = Self::ieee(8, 23);
    pub const BF16: Self = Self::ieee(8, 7);
    pub const FP16: Self = Self::ieee(5, 10);
    /// fp11, the bfloat16 range with two mantissa bits.
    pub const E8M2: Self = Self::ieee(8, 2);
    /// fp12, the bfloat16 range with three mantissa bits.
    pub const E8M3: Self = Self::ieee(8, 3);
    pub const E5M2: Self = Self::ieee(5, 2);
    pub const E4M3: Self = Self::ieee(4, 3);

    const fn ieee(exp_bits: u8, mant_bits: u8) -> Self {
        Self {
            exp_bits,
            mant_bits,
            has_sign: true,
            bias: (1 << (exp_bits - 1)) - 1,
        }
    }

    pub fn new(exp_bits: u8, mant_bits: u8, has_sign: bool, bias: i32) -> Result<Self> {
        if !(1..=8).contains(&exp_bits) || mant_bits > 23 {
            return Err(Error::contract(format!(
                "unsupported float layout e{exp_bits}m{mant_bits}"
            )));
        }
        if has_sign as u32 + exp_bits as u32 + mant_bits as u32 > 32 {
            return Err(Error::contract("float wider than 32 bits"));
        }
        Ok(Self {
            exp_bits,
            mant_bits,
            has_sign,
            bias,
        })
    }

    pub fn total_bits(&self) -> u32 {
        self.has_sign as u32 + self.exp_bits as u32 + self.mant_bits as u32
    }

    /// Payload bits per value: sign plus mantissa.
    pub fn payload_bits(&self) -> u8 {
        self.has_sign as u8 + self.mant_bits
    }

    /// The reserved all-ones exponent field.
    pub fn max_field(&self) -> u32 {
        (1 << self.exp_bits) - 1
    }

    #[inline]
    fn split(&self, bits: u32) -> (u32, u32, u32) {
        let m = self.mant_bits as u32;
        let mant = bits & low_mask(self.mant_bits);
        let field = (bits >> m) & low_mask(self.exp_bits);
        let sign = if self.has_sign {
            (bits >> (m + self.exp_bits as u32)) & 1
        } else {
            0
        };
        (sign, field, mant)
    }

    #[inline]
    fn join(&self, sign: u32, field: u32, mant: u32) -> u32 {
        let m = self.mant_bits as u32;
        (sign << (m + self.exp_bits as u32)) | (field << m) | mant
    }

    /// Splits a bit pattern into its exponent field and the payload
    /// `(sign << mant_bits) | mantissa`. Lossless for every pattern.
    #[inline]
    pub fn symbol(&self, bits: u32) -> Symbol {
        let (sign, field, mant) = self.split(bits);
        Symbol::new(
            Mapping::Exponent(field as i32),
            (sign << self.mant_bits) | mant,
            self.payload_bits(),
        )
    }

    /// Inverse of [`FloatFormat::symbol`].
    #[inline]
    pub fn bits(&self, s: &Symbol) -> Result<u32> {
        let Mapping::Exponent(field) = s.mapping else {
            return Err(Error::Unmapped(format!("{} is not an exponent", s.mapping)));
        };
        if field < 0 || field as u32 > self.max_field() || s.len != self.payload_bits() {
            return Err(Error::contract(format!(
                "{} with {} payload bits does not fit e{}m{}",
                s.mapping, s.len, self.exp_bits, self.mant_bits
            )));
        }
        let mant = s.payload & low_mask(self.mant_bits);
        let sign = s.payload >> self.mant_bits;
        Ok(self.join(sign, field as u32, mant))
    }
}

/// Rounds `sig` right by `shift` bits, ties to even.
#[inline]
pub(crate) fn round_shift(sig: u64, shift: u32) -> u64 {
    if shift == 0 {
        return sig;
    }
    if shift >= 64 {
        // only reachable for sig < 2^63, so below half an ulp
        return 0;
    }
    let q = sig >> shift;
    let r = sig & ((1u64 << shift) - 1);
    let half = 1u64 << (shift - 1);
    if r > half || (r == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// Conversion from one float layout to a narrower mantissa with the same
/// exponent range.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Narrowing {
    source: FloatFormat,
    target: FloatFormat,
    drop: u32,
}

impl Narrowing {
    pub(crate) fn new(source: FloatFormat, target: FloatFormat) -> Result<Self> {
        if source.exp_bits != target.exp_bits
            || source.bias != target.bias
            || source.has_sign != target.has_sign
            || target.mant_bits > source.mant_bits
        {
            return Err(Error::contract(format!(
                "cannot code e{}m{} values as e{}m{}",
                source.exp_bits, source.mant_bits, target.exp_bits, target.mant_bits
            )));
        }
        Ok(Self {
            source,
            target,
            drop: (source.mant_bits - target.mant_bits) as u32,
        })
    }

    /// Rounds a source pattern to the target layout. Returns the target
    /// pattern and whether it saturated to the largest finite value.
    #[inline]
    pub(crate) fn round(&self, bits: u32) -> (u32, bool) {
        let (sign, field, mant) = self.source.split(bits);
        if self.drop == 0 {
            return (bits, false);
        }
        let max = self.source.max_field();
        if field == max {
            // infinities stay infinite; NaNs keep a nonzero mantissa
            let m = mant >> self.drop;
            let m = if mant != 0 && m == 0 { 1 } else { m };
            return (self.target.join(sign, field, m), false);
        }
        // exponent field and mantissa form one integer, so a carry out of
        // the mantissa lands in the exponent
        let mag = (field << self.source.mant_bits) | mant;
        let r = round_shift(mag as u64, self.drop) as u32;
        if r >> self.target.mant_bits >= max {
            let top = ((max - 1) << self.target.mant_bits) | low_mask(self.target.mant_bits);
            return (top | sign << (self.target.mant_bits as u32 + self.target.exp_bits as u32), true);
        }
        (r | sign << (self.target.mant_bits as u32 + self.target.exp_bits as u32), false)
    }

    #[inline]
    pub(crate) fn symbol(&self, bits: u32) -> (Symbol, bool) {
        let (t, sat) = self.round(bits);
        (self.target.symbol(t), sat)
    }

    #[inline]
    pub(crate) fn value(&self, s: &Symbol) -> Result<u32> {
        let t = self.target.bits(s)?;
        let (sign, field, mant) = self.target.split(t);
        Ok(self.source.join(sign, field, mant << self.drop))
    }
}

/// Splits a bfloat16 pattern: code from the exponent field, payload is the
/// sign followed by the seven mantissa bits.
pub fn bf16_to_pair(bits: u16, exp_to_code: &CodeMap) -> Result<CodingPair> {
    FloatFormat::BF16.symbol(bits as u32).to_pair(exp_to_code)
}

/// Inverse of [`bf16_to_pair`].
pub fn pair_to_bf16(pair: &CodingPair, code_to_exp: &CodeMap) -> Result<u16> {
    let s = Symbol::from_pair(pair, code_to_exp)?;
    FloatFormat::BF16.bits(&s).map(|b| b as u16)
}

/// Rounds a finite real to `fmt` (nearest, ties to even) and splits it.
/// Returns the pair and whether the value saturated to the largest finite
/// magnitude.
pub fn float_to_pair(
    value: f64,
    fmt: FloatFormat,
    exp_to_code: &CodeMap,
) -> Result<(CodingPair, bool)> {
    let (bits, sat) = round_real(value, fmt)?;
    Ok((fmt.symbol(bits).to_pair(exp_to_code)?, sat))
}

/// Inverse of [`float_to_pair`]; reproduces the rounded value exactly.
pub fn pair_to_float(pair: &CodingPair, fmt: FloatFormat, code_to_exp: &CodeMap) -> Result<f64> {
    let s = Symbol::from_pair(pair, code_to_exp)?;
    Ok(bits_to_real(fmt.bits(&s)?, fmt))
}

/// Rounds a finite real to the nearest `fmt` bit pattern, ties to even.
pub fn round_real(value: f64, fmt: FloatFormat) -> Result<(u32, bool)> {
    if !value.is_finite() {
        return Err(Error::contract("value is not finite"));
    }
    let negative = value.is_sign_negative();
    if negative && !fmt.has_sign && value != 0.0 {
        return Err(Error::contract("negative value for an unsigned format"));
    }
    let sign = (negative && fmt.has_sign) as u32;
    let a = value.abs();
    if a == 0.0 {
        return Ok((fmt.join(sign, 0, 0), false));
    }
    // a = sig * 2^(e - 52) with sig in [2^52, 2^53)
    let raw = a.to_bits();
    let (mut e, sig) = {
        let field = (raw >> 52) as i32;
        let frac = raw & ((1u64 << 52) - 1);
        if field == 0 {
            let lz = frac.leading_zeros() as i32 - 11;
            (-1022 - lz, frac << lz)
        } else {
            (field - 1023, frac | 1 << 52)
        }
    };
    let m = fmt.mant_bits as i32;
    let e_min = 1 - fmt.bias;
    let (field, mant) = if e >= e_min {
        let mut q = round_shift(sig, (52 - m) as u32);
        if q >> (m + 1) != 0 {
            q >>= 1;
            e += 1;
        }
        ((e + fmt.bias) as i64, (q & ((1u64 << m) - 1)) as u32)
    } else {
        let shift = (52 - m + (e_min - e)) as u32;
        let q = round_shift(sig, shift);
        if q >> m != 0 {
            (1, 0)
        } else {
            (0, q as u32)
        }
    };
    let max = fmt.max_field() as i64;
    if field >= max {
        return Ok((fmt.join(sign, max as u32 - 1, low_mask(fmt.mant_bits)), true));
    }
    Ok((fmt.join(sign, field as u32, mant), false))
}

/// Value of a `fmt` bit pattern.
pub fn bits_to_real(bits: u32, fmt: FloatFormat) -> f64 {
    let (sign, field, mant) = fmt.split(bits);
    let s = if sign == 1 { -1.0 } else { 1.0 };
    let m = fmt.mant_bits as i32;
    if field == fmt.max_field() {
        return if mant == 0 { s * f64::INFINITY } else { f64::NAN };
    }
    let (sig, exp) = if field == 0 {
        (mant as f64, 1 - fmt.bias - m)
    } else {
        ((mant | 1 << m) as f64, field as i32 - fmt.bias - m)
    };
    s * sig * 2f64.powi(exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_for(fmt: FloatFormat) -> CodeMap {
        CodeMap::from_entries((0..256).map(|e| (Mapping::Exponent(e), fmt.payload_bits())))
    }

    fn bf16_map() -> CodeMap {
        map_for(FloatFormat::BF16)
    }

    #[test]
    fn one_and_minus_one() {
        let map = CodeMap::from_entries([(Mapping::Exponent(0x7f), 8)]);
        let p = bf16_to_pair(0x3f80, &map).unwrap();
        assert_eq!((p.code(), p.payload(), p.payload_len()), (0, 0x00, 8));
        let n = bf16_to_pair(0xbf80, &map).unwrap();
        assert_eq!((n.code(), n.payload(), n.payload_len()), (0, 0x80, 8));
        assert_eq!(pair_to_bf16(&p, &map).unwrap(), 0x3f80);
        assert_eq!(pair_to_bf16(&n, &map).unwrap(), 0xbf80);
        assert!(matches!(bf16_to_pair(0x4000, &map), Err(Error::Unmapped(_))));
    }

    #[test]
    fn every_bf16_pattern_round_trips() {
        let map = bf16_map();
        for b in 0..=u16::MAX {
            let p = bf16_to_pair(b, &map).unwrap();
            assert_eq!(pair_to_bf16(&p, &map).unwrap(), b);
        }
    }

    #[test]
    fn carry_into_exponent() {
        // mantissa 1111111 rounds up past two bits
        let n = Narrowing::new(FloatFormat::BF16, FloatFormat::E8M2).unwrap();
        let x = 0x3fff; // 1.9921875
        let (t, sat) = n.round(x);
        assert!(!sat);
        assert_eq!(t >> 2 & 0xff, 0x80);
        assert_eq!(t & 3, 0);
        assert_eq!(bits_to_real(t, FloatFormat::E8M2), 2.0);
    }

    #[test]
    fn narrowing_saturates() {
        let n = Narrowing::new(FloatFormat::BF16, FloatFormat::E8M2).unwrap();
        let (t, sat) = n.round(0x7f7f); // largest finite bf16
        assert!(sat);
        assert_eq!(t, (0xfe << 2) | 3);
        let (t, sat) = n.round(0xff80); // -inf stays -inf
        assert!(!sat);
        assert_eq!(bits_to_real(t, FloatFormat::E8M2), f64::NEG_INFINITY);
        let (t, _) = n.round(0x7f81); // NaN stays NaN
        assert!(bits_to_real(t, FloatFormat::E8M2).is_nan());
    }

    /// Rounding oracle working on exact rationals in wide integers.
    fn oracle_round(value: f64, fmt: FloatFormat) -> f64 {
        let m = fmt.mant_bits as i32;
        let e_min = 1 - fmt.bias;
        let a = value.abs();
        let e = if a == 0.0 { e_min } else { ((a.to_bits() >> 52) as i32 - 1023).max(e_min) };
        // candidates straddling `a` on the grid of spacing 2^(e - m)
        let ulp = 2f64.powi(e - m);
        let lo = (a / ulp).floor();
        let r = a / ulp - lo;
        let k = if r > 0.5 || (r == 0.5 && lo % 2.0 == 1.0) { lo + 1.0 } else { lo };
        let out = k * ulp;
        let max = (2.0 - 2f64.powi(-m)) * 2f64.powi(fmt.max_field() as i32 - 1 - fmt.bias);
        value.signum() * out.min(max)
    }

    #[test]
    fn rounding_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for fmt in [FloatFormat::E8M2, FloatFormat::E8M3, FloatFormat::BF16] {
            let map = map_for(fmt);
            for _ in 0..20_000 {
                let v: f64 = (rng.random::<f64>() - 0.5) * 2f64.powi(rng.random_range(-140..128));
                let (p, _) = float_to_pair(v, fmt, &map).unwrap();
                let back = pair_to_float(&p, fmt, &map).unwrap();
                assert_eq!(back, oracle_round(v, fmt), "{v:e} in e8m{}", fmt.mant_bits);
            }
        }
        let fp16 = CodeMap::from_entries((0..32).map(|e| (Mapping::Exponent(e), 11)));
        for _ in 0..20_000 {
            let v: f64 = (rng.random::<f64>() - 0.5) * 2f64.powi(rng.random_range(-26..17));
            let (p, _) = float_to_pair(v, FloatFormat::FP16, &fp16).unwrap();
            let back = pair_to_float(&p, FloatFormat::FP16, &fp16).unwrap();
            assert_eq!(back, oracle_round(v, FloatFormat::FP16), "{v:e}");
        }
    }

    #[test]
    fn zero_is_all_zero_payload() {
        let map = map_for(FloatFormat::E8M2);
        let (p, sat) = float_to_pair(0.0, FloatFormat::E8M2, &map).unwrap();
        assert!(!sat);
        assert_eq!((p.code(), p.payload(), p.payload_len()), (0, 0, 3));
    }

    #[test]
    fn real_rounding_agrees_with_bit_narrowing() {
        let n = Narrowing::new(FloatFormat::BF16, FloatFormat::E8M3).unwrap();
        for b in 0..=u16::MAX as u32 {
            let v = bits_to_real(b, FloatFormat::BF16);
            if !v.is_finite() {
                continue;
            }
            let (t, sat) = n.round(b);
            assert_eq!(round_real(v, FloatFormat::E8M3).unwrap(), (t, sat), "{b:#06x}");
        }
    }

    #[test]
    fn overflow_flags_saturation() {
        let map = map_for(FloatFormat::E8M2);
        let (p, sat) = float_to_pair(1e300, FloatFormat::E8M2, &map).unwrap();
        assert!(sat);
        assert_eq!(map.exponent_of(p.code()), Some(0xfe));
        assert!(float_to_pair(f64::NAN, FloatFormat::E8M2, &map).is_err());
    }
}
