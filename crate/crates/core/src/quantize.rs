//! Symmetric linear quantization of weight tensors, and how well the
//! quantized integers compress.

use rayon::prelude::*;

use crate::coder::CoderKind;
use crate::error::{Error, Result};
use crate::formats::{int, Symbol};
use crate::report::{coded_cost, ideal_cost, Cost};

/// Bits of the unquantized weights, for percentages (bfloat16).
pub const ORIGINAL_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantConfig {
    /// Magnitude bits; the sign is extra.
    pub nb: u8,
    /// One scale per tensor rather than one for all of them.
    pub per_tensor: bool,
}

impl QuantConfig {
    pub fn new(nb: u8) -> Result<Self> {
        if !(1..=15).contains(&nb) {
            return Err(Error::contract(format!("N_b = {nb} outside 1..=15")));
        }
        Ok(Self { nb, per_tensor: true })
    }

    /// Largest quantized magnitude, `2^nb - 1`.
    pub fn levels(&self) -> i32 {
        (1 << self.nb) - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    pub values: Vec<i32>,
    /// `max |W|` of the source tensor.
    pub max_abs: f64,
    pub nb: u8,
}

impl Quantized {
    /// Size of one quantization step.
    pub fn step(&self) -> f64 {
        self.max_abs / ((1u32 << self.nb) - 1) as f64
    }
}

fn max_abs(w: &[f32]) -> Result<f64> {
    let mut m = 0.0f64;
    for (i, &x) in w.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::contract(format!("weight {i} is not finite")));
        }
        m = m.max((x as f64).abs());
    }
    if m == 0.0 {
        return Err(Error::contract("degenerate scale: every weight is zero"));
    }
    Ok(m)
}

fn quantize_with(w: &[f32], m: f64, cfg: &QuantConfig) -> Quantized {
    let scale = cfg.levels() as f64 / m;
    Quantized {
        // f64::round rounds half away from zero
        values: w.iter().map(|&x| (scale * x as f64).round() as i32).collect(),
        max_abs: m,
        nb: cfg.nb,
    }
}

/// `q = round((2^nb - 1) / max|W| * W)`, ties away from zero.
pub fn quantize_linear(w: &[f32], cfg: &QuantConfig) -> Result<Quantized> {
    Ok(quantize_with(w, max_abs(w)?, cfg))
}

/// Quantizes several tensors, with a shared scale unless `cfg.per_tensor`.
pub fn quantize_tensors(tensors: &[&[f32]], cfg: &QuantConfig) -> Result<Vec<Quantized>> {
    if cfg.per_tensor {
        return tensors.par_iter().map(|w| quantize_linear(w, cfg)).collect();
    }
    let m = tensors
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| max_abs(t))
        .try_fold(0.0f64, |a, m| m.map(|m| a.max(m)))?;
    if m == 0.0 {
        return Err(Error::contract("degenerate scale: every weight is zero"));
    }
    Ok(tensors.par_iter().map(|w| quantize_with(w, m, cfg)).collect())
}

/// `q * max|W| / (2^nb - 1)`.
pub fn dequantize(q: &Quantized) -> Vec<f32> {
    let step = q.step();
    q.values.iter().map(|&v| (v as f64 * step) as f32).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportCoder {
    Ideal,
    Rans,
    Tans,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantReport {
    pub total_values: u64,
    pub avg_bits_per_weight: f64,
    pub avg_code_bits: f64,
    /// Percent of the size of the same weights as bfloat16.
    pub compressed_fraction: f64,
}

impl QuantReport {
    fn from_cost(c: &Cost) -> Self {
        Self {
            total_values: c.pairs,
            avg_bits_per_weight: c.average(),
            avg_code_bits: c.average_code(),
            compressed_fraction: 100.0 * c.average() / ORIGINAL_BITS as f64,
        }
    }
}

fn int_symbols(q: &[i32]) -> Vec<Symbol> {
    q.iter().map(|&v| int::symbol(v, None)).collect()
}

/// Cost of one tensor under its own model.
pub fn tensor_cost(q: &[i32], coder: ReportCoder) -> Result<Cost> {
    let s = int_symbols(q);
    match coder {
        ReportCoder::Ideal => Ok(ideal_cost(&s)),
        ReportCoder::Rans => coded_cost(&s, CoderKind::Rans16),
        ReportCoder::Tans => coded_cost(&s, CoderKind::Tans8),
    }
}

/// Average bits per weight over `tensors`, each coded with its own model.
pub fn quant_report(tensors: &[&[i32]], coder: ReportCoder) -> Result<QuantReport> {
    let costs: Vec<Cost> = tensors
        .par_iter()
        .map(|q| tensor_cost(q, coder))
        .collect::<Result<_>>()?;
    let mut total = Cost::default();
    for c in &costs {
        total.add(c);
    }
    Ok(QuantReport::from_cost(&total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        let cfg = QuantConfig::new(6).unwrap();
        let q = quantize_linear(&[0.0, 0.5, -0.5, 0.25], &cfg).unwrap();
        assert_eq!(q.values[0], 0);
        assert_eq!(q.values[1], 63);
        assert_eq!(q.values[2], -63);
        // 31.5 rounds away from zero
        assert_eq!(q.values[3], 32);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let cfg = QuantConfig::new(4).unwrap();
        assert!(matches!(quantize_linear(&[0.0; 8], &cfg), Err(Error::Contract(_))));
        assert!(QuantConfig::new(0).is_err());
        assert!(QuantConfig::new(16).is_err());
    }

    #[test]
    fn requantizing_the_grid_is_stable() {
        let w: Vec<f32> = (0..10_000).map(|i| ((i as f32) * 0.37).sin() * 0.03).collect();
        let cfg = QuantConfig::new(8).unwrap();
        let q = quantize_linear(&w, &cfg).unwrap();
        let q2 = quantize_linear(&dequantize(&q), &cfg).unwrap();
        assert_eq!(q.values, q2.values);
    }

    #[test]
    fn shared_scale() {
        let a = [0.5f32, -0.25];
        let b = [1.0f32, 0.1];
        let mut cfg = QuantConfig::new(3).unwrap();
        cfg.per_tensor = false;
        let q = quantize_tensors(&[&a, &b], &cfg).unwrap();
        assert_eq!(q[0].values, vec![4, -2]);
        assert_eq!(q[1].values, vec![7, 1]);
    }

    #[test]
    fn report_orders_coders() {
        let w: Vec<f32> = (0..100_000).map(|i| ((i as f32) * 0.731).sin().powi(3)).collect();
        let q = quantize_linear(&w, &QuantConfig::new(8).unwrap()).unwrap();
        let r = |c| quant_report(&[&q.values], c).unwrap().avg_bits_per_weight;
        let (i, ra, t) = (r(ReportCoder::Ideal), r(ReportCoder::Rans), r(ReportCoder::Tans));
        assert!(i <= ra && ra <= t, "{i} {ra} {t}");
    }
}
