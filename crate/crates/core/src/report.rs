//! Size estimates and measurements: ideal entropy coder, the fixed-width
//! "simple" code, and what the real coders achieve.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::coder::{encode_reversed, CoderKind, CoderTables};
use crate::error::Result;
use crate::formats::{Format, Symbol};
use crate::model::{FrequencyTable, Mapping};
use crate::pipeline::model_symbols;

/// Bits spent on a pair sequence, split into codes and payloads.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cost {
    pub pairs: u64,
    pub code_bits: f64,
    pub payload_bits: f64,
}

impl Cost {
    pub fn total_bits(&self) -> f64 {
        self.code_bits + self.payload_bits
    }

    /// Bits per pair.
    pub fn average(&self) -> f64 {
        per(self.total_bits(), self.pairs)
    }

    pub fn average_code(&self) -> f64 {
        per(self.code_bits, self.pairs)
    }

    pub fn add(&mut self, other: &Cost) {
        self.pairs += other.pairs;
        self.code_bits += other.code_bits;
        self.payload_bits += other.payload_bits;
    }
}

fn per(bits: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        bits / n as f64
    }
}

/// Occurrences and payload width of each distinct symbol meaning.
pub fn symbol_counts(symbols: &[Symbol]) -> BTreeMap<Mapping, (u64, u8)> {
    let mut m = BTreeMap::new();
    for s in symbols {
        m.entry(s.mapping).or_insert((0, s.len)).0 += 1;
    }
    m
}

/// An ideal entropy coder: `-log2(p)` bits per code with `p` the empirical
/// frequency, plus every payload bit.
pub fn ideal_cost(symbols: &[Symbol]) -> Cost {
    let counts = symbol_counts(symbols);
    let freq = FrequencyTable::from_counts(counts.values().map(|&(c, _)| c).collect());
    Cost {
        pairs: symbols.len() as u64,
        code_bits: freq.entropy() * symbols.len() as f64,
        payload_bits: symbols.iter().map(|s| s.len as f64).sum(),
    }
}

/// Fixed-width codes: `ceil(log2(distinct symbols))` bits each.
pub fn simple_cost(symbols: &[Symbol]) -> Cost {
    let distinct = symbol_counts(symbols).len() as u64;
    let width = if distinct <= 1 { 0 } else { 64 - (distinct - 1).leading_zeros() };
    Cost {
        pairs: symbols.len() as u64,
        code_bits: width as f64 * symbols.len() as f64,
        payload_bits: symbols.iter().map(|s| s.len as f64).sum(),
    }
}

/// Encodes `symbols` with one lane of `kind` under a model fitted to them
/// and measures the result: the bit channel plus the final coder state.
/// The model table is not counted.
pub fn coded_cost(symbols: &[Symbol], kind: CoderKind) -> Result<Cost> {
    if symbols.is_empty() {
        return Ok(Cost::default());
    }
    let (model, pairs, _) = model_symbols(symbols, kind.precision())?;
    let tables = CoderTables::new(kind, &model)?;
    let payload = encode_reversed(&tables, &pairs)?;
    let payload_bits: f64 = symbols.iter().map(|s| s.len as f64).sum();
    Ok(Cost {
        pairs: symbols.len() as u64,
        code_bits: payload.compressed_bits(kind) as f64 - payload_bits,
        payload_bits,
    })
}

/// One line of a size table.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeRow {
    pub method: String,
    pub size_bytes: u64,
    /// Percent of the original size.
    pub percent: f64,
    pub avg_bits: f64,
    pub avg_code_bits: f64,
}

impl SizeRow {
    pub fn new(method: impl Into<String>, cost: &Cost, original_bits: f64) -> Self {
        Self {
            method: method.into(),
            size_bytes: (cost.total_bits() / 8.0).ceil() as u64,
            percent: if original_bits > 0.0 {
                100.0 * cost.total_bits() / original_bits
            } else {
                0.0
            },
            avg_bits: cost.average(),
            avg_code_bits: cost.average_code(),
        }
    }
}

/// What `analyze` reports about a tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub values: u64,
    pub original_bits: f64,
    /// Symbol meaning and count, in meaning order.
    pub histogram: Vec<(Mapping, u64)>,
    pub simple: Cost,
    pub ideal: Cost,
    pub saturated: u64,
}

impl Analysis {
    pub fn unique_codes(&self) -> usize {
        self.histogram.len()
    }

    /// Distinct exponents (ordinary or important).
    pub fn unique_exponents(&self) -> usize {
        self.histogram
            .iter()
            .filter(|(m, _)| matches!(m, Mapping::Exponent(_) | Mapping::ImportantExponent(_)))
            .count()
    }

    /// Bits per code of the fixed-width scheme.
    pub fn simple_code_bits(&self) -> f64 {
        self.simple.average_code()
    }

    /// `bin,count` lines. Exponent bins are the raw exponent field; other
    /// bins are the code meaning.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin,count\n");
        for (m, c) in &self.histogram {
            match m {
                Mapping::Exponent(e) => writeln!(s, "{e},{c}"),
                other => writeln!(s, "{other},{c}"),
            }
            .unwrap();
        }
        s
    }

    pub fn rows(&self) -> Vec<SizeRow> {
        vec![
            SizeRow::new("simple", &self.simple, self.original_bits),
            SizeRow::new("ideal", &self.ideal, self.original_bits),
        ]
    }
}

/// Splits `values` as `format` and estimates their size. `value_bits` is the
/// stored width of one value, for percentages.
pub fn analyze(values: &[u32], format: &Format, value_bits: u32) -> Result<Analysis> {
    let sym = format.symbolize(values)?;
    Ok(Analysis {
        values: values.len() as u64,
        original_bits: values.len() as f64 * value_bits as f64,
        histogram: symbol_counts(&sym.symbols)
            .into_iter()
            .map(|(m, (c, _))| (m, c))
            .collect(),
        simple: simple_cost(&sym.symbols),
        ideal: ideal_cost(&sym.symbols),
        saturated: sym.saturated,
    })
}

/// Single-threaded coder speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Throughput {
    pub pairs: u64,
    pub encode_pairs_per_sec: f64,
    pub decode_pairs_per_sec: f64,
    pub compressed_bits: u64,
}

/// Times one encode and one decode of `pairs` (codes index `model`) on
/// the calling thread.
pub fn measure_throughput(
    kind: CoderKind,
    model: &crate::model::ProbabilityModel,
    pairs: &[crate::pair::CodingPair],
) -> Result<Throughput> {
    use std::time::Instant;
    let tables = CoderTables::new(kind, model)?;
    let t = Instant::now();
    let payload = encode_reversed(&tables, pairs)?;
    let enc = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let back = crate::coder::decode_forward(&tables, &payload, pairs.len() as u64)?;
    let dec = t.elapsed().as_secs_f64();
    if back.len() != pairs.len() {
        return Err(crate::error::Error::contract("decoded pair count differs"));
    }
    let n = pairs.len() as f64;
    Ok(Throughput {
        pairs: pairs.len() as u64,
        encode_pairs_per_sec: n / enc.max(1e-9),
        decode_pairs_per_sec: n / dec.max(1e-9),
        compressed_bits: payload.compressed_bits(kind),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::FloatFormat;

    fn bf16() -> Format {
        Format::Float {
            source: FloatFormat::BF16,
            target: FloatFormat::BF16,
        }
    }

    #[test]
    fn constant_input_costs_only_payload() {
        let a = analyze(&vec![0x3f80; 1000], &bf16(), 16).unwrap();
        assert_eq!(a.unique_exponents(), 1);
        assert_eq!(a.ideal.average_code(), 0.0);
        assert_eq!(a.ideal.average(), 8.0);
        assert_eq!(a.simple.average(), 8.0);
    }

    #[test]
    fn simple_uses_five_bits_for_up_to_32_exponents() {
        let v: Vec<u32> = (0..32u32).map(|e| (100 + e) << 7 | 5).collect();
        let a = analyze(&v, &bf16(), 16).unwrap();
        assert_eq!(a.unique_exponents(), 32);
        assert_eq!(a.simple.average(), 13.0);
        assert_eq!(a.simple_code_bits(), 5.0);
        // uniform over 32 codes: the ideal coder needs 5 bits too
        assert!((a.ideal.average_code() - 5.0).abs() < 1e-12);
        let mut v2 = v.clone();
        v2.push(99 << 7);
        assert_eq!(analyze(&v2, &bf16(), 16).unwrap().simple_code_bits(), 6.0);
    }

    #[test]
    fn histogram_csv_lists_exponents() {
        let a = analyze(&[0x3f80, 0x3f81, 0x4000], &bf16(), 16).unwrap();
        assert_eq!(a.histogram_csv(), "bin,count\n127,2\n128,1\n");
    }

    #[test]
    fn coders_stay_above_the_entropy() {
        let v: Vec<u32> = (0..50_000u32)
            .map(|i| (120 + (i.wrapping_mul(2654435761) >> 28).min(i % 7)) << 7)
            .collect();
        let s = bf16().symbolize(&v).unwrap().symbols;
        let ideal = ideal_cost(&s);
        let r = coded_cost(&s, CoderKind::Rans16).unwrap();
        let t = coded_cost(&s, CoderKind::Tans8).unwrap();
        assert!(ideal.total_bits() <= r.total_bits());
        assert!(r.total_bits() <= t.total_bits());
        assert!(r.total_bits() <= ideal.total_bits() * 1.001 + 128.0);
    }
}
