//! Probability models over code alphabets.
//!
//! A model assigns every code an integer frequency `n_i` such that the
//! frequencies of all codes add up to exactly `2^N`, where `N` is the
//! precision in bits. Codes are dense: a code's index is its position in
//! [`ProbabilityModel::codes`]. What a code *means* (an exponent, an integer
//! magnitude class, a group mask, ...) is carried by its [`Mapping`], and how
//! many raw payload bits follow it by `payload_bits`.

use std::cmp::Reverse;
use std::fmt;

use crate::error::{Error, Result};
use crate::pair::CodingPair;

/// Largest alphabet a model may hold.
pub const MAX_CODES: usize = 256;

/// Precision used by the rANS coder.
pub const RANS_PRECISION: u8 = 16;
/// Precision used by the tANS coder.
pub const TANS_PRECISION: u8 = 8;

/// What a code stands for once decoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mapping {
    /// Placeholder left by [`normalize_counts`]: the index the code had in
    /// the frequency table it was built from.
    Symbol(u32),
    /// A floating-point exponent. Float formats key on the raw biased field,
    /// posits on the effective (regime and exponent) value.
    Exponent(i32),
    /// A value stored verbatim in the model; the code carries no magnitude
    /// information in its payload.
    DirectValue(u32),
    /// Zero-run length class `k` (position of the nonzero MSB plus one).
    RunLength(u32),
    /// Occupancy mask of a group of eight binary or ternary weights.
    GroupMask(u8),
    /// Integer magnitude class `k` (position of the nonzero MSB plus one).
    IntMagnitude(u32),
    /// The second code given to an exponent for salient ("important")
    /// values, usually with a wider payload.
    ImportantExponent(i32),
    /// Marks a trailing run of zeros with no terminating weight. The payload
    /// is the run length.
    RunTail,
}

impl Mapping {
    pub(crate) fn kind(&self) -> u8 {
        match self {
            Mapping::Symbol(_) => 0,
            Mapping::Exponent(_) => 1,
            Mapping::DirectValue(_) => 2,
            Mapping::RunLength(_) => 3,
            Mapping::GroupMask(_) => 4,
            Mapping::IntMagnitude(_) => 5,
            Mapping::ImportantExponent(_) => 6,
            Mapping::RunTail => 7,
        }
    }

    pub(crate) fn value(&self) -> i32 {
        match *self {
            Mapping::Symbol(v) => v as i32,
            Mapping::Exponent(e) => e,
            Mapping::DirectValue(v) => v as i32,
            Mapping::RunLength(k) => k as i32,
            Mapping::GroupMask(m) => m as i32,
            Mapping::IntMagnitude(k) => k as i32,
            Mapping::ImportantExponent(e) => e,
            Mapping::RunTail => 0,
        }
    }

    pub(crate) fn from_parts(kind: u8, value: i32) -> Option<Self> {
        Some(match kind {
            0 => Mapping::Symbol(value as u32),
            1 => Mapping::Exponent(value),
            2 => Mapping::DirectValue(value as u32),
            3 => Mapping::RunLength(value as u32),
            4 => Mapping::GroupMask(u8::try_from(value).ok()?),
            5 => Mapping::IntMagnitude(value as u32),
            6 => Mapping::ImportantExponent(value),
            7 => Mapping::RunTail,
            _ => return None,
        })
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mapping::Symbol(s) => write!(f, "symbol {s}"),
            Mapping::Exponent(e) => write!(f, "exponent {e}"),
            Mapping::DirectValue(v) => write!(f, "value {v:#x}"),
            Mapping::RunLength(k) => write!(f, "run class {k}"),
            Mapping::GroupMask(m) => write!(f, "group {m:08b}"),
            Mapping::IntMagnitude(k) => write!(f, "magnitude class {k}"),
            Mapping::ImportantExponent(e) => write!(f, "important exponent {e}"),
            Mapping::RunTail => write!(f, "trailing run"),
        }
    }
}

/// One code of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeSpec {
    /// Normalized frequency `n_i`; the code's probability is `n_i / 2^N`.
    pub freq: u32,
    pub payload_bits: u8,
    pub mapping: Mapping,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbabilityModel {
    pub precision_bits: u8,
    pub codes: Vec<CodeSpec>,
}

/// A broken model invariant, as reported by [`validate_model`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnsupportedPrecision(u8),
    Empty,
    TooManyCodes(usize),
    ZeroProbability { code: usize },
    SumMismatch { expected: u64, actual: u64 },
    PayloadTooWide { code: usize, bits: u8 },
    DuplicateMapping { first: usize, second: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnsupportedPrecision(n) => write!(f, "unsupported precision {n}"),
            Violation::Empty => write!(f, "model has no codes"),
            Violation::TooManyCodes(n) => write!(f, "{n} codes exceed the {MAX_CODES}-code alphabet"),
            Violation::ZeroProbability { code } => write!(f, "zero probability for code {code}"),
            Violation::SumMismatch { expected, actual } => {
                write!(f, "sum mismatch: frequencies add to {actual}, expected {expected}")
            }
            Violation::PayloadTooWide { code, bits } => {
                write!(f, "code {code} carries {bits} payload bits (max 32)")
            }
            Violation::DuplicateMapping { first, second } => {
                write!(f, "codes {first} and {second} share a mapping")
            }
        }
    }
}

impl ProbabilityModel {
    /// Builds a model and checks it.
    pub fn new(precision_bits: u8, codes: Vec<CodeSpec>) -> Result<Self> {
        let m = Self {
            precision_bits,
            codes,
        };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        let v = validate_model(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Model(v))
        }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn total(&self) -> u64 {
        1u64 << self.precision_bits
    }

    /// Cumulative frequencies `c_i = n_0 + ... + n_{i-1}`.
    pub fn cumulative(&self) -> Vec<u32> {
        let mut acc = 0u32;
        self.codes
            .iter()
            .map(|c| {
                let start = acc;
                acc = acc.wrapping_add(c.freq);
                start
            })
            .collect()
    }

    pub fn probability(&self, code: usize) -> f64 {
        self.codes[code].freq as f64 / self.total() as f64
    }

    /// Replaces every [`Mapping::Symbol`] placeholder through `f`, which
    /// returns the real mapping and payload width for the original symbol.
    pub fn attach<F>(mut self, mut f: F) -> Result<Self>
    where
        F: FnMut(u32) -> Result<(Mapping, u8)>,
    {
        for c in &mut self.codes {
            if let Mapping::Symbol(s) = c.mapping {
                let (mapping, payload_bits) = f(s)?;
                c.mapping = mapping;
                c.payload_bits = payload_bits;
            }
        }
        self.check()?;
        Ok(self)
    }
}

/// Checks every model invariant and reports all violations found.
pub fn validate_model(model: &ProbabilityModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = model.precision_bits;
    if n != TANS_PRECISION && n != RANS_PRECISION {
        out.push(Violation::UnsupportedPrecision(n));
    }
    if model.codes.is_empty() {
        out.push(Violation::Empty);
    }
    if model.codes.len() > MAX_CODES {
        out.push(Violation::TooManyCodes(model.codes.len()));
    }
    let mut sum = 0u64;
    for (i, c) in model.codes.iter().enumerate() {
        if c.freq == 0 {
            out.push(Violation::ZeroProbability { code: i });
        }
        if c.payload_bits > 32 {
            out.push(Violation::PayloadTooWide {
                code: i,
                bits: c.payload_bits,
            });
        }
        sum += c.freq as u64;
    }
    if !model.codes.is_empty() && n <= 32 && sum != 1u64 << n {
        out.push(Violation::SumMismatch {
            expected: 1u64 << n,
            actual: sum,
        });
    }
    let mut seen: Vec<(Mapping, usize)> = model
        .codes
        .iter()
        .enumerate()
        .filter(|(_, c)| !matches!(c.mapping, Mapping::Symbol(_)))
        .map(|(i, c)| (c.mapping, i))
        .collect();
    seen.sort();
    for w in seen.windows(2) {
        if w[0].0 == w[1].0 {
            out.push(Violation::DuplicateMapping {
                first: w[0].1,
                second: w[1].1,
            });
        }
    }
    out
}

/// Raw occurrence counts per code.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn new(alphabet_size: usize) -> Self {
        Self {
            counts: vec![0; alphabet_size],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    #[inline]
    pub fn add(&mut self, code: usize) -> Result<()> {
        match self.counts.get_mut(code) {
            Some(c) => {
                *c += 1;
                self.total += 1;
                Ok(())
            }
            None => Err(Error::Alphabet {
                code,
                alphabet_size: self.counts.len(),
            }),
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, code: usize) -> u64 {
        self.counts.get(code).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn nonzero(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Shannon entropy of the empirical distribution, in bits per symbol.
    pub fn entropy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let t = self.total as f64;
        self.counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / t;
                -p * p.log2()
            })
            .sum::<f64>()
            + 0.0 // no negative zero for a single symbol
    }
}

/// Tallies how often each code occurs.
pub fn count_codes<'a, I>(pairs: I, alphabet_size: usize) -> Result<FrequencyTable>
where
    I: IntoIterator<Item = &'a CodingPair>,
{
    let mut t = FrequencyTable::new(alphabet_size);
    for p in pairs {
        t.add(p.code() as usize)?;
    }
    Ok(t)
}

/// Turns raw counts into frequencies that add up to `2^precision`.
///
/// Largest-remainder rounding: every code first gets the floor of its exact
/// share (at least one slot if it occurred at all), the leftover slots go to
/// the largest fractional remainders, and any overshoot caused by the
/// one-slot floor is taken back from the largest frequencies. Codes that
/// never occur are dropped; the returned model is dense and each code keeps
/// its table index as a [`Mapping::Symbol`].
pub fn normalize_counts(freq: &FrequencyTable, precision: u8) -> Result<ProbabilityModel> {
    if precision != TANS_PRECISION && precision != RANS_PRECISION {
        return Err(Error::Precision(precision));
    }
    if freq.total() == 0 {
        return Err(Error::EmptyInput);
    }
    let slots = 1u64 << precision;
    let present: Vec<(usize, u64)> = freq
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c))
        .collect();
    if present.len() as u64 > slots || present.len() > MAX_CODES {
        return Err(Error::Capacity {
            codes: present.len(),
            slots: (slots as usize).min(MAX_CODES),
        });
    }

    let total = freq.total() as u128;
    let mut n: Vec<u64> = Vec::with_capacity(present.len());
    let mut rem: Vec<u128> = Vec::with_capacity(present.len());
    let mut clamped: Vec<bool> = Vec::with_capacity(present.len());
    for &(_, c) in &present {
        let scaled = c as u128 * slots as u128;
        let floor = (scaled / total) as u64;
        rem.push(scaled % total);
        clamped.push(floor == 0);
        n.push(floor.max(1));
    }
    let sum: u64 = n.iter().sum();

    if sum < slots {
        let mut order: Vec<usize> = (0..n.len()).filter(|&i| !clamped[i]).collect();
        order.sort_by_key(|&i| (Reverse(rem[i]), i));
        let deficit = (slots - sum) as usize;
        debug_assert!(deficit <= order.len());
        for &i in order.iter().take(deficit) {
            n[i] += 1;
        }
    } else if sum > slots {
        // Take one slot at a time from the current largest frequency. Among
        // equal frequencies the rarer code gives first, which keeps
        // frequencies monotone in the raw counts.
        let mut surplus = sum - slots;
        while surplus > 0 {
            let i = (0..n.len())
                .filter(|&i| n[i] > 1)
                .max_by_key(|&i| (n[i], Reverse(present[i].1), Reverse(i)))
                .expect("a code with more than one slot exists while over budget");
            n[i] -= 1;
            surplus -= 1;
        }
    }

    let codes = present
        .iter()
        .zip(&n)
        .map(|(&(sym, _), &f)| CodeSpec {
            freq: f as u32,
            payload_bits: 0,
            mapping: Mapping::Symbol(sym as u32),
        })
        .collect();
    ProbabilityModel::new(precision, codes)
}

/// Size estimate for an ideal entropy coder using a model's probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealBits {
    pub total_bits: f64,
    pub code_bits: f64,
    pub payload_bits: f64,
    pub pairs: u64,
}

impl IdealBits {
    pub fn average(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.total_bits / self.pairs as f64
        }
    }

    pub fn average_code(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.code_bits / self.pairs as f64
        }
    }
}

/// Bits an ideal coder spends on `freq` under `model`: `-log2(n_k / 2^N)`
/// per code plus its payload bits.
///
/// The frequency table is indexed either by model code or, for codes still
/// carrying a [`Mapping::Symbol`] placeholder, by that symbol.
pub fn ideal_bits(model: &ProbabilityModel, freq: &FrequencyTable) -> Result<IdealBits> {
    let scale = model.total() as f64;
    let mut code_bits = 0.0f64;
    let mut payload_bits = 0.0f64;
    let mut covered = 0u64;
    for (i, c) in model.codes.iter().enumerate() {
        let src = match c.mapping {
            Mapping::Symbol(s) => s as usize,
            _ => i,
        };
        let k = freq.count(src);
        if k == 0 {
            continue;
        }
        covered += k;
        code_bits += k as f64 * -(c.freq as f64 / scale).log2();
        payload_bits += k as f64 * c.payload_bits as f64;
    }
    if covered != freq.total() {
        return Err(Error::contract(format!(
            "frequency table has {} occurrences outside the model's alphabet",
            freq.total() - covered
        )));
    }
    Ok(IdealBits {
        total_bits: code_bits + payload_bits,
        code_bits,
        payload_bits,
        pairs: freq.total(),
    })
}

const MODEL_MAGIC: &[u8; 4] = b"CPM1";

/// Standalone model encoding: magic, precision byte, then the model table
/// used inside stream headers.
pub fn serialize_model(model: &ProbabilityModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(7 + 8 * model.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.push(model.precision_bits);
    write_model_table(model, &mut out);
    out
}

pub fn deserialize_model(bytes: &[u8]) -> Result<ProbabilityModel> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::parse(0, "bad model magic"));
    }
    let precision = *bytes.get(4).ok_or_else(|| Error::parse(4, "missing precision"))?;
    let (model, used) = read_model_table(&bytes[5..], precision, 5)?;
    if 5 + used != bytes.len() {
        return Err(Error::parse(
            (5 + used) as u64,
            "trailing bytes after model table",
        ));
    }
    Ok(model)
}

/// Appends `u16 N_c` and per code `u16 n_i, u8 payload_bits, u8 mapping_kind,
/// i32 mapping_value`, all little-endian. A frequency of `2^16` (a single
/// certain code at 16-bit precision) is written as 0.
pub(crate) fn write_model_table(model: &ProbabilityModel, out: &mut Vec<u8>) {
    out.extend_from_slice(&(model.codes.len() as u16).to_le_bytes());
    for c in &model.codes {
        out.extend_from_slice(&(c.freq as u16).to_le_bytes());
        out.push(c.payload_bits);
        out.push(c.mapping.kind());
        out.extend_from_slice(&c.mapping.value().to_le_bytes());
    }
}

/// Parses a model table, returning the model and the bytes consumed.
/// `base` is the absolute offset of `bytes` for error reporting.
pub(crate) fn read_model_table(
    bytes: &[u8],
    precision: u8,
    base: usize,
) -> Result<(ProbabilityModel, usize)> {
    let at = |off: usize| (base + off) as u64;
    if bytes.len() < 2 {
        return Err(Error::parse(at(0), "truncated model table"));
    }
    let count = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
    if count > MAX_CODES {
        return Err(Error::parse(at(0), format!("{count} codes exceed alphabet")));
    }
    let need = 2 + 8 * count;
    if bytes.len() < need {
        return Err(Error::parse(at(bytes.len()), "truncated model table"));
    }
    let mut codes = Vec::with_capacity(count);
    for i in 0..count {
        let o = 2 + 8 * i;
        let raw = u16::from_le_bytes([bytes[o], bytes[o + 1]]) as u32;
        let freq = if raw == 0 && count == 1 { 1u32 << precision.min(31) } else { raw };
        let payload_bits = bytes[o + 2];
        let kind = bytes[o + 3];
        let value = i32::from_le_bytes(bytes[o + 4..o + 8].try_into().unwrap());
        let mapping = Mapping::from_parts(kind, value)
            .ok_or_else(|| Error::parse(at(o + 3), format!("unknown mapping kind {kind}")))?;
        codes.push(CodeSpec {
            freq,
            payload_bits,
            mapping,
        });
    }
    let model = ProbabilityModel {
        precision_bits: precision,
        codes,
    };
    let v = validate_model(&model);
    if !v.is_empty() {
        return Err(Error::parse(at(0), format!("invalid model: {}", Error::Model(v))));
    }
    Ok((model, need))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(c: &[u64]) -> FrequencyTable {
        FrequencyTable::from_counts(c.to_vec())
    }

    fn freqs(m: &ProbabilityModel) -> Vec<u32> {
        m.codes.iter().map(|c| c.freq).collect()
    }

    /// Hamilton's method written out directly, without the one-slot floor.
    /// Only valid when every exact share is at least one slot.
    fn largest_remainder_oracle(counts: &[u64], slots: u64) -> Vec<u64> {
        let total: u64 = counts.iter().sum();
        let mut shares: Vec<(u64, f64, usize)> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let exact = c as f64 * slots as f64 / total as f64;
                (exact.floor() as u64, exact - exact.floor(), i)
            })
            .collect();
        let given: u64 = shares.iter().map(|s| s.0).sum();
        let mut by_rem = shares.clone();
        by_rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.2.cmp(&b.2)));
        for s in by_rem.iter().take((slots - given) as usize) {
            shares[s.2].0 += 1;
        }
        shares.into_iter().map(|s| s.0).collect()
    }

    #[test]
    fn count_codes_tallies() {
        let pairs = [CodingPair::bare(0), CodingPair::bare(0), CodingPair::bare(3)];
        let t = count_codes(&pairs, 4).unwrap();
        assert_eq!(t.counts(), &[2, 0, 0, 1]);
        assert_eq!(t.total(), 3);

        let empty = count_codes(&[], 4).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(empty.counts().iter().all(|&c| c == 0));

        let err = count_codes(&[CodingPair::bare(4)], 4).unwrap_err();
        assert!(matches!(err, Error::Alphabet { code: 4, alphabet_size: 4 }));
    }

    #[test]
    fn normalize_symmetric_pair() {
        let m = normalize_counts(&table(&[1, 1]), 8).unwrap();
        assert_eq!(freqs(&m), vec![128, 128]);
    }

    #[test]
    fn normalize_three_to_one() {
        let m = normalize_counts(&table(&[3, 1]), 8).unwrap();
        let oracle = largest_remainder_oracle(&[3, 1], 256);
        assert_eq!(oracle, vec![192, 64]);
        assert_eq!(freqs(&m), vec![192, 64]);
    }

    #[test]
    fn normalize_floor_to_one() {
        let m = normalize_counts(&table(&[1 << 20, 1]), 8).unwrap();
        assert_eq!(freqs(&m), vec![255, 1]);
    }

    #[test]
    fn normalize_matches_oracle_without_clamping() {
        let counts = [1000, 2345, 77, 12, 999, 5000, 64];
        let m = normalize_counts(&table(&counts), 16).unwrap();
        let want: Vec<u32> = largest_remainder_oracle(&counts, 1 << 16)
            .into_iter()
            .map(|v| v as u32)
            .collect();
        assert_eq!(freqs(&m), want);
    }

    #[test]
    fn normalize_drops_absent_codes() {
        let m = normalize_counts(&table(&[0, 5, 0, 5]), 8).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.codes[0].mapping, Mapping::Symbol(1));
        assert_eq!(m.codes[1].mapping, Mapping::Symbol(3));
    }

    #[test]
    fn normalize_errors() {
        assert!(matches!(
            normalize_counts(&table(&[0, 0]), 8),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            normalize_counts(&table(&vec![1; 257]), 8),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(
            normalize_counts(&table(&[1, 2]), 12),
            Err(Error::Precision(12))
        ));
        // exactly 256 codes at 8 bits is legal: one slot each
        let m = normalize_counts(&table(&vec![7; 256]), 8).unwrap();
        assert!(m.codes.iter().all(|c| c.freq == 1));
    }

    #[test]
    fn normalize_surplus_takes_from_largest() {
        // 200 rare codes each forced up to one slot leave 56 for the rest.
        let mut counts = vec![1u64; 200];
        counts.push(1_000_000);
        counts.push(500_000);
        let m = normalize_counts(&table(&counts), 8).unwrap();
        let f = freqs(&m);
        assert_eq!(f.iter().map(|&x| x as u64).sum::<u64>(), 256);
        assert!(f[..200].iter().all(|&x| x == 1));
        assert!(f[200] >= f[201]);
        assert_eq!(f[200] + f[201], 56);
    }

    #[test]
    fn ideal_bits_examples() {
        let single = ProbabilityModel::new(
            16,
            vec![CodeSpec {
                freq: 1 << 16,
                payload_bits: 8,
                mapping: Mapping::Exponent(127),
            }],
        )
        .unwrap();
        let r = ideal_bits(&single, &table(&[100])).unwrap();
        assert_eq!(r.total_bits, 800.0);
        assert_eq!(r.average(), 8.0);

        let two = ProbabilityModel::new(
            16,
            vec![
                CodeSpec { freq: 1 << 15, payload_bits: 0, mapping: Mapping::IntMagnitude(0) },
                CodeSpec { freq: 1 << 15, payload_bits: 0, mapping: Mapping::IntMagnitude(1) },
            ],
        )
        .unwrap();
        let r = ideal_bits(&two, &table(&[1, 1])).unwrap();
        assert_eq!(r.total_bits, 2.0);
    }

    #[test]
    fn ideal_bits_rejects_uncovered_counts() {
        let m = normalize_counts(&table(&[4, 0, 4]), 8).unwrap();
        assert!(ideal_bits(&m, &table(&[4, 0, 4])).is_ok());
        assert!(ideal_bits(&m, &table(&[4, 1, 4])).is_err());
    }

    #[test]
    fn validate_reports_every_violation() {
        let m = ProbabilityModel {
            precision_bits: 8,
            codes: vec![
                CodeSpec { freq: 255, payload_bits: 0, mapping: Mapping::Exponent(1) },
                CodeSpec { freq: 0, payload_bits: 40, mapping: Mapping::Exponent(1) },
            ],
        };
        let v = validate_model(&m);
        assert!(v.contains(&Violation::ZeroProbability { code: 1 }));
        assert!(v.contains(&Violation::SumMismatch { expected: 256, actual: 255 }));
        assert!(v.contains(&Violation::PayloadTooWide { code: 1, bits: 40 }));
        assert!(v.contains(&Violation::DuplicateMapping { first: 0, second: 1 }));
        assert!(v.iter().any(|x| x.to_string().contains("sum mismatch")));
        assert!(v.iter().any(|x| x.to_string().contains("zero probability")));
    }

    #[test]
    fn validate_accepts_31_exponent_model() {
        let mut codes: Vec<CodeSpec> = (0..31)
            .map(|e| CodeSpec { freq: 2, payload_bits: 8, mapping: Mapping::Exponent(100 + e) })
            .collect();
        codes[0].freq = 256 - 60;
        let m = ProbabilityModel { precision_bits: 8, codes };
        assert!(validate_model(&m).is_empty());
    }

    #[test]
    fn serialize_round_trip_mixed_mappings() {
        let mappings = [
            Mapping::Exponent(-3),
            Mapping::DirectValue(0xdead_beef),
            Mapping::RunLength(5),
            Mapping::GroupMask(0b0110_0100),
            Mapping::IntMagnitude(11),
            Mapping::ImportantExponent(127),
            Mapping::RunTail,
            Mapping::Symbol(9),
        ];
        let codes: Vec<CodeSpec> = (0..64)
            .map(|i| CodeSpec {
                freq: 1024,
                payload_bits: (i % 33) as u8,
                mapping: match mappings[i % 8] {
                    Mapping::Exponent(e) => Mapping::Exponent(e + i as i32),
                    Mapping::DirectValue(v) => Mapping::DirectValue(v ^ i as u32),
                    Mapping::RunLength(k) => Mapping::RunLength(k + i as u32),
                    Mapping::GroupMask(m) => Mapping::GroupMask(m.wrapping_add(i as u8)),
                    Mapping::IntMagnitude(k) => Mapping::IntMagnitude(k + i as u32),
                    Mapping::ImportantExponent(e) => Mapping::ImportantExponent(e - i as i32),
                    Mapping::Symbol(s) => Mapping::Symbol(s + i as u32),
                    Mapping::RunTail if i == 6 => Mapping::RunTail,
                    Mapping::RunTail => Mapping::Symbol(1000 + i as u32),
                },
            })
            .collect();
        let m = ProbabilityModel::new(16, codes).unwrap();
        let back = deserialize_model(&serialize_model(&m)).unwrap();
        for (a, b) in m.codes.iter().zip(&back.codes) {
            assert_eq!(a.freq, b.freq);
            assert_eq!(a.payload_bits, b.payload_bits);
            assert_eq!(a.mapping, b.mapping);
        }
        assert_eq!(m, back);
    }

    #[test]
    fn serialize_single_certain_code() {
        let m = ProbabilityModel::new(
            16,
            vec![CodeSpec { freq: 1 << 16, payload_bits: 3, mapping: Mapping::Exponent(0) }],
        )
        .unwrap();
        assert_eq!(deserialize_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn deserialize_errors_carry_offsets() {
        match deserialize_model(b"XXXX\x08\x00\x00") {
            Err(Error::Parse { offset: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let m = normalize_counts(&table(&[1, 2, 3]), 8).unwrap();
        let bytes = serialize_model(&m);
        match deserialize_model(&bytes[..bytes.len() - 3]) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
