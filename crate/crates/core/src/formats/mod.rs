//! Adapters between numeric encodings and coding pairs.
//!
//! Each adapter splits a value into a *meaning* (a [`Mapping`]: exponent,
//! magnitude class, group mask, ...) and raw payload bits. A [`CodeMap`]
//! built from a model turns meanings into the model's dense code indices and
//! back, the way a small look-up table sits between a decompressor and a
//! compute engine.

pub mod direct;
pub mod fixed;
pub mod float;
pub mod int;
pub mod posit;
pub mod saliency;
pub mod ternary;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Mapping, ProbabilityModel};
use crate::pair::CodingPair;

pub use float::FloatFormat;
pub use posit::PositFormat;

/// A coding pair whose code is still named by its meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub mapping: Mapping,
    pub payload: u32,
    pub len: u8,
}

impl Symbol {
    #[inline]
    pub fn new(mapping: Mapping, payload: u32, len: u8) -> Self {
        Self {
            mapping,
            payload,
            len,
        }
    }

    #[inline]
    pub fn to_pair(&self, map: &CodeMap) -> Result<CodingPair> {
        let code = map
            .code(&self.mapping)
            .ok_or_else(|| Error::Unmapped(self.mapping.to_string()))?;
        if map.payload_bits(code) != self.len {
            return Err(Error::contract(format!(
                "{} carries {} payload bits, model expects {}",
                self.mapping,
                self.len,
                map.payload_bits(code)
            )));
        }
        Ok(CodingPair::masked(code, self.payload, self.len))
    }

    #[inline]
    pub fn from_pair(pair: &CodingPair, map: &CodeMap) -> Result<Self> {
        let mapping = map
            .mapping(pair.code())
            .ok_or_else(|| Error::Unmapped(format!("code {}", pair.code())))?;
        Ok(Self::new(mapping, pair.payload(), pair.payload_len()))
    }
}

/// Dense range of integer keys to codes.
#[derive(Clone, Debug, Default)]
struct KeyLut {
    min: i64,
    table: Vec<u16>,
}

const NONE: u16 = u16::MAX;

impl KeyLut {
    fn build(entries: &[(i64, u8)]) -> Self {
        let Some(min) = entries.iter().map(|e| e.0).min() else {
            return Self::default();
        };
        let max = entries.iter().map(|e| e.0).max().unwrap();
        let mut table = vec![NONE; (max - min + 1) as usize];
        for &(k, c) in entries {
            table[(k - min) as usize] = c as u16;
        }
        Self { min, table }
    }

    #[inline]
    fn get(&self, key: i64) -> Option<u8> {
        let i = key.checked_sub(self.min)?;
        match self.table.get(usize::try_from(i).ok()?) {
            Some(&c) if c != NONE => Some(c as u8),
            _ => None,
        }
    }
}

/// Two-way map between code meanings and a model's code indices.
#[derive(Clone, Debug, Default)]
pub struct CodeMap {
    entries: Vec<(Mapping, u8)>,
    symbol: KeyLut,
    exponent: KeyLut,
    important: KeyLut,
    run: KeyLut,
    int: KeyLut,
    mask: KeyLut,
    tail: Option<u8>,
    direct: HashMap<u32, u8>,
}

impl CodeMap {
    pub fn from_model(model: &ProbabilityModel) -> Self {
        Self::from_entries(model.codes.iter().map(|c| (c.mapping, c.payload_bits)))
    }

    /// Code `i` is the `i`-th entry.
    pub fn from_entries<I: IntoIterator<Item = (Mapping, u8)>>(entries: I) -> Self {
        let entries: Vec<(Mapping, u8)> = entries.into_iter().collect();
        let mut by_kind: [Vec<(i64, u8)>; 6] = Default::default();
        let mut tail = None;
        let mut direct = HashMap::new();
        for (i, (m, _)) in entries.iter().enumerate() {
            let code = i as u8;
            match *m {
                Mapping::Symbol(s) => by_kind[0].push((s as i64, code)),
                Mapping::Exponent(e) => by_kind[1].push((e as i64, code)),
                Mapping::ImportantExponent(e) => by_kind[2].push((e as i64, code)),
                Mapping::RunLength(k) => by_kind[3].push((k as i64, code)),
                Mapping::IntMagnitude(k) => by_kind[4].push((k as i64, code)),
                Mapping::GroupMask(g) => by_kind[5].push((g as i64, code)),
                Mapping::RunTail => tail = Some(code),
                Mapping::DirectValue(v) => {
                    direct.insert(v, code);
                }
            }
        }
        let [symbol, exponent, important, run, int, mask] = by_kind.map(|e| KeyLut::build(&e));
        Self {
            entries,
            symbol,
            exponent,
            important,
            run,
            int,
            mask,
            tail,
            direct,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn code(&self, m: &Mapping) -> Option<u8> {
        match *m {
            Mapping::Symbol(s) => self.symbol.get(s as i64),
            Mapping::Exponent(e) => self.exponent.get(e as i64),
            Mapping::ImportantExponent(e) => self.important.get(e as i64),
            Mapping::RunLength(k) => self.run.get(k as i64),
            Mapping::IntMagnitude(k) => self.int.get(k as i64),
            Mapping::GroupMask(g) => self.mask.get(g as i64),
            Mapping::RunTail => self.tail,
            Mapping::DirectValue(v) => self.direct.get(&v).copied(),
        }
    }

    #[inline]
    pub fn exponent(&self, e: i32) -> Option<u8> {
        self.exponent.get(e as i64)
    }

    #[inline]
    pub fn mapping(&self, code: u8) -> Option<Mapping> {
        self.entries.get(code as usize).map(|e| e.0)
    }

    #[inline]
    pub fn payload_bits(&self, code: u8) -> u8 {
        self.entries[code as usize].1
    }

    /// Exponent a code stands for, if it is an exponent code.
    pub fn exponent_of(&self, code: u8) -> Option<i32> {
        match self.mapping(code)? {
            Mapping::Exponent(e) => Some(e),
            _ => None,
        }
    }
}

/// Which encoding a stream of values uses. Serialized into stream headers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Format {
    /// Bare coding pairs, no value semantics.
    Pairs,
    /// Floating point given as `source` bit patterns, coded as `target`
    /// (same exponent width, mantissa rounded when narrower).
    Float { source: FloatFormat, target: FloatFormat },
    Posit(PositFormat),
    /// Signed integers with magnitude below `2^nb`.
    Int { nb: u8, max_payload: Option<u8> },
    TernaryRuns { binary: bool },
    TernaryGroups { binary: bool },
    /// Values of `width` bits coded one code per distinct value.
    Direct { width: u8, values: Vec<u32> },
    /// Floats with an importance flag in bit 31 of each value; ordinary and
    /// important values get separate codes with their own mantissa widths.
    Saliency {
        source: FloatFormat,
        ordinary_mant: u8,
        important_mant: u8,
    },
    /// Two's complement fixed point with `frac_bits` fraction bits.
    FixedPoint { frac_bits: u8, mant_bits: u8 },
}

/// Result of splitting values into symbols.
#[derive(Clone, Debug, Default)]
pub struct Symbolized {
    pub symbols: Vec<Symbol>,
    /// Values clamped because they fell outside the target range.
    pub saturated: u64,
}

impl Format {
    /// Splits raw values into symbols. Values are bit patterns, or two's
    /// complement integers reinterpreted as `u32`.
    pub fn symbolize(&self, values: &[u32]) -> Result<Symbolized> {
        let mut saturated = 0u64;
        let symbols = match self {
            Format::Pairs => {
                return Err(Error::contract("bare pair streams carry no values"));
            }
            Format::Float { source, target } => {
                let conv = float::Narrowing::new(*source, *target)?;
                values
                    .iter()
                    .map(|&v| {
                        let (s, sat) = conv.symbol(v);
                        saturated += sat as u64;
                        s
                    })
                    .collect()
            }
            Format::Posit(p) => values
                .iter()
                .map(|&v| posit::symbol(v, *p))
                .collect::<Result<_>>()?,
            Format::Int { nb, max_payload } => {
                let limit = (1i64 << nb) - 1;
                values
                    .iter()
                    .map(|&v| {
                        let v = v as i32;
                        if (v as i64).abs() > limit {
                            return Err(Error::contract(format!(
                                "integer {v} exceeds the {nb}-bit magnitude range"
                            )));
                        }
                        Ok(int::symbol(v, *max_payload))
                    })
                    .collect::<Result<_>>()?
            }
            Format::TernaryRuns { binary } => {
                let w = ternary::weights_from_values(values, *binary)?;
                ternary::runs_to_symbols(&ternary::ternary_to_runs(&w, *binary), *binary)?
            }
            Format::TernaryGroups { binary } => {
                let w = ternary::weights_from_values(values, *binary)?;
                ternary::group_symbols(&w, *binary)
            }
            Format::Direct { width, values: table } => {
                let allowed: Option<std::collections::HashSet<u32>> =
                    (!table.is_empty()).then(|| table.iter().copied().collect());
                let mask = crate::pair::low_mask(*width);
                values
                    .iter()
                    .map(|&v| {
                        if v & !mask != 0 {
                            return Err(Error::contract(format!(
                                "value {v:#x} wider than {width} bits"
                            )));
                        }
                        if let Some(a) = &allowed {
                            if !a.contains(&v) {
                                return Err(Error::Unmapped(format!("value {v:#x}")));
                            }
                        }
                        Ok(direct::symbol(v))
                    })
                    .collect::<Result<_>>()?
            }
            Format::Saliency {
                source,
                ordinary_mant,
                important_mant,
            } => {
                let s = saliency::Salient::new(*source, *ordinary_mant, *important_mant)?;
                values
                    .iter()
                    .map(|&v| {
                        let (sym, sat) = s.symbol(v & 0x7fff_ffff, v >> 31 == 1);
                        saturated += sat as u64;
                        sym
                    })
                    .collect()
            }
            Format::FixedPoint {
                frac_bits,
                mant_bits,
            } => values
                .iter()
                .map(|&v| fixed::symbol(v as i32 as i64, *frac_bits, *mant_bits))
                .collect::<Result<_>>()?,
        };
        Ok(Symbolized { symbols, saturated })
    }

    /// Rebuilds values from symbols. `count` is the number of values that
    /// were symbolized (needed by the group and run layouts).
    pub fn desymbolize(&self, symbols: &[Symbol], count: usize) -> Result<Vec<u32>> {
        Ok(match self {
            Format::Pairs => return Err(Error::contract("bare pair streams carry no values")),
            Format::Float { source, target } => {
                let conv = float::Narrowing::new(*source, *target)?;
                symbols
                    .iter()
                    .map(|s| conv.value(s))
                    .collect::<Result<_>>()?
            }
            Format::Posit(p) => symbols
                .iter()
                .map(|s| posit::value(s, *p))
                .collect::<Result<_>>()?,
            Format::Int { .. } => symbols
                .iter()
                .map(|s| int::value(s).map(|v| v as u32))
                .collect::<Result<_>>()?,
            Format::TernaryRuns { binary } => {
                let runs = ternary::symbols_to_runs(symbols, *binary)?;
                ternary::runs_to_ternary(&runs)
                    .into_iter()
                    .map(|w| w as i32 as u32)
                    .collect()
            }
            Format::TernaryGroups { binary } => {
                let mut w = ternary::groups_from_symbols(symbols, *binary)?;
                if w.len() < count {
                    return Err(Error::contract("group stream shorter than value count"));
                }
                w.truncate(count);
                w.into_iter().map(|w| w as i32 as u32).collect()
            }
            Format::Direct { .. } => symbols
                .iter()
                .map(direct::value)
                .collect::<Result<_>>()?,
            Format::Saliency {
                source,
                ordinary_mant,
                important_mant,
            } => {
                let s = saliency::Salient::new(*source, *ordinary_mant, *important_mant)?;
                symbols
                    .iter()
                    .map(|sym| s.value(sym).map(|(v, imp)| v | (imp as u32) << 31))
                    .collect::<Result<_>>()?
            }
            Format::FixedPoint { frac_bits, .. } => symbols
                .iter()
                .map(|s| fixed::value(s, *frac_bits).map(|v| v as i32 as u32))
                .collect::<Result<_>>()?,
        })
    }

    fn tag(&self) -> u8 {
        match self {
            Format::Pairs => 1,
            Format::Float { .. } => 2,
            Format::Posit(_) => 3,
            Format::Int { .. } => 4,
            Format::TernaryRuns { .. } => 5,
            Format::TernaryGroups { .. } => 6,
            Format::Direct { .. } => 7,
            Format::Saliency { .. } => 8,
            Format::FixedPoint { .. } => 9,
        }
    }

    fn value_bytes(&self) -> Vec<u8> {
        fn float(f: &FloatFormat, out: &mut Vec<u8>) {
            out.push(f.exp_bits);
            out.push(f.mant_bits);
            out.push(f.has_sign as u8);
            out.extend_from_slice(&(f.bias as i16).to_le_bytes());
        }
        let mut v = Vec::new();
        match self {
            Format::Pairs => {}
            Format::Float { source, target } => {
                float(source, &mut v);
                float(target, &mut v);
            }
            Format::Posit(p) => v.extend_from_slice(&[p.n, p.es]),
            Format::Int { nb, max_payload } => v.extend_from_slice(&[*nb, max_payload.unwrap_or(0)]),
            Format::TernaryRuns { binary } | Format::TernaryGroups { binary } => v.push(*binary as u8),
            Format::Direct { width, values } => {
                v.push(*width);
                v.extend_from_slice(&(values.len() as u32).to_le_bytes());
                for x in values {
                    v.extend_from_slice(&x.to_le_bytes());
                }
            }
            Format::Saliency {
                source,
                ordinary_mant,
                important_mant,
            } => {
                float(source, &mut v);
                v.extend_from_slice(&[*ordinary_mant, *important_mant]);
            }
            Format::FixedPoint {
                frac_bits,
                mant_bits,
            } => v.extend_from_slice(&[*frac_bits, *mant_bits]),
        }
        v
    }

    fn from_tlv(tag: u8, v: &[u8], offset: u64) -> Result<Self> {
        let bad = || Error::parse(offset, format!("malformed format descriptor (tag {tag})"));
        let float = |b: &[u8]| -> Result<FloatFormat> {
            if b.len() < 5 {
                return Err(bad());
            }
            FloatFormat::new(b[0], b[1], b[2] != 0, i16::from_le_bytes([b[3], b[4]]) as i32)
                .map_err(|_| bad())
        };
        let f = match (tag, v.len()) {
            (1, 0) => Format::Pairs,
            (2, 10) => Format::Float {
                source: float(&v[..5])?,
                target: float(&v[5..])?,
            },
            (3, 2) => Format::Posit(PositFormat::new(v[0], v[1]).map_err(|_| bad())?),
            (4, 2) => Format::Int {
                nb: v[0],
                max_payload: (v[1] != 0).then_some(v[1]),
            },
            (5, 1) => Format::TernaryRuns { binary: v[0] != 0 },
            (6, 1) => Format::TernaryGroups { binary: v[0] != 0 },
            (7, n) if n >= 5 => {
                let count = u32::from_le_bytes(v[1..5].try_into().unwrap()) as usize;
                if n != 5 + 4 * count {
                    return Err(bad());
                }
                let values = v[5..]
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Format::Direct {
                    width: v[0],
                    values,
                }
            }
            (8, 7) => Format::Saliency {
                source: float(&v[..5])?,
                ordinary_mant: v[5],
                important_mant: v[6],
            },
            (9, 2) => Format::FixedPoint {
                frac_bits: v[0],
                mant_bits: v[1],
            },
            _ => return Err(bad()),
        };
        Ok(f)
    }
}

/// Raw layout of values in a tensor file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleType {
    Bf16,
    F16,
    F32,
    /// fp32 whose low 16 bits are zero padding around a bfloat16.
    F32PaddedBf16,
    I8,
    I16,
    I32,
    U8,
    U16,
    U32,
}

impl SampleType {
    pub fn bytes(self) -> usize {
        match self {
            SampleType::I8 | SampleType::U8 => 1,
            SampleType::Bf16 | SampleType::F16 | SampleType::I16 | SampleType::U16 => 2,
            SampleType::F32 | SampleType::F32PaddedBf16 | SampleType::I32 | SampleType::U32 => 4,
        }
    }

    fn to_byte(self) -> u8 {
        self as u8
    }

    fn from_byte(b: u8) -> Option<Self> {
        use SampleType::*;
        [Bf16, F16, F32, F32PaddedBf16, I8, I16, I32, U8, U16, U32]
            .get(b as usize)
            .copied()
    }

    /// Reads little-endian samples. Signed types are sign-extended to 32
    /// bits; padded fp32 is reduced to its bfloat16 half.
    pub fn decode(self, bytes: &[u8]) -> Result<Vec<u32>> {
        let w = self.bytes();
        if bytes.len() % w != 0 {
            return Err(Error::parse(
                (bytes.len() - bytes.len() % w) as u64,
                format!("file length is not a multiple of {w} bytes"),
            ));
        }
        let chunks = bytes.chunks_exact(w);
        Ok(match self {
            SampleType::I8 => chunks.map(|c| c[0] as i8 as i32 as u32).collect(),
            SampleType::U8 => chunks.map(|c| c[0] as u32).collect(),
            SampleType::I16 => chunks
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as i32 as u32)
                .collect(),
            SampleType::Bf16 | SampleType::F16 | SampleType::U16 => chunks
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
                .collect(),
            SampleType::F32 | SampleType::I32 | SampleType::U32 => chunks
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            SampleType::F32PaddedBf16 => {
                let mut out = Vec::with_capacity(bytes.len() / 4);
                for (i, c) in chunks.enumerate() {
                    let v = u32::from_le_bytes(c.try_into().unwrap());
                    if v & 0xffff != 0 {
                        return Err(Error::parse(
                            (i * 4) as u64,
                            "fp32 value has nonzero low half; not a padded bfloat16",
                        ));
                    }
                    out.push(v >> 16);
                }
                out
            }
        })
    }

    pub fn encode(self, values: &[u32]) -> Vec<u8> {
        let mut out = Vec::with_capacity(values.len() * self.bytes());
        for &v in values {
            match self {
                SampleType::I8 | SampleType::U8 => out.push(v as u8),
                SampleType::Bf16 | SampleType::F16 | SampleType::I16 | SampleType::U16 => {
                    out.extend_from_slice(&(v as u16).to_le_bytes())
                }
                SampleType::F32 | SampleType::I32 | SampleType::U32 => {
                    out.extend_from_slice(&v.to_le_bytes())
                }
                SampleType::F32PaddedBf16 => out.extend_from_slice(&(v << 16).to_le_bytes()),
            }
        }
        out
    }
}

/// Format plus optional file layout, as stored in a stream header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormatDescriptor {
    pub format: Format,
    pub storage: Option<SampleType>,
    /// Number of values the pairs stand for (differs from the pair count
    /// for run and group layouts).
    pub value_count: u64,
}

const TAG_END: u8 = 0;
const TAG_STORAGE: u8 = 0x80;
const TAG_VALUE_COUNT: u8 = 0x81;

impl FormatDescriptor {
    pub fn pairs() -> Self {
        Self {
            format: Format::Pairs,
            storage: None,
            value_count: 0,
        }
    }

    /// TLV entries (`u8 tag, u16 length, bytes`) closed by a zero tag.
    pub fn write(&self, out: &mut Vec<u8>) {
        fn tlv(out: &mut Vec<u8>, tag: u8, v: &[u8]) {
            out.push(tag);
            out.extend_from_slice(&(v.len() as u16).to_le_bytes());
            out.extend_from_slice(v);
        }
        tlv(out, self.format.tag(), &self.format.value_bytes());
        if let Some(s) = self.storage {
            tlv(out, TAG_STORAGE, &[s.to_byte()]);
        }
        if self.value_count > 0 {
            tlv(out, TAG_VALUE_COUNT, &self.value_count.to_le_bytes());
        }
        tlv(out, TAG_END, &[]);
    }

    /// Parses TLV entries from `bytes`, returning the descriptor and the
    /// number of bytes consumed. `base` is the absolute offset of `bytes`.
    pub fn read(bytes: &[u8], base: u64) -> Result<(Self, usize)> {
        let mut pos = 0usize;
        let mut format = None;
        let mut storage = None;
        let mut value_count = 0;
        loop {
            let at = base + pos as u64;
            if bytes.len() < pos + 3 {
                return Err(Error::parse(at, "truncated format descriptor"));
            }
            let tag = bytes[pos];
            let len = u16::from_le_bytes([bytes[pos + 1], bytes[pos + 2]]) as usize;
            let start = pos + 3;
            let end = start + len;
            if bytes.len() < end {
                return Err(Error::parse(at, "truncated format descriptor entry"));
            }
            let v = &bytes[start..end];
            pos = end;
            match tag {
                TAG_END => break,
                TAG_STORAGE => {
                    storage = Some(
                        v.first()
                            .and_then(|&b| SampleType::from_byte(b))
                            .ok_or_else(|| Error::parse(at, "unknown sample type"))?,
                    )
                }
                TAG_VALUE_COUNT => {
                    let b: [u8; 8] = v
                        .try_into()
                        .map_err(|_| Error::parse(at, "malformed value count"))?;
                    value_count = u64::from_le_bytes(b);
                }
                t if t >= 0x80 => {} // unknown optional entry
                t => {
                    if format.is_some() {
                        return Err(Error::parse(at, "duplicate format entry"));
                    }
                    format = Some(Format::from_tlv(t, v, at)?);
                }
            }
        }
        let format = format.ok_or_else(|| Error::parse(base, "format descriptor has no format"))?;
        Ok((
            Self {
                format,
                storage,
                value_count,
            },
            pos,
        ))
    }
}
