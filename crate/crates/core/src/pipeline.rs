//! Values in, stream bytes out: symbolize, fit a model, encode, and back.

use std::collections::BTreeMap;
use std::io::Cursor;

use crate::container::{write_blocks_dynamic, StreamReader, WriteOptions};
use crate::error::{Error, Result};
use crate::formats::{CodeMap, Format, FormatDescriptor, SampleType, Symbol};
use crate::model::{count_codes, ideal_bits, normalize_counts, IdealBits, Mapping, ProbabilityModel, MAX_CODES};
use crate::pair::CodingPair;

#[derive(Clone, Debug, Default)]
pub struct CompressOptions {
    pub write: WriteOptions,
    /// Fit a fresh model every this many pairs instead of one for the whole
    /// stream.
    pub dynamic_block: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressStats {
    pub values: u64,
    pub pairs: u64,
    /// Ideal-coder estimate under the stream's (static) model.
    pub ideal: IdealBits,
    /// Bytes of the complete stream.
    pub stream_bytes: u64,
    /// Values clamped while narrowing.
    pub saturated: u64,
}

/// Distinct symbol meanings with their payload widths, in sorted order.
pub fn alphabet_of(symbols: &[Symbol]) -> Result<Vec<(Mapping, u8)>> {
    let mut seen: BTreeMap<Mapping, u8> = BTreeMap::new();
    for s in symbols {
        match seen.get(&s.mapping) {
            Some(&len) if len != s.len => {
                return Err(Error::contract(format!(
                    "{} appears with payload widths {len} and {}",
                    s.mapping, s.len
                )))
            }
            Some(_) => {}
            None => {
                seen.insert(s.mapping, s.len);
            }
        }
    }
    if seen.len() > MAX_CODES {
        return Err(Error::Capacity {
            codes: seen.len(),
            slots: MAX_CODES,
        });
    }
    Ok(seen.into_iter().collect())
}

/// Fits a model to `symbols` and returns it with the pairs it encodes and
/// the ideal-coder estimate.
pub fn model_symbols(
    symbols: &[Symbol],
    precision: u8,
) -> Result<(ProbabilityModel, Vec<CodingPair>, IdealBits)> {
    let alphabet = alphabet_of(symbols)?;
    let global = CodeMap::from_entries(alphabet.iter().copied());
    let pairs: Vec<CodingPair> = symbols.iter().map(|s| s.to_pair(&global)).collect::<Result<_>>()?;
    let freq = count_codes(&pairs, alphabet.len())?;
    let model = normalize_counts(&freq, precision)?;
    let model = model.attach(|s| Ok(alphabet[s as usize]))?;
    // The model drops nothing here (every alphabet entry occurred), so
    // global codes are model codes.
    debug_assert_eq!(model.len(), alphabet.len());
    let ideal = ideal_bits(&model, &freq)?;
    Ok((model, pairs, ideal))
}

/// Compresses `values` (bit patterns or sign-extended integers) as `format`.
/// `storage` records the file layout so a reader can rebuild the bytes.
pub fn compress_values(
    values: &[u32],
    format: &Format,
    storage: Option<SampleType>,
    opts: &CompressOptions,
) -> Result<(Vec<u8>, CompressStats)> {
    let sym = format.symbolize(values)?;
    let descriptor = FormatDescriptor {
        format: format.clone(),
        storage,
        value_count: values.len() as u64,
    };
    let mut out = Vec::new();
    let (pairs, ideal) = if sym.symbols.is_empty() {
        crate::container::write_stream(&[], None, &descriptor, &opts.write, &mut out)?;
        (0, IdealBits { total_bits: 0.0, code_bits: 0.0, payload_bits: 0.0, pairs: 0 })
    } else {
        let (model, pairs, ideal) = model_symbols(&sym.symbols, opts.write.coder.precision())?;
        match opts.dynamic_block {
            Some(block) => {
                let alphabet: Vec<(Mapping, u8)> =
                    model.codes.iter().map(|c| (c.mapping, c.payload_bits)).collect();
                write_blocks_dynamic(&pairs, &alphabet, block, &descriptor, &opts.write, &mut out)?;
            }
            None => {
                crate::container::write_stream(&pairs, Some(&model), &descriptor, &opts.write, &mut out)?;
            }
        }
        (pairs.len() as u64, ideal)
    };
    let stats = CompressStats {
        values: values.len() as u64,
        pairs,
        ideal,
        stream_bytes: out.len() as u64,
        saturated: sym.saturated,
    };
    Ok((out, stats))
}

/// Inverse of [`compress_values`]: the values and the descriptor they were
/// stored with.
pub fn decompress_values(bytes: &[u8]) -> Result<(Vec<u32>, FormatDescriptor)> {
    let r = StreamReader::open(Cursor::new(bytes))?;
    let d = r.header().descriptor.clone();
    let pairs = r.read_all()?;
    let map = r.code_map();
    let symbols: Vec<Symbol> = pairs
        .iter()
        .map(|p| Symbol::from_pair(p, map))
        .collect::<Result<_>>()?;
    if symbols.is_empty() {
        return Ok((Vec::new(), d));
    }
    let values = d.format.desymbolize(&symbols, d.value_count as usize)?;
    if values.len() as u64 != d.value_count {
        return Err(Error::parse(
            0,
            format!("stream decodes to {} values, header says {}", values.len(), d.value_count),
        ));
    }
    Ok((values, d))
}
