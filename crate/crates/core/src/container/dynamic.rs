//! Dynamic-block streams: every block of pairs carries its own model.
//!
//! ```text
//! u32 pairs | model table (mappings are Symbol(global code))
//! lanes x u64 segment length | segments | [lanes x u32 CRC-32]
//! ```

use std::cell::RefCell;
use std::io::{Read, Seek, SeekFrom, Write};
use std::rc::Rc;

use rayon::prelude::*;

use crate::coder::{decode_forward, CoderKind, CoderTables, LanePayload};
use crate::error::{Error, Result};
use crate::formats::FormatDescriptor;
use crate::model::{normalize_counts, read_model_table, write_model_table, FrequencyTable, Mapping, ProbabilityModel};
use crate::pair::CodingPair;

use super::read::lane_words;
use super::write::{encode_lane, initial_state, lane_bytes, Counted, WriteOptions};
use super::{lane_share, Flags, ModelTable, StreamHeader, LANE_PREFIX, VERSION};

/// Per-block model: frequencies of the codes present, each mapped to its
/// global code.
fn block_model(
    pairs: &[CodingPair],
    alphabet: &[(Mapping, u8)],
    kind: CoderKind,
) -> Result<ProbabilityModel> {
    let mut freq = FrequencyTable::new(alphabet.len());
    for p in pairs {
        freq.add(p.code() as usize)?;
    }
    let mut m = normalize_counts(&freq, kind.precision())?;
    for c in &mut m.codes {
        if let Mapping::Symbol(g) = c.mapping {
            c.payload_bits = alphabet[g as usize].1;
        }
    }
    Ok(m)
}

/// Writes `pairs` (codes index `alphabet`) in blocks of `block_len` pairs,
/// each with a freshly fitted model. Returns the number of bytes written.
pub fn write_blocks_dynamic<W: Write>(
    pairs: &[CodingPair],
    alphabet: &[(Mapping, u8)],
    block_len: usize,
    descriptor: &FormatDescriptor,
    opts: &WriteOptions,
    sink: W,
) -> Result<u64> {
    opts.check()?;
    if block_len == 0 || block_len > u32::MAX as usize {
        return Err(Error::contract("block length must be in 1..=2^32-1"));
    }
    if opts.checkpoint_stride.is_some() {
        return Err(Error::contract("dynamic-block streams do not support checkpoints"));
    }
    if alphabet.len() > crate::model::MAX_CODES {
        return Err(Error::contract("alphabet larger than 256 codes"));
    }
    if alphabet.is_empty() && !pairs.is_empty() {
        return Err(Error::contract("an alphabet is required to encode pairs"));
    }
    let kind = opts.coder;
    let k = opts.lanes as usize;
    let header = StreamHeader {
        version: VERSION,
        coder: kind,
        flags: Flags {
            dynamic: true,
            crc: opts.crc,
            checkpoints: false,
        },
        lane_count: opts.lanes,
        pair_count: pairs.len() as u64,
        descriptor: descriptor.clone(),
        table: if alphabet.is_empty() {
            ModelTable::Empty
        } else {
            ModelTable::Alphabet(alphabet.to_vec())
        },
        lane_lengths: vec![0; k],
    };
    let mut out = Counted::new(sink);
    out.put(&header.to_bytes())?;

    for (b, block) in pairs.chunks(block_len).enumerate() {
        let first = (b * block_len) as u64;
        let model = block_model(block, alphabet, kind).map_err(|e| match e {
            Error::Alphabet { code, alphabet_size } => Error::Contract(format!(
                "block at pair {first}: code {code} is outside the alphabet of {alphabet_size} codes"
            )),
            other => other,
        })?;
        let mut local = [0u8; 256];
        for (i, c) in model.codes.iter().enumerate() {
            if let Mapping::Symbol(g) = c.mapping {
                local[g as usize] = i as u8;
            }
        }
        let mapped: Vec<CodingPair> = block.iter().map(|p| p.with_code(local[p.code() as usize])).collect();
        let tables = CoderTables::new(kind, &model)?;
        let segs: Vec<Vec<u8>> = (0..k)
            .into_par_iter()
            .map(|lane| {
                let e = encode_lane(tables.encoder(), &mapped, k, lane, &[], first)?;
                Ok(lane_bytes(&e.payload, kind))
            })
            .collect::<Result<_>>()?;

        let mut head = Vec::new();
        head.extend_from_slice(&(block.len() as u32).to_le_bytes());
        write_model_table(&model, &mut head);
        for s in &segs {
            head.extend_from_slice(&(s.len() as u64).to_le_bytes());
        }
        out.put(&head)?;
        for s in &segs {
            out.put(s)?;
        }
        if opts.crc {
            for s in &segs {
                out.put(&crc32fast::hash(s).to_le_bytes())?;
            }
        }
    }
    out.done()
}

/// Reads a dynamic-block stream one block at a time.
pub(crate) struct BlockReader<R> {
    src: Rc<RefCell<R>>,
    kind: CoderKind,
    crc: bool,
    lanes: usize,
    alphabet: Vec<(Mapping, u8)>,
    total: u64,
    /// File offset of the next block.
    at: u64,
    block: Vec<CodingPair>,
    next_in_block: usize,
    position: u64,
    raw_capacity: usize,
}

impl<R: Read + Seek> BlockReader<R> {
    pub(crate) fn new(src: Rc<RefCell<R>>, header: &StreamHeader, payload_start: u64) -> Self {
        Self {
            src,
            kind: header.coder,
            crc: header.flags.crc,
            lanes: header.lane_count as usize,
            alphabet: header.table.entries(),
            total: header.pair_count,
            at: payload_start,
            block: Vec::new(),
            next_in_block: 0,
            position: 0,
            raw_capacity: 0,
        }
    }

    pub(crate) fn position(&self) -> u64 {
        self.position
    }

    pub(crate) fn buffered_bytes(&self) -> usize {
        self.raw_capacity + self.block.capacity() * std::mem::size_of::<CodingPair>()
    }

    pub(crate) fn step(&mut self) -> Result<Option<CodingPair>> {
        if self.next_in_block == self.block.len() {
            if self.position == self.total {
                return Ok(None);
            }
            self.load_block()?;
        }
        let p = self.block[self.next_in_block];
        self.next_in_block += 1;
        self.position += 1;
        Ok(Some(p))
    }

    fn read_at(&mut self, off: u64, n: usize) -> Result<Vec<u8>> {
        let mut src = self.src.borrow_mut();
        src.seek(SeekFrom::Start(off))?;
        let mut buf = Vec::new();
        let got = src.by_ref().take(n as u64).read_to_end(&mut buf)?;
        if got < n {
            return Err(Error::corrupt(0, off + got as u64, "dynamic block truncated"));
        }
        self.raw_capacity = self.raw_capacity.max(buf.capacity());
        Ok(buf)
    }

    fn load_block(&mut self) -> Result<()> {
        let start = self.at;
        let k = self.lanes;
        let head = self.read_at(start, 6)?;
        let n = u32::from_le_bytes(head[..4].try_into().unwrap()) as u64;
        if n == 0 || n > self.total - self.position {
            return Err(Error::corrupt(0, start, format!("block claims {n} pairs")));
        }
        let codes = u16::from_le_bytes([head[4], head[5]]) as usize;
        let table_len = 2 + 8 * codes;
        let table = self.read_at(start + 4, table_len + 8 * k)?;
        let (model, _) = read_model_table(&table, self.kind.precision(), start as usize + 4)
            .map_err(|e| reparse(e, 0))?;
        let mut to_global = Vec::with_capacity(model.codes.len());
        for (i, c) in model.codes.iter().enumerate() {
            let at = start + 4 + 2 + 8 * i as u64;
            match c.mapping {
                Mapping::Symbol(g) if (g as usize) < self.alphabet.len() => {
                    if self.alphabet[g as usize].1 != c.payload_bits {
                        return Err(Error::corrupt(0, at + 2, "block payload width differs from alphabet"));
                    }
                    to_global.push(g as u8);
                }
                _ => return Err(Error::corrupt(0, at, "block code outside the alphabet")),
            }
        }
        let lens: Vec<u64> = table[table_len..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut off = start + 4 + (table_len + 8 * k) as u64;
        let word = self.kind.word();
        let mut segs = Vec::with_capacity(k);
        for (lane, &len) in lens.iter().enumerate() {
            if len != 0 && (len < LANE_PREFIX || (len - LANE_PREFIX) % word.bytes() as u64 != 0) {
                return Err(Error::corrupt(lane, off, format!("bad segment length {len}")));
            }
            if len > 1 << 40 {
                return Err(Error::corrupt(lane, off, "segment length out of range"));
            }
            let raw = self.read_at(off, len as usize).map_err(|e| relane(e, lane))?;
            segs.push((off, raw));
            off += len;
        }
        if self.crc {
            let crcs = self.read_at(off, 4 * k)?;
            for (lane, ((seg_off, raw), c)) in segs.iter().zip(crcs.chunks_exact(4)).enumerate() {
                let want = u32::from_le_bytes(c.try_into().unwrap());
                let got = crc32fast::hash(raw);
                if want != got {
                    return Err(Error::corrupt(
                        lane,
                        *seg_off,
                        format!("CRC mismatch (stored {want:08x}, computed {got:08x})"),
                    ));
                }
            }
            off += 4 * k as u64;
        }
        let tables = CoderTables::new(self.kind, &model)?;
        let mut per_lane = Vec::with_capacity(k);
        for (lane, (seg_off, raw)) in segs.iter().enumerate() {
            let m = lane_share(n, k, lane);
            // an empty segment is a coder that never left its initial state
            let payload = if raw.is_empty() {
                LanePayload {
                    state: initial_state(self.kind),
                    start_bit: 0,
                    words: Vec::new(),
                    word,
                }
            } else {
                LanePayload {
                    state: u64::from_le_bytes(raw[..8].try_into().unwrap()),
                    start_bit: raw[8],
                    words: lane_words(raw, word),
                    word,
                }
            };
            let pairs = decode_forward(&tables, &payload, m).map_err(|e| match e {
                Error::Corrupt { offset, message, .. } => Error::Corrupt {
                    lane,
                    offset: seg_off + LANE_PREFIX + offset * word.bytes() as u64,
                    message,
                },
                Error::Contract(message) => Error::Corrupt {
                    lane,
                    offset: *seg_off,
                    message,
                },
                other => other,
            })?;
            per_lane.push(pairs.into_iter());
        }
        self.block.clear();
        for i in 0..n {
            let p = per_lane[(i % k as u64) as usize].next().expect("lane share");
            self.block.push(p.with_code(to_global[p.code() as usize]));
        }
        self.next_in_block = 0;
        self.at = off;
        Ok(())
    }
}

fn reparse(e: Error, lane: usize) -> Error {
    match e {
        Error::Parse { offset, message } => Error::Corrupt { lane, offset, message },
        other => other,
    }
}

fn relane(e: Error, lane: usize) -> Error {
    match e {
        Error::Corrupt { offset, message, .. } => Error::Corrupt { lane, offset, message },
        other => other,
    }
}
