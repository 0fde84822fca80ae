//! The `CPC1` stream format.
//!
//! ```text
//! "CPC1" | u8 version | u8 coder | u8 flags | u8 lanes | u64 pairs
//! format descriptor (TLV) | model table | lanes x u64 payload length
//! [checkpoint index] | lane payloads | [lanes x u32 CRC-32]
//! ```
//!
//! Everything is little-endian. Pair `i` goes to lane `i % lanes`; each lane
//! is an independent coder run back to front, stored as `u64 final state,
//! u8 start bit, words in decode order`. A lane that never left its initial
//! state is stored with length zero.
//!
//! In dynamic-block mode the model table lists the alphabet only (all
//! frequencies zero), the lane length table is zero, and the payload is a
//! sequence of blocks, each with its own model, lane segments and CRCs.

mod append;
mod checkpoint;
mod dynamic;
mod read;
mod write;

use std::io::{self, Read};

use crate::coder::CoderKind;
use crate::error::{Error, Result};
use crate::formats::FormatDescriptor;
use crate::model::{write_model_table, Mapping, ProbabilityModel, MAX_CODES};

pub use append::append_pairs;
pub use checkpoint::{Checkpoint, LaneCursor};
pub use dynamic::write_blocks_dynamic;
pub use read::{decode_parallel, PairIter, StreamReader};
pub use write::{write_stream, WriteOptions};

pub const MAGIC: &[u8; 4] = b"CPC1";
pub const VERSION: u8 = 1;

const FLAG_DYNAMIC: u8 = 1;
const FLAG_CRC: u8 = 2;
const FLAG_CHECKPOINTS: u8 = 4;

/// Size of the lane prefix: final state and start bit.
const LANE_PREFIX: u64 = 9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    pub dynamic: bool,
    pub crc: bool,
    pub checkpoints: bool,
}

impl Flags {
    fn to_byte(self) -> u8 {
        (self.dynamic as u8 * FLAG_DYNAMIC)
            | (self.crc as u8 * FLAG_CRC)
            | (self.checkpoints as u8 * FLAG_CHECKPOINTS)
    }

    fn from_byte(b: u8) -> Option<Self> {
        if b & !(FLAG_DYNAMIC | FLAG_CRC | FLAG_CHECKPOINTS) != 0 {
            return None;
        }
        Some(Self {
            dynamic: b & FLAG_DYNAMIC != 0,
            crc: b & FLAG_CRC != 0,
            checkpoints: b & FLAG_CHECKPOINTS != 0,
        })
    }
}

/// The model table of a stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelTable {
    /// No codes; only valid for streams without pairs.
    Empty,
    Static(ProbabilityModel),
    /// Dynamic-block streams: code meanings and payload widths, no
    /// frequencies.
    Alphabet(Vec<(Mapping, u8)>),
}

impl ModelTable {
    /// Code meanings and payload widths.
    pub fn entries(&self) -> Vec<(Mapping, u8)> {
        match self {
            ModelTable::Empty => Vec::new(),
            ModelTable::Static(m) => m.codes.iter().map(|c| (c.mapping, c.payload_bits)).collect(),
            ModelTable::Alphabet(a) => a.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ModelTable::Empty => 0,
            ModelTable::Static(m) => m.len(),
            ModelTable::Alphabet(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u8,
    pub coder: CoderKind,
    pub flags: Flags,
    pub lane_count: u8,
    pub pair_count: u64,
    pub descriptor: FormatDescriptor,
    pub table: ModelTable,
    /// Bytes per lane payload (all zero in dynamic mode).
    pub lane_lengths: Vec<u64>,
}

impl StreamHeader {
    /// Serializes everything up to and including the lane length table.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        out.extend_from_slice(MAGIC);
        out.push(self.version);
        out.push(self.coder.to_byte());
        out.push(self.flags.to_byte());
        out.push(self.lane_count);
        out.extend_from_slice(&self.pair_count.to_le_bytes());
        self.descriptor.write(&mut out);
        match &self.table {
            ModelTable::Empty => out.extend_from_slice(&0u16.to_le_bytes()),
            ModelTable::Static(m) => write_model_table(m, &mut out),
            ModelTable::Alphabet(a) => write_alphabet(a, &mut out),
        }
        for l in &self.lane_lengths {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    /// Pairs assigned to `lane`.
    pub fn lane_pairs(&self, lane: usize) -> u64 {
        lane_share(self.pair_count, self.lane_count as usize, lane)
    }

    /// Parses a header from `r`, returning it with its raw bytes.
    pub fn read_from<R: Read>(r: &mut R) -> Result<(Self, Vec<u8>)> {
        let mut buf = Vec::with_capacity(64);
        take(r, &mut buf, 16)?;
        if &buf[..4] != MAGIC {
            return Err(Error::parse(0, "bad magic; not a CPC1 stream"));
        }
        if buf[4] != VERSION {
            return Err(Error::parse(4, format!("unsupported version {}", buf[4])));
        }
        let coder = CoderKind::from_byte(buf[5])
            .ok_or_else(|| Error::parse(5, format!("unknown coder kind {}", buf[5])))?;
        let flags = Flags::from_byte(buf[6])
            .ok_or_else(|| Error::parse(6, format!("unknown flags {:#04x}", buf[6])))?;
        let lane_count = buf[7];
        if lane_count == 0 {
            return Err(Error::parse(7, "lane count is zero"));
        }
        let pair_count = u64::from_le_bytes(buf[8..16].try_into().unwrap());

        // descriptor: TLV entries until the end tag
        let tlv_start = buf.len();
        loop {
            let at = buf.len();
            take(r, &mut buf, 3)?;
            let tag = buf[at];
            let len = u16::from_le_bytes([buf[at + 1], buf[at + 2]]) as usize;
            take(r, &mut buf, len)?;
            if tag == 0 {
                break;
            }
        }
        let (descriptor, _) = FormatDescriptor::read(&buf[tlv_start..], tlv_start as u64)?;

        let table_start = buf.len();
        take(r, &mut buf, 2)?;
        let count = u16::from_le_bytes([buf[table_start], buf[table_start + 1]]) as usize;
        if count > MAX_CODES {
            return Err(Error::parse(table_start as u64, format!("{count} codes exceed alphabet")));
        }
        take(r, &mut buf, 8 * count)?;
        let table = if count == 0 {
            if pair_count != 0 {
                return Err(Error::parse(table_start as u64, "empty model table with pairs"));
            }
            ModelTable::Empty
        } else if flags.dynamic {
            ModelTable::Alphabet(read_alphabet(&buf[table_start..], table_start as u64)?)
        } else {
            let (m, _) = crate::model::read_model_table(
                &buf[table_start..],
                coder.precision(),
                table_start,
            )?;
            ModelTable::Static(m)
        };

        let lens_start = buf.len();
        take(r, &mut buf, 8 * lane_count as usize)?;
        let lane_lengths = buf[lens_start..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((
            Self {
                version: VERSION,
                coder,
                flags,
                lane_count,
                pair_count,
                descriptor,
                table,
                lane_lengths,
            },
            buf,
        ))
    }
}

/// Number of the first `n` pairs that land in `lane` out of `lanes`.
#[inline]
pub fn lane_share(n: u64, lanes: usize, lane: usize) -> u64 {
    (n + lanes as u64 - 1 - lane as u64) / lanes as u64
}

fn write_alphabet(a: &[(Mapping, u8)], out: &mut Vec<u8>) {
    out.extend_from_slice(&(a.len() as u16).to_le_bytes());
    for (m, bits) in a {
        out.extend_from_slice(&0u16.to_le_bytes());
        out.push(*bits);
        out.push(m.kind());
        out.extend_from_slice(&m.value().to_le_bytes());
    }
}

fn read_alphabet(bytes: &[u8], base: u64) -> Result<Vec<(Mapping, u8)>> {
    let count = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
    (0..count)
        .map(|i| {
            let o = 2 + 8 * i;
            let kind = bytes[o + 3];
            let value = i32::from_le_bytes(bytes[o + 4..o + 8].try_into().unwrap());
            let m = Mapping::from_parts(kind, value).ok_or_else(|| {
                Error::parse(base + o as u64 + 3, format!("unknown mapping kind {kind}"))
            })?;
            if bytes[o + 2] > 32 {
                return Err(Error::parse(base + o as u64 + 2, "payload wider than 32 bits"));
            }
            Ok((m, bytes[o + 2]))
        })
        .collect()
}

/// Appends exactly `n` bytes from `r` to `buf`; running out is a parse
/// error at the offset where the data stopped.
fn take<R: Read>(r: &mut R, buf: &mut Vec<u8>, n: usize) -> Result<()> {
    let start = buf.len();
    buf.resize(start + n, 0);
    let mut got = 0;
    while got < n {
        match r.read(&mut buf[start + got..]) {
            Ok(0) => {
                return Err(Error::parse(
                    (start + got) as u64,
                    "stream truncated inside the header",
                ))
            }
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Identity of a stream, used to reject checkpoints taken elsewhere:
/// CRC-32 over the header bytes and every lane's state prefix.
fn stream_id(header_bytes: &[u8], lane_prefixes: &[[u8; LANE_PREFIX as usize]]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(header_bytes);
    for p in lane_prefixes {
        h.update(p);
    }
    h.finalize()
}
