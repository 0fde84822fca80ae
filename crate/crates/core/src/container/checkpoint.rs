//! Checkpoints: a bit position plus coder state per lane, enough to start
//! decoding in the middle of a stream.

use std::io::Read;

use crate::bits::WordSize;
use crate::error::{Error, Result};

use super::take;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LaneCursor {
    /// Word (counted in decode order) holding the next unread bit.
    pub word_offset: u64,
    pub bit_offset: u8,
    /// rANS state, or tANS state index.
    pub coder_state: u64,
}

impl LaneCursor {
    pub(crate) fn from_bits(bits: u64, word: WordSize, coder_state: u64) -> Self {
        let w = word.bits() as u64;
        Self {
            word_offset: bits / w,
            bit_offset: (bits % w) as u8,
            coder_state,
        }
    }

    pub(crate) fn bits(&self, word: WordSize) -> u64 {
        self.word_offset * word.bits() as u64 + self.bit_offset as u64
    }
}

/// Where the decoder of pair `pair_index` starts, in every lane. Only valid
/// for the stream whose id it carries.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Checkpoint {
    pub stream_id: u32,
    pub pair_index: u64,
    pub lanes: Vec<LaneCursor>,
}

const RECORD_LANE: usize = 17;

/// `u64 stride, u32 count`, then per checkpoint `u64 pair_index` and per
/// lane `u64 word_offset, u8 bit_offset, u64 state`.
pub(crate) fn write_index(stride: u64, cps: &[Checkpoint], out: &mut Vec<u8>) {
    out.extend_from_slice(&stride.to_le_bytes());
    out.extend_from_slice(&(cps.len() as u32).to_le_bytes());
    for c in cps {
        out.extend_from_slice(&c.pair_index.to_le_bytes());
        for l in &c.lanes {
            out.extend_from_slice(&l.word_offset.to_le_bytes());
            out.push(l.bit_offset);
            out.extend_from_slice(&l.coder_state.to_le_bytes());
        }
    }
}

/// Reads an index written by [`write_index`]; `base` is its file offset.
/// Stream ids are filled in by the caller.
pub(crate) fn read_index<R: Read>(
    r: &mut R,
    lanes: usize,
    base: u64,
) -> Result<(u64, Vec<Checkpoint>, u64)> {
    let mut buf = Vec::new();
    take(r, &mut buf, 12).map_err(|e| shift(e, base))?;
    let stride = u64::from_le_bytes(buf[..8].try_into().unwrap());
    let count = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let per = 8 + lanes * RECORD_LANE;
    let size = count
        .checked_mul(per)
        .filter(|&s| s < 1 << 40)
        .ok_or_else(|| Error::parse(base + 8, "checkpoint index too large"))?;
    take(r, &mut buf, size).map_err(|e| shift(e, base))?;
    let mut cps = Vec::with_capacity(count);
    for rec in buf[12..].chunks_exact(per) {
        let pair_index = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let lanes = rec[8..]
            .chunks_exact(RECORD_LANE)
            .map(|l| LaneCursor {
                word_offset: u64::from_le_bytes(l[..8].try_into().unwrap()),
                bit_offset: l[8],
                coder_state: u64::from_le_bytes(l[9..17].try_into().unwrap()),
            })
            .collect();
        cps.push(Checkpoint {
            stream_id: 0,
            pair_index,
            lanes,
        });
    }
    Ok((stride, cps, buf.len() as u64))
}

fn shift(e: Error, base: u64) -> Error {
    match e {
        Error::Parse { offset, message } => Error::Parse {
            offset: offset + base,
            message: message.replace("header", "checkpoint index"),
        },
        other => other,
    }
}

/// Encoder-side positions to record for checkpoints at `pair_indices`:
/// for each lane, the lane-local index each checkpoint falls on.
pub(crate) fn lane_marks(pair_indices: &[u64], lanes: usize, lane: usize) -> Vec<u64> {
    pair_indices
        .iter()
        .map(|&i| super::lane_share(i, lanes, lane))
        .collect()
}
