//! Appending pairs to a finished static stream without re-encoding it.
//!
//! Each lane's encoder is restored from its stored state and bit channel and
//! keeps going. Coders run back to front, so the new pairs come out of the
//! decoder first: the result decodes as `new ++ old`.

use std::io::Cursor;

use rayon::prelude::*;

use crate::coder::CoderTables;
use crate::error::{Error, Result};
use crate::pair::CodingPair;

use super::checkpoint::lane_marks;
use super::read::{lane_payload, Layout};
use super::write::{assemble, encode_lane, EncodedLane};
use super::ModelTable;

/// Adds `new_pairs` to the static stream in `bytes`, returning the new
/// stream. The new pairs must use the stream's model and their count must be
/// a multiple of the lane count, so old pairs keep their lanes. Existing
/// checkpoints are carried over; new ones are added for the new pairs.
pub fn append_pairs(bytes: &[u8], new_pairs: &[CodingPair]) -> Result<Vec<u8>> {
    let layout = Layout::parse(&mut Cursor::new(bytes))?;
    let h = &layout.header;
    if h.flags.dynamic {
        return Err(Error::contract("cannot append to a dynamic-block stream"));
    }
    let k = h.lane_count as usize;
    let m = new_pairs.len() as u64;
    if m % k as u64 != 0 {
        return Err(Error::contract(format!(
            "appending {m} pairs to a {k}-lane stream; the count must be a multiple of {k}"
        )));
    }
    if m == 0 {
        return Ok(bytes.to_vec());
    }
    let model = match &h.table {
        ModelTable::Static(m) => m,
        _ => return Err(Error::contract("stream has no model to append with")),
    };
    if h.flags.crc {
        for (lane, info) in layout.lanes.iter().enumerate() {
            let raw = &bytes[info.offset as usize..(info.offset + info.len) as usize];
            if let (Some(want), false) = (info.crc, raw.is_empty()) {
                if crc32fast::hash(raw) != want {
                    return Err(Error::corrupt(lane, info.offset, "CRC mismatch"));
                }
            }
        }
    }
    let tables = CoderTables::new(h.coder, model)?;
    let word = h.coder.word();
    let stride = h.flags.checkpoints.then_some(layout.stride);
    let new_at: Vec<u64> = match stride {
        Some(s) if s > 0 => (0..m).step_by(s as usize).collect(),
        _ => Vec::new(),
    };

    let encoded: Vec<EncodedLane> = layout
        .lanes
        .par_iter()
        .enumerate()
        .map(|(lane, info)| {
            let old = lane_payload(bytes, info, h.coder);
            let old_bits = old.words.len() as u64 * word.bits() as u64;
            let enc = tables.resume_encoder(&old)?;
            let mut e = encode_lane(enc, new_pairs, k, lane, &lane_marks(&new_at, k, lane), 0)?;
            // Old checkpoints keep their distance from the end of the channel.
            for cp in &layout.checkpoints {
                let c = &cp.lanes[lane];
                let pushed = old_bits
                    .checked_sub(c.bits(word))
                    .ok_or_else(|| Error::corrupt(lane, info.offset, "checkpoint beyond lane end"))?;
                e.marks.push((c.coder_state, pushed));
            }
            Ok(e)
        })
        .collect::<Result<_>>()?;

    let checkpoints = stride.map(|s| {
        let mut at = new_at.clone();
        at.extend(layout.checkpoints.iter().map(|c| c.pair_index + m));
        (s, at)
    });
    Ok(assemble(
        h.coder,
        h.flags.crc,
        h.pair_count + m,
        &h.descriptor,
        h.table.clone(),
        &encoded,
        checkpoints,
    )
    .to_vec())
}
