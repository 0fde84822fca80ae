use std::io::Write;

use rayon::prelude::*;

use crate::coder::{CoderKind, CoderTables, Encoder, LanePayload};
use crate::error::{Error, Result};
use crate::formats::FormatDescriptor;
use crate::model::ProbabilityModel;
use crate::pair::CodingPair;

use super::checkpoint::{lane_marks, write_index, Checkpoint, LaneCursor};
use super::{lane_share, stream_id, Flags, ModelTable, StreamHeader, LANE_PREFIX, VERSION};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteOptions {
    pub coder: CoderKind,
    pub lanes: u8,
    pub crc: bool,
    /// Record a checkpoint every this many pairs.
    pub checkpoint_stride: Option<u64>,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            coder: CoderKind::Rans16,
            lanes: 1,
            crc: true,
            checkpoint_stride: None,
        }
    }
}

impl WriteOptions {
    pub fn new(coder: CoderKind) -> Self {
        Self {
            coder,
            ..Self::default()
        }
    }

    pub fn lanes(mut self, lanes: u8) -> Self {
        self.lanes = lanes;
        self
    }

    pub fn crc(mut self, crc: bool) -> Self {
        self.crc = crc;
        self
    }

    pub fn checkpoint_stride(mut self, stride: Option<u64>) -> Self {
        self.checkpoint_stride = stride;
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.lanes == 0 {
            return Err(Error::contract("lane count must be at least 1"));
        }
        if self.checkpoint_stride == Some(0) {
            return Err(Error::contract("checkpoint stride must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn initial_state(kind: CoderKind) -> u64 {
    match kind {
        CoderKind::Rans16 => crate::rans::RANS_LOW,
        CoderKind::Tans8 => 0,
    }
}

/// One lane's coder output plus `(state, bits pushed)` at each mark.
pub(crate) struct EncodedLane {
    pub payload: LanePayload,
    pub marks: Vec<(u64, u64)>,
}

impl EncodedLane {
    /// Decoder cursor for each recorded mark.
    pub(crate) fn cursors(&self) -> Vec<LaneCursor> {
        let v = self.payload.words.len() as u64 * self.payload.word.bits() as u64;
        self.marks
            .iter()
            .map(|&(state, pushed)| LaneCursor::from_bits(v - pushed, self.payload.word, state))
            .collect()
    }
}

/// Encodes `lane` of `pairs` (every `lanes`-th pair) back to front, on top
/// of `enc`. `marks` are ascending lane-local indices at which to record
/// the state a decoder would have before that pair. `first` is the global
/// index of `pairs[0]`, for error messages.
pub(crate) fn encode_lane(
    mut enc: Encoder<'_>,
    pairs: &[CodingPair],
    lanes: usize,
    lane: usize,
    marks: &[u64],
    first: u64,
) -> Result<EncodedLane> {
    let m = lane_share(pairs.len() as u64, lanes, lane);
    let mut out = vec![(0u64, 0u64); marks.len()];
    let mut p = marks.len();
    macro_rules! record {
        ($j:expr) => {
            while p > 0 && marks[p - 1] == $j {
                p -= 1;
                out[p] = (enc.state(), enc.bits_pushed());
            }
        };
    }
    record!(m);
    for j in (0..m).rev() {
        let i = lane + j as usize * lanes;
        enc.encode(&pairs[i]).map_err(|e| at_pair(e, first + i as u64))?;
        record!(j);
    }
    Ok(EncodedLane {
        payload: enc.finish(),
        marks: out,
    })
}

pub(crate) fn at_pair(e: Error, index: u64) -> Error {
    match e {
        Error::Contract(m) => Error::Contract(format!("pair {index}: {m}")),
        Error::Alphabet { code, alphabet_size } => Error::Contract(format!(
            "pair {index}: code {code} is outside the alphabet of {alphabet_size} codes"
        )),
        other => other,
    }
}

/// Bytes of a lane payload; empty if the coder never left its initial state.
pub(crate) fn lane_bytes(p: &LanePayload, kind: CoderKind) -> Vec<u8> {
    if p.words.is_empty() && p.state == initial_state(kind) {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(LANE_PREFIX as usize + p.words.len() * p.word.bytes());
    out.extend_from_slice(&lane_prefix(p.state, p.start_bit));
    for &w in &p.words {
        match p.word {
            crate::bits::WordSize::W16 => out.extend_from_slice(&(w as u16).to_le_bytes()),
            crate::bits::WordSize::W32 => out.extend_from_slice(&w.to_le_bytes()),
        }
    }
    out
}

pub(crate) fn lane_prefix(state: u64, start_bit: u8) -> [u8; LANE_PREFIX as usize] {
    let mut p = [0u8; LANE_PREFIX as usize];
    p[..8].copy_from_slice(&state.to_le_bytes());
    p[8] = start_bit;
    p
}

/// Counts bytes so failures can report how far the write got.
pub(crate) struct Counted<W> {
    pub inner: W,
    pub written: u64,
}

impl<W: Write> Counted<W> {
    pub(crate) fn new(inner: W) -> Self {
        Self { inner, written: 0 }
    }

    pub(crate) fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner
            .write_all(bytes)
            .map_err(|e| Error::io(self.written, e))?;
        self.written += bytes.len() as u64;
        Ok(())
    }

    pub(crate) fn done(mut self) -> Result<u64> {
        self.inner.flush().map_err(|e| Error::io(self.written, e))?;
        Ok(self.written)
    }
}

/// Assembled static stream, ready to be written out.
pub(crate) struct Assembled {
    pub header: Vec<u8>,
    pub index: Vec<u8>,
    pub lanes: Vec<Vec<u8>>,
    pub crcs: Option<Vec<u32>>,
}

impl Assembled {
    pub(crate) fn write<W: Write>(&self, sink: W) -> Result<u64> {
        let mut out = Counted::new(sink);
        out.put(&self.header)?;
        out.put(&self.index)?;
        for l in &self.lanes {
            out.put(l)?;
        }
        if let Some(c) = &self.crcs {
            for v in c {
                out.put(&v.to_le_bytes())?;
            }
        }
        out.done()
    }

    pub(crate) fn to_vec(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write(&mut v).expect("writing to memory cannot fail");
        v
    }
}

/// Builds header, checkpoint index, lane bytes and CRCs from encoded lanes.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    kind: CoderKind,
    crc: bool,
    pair_count: u64,
    descriptor: &FormatDescriptor,
    table: ModelTable,
    encoded: &[EncodedLane],
    checkpoints: Option<(u64, Vec<u64>)>,
) -> Assembled {
    let lanes: Vec<Vec<u8>> = encoded.iter().map(|e| lane_bytes(&e.payload, kind)).collect();
    let header = StreamHeader {
        version: VERSION,
        coder: kind,
        flags: Flags {
            dynamic: false,
            crc,
            checkpoints: checkpoints.is_some(),
        },
        lane_count: encoded.len() as u8,
        pair_count,
        descriptor: descriptor.clone(),
        table,
        lane_lengths: lanes.iter().map(|l| l.len() as u64).collect(),
    };
    let header = header.to_bytes();
    let prefixes: Vec<_> = encoded
        .iter()
        .map(|e| lane_prefix(e.payload.state, e.payload.start_bit))
        .collect();
    let id = stream_id(&header, &prefixes);
    let mut index = Vec::new();
    if let Some((stride, at)) = checkpoints {
        let per_lane: Vec<Vec<LaneCursor>> = encoded.iter().map(|e| e.cursors()).collect();
        let cps: Vec<Checkpoint> = at
            .iter()
            .enumerate()
            .map(|(n, &pair_index)| Checkpoint {
                stream_id: id,
                pair_index,
                lanes: per_lane.iter().map(|c| c[n]).collect(),
            })
            .collect();
        write_index(stride, &cps, &mut index);
    }
    let crcs = crc.then(|| lanes.iter().map(|l| crc32fast::hash(l)).collect());
    Assembled {
        header,
        index,
        lanes,
        crcs,
    }
}

/// Writes `pairs` as a static-model stream. `model` may be `None` only when
/// there are no pairs. Returns the number of bytes written.
pub fn write_stream<W: Write>(
    pairs: &[CodingPair],
    model: Option<&ProbabilityModel>,
    descriptor: &FormatDescriptor,
    opts: &WriteOptions,
    sink: W,
) -> Result<u64> {
    encode_stream(pairs, model, descriptor, opts)?.write(sink)
}

pub(crate) fn encode_stream(
    pairs: &[CodingPair],
    model: Option<&ProbabilityModel>,
    descriptor: &FormatDescriptor,
    opts: &WriteOptions,
) -> Result<Assembled> {
    opts.check()?;
    let kind = opts.coder;
    let k = opts.lanes as usize;
    let (table, tables) = match model {
        Some(m) => (ModelTable::Static(m.clone()), Some(CoderTables::new(kind, m)?)),
        None if pairs.is_empty() => (ModelTable::Empty, None),
        None => return Err(Error::contract("a model is required to encode pairs")),
    };
    let at: Option<Vec<u64>> = opts
        .checkpoint_stride
        .map(|s| (0..pairs.len() as u64).step_by(s as usize).collect());
    let encoded: Vec<EncodedLane> = (0..k)
        .into_par_iter()
        .map(|lane| {
            let marks = at.as_deref().map(|a| lane_marks(a, k, lane)).unwrap_or_default();
            match &tables {
                Some(t) => encode_lane(t.encoder(), pairs, k, lane, &marks, 0),
                None => Ok(EncodedLane {
                    payload: LanePayload {
                        state: initial_state(kind),
                        start_bit: 0,
                        words: Vec::new(),
                        word: kind.word(),
                    },
                    marks: vec![(initial_state(kind), 0); marks.len()],
                }),
            }
        })
        .collect::<Result<_>>()?;
    Ok(assemble(
        kind,
        opts.crc,
        pairs.len() as u64,
        descriptor,
        table,
        &encoded,
        opts.checkpoint_stride.map(|s| (s, at.unwrap_or_default())),
    ))
}
