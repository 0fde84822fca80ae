use std::cell::RefCell;
use std::io::{self, Cursor, Read, Seek, SeekFrom};
use std::rc::Rc;

use rayon::prelude::*;

use crate::bits::{BitReader, WordSize, WordSource};
use crate::coder::{decode_forward, CoderKind, CoderTables, Decoder, LanePayload};
use crate::error::{Error, Result};
use crate::formats::CodeMap;
use crate::pair::CodingPair;

use super::checkpoint::{read_index, Checkpoint, LaneCursor};
use super::dynamic::BlockReader;
use super::write::{initial_state, lane_prefix};
use super::{stream_id, ModelTable, StreamHeader, LANE_PREFIX};

/// Words fetched per refill of a lane buffer.
const CHUNK_WORDS: u64 = 1 << 14;

#[derive(Clone, Debug)]
pub(crate) struct LaneInfo {
    /// File offset of the lane payload.
    pub offset: u64,
    pub len: u64,
    pub state: u64,
    pub start_bit: u8,
    pub words: u64,
    pub crc: Option<u32>,
}

impl LaneInfo {
    fn word_base(&self) -> u64 {
        self.offset + LANE_PREFIX
    }
}

/// Parsed stream layout: header, index and where every lane lives.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub header: StreamHeader,
    pub stride: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub payload_start: u64,
    pub lanes: Vec<LaneInfo>,
    pub stream_id: u32,
}

impl Layout {
    pub(crate) fn parse<R: Read + Seek>(r: &mut R) -> Result<Self> {
        r.seek(SeekFrom::Start(0))?;
        let (header, header_bytes) = StreamHeader::read_from(r)?;
        let mut pos = header_bytes.len() as u64;
        let (stride, mut checkpoints) = if header.flags.checkpoints {
            let (s, c, used) = read_index(r, header.lane_count as usize, pos)?;
            pos += used;
            (s, c)
        } else {
            (0, Vec::new())
        };
        let payload_start = pos;
        let file_len = r.seek(SeekFrom::End(0))?;
        let word = header.coder.word();
        let k = header.lane_count as usize;

        if header.flags.dynamic {
            let stream_id = stream_id(&header_bytes, &[]);
            return Ok(Self {
                header,
                stride,
                checkpoints,
                payload_start,
                lanes: Vec::new(),
                stream_id,
            });
        }

        let mut lanes = Vec::with_capacity(k);
        let mut off = payload_start;
        for (lane, &len) in header.lane_lengths.iter().enumerate() {
            let info = if len == 0 {
                if header.lane_pairs(lane) > 0 && matches!(header.table, ModelTable::Empty) {
                    return Err(Error::corrupt(lane, off, "lane has pairs but no model"));
                }
                LaneInfo {
                    offset: off,
                    len: 0,
                    state: initial_state(header.coder),
                    start_bit: 0,
                    words: 0,
                    crc: None,
                }
            } else {
                if len < LANE_PREFIX || (len - LANE_PREFIX) % word.bytes() as u64 != 0 {
                    return Err(Error::corrupt(lane, off, format!("bad lane length {len}")));
                }
                if off + len > file_len {
                    return Err(Error::corrupt(
                        lane,
                        file_len,
                        format!("lane payload truncated ({} of {len} bytes)", file_len.saturating_sub(off)),
                    ));
                }
                r.seek(SeekFrom::Start(off))?;
                let mut p = [0u8; LANE_PREFIX as usize];
                r.read_exact(&mut p)?;
                let start_bit = p[8];
                if start_bit as u32 >= word.bits() {
                    return Err(Error::corrupt(lane, off + 8, "start bit outside word"));
                }
                LaneInfo {
                    offset: off,
                    len,
                    state: u64::from_le_bytes(p[..8].try_into().unwrap()),
                    start_bit,
                    words: (len - LANE_PREFIX) / word.bytes() as u64,
                    crc: None,
                }
            };
            off += len;
            lanes.push(info);
        }
        if header.flags.crc {
            if off + 4 * k as u64 > file_len {
                return Err(Error::parse(file_len, "stream truncated inside the CRC table"));
            }
            r.seek(SeekFrom::Start(off))?;
            let mut b = vec![0u8; 4 * k];
            r.read_exact(&mut b)?;
            for (lane, c) in lanes.iter_mut().zip(b.chunks_exact(4)) {
                lane.crc = Some(u32::from_le_bytes(c.try_into().unwrap()));
            }
        }
        let prefixes: Vec<_> = lanes.iter().map(|l| lane_prefix(l.state, l.start_bit)).collect();
        let stream_id = stream_id(&header_bytes, &prefixes);
        for c in &mut checkpoints {
            c.stream_id = stream_id;
            if c.lanes.len() != k || c.pair_index > header.pair_count {
                return Err(Error::parse(payload_start, "malformed checkpoint record"));
            }
        }
        Ok(Self {
            header,
            stride,
            checkpoints,
            payload_start,
            lanes,
            stream_id,
        })
    }

    pub(crate) fn tables(&self) -> Result<Option<CoderTables>> {
        match &self.header.table {
            ModelTable::Static(m) => Ok(Some(CoderTables::new(self.header.coder, m)?)),
            _ => Ok(None),
        }
    }

    /// The starting point of a full decode.
    pub(crate) fn start(&self) -> Checkpoint {
        Checkpoint {
            stream_id: self.stream_id,
            pair_index: 0,
            lanes: self
                .lanes
                .iter()
                .map(|l| LaneCursor {
                    word_offset: 0,
                    bit_offset: l.start_bit,
                    coder_state: l.state,
                })
                .collect(),
        }
    }
}

/// Reads one lane's words on demand through a small buffer, hashing them
/// when read front to back.
pub struct LaneWords<R> {
    src: Rc<RefCell<R>>,
    lane: usize,
    base: u64,
    len: u64,
    word: WordSize,
    pos: u64,
    buf: Vec<u8>,
    buf_first: u64,
    buf_words: u64,
    hasher: Option<crc32fast::Hasher>,
    hashed: u64,
}

impl<R: Read + Seek> LaneWords<R> {
    fn new(src: Rc<RefCell<R>>, lane: usize, info: &LaneInfo, word: WordSize, at: u64, hash: bool) -> Self {
        let hasher = (hash && at == 0 && info.len > 0).then(|| {
            let mut h = crc32fast::Hasher::new();
            h.update(&lane_prefix(info.state, info.start_bit));
            h
        });
        Self {
            src,
            lane,
            base: info.word_base(),
            len: info.words,
            word,
            pos: at,
            buf: Vec::new(),
            buf_first: 0,
            buf_words: 0,
            hasher,
            hashed: 0,
        }
    }

    fn offset(&self, word: u64) -> u64 {
        self.base + word * self.word.bytes() as u64
    }

    fn refill(&mut self, at: u64) -> Result<()> {
        let n = CHUNK_WORDS.min(self.len - at);
        let bytes = (n as usize) * self.word.bytes();
        self.buf.resize(bytes, 0);
        let off = self.offset(at);
        let mut src = self.src.borrow_mut();
        src.seek(SeekFrom::Start(off))?;
        src.read_exact(&mut self.buf).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                Error::corrupt(self.lane, off, "lane payload truncated")
            } else {
                e.into()
            }
        })?;
        self.buf_first = at;
        self.buf_words = n;
        if let Some(h) = &mut self.hasher {
            if self.hashed == at {
                h.update(&self.buf);
                self.hashed += n;
            }
        }
        Ok(())
    }

    /// CRC of the whole lane, reading whatever the decoder left unread.
    /// `None` if the lane was not read from its start.
    fn finish_crc(&mut self) -> Result<Option<u32>> {
        if self.hasher.is_none() {
            return Ok(None);
        }
        while self.hashed < self.len {
            let at = self.hashed;
            self.refill(at)?;
        }
        Ok(self.hasher.take().map(|h| h.finalize()))
    }

    /// Bytes held in the read buffer.
    pub fn buffered_bytes(&self) -> usize {
        self.buf.capacity()
    }
}

impl<R: Read + Seek> WordSource for LaneWords<R> {
    #[inline]
    fn next_word(&mut self) -> Result<u32> {
        if self.pos >= self.len {
            return Err(Error::corrupt(
                self.lane,
                self.offset(self.pos),
                "lane payload exhausted before its pairs",
            ));
        }
        if self.pos < self.buf_first || self.pos >= self.buf_first + self.buf_words {
            self.refill(self.pos)?;
        }
        let i = (self.pos - self.buf_first) as usize * self.word.bytes();
        self.pos += 1;
        Ok(match self.word {
            WordSize::W16 => u16::from_le_bytes([self.buf[i], self.buf[i + 1]]) as u32,
            WordSize::W32 => u32::from_le_bytes(self.buf[i..i + 4].try_into().unwrap()),
        })
    }

    fn position(&self) -> u64 {
        self.pos
    }

    fn len(&self) -> Option<u64> {
        Some(self.len)
    }
}

/// Stream opened over a seekable source. Lane payloads are read lazily with
/// one small buffer per lane, so memory does not grow with stream length.
pub struct StreamReader<R> {
    src: Rc<RefCell<R>>,
    layout: Layout,
    tables: Option<CoderTables>,
    code_map: CodeMap,
}

impl<R> std::fmt::Debug for StreamReader<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamReader")
            .field("header", &self.layout.header)
            .field("stream_id", &self.layout.stream_id)
            .finish_non_exhaustive()
    }
}

impl<R: Read + Seek> StreamReader<R> {
    pub fn open(mut src: R) -> Result<Self> {
        let layout = Layout::parse(&mut src)?;
        let tables = layout.tables()?;
        let code_map = CodeMap::from_entries(layout.header.table.entries());
        Ok(Self {
            src: Rc::new(RefCell::new(src)),
            layout,
            tables,
            code_map,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.layout.header
    }

    /// Maps decoded codes to their meanings.
    pub fn code_map(&self) -> &CodeMap {
        &self.code_map
    }

    pub fn stream_id(&self) -> u32 {
        self.layout.stream_id
    }

    /// Checkpoints stored in the stream's index.
    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.layout.checkpoints
    }

    pub fn checkpoint_stride(&self) -> Option<u64> {
        self.layout.header.flags.checkpoints.then_some(self.layout.stride)
    }

    /// Iterates over all pairs in their original order, checking CRCs at
    /// the end.
    pub fn pairs(&self) -> Result<PairIter<'_, R>> {
        if self.layout.header.flags.dynamic {
            let blocks = BlockReader::new(
                self.src.clone(),
                &self.layout.header,
                self.layout.payload_start,
            );
            return Ok(PairIter {
                inner: Inner::Dynamic(blocks),
            });
        }
        self.iter_from(&self.layout.start(), true)
    }

    /// Iterates from a checkpoint to the end of the stream.
    pub fn resume_from(&self, cp: &Checkpoint) -> Result<PairIter<'_, R>> {
        if self.layout.header.flags.dynamic {
            return Err(Error::contract("dynamic-block streams have no checkpoints"));
        }
        if cp.stream_id != self.layout.stream_id {
            return Err(Error::Stale {
                expected: self.layout.stream_id,
                found: cp.stream_id,
            });
        }
        self.iter_from(cp, false)
    }

    fn iter_from(&self, cp: &Checkpoint, hash: bool) -> Result<PairIter<'_, R>> {
        let h = &self.layout.header;
        let k = h.lane_count as usize;
        if cp.lanes.len() != k || cp.pair_index > h.pair_count {
            return Err(Error::contract(format!(
                "checkpoint at pair {} with {} lanes does not fit this stream",
                cp.pair_index,
                cp.lanes.len()
            )));
        }
        let word = h.coder.word();
        let mut decoders = Vec::with_capacity(k);
        for (lane, (c, info)) in cp.lanes.iter().zip(&self.layout.lanes).enumerate() {
            let remaining = h.lane_pairs(lane) - super::lane_share(cp.pair_index, k, lane);
            if c.word_offset > info.words
                || (c.word_offset == info.words && c.bit_offset != 0)
                || c.bit_offset as u32 >= word.bits()
            {
                return Err(Error::contract(format!(
                    "checkpoint cursor {}:{} outside lane {lane}",
                    c.word_offset, c.bit_offset
                )));
            }
            let words = LaneWords::new(
                self.src.clone(),
                lane,
                info,
                word,
                c.word_offset,
                hash && h.flags.crc,
            );
            let tables = match &self.tables {
                Some(t) => t,
                None => {
                    decoders.push(None);
                    continue;
                }
            };
            let reader = BitReader::new(word, words, c.bit_offset)?;
            let d = tables
                .decoder(c.coder_state, reader, remaining)
                .map_err(|e| relane(e, lane, info, word))?;
            decoders.push(Some(d));
        }
        Ok(PairIter {
            inner: Inner::Static(StaticIter {
                layout: &self.layout,
                decoders,
                next: cp.pair_index,
                finished: false,
            }),
        })
    }

    /// Decodes every pair.
    pub fn read_all(&self) -> Result<Vec<CodingPair>> {
        let mut out = Vec::with_capacity(self.layout.header.pair_count.min(1 << 28) as usize);
        for p in self.pairs()? {
            out.push(p?);
        }
        Ok(out)
    }
}

/// Rewrites a decoder error to name its lane and byte offset.
fn relane(e: Error, lane: usize, info: &LaneInfo, word: WordSize) -> Error {
    match e {
        Error::Corrupt {
            lane: 0,
            offset,
            message,
        } if offset <= info.words => Error::Corrupt {
            lane,
            offset: info.word_base() + offset * word.bytes() as u64,
            message,
        },
        other => other,
    }
}

pub(crate) struct StaticIter<'a, R> {
    layout: &'a Layout,
    decoders: Vec<Option<Decoder<'a, LaneWords<R>>>>,
    next: u64,
    finished: bool,
}

impl<R: Read + Seek> StaticIter<'_, R> {
    fn step(&mut self) -> Result<Option<CodingPair>> {
        let h = &self.layout.header;
        if self.next == h.pair_count {
            if !self.finished {
                self.finished = true;
                self.finish()?;
            }
            return Ok(None);
        }
        let k = h.lane_count as usize;
        let lane = (self.next % k as u64) as usize;
        let d = self.decoders[lane]
            .as_mut()
            .ok_or_else(|| Error::corrupt(lane, 0, "lane has pairs but no model"))?;
        match d.decode()? {
            Some(p) => {
                self.next += 1;
                Ok(Some(p))
            }
            None => Err(Error::corrupt(lane, 0, "lane ran out of pairs")),
        }
    }

    fn finish(&mut self) -> Result<()> {
        let word = self.layout.header.coder.word();
        for (lane, slot) in self.decoders.iter_mut().enumerate() {
            let info = &self.layout.lanes[lane];
            let Some(d) = slot.take() else { continue };
            let crc = d.source().hasher.is_some();
            let mut src = take_source(d.source());
            d.finish().map_err(|e| relane(e, lane, info, word))?;
            if crc {
                let got = src.finish_crc()?;
                if let (Some(want), Some(got)) = (info.crc, got) {
                    if want != got {
                        return Err(Error::corrupt(
                            lane,
                            info.offset,
                            format!("CRC mismatch (stored {want:08x}, computed {got:08x})"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> Result<Checkpoint> {
        let lanes = self
            .decoders
            .iter()
            .enumerate()
            .map(|(lane, d)| match d {
                Some(d) => {
                    let (w, b) = d.cursor();
                    LaneCursor {
                        word_offset: w,
                        bit_offset: b,
                        coder_state: d.state(),
                    }
                }
                None => {
                    let info = &self.layout.lanes[lane];
                    LaneCursor {
                        word_offset: 0,
                        bit_offset: info.start_bit,
                        coder_state: info.state,
                    }
                }
            })
            .collect();
        Ok(Checkpoint {
            stream_id: self.layout.stream_id,
            pair_index: self.next,
            lanes,
        })
    }
}

/// A detached copy of a lane source's hashing state, taken before the
/// decoder that owns the source is consumed.
fn take_source<R>(s: &LaneWords<R>) -> LaneWords<R> {
    LaneWords {
        src: s.src.clone(),
        lane: s.lane,
        base: s.base,
        len: s.len,
        word: s.word,
        pos: s.pos,
        buf: Vec::new(),
        buf_first: 0,
        buf_words: 0,
        hasher: s.hasher.clone(),
        hashed: s.hashed,
    }
}

enum Inner<'a, R> {
    Static(StaticIter<'a, R>),
    Dynamic(BlockReader<R>),
}

/// Iterator over decoded pairs. Codes index the stream's model table.
pub struct PairIter<'a, R> {
    inner: Inner<'a, R>,
}

impl<R: Read + Seek> PairIter<'_, R> {
    /// Position of the next pair as a checkpoint.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        match &self.inner {
            Inner::Static(s) => s.checkpoint(),
            Inner::Dynamic(_) => Err(Error::contract("dynamic-block streams have no checkpoints")),
        }
    }

    /// Index of the next pair to be returned.
    pub fn position(&self) -> u64 {
        match &self.inner {
            Inner::Static(s) => s.next,
            Inner::Dynamic(d) => d.position(),
        }
    }

    /// Bytes currently held in read buffers.
    pub fn buffered_bytes(&self) -> usize {
        match &self.inner {
            Inner::Static(s) => s
                .decoders
                .iter()
                .flatten()
                .map(|d| d.source().buffered_bytes())
                .sum(),
            Inner::Dynamic(d) => d.buffered_bytes(),
        }
    }
}

impl<R: Read + Seek> Iterator for PairIter<'_, R> {
    type Item = Result<CodingPair>;

    fn next(&mut self) -> Option<Self::Item> {
        let r = match &mut self.inner {
            Inner::Static(s) => s.step(),
            Inner::Dynamic(d) => d.step(),
        };
        r.transpose()
    }
}

/// Decodes an in-memory stream with one thread per lane.
pub fn decode_parallel(bytes: &[u8]) -> Result<(StreamHeader, Vec<CodingPair>)> {
    let layout = Layout::parse(&mut Cursor::new(bytes))?;
    if layout.header.flags.dynamic {
        let r = StreamReader::open(Cursor::new(bytes))?;
        let pairs = r.read_all()?;
        return Ok((layout.header, pairs));
    }
    let h = &layout.header;
    let tables = layout.tables()?;
    let k = h.lane_count as usize;
    let word = h.coder.word();
    let lanes: Vec<Vec<CodingPair>> = layout
        .lanes
        .par_iter()
        .enumerate()
        .map(|(lane, info)| decode_lane_slice(bytes, lane, info, h, tables.as_ref(), word))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(h.pair_count as usize);
    let mut iters: Vec<_> = lanes.into_iter().map(|l| l.into_iter()).collect();
    for i in 0..h.pair_count {
        out.push(iters[(i % k as u64) as usize].next().expect("lane sizes checked"));
    }
    Ok((layout.header, out))
}

fn decode_lane_slice(
    bytes: &[u8],
    lane: usize,
    info: &LaneInfo,
    h: &StreamHeader,
    tables: Option<&CoderTables>,
    word: WordSize,
) -> Result<Vec<CodingPair>> {
    let n = h.lane_pairs(lane);
    let raw = &bytes[info.offset as usize..(info.offset + info.len) as usize];
    if let (Some(want), true) = (info.crc, info.len > 0) {
        let got = crc32fast::hash(raw);
        if got != want {
            return Err(Error::corrupt(
                lane,
                info.offset,
                format!("CRC mismatch (stored {want:08x}, computed {got:08x})"),
            ));
        }
    }
    let Some(tables) = tables else {
        return if n == 0 {
            Ok(Vec::new())
        } else {
            Err(Error::corrupt(lane, info.offset, "lane has pairs but no model"))
        };
    };
    let words = lane_words(raw, word);
    let payload = LanePayload {
        state: info.state,
        start_bit: info.start_bit,
        words,
        word,
    };
    decode_forward(tables, &payload, n).map_err(|e| relane(e, lane, info, word))
}

pub(crate) fn lane_words(raw: &[u8], word: WordSize) -> Vec<u32> {
    if raw.is_empty() {
        return Vec::new();
    }
    let body = &raw[LANE_PREFIX as usize..];
    match word {
        WordSize::W16 => body
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect(),
        WordSize::W32 => body
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    }
}

/// Lane payload of an in-memory stream, as an encoder could resume it.
pub(crate) fn lane_payload(bytes: &[u8], info: &LaneInfo, kind: CoderKind) -> LanePayload {
    let raw = &bytes[info.offset as usize..(info.offset + info.len) as usize];
    LanePayload {
        state: info.state,
        start_bit: info.start_bit,
        words: lane_words(raw, kind.word()),
        word: kind.word(),
    }
}
