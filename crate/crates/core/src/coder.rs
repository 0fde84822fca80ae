//! Coder selection and the parts shared by the rANS and tANS cores.

use crate::bits::{BitReader, WordSize, WordSource};
use crate::error::{Error, Result};
use crate::model::{ProbabilityModel, RANS_PRECISION, TANS_PRECISION};
use crate::pair::CodingPair;
use crate::rans::{RansDecoder, RansEncoder, RansTable};
use crate::tans::{TansDecoder, TansEncoder, TansTables};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoderKind {
    /// rANS, 16-bit probabilities, 32-bit words.
    Rans16,
    /// tANS, 8-bit probabilities, 16-bit words.
    Tans8,
}

impl CoderKind {
    pub const fn precision(self) -> u8 {
        match self {
            CoderKind::Rans16 => RANS_PRECISION,
            CoderKind::Tans8 => TANS_PRECISION,
        }
    }

    pub const fn word(self) -> WordSize {
        match self {
            CoderKind::Rans16 => WordSize::W32,
            CoderKind::Tans8 => WordSize::W16,
        }
    }

    /// Bits of final state a decoder needs to start.
    pub const fn state_bits(self) -> u64 {
        match self {
            CoderKind::Rans16 => 64,
            CoderKind::Tans8 => 8,
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            CoderKind::Rans16 => 0,
            CoderKind::Tans8 => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(CoderKind::Rans16),
            1 => Some(CoderKind::Tans8),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoderKind::Rans16 => "rANS 16 bits",
            CoderKind::Tans8 => "tANS 8 bits",
        }
    }
}

/// Everything one encoder leaves behind: its final state and the bit
/// channel's words in decode order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanePayload {
    pub state: u64,
    /// Bit of word 0 where decoding starts.
    pub start_bit: u8,
    pub words: Vec<u32>,
    pub word: WordSize,
}

impl LanePayload {
    /// Bits occupied in the channel, excluding padding below `start_bit`.
    pub fn channel_bits(&self) -> u64 {
        self.words.len() as u64 * self.word.bits() as u64 - self.start_bit as u64
    }

    /// Channel bits plus the final state a decoder needs.
    pub fn compressed_bits(&self, kind: CoderKind) -> u64 {
        self.channel_bits() + kind.state_bits()
    }
}

/// Prepared coder tables for one model.
#[derive(Clone, Debug)]
pub enum CoderTables {
    Rans(RansTable),
    Tans(TansTables),
}

impl CoderTables {
    pub fn new(kind: CoderKind, model: &ProbabilityModel) -> Result<Self> {
        if model.precision_bits != kind.precision() {
            return Err(Error::Precision(model.precision_bits));
        }
        Ok(match kind {
            CoderKind::Rans16 => CoderTables::Rans(RansTable::new(model)?),
            CoderKind::Tans8 => CoderTables::Tans(TansTables::new(model)?),
        })
    }

    pub fn kind(&self) -> CoderKind {
        match self {
            CoderTables::Rans(_) => CoderKind::Rans16,
            CoderTables::Tans(_) => CoderKind::Tans8,
        }
    }

    pub fn encoder(&self) -> Encoder<'_> {
        match self {
            CoderTables::Rans(t) => Encoder::Rans(RansEncoder::new(t)),
            CoderTables::Tans(t) => Encoder::Tans(TansEncoder::new(t)),
        }
    }

    pub fn resume_encoder(&self, payload: &LanePayload) -> Result<Encoder<'_>> {
        Ok(match self {
            CoderTables::Rans(t) => Encoder::Rans(RansEncoder::resume(t, payload)?),
            CoderTables::Tans(t) => Encoder::Tans(TansEncoder::resume(t, payload)?),
        })
    }

    /// A decoder starting from `state` with `bits` at the matching position.
    pub fn decoder<S: WordSource>(
        &self,
        state: u64,
        bits: BitReader<S>,
        pairs: u64,
    ) -> Result<Decoder<'_, S>> {
        Ok(match self {
            CoderTables::Rans(t) => Decoder::Rans(RansDecoder::new(t, state, bits, pairs)?),
            CoderTables::Tans(t) => Decoder::Tans(TansDecoder::new(t, state, bits, pairs)?),
        })
    }
}

pub enum Encoder<'t> {
    Rans(RansEncoder<'t>),
    Tans(TansEncoder<'t>),
}

impl Encoder<'_> {
    #[inline]
    pub fn encode(&mut self, pair: &CodingPair) -> Result<()> {
        match self {
            Encoder::Rans(e) => e.encode(pair),
            Encoder::Tans(e) => e.encode(pair),
        }
    }

    pub fn state(&self) -> u64 {
        match self {
            Encoder::Rans(e) => e.state(),
            Encoder::Tans(e) => e.state(),
        }
    }

    pub fn bits_pushed(&self) -> u64 {
        match self {
            Encoder::Rans(e) => e.bits_pushed(),
            Encoder::Tans(e) => e.bits_pushed(),
        }
    }

    pub fn finish(self) -> LanePayload {
        match self {
            Encoder::Rans(e) => e.finish(),
            Encoder::Tans(e) => e.finish(),
        }
    }
}

pub enum Decoder<'t, S> {
    Rans(RansDecoder<'t, S>),
    Tans(TansDecoder<'t, S>),
}

impl<S: WordSource> Decoder<'_, S> {
    #[inline]
    pub fn decode(&mut self) -> Result<Option<CodingPair>> {
        match self {
            Decoder::Rans(d) => d.decode(),
            Decoder::Tans(d) => d.decode(),
        }
    }

    pub fn state(&self) -> u64 {
        match self {
            Decoder::Rans(d) => d.state(),
            Decoder::Tans(d) => d.state(),
        }
    }

    pub fn cursor(&self) -> (u64, u8) {
        match self {
            Decoder::Rans(d) => d.reader().cursor(),
            Decoder::Tans(d) => d.reader().cursor(),
        }
    }

    pub fn remaining(&self) -> u64 {
        match self {
            Decoder::Rans(d) => d.remaining(),
            Decoder::Tans(d) => d.remaining(),
        }
    }

    pub fn source(&self) -> &S {
        match self {
            Decoder::Rans(d) => d.reader().source(),
            Decoder::Tans(d) => d.reader().source(),
        }
    }

    pub fn finish(self) -> Result<()> {
        match self {
            Decoder::Rans(d) => d.finish(),
            Decoder::Tans(d) => d.finish(),
        }
    }
}

/// Encodes `pairs` back to front into one payload, so that decoding yields
/// them in their original order.
pub fn encode_reversed(tables: &CoderTables, pairs: &[CodingPair]) -> Result<LanePayload> {
    let mut e = tables.encoder();
    for p in pairs.iter().rev() {
        e.encode(p)?;
    }
    Ok(e.finish())
}

/// Decodes a whole payload produced by [`encode_reversed`].
pub fn decode_forward(
    tables: &CoderTables,
    payload: &LanePayload,
    pairs: u64,
) -> Result<Vec<CodingPair>> {
    let reader = BitReader::new(
        payload.word,
        crate::bits::SliceWords::new(&payload.words),
        payload.start_bit,
    )?;
    let mut d = tables.decoder(payload.state, reader, pairs)?;
    let mut out = Vec::with_capacity(pairs as usize);
    while let Some(p) = d.decode()? {
        out.push(p);
    }
    d.finish()?;
    Ok(out)
}
