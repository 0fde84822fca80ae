//! Table-driven ANS over 256 states with 8-bit probabilities.
//!
//! Code `k` occupies `n_k` of the 256 slots, laid out by stepping 163 slots
//! at a time (`5/8 * 256 + 3`, coprime with 256, so every slot is visited).
//! Encoder state `x` lives in `[256, 512)`; tables index it by `x - 256`.
//! Spilled bits go through a 16-bit word channel.

use crate::bits::{BitReader, BitStackWriter, WordSize, WordSource};
use crate::coder::LanePayload;
use crate::error::{Error, Result};
use crate::model::{ProbabilityModel, TANS_PRECISION};
use crate::pair::CodingPair;

pub const TANS_STATES: usize = 256;
const SPREAD_STEP: usize = TANS_STATES * 5 / 8 + 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeEntry {
    pub code: u8,
    pub bits: u8,
    /// State index reached when the bits read are all zero.
    pub base: u8,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncodeEntry {
    pub next: u8,
    pub bits: u8,
}

#[derive(Clone, Debug)]
pub struct TansTables {
    spread: [u8; TANS_STATES],
    decode: [DecodeEntry; TANS_STATES],
    /// Indexed by `code * 256 + state`.
    encode: Vec<EncodeEntry>,
    payload_bits: Vec<u8>,
}

impl TansTables {
    pub fn new(model: &ProbabilityModel) -> Result<Self> {
        if model.precision_bits != TANS_PRECISION {
            return Err(Error::Precision(model.precision_bits));
        }
        model.check()?;
        let freq: Vec<usize> = model.codes.iter().map(|c| c.freq as usize).collect();
        let cum: Vec<usize> = model.cumulative().into_iter().map(|c| c as usize).collect();

        let mut spread = [0u8; TANS_STATES];
        let mut pos = 0usize;
        for (k, &f) in freq.iter().enumerate() {
            for _ in 0..f {
                spread[pos] = k as u8;
                pos = (pos + SPREAD_STEP) % TANS_STATES;
            }
        }
        debug_assert_eq!(pos, 0);

        // The i-th slot (in slot order) holding code k is where the encoder
        // lands from the sub-state n_k + i.
        let mut next_sub = freq.clone();
        let mut landing = vec![0u8; TANS_STATES];
        let mut decode = [DecodeEntry::default(); TANS_STATES];
        for (slot, &k) in spread.iter().enumerate() {
            let k = k as usize;
            let sub = next_sub[k];
            next_sub[k] += 1;
            let bits = 8 - sub.ilog2();
            decode[slot] = DecodeEntry {
                code: k as u8,
                bits: bits as u8,
                base: ((sub << bits) - TANS_STATES) as u8,
            };
            landing[cum[k] + sub - freq[k]] = slot as u8;
        }

        let mut encode = vec![EncodeEntry::default(); freq.len() * TANS_STATES];
        for (k, &f) in freq.iter().enumerate() {
            for s in 0..TANS_STATES {
                let x = TANS_STATES + s;
                let mut bits = 0;
                while x >> bits >= 2 * f {
                    bits += 1;
                }
                let sub = x >> bits;
                encode[k * TANS_STATES + s] = EncodeEntry {
                    next: landing[cum[k] + sub - f],
                    bits: bits as u8,
                };
            }
        }

        Ok(Self {
            spread,
            decode,
            encode,
            payload_bits: model.codes.iter().map(|c| c.payload_bits).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.payload_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload_bits.is_empty()
    }

    /// Code owning each slot.
    pub fn spread(&self) -> &[u8; TANS_STATES] {
        &self.spread
    }

    pub fn decode_entry(&self, state: u8) -> DecodeEntry {
        self.decode[state as usize]
    }

    pub fn encode_entry(&self, code: u8, state: u8) -> EncodeEntry {
        self.encode[code as usize * TANS_STATES + state as usize]
    }

    #[inline]
    fn check(&self, pair: &CodingPair) -> Result<usize> {
        let c = pair.code() as usize;
        let want = *self.payload_bits.get(c).ok_or(Error::Alphabet {
            code: c,
            alphabet_size: self.payload_bits.len(),
        })?;
        if want != pair.payload_len() {
            return Err(Error::contract(format!(
                "code {c} carries {want} payload bits, pair has {}",
                pair.payload_len()
            )));
        }
        Ok(c)
    }
}

pub struct TansEncoder<'t> {
    tables: &'t TansTables,
    state: u8,
    bits: BitStackWriter,
}

impl<'t> TansEncoder<'t> {
    pub fn new(tables: &'t TansTables) -> Self {
        Self {
            tables,
            state: 0,
            bits: BitStackWriter::new(WordSize::W16),
        }
    }

    pub fn resume(tables: &'t TansTables, payload: &LanePayload) -> Result<Self> {
        if payload.word != WordSize::W16 {
            return Err(Error::contract("tANS payload must use 16-bit words"));
        }
        let state = u8::try_from(payload.state)
            .map_err(|_| Error::contract("tANS state index above 255"))?;
        Ok(Self {
            tables,
            state,
            bits: BitStackWriter::restore(WordSize::W16, &payload.words, payload.start_bit)?,
        })
    }

    #[inline]
    pub fn encode(&mut self, pair: &CodingPair) -> Result<()> {
        let c = self.tables.check(pair)?;
        self.bits.push(pair.payload(), pair.payload_len() as u32);
        let e = self.tables.encode[c * TANS_STATES + self.state as usize];
        self.bits
            .push(self.state as u32 & ((1u32 << e.bits) - 1), e.bits as u32);
        self.state = e.next;
        Ok(())
    }

    pub fn state(&self) -> u64 {
        self.state as u64
    }

    pub fn bits_pushed(&self) -> u64 {
        self.bits.pushed()
    }

    pub fn finish(self) -> LanePayload {
        let (words, start_bit) = self.bits.finish();
        LanePayload {
            state: self.state as u64,
            start_bit,
            words,
            word: WordSize::W16,
        }
    }
}

pub struct TansDecoder<'t, S> {
    tables: &'t TansTables,
    state: u8,
    bits: BitReader<S>,
    remaining: u64,
}

impl<'t, S: WordSource> TansDecoder<'t, S> {
    pub fn new(tables: &'t TansTables, state: u64, bits: BitReader<S>, pairs: u64) -> Result<Self> {
        let state = u8::try_from(state)
            .map_err(|_| Error::corrupt(0, 0, format!("tANS state index {state} above 255")))?;
        Ok(Self {
            tables,
            state,
            bits,
            remaining: pairs,
        })
    }

    #[inline]
    pub fn decode(&mut self) -> Result<Option<CodingPair>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let e = self.tables.decode[self.state as usize];
        let read = self.bits.pop(e.bits as u32)?;
        self.state = e.base + read as u8;
        let len = self.tables.payload_bits[e.code as usize];
        let payload = self.bits.pop(len as u32)?;
        self.remaining -= 1;
        Ok(Some(CodingPair::masked(e.code, payload, len)))
    }

    pub fn state(&self) -> u64 {
        self.state as u64
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn reader(&self) -> &BitReader<S> {
        &self.bits
    }

    pub fn finish(self) -> Result<()> {
        if self.remaining != 0 {
            return Err(Error::contract(format!("{} pairs left undecoded", self.remaining)));
        }
        let (acc, count) = self.bits.buffered();
        if self.state != 0 || acc != 0 || count != 0 || !self.bits.is_exhausted() {
            let (w, _) = self.bits.cursor();
            return Err(Error::corrupt(0, w, "tANS stream did not return to its initial state"));
        }
        Ok(())
    }
}
