//! Range-variant ANS with a 64-bit state and 32-bit word renormalization.
//!
//! The state lives in `[2^32, 2^64)`. Encoding a code with frequency `n` and
//! cumulative frequency `c` first spills the low 32 bits of the state while
//! `x >= n * 2^(64 - N)`, then applies
//! `x <- (x / n) * 2^N + (x mod n) + c`. Decoding inverts the step and refills
//! a 32-bit word whenever the state drops below `2^32`.

use crate::bits::{BitReader, BitStackWriter, WordSize, WordSource};
use crate::coder::LanePayload;
use crate::error::{Error, Result};
use crate::model::{ProbabilityModel, RANS_PRECISION, TANS_PRECISION};
use crate::pair::CodingPair;

pub const RANS_LOW: u64 = 1 << 32;

/// Per-code constants and the slot-to-code lookup used by both directions.
#[derive(Clone, Debug)]
pub struct RansTable {
    precision: u32,
    freq: Vec<u64>,
    cum: Vec<u64>,
    payload_bits: Vec<u8>,
    slot_code: Vec<u8>,
}

impl RansTable {
    pub fn new(model: &ProbabilityModel) -> Result<Self> {
        model.check()?;
        let n = model.precision_bits;
        if n != RANS_PRECISION && n != TANS_PRECISION {
            return Err(Error::Precision(n));
        }
        let cum: Vec<u64> = model.cumulative().into_iter().map(u64::from).collect();
        let mut slot_code = vec![0u8; 1 << n];
        for (i, c) in model.codes.iter().enumerate() {
            let start = cum[i] as usize;
            slot_code[start..start + c.freq as usize].fill(i as u8);
        }
        Ok(Self {
            precision: n as u32,
            freq: model.codes.iter().map(|c| c.freq as u64).collect(),
            cum,
            payload_bits: model.codes.iter().map(|c| c.payload_bits).collect(),
            slot_code,
        })
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    #[inline]
    fn check(&self, pair: &CodingPair) -> Result<usize> {
        let c = pair.code() as usize;
        let want = *self.payload_bits.get(c).ok_or(Error::Alphabet {
            code: c,
            alphabet_size: self.freq.len(),
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

pub struct RansEncoder<'t> {
    table: &'t RansTable,
    x: u64,
    bits: BitStackWriter,
}

impl<'t> RansEncoder<'t> {
    pub fn new(table: &'t RansTable) -> Self {
        Self {
            table,
            x: RANS_LOW,
            bits: BitStackWriter::new(WordSize::W32),
        }
    }

    /// Picks up where the encoder that produced `payload` left off.
    pub fn resume(table: &'t RansTable, payload: &LanePayload) -> Result<Self> {
        if payload.word != WordSize::W32 {
            return Err(Error::contract("rANS payload must use 32-bit words"));
        }
        if payload.state < RANS_LOW {
            return Err(Error::contract("rANS state below its interval"));
        }
        Ok(Self {
            table,
            x: payload.state,
            bits: BitStackWriter::restore(WordSize::W32, &payload.words, payload.start_bit)?,
        })
    }

    #[inline]
    pub fn encode(&mut self, pair: &CodingPair) -> Result<()> {
        let t = self.table;
        let c = t.check(pair)?;
        self.bits.push(pair.payload(), pair.payload_len() as u32);

        let f = t.freq[c];
        let n = t.precision;
        let mut x = self.x;
        if f < 1 << n && x >= f << (64 - n) {
            self.bits.push(x as u32, 32);
            x >>= 32;
        }
        self.x = ((x / f) << n) + (x % f) + t.cum[c];
        Ok(())
    }

    pub fn state(&self) -> u64 {
        self.x
    }

    pub fn bits_pushed(&self) -> u64 {
        self.bits.pushed()
    }

    pub fn finish(self) -> LanePayload {
        let (words, start_bit) = self.bits.finish();
        LanePayload {
            state: self.x,
            start_bit,
            words,
            word: WordSize::W32,
        }
    }
}

pub struct RansDecoder<'t, S> {
    table: &'t RansTable,
    x: u64,
    bits: BitReader<S>,
    remaining: u64,
}

impl<'t, S: WordSource> RansDecoder<'t, S> {
    /// `bits` must be positioned where the state `x` was taken.
    pub fn new(table: &'t RansTable, x: u64, bits: BitReader<S>, pairs: u64) -> Result<Self> {
        if x < RANS_LOW {
            return Err(Error::corrupt(0, 0, format!("rANS state {x:#x} below 2^32")));
        }
        Ok(Self {
            table,
            x,
            bits,
            remaining: pairs,
        })
    }

    /// Decodes the next pair, or `None` once the expected count is reached.
    #[inline]
    pub fn decode(&mut self) -> Result<Option<CodingPair>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let t = self.table;
        let n = t.precision;
        let slot = self.x & ((1 << n) - 1);
        let c = t.slot_code[slot as usize] as usize;
        let mut x = t.freq[c] * (self.x >> n) + slot - t.cum[c];
        if x < RANS_LOW {
            x = (x << 32) | self.bits.pop(32)? as u64;
        }
        self.x = x;
        let len = t.payload_bits[c];
        let payload = self.bits.pop(len as u32)?;
        self.remaining -= 1;
        Ok(Some(CodingPair::masked(c as u8, payload, len)))
    }

    pub fn state(&self) -> u64 {
        self.x
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn reader(&self) -> &BitReader<S> {
        &self.bits
    }

    /// Checks that the stream ended exactly where the encoder started.
    pub fn finish(self) -> Result<()> {
        if self.remaining != 0 {
            return Err(Error::contract(format!("{} pairs left undecoded", self.remaining)));
        }
        let (acc, count) = self.bits.buffered();
        if self.x != RANS_LOW || acc != 0 || count != 0 || !self.bits.is_exhausted() {
            let (w, _) = self.bits.cursor();
            return Err(Error::corrupt(0, w, "rANS stream did not return to its initial state"));
        }
        Ok(())
    }
}
