//! The bit channel shared by ANS state words and raw payload bits.
//!
//! Encoding pushes groups of up to 32 bits onto a stack and spills the oldest
//! bits as fixed-size words (16 bits for tANS, 32 for rANS). Decoding pops
//! groups back in exactly the reverse order.
//!
//! Seen from the decoder the channel is an LSB-first bit stream: first the
//! leftover bits the encoder never spilled (stored as a word padded at the
//! bottom, so decoding starts part-way into word 0), then the spilled words
//! from last to first. A position in that stream is a word index plus a bit
//! index within the word, which is all a checkpoint needs.

use crate::error::{Error, Result};

/// Word width of the bit channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordSize {
    W16,
    W32,
}

impl WordSize {
    #[inline]
    pub const fn bits(self) -> u32 {
        match self {
            WordSize::W16 => 16,
            WordSize::W32 => 32,
        }
    }

    #[inline]
    pub const fn bytes(self) -> usize {
        match self {
            WordSize::W16 => 2,
            WordSize::W32 => 4,
        }
    }
}

/// Encoder side of the channel.
#[derive(Clone, Debug)]
pub struct BitStackWriter {
    acc: u64,
    count: u32,
    words: Vec<u32>,
    word: WordSize,
    pushed: u64,
}

impl BitStackWriter {
    pub fn new(word: WordSize) -> Self {
        Self {
            acc: 0,
            count: 0,
            words: Vec::new(),
            word,
            pushed: 0,
        }
    }

    /// Pushes the low `n` bits of `bits`, `n <= 32`.
    #[inline]
    pub fn push(&mut self, bits: u32, n: u32) {
        debug_assert!(n <= 32);
        debug_assert!(n == 32 || bits >> n == 0);
        if n == 0 {
            return;
        }
        let w = self.word.bits();
        self.acc = (self.acc << n) | bits as u64;
        self.count += n;
        self.pushed += n as u64;
        while self.count >= w {
            self.count -= w;
            self.words.push((self.acc >> self.count) as u32 & word_mask(w));
        }
        self.acc &= (1u64 << self.count) - 1;
    }

    /// Total number of bits pushed so far.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn word_size(&self) -> WordSize {
        self.word
    }

    /// Finishes the channel, returning words in decode order and the bit at
    /// which decoding starts inside word 0.
    pub fn finish(self) -> (Vec<u32>, u8) {
        let w = self.word.bits();
        let mut out = Vec::with_capacity(self.words.len() + 1);
        let start = if self.count > 0 {
            out.push(((self.acc as u32) << (w - self.count)) & word_mask(w));
            (w - self.count) as u8
        } else {
            0
        };
        out.extend(self.words.iter().rev());
        (out, start)
    }

    /// Rebuilds the writer that produced `words` (decode order) and `start`,
    /// so more bits can be pushed on top.
    pub fn restore(word: WordSize, words: &[u32], start: u8) -> Result<Self> {
        let w = word.bits();
        if start as u32 >= w {
            return Err(Error::contract("start bit outside word"));
        }
        let (acc, count, spilled) = if start > 0 {
            let first = *words
                .first()
                .ok_or_else(|| Error::contract("missing partial word"))?;
            (
                (first >> start) as u64,
                w - start as u32,
                &words[1..],
            )
        } else {
            (0, 0, words)
        };
        let spilled: Vec<u32> = spilled.iter().rev().copied().collect();
        let pushed = spilled.len() as u64 * w as u64 + count as u64;
        Ok(Self {
            acc,
            count,
            words: spilled,
            word,
            pushed,
        })
    }
}

/// A source of words in decode order.
pub trait WordSource {
    /// Returns the next word, or an error if the stream is exhausted or
    /// unreadable.
    fn next_word(&mut self) -> Result<u32>;

    /// Index of the next word to be returned.
    fn position(&self) -> u64;

    /// Total number of words, if known.
    fn len(&self) -> Option<u64>;
}

/// Words held in memory.
#[derive(Clone, Debug)]
pub struct SliceWords<'a> {
    words: &'a [u32],
    pos: usize,
}

impl<'a> SliceWords<'a> {
    pub fn new(words: &'a [u32]) -> Self {
        Self { words, pos: 0 }
    }

    pub fn at(words: &'a [u32], pos: usize) -> Self {
        Self { words, pos }
    }
}

impl WordSource for SliceWords<'_> {
    #[inline]
    fn next_word(&mut self) -> Result<u32> {
        match self.words.get(self.pos) {
            Some(&w) => {
                self.pos += 1;
                Ok(w)
            }
            None => Err(Error::corrupt(0, self.pos as u64, "bit channel exhausted")),
        }
    }

    fn position(&self) -> u64 {
        self.pos as u64
    }

    fn len(&self) -> Option<u64> {
        Some(self.words.len() as u64)
    }
}

/// Decoder side of the channel.
#[derive(Clone, Debug)]
pub struct BitReader<S> {
    acc: u64,
    count: u32,
    word_bits: u32,
    src: S,
}

impl<S: WordSource> BitReader<S> {
    /// Starts reading at bit `bit` of the word `src` returns next.
    pub fn new(word: WordSize, mut src: S, bit: u8) -> Result<Self> {
        let w = word.bits();
        let (acc, count) = if bit > 0 {
            if bit as u32 >= w {
                return Err(Error::contract("start bit outside word"));
            }
            ((src.next_word()? >> bit) as u64, w - bit as u32)
        } else {
            (0, 0)
        };
        Ok(Self {
            acc,
            count,
            word_bits: w,
            src,
        })
    }

    /// Pops `n <= 32` bits.
    #[inline]
    pub fn pop(&mut self, n: u32) -> Result<u32> {
        debug_assert!(n <= 32);
        while self.count < n {
            let w = self.src.next_word()?;
            self.acc |= (w as u64) << self.count;
            self.count += self.word_bits;
        }
        let v = (self.acc & ((1u64 << n) - 1)) as u32;
        self.acc >>= n;
        self.count -= n;
        Ok(v)
    }

    /// Current position as (word index, bit within word).
    pub fn cursor(&self) -> (u64, u8) {
        let consumed = self.src.position() * self.word_bits as u64 - self.count as u64;
        (
            consumed / self.word_bits as u64,
            (consumed % self.word_bits as u64) as u8,
        )
    }

    /// True when every bit of every word has been consumed. Only meaningful
    /// for sources that know their length.
    pub fn is_exhausted(&self) -> bool {
        self.count == 0 && self.src.len() == Some(self.src.position())
    }

    /// Bits still buffered from words already read. Nonzero padding here
    /// means the stream was not produced by a matching encoder.
    pub(crate) fn buffered(&self) -> (u64, u32) {
        (self.acc, self.count)
    }

    pub fn source(&self) -> &S {
        &self.src
    }

    pub fn into_source(self) -> S {
        self.src
    }
}

#[inline]
const fn word_mask(w: u32) -> u32 {
    if w >= 32 {
        u32::MAX
    } else {
        (1u32 << w) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn round_trip(word: WordSize, groups: &[(u32, u32)]) {
        let mut w = BitStackWriter::new(word);
        for &(v, n) in groups {
            w.push(v, n);
        }
        let total = w.pushed();
        let (words, start) = w.finish();
        let mut r = BitReader::new(word, SliceWords::new(&words), start).unwrap();
        for &(v, n) in groups.iter().rev() {
            assert_eq!(r.pop(n).unwrap(), v, "group of {n} bits");
        }
        assert!(r.is_exhausted());
        let expect_words = total.div_ceil(word.bits() as u64);
        assert_eq!(words.len() as u64, expect_words);
    }

    #[test]
    fn lifo_order_both_word_sizes() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for word in [WordSize::W16, WordSize::W32] {
            for _ in 0..50 {
                let groups: Vec<(u32, u32)> = (0..rng.random_range(0..300))
                    .map(|_| {
                        let n = rng.random_range(0..=32);
                        let v = if n == 32 { rng.random() } else { rng.random::<u32>() & ((1u32 << n) - 1) };
                        (v, n)
                    })
                    .collect();
                round_trip(word, &groups);
            }
        }
    }

    #[test]
    fn empty_channel() {
        let (words, start) = BitStackWriter::new(WordSize::W32).finish();
        assert!(words.is_empty());
        assert_eq!(start, 0);
    }

    #[test]
    fn restore_continues_stack() {
        let mut w = BitStackWriter::new(WordSize::W16);
        w.push(0b101, 3);
        w.push(0xabcd, 16);
        w.push(0x3, 2);
        let (words, start) = w.clone().finish();
        let mut again = BitStackWriter::restore(WordSize::W16, &words, start).unwrap();
        assert_eq!(again.pushed(), w.pushed());
        again.push(0x1ff, 9);
        w.push(0x1ff, 9);
        assert_eq!(again.finish(), w.finish());
    }

    #[test]
    fn cursor_tracks_consumption() {
        let mut w = BitStackWriter::new(WordSize::W32);
        for i in 0..20u32 {
            w.push(i, 7);
        }
        let (words, start) = w.finish();
        let mut r = BitReader::new(WordSize::W32, SliceWords::new(&words), start).unwrap();
        let (w0, b0) = r.cursor();
        assert_eq!(w0 * 32 + b0 as u64, start as u64);
        r.pop(7).unwrap();
        r.pop(7).unwrap();
        let (wi, bi) = r.cursor();
        assert_eq!(wi * 32 + bi as u64, start as u64 + 14);
    }
}
