//! Binary and ternary weights, coded either as zero runs or as groups of
//! eight.
//!
//! Run form: each nonzero weight closes a run of zeros. The run length goes
//! through the integer coding (unsigned, so no sign bit); in ternary mode the
//! closing weight's sign rides along as one extra payload bit. Zeros after
//! the last nonzero weight become one trailing run with its own code.
//!
//! Group form: the code is the occupancy mask of eight weights (first
//! weight in the MSB), the payload one sign bit per nonzero weight.

use crate::error::{Error, Result};
use crate::model::Mapping;
use crate::pair::{low_mask, CodingPair};

use super::int::magnitude_class;
use super::Symbol;

pub const GROUP: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TernaryRun {
    pub zero_run: u32,
    /// Sign of the closing weight; `None` in binary mode and for the
    /// trailing run.
    pub terminal_sign: Option<i8>,
    /// The run reaches the end of the sequence with no closing weight.
    pub trailing: bool,
}

impl TernaryRun {
    pub fn new(zero_run: u32, terminal_sign: Option<i8>) -> Self {
        Self {
            zero_run,
            terminal_sign,
            trailing: false,
        }
    }

    pub fn trailing(zero_run: u32) -> Self {
        Self {
            zero_run,
            terminal_sign: None,
            trailing: true,
        }
    }
}

/// Reads weights stored as two's complement integers, checking the domain.
pub fn weights_from_values(values: &[u32], binary: bool) -> Result<Vec<i8>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| match (v as i32, binary) {
            (0, _) | (1, _) => Ok(v as i8),
            (-1, false) => Ok(-1),
            (x, _) => Err(Error::contract(format!(
                "weight {i} is {x}, outside the {} domain",
                if binary { "binary" } else { "ternary" }
            ))),
        })
        .collect()
}

pub fn ternary_to_runs(weights: &[i8], binary: bool) -> Vec<TernaryRun> {
    let mut runs = Vec::new();
    let mut zeros = 0u32;
    for &w in weights {
        if w == 0 {
            zeros += 1;
        } else {
            runs.push(TernaryRun::new(zeros, (!binary).then_some(w.signum())));
            zeros = 0;
        }
    }
    if zeros > 0 {
        runs.push(TernaryRun::trailing(zeros));
    }
    runs
}

pub fn runs_to_ternary(runs: &[TernaryRun]) -> Vec<i8> {
    let total: usize = runs
        .iter()
        .map(|r| r.zero_run as usize + !r.trailing as usize)
        .sum();
    let mut out = Vec::with_capacity(total);
    for r in runs {
        out.extend(std::iter::repeat_n(0i8, r.zero_run as usize));
        if !r.trailing {
            out.push(r.terminal_sign.unwrap_or(1));
        }
    }
    out
}

/// Run symbols: class of the run length, then the closing sign on top of
/// the bits below the length's MSB.
pub fn runs_to_symbols(runs: &[TernaryRun], binary: bool) -> Result<Vec<Symbol>> {
    runs.iter()
        .map(|r| {
            if r.trailing {
                return Ok(Symbol::new(Mapping::RunTail, r.zero_run, 32));
            }
            let k = magnitude_class(r.zero_run as u64);
            let low_len = k.saturating_sub(1);
            let low = r.zero_run & low_mask(low_len as u8);
            if binary {
                if r.terminal_sign.is_some() {
                    return Err(Error::contract("binary runs carry no sign"));
                }
                Ok(Symbol::new(Mapping::RunLength(k), low, low_len as u8))
            } else {
                let neg = match r.terminal_sign {
                    Some(1) => 0,
                    Some(-1) => 1,
                    _ => return Err(Error::contract("ternary run without a closing sign")),
                };
                Ok(Symbol::new(
                    Mapping::RunLength(k),
                    (neg << low_len) | low,
                    low_len as u8 + 1,
                ))
            }
        })
        .collect()
}

pub fn symbols_to_runs(symbols: &[Symbol], binary: bool) -> Result<Vec<TernaryRun>> {
    symbols
        .iter()
        .map(|s| match s.mapping {
            Mapping::RunTail if s.len == 32 => Ok(TernaryRun::trailing(s.payload)),
            Mapping::RunLength(k) if k <= 32 => {
                let low_len = k.saturating_sub(1);
                let expect = low_len + !binary as u32;
                if s.len as u32 != expect {
                    return Err(Error::contract(format!(
                        "run class {k} with {} payload bits",
                        s.len
                    )));
                }
                let low = s.payload & low_mask(low_len as u8);
                let run = if k == 0 { 0 } else { (1u32 << low_len) | low };
                let sign = if binary {
                    None
                } else if s.payload >> low_len & 1 == 1 {
                    Some(-1)
                } else {
                    Some(1)
                };
                Ok(TernaryRun::new(run, sign))
            }
            other => Err(Error::Unmapped(format!("{other} in a run stream"))),
        })
        .collect()
}

/// Run pairs with the run class as the code and code 33 for the trailing
/// run.
pub fn ternary_to_run_pairs(weights: &[i8], binary: bool) -> Result<Vec<CodingPair>> {
    Ok(runs_to_symbols(&ternary_to_runs(weights, binary), binary)?
        .into_iter()
        .map(|s| {
            let code = match s.mapping {
                Mapping::RunLength(k) => k as u8,
                _ => RUN_TAIL_CODE,
            };
            CodingPair::masked(code, s.payload, s.len)
        })
        .collect())
}

pub const RUN_TAIL_CODE: u8 = 33;

pub fn run_pairs_to_ternary(pairs: &[CodingPair], binary: bool) -> Result<Vec<i8>> {
    let symbols: Vec<Symbol> = pairs
        .iter()
        .map(|p| {
            let m = if p.code() == RUN_TAIL_CODE {
                Mapping::RunTail
            } else {
                Mapping::RunLength(p.code() as u32)
            };
            Symbol::new(m, p.payload(), p.payload_len())
        })
        .collect();
    Ok(runs_to_ternary(&symbols_to_runs(&symbols, binary)?))
}

/// Group symbols over `weights` padded with zeros to a multiple of eight.
pub fn group_symbols(weights: &[i8], binary: bool) -> Vec<Symbol> {
    weights
        .chunks(GROUP)
        .map(|g| {
            let mut mask = 0u8;
            let mut signs = 0u32;
            let mut n = 0u8;
            for (i, &w) in g.iter().enumerate() {
                if w != 0 {
                    mask |= 0x80 >> i;
                    signs = (signs << 1) | (w < 0) as u32;
                    n += 1;
                }
            }
            if binary {
                Symbol::new(Mapping::GroupMask(mask), 0, 0)
            } else {
                Symbol::new(Mapping::GroupMask(mask), signs, n)
            }
        })
        .collect()
}

/// Inverse of [`group_symbols`], including the padding.
pub fn groups_from_symbols(symbols: &[Symbol], binary: bool) -> Result<Vec<i8>> {
    let mut out = Vec::with_capacity(symbols.len() * GROUP);
    for s in symbols {
        let Mapping::GroupMask(mask) = s.mapping else {
            return Err(Error::Unmapped(format!("{} in a group stream", s.mapping)));
        };
        let n = mask.count_ones();
        let expect = if binary { 0 } else { n };
        if s.len as u32 != expect {
            return Err(Error::contract(format!(
                "group {mask:08b} with {} payload bits",
                s.len
            )));
        }
        let mut left = n;
        for i in 0..GROUP {
            if mask & (0x80 >> i) == 0 {
                out.push(0);
            } else {
                left -= 1;
                let neg = !binary && (s.payload >> left) & 1 == 1;
                out.push(if neg { -1 } else { 1 });
            }
        }
    }
    Ok(out)
}

/// Group pairs with the occupancy mask as the code.
pub fn ternary_to_groups(weights: &[i8], binary: bool) -> Vec<CodingPair> {
    group_symbols(weights, binary)
        .into_iter()
        .map(|s| match s.mapping {
            Mapping::GroupMask(m) => CodingPair::masked(m, s.payload, s.len),
            _ => unreachable!(),
        })
        .collect()
}

/// Inverse of [`ternary_to_groups`]; `len` drops the padding.
pub fn groups_to_ternary(pairs: &[CodingPair], binary: bool, len: usize) -> Result<Vec<i8>> {
    let symbols: Vec<Symbol> = pairs
        .iter()
        .map(|p| Symbol::new(Mapping::GroupMask(p.code()), p.payload(), p.payload_len()))
        .collect();
    let mut w = groups_from_symbols(&symbols, binary)?;
    if w.len() < len {
        return Err(Error::contract("fewer groups than weights"));
    }
    w.truncate(len);
    Ok(w)
}
