//! `--format` and `--input-type` parsing.

use std::fs;

use clap::ValueEnum;
use coding_pairs::error::Error;
use coding_pairs::formats::{FloatFormat, Format, PositFormat, SampleType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputType {
    Bf16,
    Fp16,
    Fp32,
    /// fp32 holding a bfloat16 in its high half
    Fp32PaddedBf16,
    I8,
    I16,
    I32,
    U8,
    U16,
    U32,
}

impl From<InputType> for SampleType {
    fn from(t: InputType) -> Self {
        match t {
            InputType::Bf16 => SampleType::Bf16,
            InputType::Fp16 => SampleType::F16,
            InputType::Fp32 => SampleType::F32,
            InputType::Fp32PaddedBf16 => SampleType::F32PaddedBf16,
            InputType::I8 => SampleType::I8,
            InputType::I16 => SampleType::I16,
            InputType::I32 => SampleType::I32,
            InputType::U8 => SampleType::U8,
            InputType::U16 => SampleType::U16,
            InputType::U32 => SampleType::U32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormatArg {
    pub format: Format,
    pub default_input: SampleType,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

fn num(s: &str, what: &str) -> Result<u32, Error> {
    let s = s.trim();
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(h, 16),
        None => s.parse(),
    };
    v.map_err(|_| bad(format!("bad {what} `{s}`")))
}

fn float(f: FloatFormat, storage: SampleType) -> FormatArg {
    FormatArg {
        format: Format::Float {
            source: if storage == SampleType::F32 { FloatFormat::FP32 } else { f_source(f) },
            target: f,
        },
        default_input: storage,
    }
}

// Narrow formats are taken from bfloat16 files.
fn f_source(f: FloatFormat) -> FloatFormat {
    if f == FloatFormat::FP16 {
        FloatFormat::FP16
    } else {
        FloatFormat::BF16
    }
}

fn unsigned_for(bits: u32) -> SampleType {
    match bits {
        0..=8 => SampleType::U8,
        9..=16 => SampleType::U16,
        _ => SampleType::U32,
    }
}

impl FormatArg {
    /// The format to use for files of `storage`. Float formats read fp32
    /// files as fp32 and narrow from there.
    pub fn for_storage(&self, storage: SampleType) -> Result<Format, Error> {
        match &self.format {
            Format::Float { source, target } => {
                let source = match storage {
                    SampleType::F32 if target.exp_bits == 8 => FloatFormat::FP32,
                    SampleType::Bf16 | SampleType::F32PaddedBf16 if source.exp_bits == 8 => FloatFormat::BF16,
                    SampleType::F16 if *source == FloatFormat::FP16 => FloatFormat::FP16,
                    _ => return Err(bad(format!("{storage:?} input does not fit this float format"))),
                };
                Ok(Format::Float { source, target: *target })
            }
            f => Ok(f.clone()),
        }
    }

    pub fn parse(s: &str, saturate: Option<u8>) -> Result<Self, Error> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        if saturate.is_some() && name != "int" {
            return Err(bad("--saturate only applies to int formats"));
        }
        let need = || arg.ok_or_else(|| bad(format!("format `{name}` needs an argument")));
        Ok(match name {
            "bf16" => float(FloatFormat::BF16, SampleType::Bf16),
            "fp16" => float(FloatFormat::FP16, SampleType::F16),
            "fp32" => float(FloatFormat::FP32, SampleType::F32),
            "e8m2" => float(FloatFormat::E8M2, SampleType::Bf16),
            "e8m3" => float(FloatFormat::E8M3, SampleType::Bf16),
            "posit" => {
                let (n, es) = need()?
                    .split_once(',')
                    .ok_or_else(|| bad("posit format is posit:<n>,<es>"))?;
                let n = num(n, "posit width")?;
                let es = num(es, "posit exponent size")?;
                let p = PositFormat::new(
                    u8::try_from(n).map_err(|_| bad("posit width too large"))?,
                    u8::try_from(es).map_err(|_| bad("posit exponent size too large"))?,
                )?;
                FormatArg {
                    format: Format::Posit(p),
                    default_input: unsigned_for(n),
                }
            }
            "int" => {
                let nb = num(need()?, "integer width")?;
                if !(1..=31).contains(&nb) {
                    return Err(bad("int:<Nb> needs 1 <= Nb <= 31"));
                }
                FormatArg {
                    format: Format::Int {
                        nb: nb as u8,
                        max_payload: saturate,
                    },
                    default_input: match nb {
                        0..=7 => SampleType::I8,
                        8..=15 => SampleType::I16,
                        _ => SampleType::I32,
                    },
                }
            }
            "fixed" => {
                let (f, m) = need()?
                    .split_once(',')
                    .ok_or_else(|| bad("fixed point format is fixed:<frac bits>,<mantissa bits>"))?;
                FormatArg {
                    format: Format::FixedPoint {
                        frac_bits: num(f, "fraction bits")?.min(255) as u8,
                        mant_bits: num(m, "mantissa bits")?.min(255) as u8,
                    },
                    default_input: SampleType::I32,
                }
            }
            "ternary-runs" | "ternary-groups" | "binary-runs" | "binary-groups" => {
                let binary = name.starts_with("binary");
                FormatArg {
                    format: if name.ends_with("runs") {
                        Format::TernaryRuns { binary }
                    } else {
                        Format::TernaryGroups { binary }
                    },
                    default_input: if binary { SampleType::U8 } else { SampleType::I8 },
                }
            }
            "direct" => {
                let path = need()?;
                let text = fs::read_to_string(path).map_err(|e| Error::Io {
                    written: 0,
                    source: std::io::Error::new(e.kind(), format!("{path}: {e}")),
                })?;
                parse_direct(&text)?
            }
            _ => return Err(bad(format!("unknown format `{s}`"))),
        })
    }
}

/// A list of allowed values, separated by whitespace or commas. `#` starts
/// a comment.
pub fn parse_direct(text: &str) -> Result<FormatArg, Error> {
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',') {
            if !tok.is_empty() {
                values.push(num(tok, "direct value")?);
            }
        }
    }
    values.sort_unstable();
    values.dedup();
    if values.is_empty() {
        return Err(bad("direct value list is empty"));
    }
    let width = 32 - values.last().unwrap().leading_zeros();
    let width = width.max(1);
    Ok(FormatArg {
        format: Format::Direct {
            width: width as u8,
            values,
        },
        default_input: unsigned_for(width),
    })
}
