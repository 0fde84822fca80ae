use std::io;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("code {code} is outside the alphabet of {alphabet_size} codes")]
    Alphabet { code: usize, alphabet_size: usize },

    #[error("{codes} nonzero codes do not fit in {slots} probability slots")]
    Capacity { codes: usize, slots: usize },

    #[error("cannot normalize an empty frequency table")]
    EmptyInput,

    #[error("invalid probability model: {}", format_violations(.0))]
    Model(Vec<Violation>),

    #[error("unsupported probability precision {0} bits")]
    Precision(u8),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no code is mapped for {0}")]
    Unmapped(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("corrupt stream in lane {lane} at byte {offset}: {message}")]
    Corrupt {
        lane: usize,
        offset: u64,
        message: String,
    },

    #[error("checkpoint does not belong to this stream (expected id {expected:08x}, found {found:08x})")]
    Stale { expected: u32, found: u32 },

    #[error("i/o error after {written} bytes: {source}")]
    Io {
        written: u64,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn parse(offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn corrupt(lane: usize, offset: u64, msg: impl Into<String>) -> Self {
        Error::Corrupt {
            lane,
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(written: u64, source: io::Error) -> Self {
        Error::Io { written, source }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io { written: 0, source }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
