pub mod bits;
pub mod container;
pub mod coder;
pub mod error;
pub mod formats;
pub mod model;
pub mod pair;
pub mod pipeline;
pub mod quantize;
pub mod rans;
pub mod report;
pub mod tans;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/coding-pairs.md")]
    pub mod coding_pairs {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/coders.md")]
    pub mod coders {}
    #[doc = include_str!("../../../book/src/formats.md")]
    pub mod formats {}
    #[doc = include_str!("../../../book/src/container.md")]
    pub mod container {}
    #[doc = include_str!("../../../book/src/checkpoints.md")]
    pub mod checkpoints {}
    #[doc = include_str!("../../../book/src/dynamic.md")]
    pub mod dynamic {}
    #[doc = include_str!("../../../book/src/quantization.md")]
    pub mod quantization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
