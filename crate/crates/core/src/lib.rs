pub mod augment;
pub mod autodiff;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod hash;
pub mod oodscore;
pub mod pipeline;
pub mod split;
pub mod substructure;
pub mod synth;
pub mod training;
pub mod tudataset;
pub mod wl;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/substructures.md")]
    mod substructures {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/augmentations.md")]
    mod augmentations {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/expressivity.md")]
    mod expressivity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
