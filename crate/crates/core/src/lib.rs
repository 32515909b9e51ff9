//! Face detection and matching built on Haar cascades.

pub mod cascade;
pub mod detector;
pub mod encoding;
pub mod enhanced;
pub mod eval;
pub mod imageio;
pub mod integral;
pub mod pipeline;
pub mod registry;
pub mod synth;

/// The guide in `book/`, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/cascades.md")]
    mod cascades {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/enhanced.md")]
    mod enhanced {}
    #[doc = include_str!("../../../book/src/matching.md")]
    mod matching {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/registry.md")]
    mod registry {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
