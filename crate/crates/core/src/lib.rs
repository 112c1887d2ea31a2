//! Direction-of-arrival estimation for spherical microphone arrays using
//! subspace pseudointensity vectors.
//!
//! The processing chain runs from multichannel recordings to a ranked list
//! of source directions:
//!
//! 1. [`stft`]: short-time Fourier transform of every sensor.
//! 2. [`shdomain`]: spherical-harmonic encoding and mode-strength
//!    compensation.
//! 3. [`sspiv`]: smoothed SH covariance per time-frequency region, its
//!    principal eigenvector, and one pseudointensity direction per region.
//! 4. [`doamap`]: direction histogram, solid-angle smoothing, peak picking.
//!
//! [`pipeline::Pipeline`] wires these together. [`simulator`] renders
//! plane-wave scenes for testing and [`evaluation`] scores estimates
//! against ground truth.

pub mod config;
pub mod doamap;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod harmonics;
pub mod pipeline;
pub mod shdomain;
pub mod signal;
pub mod simulator;
pub mod special;
pub mod sspiv;
pub mod stft;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, Direction};
pub use pipeline::{Pipeline, PipelineOutput};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/stft.md")]
    mod stft {}
    #[doc = include_str!("../../../book/src/sh-domain.md")]
    mod sh_domain {}
    #[doc = include_str!("../../../book/src/sspiv.md")]
    mod sspiv {}
    #[doc = include_str!("../../../book/src/histogram.md")]
    mod histogram {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
