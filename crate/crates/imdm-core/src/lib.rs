//! Desk-scale discrete diffusion core: masked diffusion (MDM) and its
//! infinite-mask variant (IMDM), with closed-form kernels, a small analytic
//! denoiser, training and distillation loops, few-step samplers, and
//! exact-enumeration analysis tools.
//!
//! The crate is `no_std` + `alloc`; all float math goes through `libm` so
//! results are bit-identical across platforms. Everything is driven by the
//! splittable counter-based [`rng::Rng`], which makes every pipeline
//! reproducible from a `(seed, stream)` pair regardless of worker count.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod analysis;
pub mod categorical;
pub mod denoiser;
pub mod distill;
pub mod error;
pub mod kernels;
pub mod math;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod sequence;
pub mod stats;
pub mod training;
pub mod vocab;

pub use categorical::Categorical;
pub use denoiser::{Denoiser, DenoiserParams, ModelDims, ModelKind, NoiseDistribution, NoiseSpec};
pub use error::{Error, Result};
pub use kernels::{ImdmPosterior, PriorSpec};
pub use rng::Rng;
pub use schedule::{make_grid, Schedule, TimeGrid};
pub use sequence::{LatentSequence, LatentToken, NoiseAssignment, Sequence};
pub use vocab::Vocabulary;
