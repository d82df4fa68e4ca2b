//! Sparse linear inverse problems solved by approximate message passing,
//! and underdetermined audio source separation built on top of them.
//!
//! The solvers ([`Amp`], [`Vamp`]) work on any [`LinearOperator`] and a
//! separable [`Denoiser`]. The separation pipeline stacks STFT frames of an
//! instantaneous mixture into one block problem per frame and solves it with
//! a Bernoulli-Gaussian prior.
//!
//! ```
//! use ampsep::{amp_run, AmpConfig, BgPrior, BlockOperator, MixingModel};
//!
//! let model = MixingModel::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1e8).unwrap();
//! let op = BlockOperator::new(model, 1).unwrap();
//! let y = [0.5, -2.0];
//! let cfg = AmpConfig { gamma_w: 1e8, ..AmpConfig::default() };
//! let out = amp_run(&op, &y, BgPrior::gaussian(0.0, 10.0).unwrap(), &cfg).unwrap();
//! assert!((out.xhat[1] + 2.0).abs() < 1e-3);
//! ```

// negated float comparisons in this crate deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod cli;
pub mod config;
pub mod denoise;
pub mod error;
pub mod harness;
pub mod operator;
pub mod pipeline;
pub mod solve;
pub mod stft;
pub mod vamp;
pub mod wav;

pub use amp::{amp_run, Amp, AmpConfig, AmpInit, AmpState, GammaUpdate};
pub use denoise::{
    em_update_noise_precision, init_noise_precision, BgPrior, Denoiser, DenoiserOutput, PriorLearning,
};
pub use error::{Error, Result};
pub use operator::{BlockOperator, LinearOperator, MixingModel, SvdFactors};
pub use pipeline::{
    separate, separate_with, FrameDiagnostics, FrameSolver, MessagePassingSolver, SeparationConfig,
    SeparationResult, SolverSettings,
};
pub use solve::{Algorithm, Diagnostics, IterationRecord, SolveOutput};
pub use stft::{analyze, synthesize, PackedSpectrogram, StftConfig};
pub use vamp::{vamp_precompute, vamp_run, GammaTildeForm, Vamp, VampConfig, VampPrecomputed, VampState, YTildeForm};
