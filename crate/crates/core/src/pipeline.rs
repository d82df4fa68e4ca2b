//! Frame-by-frame source separation in the packed STFT domain.
//!
//! Every mixture channel is analyzed with the same STFT. For frame `n` the
//! `M` channels' coefficients are stacked channel-major into one observation
//! of length `M T`, solved against `A ⊗ I_T`, and the `N T` estimate is split
//! back into `N` source frames. Frames are independent solves.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::amp::{Amp, AmpConfig};
use crate::denoise::{init_noise_precision, BgPrior};
use crate::error::{Error, Result};
use crate::operator::{BlockOperator, MixingModel, SvdFactors};
use crate::solve::{Algorithm, SolveOutput};
use crate::stft::{analyze, synthesize, PackedSpectrogram, StftConfig};
use crate::vamp::{Vamp, VampConfig, VampPrecomputed};

/// Algorithm choice plus the prior and both solver configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub algo: Algorithm,
    pub prior: BgPrior,
    pub amp: AmpConfig,
    pub vamp: VampConfig,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            algo: Algorithm::Amp,
            prior: BgPrior::default(),
            amp: AmpConfig::default(),
            vamp: VampConfig::default(),
        }
    }
}

impl SolverSettings {
    pub fn theta(&self) -> f64 {
        match self.algo {
            Algorithm::Amp => self.amp.theta,
            Algorithm::Vamp => self.vamp.theta,
        }
    }

    pub fn max_iter(&self) -> usize {
        match self.algo {
            Algorithm::Amp => self.amp.max_iter,
            Algorithm::Vamp => self.vamp.max_iter,
        }
    }

    /// Sets the damping factor of the selected algorithm.
    pub fn set_theta(&mut self, theta: f64) {
        match self.algo {
            Algorithm::Amp => self.amp.theta = theta,
            Algorithm::Vamp => self.vamp.theta = theta,
        }
    }

    pub fn set_max_iter(&mut self, max_iter: usize) {
        match self.algo {
            Algorithm::Amp => self.amp.max_iter = max_iter,
            Algorithm::Vamp => self.vamp.max_iter = max_iter,
        }
    }

    pub fn set_tol(&mut self, tol: f64) {
        self.amp.tol = tol;
        self.vamp.tol = tol;
    }

    pub fn set_gamma_w(&mut self, gamma_w: f64) {
        self.amp.gamma_w = gamma_w;
        self.vamp.gamma_w = gamma_w;
    }

    pub fn set_em_noise(&mut self, on: bool) {
        self.amp.em_noise = on;
        self.vamp.em_noise = on;
    }

    pub fn validate(&self) -> Result<()> {
        match self.algo {
            Algorithm::Amp => self.amp.validate(),
            Algorithm::Vamp => self.vamp.validate(),
        }
    }
}

/// Solves one block problem `y = (A ⊗ I_T) x + w` with the configured algorithm.
///
/// `svd` is only consulted for VAMP; pass the operator's structured SVD to
/// avoid recomputing it per call.
pub fn solve_block(
    op: &BlockOperator,
    svd: Option<&Arc<SvdFactors>>,
    y: &[f64],
    settings: &SolverSettings,
) -> Result<SolveOutput> {
    match settings.algo {
        Algorithm::Amp => Amp::new(op, y, settings.prior, settings.amp.clone())?.run(),
        Algorithm::Vamp => {
            let svd = match svd {
                Some(s) => Arc::clone(s),
                None => Arc::new(op.economy_svd()),
            };
            let pre = VampPrecomputed::new(svd, y, settings.vamp.y_tilde_form)?;
            Vamp::new(&pre, settings.prior, settings.vamp.clone())?.run()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub solver: SolverSettings,
    pub stft: StftConfig,
    /// Block size `T`; `None` means one STFT frame (`trunc_len`).
    pub block_size: Option<usize>,
    /// Target SNR used to set `γω`. `None` keeps the mixing model's own value.
    pub snr_db: Option<f64>,
    /// Worker threads for frame solves; 0 uses the global pool.
    pub parallel_frames: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        let mut solver = SolverSettings::default();
        solver.set_em_noise(true);
        Self {
            solver,
            stft: StftConfig::default(),
            block_size: None,
            snr_db: Some(40.0),
            parallel_frames: 0,
        }
    }
}

impl SeparationConfig {
    pub fn block_size(&self) -> usize {
        self.block_size.unwrap_or(self.stft.trunc_len)
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.solver.validate()?;
        let t = self.block_size();
        if t == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        if t != self.stft.trunc_len {
            return Err(Error::invalid(format!(
                "block size {t} must equal the per-frame coefficient count {} (one solve per frame)",
                self.stft.trunc_len
            )));
        }
        Ok(())
    }

    /// Noise precision for an `M x N` model at this configuration.
    pub fn noise_precision(&self, model: &MixingModel) -> Result<f64> {
        match self.snr_db {
            Some(snr) => {
                let t = self.block_size();
                init_noise_precision(
                    &self.solver.prior,
                    model.channels() * t,
                    model.sources() * t,
                    snr,
                )
            }
            None => Ok(model.gamma_w()),
        }
    }
}

/// Produces a packed estimate of all sources for one frame.
pub trait FrameSolver: Sync {
    /// `y` holds `M` channel frames stacked channel-major; the result must
    /// hold `N` source frames stacked the same way.
    fn solve_frame(&self, frame: usize, y: &[f64]) -> Result<SolveOutput>;
}

/// [`FrameSolver`] backed by AMP or VAMP on a shared block operator.
pub struct MessagePassingSolver {
    op: BlockOperator,
    svd: Option<Arc<SvdFactors>>,
    settings: SolverSettings,
}

impl MessagePassingSolver {
    pub fn new(op: BlockOperator, mut settings: SolverSettings) -> Result<Self> {
        settings.set_gamma_w(op.gamma_w());
        settings.validate()?;
        let svd = match settings.algo {
            Algorithm::Vamp => {
                let svd = op.economy_svd();
                if svd.rank() == 0 {
                    return Err(Error::RankZero);
                }
                Some(Arc::new(svd))
            }
            Algorithm::Amp => None,
        };
        Ok(Self { op, svd, settings })
    }

    pub fn operator(&self) -> &BlockOperator {
        &self.op
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }
}

impl FrameSolver for MessagePassingSolver {
    fn solve_frame(&self, _frame: usize, y: &[f64]) -> Result<SolveOutput> {
        solve_block(&self.op, self.svd.as_ref(), y, &self.settings)
    }
}

/// Per-frame outcome, one JSON-lines record each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameDiagnostics {
    pub frame: usize,
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub converged: bool,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SeparationResult {
    /// Time-domain source estimates, each as long as the mixture.
    pub sources: Vec<Vec<f64>>,
    pub frames: Vec<FrameDiagnostics>,
    /// Wall-clock seconds spent in analysis, solves and synthesis.
    pub timing: f64,
}

impl SeparationResult {
    pub fn failed_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.failed).count()
    }

    pub fn all_failed(&self) -> bool {
        !self.frames.is_empty() && self.failed_frames() == self.frames.len()
    }

    pub fn write_diagnostics<W: Write>(&self, mut w: W) -> Result<()> {
        for f in &self.frames {
            serde_json::to_writer(&mut w, f).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_diagnostics_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_diagnostics(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn check_mixtures(mixtures: &[Vec<f64>]) -> Result<usize> {
    let len = mixtures
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("no mixture channels"))?;
    for ch in mixtures {
        if ch.len() != len {
            return Err(Error::DimensionMismatch {
                what: "mixture channel",
                expected: len,
                actual: ch.len(),
            });
        }
    }
    Ok(len)
}

/// Separates `model.sources()` sources from `model.channels()` mixtures.
pub fn separate(
    mixtures: &[Vec<f64>],
    model: &MixingModel,
    cfg: &SeparationConfig,
) -> Result<SeparationResult> {
    cfg.validate()?;
    if model.channels() != mixtures.len() {
        return Err(Error::DimensionMismatch {
            what: "mixture channel count",
            expected: model.channels(),
            actual: mixtures.len(),
        });
    }
    let gamma_w = cfg.noise_precision(model)?;
    let op = BlockOperator::new(model.clone().with_gamma_w(gamma_w)?, cfg.block_size())?;
    let solver = MessagePassingSolver::new(op, cfg.solver.clone())?;
    separate_with(mixtures, model.sources(), &cfg.stft, &solver, cfg.parallel_frames)
}

/// Runs the analysis / per-frame solve / synthesis loop with any frame solver.
pub fn separate_with<S: FrameSolver>(
    mixtures: &[Vec<f64>],
    num_sources: usize,
    stft: &StftConfig,
    solver: &S,
    parallel_frames: usize,
) -> Result<SeparationResult> {
    let started = Instant::now();
    let len = check_mixtures(mixtures)?;
    if num_sources == 0 {
        return Err(Error::invalid("at least one source is required"));
    }
    let specs = mixtures
        .iter()
        .map(|ch| analyze(ch, stft))
        .collect::<Result<Vec<_>>>()?;
    let num_frames = specs[0].num_frames();
    let width = specs[0].width();

    let solve_one = |n: usize| -> (Vec<f64>, FrameDiagnostics) {
        let y: Vec<f64> = specs.iter().flat_map(|s| s.frame(n).iter().copied()).collect();
        match solver.solve_frame(n, &y) {
            Ok(out) if out.xhat.len() == num_sources * width => {
                let d = &out.diagnostics;
                let diag = FrameDiagnostics {
                    frame: n,
                    iterations: d.iterations(),
                    final_residual: d.final_residual(),
                    converged: d.converged,
                    failed: false,
                    error: None,
                };
                (out.xhat, diag)
            }
            Ok(out) => {
                let diag = FrameDiagnostics {
                    frame: n,
                    iterations: out.diagnostics.iterations(),
                    final_residual: out.diagnostics.final_residual(),
                    converged: false,
                    failed: true,
                    error: Some(format!(
                        "solver returned {} values, expected {}",
                        out.xhat.len(),
                        num_sources * width
                    )),
                };
                (vec![0.0; num_sources * width], diag)
            }
            Err(e) => {
                let partial = e.diagnostics();
                let diag = FrameDiagnostics {
                    frame: n,
                    iterations: partial.map_or(0, |d| d.iterations()),
                    final_residual: partial.and_then(|d| d.final_residual()),
                    converged: false,
                    failed: true,
                    error: Some(e.to_string()),
                };
                (vec![0.0; num_sources * width], diag)
            }
        }
    };

    let solved: Vec<(Vec<f64>, FrameDiagnostics)> = if parallel_frames == 1 {
        (0..num_frames).map(solve_one).collect()
    } else if parallel_frames == 0 {
        (0..num_frames).into_par_iter().map(solve_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel_frames)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..num_frames).into_par_iter().map(solve_one).collect())
    };

    let mut source_specs: Vec<PackedSpectrogram> = (0..num_sources)
        .map(|_| PackedSpectrogram::zeros(*stft, len))
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(num_frames);
    for (n, (xhat, diag)) in solved.into_iter().enumerate() {
        for (j, spec) in source_specs.iter_mut().enumerate() {
            spec.frame_mut(n).copy_from_slice(&xhat[j * width..(j + 1) * width]);
        }
        frames.push(diag);
    }

    let sources = source_specs.iter().map(synthesize).collect();
    Ok(SeparationResult {
        sources,
        frames,
        timing: started.elapsed().as_secs_f64(),
    })
}
