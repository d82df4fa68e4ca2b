//! Seeded synthetic block problems.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::denoise::BgPrior;
use crate::error::{Error, Result};
use crate::operator::{BlockOperator, LinearOperator, MixingModel};

/// Largest noise precision handed to solvers for noiseless instances.
pub const NOISELESS_PRECISION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Entries i.i.d. `N(0, 1/M)`.
    IidGaussian,
    /// Unit-norm columns; for two channels, gains `(cos φ, sin φ)` at distinct angles.
    UnitColumnMixing,
}

impl std::str::FromStr for MatrixKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "iid_gaussian" | "iid" => Ok(Self::IidGaussian),
            "unit_column_mixing" | "unit_column" => Ok(Self::UnitColumnMixing),
            other => Err(format!(
                "unknown matrix kind {other:?} (expected iid_gaussian or unit_column_mixing)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    /// Block size `T`.
    pub t: usize,
    pub prior: BgPrior,
    /// `f64::INFINITY` means noiseless.
    pub snr_db: f64,
    pub num_instances: usize,
    pub seed: u64,
    pub matrix_kind: MatrixKind,
}

impl SyntheticSpec {
    /// Three sources in two channels, one STFT frame per block.
    pub fn stereo_speech_like(seed: u64) -> Self {
        Self {
            m: 2,
            n: 3,
            t: 720,
            prior: BgPrior::default(),
            snr_db: 40.0,
            num_instances: 8,
            seed,
            matrix_kind: MatrixKind::UnitColumnMixing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.t == 0 {
            return Err(Error::invalid("synthetic dimensions must be positive"));
        }
        if self.num_instances == 0 {
            return Err(Error::invalid("num_instances must be at least 1"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::invalid("snr_db is NaN"));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.m * self.t
    }

    pub fn cols(&self) -> usize {
        self.n * self.t
    }

    /// Noise variance matching `snr_db` for the prior's signal power. With
    /// `ρ = 0` the level is set as if `ρ = 1`.
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db == f64::INFINITY {
            return 0.0;
        }
        let p = self.prior;
        let rho = if p.rho() > 0.0 { p.rho() } else { 1.0 };
        let power = (self.n as f64 / self.m as f64) * rho * (p.mu() * p.mu() + p.sigma2());
        power / 10f64.powf(self.snr_db / 10.0)
    }
}

/// Ground truth, observation and model of one synthetic problem.
#[derive(Debug, Clone)]
pub struct Instance {
    /// `N T` ground-truth coefficients, source-major.
    pub truth: Vec<f64>,
    /// `M T` noisy observation, channel-major.
    pub y: Vec<f64>,
    pub noise: Vec<f64>,
    /// Mixing matrix with the true noise precision.
    pub model: MixingModel,
}

impl Instance {
    pub fn operator(&self, t: usize) -> Result<BlockOperator> {
        BlockOperator::new(self.model.clone(), t)
    }

    /// Ground truth split into per-source slices of length `t`.
    pub fn sources(&self, t: usize) -> Vec<&[f64]> {
        self.truth.chunks_exact(t).collect()
    }
}

pub fn draw_matrix<R: Rng + ?Sized>(kind: MatrixKind, m: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    match kind {
        MatrixKind::IidGaussian => {
            let dist = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("positive std");
            DMatrix::from_fn(m, n, |_, _| dist.sample(rng))
        }
        MatrixKind::UnitColumnMixing if m == 2 => {
            let width = std::f64::consts::FRAC_PI_2 / n as f64;
            let mut a = DMatrix::zeros(2, n);
            for j in 0..n {
                let jitter = (rng.random::<f64>() - 0.5) * 0.5 * width;
                let phi = (j as f64 + 0.5) * width + jitter;
                a[(0, j)] = phi.cos();
                a[(1, j)] = phi.sin();
            }
            a
        }
        MatrixKind::UnitColumnMixing => {
            let mut a = DMatrix::from_fn(m, n, |_, _| {
                let v: f64 = StandardNormal.sample(rng);
                v.abs()
            });
            for mut col in a.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
            a
        }
    }
}

/// Draws `count` i.i.d. Bernoulli-Gaussian coefficients.
pub fn draw_bg<R: Rng + ?Sized>(prior: &BgPrior, count: usize, rng: &mut R) -> Vec<f64> {
    let slab = Normal::new(prior.mu(), prior.sigma2().sqrt()).expect("positive variance");
    (0..count)
        .map(|_| {
            if rng.random::<f64>() < prior.rho() {
                slab.sample(rng)
            } else {
                0.0
            }
        })
        .collect()
}

/// Instance `index` of the family described by `spec`; reproducible per `(seed, index)`.
pub fn generate_instance(spec: &SyntheticSpec, index: usize) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let a = draw_matrix(spec.matrix_kind, spec.m, spec.n, &mut rng);
    let truth = draw_bg(&spec.prior, spec.cols(), &mut rng);

    let var = spec.noise_variance();
    let gamma_w = if var > 0.0 {
        (1.0 / var).min(NOISELESS_PRECISION)
    } else {
        NOISELESS_PRECISION
    };
    let model = MixingModel::new(a, gamma_w)?;
    let op = BlockOperator::new(model.clone(), spec.t)?;

    let mut y = vec![0.0; spec.rows()];
    op.forward_into(&truth, &mut y);
    let noise: Vec<f64> = if var > 0.0 {
        let dist = Normal::new(0.0, var.sqrt()).expect("positive std");
        (0..spec.rows()).map(|_| dist.sample(&mut rng)).collect()
    } else {
        vec![0.0; spec.rows()]
    };
    for (yi, wi) in y.iter_mut().zip(&noise) {
        *yi += wi;
    }
    Ok(Instance {
        truth,
        y,
        noise,
        model,
    })
}

/// All `spec.num_instances` instances.
pub fn generate_all(spec: &SyntheticSpec) -> Result<Vec<Instance>> {
    (0..spec.num_instances).map(|i| generate_instance(spec, i)).collect()
}
