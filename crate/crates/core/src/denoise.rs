//! Scalar denoisers and noise-precision estimation.
//!
//! The Bernoulli-Gaussian prior `x ~ ρ N(μ, σ²) + (1 − ρ) δ₀` observed as
//! `r = x + n`, `n ~ N(0, 1/γ)`, has a closed-form posterior mean. Everything
//! here is a pure function of its inputs.

use crate::error::{Error, Result};
use crate::operator::LinearOperator;

/// Lower and upper clamp applied to re-estimated noise precisions.
pub const NOISE_PRECISION_BOUNDS: (f64, f64) = (1e-12, 1e12);

/// Posterior means and their derivatives with respect to `r`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenoiserOutput {
    pub xhat: Vec<f64>,
    pub dxdr: Vec<f64>,
}

impl DenoiserOutput {
    /// Arithmetic mean of the derivatives, `⟨g′⟩`.
    pub fn mean_derivative(&self) -> f64 {
        if self.dxdr.is_empty() {
            return 0.0;
        }
        self.dxdr.iter().sum::<f64>() / self.dxdr.len() as f64
    }
}

/// Which prior parameters the solvers re-estimate between iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PriorLearning {
    pub mean: bool,
    pub variance: bool,
}

/// Componentwise estimator `g1(r, γ)` used by the message-passing solvers.
pub trait Denoiser: Clone + Send + Sync {
    fn denoise(&self, r: &[f64], gamma: f64) -> Result<DenoiserOutput>;

    /// Starting precision `γ₀` for the pseudo-data.
    fn initial_precision(&self) -> f64 {
        1.0
    }

    /// One EM refinement of the prior from pseudo-data `r` at precision `gamma`.
    fn learn(&mut self, _r: &[f64], _gamma: f64, _what: PriorLearning) {}
}

/// Posterior of one coefficient under the BG prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgPosterior {
    /// Probability that the coefficient is active.
    pub activity: f64,
    /// Mean given active.
    pub active_mean: f64,
    /// Variance given active.
    pub active_var: f64,
}

/// Bernoulli-Gaussian (spike-and-slab) prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BgPrior {
    rho: f64,
    mu: f64,
    sigma2: f64,
}

impl Default for BgPrior {
    fn default() -> Self {
        Self {
            rho: 0.6,
            mu: 0.0,
            sigma2: 5.0,
        }
    }
}

impl BgPrior {
    pub fn new(rho: f64, mu: f64, sigma2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1], got {rho}")));
        }
        if !mu.is_finite() {
            return Err(Error::invalid(format!("mu must be finite, got {mu}")));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { rho, mu, sigma2 })
    }

    /// Pure Gaussian prior, the `ρ = 1` special case.
    pub fn gaussian(mu: f64, sigma2: f64) -> Result<Self> {
        Self::new(1.0, mu, sigma2)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `ρ (μ² + σ²)`, the second moment of one coefficient.
    pub fn second_moment(&self) -> f64 {
        self.rho * (self.mu * self.mu + self.sigma2)
    }

    /// Log-odds that `r` came from the active component.
    fn log_odds(&self, r: f64, v: f64) -> f64 {
        let slab = self.sigma2 + v;
        let d = r - self.mu;
        (self.rho.ln() - (1.0 - self.rho).ln()) - 0.5 * (slab / v).ln() - d * d / (2.0 * slab)
            + r * r / (2.0 * v)
    }

    pub fn posterior(&self, r: f64, gamma: f64) -> BgPosterior {
        let v = 1.0 / gamma;
        let active_var = 1.0 / (gamma + 1.0 / self.sigma2);
        let active_mean = (gamma * r + self.mu / self.sigma2) * active_var;
        BgPosterior {
            activity: sigmoid(self.log_odds(r, v)),
            active_mean,
            active_var,
        }
    }

    /// Posterior mean and its exact derivative at a single point.
    pub fn denoise_scalar(&self, r: f64, gamma: f64) -> (f64, f64) {
        let v = 1.0 / gamma;
        let active_var = 1.0 / (gamma + 1.0 / self.sigma2);
        let active_mean = (gamma * r + self.mu / self.sigma2) * active_var;
        let l = self.log_odds(r, v);
        let pi = sigmoid(l);
        // π(1 − π), written to stay finite for |L| → ∞
        let e = (-l.abs()).exp();
        let pi_var = e / ((1.0 + e) * (1.0 + e));
        let dl_dr = gamma * r - (r - self.mu) / (self.sigma2 + v);

        let xhat = pi * active_mean;
        let mut dxdr = pi * gamma * active_var;
        if pi_var > 0.0 {
            dxdr += pi_var * dl_dr * active_mean;
        }
        (xhat, dxdr)
    }

    /// Analytic derivative alongside a central finite difference with
    /// step `1e-6 · max(1, |r|)`.
    pub fn derivative_check(&self, r: f64, gamma: f64) -> Result<(f64, f64)> {
        check_gamma(gamma)?;
        let (_, analytic) = self.denoise_scalar(r, gamma);
        let h = 1e-6 * r.abs().max(1.0);
        let (up, _) = self.denoise_scalar(r + h, gamma);
        let (down, _) = self.denoise_scalar(r - h, gamma);
        Ok((analytic, (up - down) / (2.0 * h)))
    }
}

fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "denoiser precision must be positive and finite, got {gamma}"
        )));
    }
    Ok(())
}

impl Denoiser for BgPrior {
    fn denoise(&self, r: &[f64], gamma: f64) -> Result<DenoiserOutput> {
        check_gamma(gamma)?;
        let (xhat, dxdr) = r.iter().map(|&ri| self.denoise_scalar(ri, gamma)).unzip();
        Ok(DenoiserOutput { xhat, dxdr })
    }

    fn initial_precision(&self) -> f64 {
        let m2 = self.second_moment();
        if m2 > 0.0 {
            1.0 / m2
        } else {
            1.0
        }
    }

    /// EM M-step for `μ` and/or `σ²`; `ρ` is never learned.
    fn learn(&mut self, r: &[f64], gamma: f64, what: PriorLearning) {
        if !(what.mean || what.variance) || r.is_empty() || !(gamma > 0.0) {
            return;
        }
        let posts: Vec<BgPosterior> = r.iter().map(|&ri| self.posterior(ri, gamma)).collect();
        let weight: f64 = posts.iter().map(|p| p.activity).sum();
        if !(weight > 1e-12) {
            return;
        }
        if what.mean {
            let mu = posts.iter().map(|p| p.activity * p.active_mean).sum::<f64>() / weight;
            if mu.is_finite() {
                self.mu = mu;
            }
        }
        if what.variance {
            let mu = self.mu;
            let s2 = posts
                .iter()
                .map(|p| {
                    let d = p.active_mean - mu;
                    p.activity * (d * d + p.active_var)
                })
                .sum::<f64>()
                / weight;
            if s2 > 0.0 && s2.is_finite() {
                self.sigma2 = s2;
            }
        }
    }
}

/// Noise precision from a squared residual norm: `M̂ / (‖res‖² + M̂ τ_p)`,
/// clamped to [`NOISE_PRECISION_BOUNDS`].
pub fn noise_precision_from_residual(residual_sq: f64, rows: usize, tau_p: f64) -> f64 {
    let m = rows as f64;
    let raw = m / (residual_sq + m * tau_p);
    let (lo, hi) = NOISE_PRECISION_BOUNDS;
    if raw.is_nan() {
        return hi;
    }
    raw.clamp(lo, hi)
}

/// EM M-step for the noise precision given the current estimate `xhat`.
pub fn em_update_noise_precision<O: LinearOperator + ?Sized>(
    y: &[f64],
    op: &O,
    xhat: &[f64],
    tau_p: f64,
) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::invalid("observation vector is empty"));
    }
    crate::error::check_len("observation", op.rows(), y.len())?;
    crate::error::check_len("estimate", op.cols(), xhat.len())?;
    if !(tau_p >= 0.0) {
        return Err(Error::invalid(format!("tau_p must be nonnegative, got {tau_p}")));
    }
    let mut z = vec![0.0; op.rows()];
    op.forward_into(xhat, &mut z);
    let residual_sq: f64 = y.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(noise_precision_from_residual(residual_sq, y.len(), tau_p))
}

/// Noise precision matching a target SNR:
/// `γ_ω = (M̂/N̂) 10^(snr/10) / (ρ (μ² + σ²))`.
pub fn init_noise_precision(prior: &BgPrior, rows: usize, cols: usize, snr_db: f64) -> Result<f64> {
    if prior.rho() <= 0.0 {
        return Err(Error::invalid("rho must be positive to relate SNR and noise precision"));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("problem dimensions must be positive"));
    }
    let m2 = prior.second_moment();
    Ok((rows as f64 / cols as f64) * 10f64.powf(snr_db / 10.0) / m2)
}
