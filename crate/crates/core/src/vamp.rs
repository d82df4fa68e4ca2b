//! VAMP with damping, in SVD form.
//!
//! With the economy SVD `A = U Diag(s) Vᵀ` of rank `R` and `ỹ` a per-observation
//! projection of `y`, one iteration is
//!
//! ```text
//! x̂_t     = θ g1(r_t, γ_t) + (1 − θ) x̂_{t−1}
//! α_t     = ⟨g1′(r_t, γ_t)⟩
//! r̃_t     = (x̂_t − α_t r_t) / (1 − α_t)
//! γ̃_t     = γ_t (1 − α_t) / α_t            (or γ_t (1 − α_t) α_t)
//! d_t     = γω s² / (γω s² + γ̃_t)
//! γ_{t+1} = θ γ̃_t R⟨d_t⟩ / (N − R⟨d_t⟩) + (1 − θ) γ_t
//! r_{t+1} = r̃_t + (N/R) V Diag(d_t / ⟨d_t⟩) (ỹ − Vᵀ r̃_t)
//! ```
//!
//! Products with `U` and `V` go through the Kronecker-structured factors, so
//! nothing of size `MT x NT` is formed.

use std::sync::Arc;

use crate::denoise::{noise_precision_from_residual, Denoiser, PriorLearning};
use crate::error::{check_len, Error, Result};
use crate::operator::{BlockOperator, SvdFactors};
use crate::solve::{
    all_finite, degenerate, diverged, drive, mean, relative_change, IterationRecord, SolveOutput,
    DIVERGENCE_GROWTH,
};

/// `α_t` is kept inside `[ALPHA_CLAMP, 1 − ALPHA_CLAMP]`.
pub const ALPHA_CLAMP: f64 = 1e-11;

/// Form of the extrinsic precision `γ̃_t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GammaTildeForm {
    /// `γ_t (1 − α_t) α_t`
    Printed,
    /// `γ_t (1 − α_t) / α_t`. This is the form that reaches the LMMSE fixed point.
    #[default]
    Ratio,
}

impl std::str::FromStr for GammaTildeForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "printed" => Ok(Self::Printed),
            "ratio" => Ok(Self::Ratio),
            other => Err(format!("unknown gamma-tilde form {other:?} (expected printed or ratio)")),
        }
    }
}

/// Projection of the observation into the SVD domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum YTildeForm {
    /// `ỹ = Diag(s) Uᵀ y`
    Printed,
    /// `ỹ = Diag(s)⁻¹ Uᵀ y`, the form consistent with the `r_{t+1}` update.
    #[default]
    Whitened,
}

impl std::str::FromStr for YTildeForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "printed" => Ok(Self::Printed),
            "whitened" => Ok(Self::Whitened),
            other => Err(format!("unknown y-tilde form {other:?} (expected printed or whitened)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VampConfig {
    pub theta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub gamma_w: f64,
    pub em_noise: bool,
    pub learn_prior: PriorLearning,
    pub gamma_tilde_form: GammaTildeForm,
    pub y_tilde_form: YTildeForm,
    pub gamma0: Option<f64>,
}

impl Default for VampConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            max_iter: 10,
            tol: 1e-6,
            gamma_w: 1.0,
            em_noise: false,
            learn_prior: PriorLearning::default(),
            gamma_tilde_form: GammaTildeForm::default(),
            y_tilde_form: YTildeForm::default(),
            gamma0: None,
        }
    }
}

impl VampConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(format!("tol must be nonnegative, got {}", self.tol)));
        }
        if !(self.gamma_w > 0.0) || !self.gamma_w.is_finite() {
            return Err(Error::invalid(format!(
                "gamma_w must be positive and finite, got {}",
                self.gamma_w
            )));
        }
        if let Some(g) = self.gamma0 {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::invalid(format!("gamma0 must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// Per-observation quantities computed once before iterating.
#[derive(Debug, Clone)]
pub struct VampPrecomputed {
    svd: Arc<SvdFactors>,
    /// Expanded singular values.
    s: Vec<f64>,
    /// `Uᵀ y`
    uty: Vec<f64>,
    y_tilde: Vec<f64>,
    /// `‖y‖² − ‖Uᵀy‖²`, the part of `y` outside the range of `A`.
    y_perp_sq: f64,
    y_norm: f64,
}

impl VampPrecomputed {
    pub fn new(svd: Arc<SvdFactors>, y: &[f64], form: YTildeForm) -> Result<Self> {
        if svd.rank() == 0 {
            return Err(Error::RankZero);
        }
        check_len("observation", svd.rows(), y.len())?;
        let s = svd.singular_values();
        let uty = svd.apply_ut(y)?;
        let y_tilde = uty
            .iter()
            .zip(&s)
            .map(|(u, sk)| match form {
                YTildeForm::Printed => sk * u,
                YTildeForm::Whitened => u / sk,
            })
            .collect();
        let y_sq: f64 = y.iter().map(|v| v * v).sum();
        let uty_sq: f64 = uty.iter().map(|v| v * v).sum();
        Ok(Self {
            svd,
            s,
            uty,
            y_tilde,
            y_perp_sq: (y_sq - uty_sq).max(0.0),
            y_norm: y_sq.sqrt(),
        })
    }

    pub fn svd(&self) -> &SvdFactors {
        &self.svd
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde
    }

    /// `N̂`, the length of the estimate.
    pub fn cols(&self) -> usize {
        self.svd.cols()
    }

    /// `M̂`, the length of the observation.
    pub fn rows(&self) -> usize {
        self.svd.rows()
    }

    /// `‖y − A x‖²` evaluated in the SVD domain.
    fn residual_sq(&self, vtx: &[f64]) -> f64 {
        self.y_perp_sq
            + self
                .uty
                .iter()
                .zip(&self.s)
                .zip(vtx)
                .map(|((u, s), v)| {
                    let e = u - s * v;
                    e * e
                })
                .sum::<f64>()
    }
}

/// Structured SVD plus the `ỹ` projection for one observation.
pub fn vamp_precompute(op: &BlockOperator, y: &[f64], form: YTildeForm) -> Result<VampPrecomputed> {
    check_len("observation", op.rows(), y.len())?;
    VampPrecomputed::new(Arc::new(op.economy_svd()), y, form)
}

/// Iterate of the VAMP recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct VampState {
    pub xhat: Vec<f64>,
    pub r: Vec<f64>,
    pub gamma: f64,
    pub alpha: f64,
    pub r_tilde: Vec<f64>,
    pub gamma_tilde: f64,
    pub d: Vec<f64>,
    pub gamma_w: f64,
    pub iter: usize,
}

pub struct Vamp<'a, D: Denoiser> {
    pre: &'a VampPrecomputed,
    denoiser: D,
    cfg: VampConfig,
}

impl<'a, D: Denoiser> Vamp<'a, D> {
    pub fn new(pre: &'a VampPrecomputed, denoiser: D, cfg: VampConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { pre, denoiser, cfg })
    }

    pub fn config(&self) -> &VampConfig {
        &self.cfg
    }

    /// `x̂₀ = 0`, `r₀ = Aᵀ y`, `γ₀` from the prior unless overridden.
    pub fn init(&self) -> VampState {
        let pre = self.pre;
        let scaled: Vec<f64> = pre.uty.iter().zip(&pre.s).map(|(u, s)| u * s).collect();
        let mut r = vec![0.0; pre.cols()];
        pre.svd.v_into(&scaled, &mut r);
        VampState {
            xhat: vec![0.0; pre.cols()],
            r,
            gamma: self.cfg.gamma0.unwrap_or_else(|| self.denoiser.initial_precision()),
            alpha: 0.0,
            r_tilde: vec![0.0; pre.cols()],
            gamma_tilde: 0.0,
            d: vec![0.0; pre.rank()],
            gamma_w: self.cfg.gamma_w,
            iter: 0,
        }
    }

    /// One damped iteration. `state` is left untouched on error.
    pub fn step(&mut self, state: &mut VampState) -> Result<IterationRecord> {
        let pre = self.pre;
        let theta = self.cfg.theta;
        let t = state.iter + 1;
        let n = pre.cols() as f64;
        let rank = pre.rank() as f64;

        if state.iter > 0 {
            self.denoiser.learn(&state.r, state.gamma, self.cfg.learn_prior);
        }
        if !(state.gamma > 0.0) || !state.gamma.is_finite() {
            return Err(diverged(t, format!("precision gamma = {}", state.gamma)));
        }
        let g = self.denoiser.denoise(&state.r, state.gamma)?;

        let xhat: Vec<f64> = g
            .xhat
            .iter()
            .zip(&state.xhat)
            .map(|(gx, prev)| theta * gx + (1.0 - theta) * prev)
            .collect();

        let alpha_raw = g.mean_derivative();
        // near a spike-and-slab threshold the posterior can be wider than
        // the input, so the mean derivative may exceed one; clamp it
        if !alpha_raw.is_finite() {
            return Err(degenerate(t, format!("mean derivative alpha = {alpha_raw}")));
        }
        let alpha = alpha_raw.clamp(ALPHA_CLAMP, 1.0 - ALPHA_CLAMP);
        let alpha_clamped = alpha != alpha_raw;

        let r_tilde: Vec<f64> = xhat
            .iter()
            .zip(&state.r)
            .map(|(x, r)| (x - alpha * r) / (1.0 - alpha))
            .collect();

        let gamma_tilde = match self.cfg.gamma_tilde_form {
            GammaTildeForm::Printed => state.gamma * (1.0 - alpha) * alpha,
            GammaTildeForm::Ratio => state.gamma * (1.0 - alpha) / alpha,
        };

        let gw = state.gamma_w;
        let d: Vec<f64> = pre
            .s
            .iter()
            .map(|s| {
                let s2 = s * s;
                gw * s2 / (gw * s2 + gamma_tilde)
            })
            .collect();
        let d_mean = mean(&d);

        let mut vtx = vec![0.0; pre.rank()];
        pre.svd.vt_into(&xhat, &mut vtx);
        let residual_sq = pre.residual_sq(&vtx);
        let gamma_w = if self.cfg.em_noise {
            let tau_p = (pre.cols() as f64 / pre.rows() as f64) * alpha / state.gamma;
            noise_precision_from_residual(residual_sq, pre.rows(), tau_p)
        } else {
            gw
        };

        let denom = n - rank * d_mean;
        if denom.abs() < 1e-12 * n {
            return Err(degenerate(t, format!("N - R<d> = {denom:e} is numerically zero")));
        }
        let gamma = theta * gamma_tilde * rank * d_mean / denom + (1.0 - theta) * state.gamma;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(diverged(t, format!("precision update produced {gamma}")));
        }

        let mut vtr = vec![0.0; pre.rank()];
        pre.svd.vt_into(&r_tilde, &mut vtr);
        let gain = n / rank;
        let corr: Vec<f64> = d
            .iter()
            .zip(pre.y_tilde.iter().zip(&vtr))
            .map(|(dk, (yk, vk))| gain * (dk / d_mean) * (yk - vk))
            .collect();
        let mut r = vec![0.0; pre.cols()];
        pre.svd.v_into(&corr, &mut r);
        for (ri, rt) in r.iter_mut().zip(&r_tilde) {
            *ri += rt;
        }

        if !all_finite(&xhat) || !all_finite(&r) || !all_finite(&r_tilde) || !all_finite(&d) {
            return Err(diverged(t, "non-finite state"));
        }
        let residual_norm = residual_sq.sqrt();
        if pre.y_norm > 0.0 && residual_norm > DIVERGENCE_GROWTH * pre.y_norm {
            return Err(diverged(
                t,
                format!("residual {residual_norm:.3e} grew past {DIVERGENCE_GROWTH:e} x |y|"),
            ));
        }

        let rel_change = relative_change(&xhat, &state.xhat);
        *state = VampState {
            xhat,
            r,
            gamma,
            alpha,
            r_tilde,
            gamma_tilde,
            d,
            gamma_w,
            iter: t,
        };
        Ok(IterationRecord {
            iter: t,
            residual_norm,
            gamma,
            gamma_w,
            rel_change,
            alpha: Some(alpha),
            gamma_tilde: Some(gamma_tilde),
            alpha_clamped,
            ..Default::default()
        })
    }

    pub fn run(&mut self) -> Result<SolveOutput> {
        let mut state = self.init();
        let (max_iter, tol) = (self.cfg.max_iter, self.cfg.tol);
        let diagnostics = drive(max_iter, tol, || self.step(&mut state))?;
        Ok(SolveOutput {
            xhat: state.xhat,
            diagnostics,
        })
    }
}

/// Convenience wrapper around [`Vamp::run`].
pub fn vamp_run<D: Denoiser>(
    pre: &VampPrecomputed,
    denoiser: D,
    cfg: &VampConfig,
) -> Result<SolveOutput> {
    Vamp::new(pre, denoiser, cfg.clone())?.run()
}
