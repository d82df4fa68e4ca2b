//! AMP with damping.
//!
//! One iteration, with `θ ∈ (0, 1]` the damping factor:
//!
//! ```text
//! x̂_t     = θ g1(r_t, γ_t) + (1 − θ) x̂_{t−1}
//! τp_t    = (N/M) γ_t⁻¹ ⟨g1′(r_t, γ_t)⟩
//! s_t     = θ (γω⁻¹ + τp_t)⁻¹ (y − A x̂_t + τp_t s_{t−1}) + (1 − θ) s_{t−1}
//! γ_{t+1} = θ (γω⁻¹ + τp_t)⁻¹ + (1 − θ) γ_t⁻¹
//! r_{t+1} = x̂_t + γ_{t+1}⁻¹ Aᵀ s_t
//! ```
//!
//! The `γ` update mixes a precision with a variance. [`GammaUpdate`] selects
//! between that literal form and a variant that damps precisions on both sides.

use crate::denoise::{noise_precision_from_residual, Denoiser, PriorLearning};
use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::solve::{
    all_finite, diverged, drive, norm, relative_change, IterationRecord, SolveOutput,
    DIVERGENCE_GROWTH,
};

/// Form of the damped `γ_{t+1}` update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GammaUpdate {
    /// `θ (γω⁻¹ + τp)⁻¹ + (1 − θ) γ_t⁻¹`
    #[default]
    Printed,
    /// `θ (γω⁻¹ + τp)⁻¹ + (1 − θ) γ_t`
    PrecisionConsistent,
}

impl std::str::FromStr for GammaUpdate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "printed" => Ok(Self::Printed),
            "precision_consistent" | "precision-consistent" => Ok(Self::PrecisionConsistent),
            other => Err(format!(
                "unknown gamma update {other:?} (expected printed or precision_consistent)"
            )),
        }
    }
}

/// Starting pseudo-data `r₀`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AmpInit {
    /// `r₀ = (N̂ / ‖A‖²_F) Aᵀ y`
    #[default]
    MatchedFilter,
    /// `r₀ = 0`
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig {
    pub theta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub gamma_w: f64,
    /// Re-estimate `γω` by EM once per iteration.
    pub em_noise: bool,
    pub learn_prior: PriorLearning,
    pub gamma_update: GammaUpdate,
    pub init: AmpInit,
    /// Overrides the denoiser's default `γ₀`.
    pub gamma0: Option<f64>,
}

impl Default for AmpConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            max_iter: 30,
            tol: 1e-6,
            gamma_w: 1.0,
            em_noise: false,
            learn_prior: PriorLearning::default(),
            gamma_update: GammaUpdate::Printed,
            init: AmpInit::MatchedFilter,
            gamma0: None,
        }
    }
}

impl AmpConfig {
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

/// Iterate of the AMP recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub xhat: Vec<f64>,
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    pub gamma: f64,
    pub tau_p: f64,
    pub gamma_w: f64,
    pub iter: usize,
}

/// AMP solver bound to one operator and observation.
pub struct Amp<'a, O: LinearOperator + ?Sized, D: Denoiser> {
    op: &'a O,
    y: &'a [f64],
    denoiser: D,
    cfg: AmpConfig,
    y_norm: f64,
}

impl<'a, O: LinearOperator + ?Sized, D: Denoiser> Amp<'a, O, D> {
    pub fn new(op: &'a O, y: &'a [f64], denoiser: D, cfg: AmpConfig) -> Result<Self> {
        cfg.validate()?;
        check_len("observation", op.rows(), y.len())?;
        Ok(Self {
            op,
            y,
            denoiser,
            cfg,
            y_norm: norm(y),
        })
    }

    pub fn config(&self) -> &AmpConfig {
        &self.cfg
    }

    pub fn denoiser(&self) -> &D {
        &self.denoiser
    }

    pub fn init(&self) -> AmpState {
        let n = self.op.cols();
        let r = match self.cfg.init {
            AmpInit::Zero => vec![0.0; n],
            AmpInit::MatchedFilter => {
                let mut r = vec![0.0; n];
                self.op.adjoint_into(self.y, &mut r);
                let fro = self.op.frobenius_norm_sq();
                let scale = if fro > 0.0 { n as f64 / fro } else { 0.0 };
                r.iter_mut().for_each(|v| *v *= scale);
                r
            }
        };
        AmpState {
            xhat: vec![0.0; n],
            s: vec![0.0; self.op.rows()],
            r,
            gamma: self.cfg.gamma0.unwrap_or_else(|| self.denoiser.initial_precision()),
            tau_p: 0.0,
            gamma_w: self.cfg.gamma_w,
            iter: 0,
        }
    }

    /// One damped iteration. `state` is left untouched on error.
    pub fn step(&mut self, state: &mut AmpState) -> Result<IterationRecord> {
        let theta = self.cfg.theta;
        let t = state.iter + 1;
        let (m, n) = (self.op.rows(), self.op.cols());

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

        let tau_p = (n as f64 / m as f64) / state.gamma * g.mean_derivative();

        let mut z = vec![0.0; m];
        self.op.forward_into(&xhat, &mut z);
        let prec = 1.0 / (1.0 / state.gamma_w + tau_p);
        let mut residual_sq = 0.0;
        let s: Vec<f64> = self
            .y
            .iter()
            .zip(&z)
            .zip(&state.s)
            .map(|((yi, zi), si)| {
                let res = yi - zi;
                residual_sq += res * res;
                theta * prec * (res + tau_p * si) + (1.0 - theta) * si
            })
            .collect();

        let gamma_w = if self.cfg.em_noise {
            noise_precision_from_residual(residual_sq, m, tau_p)
        } else {
            state.gamma_w
        };

        let fresh = 1.0 / (1.0 / gamma_w + tau_p);
        let gamma = match self.cfg.gamma_update {
            GammaUpdate::Printed => theta * fresh + (1.0 - theta) / state.gamma,
            GammaUpdate::PrecisionConsistent => theta * fresh + (1.0 - theta) * state.gamma,
        };
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(diverged(t, format!("precision update produced {gamma}")));
        }

        let mut r = vec![0.0; n];
        self.op.adjoint_into(&s, &mut r);
        for (ri, xi) in r.iter_mut().zip(&xhat) {
            *ri = xi + *ri / gamma;
        }

        if !all_finite(&xhat) || !all_finite(&s) || !all_finite(&r) || !tau_p.is_finite() {
            return Err(diverged(t, "non-finite state"));
        }
        let residual_norm = residual_sq.sqrt();
        if self.y_norm > 0.0 && residual_norm > DIVERGENCE_GROWTH * self.y_norm {
            return Err(diverged(
                t,
                format!("residual {residual_norm:.3e} grew past {DIVERGENCE_GROWTH:e} x |y|"),
            ));
        }

        let rel_change = relative_change(&xhat, &state.xhat);
        *state = AmpState {
            xhat,
            s,
            r,
            gamma,
            tau_p,
            gamma_w,
            iter: t,
        };
        Ok(IterationRecord {
            iter: t,
            residual_norm,
            gamma,
            gamma_w,
            rel_change,
            tau_p: Some(tau_p),
            ..Default::default()
        })
    }

    /// Iterates from [`init`](Self::init) until `max_iter` or the tolerance is met.
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

/// Convenience wrapper around [`Amp::run`].
pub fn amp_run<O, D>(op: &O, y: &[f64], denoiser: D, cfg: &AmpConfig) -> Result<SolveOutput>
where
    O: LinearOperator + ?Sized,
    D: Denoiser,
{
    Amp::new(op, y, denoiser, cfg.clone())?.run()
}
