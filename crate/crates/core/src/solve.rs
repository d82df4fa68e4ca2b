//! Pieces shared by the AMP and VAMP iterations.

use serde::Serialize;

use crate::error::Error;

/// Which message-passing solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Amp,
    Vamp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Amp => "amp",
            Algorithm::Vamp => "vamp",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "amp" => Ok(Algorithm::Amp),
            "vamp" => Ok(Algorithm::Vamp),
            other => Err(format!("unknown algorithm {other:?} (expected amp or vamp)")),
        }
    }
}

/// Scalars recorded after one iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationRecord {
    /// 1-based iteration count after the step.
    pub iter: usize,
    /// `‖y − A x̂_t‖`.
    pub residual_norm: f64,
    /// Precision handed to the next denoiser call, `γ_{t+1}`.
    pub gamma: f64,
    /// Noise precision in effect after the step.
    pub gamma_w: f64,
    /// `‖x̂_t − x̂_{t−1}‖ / max(‖x̂_t‖, ε)`.
    pub rel_change: f64,
    /// AMP output variance `τ^p_t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_p: Option<f64>,
    /// VAMP mean denoiser derivative `α_t`, after clamping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// VAMP extrinsic precision `γ̃_t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_tilde: Option<f64>,
    /// Set when `α_t` had to be clamped away from 0 or 1.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub alpha_clamped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub records: Vec<IterationRecord>,
    /// True when the relative-change tolerance stopped the run early.
    pub converged: bool,
}

impl Diagnostics {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual_norm)
    }
}

/// Estimate plus the trajectory that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub xhat: Vec<f64>,
    pub diagnostics: Diagnostics,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff = new
        .iter()
        .zip(old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / norm(new).max(f64::MIN_POSITIVE)
}

pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Residual growth beyond this multiple of `‖y‖` counts as divergence.
pub(crate) const DIVERGENCE_GROWTH: f64 = 1e6;

pub(crate) fn diverged(iter: usize, reason: impl Into<String>) -> Error {
    Error::Diverged {
        iter,
        reason: reason.into(),
        diagnostics: Box::default(),
    }
}

pub(crate) fn degenerate(iter: usize, reason: impl Into<String>) -> Error {
    Error::Degenerate {
        iter,
        reason: reason.into(),
        diagnostics: Box::default(),
    }
}

/// Replaces the (empty) diagnostics of a step failure with the run so far.
pub(crate) fn attach(err: Error, diag: &Diagnostics) -> Error {
    match err {
        Error::Diverged { iter, reason, .. } => Error::Diverged {
            iter,
            reason,
            diagnostics: Box::new(diag.clone()),
        },
        Error::Degenerate { iter, reason, .. } => Error::Degenerate {
            iter,
            reason,
            diagnostics: Box::new(diag.clone()),
        },
        other => other,
    }
}

/// Loop shared by both solvers: step until `max_iter` or the change drops under `tol`.
pub(crate) fn drive<F>(max_iter: usize, tol: f64, mut step: F) -> crate::Result<Diagnostics>
where
    F: FnMut() -> crate::Result<IterationRecord>,
{
    let mut diag = Diagnostics::default();
    for _ in 0..max_iter {
        let rec = step().map_err(|e| attach(e, &diag))?;
        let done = rec.rel_change < tol;
        diag.records.push(rec);
        if done {
            diag.converged = true;
            break;
        }
    }
    Ok(diag)
}
