//! Energy-ratio separation metrics (SDR, SIR, SAR) and NMSE.
//!
//! Each estimate `ŝ_j` is decomposed by orthogonal projection as
//! `ŝ_j = s_target + e_interf + e_artif`, where `s_target` is the projection
//! on its own reference, `s_target + e_interf` the projection on the span of
//! all references, and `e_artif` the remainder. Projections use whole
//! signals, not short windows.

use serde::Serialize;

use crate::error::{Error, Result};

/// Magnitude cap for all decibel values.
pub const METRIC_CAP_DB: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub per_source_sdr: Vec<f64>,
    pub per_source_sir: Vec<f64>,
    pub per_source_sar: Vec<f64>,
    pub nmse_db: f64,
    /// Sources whose reference is all zeros; their metrics are NaN.
    pub degenerate: Vec<bool>,
}

impl MetricReport {
    fn mean_of(v: &[f64], degenerate: &[bool]) -> f64 {
        let (sum, n) = v
            .iter()
            .zip(degenerate)
            .filter(|(_, &d)| !d)
            .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    pub fn mean_sdr(&self) -> f64 {
        Self::mean_of(&self.per_source_sdr, &self.degenerate)
    }

    pub fn mean_sir(&self) -> f64 {
        Self::mean_of(&self.per_source_sir, &self.degenerate)
    }

    pub fn mean_sar(&self) -> f64 {
        Self::mean_of(&self.per_source_sar, &self.degenerate)
    }
}

/// `10 log10(num / den)` clamped to `±METRIC_CAP_DB`.
pub fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        return -METRIC_CAP_DB;
    }
    if den <= 0.0 {
        return METRIC_CAP_DB;
    }
    (10.0 * (num / den).log10()).clamp(-METRIC_CAP_DB, METRIC_CAP_DB)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the references' span by modified Gram-Schmidt.
fn orthonormal_basis(refs: &[&[f64]]) -> Vec<Vec<f64>> {
    let scale = refs
        .iter()
        .map(|r| dot(r, r).sqrt())
        .fold(0.0f64, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(refs.len());
    for r in refs {
        let mut v = r.to_vec();
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm > 1e-12 * scale && nrm > 0.0 {
            v.iter_mut().for_each(|x| *x /= nrm);
            basis.push(v);
        }
    }
    basis
}

pub fn compute_metrics<E, R>(estimates: &[E], references: &[R]) -> Result<MetricReport>
where
    E: AsRef<[f64]>,
    R: AsRef<[f64]>,
{
    if estimates.len() != references.len() || references.is_empty() {
        return Err(Error::invalid(format!(
            "need one estimate per reference, got {} estimates and {} references",
            estimates.len(),
            references.len()
        )));
    }
    let refs: Vec<&[f64]> = references.iter().map(AsRef::as_ref).collect();
    let ests: Vec<&[f64]> = estimates.iter().map(AsRef::as_ref).collect();
    let len = refs[0].len();
    if refs.iter().chain(&ests).any(|v| v.len() != len) {
        return Err(Error::invalid("estimates and references must share one length"));
    }

    let basis = orthonormal_basis(&refs);
    let n = refs.len();
    let mut report = MetricReport {
        per_source_sdr: vec![f64::NAN; n],
        per_source_sir: vec![f64::NAN; n],
        per_source_sar: vec![f64::NAN; n],
        nmse_db: f64::NAN,
        degenerate: vec![false; n],
    };

    let mut err_sq = 0.0;
    let mut ref_sq_total = 0.0;
    for j in 0..n {
        let (est, reference) = (ests[j], refs[j]);
        let ref_sq = dot(reference, reference);
        ref_sq_total += ref_sq;
        err_sq += est
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        if ref_sq == 0.0 {
            report.degenerate[j] = true;
            continue;
        }

        let c = dot(est, reference) / ref_sq;
        let target: Vec<f64> = reference.iter().map(|r| c * r).collect();
        let mut span = vec![0.0; len];
        for q in &basis {
            let k = dot(q, est);
            span.iter_mut().zip(q).for_each(|(s, qi)| *s += k * qi);
        }

        let mut interf_sq = 0.0;
        let mut artif_sq = 0.0;
        let mut distortion_sq = 0.0;
        for i in 0..len {
            let interf = span[i] - target[i];
            let artif = est[i] - span[i];
            interf_sq += interf * interf;
            artif_sq += artif * artif;
            distortion_sq += (interf + artif) * (interf + artif);
        }
        let target_sq = dot(&target, &target);
        report.per_source_sdr[j] = ratio_db(target_sq, distortion_sq);
        report.per_source_sir[j] = ratio_db(target_sq, interf_sq);
        report.per_source_sar[j] = ratio_db(dot(&span, &span), artif_sq);
    }
    if ref_sq_total > 0.0 {
        report.nmse_db = (10.0 * (err_sq / ref_sq_total).log10()).clamp(-METRIC_CAP_DB, METRIC_CAP_DB);
        if err_sq == 0.0 {
            report.nmse_db = -METRIC_CAP_DB;
        }
    }
    Ok(report)
}

/// `10 log10(‖x̂ − x‖² / ‖x‖²)` over whole vectors.
pub fn nmse_db(estimate: &[f64], truth: &[f64]) -> f64 {
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let reference: f64 = truth.iter().map(|v| v * v).sum();
    if reference == 0.0 {
        return f64::NAN;
    }
    if err == 0.0 {
        return -METRIC_CAP_DB;
    }
    (10.0 * (err / reference).log10()).max(-METRIC_CAP_DB)
}
