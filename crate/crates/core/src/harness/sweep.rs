//! Parameter sweeps over the damping factor and the iteration cap.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::harness::metrics::{compute_metrics, nmse_db, MetricReport};
use crate::harness::synth::{generate_all, Instance, SyntheticSpec};
use crate::pipeline::{solve_block, SolverSettings};
use crate::solve::Algorithm;

/// Metric names, in CSV order.
pub const METRICS: [&str; 4] = ["sdr", "sir", "sar", "nmse"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub thetas: Vec<f64>,
    pub max_iters: Vec<usize>,
}

impl SweepGrid {
    /// `θ ∈ {1, 0.95, ..., 0.5}` at a fixed iteration cap.
    pub fn damping(max_iter: usize) -> Self {
        Self {
            thetas: (0..=10).map(|k| 1.0 - 0.05 * k as f64).collect(),
            max_iters: vec![max_iter],
        }
    }

    /// `maxIter ∈ {5, 10, ..., 50}` without damping.
    pub fn iterations() -> Self {
        Self {
            thetas: vec![1.0],
            max_iters: (1..=10).map(|k| 5 * k).collect(),
        }
    }

    pub fn points(&self) -> Vec<(f64, usize)> {
        self.thetas
            .iter()
            .flat_map(|&t| self.max_iters.iter().map(move |&k| (t, k)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub algo: Algorithm,
    pub theta: f64,
    pub max_iter: usize,
    pub metric: &'static str,
    pub mean: f64,
    pub median: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, algo: Algorithm, theta: f64, max_iter: usize, metric: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.algo == algo && (r.theta - theta).abs() < 1e-9 && r.max_iter == max_iter && r.metric == metric
        })
    }

    /// Writes `algo,theta,max_iter,metric,mean,median,failures` with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "algo,theta,max_iter,metric,mean,median,failures")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.algo, r.theta, r.max_iter, r.metric, r.mean, r.median, r.failures
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn extend(&mut self, other: SweepTable) {
        self.rows.extend(other.rows);
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Collected metric samples for one grid point.
#[derive(Debug, Default)]
pub(crate) struct Samples {
    sdr: Vec<f64>,
    sir: Vec<f64>,
    sar: Vec<f64>,
    nmse: Vec<f64>,
    failures: usize,
}

impl Samples {
    pub(crate) fn push(&mut self, report: &MetricReport, nmse: f64) {
        for j in 0..report.degenerate.len() {
            if !report.degenerate[j] {
                self.sdr.push(report.per_source_sdr[j]);
                self.sir.push(report.per_source_sir[j]);
                self.sar.push(report.per_source_sar[j]);
            }
        }
        if nmse.is_finite() {
            self.nmse.push(nmse);
        }
    }

    pub(crate) fn fail(&mut self) {
        self.failures += 1;
    }

    pub(crate) fn rows(&self, algo: Algorithm, theta: f64, max_iter: usize) -> Vec<SweepRow> {
        [&self.sdr, &self.sir, &self.sar, &self.nmse]
            .into_iter()
            .zip(METRICS)
            .map(|(v, metric)| SweepRow {
                algo,
                theta,
                max_iter,
                metric,
                mean: mean(v),
                median: median(v),
                failures: self.failures,
            })
            .collect()
    }
}

/// Solves one synthetic instance and scores it in the packed domain.
pub fn evaluate_instance(
    inst: &Instance,
    t: usize,
    settings: &SolverSettings,
) -> Result<(MetricReport, f64)> {
    let op = inst.operator(t)?;
    let mut s = settings.clone();
    s.set_gamma_w(inst.model.gamma_w());
    let out = solve_block(&op, None, &inst.y, &s)?;
    let estimates: Vec<&[f64]> = out.xhat.chunks_exact(t).collect();
    let report = compute_metrics(&estimates, &inst.sources(t))?;
    Ok((report, nmse_db(&out.xhat, &inst.truth)))
}

/// Runs every grid point over the same `spec.num_instances` instances.
///
/// `base` supplies the prior and everything not swept; its algorithm is
/// replaced by `algo`. Solver failures are counted, never fatal.
pub fn sweep(
    spec: &SyntheticSpec,
    algo: Algorithm,
    grid: &SweepGrid,
    base: &SolverSettings,
) -> Result<SweepTable> {
    let instances = generate_all(spec)?;
    let points = grid.points();
    let settings: Vec<SolverSettings> = points
        .iter()
        .map(|&(theta, max_iter)| {
            let mut s = base.clone();
            s.algo = algo;
            s.set_theta(theta);
            s.set_max_iter(max_iter);
            s
        })
        .collect();
    for s in &settings {
        s.validate()?;
    }

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..instances.len()).map(move |i| (p, i)))
        .collect();
    let results: Vec<Option<(MetricReport, f64)>> = jobs
        .par_iter()
        .map(|&(p, i)| evaluate_instance(&instances[i], spec.t, &settings[p]).ok())
        .collect();

    let mut table = SweepTable::default();
    for (p, &(theta, max_iter)) in points.iter().enumerate() {
        let mut samples = Samples::default();
        for r in &results[p * instances.len()..(p + 1) * instances.len()] {
            match r {
                Some((report, nmse)) => samples.push(report, *nmse),
                None => samples.fail(),
            }
        }
        table.rows.extend(samples.rows(algo, theta, max_iter));
    }
    Ok(table)
}
