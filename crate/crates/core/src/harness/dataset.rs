//! Optional sweeps over user-supplied recordings.
//!
//! Expected layout, one directory per mixture:
//!
//! ```text
//! <root>/<name>/mix.wav     M-channel mixture
//! <root>/<name>/A.csv       M x N mixing matrix
//! <root>/<name>/src_1.wav   mono reference sources, src_1 .. src_N
//! ```
//!
//! Nothing is downloaded.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::metrics::compute_metrics;
use crate::harness::sweep::{Samples, SweepGrid, SweepTable};
use crate::operator::MixingModel;
use crate::pipeline::{separate, SeparationConfig};
use crate::stft::interior_range;
use crate::wav::read_wav;

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub name: String,
    pub mixture: Vec<Vec<f64>>,
    pub model: MixingModel,
    pub sources: Vec<Vec<f64>>,
}

pub fn load_item(dir: &Path) -> Result<DatasetItem> {
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mix = read_wav(dir.join("mix.wav"))?;
    let model = MixingModel::read_csv(dir.join("A.csv"), 1.0)?;
    if model.channels() != mix.channels.len() {
        return Err(Error::invalid(format!(
            "{name}: matrix has {} rows but mixture has {} channels",
            model.channels(),
            mix.channels.len()
        )));
    }
    let mut sources = Vec::with_capacity(model.sources());
    for j in 1..=model.sources() {
        let src = read_wav(dir.join(format!("src_{j}.wav")))?;
        let mono = src
            .channels
            .into_iter()
            .next()
            .ok_or_else(|| Error::UnsupportedWav(format!("{name}: src_{j}.wav has no channels")))?;
        if mono.len() != mix.len() {
            return Err(Error::invalid(format!(
                "{name}: src_{j}.wav has {} samples, mixture has {}",
                mono.len(),
                mix.len()
            )));
        }
        sources.push(mono);
    }
    Ok(DatasetItem {
        name,
        mixture: mix.channels,
        model,
        sources,
    })
}

/// Loads every subdirectory of `root` that contains a `mix.wav`, sorted by name.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<DatasetItem>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("mix.wav").is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_item(d)).collect()
}

/// Time-domain metrics for every grid point over every item.
pub fn sweep_dataset(
    items: &[DatasetItem],
    grid: &SweepGrid,
    base: &SeparationConfig,
) -> Result<SweepTable> {
    let algo = base.solver.algo;
    let mut table = SweepTable::default();
    for (theta, max_iter) in grid.points() {
        let mut cfg = base.clone();
        cfg.solver.set_theta(theta);
        cfg.solver.set_max_iter(max_iter);
        cfg.validate()?;
        let outcomes: Vec<_> = items
            .par_iter()
            .map(|item| {
                let res = separate(&item.mixture, &item.model, &cfg).ok()?;
                if res.all_failed() {
                    return None;
                }
                // edge samples see only partial window overlap, so score the interior
                let len = item.mixture.first().map_or(0, Vec::len);
                let mut span = interior_range(&cfg.stft, len);
                if span.is_empty() {
                    span = 0..len;
                }
                let est: Vec<&[f64]> = res.sources.iter().map(|s| &s[span.clone()]).collect();
                let refs: Vec<&[f64]> = item.sources.iter().map(|s| &s[span.clone()]).collect();
                let report = compute_metrics(&est, &refs).ok()?;
                let est: Vec<f64> = est.concat();
                let truth: Vec<f64> = refs.concat();
                Some((report, crate::harness::metrics::nmse_db(&est, &truth)))
            })
            .collect();
        let mut samples = Samples::default();
        for o in outcomes {
            match o {
                Some((report, nmse)) => samples.push(&report, nmse),
                None => samples.fail(),
            }
        }
        table.rows.extend(samples.rows(algo, theta, max_iter));
    }
    Ok(table)
}
