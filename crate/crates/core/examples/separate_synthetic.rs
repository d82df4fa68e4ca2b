//! Mix three tones into two channels, separate them and score the result.

use ampsep::harness::compute_metrics;
use ampsep::stft::interior_range;
use ampsep::{separate, Algorithm, MixingModel, SeparationConfig};
use nalgebra::DMatrix;

fn main() -> ampsep::Result<()> {
    let rate = 16_000.0;
    let len = 48_000;
    let sources: Vec<Vec<f64>> = [330.0, 523.0, 880.0]
        .iter()
        .enumerate()
        .map(|(j, f)| {
            (0..len)
                .map(|i| {
                    let t = i as f64 / rate;
                    let on = !((t * 3.0) as usize + j).is_multiple_of(3);
                    if on { 0.3 * (2.0 * std::f64::consts::PI * f * t).sin() } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let a = DMatrix::from_row_slice(2, 3, &[0.95, 0.71, 0.31, 0.31, 0.71, 0.95]);
    let mixtures: Vec<Vec<f64>> = (0..2)
        .map(|c| (0..len).map(|i| (0..3).map(|j| a[(c, j)] * sources[j][i]).sum()).collect())
        .collect();
    let model = MixingModel::new(a, 1.0)?;

    for algo in [Algorithm::Amp, Algorithm::Vamp] {
        let mut cfg = SeparationConfig::default();
        cfg.solver.algo = algo;
        let out = separate(&mixtures, &model, &cfg)?;
        // score away from the partially covered edges
        let r = interior_range(&cfg.stft, len);
        let est: Vec<&[f64]> = out.sources.iter().map(|s| &s[r.clone()]).collect();
        let refs: Vec<&[f64]> = sources.iter().map(|s| &s[r.clone()]).collect();
        let m = compute_metrics(&est, &refs)?;
        println!(
            "{algo:?}: {} frames in {:.2}s, SDR {:?} dB",
            out.frames.len(),
            out.timing,
            m.per_source_sdr.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>()
        );
    }
    Ok(())
}
