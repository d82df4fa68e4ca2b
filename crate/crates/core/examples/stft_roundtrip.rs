//! Analyze a chirp, keep 720 of 1024 coefficients per frame and resynthesize.

use ampsep::stft::interior_range;
use ampsep::{analyze, synthesize, StftConfig};

fn main() -> ampsep::Result<()> {
    let rate = 16_000.0;
    let signal: Vec<f64> = (0..32_000)
        .map(|i| {
            let t = i as f64 / rate;
            (2.0 * std::f64::consts::PI * (200.0 + 1500.0 * t) * t).sin()
        })
        .collect();

    for cfg in [StftConfig::default().untruncated(), StftConfig::default()] {
        let spec = analyze(&signal, &cfg)?;
        let back = synthesize(&spec);
        let r = interior_range(&cfg, signal.len());
        let err: f64 = r.clone().map(|i| (back[i] - signal[i]).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = r.map(|i| signal[i].powi(2)).sum::<f64>().sqrt();
        println!(
            "{} frames x {} coefficients (hop {}): interior relative error {:.2e}",
            spec.num_frames(),
            spec.width(),
            cfg.hop(),
            err / norm
        );
    }
    Ok(())
}
