//! STFT analysis and synthesis over real-packed frames.
//!
//! Each frame of `L` samples is Hann-windowed and transformed with a real
//! DFT. The `L/2 + 1` non-redundant bins become exactly `L` real
//! coefficients, stored frequency-interleaved:
//!
//! ```text
//! [Re b0, Re b(L/2), Re b1, Im b1, Re b2, Im b2, ..., Re b(L/2-1), Im b(L/2-1)]
//! ```
//!
//! so keeping the first `trunc_len` values drops whole high-frequency bins.
//! The scaling is orthonormal: coefficient energy equals windowed-frame energy.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Window-sum level below which synthesis outputs zero.
pub const MIN_WINDOW_SUM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub frame_len: usize,
    /// Fraction of each frame shared with the next, in `[0, 1)`.
    pub overlap: f64,
    /// Real coefficients kept per frame.
    pub trunc_len: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 1024,
            overlap: 0.70,
            trunc_len: 720,
        }
    }
}

impl StftConfig {
    /// Same frame and overlap, all `frame_len` coefficients kept.
    pub fn untruncated(self) -> Self {
        Self {
            trunc_len: self.frame_len,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 8 || !self.frame_len.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "frame length must be even and at least 8, got {}",
                self.frame_len
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::invalid(format!("overlap must lie in [0, 1), got {}", self.overlap)));
        }
        if self.trunc_len == 0 || self.trunc_len > self.frame_len {
            return Err(Error::invalid(format!(
                "truncation length must lie in [1, {}], got {}",
                self.frame_len, self.trunc_len
            )));
        }
        if self.hop() == 0 {
            return Err(Error::invalid("overlap leaves a hop of zero samples"));
        }
        Ok(())
    }

    /// Hop size `round((1 − overlap) L)`; 307 for the defaults.
    pub fn hop(&self) -> usize {
        ((1.0 - self.overlap) * self.frame_len as f64).round() as usize
    }

    /// Number of whole frames that fit in `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            1 + (len - self.frame_len) / self.hop()
        }
    }
}

/// Periodic Hann window of length `len`.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos())
        .collect()
}

/// Packs the `L/2 + 1` bins of an unnormalized real DFT into `L` interleaved,
/// orthonormally scaled coefficients.
pub fn pack_bins(bins: &[Complex<f64>], frame_len: usize, out: &mut [f64]) {
    let half = frame_len / 2;
    debug_assert_eq!(bins.len(), half + 1);
    debug_assert_eq!(out.len(), frame_len);
    let edge = 1.0 / (frame_len as f64).sqrt();
    let inner = (2.0 / frame_len as f64).sqrt();
    out[0] = bins[0].re * edge;
    out[1] = bins[half].re * edge;
    for k in 1..half {
        out[2 * k] = bins[k].re * inner;
        out[2 * k + 1] = bins[k].im * inner;
    }
}

/// Inverse of [`pack_bins`]; slots beyond `coeffs.len()` are treated as zero.
pub fn unpack_bins(coeffs: &[f64], frame_len: usize, bins: &mut [Complex<f64>]) {
    let half = frame_len / 2;
    debug_assert_eq!(bins.len(), half + 1);
    let get = |i: usize| coeffs.get(i).copied().unwrap_or(0.0);
    let edge = (frame_len as f64).sqrt();
    let inner = (frame_len as f64 / 2.0).sqrt();
    bins[0] = Complex::new(get(0) * edge, 0.0);
    bins[half] = Complex::new(get(1) * edge, 0.0);
    for (k, bin) in bins.iter_mut().enumerate().take(half).skip(1) {
        *bin = Complex::new(get(2 * k) * inner, get(2 * k + 1) * inner);
    }
}

/// Real STFT coefficients, one row of `trunc_len` values per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedSpectrogram {
    data: Vec<f64>,
    num_frames: usize,
    config: StftConfig,
    original_len: usize,
}

impl PackedSpectrogram {
    /// All-zero spectrogram shaped for a signal of `original_len` samples.
    pub fn zeros(config: StftConfig, original_len: usize) -> Result<Self> {
        config.validate()?;
        let num_frames = config.num_frames(original_len);
        if num_frames == 0 {
            return Err(Error::invalid(format!(
                "signal of {original_len} samples is shorter than one frame ({})",
                config.frame_len
            )));
        }
        Ok(Self {
            data: vec![0.0; num_frames * config.trunc_len],
            num_frames,
            config,
            original_len,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// Coefficients per frame (`trunc_len`).
    pub fn width(&self) -> usize {
        self.config.trunc_len
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let w = self.width();
        &self.data[n * w..(n + 1) * w]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.data[n * w..(n + 1) * w]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

struct Plans {
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

fn plans(frame_len: usize) -> Plans {
    let mut planner = RealFftPlanner::<f64>::new();
    Plans {
        forward: planner.plan_fft_forward(frame_len),
        inverse: planner.plan_fft_inverse(frame_len),
    }
}

/// Windowed, packed and truncated STFT of `signal`.
pub fn analyze(signal: &[f64], cfg: &StftConfig) -> Result<PackedSpectrogram> {
    let mut spec = PackedSpectrogram::zeros(*cfg, signal.len())?;
    let len = cfg.frame_len;
    let hop = cfg.hop();
    let window = hann(len);
    let fft = plans(len).forward;
    let width = spec.width();

    spec.data.par_chunks_mut(width).enumerate().for_each_init(
        || {
            (
                fft.make_input_vec(),
                fft.make_output_vec(),
                vec![0.0; len],
            )
        },
        |(buf, bins, packed), (n, out)| {
            let start = n * hop;
            for ((b, x), w) in buf.iter_mut().zip(&signal[start..start + len]).zip(&window) {
                *b = x * w;
            }
            fft.process(buf, bins).expect("fft buffer sizes match the plan");
            pack_bins(bins, len, packed);
            out.copy_from_slice(&packed[..width]);
        },
    );
    Ok(spec)
}

/// Weighted overlap-add resynthesis, trimmed to the original length.
pub fn synthesize(spec: &PackedSpectrogram) -> Vec<f64> {
    let cfg = spec.config;
    let len = cfg.frame_len;
    let hop = cfg.hop();
    let window = hann(len);
    let ifft = plans(len).inverse;

    let frames: Vec<Vec<f64>> = spec
        .data
        .par_chunks(spec.width())
        .map_init(
            || ifft.make_input_vec(),
            |bins, coeffs| {
                unpack_bins(coeffs, len, bins);
                let mut time = ifft.make_output_vec();
                ifft.process(bins, &mut time)
                    .expect("ifft buffer sizes match the plan");
                let scale = 1.0 / len as f64;
                time.iter_mut().zip(&window).for_each(|(t, w)| *t *= scale * w);
                time
            },
        )
        .collect();

    let mut out = vec![0.0; spec.original_len];
    let mut wsum = vec![0.0; spec.original_len];
    for (n, frame) in frames.iter().enumerate() {
        let start = n * hop;
        for (i, (v, w)) in frame.iter().zip(&window).enumerate() {
            out[start + i] += v;
            wsum[start + i] += w * w;
        }
    }
    for (o, w) in out.iter_mut().zip(&wsum) {
        *o = if *w >= MIN_WINDOW_SUM { *o / w } else { 0.0 };
    }
    out
}

/// Sample range `[frame_len, (num_frames − 1) · hop)` where every sample is
/// covered by fully overlapping frames.
pub fn interior_range(cfg: &StftConfig, len: usize) -> std::ops::Range<usize> {
    let frames = cfg.num_frames(len);
    let end = frames.saturating_sub(1) * cfg.hop();
    cfg.frame_len.min(end)..end
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hop_and_frame_count() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.hop(), 307);
        assert_eq!(cfg.num_frames(48_000), 1 + (48_000 - 1024) / 307);
        assert_eq!(cfg.num_frames(1023), 0);
    }

    #[test]
    fn config_validation() {
        let ok = StftConfig::default();
        assert!(ok.validate().is_ok());
        assert!(StftConfig { frame_len: 6, ..ok }.validate().is_err());
        assert!(StftConfig { frame_len: 1025, ..ok }.validate().is_err());
        assert!(StftConfig { overlap: 1.0, ..ok }.validate().is_err());
        assert!(StftConfig { trunc_len: 0, ..ok }.validate().is_err());
        assert!(StftConfig { trunc_len: 2000, ..ok }.validate().is_err());
    }

    #[test]
    fn short_signal_rejected() {
        assert!(analyze(&[0.0; 100], &StftConfig::default()).is_err());
    }

    #[test]
    fn zero_signal_gives_zero_frames() {
        let spec = analyze(&vec![0.0; 4096], &StftConfig::default()).unwrap();
        assert!(spec.as_slice().iter().all(|&v| v == 0.0));
        assert!(synthesize(&spec).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_signal_only_fills_window_bins() {
        // a periodic Hann window only has energy at bins 0 and 1
        let cfg = StftConfig::default().untruncated();
        let spec = analyze(&vec![1.0; 4096], &cfg).unwrap();
        for frame in spec.frames() {
            assert!(frame[0] > 1.0);
            assert!(frame[2] < -1.0);
            for (k, v) in frame.iter().enumerate() {
                if k != 0 && k != 2 {
                    assert!(v.abs() < 1e-10, "leak at {k}: {v}");
                }
            }
        }
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let l = 16;
        let coeffs: Vec<f64> = (0..l).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut bins = vec![Complex::new(0.0, 0.0); l / 2 + 1];
        unpack_bins(&coeffs, l, &mut bins);
        let mut back = vec![0.0; l];
        pack_bins(&bins, l, &mut back);
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interior_range_is_inside_signal() {
        let cfg = StftConfig::default();
        let r = interior_range(&cfg, 48_000);
        assert_eq!(r.start, 1024);
        assert!(r.end <= 48_000 && r.end > r.start);
    }
}
