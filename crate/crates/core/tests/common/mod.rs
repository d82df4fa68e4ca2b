//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the structured code paths it checks: operators are
//! built as dense Kronecker products, posterior means come from numerical
//! integration, spectra from a direct DFT and projections from Gram-matrix
//! least squares.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

pub fn gaussian_matrix(rng: &mut impl Rng, m: usize, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `A ⊗ I_T` with entry `(i T + t, j T + t) = a_ij`, built element by element.
pub fn dense_kron(a: &DMatrix<f64>, t: usize) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut out = DMatrix::zeros(m * t, n * t);
    for i in 0..m {
        for j in 0..n {
            for k in 0..t {
                out[(i * t + k, j * t + k)] = a[(i, j)];
            }
        }
    }
    out
}

pub fn matvec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// `(γω ÂᵀÂ + σ⁻² I)⁻¹ (γω Âᵀy + μ σ⁻² 1)` by a dense Cholesky solve.
pub fn lmmse(a: &DMatrix<f64>, y: &[f64], gamma_w: f64, mu: f64, sigma2: f64) -> Vec<f64> {
    let n = a.ncols();
    let h = a.transpose() * a * gamma_w + DMatrix::identity(n, n) / sigma2;
    let rhs = a.transpose() * DVector::from_column_slice(y) * gamma_w + DVector::from_element(n, mu / sigma2);
    let chol = h.cholesky().expect("normal matrix is positive definite");
    chol.solve(&rhs).as_slice().to_vec()
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
}

/// Posterior mean of `x ~ (1-ρ)δ₀ + ρ N(μ, σ²)` given `r = x + N(0, 1/γ)`,
/// by composite Simpson integration of the slab in log-scaled form.
pub fn bg_posterior_mean_quadrature(rho: f64, mu: f64, sigma2: f64, r: f64, gamma: f64) -> f64 {
    let v = 1.0 / gamma;
    let (sd_prior, sd_lik) = (sigma2.sqrt(), v.sqrt());
    let width = 40.0;
    // the product of the two densities lives where both are non-negligible;
    // fall back to the narrower one when the supports barely overlap
    let mut lo = (mu - width * sd_prior).max(r - width * sd_lik);
    let mut hi = (mu + width * sd_prior).min(r + width * sd_lik);
    if hi <= lo {
        let (c, s) = if sd_lik < sd_prior { (r, sd_lik) } else { (mu, sd_prior) };
        lo = c - width * s;
        hi = c + width * s;
    }
    let n = 100_000usize;
    let h = (hi - lo) / n as f64;
    let log_slab = |x: f64| rho.ln() + log_normal_pdf(x, mu, sigma2) + log_normal_pdf(r, x, v);
    let log_spike = if rho < 1.0 {
        (1.0 - rho).ln() + log_normal_pdf(r, 0.0, v)
    } else {
        f64::NEG_INFINITY
    };

    let mut peak = log_spike;
    for k in 0..=n {
        peak = peak.max(log_slab(lo + k as f64 * h));
    }
    let (mut z, mut m1) = (0.0, 0.0);
    for k in 0..=n {
        let x = lo + k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = (log_slab(x) - peak).exp();
        z += w * f;
        m1 += w * x * f;
    }
    z *= h / 3.0;
    m1 *= h / 3.0;
    let spike = (log_spike - peak).exp();
    m1 / (z + spike)
}

/// Orthonormal packing of a length-`L` real frame from a direct O(L²) DFT.
pub fn direct_packed_dft(frame: &[f64]) -> Vec<f64> {
    let l = frame.len();
    let half = l / 2;
    let mut out = vec![0.0; l];
    for k in 0..=half {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &x) in frame.iter().enumerate() {
            let ang = -2.0 * PI * ((k * n) % l) as f64 / l as f64;
            re += x * ang.cos();
            im += x * ang.sin();
        }
        if k == 0 {
            out[0] = re / (l as f64).sqrt();
        } else if k == half {
            out[1] = re / (l as f64).sqrt();
        } else {
            let s = (2.0 / l as f64).sqrt();
            out[2 * k] = re * s;
            out[2 * k + 1] = im * s;
        }
    }
    out
}

/// Inverse of [`direct_packed_dft`] by direct synthesis.
pub fn direct_unpacked_idft(coeffs: &[f64], l: usize) -> Vec<f64> {
    let half = l / 2;
    let get = |i: usize| coeffs.get(i).copied().unwrap_or(0.0);
    let s = (2.0 / l as f64).sqrt();
    (0..l)
        .map(|n| {
            let mut x = get(0) / (l as f64).sqrt();
            x += get(1) * if n % 2 == 0 { 1.0 } else { -1.0 } / (l as f64).sqrt();
            for k in 1..half {
                let ang = 2.0 * PI * ((k * n) % l) as f64 / l as f64;
                x += s * (get(2 * k) * ang.cos() - get(2 * k + 1) * ang.sin());
            }
            x
        })
        .collect()
}

pub fn periodic_hann(l: usize) -> Vec<f64> {
    (0..l).map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / l as f64).cos())).collect()
}

/// Windowed analysis, per-frame coefficient truncation to `keep`, inverse
/// DFT and `Σw²`-normalized overlap-add, all by direct formulas.
pub fn reference_lowpass(signal: &[f64], l: usize, hop: usize, keep: usize) -> Vec<f64> {
    let w = periodic_hann(l);
    let frames = if signal.len() < l { 0 } else { 1 + (signal.len() - l) / hop };
    let mut acc = vec![0.0; signal.len()];
    let mut norm = vec![0.0; signal.len()];
    for f in 0..frames {
        let start = f * hop;
        let frame: Vec<f64> = (0..l).map(|n| signal[start + n] * w[n]).collect();
        let mut c = direct_packed_dft(&frame);
        c.truncate(keep);
        let back = direct_unpacked_idft(&c, l);
        for n in 0..l {
            acc[start + n] += back[n] * w[n];
            norm[start + n] += w[n] * w[n];
        }
    }
    acc.iter()
        .zip(&norm)
        .map(|(a, n)| if *n < 1e-8 { 0.0 } else { a / n })
        .collect()
}

/// Projection-based SDR/SIR/SAR (in dB, uncapped) for estimate `j` using
/// explicit normal equations on the reference Gram matrix.
pub fn gram_metrics(estimate: &[f64], references: &[Vec<f64>], j: usize) -> (f64, f64, f64) {
    let len = estimate.len();
    let k = references.len();
    let s = DMatrix::from_fn(len, k, |i, c| references[c][i]);
    let e = DVector::from_column_slice(estimate);
    let gram = s.transpose() * &s;
    let coef = gram
        .lu()
        .solve(&(s.transpose() * &e))
        .expect("references are linearly independent");
    let span = &s * coef;
    let r = DVector::from_column_slice(&references[j]);
    let target = &r * (r.dot(&e) / r.dot(&r));
    let interf = &span - &target;
    let artif = &e - &span;
    let db = |a: f64, b: f64| 10.0 * (a / b).log10();
    (
        db(target.norm_squared(), (&interf + &artif).norm_squared()),
        db(target.norm_squared(), interf.norm_squared()),
        db(span.norm_squared(), artif.norm_squared()),
    )
}

/// Three sparse sources mixed into two channels at `rate` Hz, written as a
/// 16-bit WAV plus the matching matrix CSV. Returns the mixture length.
pub fn write_stereo_fixture(dir: &std::path::Path, rate: u32, seconds: f64) -> usize {
    use ampsep::wav::{write_wav, SampleFormat};

    let len = (rate as f64 * seconds) as usize;
    let mut g = rng(77);
    let a = [[0.95, 0.7, 0.3], [0.3, 0.7, 0.95]];
    let sources: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            let f = 220.0 * (j + 1) as f64;
            let noise = gaussian_vec(&mut g, len, 0.01);
            (0..len)
                .map(|i| {
                    let t = i as f64 / rate as f64;
                    let gate = if ((t * 4.0) as usize + j).is_multiple_of(3) { 1.0 } else { 0.2 };
                    0.2 * gate * (2.0 * PI * f * t).sin() + noise[i]
                })
                .collect()
        })
        .collect();
    let mix: Vec<Vec<f64>> = a
        .iter()
        .map(|row| (0..len).map(|i| row.iter().zip(&sources).map(|(c, s)| c * s[i]).sum()).collect())
        .collect();
    let refs: Vec<&[f64]> = mix.iter().map(Vec::as_slice).collect();
    write_wav(dir.join("mix.wav"), rate, SampleFormat::Pcm16, &refs).unwrap();
    let csv: String = a
        .iter()
        .map(|row| row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(dir.join("A.csv"), csv).unwrap();
    len
}
