//! Instantaneous mixing model and its block (Kronecker) expansion.
//!
//! A small `M x N` mixing matrix `A` is lifted to `A ⊗ I_T`, so that `T`
//! time-frequency points are solved jointly. Vectors use source-major then
//! time layout: entry `j * T + t` holds source `j` at point `t`. Nothing here
//! ever stores the expanded `MT x NT` matrix except [`BlockOperator::materialize_dense`].

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Default refusal threshold for dense materialization, in matrix entries.
pub const DEFAULT_DENSE_CAP: usize = 10_000_000;

/// Mixing matrix plus noise precision of `y = A x + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingModel {
    a: DMatrix<f64>,
    gamma_w: f64,
}

impl MixingModel {
    pub fn new(a: DMatrix<f64>, gamma_w: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::invalid("mixing matrix must be at least 1x1"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mixing matrix has non-finite entries"));
        }
        if !(gamma_w > 0.0) || !gamma_w.is_finite() {
            return Err(Error::invalid(format!(
                "noise precision must be positive and finite, got {gamma_w}"
            )));
        }
        Ok(Self { a, gamma_w })
    }

    /// Builds a model from row-major rows.
    pub fn from_rows(rows: &[Vec<f64>], gamma_w: f64) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("mixing matrix rows have unequal lengths"));
        }
        let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        Self::new(a, gamma_w)
    }

    /// Parses `M` lines of `N` comma-separated values. Blank lines are skipped.
    pub fn parse_csv(text: &str, gamma_w: f64, origin: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| Error::Parse {
                        path: origin.to_path_buf(),
                        line: lineno + 1,
                        message: format!("bad matrix entry {:?}: {e}", field.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if first != row.len() {
                    return Err(Error::Parse {
                        path: origin.to_path_buf(),
                        line: lineno + 1,
                        message: format!("expected {first} columns, found {}", row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: 0,
                message: "matrix file is empty".into(),
            });
        }
        Self::from_rows(&rows, gamma_w)
    }

    pub fn read_csv(path: impl AsRef<Path>, gamma_w: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, gamma_w, path)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Number of mixture channels `M`.
    pub fn channels(&self) -> usize {
        self.a.nrows()
    }

    /// Number of sources `N`.
    pub fn sources(&self) -> usize {
        self.a.ncols()
    }

    pub fn gamma_w(&self) -> f64 {
        self.gamma_w
    }

    pub fn with_gamma_w(mut self, gamma_w: f64) -> Result<Self> {
        if !(gamma_w > 0.0) || !gamma_w.is_finite() {
            return Err(Error::invalid(format!(
                "noise precision must be positive and finite, got {gamma_w}"
            )));
        }
        self.gamma_w = gamma_w;
        Ok(self)
    }
}

/// `out = (mat ⊗ I_T) x`, or `(matᵀ ⊗ I_T) x` when `transpose` is set.
fn kron_apply(mat: &DMatrix<f64>, transpose: bool, block: usize, x: &[f64], out: &mut [f64]) {
    let (rows, cols) = if transpose {
        (mat.ncols(), mat.nrows())
    } else {
        (mat.nrows(), mat.ncols())
    };
    debug_assert_eq!(x.len(), cols * block);
    debug_assert_eq!(out.len(), rows * block);
    for i in 0..rows {
        let dst = &mut out[i * block..(i + 1) * block];
        dst.fill(0.0);
        for j in 0..cols {
            let g = if transpose { mat[(j, i)] } else { mat[(i, j)] };
            if g == 0.0 {
                continue;
            }
            let src = &x[j * block..(j + 1) * block];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += g * s;
            }
        }
    }
}

/// Real linear map with forward and adjoint products.
///
/// Implementors may assume slice lengths were already checked against
/// [`rows`](Self::rows) and [`cols`](Self::cols).
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn forward_into(&self, x: &[f64], out: &mut [f64]);
    fn adjoint_into(&self, s: &[f64], out: &mut [f64]);
    fn frobenius_norm_sq(&self) -> f64;
}

impl LinearOperator for BlockOperator {
    fn rows(&self) -> usize {
        BlockOperator::rows(self)
    }

    fn cols(&self) -> usize {
        BlockOperator::cols(self)
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        kron_apply(&self.base.a, false, self.block, x, out);
    }

    fn adjoint_into(&self, s: &[f64], out: &mut [f64]) {
        kron_apply(&self.base.a, true, self.block, s, out);
    }

    fn frobenius_norm_sq(&self) -> f64 {
        BlockOperator::frobenius_norm_sq(self)
    }
}

/// `A ⊗ I_T`: every entry `A_ij` becomes the diagonal block `A_ij I_T`.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    base: MixingModel,
    block: usize,
}

impl BlockOperator {
    pub fn new(base: MixingModel, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        Ok(Self { base, block })
    }

    pub fn model(&self) -> &MixingModel {
        &self.base
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    /// Expanded row count `M * T`.
    pub fn rows(&self) -> usize {
        self.base.channels() * self.block
    }

    /// Expanded column count `N * T`.
    pub fn cols(&self) -> usize {
        self.base.sources() * self.block
    }

    pub fn gamma_w(&self) -> f64 {
        self.base.gamma_w
    }

    /// Squared Frobenius norm of the expanded operator.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.base.a.norm_squared() * self.block as f64
    }

    pub fn apply_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("forward input", self.cols(), x.len())?;
        let mut out = vec![0.0; self.rows()];
        LinearOperator::forward_into(self, x, &mut out);
        Ok(out)
    }

    pub fn apply_adjoint(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint input", self.rows(), s.len())?;
        let mut out = vec![0.0; self.cols()];
        LinearOperator::adjoint_into(self, s, &mut out);
        Ok(out)
    }

    /// Economy SVD of the expanded operator, built from the SVD of the small matrix.
    pub fn economy_svd(&self) -> SvdFactors {
        let a = &self.base.a;
        let (m, n) = a.shape();
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested Vᵀ");

        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

        let s_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
        let tol = m.max(n) as f64 * f64::EPSILON * s_max;
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| svd.singular_values[i] > tol)
            .collect();

        let r = kept.len();
        let u0 = DMatrix::from_fn(m, r, |i, k| u[(i, kept[k])]);
        let v0 = DMatrix::from_fn(n, r, |j, k| vt[(kept[k], j)]);
        let s0 = kept.iter().map(|&k| svd.singular_values[k]).collect();
        SvdFactors {
            u0,
            s0,
            v0,
            block: self.block,
        }
    }

    pub fn materialize_dense(&self) -> Result<DMatrix<f64>> {
        self.materialize_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn materialize_dense_capped(&self, cap: usize) -> Result<DMatrix<f64>> {
        let requested = self.rows().saturating_mul(self.cols());
        if requested > cap {
            return Err(Error::CapExceeded { cap, requested });
        }
        let t = self.block;
        let a = &self.base.a;
        Ok(DMatrix::from_fn(self.rows(), self.cols(), |r, c| {
            if r % t == c % t {
                a[(r / t, c / t)]
            } else {
                0.0
            }
        }))
    }
}

/// Economy SVD of `A ⊗ I_T`, stored as the small factors.
///
/// With `A = U₀ Diag(s₀) V₀ᵀ`, the expanded factors are `U₀ ⊗ I_T`,
/// `s₀ ⊗ 1_T` and `V₀ ⊗ I_T`. Expanded column `k * T + t` pairs small
/// singular direction `k` with block position `t`, which keeps the expanded
/// singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    u0: DMatrix<f64>,
    s0: Vec<f64>,
    v0: DMatrix<f64>,
    block: usize,
}

impl SvdFactors {
    /// Rank of the expanded operator, `rank(A) * T`.
    pub fn rank(&self) -> usize {
        self.s0.len() * self.block
    }

    pub fn base_rank(&self) -> usize {
        self.s0.len()
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn base_singular_values(&self) -> &[f64] {
        &self.s0
    }

    /// Expanded singular values, length [`rank`](Self::rank).
    pub fn singular_values(&self) -> Vec<f64> {
        self.s0
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, self.block))
            .collect()
    }

    /// Row count of `U` (`M * T`).
    pub fn rows(&self) -> usize {
        self.u0.nrows() * self.block
    }

    /// Row count of `V` (`N * T`).
    pub fn cols(&self) -> usize {
        self.v0.nrows() * self.block
    }

    /// `Uᵀ y`, length `R`.
    pub fn apply_ut(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("Uᵀ input", self.rows(), y.len())?;
        let mut out = vec![0.0; self.rank()];
        kron_apply(&self.u0, true, self.block, y, &mut out);
        Ok(out)
    }

    /// `U z`, length `M * T`.
    pub fn apply_u(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("U input", self.rank(), z.len())?;
        let mut out = vec![0.0; self.rows()];
        kron_apply(&self.u0, false, self.block, z, &mut out);
        Ok(out)
    }

    /// `Vᵀ x`, length `R`.
    pub fn apply_vt(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("Vᵀ input", self.cols(), x.len())?;
        let mut out = vec![0.0; self.rank()];
        self.vt_into(x, &mut out);
        Ok(out)
    }

    /// `V z`, length `N * T`.
    pub fn apply_v(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("V input", self.rank(), z.len())?;
        let mut out = vec![0.0; self.cols()];
        self.v_into(z, &mut out);
        Ok(out)
    }

    pub(crate) fn vt_into(&self, x: &[f64], out: &mut [f64]) {
        kron_apply(&self.v0, true, self.block, x, out);
    }

    pub(crate) fn v_into(&self, z: &[f64], out: &mut [f64]) {
        kron_apply(&self.v0, false, self.block, z, out);
    }

    fn expand(&self, small: &DMatrix<f64>) -> DMatrix<f64> {
        let t = self.block;
        DMatrix::from_fn(small.nrows() * t, small.ncols() * t, |r, c| {
            if r % t == c % t {
                small[(r / t, c / t)]
            } else {
                0.0
            }
        })
    }

    /// Dense expanded `U` (`M T x R`).
    pub fn dense_u(&self) -> DMatrix<f64> {
        self.expand(&self.u0)
    }

    /// Dense expanded `V` (`N T x R`).
    pub fn dense_v(&self) -> DMatrix<f64> {
        self.expand(&self.v0)
    }
}
