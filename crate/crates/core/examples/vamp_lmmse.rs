//! With a Gaussian prior VAMP's fixed point is the linear MMSE estimate.
//! Compare it against a direct solve of the normal equations.

use ampsep::{vamp_precompute, vamp_run, BgPrior, BlockOperator, MixingModel, VampConfig, YTildeForm};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> ampsep::Result<()> {
    let (m, n, gamma_w, sigma2) = (40, 80, 100.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let entry = Normal::new(0.0, (1.0 / m as f64).sqrt()).unwrap();
    let a = DMatrix::from_fn(m, n, |_, _| entry.sample(&mut rng));
    let y = DVector::from_fn(m, |_, _| entry.sample(&mut rng) * 4.0);

    let normal = a.transpose() * &a * gamma_w + DMatrix::identity(n, n) / sigma2;
    let direct = normal.cholesky().unwrap().solve(&(a.transpose() * &y * gamma_w));

    let op = BlockOperator::new(MixingModel::new(a, gamma_w)?, 1)?;
    let pre = vamp_precompute(&op, y.as_slice(), YTildeForm::default())?;
    let cfg = VampConfig { max_iter: 50, tol: 1e-10, gamma_w, ..Default::default() };
    let out = vamp_run(&pre, BgPrior::gaussian(0.0, sigma2)?, &cfg)?;

    let err = (DVector::from_vec(out.xhat) - &direct).norm() / direct.norm();
    println!("VAMP stopped after {} iterations", out.diagnostics.iterations());
    println!("relative distance to the direct solve: {err:.2e}");
    Ok(())
}
