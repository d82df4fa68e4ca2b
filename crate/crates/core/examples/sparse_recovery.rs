//! Recover a sparse vector from 250 noisy random projections with AMP.

use ampsep::harness::{evaluate_instance, generate_instance, MatrixKind, SyntheticSpec};
use ampsep::{Algorithm, BgPrior, SolverSettings};

fn main() -> ampsep::Result<()> {
    let prior = BgPrior::new(0.1, 0.0, 1.0)?;
    let spec = SyntheticSpec {
        m: 250,
        n: 500,
        t: 1,
        prior,
        snr_db: 40.0,
        num_instances: 1,
        seed: 7,
        matrix_kind: MatrixKind::IidGaussian,
    };
    let inst = generate_instance(&spec, 0)?;
    let active = inst.truth.iter().filter(|v| **v != 0.0).count();
    println!("500 unknowns, {active} nonzero, 250 measurements at 40 dB");

    let mut settings = SolverSettings { algo: Algorithm::Amp, prior, ..Default::default() };
    settings.set_tol(0.0);
    for iters in [5, 10, 20, 30] {
        settings.set_max_iter(iters);
        let (_, nmse) = evaluate_instance(&inst, 1, &settings)?;
        println!("{iters:>3} iterations: NMSE {nmse:7.2} dB");
    }
    Ok(())
}
