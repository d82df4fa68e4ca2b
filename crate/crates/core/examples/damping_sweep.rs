//! Damping and iteration sweeps over synthetic stereo instances, as CSV.

use ampsep::harness::{sweep, SweepGrid, SyntheticSpec};
use ampsep::{Algorithm, SolverSettings};

fn main() -> ampsep::Result<()> {
    let mut spec = SyntheticSpec::stereo_speech_like(1);
    spec.num_instances = 4;
    let mut base = SolverSettings::default();
    base.set_em_noise(false);
    base.set_tol(0.0);

    let mut table = sweep(&spec, Algorithm::Amp, &SweepGrid::damping(30), &base)?;
    table.extend(sweep(&spec, Algorithm::Vamp, &SweepGrid::damping(10), &base)?);
    table.extend(sweep(&spec, Algorithm::Amp, &SweepGrid::iterations(), &base)?);
    table.extend(sweep(&spec, Algorithm::Vamp, &SweepGrid::iterations(), &base)?);
    for row in table.rows.iter().filter(|r| r.metric == "sdr") {
        println!("{:?} theta={:.2} max_iter={:>2}: SDR {:.2} dB", row.algo, row.theta, row.max_iter, row.mean);
    }
    Ok(())
}
