//! Input-output curve of the Bernoulli-Gaussian denoiser at several precisions.

use ampsep::BgPrior;

fn main() -> ampsep::Result<()> {
    let prior = BgPrior::default();
    println!("prior rho={} mu={} sigma2={}", prior.rho(), prior.mu(), prior.sigma2());
    println!("{:>6} {:>22} {:>22} {:>22}", "r", "gamma=0.1", "gamma=1", "gamma=10");
    for k in 0..=12 {
        let r = -3.0 + 0.5 * k as f64;
        let cells: Vec<String> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&g| {
                let (x, d) = prior.denoise_scalar(r, g);
                format!("{x:>9.4} (d {d:>6.3})")
            })
            .collect();
        println!("{r:>6.2} {:>22} {:>22} {:>22}", cells[0], cells[1], cells[2]);
    }
    Ok(())
}
