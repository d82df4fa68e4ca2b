//! Flat `key = value` configuration files.
//!
//! Keys use the long CLI flag names with `-` or `_` interchangeable.
//! `#` starts a comment. Later sources override earlier ones: defaults, then
//! the file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::SeparationConfig;
use crate::solve::Algorithm;

const KEYS: &[&str] = &[
    "algo",
    "theta",
    "max_iter",
    "tol",
    "rho",
    "mu",
    "sigma2",
    "snr_db",
    "frame_len",
    "overlap",
    "trunc_len",
    "block_size",
    "em_noise",
    "learn_mu",
    "learn_sigma2",
    "gamma_update",
    "gamma_tilde_form",
    "y_tilde_form",
    "parallel_frames",
    "seed",
];

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Unresolved settings, keyed by normalized name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key = value, found {line:?}")))?;
            s.set(k, v.trim()).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(s)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::invalid(format!("unknown setting {key:?}")));
        }
        self.values.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    /// Values in `other` win.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed").map_or(Ok(0), |v| parse_num(v, "seed"))
    }

    /// Applies the settings on top of [`SeparationConfig::default`].
    pub fn resolve(&self) -> Result<SeparationConfig> {
        let mut cfg = SeparationConfig::default();
        if let Some(v) = self.get("algo") {
            cfg.solver.algo = v.parse::<Algorithm>().map_err(Error::InvalidParameter)?;
        }
        let s = &mut cfg.solver;
        if let Some(v) = self.get("theta") {
            s.set_theta(parse_num(v, "theta")?);
        }
        if let Some(v) = self.get("max_iter") {
            s.set_max_iter(parse_num(v, "max_iter")?);
        }
        if let Some(v) = self.get("tol") {
            s.set_tol(parse_num(v, "tol")?);
        }
        let rho = self.get("rho").map_or(Ok(s.prior.rho()), |v| parse_num(v, "rho"))?;
        let mu = self.get("mu").map_or(Ok(s.prior.mu()), |v| parse_num(v, "mu"))?;
        let sigma2 = self
            .get("sigma2")
            .map_or(Ok(s.prior.sigma2()), |v| parse_num(v, "sigma2"))?;
        s.prior = crate::denoise::BgPrior::new(rho, mu, sigma2)?;
        if let Some(v) = self.get("em_noise") {
            s.set_em_noise(parse_switch(v, "em_noise")?);
        }
        if let Some(v) = self.get("learn_mu") {
            let on = parse_switch(v, "learn_mu")?;
            s.amp.learn_prior.mean = on;
            s.vamp.learn_prior.mean = on;
        }
        if let Some(v) = self.get("learn_sigma2") {
            let on = parse_switch(v, "learn_sigma2")?;
            s.amp.learn_prior.variance = on;
            s.vamp.learn_prior.variance = on;
        }
        if let Some(v) = self.get("gamma_update") {
            s.amp.gamma_update = v.parse().map_err(Error::InvalidParameter)?;
        }
        if let Some(v) = self.get("gamma_tilde_form") {
            s.vamp.gamma_tilde_form = v.parse().map_err(Error::InvalidParameter)?;
        }
        if let Some(v) = self.get("y_tilde_form") {
            s.vamp.y_tilde_form = v.parse().map_err(Error::InvalidParameter)?;
        }
        if let Some(v) = self.get("snr_db") {
            cfg.snr_db = Some(parse_num(v, "snr_db")?);
        }
        if let Some(v) = self.get("frame_len") {
            cfg.stft.frame_len = parse_num(v, "frame_len")?;
        }
        if let Some(v) = self.get("overlap") {
            cfg.stft.overlap = parse_num(v, "overlap")?;
        }
        if let Some(v) = self.get("trunc_len") {
            cfg.stft.trunc_len = parse_num(v, "trunc_len")?;
        }
        if let Some(v) = self.get("block_size") {
            cfg.block_size = Some(parse_num(v, "block_size")?);
        }
        if let Some(v) = self.get("parallel_frames") {
            cfg.parallel_frames = parse_num(v, "parallel_frames")?;
        }
        self.seed()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse::<T>()
        .map_err(|e| Error::invalid(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_switch(v: &str, key: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(Error::invalid(format!("{key}: expected on or off, got {other:?}"))),
    }
}

fn switch(on: bool) -> &'static str {
    if on {
        "on"
    } else {
        "off"
    }
}

/// Renders a resolved configuration in the same `key = value` format.
pub fn describe(cfg: &SeparationConfig, seed: u64) -> String {
    let s = &cfg.solver;
    let (em, learn) = match s.algo {
        Algorithm::Amp => (s.amp.em_noise, s.amp.learn_prior),
        Algorithm::Vamp => (s.vamp.em_noise, s.vamp.learn_prior),
    };
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("algo", s.algo.to_string());
    line("theta", s.theta().to_string());
    line("max_iter", s.max_iter().to_string());
    line(
        "tol",
        match s.algo {
            Algorithm::Amp => s.amp.tol,
            Algorithm::Vamp => s.vamp.tol,
        }
        .to_string(),
    );
    line("rho", s.prior.rho().to_string());
    line("mu", s.prior.mu().to_string());
    line("sigma2", s.prior.sigma2().to_string());
    if let Some(snr) = cfg.snr_db {
        line("snr_db", snr.to_string());
    }
    line("frame_len", cfg.stft.frame_len.to_string());
    line("overlap", cfg.stft.overlap.to_string());
    line("trunc_len", cfg.stft.trunc_len.to_string());
    match cfg.block_size {
        Some(t) => line("block_size", t.to_string()),
        None => line("# block_size", format!("{} (one frame)", cfg.block_size())),
    }
    line("em_noise", switch(em).into());
    line("learn_mu", switch(learn.mean).into());
    line("learn_sigma2", switch(learn.variance).into());
    line(
        "gamma_update",
        match s.amp.gamma_update {
            crate::amp::GammaUpdate::Printed => "printed",
            crate::amp::GammaUpdate::PrecisionConsistent => "precision_consistent",
        }
        .into(),
    );
    line(
        "gamma_tilde_form",
        match s.vamp.gamma_tilde_form {
            crate::vamp::GammaTildeForm::Printed => "printed",
            crate::vamp::GammaTildeForm::Ratio => "ratio",
        }
        .into(),
    );
    line(
        "y_tilde_form",
        match s.vamp.y_tilde_form {
            crate::vamp::YTildeForm::Printed => "printed",
            crate::vamp::YTildeForm::Whitened => "whitened",
        }
        .into(),
    );
    line("parallel_frames", cfg.parallel_frames.to_string());
    line("seed", seed.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_table_values() {
        let cfg = Settings::default().resolve().unwrap();
        let p = cfg.solver.prior;
        assert_eq!((p.rho(), p.mu(), p.sigma2()), (0.6, 0.0, 5.0));
        assert_eq!(cfg.snr_db, Some(40.0));
        assert_eq!(cfg.solver.algo, Algorithm::Amp);
        assert_eq!(cfg.solver.max_iter(), 30);
        assert_eq!(cfg.stft.frame_len, 1024);
        assert_eq!(cfg.stft.trunc_len, 720);
    }

    #[test]
    fn vamp_settings_from_file() {
        let text = "# vamp run\nalgo = vamp\nmax-iter = 10 # comment\ntheta=0.95\nem_noise = off\n";
        let s = Settings::parse(text, Path::new("c.cfg")).unwrap();
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.solver.algo, Algorithm::Vamp);
        assert_eq!(cfg.solver.vamp.max_iter, 10);
        assert_eq!(cfg.solver.vamp.theta, 0.95);
        assert!(!cfg.solver.vamp.em_noise);
        // AMP settings untouched
        assert_eq!(cfg.solver.amp.theta, 1.0);
    }

    #[test]
    fn later_settings_override() {
        let mut file = Settings::parse("rho = 0.3\nsigma2 = 2\n", Path::new("c")).unwrap();
        let mut flags = Settings::default();
        flags.set("rho", "0.4").unwrap();
        file.merge(&flags);
        let cfg = file.resolve().unwrap();
        assert_eq!(cfg.solver.prior.rho(), 0.4);
        assert_eq!(cfg.solver.prior.sigma2(), 2.0);
    }

    #[test]
    fn errors_name_the_line() {
        let err = Settings::parse("rho = 0.3\nnonsense\n", Path::new("x.cfg")).unwrap_err();
        assert!(err.to_string().contains("x.cfg:2"), "{err}");
        let err = Settings::parse("colour = red\n", Path::new("x.cfg")).unwrap_err();
        assert!(err.to_string().contains("unknown setting"), "{err}");
        let s = Settings::parse("theta = abc\n", Path::new("x.cfg")).unwrap();
        assert!(s.resolve().is_err());
        let s = Settings::parse("em_noise = maybe\n", Path::new("x.cfg")).unwrap();
        assert!(s.resolve().is_err());
    }

    #[test]
    fn describe_roundtrips() {
        let mut s = Settings::default();
        s.set("algo", "vamp").unwrap();
        s.set("theta", "0.9").unwrap();
        s.set("seed", "42").unwrap();
        let cfg = s.resolve().unwrap();
        let text = describe(&cfg, s.seed().unwrap());
        let again = Settings::parse(&text, Path::new("d")).unwrap();
        assert_eq!(again.resolve().unwrap(), cfg);
        assert_eq!(again.seed().unwrap(), 42);
    }
}
