//! Run configuration: a flat JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use conic_game::{GameParams, Params};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedGrid {
    pub n_theta: usize,
    pub n_r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub phi_d_degrees: f64,
    pub tau_max: f64,
    /// Forward integration step of the simulator.
    pub dt: f64,
    pub tol_root: f64,
    pub tol_event: f64,
    /// Event-bracketing step in retro-time.
    pub scan_step: f64,
    /// Retro-time spacing of exported trajectory samples.
    pub sample_step: f64,
    pub seed_grid: SeedGrid,
    pub output_dir: PathBuf,
    pub format: Format,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            phi_d_degrees: 40.0,
            tau_max: std::f64::consts::TAU,
            dt: 1e-4,
            tol_root: 1e-10,
            tol_event: 1e-9,
            scan_step: 1e-3,
            sample_step: 1e-2,
            seed_grid: SeedGrid { n_theta: 12, n_r: 6 },
            output_dir: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

/// Values given on the command line; each one present wins over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub phi_d_degrees: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seeds_theta: Option<usize>,
    #[arg(long)]
    pub seeds_r: Option<usize>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(ov: &Overrides) -> Result<Self> {
        let mut c = match &ov.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(v) = ov.phi_d_degrees {
            c.phi_d_degrees = v;
        }
        if let Some(v) = ov.tau_max {
            c.tau_max = v;
        }
        if let Some(v) = ov.dt {
            c.dt = v;
        }
        if let Some(v) = &ov.out {
            c.output_dir = v.clone();
        }
        if let Some(v) = ov.format {
            c.format = v;
        }
        if let Some(v) = ov.seeds_theta {
            c.seed_grid.n_theta = v;
        }
        if let Some(v) = ov.seeds_r {
            c.seed_grid.n_r = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_d_degrees > 0.0 && self.phi_d_degrees < 90.0) {
            bail!("phi_d_degrees = {} must lie in (0, 90)", self.phi_d_degrees);
        }
        for (name, v) in [
            ("tau_max", self.tau_max),
            ("dt", self.dt),
            ("tol_root", self.tol_root),
            ("tol_event", self.tol_event),
            ("scan_step", self.scan_step),
            ("sample_step", self.sample_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} = {v} must be positive");
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params> {
        let p = GameParams {
            phi_d: self.phi_d_degrees.to_radians(),
            tol_root: self.tol_root,
            tol_event: self.tol_event,
            tau_max: self.tau_max,
            scan_step: self.scan_step,
        };
        Ok(p.validated()?)
    }

    /// The configuration minus where output goes; echoed into manifests and
    /// hashed for provenance.
    pub fn provenance(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        v
    }

    pub fn hash(&self) -> String {
        hash_value(&self.provenance())
    }
}

/// SHA-256 of the compact JSON form.
pub fn hash_value(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("json value serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"phi_d_degrees": 30, "seed_grid": {"n_theta": 3, "n_r": 2}}"#).unwrap();
        let ov = Overrides {
            config: Some(path),
            seeds_r: Some(5),
            ..Default::default()
        };
        let c = Config::resolve(&ov).unwrap();
        assert_eq!(c.phi_d_degrees, 30.0);
        assert_eq!(c.seed_grid, SeedGrid { n_theta: 3, n_r: 5 });
        assert_eq!(c.tol_event, 1e-9);
    }

    #[test]
    fn rejects_bad_values() {
        let ov = Overrides {
            phi_d_degrees: Some(95.0),
            ..Default::default()
        };
        assert!(Config::resolve(&ov).is_err());
        let ov = Overrides {
            dt: Some(0.0),
            ..Default::default()
        };
        assert!(Config::resolve(&ov).is_err());
    }

    #[test]
    fn unknown_field_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{\n  \"phi_d\": 30\n}").unwrap();
        let err = format!("{:#}", Config::from_file(&path).unwrap_err());
        assert!(err.contains("phi_d") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = Config::default();
        let b = Config {
            output_dir: "elsewhere".into(),
            ..Config::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = Config {
            phi_d_degrees: 41.0,
            ..Config::default()
        };
        assert_ne!(a.hash(), c.hash());
    }
}
