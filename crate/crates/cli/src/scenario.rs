//! Scenario files: angles in degrees, one seed, an optional EUS branch.

use std::path::Path;

use anyhow::{Context, Result};
use conic_game::simulate::EusBranch;
use conic_game::{BoundarySide, Pose, Scenario, Seed, SeedKind};
use serde::{Deserialize, Serialize};

use crate::config::Config;

pub const BUNDLED: [(&str, &str); 5] = [
    ("sim1", include_str!("../scenarios/sim1.json")),
    ("sim2", include_str!("../scenarios/sim2.json")),
    ("sim3", include_str!("../scenarios/sim3.json")),
    ("sim4", include_str!("../scenarios/sim4.json")),
    ("sim5", include_str!("../scenarios/sim5.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    pub theta_degrees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub tau_us: f64,
    pub nu_e: f64,
}

/// How the seed radius (and branch time) were found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusSearch {
    pub method: String,
    pub r_bracket: [f64; 2],
    pub target_escape_time: f64,
    #[serde(default)]
    pub paired_target_escape_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub description: String,
    pub phi_d_degrees: f64,
    pub theta_d_degrees: f64,
    pub side: BoundarySide,
    pub r: f64,
    #[serde(default)]
    pub branch: Option<BranchSpec>,
    #[serde(default)]
    pub pursuer_start: Option<StartPose>,
    pub dt: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub expected_escape_time: Option<f64>,
    #[serde(default)]
    pub radius_search: Option<RadiusSearch>,
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).with_context(|| format!("parsing scenario {origin}"))
    }

    /// A bundled scenario by name, or a file path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
            return Self::parse(text, name_or_path);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Core scenario, with tolerances and horizon taken from `config`.
    pub fn to_scenario(&self, config: &Config) -> Result<Scenario<f64>> {
        let params = Config {
            phi_d_degrees: self.phi_d_degrees,
            ..config.clone()
        }
        .params()?;
        let seed = Seed::new(
            self.r,
            self.theta_d_degrees.to_radians(),
            self.side,
            SeedKind::UpInterior,
            &params,
        )
        .with_context(|| format!("scenario {}: seed", self.name))?;
        let pursuer_start = self.pursuer_start.as_ref().map_or_else(Scenario::default_pursuer_start, |p| {
            Pose::new(p.x, p.y, p.theta_degrees.to_radians())
        });
        let sc = Scenario {
            name: self.name.clone(),
            description: self.description.clone(),
            params,
            seed,
            branch: self.branch.as_ref().map(|b| EusBranch {
                tau_us: b.tau_us,
                nu_e: b.nu_e,
            }),
            pursuer_start,
            dt: self.dt,
            snapshot_times: self.snapshot_times.clone(),
        };
        sc.validate()?;
        Ok(sc)
    }
}
