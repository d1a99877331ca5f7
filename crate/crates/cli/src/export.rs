//! File writers and readers. CSV floats use `{:.16e}` (17 significant
//! digits) so repeated runs are byte-identical and values round-trip.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use conic_game::synthesis::TrajectorySample;
use conic_game::{SimResult, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::Format;

pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "tau", "r", "phi", "theta", "x", "y", "lambda_x", "lambda_y", "lambda_theta", "nu_p", "nu_e", "family",
];

pub const SIM_COLUMNS: [&str; 12] = [
    "t",
    "pursuer_x",
    "pursuer_y",
    "pursuer_theta",
    "evader_x",
    "evader_y",
    "evader_theta",
    "x",
    "y",
    "theta",
    "nu_p",
    "nu_e",
];

/// One exported value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A table with provenance, rendered as CSV or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub config_hash: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(config_hash: &str, columns: &[&str]) -> Self {
        Self {
            config_hash: config_hash.to_owned(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# config_hash={}", self.config_hash);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Num(v) => out.push_str(&fmt_num(*v)),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        std::fs::write(path, self.render(format)?).with_context(|| format!("writing {}", path.display()))
    }

    /// Reads a table written by [`Table::write`] in either format.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
        }
        let Some((first, body)) = text.split_once('\n') else {
            bail!("{}: empty file", path.display());
        };
        let Some(hash) = first.strip_prefix("# config_hash=") else {
            bail!("{}: missing config_hash line", path.display());
        };
        let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns: Vec<String> = rdr
            .headers()
            .with_context(|| format!("{}: header", path.display()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
            rows.push(
                rec.iter()
                    .map(|s| s.parse::<f64>().map_or_else(|_| Cell::Text(s.to_owned()), Cell::Num))
                    .collect(),
            );
        }
        Ok(Self {
            config_hash: hash.trim().to_owned(),
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn sample_row(s: &TrajectorySample<f64>) -> Vec<Cell> {
    vec![
        s.tau.into(),
        s.state.r.into(),
        s.state.phi.into(),
        s.state.theta.into(),
        s.reduced.x.into(),
        s.reduced.y.into(),
        s.costate.lambda_x.into(),
        s.costate.lambda_y.into(),
        s.costate.lambda_theta.into(),
        s.nu_p.into(),
        s.nu_e.into(),
        s.family.as_str().into(),
    ]
}

pub fn trajectory_table(traj: &Trajectory<f64>, sample_step: f64, config_hash: &str) -> Table {
    let mut t = Table::new(config_hash, &TRAJECTORY_COLUMNS);
    for s in traj.samples(sample_step) {
        t.push(sample_row(&s));
    }
    t
}

pub fn sim_table(sim: &SimResult<f64>, config_hash: &str) -> Table {
    let mut t = Table::new(config_hash, &SIM_COLUMNS);
    for i in 0..sim.len() {
        let (p, e, r, u) = (sim.pursuer_path[i], sim.evader_path[i], sim.reduced_path[i], sim.control_log[i]);
        t.push(
            [sim.times[i], p.x, p.y, p.theta, e.x, e.y, e.theta, r.x, r.y, r.theta, u.nu_p, u.nu_e]
                .map(Cell::Num)
                .to_vec(),
        );
    }
    t
}

pub fn snapshot_table(sim: &SimResult<f64>, config_hash: &str) -> Table {
    let cols = ["t", "pursuer_x", "pursuer_y", "pursuer_theta", "evader_x", "evader_y", "evader_theta"];
    let mut t = Table::new(config_hash, &cols);
    for s in &sim.snapshots {
        let (p, e) = (s.pursuer, s.evader);
        t.push([s.time, p.x, p.y, p.theta, e.x, e.y, e.theta].map(Cell::Num).to_vec());
    }
    t
}
