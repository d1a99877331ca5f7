//! The five subcommands. Each writes its files plus `manifest.json` into
//! the configured output directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use conic_game::synthesis::{barrier_emanation, barrier_phi_curvature, synthesize_barrier, synthesize_tributary};
use conic_game::terminal::{bup_radius, classify, sample_seeds, upl_membership};
use conic_game::validation::{run_all, CheckReport, ValidationOptions, ValidationReport};
use conic_game::{synthesize, BoundarySide, Cylindrical, Params, Seed, SeedKind, Trajectory};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, Format};
use crate::export::{sim_table, snapshot_table, trajectory_table, Cell, Table, TRAJECTORY_COLUMNS};
use crate::scenario::ScenarioFile;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub side: BoundarySide,
    pub kind: SeedKind,
    pub r: f64,
    pub theta_d: f64,
    pub theta_d_degrees: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: usize,
    #[serde(default)]
    pub families: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emanation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    /// Seeds that could not be synthesized, with the reason.
    #[serde(default)]
    pub failures: Vec<String>,
}

impl Manifest {
    fn new(command: &str, config: &Config) -> Self {
        Self {
            command: command.to_owned(),
            config_hash: config.hash(),
            config: config.provenance(),
            files: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn families(&self) -> BTreeSet<String> {
        self.files.iter().flat_map(|f| f.families.iter().cloned()).collect()
    }
}

struct Writer<'a> {
    dir: &'a Path,
    format: Format,
    manifest: Manifest,
}

impl<'a> Writer<'a> {
    fn open(command: &str, config: &'a Config) -> Result<Self> {
        let dir = config.output_dir.as_path();
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            format: config.format,
            manifest: Manifest::new(command, config),
        })
    }

    fn table(&mut self, stem: &str, kind: &str, table: &Table) -> Result<&mut FileEntry> {
        let name = format!("{stem}.{}", self.format.extension());
        table.write(&self.dir.join(&name), self.format)?;
        self.manifest.files.push(FileEntry {
            path: name,
            kind: kind.to_owned(),
            columns: table.columns.clone(),
            rows: table.rows.len(),
            families: Vec::new(),
            seed: None,
            total_tau: None,
            termination: None,
            emanation: None,
        });
        Ok(self.manifest.files.last_mut().expect("just pushed"))
    }

    fn trajectory(&mut self, stem: &str, job: &Job, traj: &Trajectory<f64>, sample_step: f64) -> Result<()> {
        let table = trajectory_table(traj, sample_step, &self.manifest.config_hash);
        let entry = self.table(stem, "trajectory", &table)?;
        let mut fams: Vec<String> = Vec::new();
        for f in traj.families() {
            if fams.last().map(String::as_str) != Some(f.as_str()) {
                fams.push(f.as_str().to_owned());
            }
        }
        entry.families = fams;
        entry.seed = Some(job.info());
        entry.total_tau = Some(traj.total_tau);
        entry.termination = Some(format!("{:?}", traj.termination()));
        entry.emanation = traj.emanation.map(|e| format!("{e:?}"));
        Ok(())
    }

    fn finish(self) -> Result<Manifest> {
        let path = self.manifest.write(self.dir)?;
        info!("wrote {} files, manifest {}", self.manifest.files.len(), path.display());
        Ok(self.manifest)
    }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Seed(Seed<f64>),
    Tributary { seed: Seed<f64>, tau_us: f64, nu_e: f64 },
}

impl Job {
    fn run(&self, params: &Params) -> conic_game::Result<Trajectory<f64>> {
        match *self {
            Job::Seed(s) if s.kind == SeedKind::Bup => synthesize_barrier(&s, params),
            Job::Seed(s) => synthesize(&s, params),
            Job::Tributary { seed, tau_us, nu_e } => synthesize_tributary(&seed, tau_us, nu_e, params),
        }
    }

    fn seed(&self) -> Seed<f64> {
        match *self {
            Job::Seed(s) | Job::Tributary { seed: s, .. } => s,
        }
    }

    fn info(&self) -> SeedInfo {
        let s = self.seed();
        let (tau_us, nu_e) = match *self {
            Job::Seed(_) => (None, None),
            Job::Tributary { tau_us, nu_e, .. } => (Some(tau_us), Some(nu_e)),
        };
        SeedInfo {
            side: s.side,
            kind: s.kind,
            r: s.r,
            theta_d: s.theta_d,
            theta_d_degrees: s.theta_d.to_degrees(),
            tau_us,
            nu_e,
        }
    }
}

/// Fractions of the surface length at which tributaries branch off.
const BRANCH_FRACTIONS: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];

/// Seeds on the evader's universal surface of each side, with both
/// tributaries at a few branch points.
fn eus_jobs(params: &Params, n_r: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    let right = params.phi_d + std::f64::consts::FRAC_PI_2;
    for (side, theta) in [
        (BoundarySide::Right, right),
        (BoundarySide::Left, std::f64::consts::TAU - right),
    ] {
        let Ok(bound) = bup_radius(side, theta, params) else {
            continue;
        };
        for j in 0..n_r {
            let r = (j as f64 + 0.5) / n_r as f64 * bound;
            let Ok(seed) = Seed::up(r, theta, side, params) else {
                continue;
            };
            jobs.push(Job::Seed(seed));
            let Ok(eus) = synthesize(&seed, params) else {
                continue;
            };
            let end = eus.segments[0].tau_end;
            for frac in BRANCH_FRACTIONS {
                for nu_e in [-1.0, 1.0] {
                    jobs.push(Job::Tributary {
                        seed,
                        tau_us: frac * end,
                        nu_e,
                    });
                }
            }
        }
    }
    jobs
}

fn write_jobs(w: &mut Writer<'_>, jobs: &[Job], params: &Params, sample_step: f64) -> Result<()> {
    let results: Vec<_> = jobs.par_iter().map(|j| j.run(params)).collect();
    for (i, (job, res)) in jobs.iter().zip(results).enumerate() {
        match res {
            Ok(traj) => w.trajectory(&format!("traj_{i:04}"), job, &traj, sample_step)?,
            Err(e) => {
                let msg = format!("seed {i} ({:?}): {e}", job.info());
                warn!("{msg}");
                w.manifest.failures.push(msg);
            }
        }
    }
    Ok(())
}

/// Usable part, its boundary and the apex-line membership, sampled over θ.
pub fn cmd_up(config: &Config) -> Result<Manifest> {
    let params = config.params()?;
    let mut w = Writer::open("up", config)?;
    let hash = w.manifest.config_hash.clone();
    let span = std::f64::consts::PI + 2.0 * params.phi_d;

    let mut bup = Table::new(&hash, &["side", "theta_degrees", "theta", "r"]);
    let mut up = Table::new(&hash, &["side", "theta_degrees", "theta", "r", "class"]);
    for side in [BoundarySide::Right, BoundarySide::Left] {
        // whole degrees plus the exact zeros and the peak
        let mut thetas: Vec<f64> = (0..=span.to_degrees().floor() as usize)
            .map(|d| (d as f64).to_radians())
            .collect();
        thetas.extend([0.0, span, std::f64::consts::FRAC_PI_2 + params.phi_d]);
        thetas.sort_by(f64::total_cmp);
        thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        for right_theta in thetas {
            let theta = match side {
                BoundarySide::Right => right_theta,
                BoundarySide::Left => std::f64::consts::TAU - right_theta,
            };
            let r = bup_radius(side, theta, &params)?;
            let name = side_name(side);
            bup.push(vec![name.into(), theta.to_degrees().into(), theta.into(), r.into()]);
            for k in 0..5 {
                let rk = r * k as f64 / 4.0;
                let phi = side.sign::<f64>() * params.phi_d;
                let class = classify(&Cylindrical::new(rk, phi, theta), &params);
                up.push(vec![
                    name.into(),
                    theta.to_degrees().into(),
                    theta.into(),
                    rk.into(),
                    format!("{class:?}").as_str().into(),
                ]);
            }
        }
    }
    w.table("bup", "bup", &bup)?;
    w.table("up", "up", &up)?;

    let mut upl = Table::new(&hash, &["theta_degrees", "theta", "r", "membership"]);
    for d in 0..360 {
        let theta = (d as f64).to_radians();
        upl.push(vec![
            (d as f64).into(),
            theta.into(),
            0.0.into(),
            format!("{:?}", upl_membership(theta, &params)).as_str().into(),
        ]);
    }
    w.table("upl", "upl", &upl)?;
    w.finish()
}

/// Optimal trajectories from the UP seed grid, the EUS and its tributaries.
pub fn cmd_synth(config: &Config) -> Result<Manifest> {
    let params = config.params()?;
    let mut w = Writer::open("synth", config)?;
    let (n_theta, n_r) = (config.seed_grid.n_theta, config.seed_grid.n_r);
    let mut jobs: Vec<Job> = sample_seeds(&params, n_theta, n_r)
        .into_iter()
        .filter(|s| s.kind == SeedKind::UpInterior)
        .map(Job::Seed)
        .collect();
    if n_theta > 0 && n_r > 0 {
        jobs.extend(eus_jobs(&params, n_r));
    }
    info!("synthesizing {} trajectories", jobs.len());
    write_jobs(&mut w, &jobs, &params, config.sample_step)?;
    w.finish()
}

/// Barrier trajectories from BUP seeds and the emanation table.
pub fn cmd_barrier(config: &Config) -> Result<Manifest> {
    let params = config.params()?;
    let mut w = Writer::open("barrier", config)?;
    let hash = w.manifest.config_hash.clone();
    let span_deg = (std::f64::consts::PI + 2.0 * params.phi_d).to_degrees();
    let mut table = Table::new(&hash, &["theta_rb_degrees", "theta_rb", "phi_curvature", "emanation"]);
    // tenths of a degree strictly inside the BUP's θ range
    for i in 1.. {
        let deg = i as f64 / 10.0;
        if deg >= span_deg - 1e-9 {
            break;
        }
        let theta = deg.to_radians();
        let curv = barrier_phi_curvature(theta, &params)?;
        let em = barrier_emanation(theta, &params)?;
        table.push(vec![deg.into(), theta.into(), curv.into(), format!("{em:?}").as_str().into()]);
    }
    w.table("emanation", "emanation", &table)?;

    let jobs: Vec<Job> = sample_seeds(&params, config.seed_grid.n_theta, config.seed_grid.n_r.max(1))
        .into_iter()
        .filter(|s| s.kind == SeedKind::Bup)
        .map(Job::Seed)
        .collect();
    write_jobs(&mut w, &jobs, &params, config.sample_step)?;
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub name: String,
    pub description: String,
    pub config_hash: String,
    pub escape_time: f64,
    pub escaped: bool,
    pub expected_escape_time: Option<f64>,
    pub hit_side: Option<BoundarySide>,
    pub families: Vec<String>,
    pub max_replay_deviation: f64,
    pub final_state: Cylindrical,
    pub scenario: ScenarioFile,
}

pub fn cmd_simulate(config: &Config, scenario: &str) -> Result<SimSummary> {
    let file = ScenarioFile::load(scenario)?;
    let sc = file.to_scenario(config)?;
    let traj = sc.trajectory().with_context(|| format!("scenario {}", sc.name))?;
    let sim = conic_game::replay(&traj, sc.pursuer_start, sc.dt, &sc.params, &sc.snapshot_times);
    let mut w = Writer::open("simulate", config)?;
    let hash = w.manifest.config_hash.clone();
    let stem = file.name.clone();
    w.table(&format!("{stem}_path"), "sim_path", &sim_table(&sim, &hash))?;
    w.table(&format!("{stem}_snapshots"), "sim_snapshots", &snapshot_table(&sim, &hash))?;
    let summary = SimSummary {
        name: file.name.clone(),
        description: file.description.clone(),
        config_hash: hash,
        escape_time: sim.escape_time,
        escaped: sim.escaped,
        expected_escape_time: file.expected_escape_time,
        hit_side: traj.hit_side(),
        families: traj.families().iter().map(|f| f.as_str().to_owned()).collect(),
        max_replay_deviation: sim.max_replay_deviation,
        final_state: traj.state_at(0.0),
        scenario: file,
    };
    let path = w.dir.join(format!("{stem}_summary.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    info!(
        "{}: escape after {:.4} s (escaped = {})",
        summary.name, summary.escape_time, summary.escaped
    );
    w.finish()?;
    Ok(summary)
}

/// Runs the check suite; with `check_dir`, also re-checks previously
/// exported trajectories. Writes `validation.json` to the output directory.
pub fn cmd_validate(config: &Config, check_dir: Option<&Path>, perturb: f64) -> Result<ValidationReport> {
    let params = config.params()?;
    let opts = ValidationOptions {
        n_theta: config.seed_grid.n_theta,
        n_r: config.seed_grid.n_r,
        perturbation: perturb,
        ..ValidationOptions::default()
    };
    let mut report = run_all(&params, &opts);
    if let Some(dir) = check_dir {
        report.checks.push(check_exported(dir)?);
    }
    for c in &report.checks {
        let mark = if c.passed { "ok" } else { "FAILED" };
        info!("{mark:6} {} max_error={:.3e} tol={:.1e}", c.name, c.max_error, c.tolerance);
    }
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let path = config.output_dir.join("validation.json");
    let doc = serde_json::json!({
        "config_hash": config.hash(),
        "all_passed": report.all_passed(),
        "checks": report.checks,
    });
    std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(report)
}

fn wrapped_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Junction continuity of exported trajectories. Refuses directories whose
/// files do not all carry the manifest's config hash.
pub fn check_exported(dir: &Path) -> Result<CheckReport> {
    let manifest = Manifest::read(dir)?;
    let mut tables = Vec::new();
    for f in &manifest.files {
        let t = Table::read(&dir.join(&f.path))?;
        if t.config_hash != manifest.config_hash {
            bail!(
                "{}: config hash {} differs from manifest hash {}; refusing mixed inputs",
                f.path,
                t.config_hash,
                manifest.config_hash
            );
        }
        if t.rows.len() != f.rows {
            bail!("{}: {} rows, manifest lists {}", f.path, t.rows.len(), f.rows);
        }
        if f.kind == "trajectory" {
            tables.push((f.path.clone(), t));
        }
    }
    let cols: Vec<usize> = TRAJECTORY_COLUMNS[..9]
        .iter()
        .map(|c| tables.first().and_then(|(_, t)| t.column(c)).unwrap_or(0))
        .collect();
    let num = |c: &Cell| match c {
        Cell::Num(v) => *v,
        Cell::Text(_) => f64::NAN,
    };
    let (mut err, mut junctions, mut worst) = (0.0f64, 0usize, String::new());
    for (path, t) in &tables {
        for pair in t.rows.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if num(&a[cols[0]]) != num(&b[cols[0]]) {
                continue;
            }
            junctions += 1;
            for (k, &c) in cols.iter().enumerate().skip(1) {
                let (u, v) = (num(&a[c]), num(&b[c]));
                // φ and θ compare modulo 2π
                let gap = if k == 2 || k == 3 { wrapped_gap(u, v) } else { (u - v).abs() };
                let gap = if gap.is_nan() { f64::INFINITY } else { gap };
                if gap > err {
                    err = gap;
                    worst = format!("{path} at tau {}", num(&a[cols[0]]));
                }
            }
        }
    }
    let tol = 1e-9;
    Ok(CheckReport {
        name: "exported_junction_continuity".into(),
        passed: err <= tol,
        max_error: err,
        tolerance: tol,
        samples: junctions,
        detail: format!("{} files; worst {worst}", tables.len()),
    })
}

fn side_name(side: BoundarySide) -> &'static str {
    match side {
        BoundarySide::Right => "right",
        BoundarySide::Left => "left",
    }
}
