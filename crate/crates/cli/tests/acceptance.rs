//! Acceptance criteria, one line each. Runs as a plain binary so the lines
//! show up in `cargo test` output; exits nonzero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use conic_game::kinematics::cylindrical_dynamics;
use conic_game::simulate::{recover_seed_radius, recover_shared_branch};
use conic_game::terminal::classify;
use conic_game::validation::{
    check_bup_geometry, check_bupl, check_continuity, check_emanation, check_eus_condition, check_mirror,
    check_oracle, check_pontryagin, check_terminal_laws, grid_trajectories, CheckReport, ValidationOptions,
};
use conic_game::{run_scenario, BoundarySide, Params, TerminalClass};
use conic_game_cli::commands::cmd_synth;
use conic_game_cli::config::Config;
use conic_game_cli::scenario::ScenarioFile;

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_reports(reports: &[CheckReport], min_samples: usize) -> Outcome {
    let passed = reports.iter().all(|r| r.passed && r.samples >= min_samples);
    let detail = reports
        .iter()
        .map(|r| {
            format!(
                "{}{} err={:.2e}/{:.0e} n={}",
                if r.passed { "" } else { "!" },
                r.name,
                r.max_error,
                r.tolerance,
                r.samples
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { passed, detail }
}

fn params() -> Params {
    Params::from_degrees(40.0).unwrap()
}

fn bup_geometry() -> Outcome {
    from_reports(&[check_bup_geometry(&params())], 0)
}

fn terminal_laws() -> Outcome {
    from_reports(&[check_terminal_laws(&params(), 50, 20)], 1000)
}

fn oracle() -> Outcome {
    from_reports(&check_oracle(&params(), &ValidationOptions::default()), 100)
}

fn pontryagin() -> Outcome {
    let trajs = grid_trajectories(&params(), 12, 6);
    let mut reports = check_pontryagin(&trajs);
    reports.push(check_continuity(&trajs));
    from_reports(&reports, 1)
}

fn eus() -> Outcome {
    from_reports(&check_eus_condition(&params()), 1)
}

fn emanation() -> Outcome {
    from_reports(&check_emanation(&params()), 2599)
}

fn bupl() -> Outcome {
    from_reports(&[check_bupl(&params())], 2)
}

fn load(name: &str) -> ScenarioFile {
    ScenarioFile::load(name).unwrap()
}

fn scenarios() -> Outcome {
    let config = Config::default();
    let mut notes = Vec::new();
    let mut ok = true;
    let mut note = |pass: bool, msg: String| {
        ok &= pass;
        notes.push(format!("{}{msg}", if pass { "" } else { "!" }));
    };

    // the radius searches documented in the scenario files
    let sim3 = load("sim3");
    let sc3 = sim3.to_scenario(&config).unwrap();
    let search = sim3.radius_search.as_ref().unwrap();
    let r3 = recover_seed_radius(
        &sc3.seed,
        search.target_escape_time,
        search.r_bracket[0],
        search.r_bracket[1],
        &sc3.params,
    );
    match r3 {
        Ok(r) => note((r - sim3.r).abs() < 1e-6, format!("sim3 r={r:.9}")),
        Err(e) => note(false, format!("sim3 search: {e}")),
    }
    let (sim4, sim5) = (load("sim4"), load("sim5"));
    let sc4 = sim4.to_scenario(&config).unwrap();
    let s4 = sim4.radius_search.as_ref().unwrap();
    match recover_shared_branch(
        &sc4.seed,
        s4.target_escape_time,
        s4.paired_target_escape_time.unwrap(),
        s4.r_bracket[0],
        s4.r_bracket[1],
        &sc4.params,
    ) {
        Ok((r, tau_us)) => {
            let b4 = sim4.branch.as_ref().unwrap();
            let b5 = sim5.branch.as_ref().unwrap();
            let same = (r - sim4.r).abs() < 1e-6
                && (r - sim5.r).abs() < 1e-6
                && (tau_us - b4.tau_us).abs() < 1e-6
                && (tau_us - b5.tau_us).abs() < 1e-6;
            note(same, format!("sim4/5 r={r:.9} tau_us={tau_us:.9}"));
        }
        Err(e) => note(false, format!("sim4/5 search: {e}")),
    }

    for name in ["sim3", "sim4", "sim5"] {
        let file = load(name);
        let expected = file.expected_escape_time.unwrap();
        let sim = run_scenario(&file.to_scenario(&config).unwrap()).unwrap();
        note(
            sim.escaped && (sim.escape_time - expected).abs() <= 0.02,
            format!("{name} t={:.4} (expected {expected})", sim.escape_time),
        );
    }

    for name in ["sim1", "sim2"] {
        let sc = load(name).to_scenario(&config).unwrap();
        let traj = sc.trajectory().unwrap();
        let sim = run_scenario(&sc).unwrap();
        let end = traj.state_at(0.0);
        let escapable = classify(&end, &sc.params) == TerminalClass::Rup;
        let on_right = traj.hit_side() == Some(BoundarySide::Right);
        // φ still growing as the evader reaches the boundary
        let phi_rate = cylindrical_dynamics(&end, traj.controls_at(0.0)).unwrap().phi;
        note(
            sim.escaped && on_right && escapable && phi_rate > 0.0,
            format!("{name} right exit t={:.4} phi_rate={phi_rate:.3}", sim.escape_time),
        );
    }
    Outcome {
        passed: ok,
        detail: notes.join("; "),
    }
}

fn mirror() -> Outcome {
    from_reports(&[check_mirror(&params(), 10, 9)], 100)
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |dir: &Path| {
        let config = Config {
            output_dir: dir.to_path_buf(),
            ..Config::default()
        };
        cmd_synth(&config).unwrap();
        tree(dir)
    };
    let (ta, tb) = (run(a.path()), run(b.path()));
    let differing = ta.iter().zip(&tb).filter(|(x, y)| x != y).count();
    Outcome {
        passed: ta.len() == tb.len() && differing == 0 && ta.len() > 1,
        detail: format!("{} files, {differing} differ", ta.len()),
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: [Criterion; 10] = [
        ("1 BUP geometry", bup_geometry, Some(secs(1))),
        ("2 terminal control laws", terminal_laws, Some(secs(1))),
        ("3 closed-form/ODE oracle", oracle, Some(secs(120))),
        ("4 Pontryagin properties", pontryagin, Some(secs(60))),
        ("5 EUS necessary condition", eus, None),
        ("6 barrier emanation census", emanation, Some(secs(10))),
        ("7 BUPL switch rate", bupl, None),
        ("8 scenario regression", scenarios, Some(secs(30))),
        ("9 mirror symmetry", mirror, None),
        ("10 synth determinism", determinism, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let t0 = Instant::now();
        let out = run();
        let took = t0.elapsed();
        let in_time = budget.is_none_or(|b| took < b);
        let pass = out.passed && in_time;
        if !pass {
            failed += 1;
        }
        let budget = budget.map_or(String::new(), |b| format!(" budget {}s", b.as_secs()));
        println!(
            "{} criterion {name}: {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
