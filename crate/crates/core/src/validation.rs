//! Invariant checks over the whole construction, reported with their
//! worst-case errors. Each check collects every sample before deciding, so
//! one failure never hides another.

use serde::{Deserialize, Serialize};

use crate::control::{
    adjoint_rates, costate_primary, find_switch_time, pursuer_control, switch_function,
    terminal_costate, terminal_evader_control, Costate,
};
use crate::kinematics::{retro_reduced_dynamics, Controls, GameParams, ReducedState};
use crate::scalar::Scalar;
use crate::simulate::{reduced_distance, rk4_integrate};
use crate::synthesis::{
    barrier_emanation, barrier_state, bupl_switch_check, segment_hamiltonian, synthesize,
    synthesize_tributary, Emanation, FamilyTag, Trajectory, TrajectorySegment,
};
use crate::terminal::{bup_radius, rbup_radius, sample_seeds, BoundarySide, Seed, SeedKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub detail: String,
}

impl CheckReport {
    fn from_errors(name: impl Into<String>, max_error: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            passed: max_error <= tolerance && max_error.is_finite(),
            max_error,
            tolerance,
            samples,
            detail: String::new(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn require_samples(mut self, min: usize) -> Self {
        if self.samples < min {
            self.passed = false;
            self.detail = format!("only {} samples, need {min}. {}", self.samples, self.detail);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckReport>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions<T> {
    /// Seed grid used for synthesized-trajectory checks.
    pub n_theta: usize,
    pub n_r: usize,
    /// Anchors per family in the ODE oracle check.
    pub oracle_anchors: usize,
    pub oracle_span: T,
    pub oracle_dt: T,
    /// Offset added to every closed-form `x` in the oracle check; nonzero
    /// only to confirm that the check can fail.
    pub perturbation: T,
}

impl<T: Scalar> Default for ValidationOptions<T> {
    fn default() -> Self {
        Self {
            n_theta: 12,
            n_r: 6,
            oracle_anchors: 100,
            oracle_span: T::two(),
            oracle_dt: T::lit(1e-4),
            perturbation: T::zero(),
        }
    }
}

fn deg<T: Scalar>(v: f64) -> T {
    T::lit(v.to_radians())
}

/// Peak of the right BUP radius and its zeros.
pub fn check_bup_geometry<T: Scalar>(params: &GameParams<T>) -> CheckReport {
    let peak_theta = T::FRAC_PI_2() + params.phi_d;
    let end = T::PI() + T::two() * params.phi_d;
    let mut err = 0.0f64;
    let peak = rbup_radius(peak_theta, params).unwrap_or(T::nan());
    err = err.max((peak - (T::one() + params.phi_d.sin())).abs().as_f64());
    err = err.max(rbup_radius(T::zero(), params).unwrap_or(T::nan()).abs().as_f64());
    err = err.max(rbup_radius(end, params).unwrap_or(T::nan()).abs().as_f64());
    let n = 100_000;
    let mut grid_max = T::neg_infinity();
    for k in 0..=n {
        let th = end * T::lit(k as f64 / n as f64);
        grid_max = grid_max.max(rbup_radius(th, params).unwrap_or(T::nan()));
    }
    // nothing on the grid may exceed the claimed maximum
    err = err.max((grid_max - peak).max(T::zero()).as_f64());
    CheckReport::from_errors("bup_geometry", err, 1e-12, n + 4).with_detail(format!(
        "peak r = {peak} at theta = {peak_theta}"
    ))
}

/// Terminal control laws on a seed grid: `S = −r`, `ν_p = −1`, and the
/// evader partition around `θ_d = φ_d + π/2`. Exact sign comparisons.
pub fn check_terminal_laws<T: Scalar>(params: &GameParams<T>, n_theta: usize, n_r: usize) -> CheckReport {
    let mut wrong = 0usize;
    let mut s_err = 0.0f64;
    let mut n = 0;
    let eus = T::FRAC_PI_2() + params.phi_d;
    let lam = terminal_costate(BoundarySide::Right, params);
    for seed in sample_seeds(params, n_theta, n_r) {
        if seed.side != BoundarySide::Right || seed.kind != SeedKind::UpInterior {
            continue;
        }
        n += 1;
        let s = switch_function(&seed.reduced(params), &lam);
        s_err = s_err.max((s + seed.r).abs().as_f64());
        if pursuer_control(&seed.reduced(params), &lam).value::<T>() != -T::one() {
            wrong += 1;
        }
        let nu_e = terminal_evader_control(seed.theta_d, params).value::<T>();
        let expect = if seed.theta_d < eus { -T::one() } else { T::one() };
        if nu_e != expect {
            wrong += 1;
        }
    }
    if terminal_evader_control(eus, params).value::<T>() != T::zero() {
        wrong += 1;
    }
    CheckReport::from_errors("terminal_laws", s_err.max(wrong as f64), 1e-12, n)
        .with_detail(format!("{wrong} sign mismatches"))
}

/// Finite-difference rates of `λ_θ` at the end: both vanish on the EUS and
/// the first equals `−cos(φ_d − θ_d)` five degrees either side.
pub fn check_eus_condition<T: Scalar>(params: &GameParams<T>) -> Vec<CheckReport> {
    let h = T::lit(1e-4);
    let eus = T::FRAC_PI_2() + params.phi_d;
    let lam0 = terminal_costate(BoundarySide::Right, params);
    let singular = Controls {
        nu_p: -T::one(),
        nu_e: T::zero(),
    };
    let lt = |tau: T| lam0.propagate(eus, singular, tau).lambda_theta;
    let d1 = (lt(h) - lt(-h)) / (T::two() * h);
    let d2 = (lt(h) - T::two() * lt(T::zero()) + lt(-h)) / (h * h);
    let on = CheckReport::from_errors(
        "eus_rates_vanish",
        d1.abs().max(d2.abs()).as_f64(),
        1e-6,
        2,
    );
    let mut err = 0.0f64;
    let h = T::lit(1e-5);
    for off in [-5.0, 5.0] {
        let th = eus + deg::<T>(off);
        let nu_e = terminal_evader_control(th, params).value::<T>();
        let l = |tau: T| costate_primary(tau, th, -T::one(), nu_e, params).lambda_theta;
        let fd = (l(h) - l(-h)) / (T::two() * h);
        err = err.max((fd + (params.phi_d - th).cos()).abs().as_f64());
    }
    let off = CheckReport::from_errors("eus_neighbour_rate", err, 1e-8, 2);
    vec![on, off]
}

/// Emanation classifier over a 0.1° grid, and the side of the cone the
/// barrier state is on at `τ = 1e−3`.
pub fn check_emanation<T: Scalar>(params: &GameParams<T>) -> Vec<CheckReport> {
    let end_deg = (T::PI() + T::two() * params.phi_d).to_degrees().as_f64();
    let split = (T::two() * params.phi_d).to_degrees().as_f64();
    let n = (end_deg * 10.0).round() as usize;
    let (mut class_wrong, mut sign_wrong, mut total) = (0usize, 0usize, 0usize);
    let mut first_bad = None;
    for k in 1..n {
        let th_deg = k as f64 / 10.0;
        if th_deg >= end_deg {
            break;
        }
        total += 1;
        let th = deg::<T>(th_deg);
        let Ok(class) = barrier_emanation(th, params) else {
            class_wrong += 1;
            continue;
        };
        let expect = if th_deg < split {
            Emanation::Inside
        } else {
            Emanation::Outside
        };
        if class != expect {
            class_wrong += 1;
            first_bad.get_or_insert(th_deg);
        }
        let phi = barrier_state(T::lit(1e-3), th, params).map(|c| c.phi.abs());
        let ok = match (class, phi) {
            (Emanation::Inside, Ok(p)) => p < params.phi_d,
            (Emanation::Outside, Ok(p)) => p > params.phi_d,
            _ => false,
        };
        if !ok {
            sign_wrong += 1;
            first_bad.get_or_insert(th_deg);
        }
    }
    let detail = first_bad.map_or(String::new(), |b| format!("first mismatch at {b} deg"));
    vec![
        CheckReport::from_errors("emanation_census", class_wrong as f64, 0.0, total)
            .with_detail(detail.clone()),
        CheckReport::from_errors("emanation_side", sign_wrong as f64, 0.0, total).with_detail(detail),
    ]
}

/// `S̊ = −cos φ_d` and the implied controls on both BUPL apex points.
pub fn check_bupl<T: Scalar>(params: &GameParams<T>) -> CheckReport {
    let mut err = 0.0f64;
    let mut wrong = 0;
    let end = T::PI() + T::two() * params.phi_d;
    for (th, nu_e) in [(T::zero(), -T::one()), (end, T::one())] {
        match bupl_switch_check(th, params) {
            Ok(c) => {
                err = err.max((c.s_rate + params.phi_d.cos()).abs().as_f64());
                if c.nu_p != -T::one() || c.nu_e != nu_e {
                    wrong += 1;
                }
            }
            Err(_) => wrong += 1,
        }
    }
    CheckReport::from_errors("bupl_switch", err.max(wrong as f64), 1e-12, 2)
}

fn continuation<T: Scalar>(seg: &TrajectorySegment<T>, params: &GameParams<T>) -> Option<TrajectorySegment<T>> {
    let family = seg.family.after_switch()?;
    let eval = |t: T| (seg.reduced_at(t), seg.costate_at(t));
    let rec = find_switch_time(&eval, seg.anchor_tau, seg.anchor_tau + params.tau_max, params)?;
    Some(TrajectorySegment {
        family,
        anchor_state: rec.state_at_switch,
        anchor_costate: rec.costate_at_switch,
        anchor_tau: rec.tau_s,
        nu_p: rec.nu_p_after,
        nu_e: seg.nu_e,
        tau_end: rec.tau_s,
        termination: seg.termination,
    })
}

fn eus_seeds<T: Scalar>(params: &GameParams<T>, n: usize) -> Vec<Seed<T>> {
    let per_side = n.div_ceil(2);
    let mut out = Vec::new();
    for side in [BoundarySide::Right, BoundarySide::Left] {
        let th = match side {
            BoundarySide::Right => T::FRAC_PI_2() + params.phi_d,
            BoundarySide::Left => T::TAU() - T::FRAC_PI_2() - params.phi_d,
        };
        let Ok(bound) = bup_radius(side, th, params) else {
            continue;
        };
        for k in 0..per_side {
            let r = bound * (T::lit(k as f64) + T::half()) / T::lit(per_side as f64);
            if let Ok(s) = Seed::up(r, th, side, params) {
                out.push(s);
            }
        }
    }
    out
}

/// Anchored segments of every family, built from seed grids. Continuations
/// are anchored at the first pursuer switch of the parent closed form even
/// when the parent would meet the boundary first, so every family is
/// populated.
pub fn family_anchors<T: Scalar>(
    params: &GameParams<T>,
    per_family: usize,
) -> Vec<(FamilyTag, Vec<TrajectorySegment<T>>)> {
    let side_grid = ((per_family as f64 / 10.0).ceil() as usize).max(1);
    let mut primary = Vec::new();
    let mut barrier = Vec::new();
    for seed in sample_seeds(params, side_grid * 2, 5) {
        let Ok(t) = synthesize(&seed, params) else {
            continue;
        };
        let first = t.segments[0];
        match first.family {
            FamilyTag::Primary => primary.push(first),
            FamilyTag::BarrierPrimary => barrier.push(first),
            _ => {}
        }
    }
    // barrier anchors need a denser heading grid than one per row
    for seed in sample_seeds(params, per_family, 1) {
        if seed.kind == SeedKind::Bup && barrier.len() < 2 * per_family {
            if let Ok(t) = synthesize(&seed, params) {
                barrier.push(t.segments[0]);
            }
        }
    }
    let mut eus = Vec::new();
    let (mut trib_l, mut trib_r) = (Vec::new(), Vec::new());
    for seed in eus_seeds(params, per_family) {
        let Ok(t) = synthesize(&seed, params) else {
            continue;
        };
        let surface = t.segments[0];
        eus.push(surface);
        let tau_us = surface.tau_end * T::half();
        for nu_e in [-T::one(), T::one()] {
            if let Ok(tr) = synthesize_tributary(&seed, tau_us, nu_e, params) {
                let seg = tr.segments[1];
                match seg.family {
                    FamilyTag::TributaryLeft => trib_l.push(seg),
                    _ => trib_r.push(seg),
                }
            }
        }
    }
    let cont = |v: &[TrajectorySegment<T>]| -> Vec<TrajectorySegment<T>> {
        v.iter().filter_map(|s| continuation(s, params)).collect()
    };
    let post_primary = cont(&primary);
    let post_trib: Vec<_> = cont(&trib_l).into_iter().chain(cont(&trib_r)).collect();
    let post_barrier = cont(&barrier);
    vec![
        (FamilyTag::Primary, primary),
        (FamilyTag::Eus, eus),
        (FamilyTag::TributaryLeft, trib_l),
        (FamilyTag::TributaryRight, trib_r),
        (FamilyTag::PostTSPrimary, post_primary),
        (FamilyTag::PostTSTributary, post_trib),
        (FamilyTag::BarrierPrimary, barrier),
        (FamilyTag::PostTSBarrier, post_barrier),
    ]
}

/// Closed form against RK4 retro integration from the anchor, sampled at
/// every integrator step.
pub fn oracle_deviation<T: Scalar>(seg: &TrajectorySegment<T>, span: T, dt: T, perturbation: T) -> T {
    let y0 = seg.anchor_state.to_reduced().to_array();
    let path = rk4_integrate(
        |y, u| retro_reduced_dynamics(&ReducedState::from_array(*y), u).to_array(),
        y0,
        &[(seg.anchor_tau, seg.controls())],
        seg.anchor_tau,
        seg.anchor_tau + span,
        dt,
    );
    path.iter()
        .map(|(tau, y)| {
            let mut cf = seg.reduced_at(*tau);
            cf.x = cf.x + perturbation;
            reduced_distance(&cf, &ReducedState::from_array(*y))
        })
        .fold(T::zero(), T::max)
}

pub fn check_oracle<T: Scalar>(params: &GameParams<T>, opts: &ValidationOptions<T>) -> Vec<CheckReport> {
    family_anchors(params, opts.oracle_anchors)
        .into_iter()
        .map(|(family, segs)| {
            let err = segs
                .iter()
                .map(|s| oracle_deviation(s, opts.oracle_span, opts.oracle_dt, opts.perturbation).as_f64())
                .fold(0.0, f64::max);
            CheckReport::from_errors(format!("oracle_{}", family.as_str()), err, 1e-6, segs.len())
                .require_samples(opts.oracle_anchors)
        })
        .collect()
}

/// Synthesized trajectories over the grid: plain seeds, barrier seeds and
/// both tributaries of EUS seeds.
pub fn grid_trajectories<T: Scalar>(params: &GameParams<T>, n_theta: usize, n_r: usize) -> Vec<Trajectory<T>> {
    let mut out: Vec<Trajectory<T>> = sample_seeds(params, n_theta, n_r)
        .iter()
        .filter_map(|s| synthesize(s, params).ok())
        .collect();
    for seed in eus_seeds(params, n_r.max(2)) {
        if let Ok(t) = synthesize(&seed, params) {
            let tau_us = t.segments[0].tau_end * T::half();
            out.push(t);
            for nu_e in [-T::one(), T::one()] {
                if let Ok(tr) = synthesize_tributary(&seed, tau_us, nu_e, params) {
                    out.push(tr);
                }
            }
        }
    }
    out
}

/// Pontryagin conditions at 100 samples per segment.
pub fn check_pontryagin<T: Scalar>(trajs: &[Trajectory<T>]) -> Vec<CheckReport> {
    let (mut h_err, mut norm_err, mut adj_err, mut argmax_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut n = 0;
    let fd_h = T::lit(1e-5);
    for t in trajs {
        for seg in &t.segments {
            for k in 0..100 {
                let tau = seg.anchor_tau + seg.duration() * T::lit(k as f64 / 99.0);
                n += 1;
                h_err = h_err.max(segment_hamiltonian(seg, tau, t.multiplier).abs().as_f64());
                let lam = seg.costate_at(tau);
                norm_err = norm_err.max((lam.planar_norm() - T::one()).abs().as_f64());
                let s = seg.reduced_at(tau);
                let up = seg.costate_at(tau + fd_h).to_array();
                let dn = seg.costate_at(tau - fd_h).to_array();
                let exact = adjoint_rates(&s, &lam, seg.controls()).to_array();
                for i in 0..3 {
                    let fd = (up[i] - dn[i]) / (T::two() * fd_h);
                    adj_err = adj_err.max((fd - exact[i]).abs().as_f64());
                }
                argmax_err = argmax_err.max(argmax_violation(&s, &lam, seg).as_f64());
            }
        }
    }
    vec![
        CheckReport::from_errors("hamiltonian_zero", h_err, 1e-8, n),
        CheckReport::from_errors("costate_unit_norm", norm_err, 1e-12, n),
        CheckReport::from_errors("adjoint_fd", adj_err, 1e-6, n),
        CheckReport::from_errors("control_saddle", argmax_err, 1e-9, n),
    ]
}

/// How much the segment's controls lose against the opposite choice: the
/// pursuer's `ν_p S` and the evader's `−ν_e λ_θ` should both be ≥ 0.
fn argmax_violation<T: Scalar>(
    s: &ReducedState<T>,
    lam: &Costate<T>,
    seg: &TrajectorySegment<T>,
) -> T {
    let p = -(seg.nu_p * switch_function(s, lam)).min(T::zero());
    let e = if seg.nu_e == T::zero() {
        // singular arc: λ_θ must stay at zero
        lam.lambda_theta.abs()
    } else {
        -(seg.nu_e * lam.lambda_theta).min(T::zero())
    };
    p.max(e)
}

/// State and costate agreement at every junction.
pub fn check_continuity<T: Scalar>(trajs: &[Trajectory<T>]) -> CheckReport {
    let mut err = 0.0f64;
    let mut n = 0;
    for t in trajs {
        for w in t.segments.windows(2) {
            n += 1;
            let (a, b) = (&w[0], &w[1]);
            err = err.max(reduced_distance(&a.reduced_at(a.tau_end), &b.reduced_at(b.anchor_tau)).as_f64());
            let (la, lb) = (a.costate_at(a.tau_end).to_array(), b.costate_at(b.anchor_tau).to_array());
            for i in 0..3 {
                err = err.max((la[i] - lb[i]).abs().as_f64());
            }
            err = err.max((a.tau_end - b.anchor_tau).abs().as_f64());
        }
    }
    CheckReport::from_errors("junction_continuity", err, 1e-9, n)
}

/// Left seeds synthesized directly against mirrored right-side results.
pub fn check_mirror<T: Scalar>(params: &GameParams<T>, n_theta: usize, n_r: usize) -> CheckReport {
    let mut err = 0.0f64;
    let mut n = 0;
    let mut structure = 0;
    for seed in sample_seeds(params, n_theta, n_r) {
        if seed.side != BoundarySide::Right {
            continue;
        }
        let (Ok(right), Ok(left)) = (synthesize(&seed, params), synthesize(&seed.mirrored(), params)) else {
            structure += 1;
            continue;
        };
        n += 1;
        let right = right.mirrored();
        if right.families() != left.families() || right.emanation != left.emanation {
            structure += 1;
        }
        err = err.max((right.total_tau - left.total_tau).abs().as_f64());
        for k in 0..=50 {
            let tau = left.total_tau * T::lit(k as f64 / 50.0);
            err = err.max(reduced_distance(&right.reduced_at(tau), &left.reduced_at(tau)).as_f64());
            let (a, b) = (right.costate_at(tau).to_array(), left.costate_at(tau).to_array());
            for i in 0..3 {
                err = err.max((a[i] - b[i]).abs().as_f64());
            }
        }
    }
    CheckReport::from_errors("mirror_symmetry", err.max(structure as f64), 1e-9, n)
        .with_detail(format!("{structure} structural mismatches"))
}

/// Every check, in a fixed order.
pub fn run_all<T: Scalar>(params: &GameParams<T>, opts: &ValidationOptions<T>) -> ValidationReport {
    let mut checks = vec![
        check_bup_geometry(params),
        check_terminal_laws(params, 50, 10),
    ];
    checks.extend(check_eus_condition(params));
    checks.extend(check_emanation(params));
    checks.push(check_bupl(params));
    checks.extend(check_oracle(params, opts));
    let trajs = grid_trajectories(params, opts.n_theta, opts.n_r);
    checks.extend(check_pontryagin(&trajs));
    checks.push(check_continuity(&trajs));
    checks.push(check_mirror(params, opts.n_theta, opts.n_r));
    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GameParams<f64> {
        GameParams::from_degrees(40.0).unwrap()
    }

    #[test]
    fn analytic_checks_pass() {
        let p = params();
        assert!(check_bup_geometry(&p).passed);
        assert!(check_terminal_laws(&p, 20, 5).passed);
        assert!(check_bupl(&p).passed);
        for c in check_eus_condition(&p) {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn perturbed_closed_form_is_caught() {
        let p = params();
        let seed = Seed::up(0.5, 2.0, BoundarySide::Right, &p).unwrap();
        let seg = synthesize(&seed, &p).unwrap().segments[0];
        assert!(oracle_deviation(&seg, 1.0, 1e-3, 0.0) < 1e-6);
        assert!(oracle_deviation(&seg, 1.0, 1e-3, 1e-3) >= 1e-3 - 1e-12);
    }

    #[test]
    fn report_flags_short_samples() {
        let r = CheckReport::from_errors("x", 0.0, 1.0, 3).require_samples(5);
        assert!(!r.passed);
    }
}
