//! Forward-time replay of synthesized play in the plane, plus the RK4
//! oracle used to cross-check the closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::kinematics::{
    from_reduced, realistic_dynamics, retro_reduced_dynamics, to_reduced, Controls,
    CylindricalState, GameParams, Pose, RealisticState, ReducedState,
};
use crate::scalar::{wrap_pi, Scalar};
use crate::synthesis::{synthesize, synthesize_tributary, Trajectory, TrajectorySegment};
use crate::terminal::{classify, Seed, TerminalClass};

/// Classic fixed-step RK4 under a piecewise-constant control schedule.
///
/// `schedule` lists `(start time, control)` pairs in increasing order; the
/// first entry applies from `t0` on. Steps land on multiples of `dt` from
/// `t0` and are split at every schedule break, so no step straddles a
/// discontinuity. Returns every step endpoint, starting with `(t0, y0)`.
pub fn rk4_integrate<T: Scalar, U: Copy, const N: usize>(
    dynamics: impl Fn(&[T; N], U) -> [T; N],
    y0: [T; N],
    schedule: &[(T, U)],
    t0: T,
    t1: T,
    dt: T,
) -> Vec<(T, [T; N])> {
    assert!(!schedule.is_empty(), "empty control schedule");
    assert!(dt > T::zero(), "dt must be positive");
    let mut out = vec![(t0, y0)];
    let (mut t, mut y) = (t0, y0);
    let mut piece = 0;
    let mut k = 1usize;
    let eps = dt * T::lit(1e-9);
    while t < t1 - eps {
        while piece + 1 < schedule.len() && schedule[piece + 1].0 <= t + eps {
            piece += 1;
        }
        let grid = t0 + dt * T::lit(k as f64);
        let mut next = grid.min(t1);
        if let Some(&(brk, _)) = schedule.get(piece + 1) {
            next = next.min(brk);
        }
        y = rk4_step(&dynamics, &y, schedule[piece].1, next - t);
        t = next;
        if t >= grid - eps {
            k += 1;
        }
        out.push((t, y));
    }
    out
}

fn rk4_step<T: Scalar, U: Copy, const N: usize>(
    f: &impl Fn(&[T; N], U) -> [T; N],
    y: &[T; N],
    u: U,
    h: T,
) -> [T; N] {
    let half = h * T::half();
    let k1 = f(y, u);
    let k2 = f(&std::array::from_fn(|i| y[i] + half * k1[i]), u);
    let k3 = f(&std::array::from_fn(|i| y[i] + half * k2[i]), u);
    let k4 = f(&std::array::from_fn(|i| y[i] + h * k3[i]), u);
    let sixth = h / T::lit(6.0);
    std::array::from_fn(|i| y[i] + sixth * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]))
}

/// Maximum deviation between a segment's closed form and RK4 retro
/// integration from its anchor over `[anchor, anchor + span]`.
pub fn segment_oracle_deviation<T: Scalar>(seg: &TrajectorySegment<T>, span: T, dt: T) -> T {
    if span <= T::zero() {
        return T::zero();
    }
    let u = seg.controls();
    let y0 = seg.anchor_state.to_reduced().to_array();
    let path = rk4_integrate(
        |y, u| retro_reduced_dynamics(&ReducedState::from_array(*y), u).to_array(),
        y0,
        &[(seg.anchor_tau, u)],
        seg.anchor_tau,
        seg.anchor_tau + span,
        dt,
    );
    path.iter()
        .map(|(tau, y)| reduced_distance(&seg.reduced_at(*tau), &ReducedState::from_array(*y)))
        .fold(T::zero(), T::max)
}

/// Sup-norm distance with the heading compared modulo `2π`.
pub fn reduced_distance<T: Scalar>(a: &ReducedState<T>, b: &ReducedState<T>) -> T {
    (a.x - b.x)
        .abs()
        .max((a.y - b.y).abs())
        .max(wrap_pi(a.theta - b.theta).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation<T> {
    pub per_segment: Vec<T>,
    pub max_deviation: T,
}

/// Integrates each segment's retro ODE with its own controls and reports
/// the deviation from the closed forms.
pub fn cross_validate<T: Scalar>(traj: &Trajectory<T>, dt: T) -> CrossValidation<T> {
    let per_segment: Vec<T> = traj
        .segments
        .iter()
        .map(|s| segment_oracle_deviation(s, s.duration(), dt))
        .collect();
    let max_deviation = per_segment.iter().copied().fold(T::zero(), T::max);
    CrossValidation {
        per_segment,
        max_deviation,
    }
}

/// Where a tributary leaves the EUS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EusBranch<T> {
    pub tau_us: T,
    pub nu_e: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub name: String,
    pub description: String,
    pub params: GameParams<T>,
    pub seed: Seed<T>,
    pub branch: Option<EusBranch<T>>,
    pub pursuer_start: Pose<T>,
    pub dt: T,
    pub snapshot_times: Vec<T>,
}

impl<T: Scalar> Scenario<T> {
    /// Pursuer at the origin heading along +y, so the plane initially
    /// coincides with the reduced frame.
    pub fn default_pursuer_start() -> Pose<T> {
        Pose::new(T::zero(), T::zero(), T::FRAC_PI_2())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validated()?;
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(GameError::InvalidParams(format!("dt = {} must be positive", self.dt)));
        }
        Seed::new(
            self.seed.r,
            self.seed.theta_d,
            self.seed.side,
            self.seed.kind,
            &self.params,
        )?;
        Ok(())
    }

    pub fn trajectory(&self) -> Result<Trajectory<T>> {
        self.validate()?;
        match self.branch {
            Some(b) => synthesize_tributary(&self.seed, b.tau_us, b.nu_e, &self.params),
            None => synthesize(&self.seed, &self.params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub time: T,
    pub pursuer: Pose<T>,
    pub evader: Pose<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult<T> {
    pub times: Vec<T>,
    pub pursuer_path: Vec<Pose<T>>,
    pub evader_path: Vec<Pose<T>>,
    pub reduced_path: Vec<ReducedState<T>>,
    pub control_log: Vec<Controls<T>>,
    pub escape_time: T,
    pub escaped: bool,
    /// Largest gap between the reduced state of the integrated poses and
    /// the closed form.
    pub max_replay_deviation: T,
    pub snapshots: Vec<Snapshot<T>>,
}

impl<T: Scalar> SimResult<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_reduced(&self) -> Option<ReducedState<T>> {
        self.reduced_path.last().copied()
    }
}

/// Forward-time control schedule of a trajectory.
pub fn forward_schedule<T: Scalar>(traj: &Trajectory<T>) -> Vec<(T, Controls<T>)> {
    let total = traj.total_tau;
    traj.segments
        .iter()
        .rev()
        .map(|s| (total - s.tau_end, s.controls()))
        .collect()
}

/// Whether the configuration lets the evader leave the cone right away.
pub fn is_escape_state<T: Scalar>(c: &CylindricalState<T>, params: &GameParams<T>) -> bool {
    c.phi.abs() >= params.phi_d - params.tol_event
        && matches!(
            classify(c, params),
            TerminalClass::Rup | TerminalClass::Lup | TerminalClass::BothUpl
        )
}

/// Plays a synthesized trajectory forward in the plane.
///
/// Both cars are integrated with RK4 under the reversed control schedule;
/// the reported evader path is the closed form placed relative to the
/// integrated pursuer, and the integrated evader is used only to measure
/// the replay deviation.
pub fn replay<T: Scalar>(
    traj: &Trajectory<T>,
    pursuer_start: Pose<T>,
    dt: T,
    params: &GameParams<T>,
    snapshot_times: &[T],
) -> SimResult<T> {
    let total = traj.total_tau;
    let start = from_reduced(&traj.reduced_at(total), pursuer_start);
    let schedule = forward_schedule(traj);
    let path = rk4_integrate(
        |y, u| realistic_dynamics(&RealisticState::from_array(*y), u).to_array(),
        start.to_array(),
        &schedule,
        T::zero(),
        total,
        dt,
    );
    let mut res = SimResult {
        times: Vec::with_capacity(path.len()),
        pursuer_path: Vec::with_capacity(path.len()),
        evader_path: Vec::with_capacity(path.len()),
        reduced_path: Vec::with_capacity(path.len()),
        control_log: Vec::with_capacity(path.len()),
        escape_time: total,
        escaped: false,
        max_replay_deviation: T::zero(),
        snapshots: Vec::new(),
    };
    for (t, y) in &path {
        let integrated = RealisticState::from_array(*y);
        let pursuer = Pose::new(integrated.pursuer.x, integrated.pursuer.y, integrated.pursuer.theta);
        let tau = (total - *t).max(T::zero());
        let closed = traj.reduced_at(tau);
        let dev = reduced_distance(&to_reduced(&integrated), &closed);
        res.max_replay_deviation = res.max_replay_deviation.max(dev);
        res.times.push(*t);
        res.pursuer_path.push(pursuer);
        res.evader_path.push(from_reduced(&closed, pursuer).evader);
        res.reduced_path.push(ReducedState::new(closed.x, closed.y, closed.theta));
        res.control_log.push(traj.controls_at(tau));
    }
    res.escaped = is_escape_state(&traj.state_at(T::zero()), params);
    for &ts in snapshot_times {
        if ts < T::zero() || ts > total {
            continue;
        }
        let idx = res
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (*a.1 - ts)
                    .abs()
                    .partial_cmp(&(*b.1 - ts).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map_or(0, |(i, _)| i);
        res.snapshots.push(Snapshot {
            time: res.times[idx],
            pursuer: res.pursuer_path[idx],
            evader: res.evader_path[idx],
        });
    }
    res
}

pub fn run_scenario<T: Scalar>(sc: &Scenario<T>) -> Result<SimResult<T>> {
    let traj = sc.trajectory()?;
    Ok(replay(&traj, sc.pursuer_start, sc.dt, &sc.params, &sc.snapshot_times))
}

/// Bisection for `f(x) = target` on a bracket where `f − target` changes
/// sign.
pub fn solve_monotone<T: Scalar>(
    mut f: impl FnMut(T) -> Result<T>,
    target: T,
    mut lo: T,
    mut hi: T,
    tol: T,
) -> Result<T> {
    let flo = f(lo)? - target;
    let fhi = f(hi)? - target;
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if (flo > T::zero()) == (fhi > T::zero()) {
        return Err(GameError::Search(format!(
            "target {target} not bracketed by [{lo}, {hi}] (values {}, {})",
            flo + target,
            fhi + target
        )));
    }
    let rising = fhi > flo;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) * T::half();
        let v = f(mid)? - target;
        if (v > T::zero()) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo + (hi - lo) * T::half())
}

/// Seed radius on the given heading whose optimal trajectory lasts
/// `target_time`.
pub fn recover_seed_radius<T: Scalar>(
    template: &Seed<T>,
    target_time: T,
    r_lo: T,
    r_hi: T,
    params: &GameParams<T>,
) -> Result<T> {
    solve_monotone(
        |r| {
            let seed = Seed::up(r, template.theta_d, template.side, params)?;
            Ok(synthesize(&seed, params)?.total_tau)
        },
        target_time,
        r_lo,
        r_hi,
        params.tol_event,
    )
}

/// Branch retro-time on the EUS from `seed` whose tributary with `ν_e`
/// lasts `target_time` in total.
pub fn recover_branch_time<T: Scalar>(
    seed: &Seed<T>,
    nu_e: T,
    target_time: T,
    params: &GameParams<T>,
) -> Result<T> {
    let surface_end = synthesize(seed, params)?.segments[0].tau_end;
    let lo = params.scan_step;
    solve_monotone(
        |tau_us| Ok(synthesize_tributary(seed, tau_us, nu_e, params)?.total_tau),
        target_time,
        lo,
        surface_end,
        params.tol_event,
    )
}

/// Shared EUS branch point `(r, τ_US)` whose `ν_e = −1` tributary lasts
/// `time_minus` and whose `ν_e = +1` tributary lasts `time_plus`.
///
/// Outer bisection on the seed radius; for each radius the branch time is
/// fixed by the `ν_e = −1` target.
pub fn recover_shared_branch<T: Scalar>(
    template: &Seed<T>,
    time_minus: T,
    time_plus: T,
    r_lo: T,
    r_hi: T,
    params: &GameParams<T>,
) -> Result<(T, T)> {
    let branch = |r: T| -> Result<(Seed<T>, T)> {
        let seed = Seed::up(r, template.theta_d, template.side, params)?;
        let tau_us = recover_branch_time(&seed, -T::one(), time_minus, params)?;
        Ok((seed, tau_us))
    };
    let r = solve_monotone(
        |r| {
            let (seed, tau_us) = branch(r)?;
            Ok(synthesize_tributary(&seed, tau_us, T::one(), params)?.total_tau)
        },
        time_plus,
        r_lo,
        r_hi,
        params.tol_event,
    )?;
    let (_, tau_us) = branch(r)?;
    Ok((r, tau_us))
}
