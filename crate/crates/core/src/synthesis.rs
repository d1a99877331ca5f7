//! Retro-time trajectory families and their stitching into trajectories.
//!
//! Every family shares one closed form: under constant controls the reduced
//! state starting from an anchor `(r0, φ0, θ0)` is
//!
//! ```text
//! x = (cos ν_p s − 1)/ν_p + r0 sin(φ0 − ν_p s) + (cos θ − cos(θ0 − ν_p s))/ν_e
//! y = sin(ν_p s)/ν_p + r0 cos(φ0 − ν_p s) − (2/ν_e) cos(θ0 + (ν_e/2 − ν_p)s) sin(ν_e s/2)
//! θ = θ0 + (ν_e − ν_p)s
//! ```
//!
//! with `s` the retro-time since the anchor. When `ν_e = 0` the evader terms
//! degenerate into the secular `−s sin(θ0 − ν_p s)`, `−s cos(θ0 − ν_p s)`.
//! The named families differ only in where they are anchored.

use serde::{Deserialize, Serialize};

use crate::control::{
    find_switch_time, hamiltonian, kind_hamiltonian, side_terminal_evader_control,
    switch_rate, terminal_costate, terminal_evader_control, terminal_pursuer_control,
    transversality_multiplier, Costate, SwitchRecord,
};
use crate::error::{GameError, Result};
use crate::kinematics::{to_cylindrical, Controls, CylindricalState, GameParams, ReducedState};
use crate::roots::{first_nonpositive, Crossing};
use crate::scalar::Scalar;
use crate::terminal::{rbup_radius, BoundarySide, Seed, SeedKind};

/// Segments per trajectory before synthesis gives up on further switches.
const MAX_SEGMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    Primary,
    #[serde(rename = "EUS")]
    Eus,
    /// Tributary with `ν_e = +1` in the right-side orientation.
    TributaryLeft,
    /// Tributary with `ν_e = −1` in the right-side orientation.
    TributaryRight,
    PostTSPrimary,
    PostTSTributary,
    BarrierPrimary,
    PostTSBarrier,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 8] = [
        FamilyTag::Primary,
        FamilyTag::Eus,
        FamilyTag::TributaryLeft,
        FamilyTag::TributaryRight,
        FamilyTag::PostTSPrimary,
        FamilyTag::PostTSTributary,
        FamilyTag::BarrierPrimary,
        FamilyTag::PostTSBarrier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyTag::Primary => "primary",
            FamilyTag::Eus => "eus",
            FamilyTag::TributaryLeft => "tributary_left",
            FamilyTag::TributaryRight => "tributary_right",
            FamilyTag::PostTSPrimary => "post_ts_primary",
            FamilyTag::PostTSTributary => "post_ts_tributary",
            FamilyTag::BarrierPrimary => "barrier_primary",
            FamilyTag::PostTSBarrier => "post_ts_barrier",
        }
    }

    /// Family continuing after a pursuer switch; `None` for the EUS.
    pub fn after_switch(self) -> Option<FamilyTag> {
        match self {
            FamilyTag::Primary | FamilyTag::PostTSPrimary => Some(FamilyTag::PostTSPrimary),
            FamilyTag::TributaryLeft | FamilyTag::TributaryRight | FamilyTag::PostTSTributary => {
                Some(FamilyTag::PostTSTributary)
            }
            FamilyTag::BarrierPrimary | FamilyTag::PostTSBarrier => Some(FamilyTag::PostTSBarrier),
            FamilyTag::Eus => None,
        }
    }

    pub fn is_barrier(self) -> bool {
        matches!(self, FamilyTag::BarrierPrimary | FamilyTag::PostTSBarrier)
    }
}

impl std::fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    BoundaryHit,
    PursuerSwitch,
    HorizonReached,
    /// `λ_θ` changed sign (or, on the EUS, the evader left the surface).
    EvaderSwitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Emanation {
    Inside,
    Outside,
}

/// Reduced state reached from `anchor` after retro-time `s` with constant
/// bang-bang pursuer control. `θ` is left unwrapped.
pub fn flow_state<T: Scalar>(anchor: &CylindricalState<T>, u: Controls<T>, s: T) -> ReducedState<T> {
    let (r0, phi0, th0) = (anchor.r, anchor.phi, anchor.theta);
    let (np, ne) = (u.nu_p, u.nu_e);
    let kp = T::one() / np;
    let rot = phi0 - np * s;
    let back = th0 - np * s;
    let theta = th0 + (ne - np) * s;
    let x = kp * ((np * s).cos() - T::one()) + r0 * rot.sin();
    let y = kp * (np * s).sin() + r0 * rot.cos();
    let (ex, ey) = if ne == T::zero() {
        (-s * back.sin(), -s * back.cos())
    } else {
        let ke = T::one() / ne;
        let mid = th0 + (ne * T::half() - np) * s;
        (
            ke * (theta.cos() - back.cos()),
            -T::two() * ke * mid.cos() * (ne * s * T::half()).sin(),
        )
    };
    ReducedState::from_array([x + ex, y + ey, theta])
}

/// Piece of a trajectory with constant controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment<T> {
    pub family: FamilyTag,
    pub anchor_state: CylindricalState<T>,
    pub anchor_costate: Costate<T>,
    pub anchor_tau: T,
    pub nu_p: T,
    pub nu_e: T,
    pub tau_end: T,
    pub termination: Termination,
}

impl<T: Scalar> TrajectorySegment<T> {
    pub fn controls(&self) -> Controls<T> {
        Controls {
            nu_p: self.nu_p,
            nu_e: self.nu_e,
        }
    }

    pub fn duration(&self) -> T {
        self.tau_end - self.anchor_tau
    }

    pub fn contains(&self, tau: T) -> bool {
        tau >= self.anchor_tau && tau <= self.tau_end
    }

    /// Closed-form reduced state; valid for any `τ`, not only inside the
    /// segment's span.
    pub fn reduced_at(&self, tau: T) -> ReducedState<T> {
        let s = tau - self.anchor_tau;
        if s == T::zero() {
            return self.anchor_state.to_reduced();
        }
        flow_state(&self.anchor_state, self.controls(), s)
    }

    pub fn state_at(&self, tau: T) -> CylindricalState<T> {
        if tau == self.anchor_tau {
            return self.anchor_state;
        }
        to_cylindrical(self.reduced_at(tau))
    }

    pub fn costate_at(&self, tau: T) -> Costate<T> {
        self.anchor_costate
            .propagate(self.anchor_state.theta, self.controls(), tau - self.anchor_tau)
    }

    pub fn mirrored(&self) -> Self {
        let a = self.anchor_state;
        Self {
            anchor_state: CylindricalState::new(a.r, -a.phi, -a.theta),
            anchor_costate: self.anchor_costate.mirrored(),
            nu_p: -self.nu_p,
            nu_e: -self.nu_e,
            ..*self
        }
    }
}

/// One sample of a trajectory, as exported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample<T> {
    pub tau: T,
    pub state: CylindricalState<T>,
    pub reduced: ReducedState<T>,
    pub costate: Costate<T>,
    pub nu_p: T,
    pub nu_e: T,
    pub family: FamilyTag,
}

/// Retro-time trajectory built from a terminal seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub seed: Seed<T>,
    pub segments: Vec<TrajectorySegment<T>>,
    pub total_tau: T,
    /// Emanation class, for barrier trajectories only.
    pub emanation: Option<Emanation>,
    /// Scale turning the unit costate into the adjoint with `H = 0`;
    /// `None` on the barrier where `λ·f = 0`.
    pub multiplier: Option<T>,
}

impl<T: Scalar> Trajectory<T> {
    fn from_segments(
        seed: Seed<T>,
        segments: Vec<TrajectorySegment<T>>,
        emanation: Option<Emanation>,
        multiplier: Option<T>,
    ) -> Self {
        let total_tau = segments.last().map_or(T::zero(), |s| s.tau_end);
        Self {
            seed,
            segments,
            total_tau,
            emanation,
            multiplier,
        }
    }

    pub fn segment_at(&self, tau: T) -> &TrajectorySegment<T> {
        self.segments
            .iter()
            .find(|s| tau <= s.tau_end)
            .unwrap_or_else(|| self.segments.last().expect("trajectory has segments"))
    }

    pub fn reduced_at(&self, tau: T) -> ReducedState<T> {
        self.segment_at(tau).reduced_at(tau)
    }

    pub fn state_at(&self, tau: T) -> CylindricalState<T> {
        self.segment_at(tau).state_at(tau)
    }

    pub fn costate_at(&self, tau: T) -> Costate<T> {
        self.segment_at(tau).costate_at(tau)
    }

    pub fn controls_at(&self, tau: T) -> Controls<T> {
        self.segment_at(tau).controls()
    }

    /// `H` of the scaled adjoint, or `λ·f` on barrier trajectories.
    pub fn hamiltonian_at(&self, tau: T) -> T {
        let seg = self.segment_at(tau);
        segment_hamiltonian(seg, tau, self.multiplier)
    }

    /// Final configuration in retro-time, i.e. the forward-time start.
    pub fn final_state(&self) -> CylindricalState<T> {
        self.state_at(self.total_tau)
    }

    pub fn termination(&self) -> Termination {
        self.segments
            .last()
            .map_or(Termination::HorizonReached, |s| s.termination)
    }

    /// Boundary met at the end in retro-time, if any.
    pub fn hit_side(&self) -> Option<BoundarySide> {
        if self.termination() != Termination::BoundaryHit {
            return None;
        }
        let x = self.reduced_at(self.total_tau).x;
        Some(if x > T::zero() {
            BoundarySide::Right
        } else {
            BoundarySide::Left
        })
    }

    pub fn families(&self) -> Vec<FamilyTag> {
        self.segments.iter().map(|s| s.family).collect()
    }

    /// Samples every `step` inside each segment, with both endpoints of each
    /// segment included (junctions therefore appear twice).
    pub fn samples(&self, step: T) -> Vec<TrajectorySample<T>> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let n = (seg.duration() / step).ceil().to_usize().unwrap_or(0).max(1);
            for k in 0..=n {
                let tau = if k == n {
                    seg.tau_end
                } else {
                    seg.anchor_tau + step * T::lit(k as f64)
                };
                if k > 0 && k < n && tau >= seg.tau_end {
                    continue;
                }
                let reduced = seg.reduced_at(tau);
                out.push(TrajectorySample {
                    tau,
                    state: seg.state_at(tau),
                    reduced: ReducedState::new(reduced.x, reduced.y, reduced.theta),
                    costate: seg.costate_at(tau),
                    nu_p: seg.nu_p,
                    nu_e: seg.nu_e,
                    family: seg.family,
                });
                if seg.duration() == T::zero() {
                    break;
                }
            }
        }
        out
    }

    /// Image under the reflection across the pursuer's heading axis.
    pub fn mirrored(&self) -> Self {
        Self {
            seed: self.seed.mirrored(),
            segments: self.segments.iter().map(|s| s.mirrored()).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn segment_hamiltonian<T: Scalar>(
    seg: &TrajectorySegment<T>,
    tau: T,
    multiplier: Option<T>,
) -> T {
    let s = seg.reduced_at(tau);
    let lam = seg.costate_at(tau);
    match multiplier {
        Some(mu) => hamiltonian(&s, &lam.scaled(mu), seg.controls()),
        None => kind_hamiltonian(&s, &lam, seg.controls()),
    }
}

/// Primary family from a seed; `(r, φ_d, θ_d)` at `τ = 0`.
pub fn primary_state<T: Scalar>(
    tau: T,
    seed: &Seed<T>,
    nu_p: T,
    nu_e: T,
    params: &GameParams<T>,
) -> CylindricalState<T> {
    let anchor = seed.cylindrical(params);
    if tau == T::zero() {
        return anchor;
    }
    to_cylindrical(flow_state(&anchor, Controls { nu_p, nu_e }, tau))
}

/// Evader's universal surface: the primary form with `ν_e = 0`.
pub fn eus_state<T: Scalar>(
    tau: T,
    seed: &Seed<T>,
    nu_p: T,
    params: &GameParams<T>,
) -> CylindricalState<T> {
    primary_state(tau, seed, nu_p, T::zero(), params)
}

/// Point on the EUS where a tributary branches off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EusPoint<T> {
    pub state: CylindricalState<T>,
    pub tau_us: T,
}

fn require_from<T: Scalar>(tau: T, anchor: T) -> Result<()> {
    if tau < anchor {
        Err(GameError::BeforeAnchor {
            tau: tau.as_f64(),
            anchor: anchor.as_f64(),
        })
    } else {
        Ok(())
    }
}

fn require_bang<T: Scalar>(what: &'static str, v: T) -> Result<()> {
    if v.abs() == T::one() {
        Ok(())
    } else {
        Err(GameError::Domain {
            what,
            value: v.as_f64(),
            lo: -1.0,
            hi: 1.0,
        })
    }
}

/// Tributary leaving the EUS at `point` with evader control `ν_e = ±1`.
pub fn tributary_state<T: Scalar>(
    tau: T,
    point: &EusPoint<T>,
    nu_p: T,
    nu_e: T,
    _params: &GameParams<T>,
) -> Result<CylindricalState<T>> {
    require_from(tau, point.tau_us)?;
    require_bang("tributary evader control", nu_e)?;
    let s = tau - point.tau_us;
    if s == T::zero() {
        return Ok(point.state);
    }
    Ok(to_cylindrical(flow_state(&point.state, Controls { nu_p, nu_e }, s)))
}

/// Continuation from a pursuer switch, with the post-switch pursuer control.
pub fn post_ts_state<T: Scalar>(
    tau: T,
    switch: &SwitchRecord<T>,
    nu_e: T,
    _params: &GameParams<T>,
) -> Result<CylindricalState<T>> {
    require_from(tau, switch.tau_s)?;
    let s = tau - switch.tau_s;
    if s == T::zero() {
        return Ok(switch.state_at_switch);
    }
    let u = Controls {
        nu_p: switch.nu_p_after,
        nu_e,
    };
    Ok(to_cylindrical(flow_state(&switch.state_at_switch, u, s)))
}

fn require_open_rbup<T: Scalar>(theta: T, params: &GameParams<T>) -> Result<()> {
    let hi = T::PI() + T::two() * params.phi_d;
    if theta > T::zero() && theta < hi {
        Ok(())
    } else {
        Err(GameError::Domain {
            what: "barrier theta",
            value: theta.as_f64(),
            lo: 0.0,
            hi: hi.as_f64(),
        })
    }
}

fn barrier_controls<T: Scalar>(theta: T, params: &GameParams<T>) -> Controls<T> {
    Controls {
        nu_p: -T::one(),
        nu_e: terminal_evader_control(theta, params).value(),
    }
}

/// Barrier trajectory seeded on the right BUP at `θ_RB`.
pub fn barrier_state<T: Scalar>(
    tau: T,
    theta_rb: T,
    params: &GameParams<T>,
) -> Result<CylindricalState<T>> {
    require_open_rbup(theta_rb, params)?;
    let r = rbup_radius(theta_rb, params)?;
    let anchor = CylindricalState {
        r,
        phi: params.phi_d,
        theta: theta_rb,
    };
    if tau == T::zero() {
        return Ok(anchor);
    }
    Ok(to_cylindrical(flow_state(&anchor, barrier_controls(theta_rb, params), tau)))
}

/// Second retro-time derivative of `φ` at a right BUP seed; the barrier
/// enters the playing space when negative.
pub fn barrier_phi_curvature<T: Scalar>(theta_rb: T, params: &GameParams<T>) -> Result<T> {
    require_open_rbup(theta_rb, params)?;
    let r = rbup_radius(theta_rb, params)?;
    let u = barrier_controls(theta_rb, params);
    let theta_rate = u.nu_e - u.nu_p;
    let pd = params.phi_d;
    Ok(-((T::one() + theta_rate) * (theta_rb - pd).cos() - pd.cos()) / r)
}

/// Whether the barrier leaving the right BUP at `θ_RB` enters the cone.
pub fn barrier_emanation<T: Scalar>(theta_rb: T, params: &GameParams<T>) -> Result<Emanation> {
    let c = barrier_phi_curvature(theta_rb, params)?;
    Ok(if c < -params.tol_event {
        Emanation::Inside
    } else {
        Emanation::Outside
    })
}

/// Switch-function rate at a right BUPL apex point and the controls it
/// implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuplCheck<T> {
    pub s_rate: T,
    pub nu_p: T,
    pub nu_e: T,
}

/// `S̊` at the apex for `θ ∈ {0, π + 2φ_d}`, where `S` itself vanishes.
pub fn bupl_switch_check<T: Scalar>(theta: T, params: &GameParams<T>) -> Result<BuplCheck<T>> {
    let tol = params.tol_event;
    let end = T::PI() + T::two() * params.phi_d;
    let theta = crate::scalar::wrap_two_pi(theta);
    let theta = if theta < tol || theta > T::TAU() - tol {
        T::zero()
    } else if (theta - end).abs() < tol {
        end
    } else {
        return Err(GameError::Domain {
            what: "BUPL theta",
            value: theta.as_f64(),
            lo: 0.0,
            hi: end.as_f64(),
        });
    };
    let apex = ReducedState::from_array([T::zero(), T::zero(), theta]);
    let lam = terminal_costate(BoundarySide::Right, params);
    let nu_e = terminal_evader_control(theta, params).value();
    // S̊ does not depend on ν_p here; evaluate with the terminal pursuer reply
    let s_rate = switch_rate(&apex, &lam, Controls { nu_p: -T::one(), nu_e });
    Ok(BuplCheck {
        s_rate,
        nu_p: crate::scalar::sgn(s_rate),
        nu_e,
    })
}

/// Cone margin `y sin φ_d − |x| cos φ_d`: positive strictly inside.
pub fn cone_margin<T: Scalar>(s: &ReducedState<T>, params: &GameParams<T>) -> T {
    let (sf, cf) = params.phi_d.sin_cos();
    s.y * sf - s.x.abs() * cf
}

/// First retro-time after `τ_start + lead` where the state leaves the
/// interior of the cone.
pub fn detect_boundary_hit<T: Scalar>(
    eval: impl Fn(T) -> ReducedState<T>,
    tau_start: T,
    tau_stop: T,
    lead: T,
    params: &GameParams<T>,
) -> Crossing<T> {
    first_nonpositive(
        |t| cone_margin(&eval(t), params),
        tau_start,
        tau_stop,
        params.scan_step,
        lead,
    )
}

/// Runs one constant-control segment from its anchor to the first event.
fn advance<T: Scalar>(
    family: FamilyTag,
    anchor: CylindricalState<T>,
    costate: Costate<T>,
    tau0: T,
    u: Controls<T>,
    boundary_lead: T,
    params: &GameParams<T>,
) -> TrajectorySegment<T> {
    let mut seg = TrajectorySegment {
        family,
        anchor_state: anchor,
        anchor_costate: costate,
        anchor_tau: tau0,
        nu_p: u.nu_p,
        nu_e: u.nu_e,
        tau_end: params.tau_max.max(tau0),
        termination: Termination::HorizonReached,
    };
    match detect_boundary_hit(|t| seg.reduced_at(t), tau0, seg.tau_end, boundary_lead, params) {
        Crossing::At(t) | Crossing::Immediate(t) => {
            seg.tau_end = t;
            seg.termination = Termination::BoundaryHit;
        }
        Crossing::None => {}
    }
    let eval = |t: T| (seg.reduced_at(t), seg.costate_at(t));
    // ties within tol_event go to the boundary
    let cutoff = if seg.termination == Termination::BoundaryHit {
        seg.tau_end - params.tol_event
    } else {
        seg.tau_end
    };
    let mut end = seg.tau_end;
    let mut term = seg.termination;
    if let Some(rec) = find_switch_time(&eval, tau0, cutoff, params) {
        end = rec.tau_s;
        term = Termination::PursuerSwitch;
    }
    if u.nu_e != T::zero() {
        let lt = |t: T| u.nu_e * seg.costate_at(t).lambda_theta;
        let stop = if term == Termination::BoundaryHit { cutoff } else { end };
        if let Crossing::At(t) = first_nonpositive(lt, tau0, stop, params.scan_step, params.scan_step) {
            if t < end {
                end = t;
                term = Termination::EvaderSwitch;
            }
        }
    }
    seg.tau_end = end;
    seg.termination = term;
    seg
}

/// Extends `segments` through pursuer switches until another event ends
/// the trajectory.
fn continue_through_switches<T: Scalar>(
    segments: &mut Vec<TrajectorySegment<T>>,
    params: &GameParams<T>,
) {
    while segments.len() < MAX_SEGMENTS {
        let last = *segments.last().expect("at least one segment");
        if last.termination != Termination::PursuerSwitch {
            return;
        }
        let Some(family) = last.family.after_switch() else {
            return;
        };
        let u = Controls {
            nu_p: -last.nu_p,
            nu_e: last.nu_e,
        };
        segments.push(advance(
            family,
            last.state_at(last.tau_end),
            last.costate_at(last.tau_end),
            last.tau_end,
            u,
            params.tol_event,
            params,
        ));
    }
}

/// Terminal controls and costate at a seed.
pub fn terminal_setup<T: Scalar>(
    seed: &Seed<T>,
    params: &GameParams<T>,
) -> (Controls<T>, Costate<T>) {
    let s = seed.reduced(params);
    let u = Controls {
        nu_p: terminal_pursuer_control(&s, seed.side, params).value(),
        nu_e: side_terminal_evader_control(seed.side, seed.theta_d, params).value(),
    };
    (u, terminal_costate(seed.side, params))
}

/// Builds the optimal trajectory reaching `seed`. BUP seeds are routed to
/// [`synthesize_barrier`].
pub fn synthesize<T: Scalar>(seed: &Seed<T>, params: &GameParams<T>) -> Result<Trajectory<T>> {
    if seed.kind == SeedKind::Bup {
        return synthesize_barrier(seed, params);
    }
    let (u, lam) = terminal_setup(seed, params);
    if u.nu_p == T::zero() {
        return Err(GameError::DegenerateState { r: seed.r.as_f64() });
    }
    let family = if u.nu_e == T::zero() {
        FamilyTag::Eus
    } else {
        FamilyTag::Primary
    };
    let anchor = seed.cylindrical(params);
    let multiplier = transversality_multiplier(&anchor.to_reduced(), &lam, u);
    let mut segments = vec![advance(family, anchor, lam, T::zero(), u, params.tol_event, params)];
    continue_through_switches(&mut segments, params);
    Ok(Trajectory::from_segments(*seed, segments, None, multiplier))
}

/// Tributary family tag for an evader control, given the seed's side.
pub fn tributary_tag<T: Scalar>(side: BoundarySide, nu_e: T) -> FamilyTag {
    if nu_e * side.sign::<T>() > T::zero() {
        FamilyTag::TributaryLeft
    } else {
        FamilyTag::TributaryRight
    }
}

/// Trajectory that follows the EUS from `seed` up to `τ_US` and then leaves
/// it along the tributary with evader control `ν_e`.
pub fn synthesize_tributary<T: Scalar>(
    seed: &Seed<T>,
    tau_us: T,
    nu_e: T,
    params: &GameParams<T>,
) -> Result<Trajectory<T>> {
    require_bang("tributary evader control", nu_e)?;
    let eus = synthesize(seed, params)?;
    let first = eus.segments[0];
    if first.family != FamilyTag::Eus {
        return Err(GameError::InvalidParams(format!(
            "seed at theta_d = {} is not on the evader's universal surface",
            seed.theta_d
        )));
    }
    if !(tau_us > T::zero() && tau_us <= first.tau_end) {
        return Err(GameError::Domain {
            what: "branch retro-time",
            value: tau_us.as_f64(),
            lo: 0.0,
            hi: first.tau_end.as_f64(),
        });
    }
    let surface = TrajectorySegment {
        tau_end: tau_us,
        termination: Termination::EvaderSwitch,
        ..first
    };
    let u = Controls {
        nu_p: first.nu_p,
        nu_e,
    };
    let mut segments = vec![
        surface,
        advance(
            tributary_tag(seed.side, nu_e),
            surface.state_at(tau_us),
            surface.costate_at(tau_us),
            tau_us,
            u,
            params.tol_event,
            params,
        ),
    ];
    continue_through_switches(&mut segments, params);
    Ok(Trajectory::from_segments(*seed, segments, None, eus.multiplier))
}

/// The two tributaries branching off the EUS at `τ_US`: `ν_e = −1` first,
/// then `ν_e = +1`.
pub fn eus_branches<T: Scalar>(
    seed: &Seed<T>,
    tau_us: T,
    params: &GameParams<T>,
) -> Result<[Trajectory<T>; 2]> {
    Ok([
        synthesize_tributary(seed, tau_us, -T::one(), params)?,
        synthesize_tributary(seed, tau_us, T::one(), params)?,
    ])
}

/// Barrier trajectory from a BUP seed. Seeds whose barrier leaves the cone
/// give a stub truncated where the exit is detected.
pub fn synthesize_barrier<T: Scalar>(seed: &Seed<T>, params: &GameParams<T>) -> Result<Trajectory<T>> {
    let right_theta = match seed.side {
        BoundarySide::Right => seed.theta_d,
        BoundarySide::Left => crate::scalar::wrap_two_pi(-seed.theta_d),
    };
    let emanation = barrier_emanation(right_theta, params)?;
    let r = crate::terminal::bup_radius(seed.side, seed.theta_d, params)?;
    let seed = Seed {
        r,
        kind: SeedKind::Bup,
        ..*seed
    };
    let (u, lam) = terminal_setup(&seed, params);
    let anchor = seed.cylindrical(params);
    // φ̊ = 0 at the BUP, so the margin is second order in τ: probe one scan
    // step out instead of at tol_event
    let mut segments = vec![advance(
        FamilyTag::BarrierPrimary,
        anchor,
        lam,
        T::zero(),
        u,
        params.scan_step,
        params,
    )];
    if emanation == Emanation::Inside {
        continue_through_switches(&mut segments, params);
    }
    Ok(Trajectory::from_segments(seed, segments, Some(emanation), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{adjoint_rates, switch_function};
    use crate::kinematics::retro_reduced_dynamics;
    use crate::terminal::sample_seeds;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params() -> GameParams<f64> {
        GameParams::from_degrees(40.0).unwrap()
    }

    fn deg(v: f64) -> f64 {
        v.to_radians()
    }

    fn rk4(s0: ReducedState<f64>, u: Controls<f64>, t: f64, dt: f64) -> ReducedState<f64> {
        let n = (t / dt).round() as usize;
        let f = |a: [f64; 3]| retro_reduced_dynamics(&ReducedState::from_array(a), u).to_array();
        let mut y = s0.to_array();
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(std::array::from_fn(|i| y[i] + 0.5 * dt * k1[i]));
            let k3 = f(std::array::from_fn(|i| y[i] + 0.5 * dt * k2[i]));
            let k4 = f(std::array::from_fn(|i| y[i] + dt * k3[i]));
            y = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        ReducedState::from_array(y)
    }

    fn dist(a: ReducedState<f64>, b: ReducedState<f64>) -> f64 {
        let dth = crate::scalar::wrap_pi(a.theta - b.theta);
        (a.x - b.x).abs().max((a.y - b.y).abs()).max(dth.abs())
    }

    #[test]
    fn flow_matches_rk4_for_every_control_pair() {
        let anchor = CylindricalState::new(0.7, 0.3, 2.2);
        for np in [-1.0, 1.0] {
            for ne in [-1.0, 0.0, 1.0, 0.4] {
                let u = Controls { nu_p: np, nu_e: ne };
                let cf = flow_state(&anchor, u, 1.5);
                let ode = rk4(anchor.to_reduced(), u, 1.5, 1e-3);
                assert!(dist(cf, ode) < 1e-10, "{u:?}: {}", dist(cf, ode));
            }
        }
    }

    #[test]
    fn primary_examples() {
        let p = params();
        let seed = Seed::up(1.0, deg(120.0), BoundarySide::Right, &p).unwrap();
        let c = primary_state(0.0, &seed, -1.0, -1.0, &p);
        assert_eq!((c.r, c.phi, c.theta), (1.0, deg(40.0), deg(120.0)));
        for tau in [0.3, 1.0, 2.5] {
            let c = primary_state(tau, &seed, -1.0, -1.0, &p);
            assert!((c.theta - deg(120.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn eus_theta_and_oracle() {
        let p = params();
        let th = FRAC_PI_2 + p.phi_d;
        let seed = Seed::up(0.6, th, BoundarySide::Right, &p).unwrap();
        let c = eus_state(0.8, &seed, -1.0, &p);
        assert!((c.theta - (th + 0.8)).abs() < 1e-14);
        let ode = rk4(seed.reduced(&p), Controls { nu_p: -1.0, nu_e: 0.0 }, 1.0, 1e-4);
        assert!(dist(eus_state(1.0, &seed, -1.0, &p).to_reduced(), ode) < 1e-6);
    }

    #[test]
    fn tributary_and_post_ts_anchor_recovery() {
        let p = params();
        let point = EusPoint {
            state: CylindricalState::new(0.5, 0.2, 2.6),
            tau_us: 0.4,
        };
        assert_eq!(tributary_state(0.4, &point, -1.0, 1.0, &p).unwrap(), point.state);
        assert!(tributary_state(0.3, &point, -1.0, 1.0, &p).is_err());
        assert!(tributary_state(0.5, &point, -1.0, 0.0, &p).is_err());
        let c = tributary_state(1.4, &point, -1.0, 1.0, &p).unwrap();
        assert!((c.theta - (2.6 + 2.0)).abs() < 1e-14);
        let ode = rk4(point.state.to_reduced(), Controls { nu_p: -1.0, nu_e: 1.0 }, 1.0, 1e-4);
        assert!(dist(c.to_reduced(), ode) < 1e-6);
    }

    #[test]
    fn barrier_seed_and_domain() {
        let p = params();
        let c = barrier_state(0.0, deg(60.0), &p).unwrap();
        assert_eq!(c.r, rbup_radius(deg(60.0), &p).unwrap());
        assert_eq!((c.phi, c.theta), (p.phi_d, deg(60.0)));
        assert!(barrier_state(0.1, 0.0, &p).is_err());
        assert!(barrier_state(0.1, PI + 2.0 * p.phi_d, &p).is_err());
    }

    #[test]
    fn emanation_examples() {
        let p = params();
        assert_eq!(barrier_emanation(deg(30.0), &p).unwrap(), Emanation::Inside);
        assert_eq!(barrier_emanation(deg(100.0), &p).unwrap(), Emanation::Outside);
        assert_eq!(barrier_emanation(deg(130.0), &p).unwrap(), Emanation::Outside);
        assert_eq!(barrier_emanation(deg(200.0), &p).unwrap(), Emanation::Outside);
        assert!(barrier_emanation(0.0, &p).is_err());
    }

    #[test]
    fn emanation_curvature_matches_finite_difference() {
        let p = params();
        let h = 1e-4;
        for th in [0.3, 0.9, 1.2, 2.0, 2.27, 3.5] {
            let phi = |t: f64| barrier_state(t, th, &p).unwrap().phi;
            let fd = (phi(h) - 2.0 * phi(0.0) + phi(-h)) / (h * h);
            let c = barrier_phi_curvature(th, &p).unwrap();
            assert!((fd - c).abs() < 1e-5 * (1.0 + c.abs()), "{th}: {fd} vs {c}");
        }
    }

    #[test]
    fn bupl_rates() {
        let p = params();
        let a = bupl_switch_check(0.0, &p).unwrap();
        assert!((a.s_rate + p.phi_d.cos()).abs() < 1e-15);
        assert_eq!((a.nu_p, a.nu_e), (-1.0, -1.0));
        let b = bupl_switch_check(PI + 2.0 * p.phi_d, &p).unwrap();
        assert!((b.s_rate + p.phi_d.cos()).abs() < 1e-15);
        assert_eq!((b.nu_p, b.nu_e), (-1.0, 1.0));
        assert!(bupl_switch_check(1.0, &p).is_err());
    }

    #[test]
    fn boundary_detection_refines_and_handles_interior() {
        let p = params();
        let seed = Seed::up(0.8, deg(120.0), BoundarySide::Right, &p).unwrap();
        let u = Controls { nu_p: -1.0, nu_e: -1.0 };
        let anchor = seed.cylindrical(&p);
        let eval = |t: f64| flow_state(&anchor, u, t);
        let a = detect_boundary_hit(eval, 0.0, 3.0, p.tol_event, &p).time().unwrap();
        let mut q = p;
        q.scan_step /= 2.0;
        let b = detect_boundary_hit(eval, 0.0, 3.0, q.tol_event, &q).time().unwrap();
        assert!((a - b).abs() < p.tol_event);
        assert!(detect_boundary_hit(eval, 0.0, 1.0, p.tol_event, &p).time().is_none());
    }

    #[test]
    fn sim1_like_seed_is_a_single_primary() {
        let p = params();
        let seed = Seed::up(0.8, deg(120.0), BoundarySide::Right, &p).unwrap();
        let t = synthesize(&seed, &p).unwrap();
        assert_eq!(t.families(), vec![FamilyTag::Primary]);
        assert_eq!(t.termination(), Termination::BoundaryHit);
        assert_eq!(t.hit_side(), Some(BoundarySide::Right));
        assert!((t.total_tau - 1.899).abs() < 1e-3);
    }

    #[test]
    fn switch_time_matches_analytic_oracle() {
        // S = −r − sin(φ_d + τ) + sin φ_d on every right-side primary
        let p = params();
        for (r, th) in [(0.2, deg(120.0)), (0.3, deg(120.0)), (0.1, deg(60.0))] {
            let seed = Seed::up(r, th, BoundarySide::Right, &p).unwrap();
            let t = synthesize(&seed, &p).unwrap();
            let first = t.segments[0];
            assert_eq!(first.termination, Termination::PursuerSwitch);
            let expect = PI - (p.phi_d.sin() - r).asin() - p.phi_d;
            assert!((first.tau_end - expect).abs() < 1e-9, "{} vs {expect}", first.tau_end);
            let s = |tau: f64| switch_function(&first.reduced_at(tau), &first.costate_at(tau));
            assert!(s(first.tau_end - 1e-3) < 0.0);
            let next = t.segments[1];
            assert_eq!(next.family, FamilyTag::PostTSPrimary);
            let s2 = switch_function(&next.reduced_at(next.anchor_tau + 1e-3), &next.costate_at(next.anchor_tau + 1e-3));
            assert!(s2 > 0.0);
        }
    }

    #[test]
    fn sim3_window_brackets_caption_time() {
        let p = params();
        let total = |r: f64| {
            let seed = Seed::up(r, deg(120.0), BoundarySide::Right, &p).unwrap();
            let t = synthesize(&seed, &p).unwrap();
            assert_eq!(t.hit_side(), Some(BoundarySide::Left));
            t.total_tau
        };
        assert!(total(0.2) < 3.04 && total(0.3) > 3.04);
    }

    #[test]
    fn eus_seed_exposes_two_branches() {
        let p = params();
        let th = FRAC_PI_2 + p.phi_d;
        let seed = Seed::up(0.15, th, BoundarySide::Right, &p).unwrap();
        let t = synthesize(&seed, &p).unwrap();
        assert_eq!(t.families(), vec![FamilyTag::Eus]);
        let [a, b] = eus_branches(&seed, 0.79, &p).unwrap();
        assert_eq!(a.segments[1].family, FamilyTag::TributaryRight);
        assert_eq!(b.segments[1].family, FamilyTag::TributaryLeft);
        assert!(a.total_tau > b.total_tau);
        for tr in [&a, &b] {
            let (x, y) = (tr.segments[0], tr.segments[1]);
            assert_eq!(x.state_at(x.tau_end), y.anchor_state);
            assert_eq!(x.costate_at(x.tau_end), y.anchor_costate);
        }
        assert!(eus_branches(&seed, 5.0, &p).is_err());
    }

    #[test]
    fn hamiltonian_vanishes_and_adjoint_holds_on_grid() {
        let p = params();
        let h = 1e-5;
        for seed in sample_seeds(&p, 12, 4) {
            let t = synthesize(&seed, &p).unwrap();
            for seg in &t.segments {
                for k in 0..=20 {
                    let tau = seg.anchor_tau + seg.duration() * k as f64 / 20.0;
                    let ham = segment_hamiltonian(seg, tau, t.multiplier);
                    assert!(ham.abs() < 1e-8, "{seed:?} {tau}: H = {ham}");
                    let lam = seg.costate_at(tau);
                    assert!((lam.planar_norm() - 1.0).abs() < 1e-12);
                    let fd = [0, 1, 2].map(|i| {
                        (seg.costate_at(tau + h).to_array()[i] - seg.costate_at(tau - h).to_array()[i]) / (2.0 * h)
                    });
                    let exact = adjoint_rates(&seg.reduced_at(tau), &lam, seg.controls()).to_array();
                    for i in 0..3 {
                        assert!((fd[i] - exact[i]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn junctions_are_continuous() {
        let p = params();
        for seed in sample_seeds(&p, 20, 5) {
            let t = synthesize(&seed, &p).unwrap();
            for w in t.segments.windows(2) {
                let a = w[0].reduced_at(w[0].tau_end);
                let b = w[1].reduced_at(w[1].anchor_tau);
                assert!(dist(a, b) < 1e-9);
                assert_eq!(w[0].tau_end, w[1].anchor_tau);
            }
        }
    }

    #[test]
    fn left_synthesis_mirrors_right() {
        let p = params();
        for seed in sample_seeds(&p, 10, 3) {
            if seed.side != BoundarySide::Right || seed.kind == SeedKind::Bup {
                continue;
            }
            let right = synthesize(&seed, &p).unwrap().mirrored();
            let left = synthesize(&seed.mirrored(), &p).unwrap();
            assert_eq!(right.families(), left.families());
            assert!((right.total_tau - left.total_tau).abs() < 1e-9);
            for k in 0..=50 {
                let tau = left.total_tau * k as f64 / 50.0;
                assert!(dist(right.reduced_at(tau), left.reduced_at(tau)) < 1e-9);
            }
        }
    }

    #[test]
    fn barrier_inside_and_outside() {
        let p = params();
        let inside = synthesize(&Seed::bup(deg(50.0), BoundarySide::Right, &p).unwrap(), &p).unwrap();
        assert_eq!(inside.emanation, Some(Emanation::Inside));
        assert!(inside.total_tau > 0.1);
        for k in 1..10 {
            let tau = inside.segments[0].tau_end * k as f64 / 10.0;
            assert!(cone_margin(&inside.reduced_at(tau), &p) > 0.0);
            assert!(inside.hamiltonian_at(tau).abs() < 1e-12);
        }
        let out = synthesize(&Seed::bup(FRAC_PI_2 + p.phi_d, BoundarySide::Right, &p).unwrap(), &p).unwrap();
        assert_eq!(out.emanation, Some(Emanation::Outside));
        assert_eq!(out.termination(), Termination::BoundaryHit);
        assert!(out.total_tau <= 2.0 * p.scan_step);
    }
}
