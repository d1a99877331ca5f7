//! Hamiltonian, bang-bang control laws and the closed-form costates.
//!
//! The pursuer maximizes and the evader minimizes
//! `H = λ·f(x, ν_p, ν_e) + 1` with `f` the reduced kinematics, so
//! `ν_p* = sgn(S)` with `S = y λ_x − x λ_y + λ_θ` and `ν_e* = sgn(λ_θ)`.
//! In retro-time the adjoint obeys `λ̊_x = −ν_p λ_y`, `λ̊_y = ν_p λ_x`,
//! `λ̊_θ = λ_x cos θ − λ_y sin θ`.
//!
//! Along every family the planar part of the costate is a unit vector
//! `(−cos ψ, sin ψ)` whose angle `ψ` rotates at `−ν_p`; `λ_θ` integrates in
//! closed form from there. A consequence used for switch detection is
//! `S̊ = λ_x` whatever the controls.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::kinematics::{
    to_cylindrical, CylindricalState, Controls, GameParams, ReducedState,
};
use crate::roots::{first_nonpositive, Crossing};
use crate::scalar::{sgn, Scalar};
use crate::terminal::BoundarySide;

/// Adjoint vector paired with the reduced state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Costate<T> {
    pub lambda_x: T,
    pub lambda_y: T,
    pub lambda_theta: T,
}

impl<T: Scalar> Costate<T> {
    pub fn new(lambda_x: T, lambda_y: T, lambda_theta: T) -> Self {
        Self {
            lambda_x,
            lambda_y,
            lambda_theta,
        }
    }

    /// Angle `ψ` with `(λ_x, λ_y) = |λ|(−cos ψ, sin ψ)`.
    pub fn psi(&self) -> T {
        self.lambda_y.atan2(-self.lambda_x)
    }

    pub fn planar_norm(&self) -> T {
        self.lambda_x.hypot(self.lambda_y)
    }

    pub fn scaled(&self, k: T) -> Self {
        Self::new(self.lambda_x * k, self.lambda_y * k, self.lambda_theta * k)
    }

    pub fn mirrored(&self) -> Self {
        Self::new(-self.lambda_x, self.lambda_y, -self.lambda_theta)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.lambda_x, self.lambda_y, self.lambda_theta]
    }

    /// Closed-form retro-time propagation from this costate, taken at a
    /// state with heading difference `theta`, under constant controls for a
    /// retro-time span `s`.
    pub fn propagate(&self, theta: T, u: Controls<T>, s: T) -> Self {
        let psi0 = self.psi();
        let norm = self.planar_norm();
        let psi = psi0 - u.nu_p * s;
        // ψ − θ drifts at −ν_e, so λ̊_θ = −|λ| cos(c0 − ν_e s)
        let c0 = psi0 - theta;
        let lt = if u.nu_e == T::zero() {
            self.lambda_theta - norm * s * c0.cos()
        } else {
            let k = T::one() / u.nu_e;
            self.lambda_theta + norm * k * ((c0 - u.nu_e * s).sin() - c0.sin())
        };
        Self::new(-norm * psi.cos(), norm * psi.sin(), lt)
    }
}

/// Three-valued sign of an optimal control; `Singular` when the switching
/// quantity vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlSign {
    Negative,
    Singular,
    Positive,
}

impl ControlSign {
    pub fn of<T: Scalar>(v: T) -> Self {
        match sgn(v) {
            s if s > T::zero() => ControlSign::Positive,
            s if s < T::zero() => ControlSign::Negative,
            _ => ControlSign::Singular,
        }
    }

    pub fn value<T: Scalar>(self) -> T {
        match self {
            ControlSign::Negative => -T::one(),
            ControlSign::Singular => T::zero(),
            ControlSign::Positive => T::one(),
        }
    }

    pub fn is_singular(self) -> bool {
        self == ControlSign::Singular
    }
}

/// Pursuer control switch found along a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord<T> {
    pub tau_s: T,
    pub nu_p_before: T,
    pub nu_p_after: T,
    pub state_at_switch: CylindricalState<T>,
    pub costate_at_switch: Costate<T>,
}

/// `λ·f + 1` on the reduced kinematics.
pub fn hamiltonian<T: Scalar>(s: &ReducedState<T>, lam: &Costate<T>, u: Controls<T>) -> T {
    kind_hamiltonian(s, lam, u) + T::one()
}

/// `λ·f` without the running cost; the Hamiltonian of the game of kind.
pub fn kind_hamiltonian<T: Scalar>(s: &ReducedState<T>, lam: &Costate<T>, u: Controls<T>) -> T {
    let (st, ct) = s.theta.sin_cos();
    lam.lambda_x * (u.nu_p * s.y + st)
        + lam.lambda_y * (-u.nu_p * s.x - T::one() + ct)
        + lam.lambda_theta * (u.nu_p - u.nu_e)
}

/// Scale `μ` such that `μλ·f + 1 = 0` at the given point. `None` when
/// `λ·f = 0` (the BUP, where only the game of kind applies).
pub fn transversality_multiplier<T: Scalar>(
    s: &ReducedState<T>,
    lam: &Costate<T>,
    u: Controls<T>,
) -> Option<T> {
    let k = kind_hamiltonian(s, lam, u);
    if k.abs() <= T::epsilon().sqrt() {
        None
    } else {
        Some(-T::one() / k)
    }
}

/// `S = y λ_x − x λ_y + λ_θ`
pub fn switch_function<T: Scalar>(s: &ReducedState<T>, lam: &Costate<T>) -> T {
    s.y * lam.lambda_x - s.x * lam.lambda_y + lam.lambda_theta
}

/// Retro-time rate `S̊` from the product rule on `S`, the retro kinematics
/// and the adjoint rates.
pub fn switch_rate<T: Scalar>(s: &ReducedState<T>, lam: &Costate<T>, u: Controls<T>) -> T {
    let (st, ct) = s.theta.sin_cos();
    let x_r = -(u.nu_p * s.y + st);
    let y_r = -(-u.nu_p * s.x - T::one() + ct);
    let l = adjoint_rates(s, lam, u);
    y_r * lam.lambda_x + s.y * l.lambda_x - x_r * lam.lambda_y - s.x * l.lambda_y + l.lambda_theta
}

pub fn pursuer_control<T: Scalar>(s: &ReducedState<T>, lam: &Costate<T>) -> ControlSign {
    ControlSign::of(switch_function(s, lam))
}

pub fn evader_control<T: Scalar>(lam: &Costate<T>) -> ControlSign {
    ControlSign::of(lam.lambda_theta)
}

/// Retro-time adjoint rates `λ̊ = ∂H/∂x`.
pub fn adjoint_rates<T: Scalar>(s: &ReducedState<T>, lam: &Costate<T>, u: Controls<T>) -> Costate<T> {
    let (st, ct) = s.theta.sin_cos();
    Costate::new(
        -u.nu_p * lam.lambda_y,
        u.nu_p * lam.lambda_x,
        lam.lambda_x * ct - lam.lambda_y * st,
    )
}

/// Costate fixed by the traversability condition on the given boundary.
pub fn terminal_costate<T: Scalar>(side: BoundarySide, params: &GameParams<T>) -> Costate<T> {
    let (sf, cf) = params.phi_d.sin_cos();
    Costate::new(-side.sign::<T>() * cf, sf, T::zero())
}

/// Evader's control just before the end on the right boundary, read from
/// `λ̊_θ = −cos(φ_d − θ_d)`.
pub fn terminal_evader_control<T: Scalar>(theta_d: T, params: &GameParams<T>) -> ControlSign {
    side_terminal_evader_control(BoundarySide::Right, theta_d, params)
}

/// Side-generic form of [`terminal_evader_control`].
pub fn side_terminal_evader_control<T: Scalar>(
    side: BoundarySide,
    theta_d: T,
    params: &GameParams<T>,
) -> ControlSign {
    let lam = terminal_costate(side, params);
    let rate = -(lam.psi() - theta_d).cos();
    if rate.abs() <= params.tol_event {
        ControlSign::Singular
    } else {
        ControlSign::of(rate)
    }
}

/// Pursuer's control just before the end: `sgn(S)`, or `sgn(S̊) = sgn(λ_x)`
/// at the apex where `S` vanishes.
pub fn terminal_pursuer_control<T: Scalar>(
    state: &ReducedState<T>,
    side: BoundarySide,
    params: &GameParams<T>,
) -> ControlSign {
    let lam = terminal_costate(side, params);
    let s = switch_function(state, &lam);
    if s.abs() > params.tol_root {
        ControlSign::of(s)
    } else {
        ControlSign::of(lam.lambda_x)
    }
}

/// Primary-solution costate, anchored at the right UP.
pub fn costate_primary<T: Scalar>(
    tau: T,
    theta_d: T,
    nu_p: T,
    nu_e: T,
    params: &GameParams<T>,
) -> Costate<T> {
    let pd = params.phi_d;
    let a = pd - theta_d;
    Costate::new(
        -(pd - nu_p * tau).cos(),
        (pd - nu_p * tau).sin(),
        nu_e * (-a.sin() + (a - nu_e * tau).sin()),
    )
}

/// Costate on the evader's universal surface, where `λ_θ ≡ 0`.
pub fn costate_us<T: Scalar>(tau: T, nu_p: T, params: &GameParams<T>) -> Costate<T> {
    let pd = params.phi_d;
    Costate::new(-(pd - nu_p * tau).cos(), (pd - nu_p * tau).sin(), T::zero())
}

fn require_after<T: Scalar>(tau: T, anchor: T) -> Result<()> {
    if tau < anchor {
        Err(GameError::BeforeAnchor {
            tau: tau.as_f64(),
            anchor: anchor.as_f64(),
        })
    } else {
        Ok(())
    }
}

/// Costate along a tributary leaving the EUS at `τ_US`.
pub fn costate_tributary<T: Scalar>(
    tau: T,
    tau_us: T,
    theta_d: T,
    nu_p: T,
    nu_e: T,
    params: &GameParams<T>,
) -> Result<Costate<T>> {
    require_after(tau, tau_us)?;
    let pd = params.phi_d;
    let a = pd - theta_d;
    Ok(Costate::new(
        -(pd - nu_p * tau).cos(),
        (pd - nu_p * tau).sin(),
        nu_e * (-a.sin() + (a - nu_e * (tau - tau_us)).sin()),
    ))
}

/// Costate after the pursuer switches from `ν_p0` to `ν_p` at `τ_s` on a
/// primary trajectory.
pub fn costate_post_switch<T: Scalar>(
    tau: T,
    tau_s: T,
    nu_p0: T,
    nu_p: T,
    theta_d: T,
    nu_e: T,
    params: &GameParams<T>,
) -> Result<Costate<T>> {
    require_after(tau, tau_s)?;
    let pd = params.phi_d;
    let psi = pd - nu_p0 * tau_s - nu_p * (tau - tau_s);
    let a = pd - theta_d;
    Ok(Costate::new(
        -psi.cos(),
        psi.sin(),
        nu_e * (-a.sin() + (a - nu_e * tau).sin()),
    ))
}

/// Anything that yields the reduced state and costate as functions of
/// retro-time.
pub trait RetroEvaluator<T> {
    fn eval(&self, tau: T) -> (ReducedState<T>, Costate<T>);
}

impl<T, F> RetroEvaluator<T> for F
where
    F: Fn(T) -> (ReducedState<T>, Costate<T>),
{
    fn eval(&self, tau: T) -> (ReducedState<T>, Costate<T>) {
        self(tau)
    }
}

/// First pursuer switch on `(τ_start, τ_stop]`: scans `S` every
/// `params.scan_step`, brackets the first sign change and bisects it.
///
/// The sign before the switch is read just after `τ_start`, so segments
/// anchored on a previous switch (`S = 0`) are handled.
pub fn find_switch_time<T: Scalar, E: RetroEvaluator<T> + ?Sized>(
    eval: &E,
    tau_start: T,
    tau_stop: T,
    params: &GameParams<T>,
) -> Option<SwitchRecord<T>> {
    let lead = params.tol_event.min(params.scan_step * T::half());
    let probe = tau_start + lead;
    if probe > tau_stop {
        return None;
    }
    let s_of = |tau: T| {
        let (x, l) = eval.eval(tau);
        switch_function(&x, &l)
    };
    let s0 = s_of(probe);
    let before = if s0 != T::zero() {
        sgn(s0)
    } else {
        // S = 0 this close to the anchor: fall back on S̊ = λ_x
        sgn(eval.eval(probe).1.lambda_x)
    };
    if before == T::zero() {
        return None;
    }
    let crossing = first_nonpositive(|t| before * s_of(t), tau_start, tau_stop, params.scan_step, lead);
    let tau_s = match crossing {
        Crossing::At(t) => t,
        Crossing::Immediate(_) | Crossing::None => return None,
    };
    let (x, l) = eval.eval(tau_s);
    Some(SwitchRecord {
        tau_s,
        nu_p_before: before,
        nu_p_after: -before,
        state_at_switch: to_cylindrical(x),
        costate_at_switch: l,
    })
}
