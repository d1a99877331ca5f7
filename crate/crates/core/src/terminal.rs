//! Terminal manifold of the game: the usable part (UP) of the cone boundary,
//! its boundary (BUP) and the apex line (UPL), plus seed generation for
//! retro-time integration.
//!
//! On the right boundary `φ = φ_d` the pursuer's best reply is a hard right
//! turn and the evader escapes iff `r < sin(θ − φ_d) + sin φ_d`; equality is
//! the right BUP. The left boundary is the mirror image.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::kinematics::{from_cylindrical, CylindricalState, GameParams, ReducedState};
use crate::scalar::{wrap_two_pi, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySide {
    /// `φ = +φ_d`
    Right,
    /// `φ = −φ_d`
    Left,
}

impl BoundarySide {
    /// `+1` for the right boundary, `−1` for the left one.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            BoundarySide::Right => T::one(),
            BoundarySide::Left => -T::one(),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            BoundarySide::Right => BoundarySide::Left,
            BoundarySide::Left => BoundarySide::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminalClass {
    Rup,
    Lup,
    BothUpl,
    Rbup,
    Lbup,
    NonUsableBoundary,
    Interior,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UplMembership {
    RuplOnly,
    LuplOnly,
    Both,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    UpInterior,
    Bup,
}

/// Terminal configuration used as the initial condition of a retro-time
/// integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed<T> {
    pub r: T,
    pub theta_d: T,
    pub side: BoundarySide,
    pub kind: SeedKind,
}

impl<T: Scalar> Seed<T> {
    /// Checks `0 ≤ r ≤ bup_radius(θ_d)` for the seed's side.
    pub fn new(
        r: T,
        theta_d: T,
        side: BoundarySide,
        kind: SeedKind,
        params: &GameParams<T>,
    ) -> Result<Self> {
        let theta_d = wrap_two_pi(theta_d);
        let bound = bup_radius(side, theta_d, params)?;
        if r < T::zero() || r > bound + params.tol_event {
            return Err(GameError::Domain {
                what: "seed radius",
                value: r.as_f64(),
                lo: 0.0,
                hi: bound.as_f64(),
            });
        }
        Ok(Self {
            r,
            theta_d,
            side,
            kind,
        })
    }

    /// Seed on the usable part.
    pub fn up(r: T, theta_d: T, side: BoundarySide, params: &GameParams<T>) -> Result<Self> {
        Self::new(r, theta_d, side, SeedKind::UpInterior, params)
    }

    /// Seed on the BUP, radius taken from the BUP curve.
    pub fn bup(theta_d: T, side: BoundarySide, params: &GameParams<T>) -> Result<Self> {
        let r = bup_radius(side, theta_d, params)?;
        Self::new(r, theta_d, side, SeedKind::Bup, params)
    }

    pub fn cylindrical(&self, params: &GameParams<T>) -> CylindricalState<T> {
        CylindricalState {
            r: self.r,
            phi: self.side.sign::<T>() * params.phi_d,
            theta: self.theta_d,
        }
    }

    pub fn reduced(&self, params: &GameParams<T>) -> ReducedState<T> {
        from_cylindrical(self.cylindrical(params))
    }

    /// Mirror image across the pursuer's heading axis.
    pub fn mirrored(&self) -> Self {
        Self {
            side: self.side.opposite(),
            theta_d: wrap_two_pi(-self.theta_d),
            ..*self
        }
    }
}

fn domain_error<T: Scalar>(what: &'static str, v: T, lo: T, hi: T) -> GameError {
    GameError::Domain {
        what,
        value: v.as_f64(),
        lo: lo.as_f64(),
        hi: hi.as_f64(),
    }
}

/// Right BUP radius `sin(θ − φ_d) + sin φ_d`, defined for `θ ∈ [0, π + 2φ_d]`.
pub fn rbup_radius<T: Scalar>(theta: T, params: &GameParams<T>) -> Result<T> {
    let hi = T::PI() + T::two() * params.phi_d;
    if !(theta >= -params.tol_event && theta <= hi + params.tol_event) {
        return Err(domain_error("RBUP theta", theta, T::zero(), hi));
    }
    Ok(((theta - params.phi_d).sin() + params.phi_d.sin()).max(T::zero()))
}

/// Left BUP radius `−sin(θ + φ_d) + sin φ_d`, defined for `θ ∈ [π − 2φ_d, 2π]`
/// (with `θ = 0` identified with `2π`).
pub fn lbup_radius<T: Scalar>(theta: T, params: &GameParams<T>) -> Result<T> {
    let lo = T::PI() - T::two() * params.phi_d;
    let theta = if theta.abs() <= params.tol_event {
        T::TAU()
    } else {
        theta
    };
    if !(theta >= lo - params.tol_event && theta <= T::TAU() + params.tol_event) {
        return Err(domain_error("LBUP theta", theta, lo, T::TAU()));
    }
    Ok((params.phi_d.sin() - (theta + params.phi_d).sin()).max(T::zero()))
}

pub fn bup_radius<T: Scalar>(side: BoundarySide, theta: T, params: &GameParams<T>) -> Result<T> {
    match side {
        BoundarySide::Right => rbup_radius(theta, params),
        BoundarySide::Left => lbup_radius(theta, params),
    }
}

fn require_on_boundary<T: Scalar>(c: &CylindricalState<T>, phi: T, tol: T) -> Result<()> {
    // the apex sits on both boundaries whatever φ says
    if c.r <= tol || (c.phi - phi).abs() < tol {
        Ok(())
    } else {
        Err(GameError::BoundaryMismatch {
            phi: c.phi.as_f64(),
            expected: phi.as_f64(),
        })
    }
}

/// Right usable part: `r < sin(θ − φ_d) + sin φ_d` on `φ = φ_d`.
pub fn in_rup<T: Scalar>(c: &CylindricalState<T>, params: &GameParams<T>) -> Result<bool> {
    require_on_boundary(c, params.phi_d, params.tol_event)?;
    Ok(rbup_radius(wrap_two_pi(c.theta), params).is_ok_and(|bound| c.r < bound))
}

/// Left usable part: `r < −sin(θ + φ_d) + sin φ_d` on `φ = −φ_d`.
pub fn in_lup<T: Scalar>(c: &CylindricalState<T>, params: &GameParams<T>) -> Result<bool> {
    require_on_boundary(c, -params.phi_d, params.tol_event)?;
    Ok(lbup_radius(wrap_two_pi(c.theta), params).is_ok_and(|bound| c.r < bound))
}

/// Which usable-part lines contain the apex configuration with heading
/// difference `θ`.
///
/// `θ = π − 2φ_d` counts as right-only and `θ = π + 2φ_d` as left-only:
/// both are BUPL points of one side that stay usable through the other.
pub fn upl_membership<T: Scalar>(theta: T, params: &GameParams<T>) -> UplMembership {
    let tol = params.tol_event;
    let theta = wrap_two_pi(theta);
    let lo = T::PI() - T::two() * params.phi_d;
    let hi = T::PI() + T::two() * params.phi_d;
    if theta < tol || theta > T::TAU() - tol {
        UplMembership::Neither
    } else if theta <= lo + tol {
        UplMembership::RuplOnly
    } else if theta < hi - tol {
        UplMembership::Both
    } else {
        UplMembership::LuplOnly
    }
}

/// Exhaustive classification of a configuration against the terminal
/// manifold.
pub fn classify<T: Scalar>(c: &CylindricalState<T>, params: &GameParams<T>) -> TerminalClass {
    let tol = params.tol_event;
    let theta = wrap_two_pi(c.theta);
    if c.r < tol {
        return match upl_membership(theta, params) {
            UplMembership::Both => TerminalClass::BothUpl,
            UplMembership::RuplOnly => TerminalClass::Rup,
            UplMembership::LuplOnly => TerminalClass::Lup,
            // θ = 0: the apex point shared by RBUPL and LBUPL
            UplMembership::Neither => TerminalClass::Rbup,
        };
    }
    let a = c.phi.abs();
    if a > params.phi_d + tol {
        return TerminalClass::Outside;
    }
    if a < params.phi_d - tol {
        return TerminalClass::Interior;
    }
    let (side, bup, up) = if c.phi > T::zero() {
        (BoundarySide::Right, TerminalClass::Rbup, TerminalClass::Rup)
    } else {
        (BoundarySide::Left, TerminalClass::Lbup, TerminalClass::Lup)
    };
    match bup_radius(side, theta, params) {
        Ok(bound) if (c.r - bound).abs() <= tol => bup,
        Ok(bound) if c.r < bound => up,
        _ => TerminalClass::NonUsableBoundary,
    }
}

/// Midpoint grid of terminal seeds on both sides of the cone.
///
/// For each side there are `n_theta` headings over the open range where the
/// BUP radius is positive, `n_r` UP seeds per heading strictly below the BUP
/// radius, and one BUP seed per heading. Empty when either count is zero.
pub fn sample_seeds<T: Scalar>(params: &GameParams<T>, n_theta: usize, n_r: usize) -> Vec<Seed<T>> {
    let mut seeds = Vec::with_capacity(2 * n_theta * (n_r + 1));
    if n_theta == 0 || n_r == 0 {
        return seeds;
    }
    let span = T::PI() + T::two() * params.phi_d;
    let frac = |i: usize, n: usize| (T::lit(i as f64) + T::half()) / T::lit(n as f64);
    for side in [BoundarySide::Right, BoundarySide::Left] {
        for i in 0..n_theta {
            let right_theta = frac(i, n_theta) * span;
            let theta = match side {
                BoundarySide::Right => right_theta,
                BoundarySide::Left => T::TAU() - right_theta,
            };
            let Ok(bound) = bup_radius(side, theta, params) else {
                continue;
            };
            for j in 0..n_r {
                seeds.push(Seed {
                    r: frac(j, n_r) * bound,
                    theta_d: theta,
                    side,
                    kind: SeedKind::UpInterior,
                });
            }
            seeds.push(Seed {
                r: bound,
                theta_d: theta,
                side,
                kind: SeedKind::Bup,
            });
        }
    }
    seeds
}
