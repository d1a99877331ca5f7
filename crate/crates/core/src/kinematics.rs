//! State representations of the game and the kinematics in each of them.
//!
//! Three views of the same configuration are used throughout the crate:
//!
//! * [`RealisticState`]: both players' planar poses, angles counter-clockwise
//!   from the +x axis.
//! * [`ReducedState`]: the evader expressed in a frame attached to the
//!   pursuer, `y` along the pursuer's heading and `x` to its right, plus the
//!   heading difference `θ = θ_p − θ_e`.
//! * [`CylindricalState`]: the reduced state in polar form, with the bearing
//!   `φ` measured clockwise from the pursuer's heading (`x = r sin φ`,
//!   `y = r cos φ`).
//!
//! Both players are unit-speed Dubins cars with unit turn radius, so every
//! map here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::scalar::{wrap_pi, wrap_two_pi, Scalar};

/// Planar pose of one player.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_two_pi(theta),
        }
    }
}

/// Both players' poses in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RealisticState<T> {
    pub pursuer: Pose<T>,
    pub evader: Pose<T>,
}

impl<T: Scalar> RealisticState<T> {
    pub fn new(pursuer: Pose<T>, evader: Pose<T>) -> Self {
        Self {
            pursuer: Pose::new(pursuer.x, pursuer.y, pursuer.theta),
            evader: Pose::new(evader.x, evader.y, evader.theta),
        }
    }

    pub fn to_array(self) -> [T; 6] {
        let (p, e) = (self.pursuer, self.evader);
        [p.x, p.y, p.theta, e.x, e.y, e.theta]
    }

    /// Builds a state from raw components without normalizing headings, as
    /// needed for integrator stages and derivatives.
    pub fn from_array(a: [T; 6]) -> Self {
        Self {
            pursuer: Pose {
                x: a[0],
                y: a[1],
                theta: a[2],
            },
            evader: Pose {
                x: a[3],
                y: a[4],
                theta: a[5],
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Evader position and heading difference in the pursuer-fixed frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> ReducedState<T> {
    /// Constructs a state with `θ` normalized to `[0, 2π)`.
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_two_pi(theta),
        }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.theta]
    }

    /// Raw components, heading left as given.
    pub fn from_array(a: [T; 3]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            theta: a[2],
        }
    }

    pub fn to_cylindrical(self) -> CylindricalState<T> {
        to_cylindrical(self)
    }
}

/// Polar form of [`ReducedState`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CylindricalState<T> {
    pub r: T,
    /// Bearing clockwise from the pursuer's heading, in `[−π, π]`.
    pub phi: T,
    pub theta: T,
}

impl<T: Scalar> CylindricalState<T> {
    pub fn new(r: T, phi: T, theta: T) -> Self {
        Self {
            r,
            phi: wrap_pi(phi),
            theta: wrap_two_pi(theta),
        }
    }

    pub fn to_reduced(self) -> ReducedState<T> {
        from_cylindrical(self)
    }
}

/// Turn rates of both players, each in `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls<T> {
    pub nu_p: T,
    pub nu_e: T,
}

impl<T: Scalar> Controls<T> {
    pub fn new(nu_p: T, nu_e: T) -> Result<Self> {
        let unit = |v: T| v >= -T::one() && v <= T::one();
        if !unit(nu_p) || !unit(nu_e) {
            return Err(GameError::InvalidParams(format!(
                "controls ({nu_p}, {nu_e}) outside [-1, 1]"
            )));
        }
        Ok(Self { nu_p, nu_e })
    }

    /// Same controls seen from the mirrored (left-side) game.
    pub fn mirrored(self) -> Self {
        Self {
            nu_p: -self.nu_p,
            nu_e: -self.nu_e,
        }
    }
}

/// Cone half-angle and the numerical tolerances used by event detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams<T> {
    /// Half-angle of the sensing cone, in `(0, π/2)`.
    pub phi_d: T,
    /// Bisection tolerance on the switch function.
    pub tol_root: T,
    /// Tolerance for boundary membership and event timing.
    pub tol_event: T,
    /// Retro-time horizon.
    pub tau_max: T,
    /// Sampling step used to bracket switches and boundary crossings.
    pub scan_step: T,
}

impl<T: Scalar> GameParams<T> {
    /// Parameters with the default tolerances (`tol_root = 1e-10`,
    /// `tol_event = 1e-9`, `τ_max = 2π`, scan step `1e-3`).
    pub fn new(phi_d: T) -> Result<Self> {
        Self {
            phi_d,
            tol_root: T::lit(1e-10),
            tol_event: T::lit(1e-9),
            tau_max: T::TAU(),
            scan_step: T::lit(1e-3),
        }
        .validated()
    }

    pub fn from_degrees(phi_d_deg: T) -> Result<Self> {
        Self::new(phi_d_deg.to_radians())
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.phi_d > T::zero() && self.phi_d < T::FRAC_PI_2()) {
            return Err(GameError::InvalidParams(format!(
                "cone half-angle {} must lie in (0, pi/2)",
                self.phi_d
            )));
        }
        for (name, v) in [
            ("tol_root", self.tol_root),
            ("tol_event", self.tol_event),
            ("tau_max", self.tau_max),
            ("scan_step", self.scan_step),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(GameError::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        Ok(self)
    }

    pub fn with_tau_max(mut self, tau_max: T) -> Self {
        self.tau_max = tau_max;
        self
    }
}

/// Realistic poses to the pursuer-fixed frame.
pub fn to_reduced<T: Scalar>(s: &RealisticState<T>) -> ReducedState<T> {
    let (p, e) = (s.pursuer, s.evader);
    let (dx, dy) = (e.x - p.x, e.y - p.y);
    let (sp, cp) = p.theta.sin_cos();
    ReducedState::new(dx * sp - dy * cp, dx * cp + dy * sp, p.theta - e.theta)
}

/// Places the evader back in the plane given the pursuer's pose.
pub fn from_reduced<T: Scalar>(s: &ReducedState<T>, pursuer: Pose<T>) -> RealisticState<T> {
    let (sp, cp) = pursuer.theta.sin_cos();
    let evader = Pose::new(
        pursuer.x + s.x * sp + s.y * cp,
        pursuer.y - s.x * cp + s.y * sp,
        pursuer.theta - s.theta,
    );
    RealisticState::new(pursuer, evader)
}

/// `r = |(x, y)|`, `φ = atan2(x, y)`; the apex maps to `φ = 0`.
pub fn to_cylindrical<T: Scalar>(s: ReducedState<T>) -> CylindricalState<T> {
    let r = s.x.hypot(s.y);
    let phi = if r == T::zero() {
        T::zero()
    } else {
        s.x.atan2(s.y)
    };
    CylindricalState {
        r,
        phi,
        theta: wrap_two_pi(s.theta),
    }
}

pub fn from_cylindrical<T: Scalar>(c: CylindricalState<T>) -> ReducedState<T> {
    let (sf, cf) = c.phi.sin_cos();
    ReducedState {
        x: c.r * sf,
        y: c.r * cf,
        theta: wrap_two_pi(c.theta),
    }
}

/// Forward kinematics of both cars; the result holds time derivatives.
pub fn realistic_dynamics<T: Scalar>(s: &RealisticState<T>, u: Controls<T>) -> RealisticState<T> {
    let (p, e) = (s.pursuer, s.evader);
    RealisticState::from_array([
        p.theta.cos(),
        p.theta.sin(),
        u.nu_p,
        e.theta.cos(),
        e.theta.sin(),
        u.nu_e,
    ])
}

/// `ẋ = ν_p y + sin θ`, `ẏ = −ν_p x − 1 + cos θ`, `θ̇ = ν_p − ν_e`.
pub fn reduced_dynamics<T: Scalar>(s: &ReducedState<T>, u: Controls<T>) -> ReducedState<T> {
    let (st, ct) = s.theta.sin_cos();
    ReducedState::from_array([
        u.nu_p * s.y + st,
        -u.nu_p * s.x - T::one() + ct,
        u.nu_p - u.nu_e,
    ])
}

/// Polar kinematics; undefined at the apex.
pub fn cylindrical_dynamics<T: Scalar>(
    c: &CylindricalState<T>,
    u: Controls<T>,
) -> Result<CylindricalState<T>> {
    if c.r <= T::epsilon() {
        return Err(GameError::DegenerateState { r: c.r.as_f64() });
    }
    let rel = c.theta - c.phi;
    Ok(CylindricalState {
        r: rel.cos() - c.phi.cos(),
        phi: u.nu_p + (rel.sin() + c.phi.sin()) / c.r,
        theta: u.nu_p - u.nu_e,
    })
}

pub fn retro_reduced_dynamics<T: Scalar>(s: &ReducedState<T>, u: Controls<T>) -> ReducedState<T> {
    let d = reduced_dynamics(s, u);
    ReducedState::from_array(d.to_array().map(|v| -v))
}

pub fn retro_cylindrical_dynamics<T: Scalar>(
    c: &CylindricalState<T>,
    u: Controls<T>,
) -> Result<CylindricalState<T>> {
    let d = cylindrical_dynamics(c, u)?;
    Ok(CylindricalState {
        r: -d.r,
        phi: -d.phi,
        theta: -d.theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn ang_close(a: f64, b: f64, tol: f64) -> bool {
        wrap_pi(a - b).abs() <= tol
    }

    #[test]
    fn evader_dead_ahead() {
        let s = RealisticState::new(
            Pose::new(0.0, 0.0, FRAC_PI_2),
            Pose::new(0.0, 2.0, FRAC_PI_2),
        );
        let r = to_reduced(&s);
        assert!(close(r.x, 0.0, 1e-15) && close(r.y, 2.0, 1e-15) && r.theta == 0.0);
    }

    #[test]
    fn identical_poses_reduce_to_origin() {
        let p = Pose::new(3.0, -1.0, 2.0);
        let r = to_reduced(&RealisticState::new(p, p));
        assert_eq!(r.to_array(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn from_reduced_examples() {
        let s = from_reduced(&ReducedState::new(0.0, 0.0, 0.0), Pose::new(1.0, 1.0, FRAC_PI_4));
        assert_eq!(s.evader, Pose::new(1.0, 1.0, FRAC_PI_4));

        let s = from_reduced(&ReducedState::new(0.0, 2.0, 0.0), Pose::new(0.0, 0.0, FRAC_PI_2));
        assert!(close(s.evader.x, 0.0, 1e-15));
        assert!(close(s.evader.y, 2.0, 1e-15));
        assert!(close(s.evader.theta, FRAC_PI_2, 1e-15));
    }

    #[test]
    fn cylindrical_axes() {
        let c = to_cylindrical(ReducedState::new(0.0, 1.0, 0.3));
        assert_eq!((c.r, c.phi), (1.0, 0.0));
        let c = to_cylindrical(ReducedState::new(1.0, 0.0, 0.3));
        assert!(close(c.r, 1.0, 0.0) && close(c.phi, FRAC_PI_2, 1e-15));
        let c = to_cylindrical(ReducedState::new(0.0, 0.0, 0.3));
        assert_eq!((c.r, c.phi), (0.0, 0.0));
    }

    #[test]
    fn realistic_dynamics_examples() {
        let u = Controls::new(0.0, 0.0).unwrap();
        let s = RealisticState::new(Pose::new(0.0, 0.0, 0.0), Pose::default());
        let d = realistic_dynamics(&s, u);
        assert_eq!((d.pursuer.x, d.pursuer.y, d.pursuer.theta), (1.0, 0.0, 0.0));

        let u = Controls::new(1.0, 0.0).unwrap();
        let s = RealisticState::new(Pose::new(0.0, 0.0, FRAC_PI_2), Pose::default());
        let d = realistic_dynamics(&s, u);
        assert!(close(d.pursuer.x, 0.0, 1e-16));
        assert_eq!((d.pursuer.y, d.pursuer.theta), (1.0, 1.0));
    }

    #[test]
    fn reduced_dynamics_examples() {
        let u = Controls::new(0.7, -0.2).unwrap();
        let d = reduced_dynamics(&ReducedState::new(0.0, 0.0, 0.0), u);
        assert_eq!(d.to_array(), [0.0, 0.0, 0.7 + 0.2]);

        let u = Controls::new(1.0, 1.0).unwrap();
        let d = reduced_dynamics(&ReducedState::new(0.0, 2.0, 0.0), u);
        assert_eq!(d.to_array(), [2.0, 0.0, 0.0]);

        let d = retro_reduced_dynamics(&ReducedState::new(0.0, 0.0, 0.0), u);
        assert_eq!(d.theta, -1.0 + 1.0);
    }

    #[test]
    fn cylindrical_rate_when_theta_equals_phi() {
        let phi = 0.4;
        let c = CylindricalState::new(1.3, phi, phi);
        let d = cylindrical_dynamics(&c, Controls::new(-1.0, 0.5).unwrap()).unwrap();
        assert!(close(d.r, 1.0 - phi.cos(), 1e-15));
        assert!(d.r >= 0.0);
    }

    #[test]
    fn bup_is_stationary_under_pursuer_right_turn() {
        let phi_d = 40f64.to_radians();
        let theta = 1.7;
        let r = (theta - phi_d).sin() + phi_d.sin();
        let c = CylindricalState::new(r, phi_d, theta);
        for nu_e in [-1.0, 0.0, 1.0] {
            let d = cylindrical_dynamics(&c, Controls::new(-1.0, nu_e).unwrap()).unwrap();
            assert!(d.phi.abs() < 1e-12, "phi rate {}", d.phi);
        }
    }

    #[test]
    fn apex_is_degenerate() {
        let c = CylindricalState::new(0.0, 0.0, 1.0);
        assert!(matches!(
            cylindrical_dynamics(&c, Controls::default()),
            Err(GameError::DegenerateState { .. })
        ));
    }

    #[test]
    fn controls_are_bounded() {
        assert!(Controls::new(1.5, 0.0).is_err());
        assert!(Controls::new(0.0, -1.0).is_ok());
    }

    #[test]
    fn params_domain() {
        assert!(GameParams::new(0.0).is_err());
        assert!(GameParams::new(FRAC_PI_2).is_err());
        assert!(GameParams::from_degrees(40.0).is_ok());
        let mut p = GameParams::new(0.5).unwrap();
        p.tol_event = 0.0;
        assert!(p.validated().is_err());
    }

    fn pose() -> impl Strategy<Value = Pose<f64>> {
        (-10.0..10.0, -10.0..10.0, 0.0..TAU).prop_map(|(x, y, t)| Pose::new(x, y, t))
    }

    fn controls() -> impl Strategy<Value = Controls<f64>> {
        (-1.0..=1.0, -1.0..=1.0).prop_map(|(p, e)| Controls { nu_p: p, nu_e: e })
    }

    proptest! {
        #[test]
        fn reduction_matches_rotation_matrix(p in pose(), e in pose()) {
            // R(θ_p) maps the pursuer frame (right, forward) into the plane.
            let (s, c) = p.theta.sin_cos();
            let rot = [[s, c], [-c, s]];
            let d = [e.x - p.x, e.y - p.y];
            // inverse of an orthonormal matrix is its transpose
            let local = [
                rot[0][0] * d[0] + rot[1][0] * d[1],
                rot[0][1] * d[0] + rot[1][1] * d[1],
            ];
            let r = to_reduced(&RealisticState::new(p, e));
            prop_assert!(close(r.x, local[0], 1e-12));
            prop_assert!(close(r.y, local[1], 1e-12));
            prop_assert!(ang_close(r.theta, p.theta - e.theta, 1e-12));
        }

        #[test]
        fn reduced_round_trip(x in -10.0..10.0, y in -10.0..10.0, t in 0.0..TAU, p in pose()) {
            let s = ReducedState::new(x, y, t);
            let back = to_reduced(&from_reduced(&s, p));
            prop_assert!(close(back.x, x, 1e-12) && close(back.y, y, 1e-12));
            prop_assert!(ang_close(back.theta, s.theta, 1e-12));
        }

        #[test]
        fn cylindrical_round_trip(x in -10.0..10.0, y in -10.0..10.0, t in 0.0..TAU) {
            prop_assume!(f64::hypot(x, y) > 1e-9);
            let s = ReducedState::new(x, y, t);
            let back = from_cylindrical(to_cylindrical(s));
            prop_assert!(close(back.x, x, 1e-12) && close(back.y, y, 1e-12));
            prop_assert!(ang_close(back.theta, s.theta, 1e-12));
            let c = to_cylindrical(s);
            prop_assert!(c.r >= 0.0 && c.phi.abs() <= PI);
        }

        #[test]
        fn reduced_is_pushforward_of_realistic(p in pose(), e in pose(), u in controls()) {
            let s = RealisticState::new(p, e);
            let d = realistic_dynamics(&s, u);
            let h = 1e-6;
            let shift = |k: f64| {
                let a = s.to_array();
                let da = d.to_array();
                to_reduced(&RealisticState::from_array(std::array::from_fn(|i| a[i] + k * h * da[i])))
            };
            let (fwd, bwd) = (shift(1.0), shift(-1.0));
            let num = [
                (fwd.x - bwd.x) / (2.0 * h),
                (fwd.y - bwd.y) / (2.0 * h),
                wrap_pi(fwd.theta - bwd.theta) / (2.0 * h),
            ];
            let exact = reduced_dynamics(&to_reduced(&s), u).to_array();
            for k in 0..3 {
                prop_assert!(close(num[k], exact[k], 1e-6), "{k}: {} vs {}", num[k], exact[k]);
            }
        }

        #[test]
        fn polar_rates_match_cartesian(r in 0.05..5.0, phi in -PI..PI, t in 0.0..TAU, u in controls()) {
            let c = CylindricalState::new(r, phi, t);
            let s = from_cylindrical(c);
            let d = reduced_dynamics(&s, u);
            // ṙ = (x ẋ + y ẏ)/r, φ̇ = (y ẋ − x ẏ)/r²
            let r_dot = (s.x * d.x + s.y * d.y) / r;
            let phi_dot = (s.y * d.x - s.x * d.y) / (r * r);
            let dc = cylindrical_dynamics(&c, u).unwrap();
            prop_assert!(close(dc.r, r_dot, 1e-9));
            prop_assert!(close(dc.phi, phi_dot, 1e-9));
            prop_assert!(close(dc.theta, d.theta, 1e-15));
        }

        #[test]
        fn retro_is_exact_negation(x in -5.0..5.0, y in -5.0..5.0, t in 0.0..TAU, u in controls()) {
            let s = ReducedState::new(x, y, t);
            let f = reduced_dynamics(&s, u).to_array();
            let b = retro_reduced_dynamics(&s, u).to_array();
            for k in 0..3 {
                prop_assert_eq!(b[k], -f[k]);
            }
            let c = to_cylindrical(s);
            prop_assume!(c.r > 1e-6);
            let f = cylindrical_dynamics(&c, u).unwrap();
            let b = retro_cylindrical_dynamics(&c, u).unwrap();
            prop_assert_eq!((b.r, b.phi, b.theta), (-f.r, -f.phi, -f.theta));
        }
    }
}
