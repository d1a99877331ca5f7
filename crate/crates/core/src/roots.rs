//! Sign-change scanning with bisection refinement.

use crate::scalar::Scalar;

/// Outcome of scanning a function for the first change of sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing<T> {
    /// The function already has the "after" sign at the first probe.
    Immediate(T),
    At(T),
    None,
}

impl<T> Crossing<T> {
    pub fn time(self) -> Option<T> {
        match self {
            Crossing::Immediate(t) | Crossing::At(t) => Some(t),
            Crossing::None => None,
        }
    }
}

/// Finds the first `t ∈ (t0, t1]` where `f` stops being positive.
///
/// The first probe sits at `t0 + lead`, then samples follow every `step`.
/// A bracketed root is bisected down to a few ulps.
pub fn first_nonpositive<T: Scalar>(
    f: impl Fn(T) -> T,
    t0: T,
    t1: T,
    step: T,
    lead: T,
) -> Crossing<T> {
    let start = t0 + lead;
    if start > t1 {
        return Crossing::None;
    }
    if f(start) <= T::zero() {
        return Crossing::Immediate(start);
    }
    let mut lo = start;
    let mut k = 1usize;
    loop {
        let hi = (t0 + step * T::lit(k as f64)).min(t1);
        if hi > lo && f(hi) <= T::zero() {
            return Crossing::At(bisect(&f, lo, hi));
        }
        if hi >= t1 {
            return Crossing::None;
        }
        lo = lo.max(hi);
        k += 1;
    }
}

/// Bisection with `f(lo) > 0 ≥ f(hi)`.
pub fn bisect<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    for _ in 0..200 {
        let mid = lo + (hi - lo) * T::half();
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + (hi - lo) * T::half()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let c = first_nonpositive(|t: f64| 0.5 - t, 0.0, 2.0, 1e-3, 1e-9);
        match c {
            Crossing::At(t) => assert!((t - 0.5).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_root_in_window() {
        let c = first_nonpositive(|t: f64| 3.0 - t, 0.0, 2.0, 1e-3, 1e-9);
        assert_eq!(c, Crossing::None);
    }

    #[test]
    fn immediate() {
        let c = first_nonpositive(|t: f64| -t, 0.0, 2.0, 1e-3, 1e-9);
        assert_eq!(c, Crossing::Immediate(1e-9));
    }

    #[test]
    fn root_at_window_end_is_found() {
        let c = first_nonpositive(|t: f64| 1.0 - t, 0.0, 1.0, 0.3, 1e-9);
        assert!(matches!(c, Crossing::At(t) if (t - 1.0).abs() < 1e-15));
    }
}
