//! Log-domain nonnegative reals.
//!
//! Shell sums such as Σ ν_s ψ(s)^{-q} leave f64 range as soon as ψ decays
//! super-exponentially (ψ(s) = e^{-s²} makes the terms e^{q s²}, which
//! overflows near s = 19 for q = 2), and the final approximation values
//! underflow equally fast. `Mag` stores a nonnegative quantity as its
//! natural logarithm so sums, powers and ratios stay representable across
//! the whole parameter range; −∞ encodes zero and +∞ encodes a divergent
//! magnitude.

use std::cmp::Ordering;
use std::fmt;

/// A nonnegative real number stored as its natural logarithm.
#[derive(Clone, Copy, PartialEq)]
pub struct Mag {
    ln: f64,
}

impl Mag {
    pub const ZERO: Mag = Mag { ln: f64::NEG_INFINITY };
    pub const ONE: Mag = Mag { ln: 0.0 };
    pub const INFINITY: Mag = Mag { ln: f64::INFINITY };

    /// Wraps a plain nonnegative value. Panics on negatives or NaN: callers
    /// hold the sign information, `Mag` only tracks magnitudes.
    pub fn from_value(x: f64) -> Mag {
        assert!(x >= 0.0 && !x.is_nan(), "Mag requires a nonnegative value, got {x}");
        Mag { ln: x.ln() }
    }

    /// Wraps a value given directly as its natural logarithm.
    pub fn from_ln(ln: f64) -> Mag {
        assert!(!ln.is_nan(), "Mag logarithm must not be NaN");
        Mag { ln }
    }

    /// The plain value; underflows to 0 / overflows to +∞ outside f64 range.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    pub fn is_zero(self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    pub fn is_finite(self) -> bool {
        self.ln < f64::INFINITY
    }

    /// Self raised to a real power. `0^e` is 0 for e > 0, 1 for e = 0 and
    /// +∞ for e < 0, matching the limiting behaviour of the sums involved.
    pub fn powf(self, e: f64) -> Mag {
        if e == 0.0 {
            return Mag::ONE;
        }
        Mag { ln: e * self.ln }
    }

    pub fn recip(self) -> Mag {
        Mag { ln: -self.ln }
    }

    /// log-sum-exp addition: exact at the representation level, one ulp of
    /// ln-error per operation.
    pub fn add(self, other: Mag) -> Mag {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        if self.ln == f64::INFINITY || other.ln == f64::INFINITY {
            return Mag::INFINITY;
        }
        let (hi, lo) = if self.ln >= other.ln { (self.ln, other.ln) } else { (other.ln, self.ln) };
        Mag { ln: hi + (lo - hi).exp().ln_1p() }
    }

    /// Subtraction for `self ≥ other`; `None` when the difference would be
    /// negative. Accurate even when the operands are close (uses expm1).
    pub fn checked_sub(self, other: Mag) -> Option<Mag> {
        if other.is_zero() {
            return Some(self);
        }
        match self.ln.partial_cmp(&other.ln) {
            Some(Ordering::Less) => None,
            Some(Ordering::Equal) => Some(Mag::ZERO),
            _ => {
                let d = other.ln - self.ln; // < 0
                Some(Mag { ln: self.ln + (-d.exp_m1()).ln() })
            }
        }
    }

    pub fn mul(self, other: Mag) -> Mag {
        if self.is_zero() || other.is_zero() {
            return Mag::ZERO;
        }
        Mag { ln: self.ln + other.ln }
    }

    pub fn div(self, other: Mag) -> Mag {
        if self.is_zero() {
            return Mag::ZERO;
        }
        Mag { ln: self.ln - other.ln }
    }

    pub fn max(self, other: Mag) -> Mag {
        if self.ln >= other.ln { self } else { other }
    }

    pub fn min(self, other: Mag) -> Mag {
        if self.ln <= other.ln { self } else { other }
    }

    /// Sums an iterator of magnitudes.
    pub fn sum<I: IntoIterator<Item = Mag>>(iter: I) -> Mag {
        iter.into_iter().fold(Mag::ZERO, Mag::add)
    }

    /// Relative closeness in the value domain: |a − b| ≤ tol·max(a, b),
    /// evaluated stably through logarithms.
    pub fn approx_eq(self, other: Mag, rel_tol: f64) -> bool {
        if self.is_zero() && other.is_zero() {
            return true;
        }
        if self.is_zero() || other.is_zero() {
            return false;
        }
        let d = (self.ln - other.ln).abs();
        // |a/b − 1| ≤ tol ⟺ |ln a − ln b| ≤ ln(1+tol) up to second order.
        d <= rel_tol.ln_1p()
    }
}

impl Eq for Mag {}

impl PartialOrd for Mag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Mag {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln.total_cmp(&other.ln)
    }
}

impl fmt::Debug for Mag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mag({} ~ ln {})", self.value(), self.ln)
    }
}

impl fmt::Display for Mag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_matches_plain_arithmetic() {
        let a = Mag::from_value(3.5);
        let b = Mag::from_value(0.25);
        assert!((a.add(b).value() - 3.75).abs() < 1e-14);
    }

    #[test]
    fn add_handles_zero_and_infinity() {
        assert_eq!(Mag::ZERO.add(Mag::ZERO), Mag::ZERO);
        assert_eq!(Mag::ZERO.add(Mag::ONE), Mag::ONE);
        assert_eq!(Mag::INFINITY.add(Mag::ONE), Mag::INFINITY);
    }

    #[test]
    fn sub_is_accurate_for_close_operands() {
        // e^{1e−9} − 1: a naive exp-then-subtract loses ~9 digits here.
        let a = Mag::from_ln(1e-9);
        let b = Mag::ONE;
        let d = a.checked_sub(b).unwrap().value();
        let exact = 1e-9f64.exp_m1();
        assert!((d - exact).abs() < 1e-13 * exact, "got {d}, want {exact}");
    }

    #[test]
    fn sub_refuses_negative_results() {
        assert!(Mag::ONE.checked_sub(Mag::from_value(2.0)).is_none());
        assert_eq!(Mag::ONE.checked_sub(Mag::ONE).unwrap(), Mag::ZERO);
    }

    #[test]
    fn works_far_outside_f64_range() {
        // Σ of two terms e^{1000} and e^{999}: representable only in logs.
        let a = Mag::from_ln(1000.0);
        let b = Mag::from_ln(999.0);
        let s = a.add(b);
        assert!((s.ln() - (1000.0 + (1.0f64 + (-1.0f64).exp()).ln())).abs() < 1e-12);
        // Powers keep working: (e^{1000})^{-2} = e^{-2000}.
        assert!((a.powf(-2.0).ln() + 2000.0).abs() < 1e-9);
    }

    #[test]
    fn ordering_is_total_and_value_consistent() {
        let mut v = vec![Mag::from_value(2.0), Mag::ZERO, Mag::from_value(0.5), Mag::ONE];
        v.sort();
        let vals: Vec<f64> = v.iter().map(|m| m.value()).collect();
        assert_eq!(vals, vec![0.0, 0.5, 1.0, 2.0]);
    }

    #[test]
    fn long_sums_stay_accurate() {
        // Σ_{k=1..10^4} 1/k² against the closed float sum.
        let mut plain = 0.0f64;
        let mut logd = Mag::ZERO;
        for k in 1..=10_000 {
            let t = 1.0 / (k as f64 * k as f64);
            plain += t;
            logd = logd.add(Mag::from_value(t));
        }
        assert!((logd.value() - plain).abs() / plain < 1e-12);
    }
}
