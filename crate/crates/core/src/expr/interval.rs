//! Interval arithmetic primitives.
//!
//! Rounding is left at round-to-nearest. Every operation widens its result
//! by a relative [`PADDING`] on each endpoint instead.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::domain::Interval;

use super::EvalError;

/// Relative widening applied to both endpoints of every operation.
pub const PADDING: f64 = 1e-12;

fn padded(lo: f64, hi: f64) -> Interval {
    let lo = if lo.is_nan() { f64::NEG_INFINITY } else { lo };
    let hi = if hi.is_nan() { f64::INFINITY } else { hi };
    let lo = if lo.is_finite() { lo - PADDING * lo.abs() } else { lo };
    let hi = if hi.is_finite() { hi + PADDING * hi.abs() } else { hi };
    Interval::from_ordered(lo, hi)
}

fn hull4(a: f64, b: f64, c: f64, d: f64) -> Interval {
    if a.is_nan() || b.is_nan() || c.is_nan() || d.is_nan() {
        return Interval::from_ordered(f64::NEG_INFINITY, f64::INFINITY);
    }
    padded(a.min(b).min(c.min(d)), a.max(b).max(c.max(d)))
}

/// `x^n` by repeated multiplication, shared by the point and interval paths.
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

pub(super) fn neg(a: Interval) -> Interval {
    Interval::from_ordered(-a.hi(), -a.lo())
}

pub(super) fn add(a: Interval, b: Interval) -> Interval {
    padded(a.lo() + b.lo(), a.hi() + b.hi())
}

pub(super) fn sub(a: Interval, b: Interval) -> Interval {
    padded(a.lo() - b.hi(), a.hi() - b.lo())
}

pub(super) fn mul(a: Interval, b: Interval) -> Interval {
    hull4(
        a.lo() * b.lo(),
        a.lo() * b.hi(),
        a.hi() * b.lo(),
        a.hi() * b.hi(),
    )
}

pub(super) fn div(a: Interval, b: Interval) -> Result<Interval, EvalError> {
    if b.contains(0.0) {
        return Err(EvalError::IntervalDivisionByZero(b));
    }
    Ok(hull4(
        a.lo() / b.lo(),
        a.lo() / b.hi(),
        a.hi() / b.lo(),
        a.hi() / b.hi(),
    ))
}

pub(super) fn pow_int(a: Interval, n: u32) -> Interval {
    if n == 0 {
        return Interval::point(1.0);
    }
    let (pl, ph) = (powi(a.lo(), n), powi(a.hi(), n));
    if n % 2 == 1 {
        return padded(pl, ph);
    }
    if a.lo() >= 0.0 {
        padded(pl, ph)
    } else if a.hi() <= 0.0 {
        padded(ph, pl)
    } else {
        padded(0.0, pl.max(ph))
    }
}

pub(super) fn exp(a: Interval) -> Interval {
    padded(a.lo().exp(), a.hi().exp())
}

/// Whether `[lo, hi]` contains a point `phase + 2k*pi` for some integer k.
fn hits_phase(lo: f64, hi: f64, phase: f64) -> bool {
    let k = ((lo - phase) / TAU).ceil();
    phase + k * TAU <= hi
}

/// Range of a 2pi-periodic function over `a`, from its endpoint values and
/// the phases of its maximum and minimum.
fn periodic(a: Interval, f: fn(f64) -> f64, max_phase: f64, min_phase: f64) -> Interval {
    if !a.lo().is_finite() || !a.hi().is_finite() || a.width() >= TAU {
        return padded(-1.0, 1.0);
    }
    let (fl, fh) = (f(a.lo()), f(a.hi()));
    let hi = if hits_phase(a.lo(), a.hi(), max_phase) {
        1.0
    } else {
        fl.max(fh)
    };
    let lo = if hits_phase(a.lo(), a.hi(), min_phase) {
        -1.0
    } else {
        fl.min(fh)
    };
    padded(lo, hi)
}

pub(super) fn sin(a: Interval) -> Interval {
    periodic(a, f64::sin, FRAC_PI_2, -FRAC_PI_2)
}

pub(super) fn cos(a: Interval) -> Interval {
    periodic(a, f64::cos, 0.0, PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn periodic_ranges() {
        let s = sin(iv(0.1, 0.2));
        assert!(s.lo() <= 0.1f64.sin() && s.hi() >= 0.2f64.sin());
        assert!(s.hi() < 0.5);
        let s = sin(iv(3.0, 5.0));
        assert!(s.lo() <= -1.0 && s.hi() >= 3.0f64.sin());
        let c = cos(iv(-0.5, 0.5));
        assert!(c.hi() >= 1.0 && c.lo() <= 0.5f64.cos());
        let c = cos(iv(2.0, 4.0));
        assert!(c.lo() <= -1.0);
        assert_eq!(cos(iv(0.0, 7.0)).lo(), -1.0 - PADDING);
    }

    #[test]
    fn odd_and_even_powers() {
        let p = pow_int(iv(-2.0, 1.0), 3);
        assert!(p.lo() <= -8.0 && p.hi() >= 1.0);
        let p = pow_int(iv(-2.0, -1.0), 2);
        assert!(p.lo() <= 1.0 && p.lo() > 0.99 && p.hi() >= 4.0);
        assert_eq!(pow_int(iv(-3.0, 3.0), 0), Interval::point(1.0));
        assert_eq!(pow_int(iv(-3.0, 2.0), 4).lo(), 0.0);
    }

    #[test]
    fn overflow_widens_to_whole_line() {
        let big = exp(iv(0.0, 1000.0));
        let m = mul(big, iv(0.0, 0.0));
        assert!(m.lo() == f64::NEG_INFINITY && m.hi() == f64::INFINITY);
    }
}
