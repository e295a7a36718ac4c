//! Expression language for objectives and constraints.
//!
//! Expressions are built over decision variables `x1..xN` and index
//! variables `y1..yM`. They can be evaluated at a point or over boxes
//! (natural interval extension or mean-value form).

mod interval;
mod meanvalue;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::domain::{BoxRegion, Interval};

pub use interval::PADDING;
pub use parse::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    X,
    Y,
}

/// A variable reference `x<index>` or `y<index>`; indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl Var {
    pub fn x(index: usize) -> Self {
        Self {
            kind: VarKind::X,
            index,
        }
    }

    pub fn y(index: usize) -> Self {
        Self {
            kind: VarKind::Y,
            index,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::X => write!(f, "x{}", self.index),
            VarKind::Y => write!(f, "y{}", self.index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("variable {0} is not bound")]
    UnboundVariable(Var),
    #[error("denominator interval {0} contains zero")]
    IntervalDivisionByZero(Interval),
}

/// Point values for the `x` and `y` variables. `y` may be empty for
/// expressions over `x` only.
#[derive(Debug, Clone, Copy)]
pub struct VarAssignment<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
}

impl<'a> VarAssignment<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        Self { x, y }
    }

    /// Binds only the variables of `kind`, leaving the other kind empty.
    pub fn only(kind: VarKind, values: &'a [f64]) -> Self {
        match kind {
            VarKind::X => Self { x: values, y: &[] },
            VarKind::Y => Self { x: &[], y: values },
        }
    }

    fn get(&self, v: Var) -> Result<f64, EvalError> {
        let slot = match v.kind {
            VarKind::X => self.x,
            VarKind::Y => self.y,
        };
        v.index
            .checked_sub(1)
            .and_then(|i| slot.get(i))
            .copied()
            .ok_or(EvalError::UnboundVariable(v))
    }
}

/// Interval ranges for the `x` and `y` variables.
#[derive(Debug, Clone, Copy)]
pub struct IntervalAssignment<'a> {
    pub x: &'a [Interval],
    pub y: &'a [Interval],
}

impl<'a> IntervalAssignment<'a> {
    pub fn only(kind: VarKind, ranges: &'a [Interval]) -> Self {
        match kind {
            VarKind::X => Self { x: ranges, y: &[] },
            VarKind::Y => Self { x: &[], y: ranges },
        }
    }

    fn get(&self, v: Var) -> Result<Interval, EvalError> {
        let slot = match v.kind {
            VarKind::X => self.x,
            VarKind::Y => self.y,
        };
        v.index
            .checked_sub(1)
            .and_then(|i| slot.get(i))
            .copied()
            .ok_or(EvalError::UnboundVariable(v))
    }
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Constant(v)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Self {
        Expr::Neg(Box::new(e))
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn powi(a: Expr, n: u32) -> Self {
        Expr::PowInt(Box::new(a), n)
    }

    pub fn eval_point(&self, a: &VarAssignment<'_>) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Constant(c) => *c,
            Expr::Var(v) => a.get(*v)?,
            Expr::Neg(e) => -e.eval_point(a)?,
            Expr::Add(l, r) => l.eval_point(a)? + r.eval_point(a)?,
            Expr::Sub(l, r) => l.eval_point(a)? - r.eval_point(a)?,
            Expr::Mul(l, r) => l.eval_point(a)? * r.eval_point(a)?,
            Expr::Div(l, r) => {
                let num = l.eval_point(a)?;
                let den = r.eval_point(a)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::PowInt(e, n) => interval::powi(e.eval_point(a)?, *n),
            Expr::Sin(e) => e.eval_point(a)?.sin(),
            Expr::Cos(e) => e.eval_point(a)?.cos(),
            Expr::Exp(e) => e.eval_point(a)?.exp(),
        })
    }

    /// Natural interval extension over the given ranges. The result encloses
    /// every value of [`Expr::eval_point`] for points inside the ranges.
    pub fn eval_interval_in(&self, a: &IntervalAssignment<'_>) -> Result<Interval, EvalError> {
        use interval as ia;
        Ok(match self {
            Expr::Constant(c) => Interval::point(*c),
            Expr::Var(v) => a.get(*v)?,
            Expr::Neg(e) => ia::neg(e.eval_interval_in(a)?),
            Expr::Add(l, r) => ia::add(l.eval_interval_in(a)?, r.eval_interval_in(a)?),
            Expr::Sub(l, r) => ia::sub(l.eval_interval_in(a)?, r.eval_interval_in(a)?),
            Expr::Mul(l, r) => ia::mul(l.eval_interval_in(a)?, r.eval_interval_in(a)?),
            Expr::Div(l, r) => ia::div(l.eval_interval_in(a)?, r.eval_interval_in(a)?)?,
            Expr::PowInt(e, n) => ia::pow_int(e.eval_interval_in(a)?, *n),
            Expr::Sin(e) => ia::sin(e.eval_interval_in(a)?),
            Expr::Cos(e) => ia::cos(e.eval_interval_in(a)?),
            Expr::Exp(e) => ia::exp(e.eval_interval_in(a)?),
        })
    }

    pub fn eval_interval(&self, x_box: &BoxRegion, y_box: &BoxRegion) -> Result<Interval, EvalError> {
        self.eval_interval_in(&IntervalAssignment {
            x: x_box.dims(),
            y: y_box.dims(),
        })
    }

    /// Largest index of a variable of `kind` referenced by the expression,
    /// or 0 when none is referenced.
    pub fn max_index(&self, kind: VarKind) -> usize {
        match self {
            Expr::Constant(_) => 0,
            Expr::Var(v) if v.kind == kind => v.index,
            Expr::Var(_) => 0,
            Expr::Neg(e) | Expr::PowInt(e, _) | Expr::Sin(e) | Expr::Cos(e) | Expr::Exp(e) => {
                e.max_index(kind)
            }
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.max_index(kind).max(r.max_index(kind))
            }
        }
    }

    /// Replaces every variable of `kind` with the matching entry of `values`.
    pub fn substitute(&self, kind: VarKind, values: &[f64]) -> Result<Expr, EvalError> {
        let sub = |e: &Expr| e.substitute(kind, values).map(Box::new);
        Ok(match self {
            Expr::Constant(c) => Expr::Constant(*c),
            Expr::Var(v) if v.kind == kind => {
                let value = v
                    .index
                    .checked_sub(1)
                    .and_then(|i| values.get(i))
                    .ok_or(EvalError::UnboundVariable(*v))?;
                Expr::Constant(*value)
            }
            Expr::Var(v) => Expr::Var(*v),
            Expr::Neg(e) => Expr::Neg(sub(e)?),
            Expr::Add(l, r) => Expr::Add(sub(l)?, sub(r)?),
            Expr::Sub(l, r) => Expr::Sub(sub(l)?, sub(r)?),
            Expr::Mul(l, r) => Expr::Mul(sub(l)?, sub(r)?),
            Expr::Div(l, r) => Expr::Div(sub(l)?, sub(r)?),
            Expr::PowInt(e, n) => Expr::PowInt(sub(e)?, *n),
            Expr::Sin(e) => Expr::Sin(sub(e)?),
            Expr::Cos(e) => Expr::Cos(sub(e)?),
            Expr::Exp(e) => Expr::Exp(sub(e)?),
        })
    }

    /// Fully parenthesized canonical text; `parse(&e.to_text())` rebuilds `e`.
    ///
    /// Negative constants are written as `(-c)`, which parses back as a
    /// negation of the literal `c`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Constant(c) if c.is_sign_negative() => write!(f, "(-{})", -c),
            Expr::Constant(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(l, r) => write!(f, "({l} + {r})"),
            Expr::Sub(l, r) => write!(f, "({l} - {r})"),
            Expr::Mul(l, r) => write!(f, "({l} * {r})"),
            Expr::Div(l, r) => write!(f, "({l} / {r})"),
            Expr::PowInt(e, n) => write!(f, "({e} ^ {n})"),
            Expr::Sin(e) => write!(f, "sin({e})"),
            Expr::Cos(e) => write!(f, "cos({e})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cex_g() -> Expr {
        parse("2*x1 - y1").unwrap()
    }

    #[test]
    fn point_eval_of_constraint() {
        let g = cex_g();
        assert_eq!(g.eval_point(&VarAssignment::new(&[1.0], &[1.0])).unwrap(), 1.0);
        assert_eq!(g.eval_point(&VarAssignment::new(&[0.25], &[0.25])).unwrap(), 0.25);
        let f = parse("-x1").unwrap();
        assert_eq!(f.eval_point(&VarAssignment::new(&[0.0], &[])).unwrap(), 0.0);
    }

    #[test]
    fn point_eval_errors() {
        let e = parse("x1 / (x1 - 1)").unwrap();
        assert_eq!(
            e.eval_point(&VarAssignment::new(&[1.0], &[])),
            Err(EvalError::DivisionByZero)
        );
        assert_eq!(
            cex_g().eval_point(&VarAssignment::new(&[1.0], &[])),
            Err(EvalError::UnboundVariable(Var::y(1)))
        );
    }

    #[test]
    fn interval_of_linear_form_covers_corner_range() {
        let g = cex_g();
        let b = BoxRegion::from_bounds(&[(-1.0, 1.0)]).unwrap();
        // Corner enumeration: 2x - y over {-1,1}^2 spans [-3, 3].
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                let v = g.eval_point(&VarAssignment::new(&[x], &[y])).unwrap();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert_eq!((lo, hi), (-3.0, 3.0));
        let iv = g.eval_interval(&b, &b).unwrap();
        assert!(iv.lo() <= lo && iv.hi() >= hi);
        assert!(iv.lo() >= -3.0 - 1e-9 && iv.hi() <= 3.0 + 1e-9);
    }

    #[test]
    fn even_power_is_tight_around_zero() {
        let e = parse("x1^2").unwrap();
        let b = BoxRegion::from_bounds(&[(-1.0, 1.0)]).unwrap();
        let iv = e.eval_interval(&b, &b).unwrap();
        assert!(iv.lo() <= 0.0 && iv.hi() >= 1.0);
        assert!(iv.lo() >= -1e-9 && iv.hi() <= 1.0 + 1e-9);
        // The product form overestimates, which is why PowInt is kept distinct.
        let prod = parse("x1*x1").unwrap().eval_interval(&b, &b).unwrap();
        assert!(prod.lo() <= -1.0);
    }

    #[test]
    fn sine_range_on_half_period() {
        let e = parse("sin(x1)").unwrap();
        let b = BoxRegion::from_bounds(&[(0.0, std::f64::consts::PI)]).unwrap();
        let iv = e.eval_interval(&b, &b).unwrap();
        assert!(iv.lo() <= 0.0 && iv.hi() >= 1.0);
    }

    #[test]
    fn interval_division_by_zero_is_rejected() {
        let e = parse("1 / x1").unwrap();
        let b = BoxRegion::from_bounds(&[(-1.0, 1.0)]).unwrap();
        assert!(matches!(
            e.eval_interval(&b, &b),
            Err(EvalError::IntervalDivisionByZero(_))
        ));
        let pos = BoxRegion::from_bounds(&[(1.0, 2.0)]).unwrap();
        let iv = e.eval_interval(&pos, &pos).unwrap();
        assert!(iv.lo() <= 0.5 && iv.hi() >= 1.0);
    }

    #[test]
    fn canonical_text() {
        assert_eq!(cex_g().to_text(), "((2 * x1) - y1)");
        assert_eq!(parse("-x1").unwrap().to_text(), "(-x1)");
        assert_eq!(Expr::Constant(-0.5).to_text(), "(-0.5)");
        assert_eq!(parse("exp(x2)^3").unwrap().to_text(), "(exp(x2) ^ 3)");
    }

    #[test]
    fn substitution_binds_constants() {
        let g = cex_g();
        let gx = g.substitute(VarKind::Y, &[0.5]).unwrap();
        assert_eq!(gx.max_index(VarKind::Y), 0);
        assert_eq!(gx.eval_point(&VarAssignment::new(&[1.0], &[])).unwrap(), 1.5);
        assert!(g.substitute(VarKind::X, &[]).is_err());
        assert_eq!(g.max_index(VarKind::X), 1);
    }
}
