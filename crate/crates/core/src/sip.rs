//! Semi-infinite program instances and the discretization-based lower
//! bounding loop.
//!
//! At iteration `k` the finite program
//!
//! ```text
//! min f(x)  s.t.  x in X,  g(x, y) <= 0 for all y in D_k
//! ```
//!
//! is solved to global optimality, giving a lower bound on the semi-infinite
//! optimum and a point `x_k`. An oracle then either certifies
//! `max_{y in Y} g(x_k, y) <= eps_feas`, ending the run, or returns a point
//! `y_k` with `g(x_k, y_k) > 0`, which is appended to `D_k`.

use std::fmt;

use thiserror::Error;

use crate::domain::{BoxRegion, DomainError, Interval, PointVec};
use crate::expr::{parse, Expr, VarAssignment, VarKind};
use crate::globalopt::{
    maximize_over, minimize, CertifiedMax, CertifiedMin, MinStatus, OptConfig, OptError,
};
use crate::oracles::{LlpOracle, OracleOutcome};

/// Two discretization points closer than this (max-norm) are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SipError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("point {point} lies outside {region}")]
    OutsideBox { point: PointVec, region: BoxRegion },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Optimizer(#[from] OptError),
    #[error(
        "oracle contract violated at iteration {k}: returned y = {y} with g(x, y) = {g_value}, which is not positive"
    )]
    OracleContractViolation { k: usize, y: PointVec, g_value: f64 },
}

/// `min f(x) s.t. x in X, g(x, y) <= 0 for all y in Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SipInstance {
    name: String,
    objective: Expr,
    constraint: Expr,
    x_box: BoxRegion,
    y_box: BoxRegion,
}

impl SipInstance {
    pub fn new(
        name: impl Into<String>,
        objective: Expr,
        constraint: Expr,
        x_box: BoxRegion,
        y_box: BoxRegion,
    ) -> Result<Self, SipError> {
        if objective.max_index(VarKind::Y) > 0 {
            return Err(SipError::InvalidInstance(
                "objective must not reference y variables".into(),
            ));
        }
        for (label, e) in [("objective", &objective), ("constraint", &constraint)] {
            let xi = e.max_index(VarKind::X);
            if xi > x_box.dim() {
                return Err(SipError::InvalidInstance(format!(
                    "{label} references x{xi} but only {} x variables are declared",
                    x_box.dim()
                )));
            }
            let yi = e.max_index(VarKind::Y);
            if yi > y_box.dim() {
                return Err(SipError::InvalidInstance(format!(
                    "{label} references y{yi} but only {} y variables are declared",
                    y_box.dim()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            objective,
            constraint,
            x_box,
            y_box,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn constraint(&self) -> &Expr {
        &self.constraint
    }

    pub fn x_box(&self) -> &BoxRegion {
        &self.x_box
    }

    pub fn y_box(&self) -> &BoxRegion {
        &self.y_box
    }

    /// `g(x, y)` evaluated at a point; `None` if undefined there.
    pub fn g(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        self.constraint.eval_point(&VarAssignment::new(x, y)).ok()
    }

    pub fn f(&self, x: &[f64]) -> Option<f64> {
        self.objective.eval_point(&VarAssignment::new(x, &[])).ok()
    }
}

/// The counterexample instance: `min -x s.t. 2x - y <= 0 for all y in [-1, 1]`,
/// `x in [-1, 1]`. Its feasible set is `[-1, -1/2]` and its optimum is `1/2`.
pub fn builtin_counterexample() -> SipInstance {
    let unit = BoxRegion::new(vec![Interval::from_ordered(-1.0, 1.0)]).expect("one dimension");
    SipInstance::new(
        "cex",
        parse("-x1").expect("valid objective"),
        parse("2*x1 - y1").expect("valid constraint"),
        unit.clone(),
        unit,
    )
    .expect("valid instance")
}

/// The finite index set used by the lower bounding problem. Points can only
/// be appended.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Discretization {
    points: Vec<PointVec>,
}

impl Discretization {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<PointVec>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[PointVec] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: PointVec) {
        self.points.push(p);
    }

    pub fn find_near(&self, p: &PointVec, tol: f64) -> Option<&PointVec> {
        self.points
            .iter()
            .find(|q| q.len() == p.len() && q.max_abs_diff(p) <= tol)
    }

    fn check_inside(&self, y_box: &BoxRegion) -> Result<(), SipError> {
        match self.points.iter().find(|p| !y_box.contains(p)) {
            Some(p) => Err(SipError::OutsideBox {
                point: p.clone(),
                region: y_box.clone(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SipConfig {
    /// `g*(x) <= eps_feas` (certified) counts as feasible.
    pub eps_feas: f64,
    pub max_iter: usize,
    pub opt: OptConfig,
    /// Discretization used at iteration 1.
    pub initial_discretization: Discretization,
}

impl Default for SipConfig {
    fn default() -> Self {
        Self {
            eps_feas: 1e-6,
            max_iter: 100,
            opt: OptConfig::default(),
            initial_discretization: Discretization::new(),
        }
    }
}

impl SipConfig {
    pub fn validate(&self) -> Result<(), SipError> {
        if !(self.eps_feas > 0.0 && self.eps_feas.is_finite()) {
            return Err(SipError::InvalidConfig(format!(
                "eps_feas must be positive, got {}",
                self.eps_feas
            )));
        }
        if self.max_iter == 0 {
            return Err(SipError::InvalidConfig("max_iter must be at least 1".into()));
        }
        self.opt.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Lower bounding solution; absent when that problem was infeasible.
    pub x_bar: Option<PointVec>,
    /// Certified lower bound on the semi-infinite optimum.
    pub f_lbd: f64,
    pub incumbent_value: Option<f64>,
    pub oracle: Option<OracleOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    ConvergedOptimal,
    InfeasibleSip,
    MaxIterReached,
    SubsolverFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::ConvergedOptimal => "converged-optimal",
            SolveStatus::InfeasibleSip => "infeasible-sip",
            SolveStatus::MaxIterReached => "max-iter-reached",
            SolveStatus::SubsolverFailure => "subsolver-failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: Vec<IterationRecord>,
    pub final_lower_bound: f64,
    /// Present iff the status is `ConvergedOptimal`.
    pub optimal_point: Option<PointVec>,
    pub discretization: Discretization,
    pub diagnostic: Option<String>,
}

/// Solves the lower bounding problem for the discretization `d`.
pub fn solve_lbd(
    inst: &SipInstance,
    d: &Discretization,
    cfg: &OptConfig,
) -> Result<CertifiedMin, SipError> {
    d.check_inside(inst.y_box())?;
    let constraints = d
        .points()
        .iter()
        .map(|y| inst.constraint().substitute(VarKind::Y, y))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SipError::InvalidInstance(e.to_string()))?;
    Ok(minimize(inst.objective(), inst.x_box(), &constraints, cfg)?)
}

/// Certified maximum of `g(x_bar, .)` over `Y`.
pub fn llp_certified_max(
    inst: &SipInstance,
    x_bar: &PointVec,
    cfg: &OptConfig,
) -> Result<CertifiedMax, SipError> {
    if !inst.x_box().contains(x_bar) {
        return Err(SipError::OutsideBox {
            point: x_bar.clone(),
            region: inst.x_box().clone(),
        });
    }
    let g_at_x = inst
        .constraint()
        .substitute(VarKind::X, x_bar)
        .map_err(|e| SipError::InvalidInstance(e.to_string()))?;
    Ok(maximize_over(VarKind::Y, &g_at_x, inst.y_box(), cfg)?)
}

/// Runs the lower bounding procedure until the oracle certifies feasibility,
/// the lower bounding problem turns out infeasible, or `max_iter` runs out.
///
/// Reported bounds are made non-decreasing by carrying the previous bound
/// forward when a subsolve returns a slightly weaker one; both are valid
/// lower bounds.
pub fn run_lower_bounding(
    inst: &SipInstance,
    oracle: &dyn LlpOracle,
    cfg: &SipConfig,
) -> Result<SolveReport, SipError> {
    cfg.validate()?;
    let mut d = cfg.initial_discretization.clone();
    d.check_inside(inst.y_box())?;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut best_bound = f64::NEG_INFINITY;

    let report = |status, iterations, final_lower_bound, optimal_point, d, diagnostic| SolveReport {
        status,
        iterations,
        final_lower_bound,
        optimal_point,
        discretization: d,
        diagnostic,
    };

    for k in 1..=cfg.max_iter {
        let lbd = solve_lbd(inst, &d, &cfg.opt)?;
        match lbd.status {
            MinStatus::Infeasible => {
                iterations.push(IterationRecord {
                    k,
                    x_bar: None,
                    f_lbd: f64::INFINITY,
                    incumbent_value: None,
                    oracle: None,
                });
                return Ok(report(
                    SolveStatus::InfeasibleSip,
                    iterations,
                    f64::INFINITY,
                    None,
                    d,
                    None,
                ));
            }
            MinStatus::DepthCapReached => {
                let diag = format!(
                    "lower bounding problem at iteration {k} exhausted its node budget after {} nodes",
                    lbd.nodes
                );
                return Ok(report(
                    SolveStatus::SubsolverFailure,
                    iterations,
                    best_bound,
                    None,
                    d,
                    Some(diag),
                ));
            }
            MinStatus::Solved => {}
        }
        let (Some(x_bar), Some(incumbent_value)) = (lbd.incumbent, lbd.incumbent_value) else {
            unreachable!("solved lower bounding problem carries an incumbent");
        };
        best_bound = best_bound.max(lbd.lower_bound);

        let outcome = match oracle.query(inst, &x_bar, cfg.eps_feas, &cfg.opt) {
            Ok(o) => o,
            Err(e) => {
                let diag = format!("oracle `{}` failed at iteration {k}: {e}", oracle.name());
                return Ok(report(
                    SolveStatus::SubsolverFailure,
                    iterations,
                    best_bound,
                    None,
                    d,
                    Some(diag),
                ));
            }
        };
        let record = IterationRecord {
            k,
            x_bar: Some(x_bar.clone()),
            f_lbd: best_bound,
            incumbent_value: Some(incumbent_value),
            oracle: Some(outcome.clone()),
        };

        match outcome {
            OracleOutcome::Feasible { .. } => {
                iterations.push(record);
                return Ok(report(
                    SolveStatus::ConvergedOptimal,
                    iterations,
                    best_bound,
                    Some(x_bar),
                    d,
                    None,
                ));
            }
            OracleOutcome::Violation { y, .. } => {
                let g_value = inst.g(&x_bar, &y).unwrap_or(f64::NAN);
                if !(g_value > 0.0) || !inst.y_box().contains(&y) {
                    return Err(SipError::OracleContractViolation { k, y, g_value });
                }
                if let Some(existing) = d.find_near(&y, DUPLICATE_TOL) {
                    let diag = format!(
                        "oracle returned {y} at iteration {k}, which repeats discretization point {existing}"
                    );
                    iterations.push(record);
                    return Ok(report(
                        SolveStatus::SubsolverFailure,
                        iterations,
                        best_bound,
                        None,
                        d,
                        Some(diag),
                    ));
                }
                iterations.push(record);
                d.push(y);
            }
        }
    }

    Ok(report(
        SolveStatus::MaxIterReached,
        iterations,
        best_bound,
        None,
        d,
        None,
    ))
}
