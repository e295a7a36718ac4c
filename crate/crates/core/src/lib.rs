//! Discretization-based lower bounds for semi-infinite programs.
//!
//! A semi-infinite program minimizes `f(x)` over a box `X` subject to
//! `g(x, y) <= 0` for every `y` in a box `Y`. The lower bounding loop in
//! [`sip`] relaxes this to finitely many `y`, solves the relaxation to
//! certified global optimality with the interval branch-and-bound in
//! [`globalopt`], and asks an [`oracles::LlpOracle`] for a violated `y` to add.

pub mod cli;
pub mod domain;
pub mod expr;
pub mod globalopt;
pub mod oracles;
pub mod sip;

pub use domain::{clamp_to_box, split_widest, BoxRegion, DomainError, Interval, PointVec};
pub use expr::{parse, EvalError, Expr, ParseError, Var, VarAssignment, VarKind};
pub use globalopt::{
    grid_min, maximize, minimize, CertifiedMax, CertifiedMin, MinStatus, OptConfig, OptError,
};
pub use oracles::{
    AffineMap, AlphaConfig, AlphaOracle, ExactOracle, LlpOracle, OracleError, OracleOutcome,
    ScriptedOracle,
};
pub use sip::{
    builtin_counterexample, llp_certified_max, run_lower_bounding, solve_lbd, Discretization,
    IterationRecord, SipConfig, SipError, SipInstance, SolveReport, SolveStatus,
};
