//! Lower-level program oracles.
//!
//! An oracle, queried at `x_bar`, either certifies that
//! `g*(x_bar) = max_{y in Y} g(x_bar, y)` is at most `eps_feas`, or returns a
//! point `y` with `g(x_bar, y) > 0`.
//!
//! * [`ExactOracle`] returns a certified global maximizer.
//! * [`AlphaOracle`] returns the *worst* point still satisfying
//!   `g(x_bar, y) >= alpha * g*(x_bar)`. This meets the weakened hypothesis
//!   under which lower bounds still converge, with as little slack as
//!   possible.
//! * [`ScriptedOracle`] returns `clamp(A x_bar + b)` whenever that point has a
//!   positive constraint value. Positivity alone is not enough for
//!   convergence; on the built-in counterexample with the identity map the
//!   lower bounds stall at 0 instead of reaching 1/2.

use thiserror::Error;

use crate::domain::{clamp_to_box, DomainError, PointVec};
use crate::globalopt::{MinStatus, OptConfig};
use crate::sip::{llp_certified_max, SipError, SipInstance};

/// Number of times the exact oracle tightens `eps_obj` when the certified
/// bound and the incumbent straddle the feasibility threshold.
const MAX_REFINEMENTS: usize = 8;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Feasible {
        /// Certified upper bound on `g*(x_bar)`, at most `eps_feas`.
        certified_max: f64,
    },
    Violation {
        y: PointVec,
        /// `g(x_bar, y) > 0`.
        g_value: f64,
        /// Best known value of `g*(x_bar)`, when the oracle computed one.
        g_star_estimate: Option<f64>,
    },
}

impl OracleOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, OracleOutcome::Feasible { .. })
    }

    pub fn status_str(&self) -> &'static str {
        match self {
            OracleOutcome::Feasible { .. } => "feasible",
            OracleOutcome::Violation { .. } => "violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Sip(#[from] SipError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("lower-level solve exhausted its node budget after {nodes} nodes")]
    NodeBudget { nodes: usize },
    #[error("lower-level solve could not separate g* from eps_feas = {eps_feas} (bound {upper_bound}, incumbent {incumbent})")]
    Unresolved {
        eps_feas: f64,
        upper_bound: f64,
        incumbent: f64,
    },
    #[error("g(x, .) is undefined at {0}")]
    Undefined(PointVec),
    #[error("bisection for the alpha-target {target} did not converge within {MAX_BISECTION_STEPS} steps")]
    BisectionFailed { target: f64 },
    #[error("invalid alpha configuration: {0}")]
    InvalidAlpha(String),
    #[error("affine map is {rows}x{cols} but the instance needs {want_rows}x{want_cols}")]
    MapDimension {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("affine map needs {expected} entries (row-major matrix then offset), got {got}")]
    MapEntries { expected: usize, got: usize },
}

pub trait LlpOracle {
    fn name(&self) -> &str;

    fn query(
        &self,
        inst: &SipInstance,
        x_bar: &PointVec,
        eps_feas: f64,
        cfg: &OptConfig,
    ) -> Result<OracleOutcome, OracleError>;
}

/// Result of a certified lower-level solve, resolved against `eps_feas`.
enum LlpSolution {
    Feasible { certified_max: f64 },
    Violated {
        y_star: PointVec,
        g_star: f64,
        upper_bound: f64,
    },
}

fn g_at(inst: &SipInstance, x: &PointVec, y: &PointVec) -> Result<f64, OracleError> {
    inst.g(x, y)
        .filter(|v| !v.is_nan())
        .ok_or_else(|| OracleError::Undefined(y.clone()))
}

/// Solves the lower-level program, tightening `eps_obj` until the certified
/// upper bound is below `eps_feas` or the incumbent is strictly positive.
fn solve_llp(
    inst: &SipInstance,
    x_bar: &PointVec,
    eps_feas: f64,
    cfg: &OptConfig,
) -> Result<LlpSolution, OracleError> {
    let mut opt = *cfg;
    let mut last = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..=MAX_REFINEMENTS {
        let m = llp_certified_max(inst, x_bar, &opt)?;
        if m.status == MinStatus::DepthCapReached {
            return Err(OracleError::NodeBudget { nodes: m.nodes });
        }
        if m.upper_bound <= eps_feas {
            return Ok(LlpSolution::Feasible {
                certified_max: m.upper_bound,
            });
        }
        if let (Some(y), Some(v)) = (m.incumbent, m.incumbent_value) {
            if v > 0.0 {
                let g_star = g_at(inst, x_bar, &y)?;
                return Ok(LlpSolution::Violated {
                    y_star: y,
                    g_star,
                    upper_bound: m.upper_bound,
                });
            }
            last = (m.upper_bound, v);
        }
        opt.eps_obj /= 10.0;
    }
    Err(OracleError::Unresolved {
        eps_feas,
        upper_bound: last.0,
        incumbent: last.1,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactOracle;

impl LlpOracle for ExactOracle {
    fn name(&self) -> &str {
        "exact"
    }

    fn query(
        &self,
        inst: &SipInstance,
        x_bar: &PointVec,
        eps_feas: f64,
        cfg: &OptConfig,
    ) -> Result<OracleOutcome, OracleError> {
        Ok(match solve_llp(inst, x_bar, eps_feas, cfg)? {
            LlpSolution::Feasible { certified_max } => OracleOutcome::Feasible { certified_max },
            LlpSolution::Violated { y_star, g_star, .. } => OracleOutcome::Violation {
                y: y_star,
                g_value: g_star,
                g_star_estimate: Some(g_star),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaConfig {
    alpha: f64,
    value_tol: f64,
}

impl AlphaConfig {
    pub fn new(alpha: f64) -> Result<Self, OracleError> {
        Self::with_tolerance(alpha, 1e-9)
    }

    pub fn with_tolerance(alpha: f64, value_tol: f64) -> Result<Self, OracleError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(OracleError::InvalidAlpha(format!(
                "alpha must lie strictly between 0 and 1, got {alpha}"
            )));
        }
        if !(value_tol > 0.0 && value_tol.is_finite()) {
            return Err(OracleError::InvalidAlpha(format!(
                "value_tol must be positive, got {value_tol}"
            )));
        }
        Ok(Self { alpha, value_tol })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value_tol(&self) -> f64 {
        self.value_tol
    }
}

/// Returns a point whose constraint value lands in
/// `[alpha * g*, alpha * g* + value_tol]` whenever the box allows it.
///
/// The search starts from the corner of `Y` where `g(x_bar, .)` is smallest
/// and bisects along the segment towards the certified maximizer.
#[derive(Debug, Clone, Copy)]
pub struct AlphaOracle {
    pub config: AlphaConfig,
}

impl AlphaOracle {
    pub fn new(config: AlphaConfig) -> Self {
        Self { config }
    }
}

impl LlpOracle for AlphaOracle {
    fn name(&self) -> &str {
        "alpha"
    }

    fn query(
        &self,
        inst: &SipInstance,
        x_bar: &PointVec,
        eps_feas: f64,
        cfg: &OptConfig,
    ) -> Result<OracleOutcome, OracleError> {
        let (mut y_star, mut g_star, mut upper) = match solve_llp(inst, x_bar, eps_feas, cfg)? {
            LlpSolution::Feasible { certified_max } => {
                return Ok(OracleOutcome::Feasible { certified_max })
            }
            LlpSolution::Violated {
                y_star,
                g_star,
                upper_bound,
            } => (y_star, g_star, upper_bound),
        };
        let alpha = self.config.alpha;
        // The target is taken from the certified bound, so that any point
        // reaching it is alpha-compliant. Tighten until it is reachable.
        let mut opt = *cfg;
        for _ in 0..MAX_REFINEMENTS {
            if alpha * upper <= g_star {
                break;
            }
            opt.eps_obj /= 10.0;
            let m = llp_certified_max(inst, x_bar, &opt)?;
            if m.status == MinStatus::DepthCapReached {
                break;
            }
            upper = upper.min(m.upper_bound);
            if let Some(y) = m.incumbent {
                let v = g_at(inst, x_bar, &y)?;
                if v > g_star {
                    (y_star, g_star) = (y, v);
                }
            }
        }
        let target = alpha * upper;
        if target > g_star {
            // Not separable within the refinement budget: the maximizer
            // itself is the best available answer.
            return Ok(OracleOutcome::Violation {
                y: y_star,
                g_value: g_star,
                g_star_estimate: Some(g_star),
            });
        }
        let tol = self.config.value_tol;

        let mut anchor: Option<(Vec<f64>, f64)> = None;
        inst.y_box().for_each_corner(|c| {
            if let Some(v) = inst.g(x_bar, c).filter(|v| !v.is_nan()) {
                if anchor.as_ref().is_none_or(|(_, best)| v < *best) {
                    anchor = Some((c.to_vec(), v));
                }
            }
        });
        let (anchor, anchor_value) = anchor.ok_or_else(|| OracleError::Undefined(y_star.clone()))?;
        let violation = |y: PointVec, g_value: f64| OracleOutcome::Violation {
            y,
            g_value,
            g_star_estimate: Some(g_star),
        };
        if anchor_value >= target {
            return Ok(violation(PointVec::new(anchor)?, anchor_value));
        }

        // g(anchor) < target <= g(y_star); keep that bracket on [0, 1].
        let along = |s: f64| -> Result<PointVec, OracleError> {
            let p = anchor
                .iter()
                .zip(y_star.iter())
                .map(|(a, b)| a + s * (b - a))
                .collect();
            Ok(clamp_to_box(&PointVec::new(p)?, inst.y_box())?)
        };
        let (mut below, mut above) = (0.0f64, 1.0f64);
        if g_star <= target + tol {
            return Ok(violation(y_star, g_star));
        }
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (below + above);
            let p = along(mid)?;
            let v = g_at(inst, x_bar, &p)?;
            if v >= target && v <= target + tol {
                return Ok(violation(p, v));
            }
            if v < target {
                below = mid;
            } else {
                above = mid;
            }
        }
        Err(OracleError::BisectionFailed { target })
    }
}

/// `y = A x + b` with `A` stored row-major, `dim(Y)` rows by `dim(X)` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(rows: usize, cols: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self, OracleError> {
        if matrix.len() != rows * cols || offset.len() != rows {
            return Err(OracleError::MapEntries {
                expected: rows * cols + rows,
                got: matrix.len() + offset.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            matrix,
            offset,
        })
    }

    /// Splits a flat list into a row-major `rows x cols` matrix followed by
    /// a `rows`-vector offset.
    pub fn from_flat(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, OracleError> {
        let expected = rows * cols + rows;
        if entries.len() != expected {
            return Err(OracleError::MapEntries {
                expected,
                got: entries.len(),
            });
        }
        let (m, b) = entries.split_at(rows * cols);
        Self::new(rows, cols, m.to_vec(), b.to_vec())
    }

    pub fn identity(n: usize) -> Self {
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            matrix,
            offset: vec![0.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks(self.cols.max(1))
            .take(self.rows)
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    pub map: AffineMap,
}

impl ScriptedOracle {
    pub fn new(map: AffineMap) -> Self {
        Self { map }
    }
}

impl LlpOracle for ScriptedOracle {
    fn name(&self) -> &str {
        "scripted"
    }

    fn query(
        &self,
        inst: &SipInstance,
        x_bar: &PointVec,
        eps_feas: f64,
        cfg: &OptConfig,
    ) -> Result<OracleOutcome, OracleError> {
        let (want_rows, want_cols) = (inst.y_box().dim(), inst.x_box().dim());
        if self.map.rows != want_rows || self.map.cols != want_cols || x_bar.len() != want_cols {
            return Err(OracleError::MapDimension {
                rows: self.map.rows,
                cols: self.map.cols,
                want_rows,
                want_cols,
            });
        }
        let y = clamp_to_box(&PointVec::new(self.map.apply(x_bar))?, inst.y_box())?;
        match inst.g(x_bar, &y) {
            Some(v) if v > 0.0 => Ok(OracleOutcome::Violation {
                y,
                g_value: v,
                g_star_estimate: None,
            }),
            _ => ExactOracle.query(inst, x_bar, eps_feas, cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sip::builtin_counterexample;

    fn pv(c: &[f64]) -> PointVec {
        PointVec::new(c.to_vec()).unwrap()
    }

    fn violation(o: OracleOutcome) -> (PointVec, f64, Option<f64>) {
        match o {
            OracleOutcome::Violation {
                y,
                g_value,
                g_star_estimate,
            } => (y, g_value, g_star_estimate),
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn exact_oracle_on_counterexample() {
        let inst = builtin_counterexample();
        let cfg = OptConfig::default();
        let (y, g, _) = violation(ExactOracle.query(&inst, &pv(&[1.0]), 1e-6, &cfg).unwrap());
        assert_eq!((y.coords(), g), (&[-1.0][..], 3.0));
        let (y, g, _) = violation(ExactOracle.query(&inst, &pv(&[0.0]), 1e-6, &cfg).unwrap());
        assert_eq!((y.coords(), g), (&[-1.0][..], 1.0));
        match ExactOracle.query(&inst, &pv(&[-0.5]), 1e-6, &cfg).unwrap() {
            OracleOutcome::Feasible { certified_max } => assert!(certified_max <= 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_oracle_refines_near_threshold() {
        // g* = 5e-8 at the non-dyadic y = 0.3. With a loose eps_obj the first
        // solve stops on a negative incumbent while its bound exceeds eps_feas.
        use crate::domain::BoxRegion;
        use crate::expr::parse;
        let b = BoxRegion::from_bounds(&[(-1.0, 1.0)]).unwrap();
        let g = parse("0*x1 + 0.00000005 - (y1 - 0.3)^2").unwrap();
        let inst = SipInstance::new("bump", parse("x1").unwrap(), g, b.clone(), b).unwrap();
        let loose = OptConfig {
            eps_obj: 1e-3,
            ..OptConfig::default()
        };
        let first = llp_certified_max(&inst, &pv(&[0.0]), &loose).unwrap();
        assert!(first.upper_bound > 1e-8 && first.incumbent_value.unwrap() < 0.0, "{first:?}");
        let (y, g, _) = violation(ExactOracle.query(&inst, &pv(&[0.0]), 1e-8, &loose).unwrap());
        assert!(g > 0.0 && g <= 5e-8);
        assert!((y[0] - 0.3).abs() < 2.3e-4);
    }

    #[test]
    fn alpha_oracle_examples() {
        let inst = builtin_counterexample();
        let cfg = OptConfig::default();
        let oracle = AlphaOracle::new(AlphaConfig::new(0.5).unwrap());
        // 2 - y = 1.5  =>  y = 0.5
        let (y, g, gs) = violation(oracle.query(&inst, &pv(&[1.0]), 1e-6, &cfg).unwrap());
        assert_eq!(gs, Some(3.0));
        assert!((g - 1.5).abs() <= 1e-9 && g >= 1.5);
        assert!((y[0] - 0.5).abs() <= 1e-8);
        // 1/2 - y = 0.75  =>  y = -0.25
        let (y, g, gs) = violation(oracle.query(&inst, &pv(&[0.25]), 1e-6, &cfg).unwrap());
        assert_eq!(gs, Some(1.5));
        assert!((g - 0.75).abs() <= 1e-9);
        assert!((y[0] + 0.25).abs() <= 1e-8);
        for alpha in [0.1, 0.5, 0.9] {
            let o = AlphaOracle::new(AlphaConfig::new(alpha).unwrap());
            assert!(o.query(&inst, &pv(&[-0.6]), 1e-6, &cfg).unwrap().is_feasible());
        }
    }

    #[test]
    fn alpha_oracle_returns_anchor_when_it_suffices() {
        // g* = 2x + 1, g(anchor = corner y = 1) = 2x - 1. With x = 1 and
        // alpha = 0.1 the target 0.3 is already exceeded at the anchor.
        let inst = builtin_counterexample();
        let oracle = AlphaOracle::new(AlphaConfig::new(0.1).unwrap());
        let (y, g, _) = violation(oracle.query(&inst, &pv(&[1.0]), 1e-6, &OptConfig::default()).unwrap());
        assert_eq!((y.coords(), g), (&[1.0][..], 1.0));
    }

    #[test]
    fn alpha_config_rejects_endpoints() {
        assert!(AlphaConfig::new(0.0).is_err());
        assert!(AlphaConfig::new(1.0).is_err());
        assert!(AlphaConfig::new(f64::NAN).is_err());
        assert!(AlphaConfig::with_tolerance(0.5, 0.0).is_err());
    }

    #[test]
    fn scripted_oracle_follows_the_diagonal() {
        let inst = builtin_counterexample();
        let cfg = OptConfig::default();
        let oracle = ScriptedOracle::new(AffineMap::identity(1));
        let (y, g, gs) = violation(oracle.query(&inst, &pv(&[1.0]), 1e-6, &cfg).unwrap());
        assert_eq!((y.coords(), g, gs), (&[1.0][..], 1.0, None));
        let (y, g, _) = violation(oracle.query(&inst, &pv(&[0.5]), 1e-6, &cfg).unwrap());
        assert_eq!((y.coords(), g), (&[0.5][..], 0.5));
        // g(x, x) = x <= 0 triggers the exact fallback, and g*(-0.6) = -0.2.
        match oracle.query(&inst, &pv(&[-0.6]), 1e-6, &cfg).unwrap() {
            OracleOutcome::Feasible { certified_max } => {
                assert!((-0.2 - 1e-9..=1e-6).contains(&certified_max))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scripted_oracle_clamps_and_checks_dimensions() {
        let inst = builtin_counterexample();
        let cfg = OptConfig::default();
        let map = AffineMap::from_flat(1, 1, &[3.0, 0.0]).unwrap();
        let (y, _, _) = violation(ScriptedOracle::new(map).query(&inst, &pv(&[0.9]), 1e-6, &cfg).unwrap());
        assert_eq!(y.coords(), &[1.0]);
        let wrong = ScriptedOracle::new(AffineMap::identity(2));
        assert!(matches!(
            wrong.query(&inst, &pv(&[0.5]), 1e-6, &cfg),
            Err(OracleError::MapDimension { .. })
        ));
        assert!(matches!(
            AffineMap::from_flat(1, 1, &[1.0]),
            Err(OracleError::MapEntries { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn affine_map_application() {
        let m = AffineMap::from_flat(2, 3, &[1.0, 2.0, 3.0, 0.0, -1.0, 0.5, 10.0, 20.0]).unwrap();
        assert_eq!(m.apply(&[1.0, 1.0, 2.0]), vec![1.0 + 2.0 + 6.0 + 10.0, -1.0 + 1.0 + 20.0]);
    }
}
