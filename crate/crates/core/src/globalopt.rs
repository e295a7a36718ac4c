//! Deterministic interval branch-and-bound over a box.
//!
//! Nodes are processed best-first by their objective lower bound, FIFO on
//! ties. A node is discarded when some constraint's interval lower bound
//! exceeds `eps_feas`, and pruned when its bound cannot improve the incumbent
//! by more than `eps_obj` (relative to `max(1, |incumbent|)`). Incumbents come
//! from box midpoints and corners whose constraints are all `<= eps_feas`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::domain::{split_widest, BoxRegion, PointVec};
use crate::expr::{Expr, IntervalAssignment, Var, VarAssignment, VarKind};

/// Boxes up to this dimension have all corners probed for incumbents.
const MAX_CORNER_DIMS: usize = 12;
/// Split depth after which an unresolved interval division aborts the solve.
const DIVISION_DEPTH_CAP: u32 = 64;
const GRID_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("variable {0} is not covered by the search box")]
    UncoveredVariable(Var),
    #[error("grid of {size} points exceeds the cap of {GRID_CAP}")]
    GridTooLarge { size: u128 },
    #[error("grid needs at least 2 points per dimension, got {0}")]
    GridTooCoarse(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig {
    pub eps_obj: f64,
    pub eps_feas: f64,
    pub max_nodes: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            eps_obj: 1e-6,
            eps_feas: 1e-8,
            max_nodes: 1_000_000,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.eps_obj > 0.0 && self.eps_obj.is_finite()) {
            return Err(OptError::InvalidConfig(format!(
                "eps_obj must be positive, got {}",
                self.eps_obj
            )));
        }
        if !(self.eps_feas > 0.0 && self.eps_feas.is_finite()) {
            return Err(OptError::InvalidConfig(format!(
                "eps_feas must be positive, got {}",
                self.eps_feas
            )));
        }
        if self.max_nodes == 0 {
            return Err(OptError::InvalidConfig("max_nodes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinStatus {
    Solved,
    Infeasible,
    /// The node budget (or the division split-depth cap) ran out; the bounds
    /// are valid but not within tolerance.
    DepthCapReached,
}

/// Result of [`minimize`]. `lower_bound` is a certified lower bound on the
/// constrained minimum (`+inf` when infeasible).
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedMin {
    pub incumbent: Option<PointVec>,
    pub incumbent_value: Option<f64>,
    pub lower_bound: f64,
    pub status: MinStatus,
    pub nodes: usize,
}

/// Result of [`maximize`]. `upper_bound` is a certified upper bound on the
/// supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedMax {
    pub incumbent: Option<PointVec>,
    pub incumbent_value: Option<f64>,
    pub upper_bound: f64,
    pub status: MinStatus,
    pub nodes: usize,
}

struct Node {
    region: BoxRegion,
    lower: f64,
    depth: u32,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Assessment {
    Infeasible,
    Live { lower: f64, division_pending: bool },
}

struct Search<'a> {
    kind: VarKind,
    objective: &'a Expr,
    constraints: &'a [Expr],
    cfg: &'a OptConfig,
    best: Option<(Vec<f64>, f64)>,
}

impl Search<'_> {
    fn assess(&mut self, region: &BoxRegion) -> Assessment {
        let ranges = IntervalAssignment::only(self.kind, region.dims());
        let mut division_pending = false;
        for c in self.constraints {
            match c.eval_interval_centered(self.kind, &ranges) {
                Ok(iv) if iv.lo() > self.cfg.eps_feas => return Assessment::Infeasible,
                Ok(_) => {}
                Err(_) => division_pending = true,
            }
        }
        let lower = match self.objective.eval_interval_centered(self.kind, &ranges) {
            Ok(iv) => iv.lo(),
            Err(_) => {
                division_pending = true;
                f64::NEG_INFINITY
            }
        };
        self.probe(&region.midpoint());
        if region.dim() <= MAX_CORNER_DIMS {
            region.for_each_corner(|c| self.probe(c));
        }
        Assessment::Live {
            lower,
            division_pending,
        }
    }

    /// Objective value at `p` if every constraint is within `eps_feas`.
    fn feasible_value(&self, p: &[f64]) -> Option<f64> {
        let at = VarAssignment::only(self.kind, p);
        for c in self.constraints {
            match c.eval_point(&at) {
                Ok(v) if v <= self.cfg.eps_feas => {}
                _ => return None,
            }
        }
        self.objective.eval_point(&at).ok().filter(|v| !v.is_nan())
    }

    fn probe(&mut self, p: &[f64]) {
        let Some(value) = self.feasible_value(p) else {
            return;
        };
        if self.best.as_ref().is_none_or(|(_, b)| value < *b) {
            self.best = Some((p.to_vec(), value));
        }
    }

    fn prune_threshold(&self) -> Option<f64> {
        self.best
            .as_ref()
            .map(|(_, v)| v - self.cfg.eps_obj * v.abs().max(1.0))
    }
}

fn check_coverage(kind: VarKind, dim: usize, exprs: &[&Expr]) -> Result<(), OptError> {
    let other = match kind {
        VarKind::X => VarKind::Y,
        VarKind::Y => VarKind::X,
    };
    for e in exprs {
        let stray = e.max_index(other);
        if stray > 0 {
            return Err(OptError::UncoveredVariable(Var { kind: other, index: stray }));
        }
        let top = e.max_index(kind);
        if top > dim {
            return Err(OptError::UncoveredVariable(Var { kind, index: top }));
        }
    }
    Ok(())
}

/// Minimizes `objective` over `region` subject to `c(x) <= 0` for every
/// constraint, searching over the `x` variables.
pub fn minimize(
    objective: &Expr,
    region: &BoxRegion,
    constraints: &[Expr],
    cfg: &OptConfig,
) -> Result<CertifiedMin, OptError> {
    minimize_over(VarKind::X, objective, region, constraints, cfg)
}

/// [`minimize`] with the box bound to variables of `kind`.
pub fn minimize_over(
    kind: VarKind,
    objective: &Expr,
    region: &BoxRegion,
    constraints: &[Expr],
    cfg: &OptConfig,
) -> Result<CertifiedMin, OptError> {
    cfg.validate()?;
    let mut all: Vec<&Expr> = constraints.iter().collect();
    all.push(objective);
    check_coverage(kind, region.dim(), &all)?;

    let mut search = Search {
        kind,
        objective,
        constraints,
        cfg,
        best: None,
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut nodes = 1usize;
    // Minimum bound over regions dropped without being split.
    let mut floor = f64::INFINITY;

    let finish = |search: Search<'_>, lower_bound: f64, status: MinStatus, nodes: usize| {
        let (incumbent, incumbent_value) = match search.best {
            Some((p, v)) => (PointVec::new(p).ok(), Some(v)),
            None => (None, None),
        };
        let status = match (status, &incumbent) {
            (MinStatus::Solved, None) => MinStatus::Infeasible,
            (s, _) => s,
        };
        let lower_bound = match status {
            MinStatus::Infeasible => f64::INFINITY,
            _ => lower_bound,
        };
        CertifiedMin {
            incumbent,
            incumbent_value,
            lower_bound,
            status,
            nodes,
        }
    };

    if let Assessment::Live { lower, .. } = search.assess(region) {
        heap.push(Node {
            region: region.clone(),
            lower,
            depth: 0,
            seq,
        });
        seq += 1;
    }

    while let Some(node) = heap.pop() {
        if let Some(threshold) = search.prune_threshold() {
            if node.lower >= threshold {
                // Every queued node has a bound at least this large.
                return Ok(finish(search, floor.min(node.lower), MinStatus::Solved, nodes));
            }
        }
        if nodes + 2 > cfg.max_nodes {
            return Ok(finish(
                search,
                floor.min(node.lower),
                MinStatus::DepthCapReached,
                nodes,
            ));
        }
        let (d, width) = node.region.widest();
        let mid = node.region.dims()[d].midpoint();
        if width == 0.0 || mid <= node.region.dims()[d].lo() || mid >= node.region.dims()[d].hi() {
            // Unsplittable: its midpoint and corners were already probed exactly.
            let mut any_feasible = search.feasible_value(&node.region.midpoint()).is_some();
            node.region.for_each_corner(|c| {
                any_feasible |= search.feasible_value(c).is_some();
            });
            if any_feasible {
                floor = floor.min(node.lower);
            }
            continue;
        }
        let (left, right) = split_widest(&node.region);
        for child in [left, right] {
            nodes += 1;
            let Assessment::Live {
                lower,
                division_pending,
            } = search.assess(&child)
            else {
                continue;
            };
            let depth = node.depth + 1;
            if division_pending && depth >= DIVISION_DEPTH_CAP {
                let lower = heap.peek().map_or(node.lower, |n| n.lower.min(node.lower));
                return Ok(finish(
                    search,
                    floor.min(lower),
                    MinStatus::DepthCapReached,
                    nodes,
                ));
            }
            let lower = lower.max(node.lower);
            if let Some(threshold) = search.prune_threshold() {
                if lower >= threshold {
                    floor = floor.min(lower);
                    continue;
                }
            }
            heap.push(Node {
                region: child,
                lower,
                depth,
                seq,
            });
            seq += 1;
        }
    }

    let lower_bound = match &search.best {
        Some((_, v)) => floor.min(*v),
        None => f64::INFINITY,
    };
    Ok(finish(search, lower_bound, MinStatus::Solved, nodes))
}

/// Maximizes `objective` over `region` (variables `x`), unconstrained.
pub fn maximize(objective: &Expr, region: &BoxRegion, cfg: &OptConfig) -> Result<CertifiedMax, OptError> {
    maximize_over(VarKind::X, objective, region, cfg)
}

pub fn maximize_over(
    kind: VarKind,
    objective: &Expr,
    region: &BoxRegion,
    cfg: &OptConfig,
) -> Result<CertifiedMax, OptError> {
    let negated = Expr::neg(objective.clone());
    let m = minimize_over(kind, &negated, region, &[], cfg)?;
    Ok(CertifiedMax {
        incumbent: m.incumbent,
        incumbent_value: m.incumbent_value.map(|v| -v),
        upper_bound: -m.lower_bound,
        status: m.status,
        nodes: m.nodes,
    })
}

/// Brute-force minimum over a uniform grid (corners included) of points
/// where every constraint is `<= 0`. Returns `+inf` when no grid point is
/// feasible.
pub fn grid_min(
    objective: &Expr,
    region: &BoxRegion,
    constraints: &[Expr],
    points_per_dim: usize,
) -> Result<f64, OptError> {
    grid_min_with(VarKind::X, objective, region, constraints, points_per_dim, 0.0)
}

/// [`grid_min`] over variables of `kind`, accepting constraints `<= feas_tol`.
pub fn grid_min_with(
    kind: VarKind,
    objective: &Expr,
    region: &BoxRegion,
    constraints: &[Expr],
    points_per_dim: usize,
    feas_tol: f64,
) -> Result<f64, OptError> {
    if points_per_dim < 2 {
        return Err(OptError::GridTooCoarse(points_per_dim));
    }
    let size = (points_per_dim as u128)
        .checked_pow(region.dim() as u32)
        .unwrap_or(u128::MAX);
    if size > GRID_CAP {
        return Err(OptError::GridTooLarge { size });
    }
    let mut all: Vec<&Expr> = constraints.iter().collect();
    all.push(objective);
    check_coverage(kind, region.dim(), &all)?;

    let axes: Vec<Vec<f64>> = region
        .dims()
        .iter()
        .map(|iv| grid_axis(iv.lo(), iv.hi(), points_per_dim))
        .collect();
    let mut idx = vec![0usize; region.dim()];
    let mut p: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best = f64::INFINITY;
    loop {
        let at = VarAssignment::only(kind, &p);
        let feasible = constraints
            .iter()
            .all(|c| matches!(c.eval_point(&at), Ok(v) if v <= feas_tol));
        if feasible {
            if let Ok(v) = objective.eval_point(&at) {
                if v < best {
                    best = v;
                }
            }
        }
        // Odometer increment.
        let mut d = 0;
        loop {
            if d == idx.len() {
                return Ok(best);
            }
            idx[d] += 1;
            if idx[d] < points_per_dim {
                p[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            p[d] = axes[d][0];
            d += 1;
        }
    }
}

/// `n` uniformly spaced points from `lo` to `hi`, both endpoints exact.
pub fn grid_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = hi - lo;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + span * (i as f64) / ((n - 1) as f64)
            }
        })
        .collect()
}
