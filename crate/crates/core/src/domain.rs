//! Closed intervals, boxes and finite point vectors.

use std::fmt;
use std::ops::Deref;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("empty interval: lower bound {lo} exceeds upper bound {hi}")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("interval bound is NaN")]
    NanBound,
    #[error("box must have at least one dimension")]
    NoDimensions,
    #[error("point coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A closed interval `[lo, hi]` with `lo <= hi`. Degenerate intervals are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DomainError> {
        if lo.is_nan() || hi.is_nan() {
            return Err(DomainError::NanBound);
        }
        if lo > hi {
            return Err(DomainError::EmptyInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Builds an interval from two bounds known to be ordered; used by the
    /// interval arithmetic, where ordering holds by construction.
    pub(crate) fn from_ordered(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "unordered bounds [{lo}, {hi}]");
        Self { lo, hi }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let mid = 0.5 * self.lo + 0.5 * self.hi;
        mid.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Cartesian product of closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    dims: Vec<Interval>,
}

impl BoxRegion {
    pub fn new(dims: Vec<Interval>) -> Result<Self, DomainError> {
        if dims.is_empty() {
            return Err(DomainError::NoDimensions);
        }
        Ok(Self { dims })
    }

    /// Convenience constructor from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self, DomainError> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dims)
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::midpoint).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dims.len() && self.dims.iter().zip(p).all(|(iv, &v)| iv.contains(v))
    }

    /// Index and width of the widest dimension; ties go to the lowest index.
    pub fn widest(&self) -> (usize, f64) {
        let mut best = (0, self.dims[0].width());
        for (i, iv) in self.dims.iter().enumerate().skip(1) {
            if iv.width() > best.1 {
                best = (i, iv.width());
            }
        }
        best
    }

    /// Visits every corner of the box. Degenerate dimensions contribute a
    /// single coordinate, so no corner is produced twice.
    pub fn for_each_corner(&self, mut visit: impl FnMut(&[f64])) {
        let n = self.dims.len();
        let free: Vec<usize> = (0..n).filter(|&i| self.dims[i].width() > 0.0).collect();
        let mut corner: Vec<f64> = self.dims.iter().map(Interval::lo).collect();
        for mask in 0u64..(1u64 << free.len()) {
            for (bit, &d) in free.iter().enumerate() {
                corner[d] = if mask >> bit & 1 == 1 {
                    self.dims[d].hi()
                } else {
                    self.dims[d].lo()
                };
            }
            visit(&corner);
        }
    }
}

impl fmt::Display for BoxRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.dims.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

/// A point with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointVec(Vec<f64>);

impl PointVec {
    pub fn new(coords: Vec<f64>) -> Result<Self, DomainError> {
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DomainError::NonFinite { index, value });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Max-norm distance, used to detect repeated discretization points.
    pub fn max_abs_diff(&self, other: &PointVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for PointVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Display for PointVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

pub fn clamp_to_box(p: &PointVec, b: &BoxRegion) -> Result<PointVec, DomainError> {
    if p.len() != b.dim() {
        return Err(DomainError::DimensionMismatch {
            expected: b.dim(),
            got: p.len(),
        });
    }
    let coords = p.iter().zip(b.dims()).map(|(&v, iv)| iv.clamp(v)).collect();
    Ok(PointVec(coords))
}

/// Bisects the widest dimension at its midpoint.
pub fn split_widest(b: &BoxRegion) -> (BoxRegion, BoxRegion) {
    let (d, _) = b.widest();
    let iv = b.dims[d];
    let mid = iv.midpoint();
    let mut left = b.clone();
    let mut right = b.clone();
    left.dims[d] = Interval::from_ordered(iv.lo(), mid);
    right.dims[d] = Interval::from_ordered(mid, iv.hi());
    (left, right)
}
