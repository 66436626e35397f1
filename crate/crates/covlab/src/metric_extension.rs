//! The complete-metric construction on open subsets:
//!
//! ```text
//! d'(x, y) = d(x, y) + | 1/d(x, complement) - 1/d(y, complement) |
//! ```
//!
//! The correction term is the pullback pseudometric of `|.|` under
//! `x -> 1/d(x, complement)`, so `d'` is a metric dominating `d` that blows
//! up near the boundary; Cauchy sequences for `d'` stay uniformly away from
//! the complement, which is the quantitative content of completeness.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::geometry::{Norm, RegionSpec, Vector};

pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type ComplementDistanceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An open domain with a base metric and an oracle for the distance to the
/// domain's complement (positive on the domain).
#[derive(Clone)]
pub struct OpenSubsetMetric {
    pub domain: RegionSpec,
    base: DistanceFn,
    complement: ComplementDistanceFn,
}

impl std::fmt::Debug for OpenSubsetMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenSubsetMetric")
            .field("domain", &self.domain)
            .finish()
    }
}

impl OpenSubsetMetric {
    pub fn new<D, C>(domain: RegionSpec, base: D, complement: C) -> Self
    where
        D: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        C: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        OpenSubsetMetric {
            domain,
            base: Arc::new(base),
            complement: Arc::new(complement),
        }
    }

    /// Open interval `(a, b)` with the euclidean metric; complement
    /// distance `min(x - a, b - x)`.
    pub fn open_interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(CovError::InvalidParameter(format!(
                "interval needs a < b, got ({a}, {b})"
            )));
        }
        let domain = RegionSpec::predicate(
            crate::geometry::Aabb::from_bounds(&[a], &[b])?,
            move |x: &[f64]| x[0] > a && x[0] < b,
        );
        Ok(OpenSubsetMetric::new(
            domain,
            |x: &[f64], y: &[f64]| Norm::Euclidean.distance(x, y),
            move |x: &[f64]| (x[0] - a).min(b - x[0]),
        ))
    }

    /// Open box with the euclidean metric; complement distance is the
    /// smallest margin to a face.
    pub fn open_box(bounds: crate::geometry::Aabb) -> Self {
        let inner = bounds.clone();
        let inner2 = bounds.clone();
        let domain = RegionSpec::predicate(bounds, move |x: &[f64]| {
            (0..inner.dim()).all(|i| x[i] > inner.lower[i] && x[i] < inner.upper[i])
        });
        OpenSubsetMetric::new(
            domain,
            |x: &[f64], y: &[f64]| Norm::Euclidean.distance(x, y),
            move |x: &[f64]| {
                (0..inner2.dim())
                    .map(|i| (x[i] - inner2.lower[i]).min(inner2.upper[i] - x[i]))
                    .fold(f64::INFINITY, f64::min)
            },
        )
    }

    /// Open euclidean ball; complement distance `radius - |x - center|`.
    pub fn open_ball(center: Vector, radius: f64) -> Result<Self> {
        let ball = crate::geometry::Ball::new(center.clone(), radius, Norm::Euclidean)?;
        let bounds = ball.bounding_box();
        let c = center.clone();
        let domain = RegionSpec::predicate(bounds, move |x: &[f64]| {
            Norm::Euclidean.distance(x, c.as_slice()) < radius
        });
        Ok(OpenSubsetMetric::new(
            domain,
            |x: &[f64], y: &[f64]| Norm::Euclidean.distance(x, y),
            move |x: &[f64]| radius - Norm::Euclidean.distance(x, center.as_slice()),
        ))
    }

    pub fn base_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.base)(x, y)
    }

    pub fn complement_distance(&self, x: &[f64]) -> f64 {
        (self.complement)(x)
    }
}

/// The extended distance `d'`. Errors when either point touches the
/// boundary (zero complement distance).
pub fn extended_distance(m: &OpenSubsetMetric, x: &[f64], y: &[f64]) -> Result<f64> {
    let cx = m.complement_distance(x);
    let cy = m.complement_distance(y);
    if !(cx > 0.0) {
        return Err(CovError::BoundaryPoint { point: x.to_vec() });
    }
    if !(cy > 0.0) {
        return Err(CovError::BoundaryPoint { point: y.to_vec() });
    }
    Ok(m.base_distance(x, y) + (1.0 / cx - 1.0 / cy).abs())
}

/// Outcome of the quantitative completeness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EscapeCheck {
    /// The tail with `d'`-diameter within `bound` keeps at least
    /// `guaranteed` distance to the complement; `observed` is the actual
    /// tail infimum (always >= guaranteed up to rounding).
    Passed {
        tail_start: usize,
        guaranteed: f64,
        observed: f64,
    },
    /// No tail of the sequence has `d'`-diameter within `bound`; the
    /// completeness bound is vacuous.
    NotCauchy,
}

/// Quantitative completeness: if some tail of the sequence has
/// `d'`-diameter at most `bound`, every tail point `y` satisfies
/// `1/d(y, complement) <= 1/d(x0, complement) + bound`, so the tail stays
/// at least `1 / (1/d(x0, complement) + bound)` away from the boundary.
/// Sequences that are not `d'`-Cauchy at scale `bound` report
/// [`EscapeCheck::NotCauchy`].
pub fn boundary_escape_check(
    m: &OpenSubsetMetric,
    sequence: &[Vector],
    bound: f64,
) -> Result<EscapeCheck> {
    if sequence.is_empty() {
        return Err(CovError::InvalidParameter(
            "sequence must be nonempty".into(),
        ));
    }
    if !(bound > 0.0) {
        return Err(CovError::InvalidParameter(
            "diameter bound must be positive".into(),
        ));
    }
    // largest tail whose pairwise d'-distances all fit within the bound;
    // a singleton tail carries no Cauchy information, so at least two
    // points are required
    let n = sequence.len();
    let mut tail_start = None;
    'outer: for start in 0..n.saturating_sub(1) {
        for i in start..n {
            for j in i + 1..n {
                let d = extended_distance(m, sequence[i].as_slice(), sequence[j].as_slice())?;
                if d > bound {
                    continue 'outer;
                }
            }
        }
        tail_start = Some(start);
        break;
    }
    let Some(start) = tail_start else {
        return Ok(EscapeCheck::NotCauchy);
    };
    let c0 = m.complement_distance(sequence[start].as_slice());
    let guaranteed = 1.0 / (1.0 / c0 + bound);
    let observed = sequence[start..]
        .iter()
        .map(|p| m.complement_distance(p.as_slice()))
        .fold(f64::INFINITY, f64::min);
    Ok(EscapeCheck::Passed {
        tail_start: start,
        guaranteed,
        observed,
    })
}
