//! Points, norms, and elementary regions of `R^d`.
//!
//! The ambient space is `R^d` with a selectable norm (euclidean or sup).
//! Regions are axis-aligned boxes, norm balls, or opaque membership oracles
//! carrying an explicit bounding box.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};

/// A point of `R^d`, `d >= 1`, with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector {
    coords: Vec<f64>,
}

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(CovError::InvalidParameter(
                "vector must have dimension >= 1".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(CovError::InvalidParameter(
                "vector coordinates must be finite".into(),
            ));
        }
        Ok(Vector { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn zeros(d: usize) -> Self {
        Vector {
            coords: vec![0.0; d.max(1)],
        }
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = CovError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.coords
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords)
    }
}

/// The norm equipping `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Sup,
}

impl Norm {
    pub fn length(&self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Norm::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Norm::Sup => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }
}

/// An axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lower: Vector,
    pub upper: Vector,
}

impl Aabb {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(CovError::DimensionMismatch {
                expected: lower.dim(),
                got: upper.dim(),
            });
        }
        for i in 0..lower.dim() {
            if lower[i] > upper[i] {
                return Err(CovError::InvalidParameter(format!(
                    "box lower[{i}] = {} exceeds upper[{i}] = {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Aabb { lower, upper })
    }

    /// Convenience constructor from coordinate slices.
    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Aabb::new(Vector::new(lower.to_vec())?, Vector::new(upper.to_vec())?)
    }

    /// The cube `[-h, h]^d`.
    pub fn centered_cube(d: usize, h: f64) -> Self {
        Aabb {
            lower: Vector {
                coords: vec![-h; d],
            },
            upper: Vector { coords: vec![h; d] },
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    /// Product of side lengths; zero for degenerate boxes.
    pub fn volume(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.upper[i] - self.lower[i])
            .product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    /// Whether `other` is contained in `self` (componentwise, exact).
    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|i| other.lower[i] >= self.lower[i] && other.upper[i] <= self.upper[i])
    }

    pub fn center(&self) -> Vector {
        Vector {
            coords: (0..self.dim())
                .map(|i| 0.5 * (self.lower[i] + self.upper[i]))
                .collect(),
        }
    }

    /// Point of the box closest to `x` (componentwise clamp).
    pub fn clamp_point(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| x[i].clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Aabb) -> Aabb {
        Aabb {
            lower: Vector {
                coords: (0..self.dim())
                    .map(|i| self.lower[i].min(other.lower[i]))
                    .collect(),
            },
            upper: Vector {
                coords: (0..self.dim())
                    .map(|i| self.upper[i].max(other.upper[i]))
                    .collect(),
            },
        }
    }

    /// Box inflated by `factor` of each half-side around its center.
    pub fn inflate(&self, factor: f64) -> Aabb {
        let c = self.center();
        Aabb {
            lower: Vector {
                coords: (0..self.dim())
                    .map(|i| c[i] - (c[i] - self.lower[i]) * (1.0 + factor))
                    .collect(),
            },
            upper: Vector {
                coords: (0..self.dim())
                    .map(|i| c[i] + (self.upper[i] - c[i]) * (1.0 + factor))
                    .collect(),
            },
        }
    }
}

/// A norm ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vector,
    pub radius: f64,
    #[serde(default)]
    pub norm: Norm,
}

impl Ball {
    pub fn new(center: Vector, radius: f64, norm: Norm) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(CovError::InvalidParameter(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(Ball {
            center,
            radius,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.norm.distance(self.center.as_slice(), x) <= self.radius
    }

    /// Tight bounding box (the sup ball of the same radius).
    pub fn bounding_box(&self) -> Aabb {
        Aabb {
            lower: Vector {
                coords: self
                    .center
                    .as_slice()
                    .iter()
                    .map(|c| c - self.radius)
                    .collect(),
            },
            upper: Vector {
                coords: self
                    .center
                    .as_slice()
                    .iter()
                    .map(|c| c + self.radius)
                    .collect(),
            },
        }
    }

    /// Exact ball/box intersection test: the closest point of the box to the
    /// center decides, for either norm.
    pub fn intersects_box(&self, b: &Aabb) -> bool {
        let nearest = b.clamp_point(self.center.as_slice());
        self.norm.distance(self.center.as_slice(), &nearest) <= self.radius
    }
}

/// Deterministic membership oracle for an opaque region.
pub type MembershipFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A region of `R^d`: a box, a ball, or a membership oracle with a finite
/// bounding box. Measurability of oracle regions is the caller's obligation.
#[derive(Clone)]
pub enum RegionSpec {
    Box(Aabb),
    Ball(Ball),
    Predicate {
        bounds: Aabb,
        contains: MembershipFn,
    },
}

impl fmt::Debug for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionSpec::Box(b) => f.debug_tuple("Box").field(b).finish(),
            RegionSpec::Ball(b) => f.debug_tuple("Ball").field(b).finish(),
            RegionSpec::Predicate { bounds, .. } => {
                f.debug_struct("Predicate").field("bounds", bounds).finish()
            }
        }
    }
}

impl RegionSpec {
    pub fn predicate<F>(bounds: Aabb, contains: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        RegionSpec::Predicate {
            bounds,
            contains: Arc::new(contains),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegionSpec::Box(b) => b.dim(),
            RegionSpec::Ball(b) => b.dim(),
            RegionSpec::Predicate { bounds, .. } => bounds.dim(),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            RegionSpec::Box(b) => b.clone(),
            RegionSpec::Ball(b) => b.bounding_box(),
            RegionSpec::Predicate { bounds, .. } => bounds.clone(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            RegionSpec::Box(b) => b.contains(x),
            RegionSpec::Ball(b) => b.contains(x),
            RegionSpec::Predicate { bounds, contains } => bounds.contains(x) && contains(x),
        }
    }

    /// Whether the region intersects `cell`. Exact for boxes and balls;
    /// oracle regions are probed at the corners, the center, and a 3^d
    /// lattice, which can miss thin features (callers own that risk).
    pub fn intersects_box(&self, cell: &Aabb) -> bool {
        match self {
            RegionSpec::Box(b) => {
                (0..b.dim()).all(|i| cell.lower[i] <= b.upper[i] && cell.upper[i] >= b.lower[i])
            }
            RegionSpec::Ball(b) => b.intersects_box(cell),
            RegionSpec::Predicate { .. } => probe_points(cell, 3).iter().any(|p| self.contains(p)),
        }
    }

    /// Whether the region contains `cell` entirely. Exact for boxes; for
    /// balls the farthest corner decides (exact for both norms); oracle
    /// regions are probed as in `intersects_box` (conservative only up to
    /// probe density).
    pub fn contains_box(&self, cell: &Aabb) -> bool {
        match self {
            RegionSpec::Box(b) => b.contains_box(cell),
            RegionSpec::Ball(b) => {
                let c = b.center.as_slice();
                let mut far = 0.0f64;
                match b.norm {
                    Norm::Euclidean => {
                        let mut sum = 0.0;
                        for i in 0..cell.dim() {
                            let d = (cell.lower[i] - c[i])
                                .abs()
                                .max((cell.upper[i] - c[i]).abs());
                            sum += d * d;
                        }
                        far = sum.sqrt();
                    }
                    Norm::Sup => {
                        for i in 0..cell.dim() {
                            far = far
                                .max((cell.lower[i] - c[i]).abs())
                                .max((cell.upper[i] - c[i]).abs());
                        }
                    }
                }
                far <= b.radius
            }
            RegionSpec::Predicate { .. } => probe_points(cell, 3).iter().all(|p| self.contains(p)),
        }
    }
}

fn probe_points(cell: &Aabb, per_axis: usize) -> Vec<Vec<f64>> {
    let d = cell.dim();
    let mut pts = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        pts.push(
            (0..d)
                .map(|i| {
                    let t = idx[i] as f64 / (per_axis - 1) as f64;
                    cell.lower[i] + t * (cell.upper[i] - cell.lower[i])
                })
                .collect(),
        );
        let mut k = 0;
        loop {
            if k == d {
                return pts;
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One cell of a mesh cover: a grid box together with its midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshBox {
    pub cell: Aabb,
    pub center: Vector,
}

/// Covers `region` with grid-aligned boxes of side `epsilon`, anchored at
/// the lower corner of the region's bounding box. Returns every cell that
/// intersects the region; their union contains the region and their
/// interiors are pairwise disjoint.
pub fn mesh_cover(region: &RegionSpec, epsilon: f64) -> Result<Vec<MeshBox>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(CovError::InvalidParameter(format!(
            "mesh size must be positive, got {epsilon}"
        )));
    }
    let bounds = region.bounding_box();
    let d = bounds.dim();
    // Per-axis cell counts; a tiny relative slack keeps exact divisions like
    // 1.0 / 0.5 from spilling into a spurious extra layer of cells.
    let counts: Vec<usize> = (0..d)
        .map(|i| {
            let w = bounds.upper[i] - bounds.lower[i];
            if w <= 0.0 {
                1
            } else {
                (w / epsilon - 1e-9).floor() as usize + 1
            }
        })
        .collect();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let lower: Vec<f64> = (0..d)
            .map(|i| bounds.lower[i] + idx[i] as f64 * epsilon)
            .collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + epsilon).collect();
        let cell = Aabb {
            lower: Vector { coords: lower },
            upper: Vector { coords: upper },
        };
        if region.intersects_box(&cell) {
            let center = cell.center();
            cells.push(MeshBox { cell, center });
        }
        let mut k = 0;
        loop {
            if k == d {
                return Ok(cells);
            }
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
