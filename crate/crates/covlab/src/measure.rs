//! Measures on `R^d` and seeded Monte Carlo measure estimation.
//!
//! A measure is represented as a density against Lebesgue measure (constant
//! scale, analytic oracle, or piecewise-constant grid) or as a finite set of
//! weighted point masses. Haar measures collapse to scaled Lebesgue, so a
//! scale factor is all the generality the toolkit needs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::geometry::{Aabb, RegionSpec, Vector};
use crate::sampler::{mc_estimate, uniform_in, Estimate, SeededSampler};

/// Nonnegative density oracle.
pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Piecewise-constant density on a box, row-major over a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub bounds: Aabb,
    /// Cells per axis.
    pub shape: Vec<usize>,
    /// Row-major nonnegative cell values (last axis fastest).
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(bounds: Aabb, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.len() != bounds.dim() || shape.contains(&0) {
            return Err(CovError::InvalidParameter(
                "grid shape must match the box dimension with nonzero extents".into(),
            ));
        }
        if values.len() != shape.iter().product::<usize>() {
            return Err(CovError::InvalidParameter(format!(
                "grid expects {} cell values, got {}",
                shape.iter().product::<usize>(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CovError::InvalidParameter(
                "grid cell values must be finite and nonnegative".into(),
            ));
        }
        Ok(GridDensity {
            bounds,
            shape,
            values,
        })
    }

    /// Build a grid by sampling a density at cell midpoints.
    pub fn tabulate<F>(bounds: Aabb, shape: Vec<usize>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let d = bounds.dim();
        if shape.len() != d || shape.contains(&0) {
            return Err(CovError::InvalidParameter("bad grid shape".into()));
        }
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let mid: Vec<f64> = (0..d)
                .map(|i| {
                    let w = (bounds.upper[i] - bounds.lower[i]) / shape[i] as f64;
                    bounds.lower[i] + (idx[i] as f64 + 0.5) * w
                })
                .collect();
            values.push(f(&mid));
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        GridDensity::new(bounds, shape, values)
    }

    /// Density at `x`; zero outside the grid box.
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.bounds.dim();
        let mut flat = 0usize;
        for i in 0..d {
            if x[i] < self.bounds.lower[i] || x[i] > self.bounds.upper[i] {
                return 0.0;
            }
            let w = (self.bounds.upper[i] - self.bounds.lower[i]) / self.shape[i] as f64;
            let mut k = if w > 0.0 {
                ((x[i] - self.bounds.lower[i]) / w) as usize
            } else {
                0
            };
            if k >= self.shape[i] {
                k = self.shape[i] - 1;
            }
            flat = flat * self.shape[i] + k;
        }
        self.values[flat]
    }
}

/// A measure on `R^d`.
#[derive(Clone)]
pub enum MeasureModel {
    /// `scale * Lebesgue`.
    Lebesgue { scale: f64 },
    /// Absolutely continuous with an analytic density oracle.
    Density { density: DensityFn },
    /// Piecewise-constant density on a grid; zero outside its box.
    Grid(GridDensity),
    /// Finite sum of weighted point masses.
    WeightedSamples {
        points: Vec<Vector>,
        weights: Vec<f64>,
    },
}

impl fmt::Debug for MeasureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureModel::Lebesgue { scale } => write!(f, "Lebesgue {{ scale: {scale} }}"),
            MeasureModel::Density { .. } => write!(f, "Density {{ .. }}"),
            MeasureModel::Grid(g) => write!(f, "Grid {{ shape: {:?} }}", g.shape),
            MeasureModel::WeightedSamples { points, .. } => {
                write!(f, "WeightedSamples {{ n: {} }}", points.len())
            }
        }
    }
}

impl MeasureModel {
    pub fn lebesgue(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(CovError::InvalidParameter(format!(
                "Lebesgue scale must be positive, got {scale}"
            )));
        }
        Ok(MeasureModel::Lebesgue { scale })
    }

    pub fn density<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        MeasureModel::Density {
            density: Arc::new(f),
        }
    }

    pub fn weighted_samples(points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(CovError::InvalidParameter(
                "weighted samples need one weight per point".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CovError::InvalidParameter(
                "sample weights must be finite and nonnegative".into(),
            ));
        }
        Ok(MeasureModel::WeightedSamples { points, weights })
    }

    /// Density against Lebesgue at `x`. Point-mass measures have no density;
    /// callers handle them separately (see [`mc_measure`]).
    pub fn density_at(&self, x: &[f64]) -> f64 {
        match self {
            MeasureModel::Lebesgue { scale } => *scale,
            MeasureModel::Density { density } => density(x),
            MeasureModel::Grid(g) => g.density(x),
            MeasureModel::WeightedSamples { .. } => 0.0,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, MeasureModel::WeightedSamples { .. })
    }
}

/// Monte Carlo estimate of `mu(region)`.
///
/// Density measures are integrated by uniform sampling of the region's
/// bounding box; point-mass measures are summed exactly (std error 0).
/// Deterministic for a fixed sampler, independent of worker count.
pub fn mc_measure(
    region: &RegionSpec,
    mu: &MeasureModel,
    sampler: &SeededSampler,
    n: usize,
) -> Result<Estimate> {
    if n == 0 {
        return Err(CovError::InvalidParameter(
            "sample count must be >= 1".into(),
        ));
    }
    if let MeasureModel::WeightedSamples { points, weights } = mu {
        let total = points
            .iter()
            .zip(weights)
            .filter(|(p, _)| region.contains(p.as_slice()))
            .map(|(_, w)| *w)
            .sum();
        return Ok(Estimate::exact(total));
    }
    let bounds = region.bounding_box();
    let vol = bounds.volume();
    if vol == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let d = bounds.dim();
    Ok(mc_estimate(sampler, n, vol, |rng, x| {
        x.clear();
        for i in 0..d {
            x.push(uniform_in(rng, bounds.lower[i], bounds.upper[i]));
        }
        if region.contains(x) {
            mu.density_at(x)
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Norm};

    fn unit_square() -> Aabb {
        Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn full_bounding_box_is_exact() {
        let region = RegionSpec::Box(unit_square());
        let mu = MeasureModel::lebesgue(1.0).unwrap();
        let e = mc_measure(&region, &mu, &SeededSampler::new(3), 1000).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn disc_area_matches_pi() {
        let ball = Ball::new(Vector::new(vec![0.0, 0.0]).unwrap(), 1.0, Norm::Euclidean).unwrap();
        let region = RegionSpec::Ball(ball);
        let mu = MeasureModel::lebesgue(1.0).unwrap();
        let e = mc_measure(&region, &mu, &SeededSampler::new(11), 1_000_000).unwrap();
        assert!(
            (e.value - std::f64::consts::PI).abs() < 3.0 * e.std_error,
            "estimate {} +- {}",
            e.value,
            e.std_error
        );
    }

    #[test]
    fn zero_weights_give_zero_mass() {
        let region = RegionSpec::Box(unit_square());
        let mu = MeasureModel::weighted_samples(
            vec![
                Vector::new(vec![0.5, 0.5]).unwrap(),
                Vector::new(vec![0.1, 0.9]).unwrap(),
            ],
            vec![0.0, 0.0],
        )
        .unwrap();
        let e = mc_measure(&region, &mu, &SeededSampler::new(5), 10).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn weighted_samples_sum_inside_region() {
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.0], &[1.0]).unwrap());
        let mu = MeasureModel::weighted_samples(
            vec![
                Vector::new(vec![0.5]).unwrap(),
                Vector::new(vec![2.0]).unwrap(),
            ],
            vec![0.25, 4.0],
        )
        .unwrap();
        let e = mc_measure(&region, &mu, &SeededSampler::new(5), 10).unwrap();
        assert_eq!(e.value, 0.25);
    }

    #[test]
    fn zero_volume_bounding_box_returns_zero() {
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.0, 0.5], &[1.0, 0.5]).unwrap());
        let mu = MeasureModel::lebesgue(1.0).unwrap();
        let e = mc_measure(&region, &mu, &SeededSampler::new(5), 10).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn determinism_bitwise() {
        let ball = Ball::new(Vector::new(vec![0.2, 0.1]).unwrap(), 0.7, Norm::Euclidean).unwrap();
        let region = RegionSpec::Ball(ball);
        let mu = MeasureModel::lebesgue(2.5).unwrap();
        let a = mc_measure(&region, &mu, &SeededSampler::new(9), 50_000).unwrap();
        let b = mc_measure(&region, &mu, &SeededSampler::new(9), 50_000).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn grid_density_lookup() {
        let g = GridDensity::new(
            Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            vec![2, 2],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert_eq!(g.density(&[0.25, 0.25]), 1.0);
        assert_eq!(g.density(&[0.25, 0.75]), 2.0);
        assert_eq!(g.density(&[0.75, 0.25]), 3.0);
        assert_eq!(g.density(&[0.75, 0.75]), 4.0);
        assert_eq!(g.density(&[1.5, 0.5]), 0.0);
    }

    #[test]
    fn grid_measure_integrates_to_mean_times_volume() {
        let g = GridDensity::new(
            Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            vec![2, 2],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let mu = MeasureModel::Grid(g);
        let region = RegionSpec::Box(unit_square());
        let e = mc_measure(&region, &mu, &SeededSampler::new(17), 400_000).unwrap();
        assert!((e.value - 2.5).abs() < 4.0 * e.std_error);
    }
}
