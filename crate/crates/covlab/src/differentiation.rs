//! Differentiation of measures along shrinking ball families and Lebesgue
//! density estimation.
//!
//! The shrinking-filter limit is discretized as a finite decreasing radius
//! schedule; the reported derivative is a linear extrapolation of the last
//! few ratios to radius zero. Ball masses for the numerator and denominator
//! share one set of antithetic sample pairs, which cancels sampling noise in
//! the ratio and makes linear densities average exactly to their value at
//! the ball center.

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::geometry::{Norm, RegionSpec, Vector};
use crate::measure::MeasureModel;
use crate::sampler::{mc_estimate, uniform_in, SeededSampler};

/// Numerator and denominator measures on the same ambient space.
#[derive(Debug, Clone)]
pub struct MeasurePair {
    pub rho: MeasureModel,
    pub mu: MeasureModel,
}

/// Which Vitali family the shrinking balls come from: balls centered at the
/// point (Besicovitch style) or balls merely containing it (Vitali style).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VitaliFamilyKind {
    #[default]
    CenteredBalls,
    ContainingBalls,
}

/// Strictly decreasing positive radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    radii: Vec<f64>,
}

impl RadiusSchedule {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(CovError::InvalidParameter(
                "radius schedule must be nonempty".into(),
            ));
        }
        if radii.iter().any(|r| !(*r > 0.0)) {
            return Err(CovError::InvalidParameter("radii must be positive".into()));
        }
        if radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CovError::InvalidParameter(
                "radii must be strictly decreasing".into(),
            ));
        }
        Ok(RadiusSchedule { radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        RadiusSchedule {
            radii: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

/// One measured ratio of the shrinking-ball sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub r: f64,
    pub ratio: f64,
    pub std_error: f64,
}

/// Output of [`rn_derivative_at`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnDerivative {
    pub ratios: Vec<RatioPoint>,
    /// Linear fit of the last three ratios, evaluated at radius zero.
    pub extrapolated: f64,
}

/// Ball mass under a measure, using a shared antithetic sample set. The
/// sample membership is decided in unit coordinates so the pair is accepted
/// or rejected together.
fn ball_mass(
    mu: &MeasureModel,
    center: &[f64],
    r: f64,
    norm: Norm,
    units: &[Vec<f64>],
) -> (f64, f64) {
    let d = center.len();
    if let MeasureModel::WeightedSamples { points, weights } = mu {
        let total = points
            .iter()
            .zip(weights)
            .filter(|(p, _)| norm.distance(p.as_slice(), center) <= r)
            .map(|(_, w)| *w)
            .sum();
        return (total, 0.0);
    }
    let vol = (2.0 * r).powi(d as i32);
    let n = units.len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    for u in units {
        let v = if norm.length(u) <= 1.0 {
            for i in 0..d {
                plus[i] = center[i] + r * u[i];
                minus[i] = center[i] - r * u[i];
            }
            0.5 * (mu.density_at(&plus) + mu.density_at(&minus))
        } else {
            0.0
        };
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    (vol * mean, vol * (var / n as f64).sqrt())
}

fn linear_fit_intercept(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() == 1 {
        return points[0].1;
    }
    let rbar = points.iter().map(|p| p.0).sum::<f64>() / n;
    let vbar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - rbar) * (p.0 - rbar)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - rbar) * (p.1 - vbar)).sum();
    if sxx == 0.0 {
        return vbar;
    }
    let slope = sxy / sxx;
    vbar - slope * rbar
}

/// Direction on the unit sphere of `norm`, by rejection and normalization.
fn random_direction(rng: &mut rand_chacha::ChaCha8Rng, d: usize, norm: Norm) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| uniform_in(rng, -1.0, 1.0)).collect();
        let len = norm.length(&u);
        if len > 1e-3 && len <= 1.0 {
            return u.iter().map(|x| x / len).collect();
        }
    }
}

/// Ratios `rho(B_r) / mu(B_r)` along the radius schedule, plus the linear
/// extrapolation at radius zero. `CenteredBalls` evaluates balls at `x`;
/// `ContainingBalls` offsets each ball center by half its radius in a
/// seeded random direction, keeping `x` strictly inside.
pub fn rn_derivative_at(
    pair: &MeasurePair,
    x: &Vector,
    schedule: &RadiusSchedule,
    kind: VitaliFamilyKind,
    norm: Norm,
    sampler: &SeededSampler,
    n: usize,
) -> Result<RnDerivative> {
    if n == 0 {
        return Err(CovError::InvalidParameter(
            "sample count must be >= 1".into(),
        ));
    }
    let d = x.dim();
    let mut unit_rng = sampler.substream(0).rng();
    let mut offset_rng = sampler.substream(1).rng();
    let units: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| uniform_in(&mut unit_rng, -1.0, 1.0))
                .collect()
        })
        .collect();
    let mut ratios = Vec::with_capacity(schedule.radii().len());
    for &r in schedule.radii() {
        let center: Vec<f64> = match kind {
            VitaliFamilyKind::CenteredBalls => x.as_slice().to_vec(),
            VitaliFamilyKind::ContainingBalls => {
                let dir = random_direction(&mut offset_rng, d, norm);
                x.as_slice()
                    .iter()
                    .zip(&dir)
                    .map(|(xi, di)| xi + 0.5 * r * di)
                    .collect()
            }
        };
        let (rho_mass, rho_err) = ball_mass(&pair.rho, &center, r, norm, &units);
        let (mu_mass, mu_err) = ball_mass(&pair.mu, &center, r, norm, &units);
        if mu_mass == 0.0 {
            return Err(CovError::UndefinedRatio { radius: r });
        }
        let ratio = rho_mass / mu_mass;
        // conservative first-order propagation; the shared samples make the
        // true ratio error smaller than this
        let rel = (rho_err / rho_mass.abs().max(1e-300)).hypot(mu_err / mu_mass);
        ratios.push(RatioPoint {
            r,
            ratio,
            std_error: ratio.abs() * rel,
        });
    }
    let tail: Vec<(f64, f64)> = ratios
        .iter()
        .rev()
        .take(3)
        .map(|p| (p.r, p.ratio))
        .collect();
    Ok(RnDerivative {
        extrapolated: linear_fit_intercept(&tail),
        ratios,
    })
}

/// One radius of the Lebesgue density sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub r: f64,
    /// `Leb(s intersect B(x,r)) / Leb(B(x,r))`, clamped to `[0,1]`.
    pub density: f64,
    pub std_error: f64,
}

/// Density of `region` at `x` along the radius schedule: the fraction of
/// uniform ball samples that land in the region.
pub fn lebesgue_density(
    region: &RegionSpec,
    x: &Vector,
    schedule: &RadiusSchedule,
    norm: Norm,
    sampler: &SeededSampler,
    n: usize,
) -> Result<Vec<DensityPoint>> {
    if n == 0 {
        return Err(CovError::InvalidParameter(
            "sample count must be >= 1".into(),
        ));
    }
    let d = x.dim();
    let mut out = Vec::with_capacity(schedule.radii().len());
    for (k, &r) in schedule.radii().iter().enumerate() {
        let est = mc_estimate(&sampler.substream(k as u64), n, 1.0, |rng, y| {
            // uniform point of the ball by rejection from its box
            loop {
                y.clear();
                for _ in 0..d {
                    y.push(uniform_in(rng, -1.0, 1.0));
                }
                if norm.length(y) <= 1.0 {
                    break;
                }
            }
            for i in 0..d {
                y[i] = x[i] + r * y[i];
            }
            if region.contains(y) {
                1.0
            } else {
                0.0
            }
        });
        out.push(DensityPoint {
            r,
            density: est.value.clamp(0.0, 1.0),
            std_error: est.std_error,
        });
    }
    Ok(out)
}

/// Largest `mu(B(x,2r)) / mu(B(x,r))` over the given radii: the empirical
/// doubling constant. Both balls of a pair reuse the same unit samples, so
/// for scaled Lebesgue measures the ratio is exactly `2^d`.
pub fn doubling_ratio(
    mu: &MeasureModel,
    x: &Vector,
    radii: &[f64],
    norm: Norm,
    sampler: &SeededSampler,
    n: usize,
) -> Result<f64> {
    if radii.is_empty() {
        return Err(CovError::InvalidParameter(
            "at least one radius is required".into(),
        ));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(CovError::InvalidParameter("radii must be positive".into()));
    }
    let d = x.dim();
    let mut rng = sampler.substream(0).rng();
    let units: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| uniform_in(&mut rng, -1.0, 1.0)).collect())
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for &r in radii {
        let (small, _) = ball_mass(mu, x.as_slice(), r, norm, &units);
        if small == 0.0 {
            return Err(CovError::UndefinedRatio { radius: r });
        }
        let (big, _) = ball_mass(mu, x.as_slice(), 2.0 * r, norm, &units);
        worst = worst.max(big / small);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;

    fn vec2(x: f64, y: f64) -> Vector {
        Vector::new(vec![x, y]).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(RadiusSchedule::new(vec![0.2, 0.1]).is_ok());
        assert!(RadiusSchedule::new(vec![0.1, 0.2]).is_err());
        assert!(RadiusSchedule::new(vec![0.1, 0.1]).is_err());
        assert!(RadiusSchedule::new(vec![0.1, 0.0]).is_err());
        assert!(RadiusSchedule::new(vec![]).is_err());
    }

    #[test]
    fn constant_ratio_is_exact() {
        let pair = MeasurePair {
            rho: MeasureModel::lebesgue(2.0).unwrap(),
            mu: MeasureModel::lebesgue(1.0).unwrap(),
        };
        let out = rn_derivative_at(
            &pair,
            &vec2(0.3, 0.7),
            &RadiusSchedule::default(),
            VitaliFamilyKind::CenteredBalls,
            Norm::Euclidean,
            &SeededSampler::new(4),
            2_000,
        )
        .unwrap();
        for p in &out.ratios {
            assert_eq!(p.ratio, 2.0);
        }
        assert!((out.extrapolated - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_density_averages_to_center_value() {
        // rho has density p(t) = t; on balls around 0.5 the antithetic pairs
        // average to exactly p(0.5)
        let pair = MeasurePair {
            rho: MeasureModel::density(|x: &[f64]| x[0]),
            mu: MeasureModel::lebesgue(1.0).unwrap(),
        };
        let x = Vector::new(vec![0.5]).unwrap();
        let out = rn_derivative_at(
            &pair,
            &x,
            &RadiusSchedule::new(vec![0.2, 0.1, 0.05]).unwrap(),
            VitaliFamilyKind::CenteredBalls,
            Norm::Euclidean,
            &SeededSampler::new(4),
            5_000,
        )
        .unwrap();
        for p in &out.ratios {
            assert!((p.ratio - 0.5).abs() < 1e-12, "ratio {}", p.ratio);
        }
        assert!((out.extrapolated - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_support_gives_zero() {
        let pair = MeasurePair {
            rho: MeasureModel::density(
                |x: &[f64]| {
                    if x[0] >= 2.0 && x[0] <= 3.0 {
                        1.0
                    } else {
                        0.0
                    }
                },
            ),
            mu: MeasureModel::lebesgue(1.0).unwrap(),
        };
        let x = Vector::new(vec![0.5]).unwrap();
        let out = rn_derivative_at(
            &pair,
            &x,
            &RadiusSchedule::new(vec![1.0, 0.5, 0.25]).unwrap(),
            VitaliFamilyKind::CenteredBalls,
            Norm::Euclidean,
            &SeededSampler::new(4),
            2_000,
        )
        .unwrap();
        for p in &out.ratios {
            assert_eq!(p.ratio, 0.0);
        }
        assert_eq!(out.extrapolated, 0.0);
    }

    #[test]
    fn undefined_ratio_names_radius() {
        let pair = MeasurePair {
            rho: MeasureModel::lebesgue(1.0).unwrap(),
            mu: MeasureModel::density(|_: &[f64]| 0.0),
        };
        let x = Vector::new(vec![0.0]).unwrap();
        let err = rn_derivative_at(
            &pair,
            &x,
            &RadiusSchedule::new(vec![0.5]).unwrap(),
            VitaliFamilyKind::CenteredBalls,
            Norm::Euclidean,
            &SeededSampler::new(4),
            100,
        )
        .unwrap_err();
        match err {
            CovError::UndefinedRatio { radius } => assert_eq!(radius, 0.5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn density_interior_point_is_one() {
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap());
        let x = vec2(0.5, 0.5);
        let out = lebesgue_density(
            &region,
            &x,
            &RadiusSchedule::default(),
            Norm::Euclidean,
            &SeededSampler::new(4),
            5_000,
        )
        .unwrap();
        for p in &out {
            assert_eq!(p.density, 1.0);
            assert_eq!(p.std_error, 0.0);
        }
    }

    #[test]
    fn density_half_plane_boundary_is_half() {
        let region = RegionSpec::predicate(
            Aabb::from_bounds(&[-2.0, -2.0], &[2.0, 2.0]).unwrap(),
            |x: &[f64]| x[1] >= 0.0,
        );
        let x = vec2(0.0, 0.0);
        let out = lebesgue_density(
            &region,
            &x,
            &RadiusSchedule::default(),
            Norm::Euclidean,
            &SeededSampler::new(4),
            100_000,
        )
        .unwrap();
        for p in &out {
            assert!(
                (p.density - 0.5).abs() <= 3.0 * p.std_error,
                "density {} +- {}",
                p.density,
                p.std_error
            );
        }
    }

    #[test]
    fn density_quadrant_corner_is_quarter() {
        let region = RegionSpec::predicate(
            Aabb::from_bounds(&[-2.0, -2.0], &[2.0, 2.0]).unwrap(),
            |x: &[f64]| x[0] >= 0.0 && x[1] >= 0.0,
        );
        let x = vec2(0.0, 0.0);
        let out = lebesgue_density(
            &region,
            &x,
            &RadiusSchedule::default(),
            Norm::Euclidean,
            &SeededSampler::new(4),
            100_000,
        )
        .unwrap();
        for p in &out {
            assert!(
                (p.density - 0.25).abs() <= 3.0 * p.std_error,
                "density {} +- {}",
                p.density,
                p.std_error
            );
        }
    }

    #[test]
    fn doubling_sup_norm_2d_is_four() {
        let mu = MeasureModel::lebesgue(1.0).unwrap();
        let c = doubling_ratio(
            &mu,
            &vec2(0.1, 0.2),
            &[0.1, 0.05],
            Norm::Sup,
            &SeededSampler::new(4),
            50_000,
        )
        .unwrap();
        assert!((c - 4.0).abs() < 1e-12, "doubling {c}");
    }

    #[test]
    fn doubling_lebesgue_3d_is_eight() {
        let mu = MeasureModel::lebesgue(1.0).unwrap();
        let x = Vector::new(vec![0.0, 0.0, 0.0]).unwrap();
        let c = doubling_ratio(
            &mu,
            &x,
            &[0.2, 0.1],
            Norm::Euclidean,
            &SeededSampler::new(4),
            50_000,
        )
        .unwrap();
        assert!((c - 8.0).abs() < 1e-12, "doubling {c}");
    }

    #[test]
    fn containing_balls_agree_with_centered_for_smooth_density() {
        let pair = MeasurePair {
            rho: MeasureModel::density(|x: &[f64]| 1.0 + 0.5 * x[0] + 0.25 * x[1]),
            mu: MeasureModel::lebesgue(1.0).unwrap(),
        };
        let x = vec2(0.4, 0.6);
        let a = rn_derivative_at(
            &pair,
            &x,
            &RadiusSchedule::default(),
            VitaliFamilyKind::CenteredBalls,
            Norm::Euclidean,
            &SeededSampler::new(4),
            50_000,
        )
        .unwrap();
        let b = rn_derivative_at(
            &pair,
            &x,
            &RadiusSchedule::default(),
            VitaliFamilyKind::ContainingBalls,
            Norm::Euclidean,
            &SeededSampler::new(4),
            50_000,
        )
        .unwrap();
        let p = 1.0 + 0.5 * 0.4 + 0.25 * 0.6;
        assert!((a.extrapolated - p).abs() / p < 0.05);
        assert!((b.extrapolated - p).abs() / p < 0.05);
        assert!((a.extrapolated - b.extrapolated).abs() / p < 0.05);
    }
}
