//! JSON-serializable descriptions of regions and measures.
//!
//! Oracle-backed values (predicate regions, analytic densities) cannot be
//! serialized as code, so the schema exposes named registry entries for the
//! bundled densities instead. Everything else round-trips losslessly.

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::geometry::{Aabb, Ball, Norm, RegionSpec, Vector};
use crate::measure::{GridDensity, MeasureModel};

/// JSON form of a region: `{"kind": "box", ...}` or `{"kind": "ball", ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSchema {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        norm: Norm,
    },
}

impl RegionSchema {
    pub fn to_region(&self) -> Result<RegionSpec> {
        match self {
            RegionSchema::Box { lower, upper } => {
                Ok(RegionSpec::Box(Aabb::from_bounds(lower, upper)?))
            }
            RegionSchema::Ball {
                center,
                radius,
                norm,
            } => Ok(RegionSpec::Ball(Ball::new(
                Vector::new(center.clone())?,
                *radius,
                *norm,
            )?)),
        }
    }

    pub fn parse(json: &str) -> Result<RegionSpec> {
        let schema: RegionSchema = serde_json::from_str(json)
            .map_err(|e| CovError::InvalidParameter(format!("bad region JSON: {e}")))?;
        schema.to_region()
    }
}

/// JSON form of a measure. `density` entries name a bundled analytic
/// density from [`named_density`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSchema {
    Lebesgue {
        scale: f64,
    },
    GridDensity {
        lower: Vec<f64>,
        upper: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<f64>,
    },
    WeightedSamples {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Density {
        name: String,
    },
}

/// Bundled analytic densities addressable from JSON:
/// `one` (constant 1), `linear` (`1 + 0.5 x_0 + 0.25 x_1`, nonincreasing
/// axes beyond the second), `gauss` (`exp(-|x|^2/2)`).
pub fn named_density(name: &str) -> Result<MeasureModel> {
    match name {
        "one" => Ok(MeasureModel::density(|_: &[f64]| 1.0)),
        "linear" => Ok(MeasureModel::density(|x: &[f64]| {
            let mut v = 1.0;
            if !x.is_empty() {
                v += 0.5 * x[0];
            }
            if x.len() > 1 {
                v += 0.25 * x[1];
            }
            v.max(0.0)
        })),
        "gauss" => Ok(MeasureModel::density(|x: &[f64]| {
            (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
        })),
        _ => Err(CovError::InvalidParameter(format!(
            "unknown density {name:?}; expected one, linear, or gauss"
        ))),
    }
}

impl MeasureSchema {
    pub fn to_measure(&self) -> Result<MeasureModel> {
        match self {
            MeasureSchema::Lebesgue { scale } => MeasureModel::lebesgue(*scale),
            MeasureSchema::GridDensity {
                lower,
                upper,
                shape,
                values,
            } => Ok(MeasureModel::Grid(GridDensity::new(
                Aabb::from_bounds(lower, upper)?,
                shape.clone(),
                values.clone(),
            )?)),
            MeasureSchema::WeightedSamples { points, weights } => {
                let points = points
                    .iter()
                    .map(|p| Vector::new(p.clone()))
                    .collect::<Result<Vec<_>>>()?;
                MeasureModel::weighted_samples(points, weights.clone())
            }
            MeasureSchema::Density { name } => named_density(name),
        }
    }

    pub fn parse(json: &str) -> Result<MeasureModel> {
        let schema: MeasureSchema = serde_json::from_str(json)
            .map_err(|e| CovError::InvalidParameter(format!("bad measure JSON: {e}")))?;
        schema.to_measure()
    }
}
