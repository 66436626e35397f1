//! covlab: a numerical toolkit for the change-of-variables formula and the
//! measure theory around it.
//!
//! The crate operationalizes, at desk scale, the machinery that makes
//! `integral over f(s) of g = integral over s of |det Df| (g o f)` work:
//!
//! - [`geometry`] / [`measure`]: points, boxes, balls, regions, measures,
//!   mesh covers, and seeded Monte Carlo measure estimation;
//! - [`linalg`]: transvection decomposition of matrices, determinants, and
//!   checks that linear maps scale volume by `|det|`;
//! - [`covering`]: greedy Vitali selection, Besicovitch partitioning,
//!   packing lower bounds for the Besicovitch constant, and iterative
//!   almost-covering;
//! - [`differentiation`]: shrinking-ball ratios of measures, Lebesgue
//!   density points, doubling constants;
//! - [`change_of_variables`]: numeric Jacobians, both sides of the
//!   integral identity, mesh-linearization sandwich bounds for image
//!   measures, the integrability companion, and the Gaussian-integral
//!   demo;
//! - [`metric_extension`]: the complete metric on open subsets that blows
//!   up at the boundary.
//!
//! Every stochastic routine draws from a [`sampler::SeededSampler`] and is
//! bit-reproducible for a fixed seed, independent of worker count.

// `!(x > 0.0)` rejects NaN along with nonpositive values; parameter guards
// here rely on that. The flagged index loops walk two parallel structures.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod change_of_variables;
pub mod covering;
pub mod differentiation;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod metric_extension;
pub mod sampler;
pub mod schema;

pub use change_of_variables::{
    cov_lhs, cov_lhs_with_mode, cov_rhs, gaussian_demo, image_measure_bounds,
    image_measure_via_inverse, integrability_companion, numeric_jacobian, CoVConfig,
    CompanionCheck, DifferentiableMap, GaussianDemo, ImageBounds, IntegrandSpec, LhsMode,
};
pub use covering::{
    besicovitch_partition, estimate_besicovitch_constant, measure_almost_cover, vitali_select,
    AlmostCover, BallFamily, PackingResult, SubfamilyPartition,
};
pub use differentiation::{
    doubling_ratio, lebesgue_density, rn_derivative_at, MeasurePair, RadiusSchedule, RnDerivative,
    VitaliFamilyKind,
};
pub use error::{CovError, Result};
pub use geometry::{mesh_cover, Aabb, Ball, MeshBox, Norm, RegionSpec, Vector};
pub use linalg::{
    ball_volume_scaling, linear_image_measure_check, transvection_decompose, Matrix, Transvection,
    TransvectionDecomposition,
};
pub use measure::{mc_measure, GridDensity, MeasureModel};
pub use metric_extension::{
    boundary_escape_check, extended_distance, EscapeCheck, OpenSubsetMetric,
};
pub use sampler::{Estimate, SeededSampler};
pub use schema::{MeasureSchema, RegionSchema};
