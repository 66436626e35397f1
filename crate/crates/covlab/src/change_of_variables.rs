//! Both sides of the change-of-variables identity, numeric Jacobians, the
//! mesh-linearization sandwich for image measures, the integrability
//! companion check, and the polar-coordinates Gaussian integral demo.
//!
//! The identity under test: for `f` injective and differentiable on `s`,
//!
//! ```text
//! integral over f(s) of g(y) dy  ==  integral over s of |det Df(x)| g(f(x)) dx
//! ```
//!
//! Both sides are estimated by seeded Monte Carlo so they can be compared
//! at a stated number of combined standard errors.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::geometry::{mesh_cover, Aabb, RegionSpec, Vector};
use crate::linalg::Matrix;
use crate::measure::{mc_measure, MeasureModel};
use crate::sampler::{mc_estimate, uniform_in, Estimate, SeededSampler};

pub type PointFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A map `R^d -> R^d` with optional analytic Jacobian field and inverse.
/// Injectivity on the working region is the caller's obligation; it is only
/// spot-checked through inverse round-trips.
#[derive(Clone)]
pub struct DifferentiableMap {
    dim: usize,
    name: String,
    forward: PointFn,
    jacobian: Option<JacobianFn>,
    inverse: Option<PointFn>,
}

impl std::fmt::Debug for DifferentiableMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DifferentiableMap")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("inverse", &self.inverse.is_some())
            .finish()
    }
}

impl DifferentiableMap {
    pub fn new<F>(dim: usize, name: &str, forward: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        DifferentiableMap {
            dim,
            name: name.to_string(),
            forward: Arc::new(forward),
            jacobian: None,
            inverse: None,
        }
    }

    pub fn with_jacobian<F>(mut self, jacobian: F) -> Self
    where
        F: Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_inverse<F>(mut self, inverse: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (self.forward)(x)
    }

    pub fn forward_checked(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = (self.forward)(x);
        if y.len() != self.dim || y.iter().any(|v| !v.is_finite()) {
            return Err(CovError::Evaluation {
                point: x.to_vec(),
                reason: "forward map produced a non-finite value".into(),
            });
        }
        Ok(y)
    }

    pub fn inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        self.inverse.as_ref().map(|inv| inv(y))
    }

    /// Jacobian at `x`: analytic oracle when present, otherwise central
    /// differences with step `h`.
    pub fn jacobian_at(&self, x: &[f64], h: f64) -> Result<Matrix> {
        match &self.jacobian {
            Some(j) => Ok(j(x)),
            None => numeric_jacobian(self, x, h),
        }
    }

    /// Largest `|inverse(forward(x)) - x|` (euclidean) over seeded samples
    /// of the region: the documented injectivity spot-check.
    pub fn inverse_roundtrip_max_error(
        &self,
        region: &RegionSpec,
        sampler: &SeededSampler,
        n: usize,
    ) -> Result<f64> {
        let inv = self.inverse.as_ref().ok_or(CovError::MissingInverse)?;
        let bounds = region.bounding_box();
        let d = self.dim;
        let mut rng = sampler.rng();
        let mut worst = 0.0f64;
        let mut found = 0usize;
        let mut attempts = 0usize;
        while found < n && attempts < 100 * n.max(10) {
            attempts += 1;
            let x: Vec<f64> = (0..d)
                .map(|i| uniform_in(&mut rng, bounds.lower[i], bounds.upper[i]))
                .collect();
            if !region.contains(&x) {
                continue;
            }
            found += 1;
            let back = inv(&self.forward_checked(&x)?);
            let err = x
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err);
        }
        Ok(worst)
    }

    pub fn identity(dim: usize) -> Self {
        DifferentiableMap::new(dim, "identity", |x: &[f64]| x.to_vec())
            .with_jacobian(move |_: &[f64]| Matrix::identity(dim))
            .with_inverse(|y: &[f64]| y.to_vec())
    }

    pub fn linear(m: Matrix) -> Self {
        let dim = m.dim();
        let fwd = m.clone();
        let jac = m.clone();
        let mut map = DifferentiableMap::new(dim, "linear", move |x: &[f64]| fwd.apply(x))
            .with_jacobian(move |_: &[f64]| jac.clone());
        if let Some(inv) = m.inverse() {
            map = map.with_inverse(move |y: &[f64]| inv.apply(y));
        }
        map
    }

    /// `(r, theta) -> (r cos theta, r sin theta)`, injective on
    /// `r > 0, theta in (-pi, pi)`; `|det| = r`.
    pub fn polar() -> Self {
        DifferentiableMap::new(2, "polar", |x: &[f64]| {
            vec![x[0] * x[1].cos(), x[0] * x[1].sin()]
        })
        .with_jacobian(|x: &[f64]| {
            let (r, th) = (x[0], x[1]);
            Matrix::from_rows(vec![
                vec![th.cos(), -r * th.sin()],
                vec![th.sin(), r * th.cos()],
            ])
            .expect("2x2 entries are finite")
        })
        .with_inverse(|y: &[f64]| vec![y[0].hypot(y[1]), y[1].atan2(y[0])])
    }

    /// Volume-preserving nonlinear diffeomorphism
    /// `(x, y) -> (x + y^3/3, y)`.
    pub fn cubic_shear() -> Self {
        DifferentiableMap::new(2, "cubic-shear", |x: &[f64]| {
            vec![x[0] + x[1] * x[1] * x[1] / 3.0, x[1]]
        })
        .with_jacobian(|x: &[f64]| {
            Matrix::from_rows(vec![vec![1.0, x[1] * x[1]], vec![0.0, 1.0]])
                .expect("2x2 entries are finite")
        })
        .with_inverse(|y: &[f64]| vec![y[0] - y[1] * y[1] * y[1] / 3.0, y[1]])
    }

    /// Bundled maps addressable by name: `identity`, `identity:<d>`,
    /// `linear:<json row-major matrix>`, `polar`, `cubic-shear`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(DifferentiableMap::identity(2)),
            "polar" => Ok(DifferentiableMap::polar()),
            "cubic-shear" => Ok(DifferentiableMap::cubic_shear()),
            _ => {
                if let Some(d) = name.strip_prefix("identity:") {
                    let dim: usize = d.parse().map_err(|_| {
                        CovError::InvalidParameter(format!("bad identity dimension in {name:?}"))
                    })?;
                    if dim == 0 {
                        return Err(CovError::InvalidParameter(
                            "identity dimension must be >= 1".into(),
                        ));
                    }
                    return Ok(DifferentiableMap::identity(dim));
                }
                if let Some(json) = name.strip_prefix("linear:") {
                    let rows: Vec<Vec<f64>> = serde_json::from_str(json).map_err(|e| {
                        CovError::InvalidParameter(format!("bad matrix JSON in map name: {e}"))
                    })?;
                    return Ok(DifferentiableMap::linear(Matrix::from_rows(rows)?));
                }
                Err(CovError::InvalidParameter(format!(
                    "unknown map {name:?}; expected identity[:d], linear:<matrix>, polar, cubic-shear"
                )))
            }
        }
    }
}

/// A real-valued integrand oracle.
#[derive(Clone)]
pub struct IntegrandSpec {
    name: String,
    g: ScalarFn,
}

impl std::fmt::Debug for IntegrandSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IntegrandSpec({})", self.name)
    }
}

impl IntegrandSpec {
    pub fn new<F>(name: &str, g: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        IntegrandSpec {
            name: name.to_string(),
            g: Arc::new(g),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.g)(y)
    }

    /// `g == 1`.
    pub fn one() -> Self {
        IntegrandSpec::new("one", |_: &[f64]| 1.0)
    }

    /// `g(y) = exp(-|y|^2 / 2)`.
    pub fn gauss() -> Self {
        IntegrandSpec::new("gauss", |y: &[f64]| {
            (-0.5 * y.iter().map(|v| v * v).sum::<f64>()).exp()
        })
    }

    /// Absolute value of this integrand.
    pub fn abs(&self) -> Self {
        let g = self.g.clone();
        IntegrandSpec {
            name: format!("|{}|", self.name),
            g: Arc::new(move |y: &[f64]| g(y).abs()),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "one" => Ok(IntegrandSpec::one()),
            "gauss" => Ok(IntegrandSpec::gauss()),
            _ => Err(CovError::InvalidParameter(format!(
                "unknown integrand {name:?}; expected one or gauss"
            ))),
        }
    }
}

/// Mesh size, linearization slack, sample count, and seed for the
/// change-of-variables engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoVConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Running estimates beyond this cap under sample doubling are treated
    /// as divergent by the integrability companion.
    #[serde(default = "default_cap")]
    pub divergence_cap: f64,
}

fn default_cap() -> f64 {
    1e6
}

impl Default for CoVConfig {
    fn default() -> Self {
        CoVConfig {
            epsilon: 0.05,
            delta: 0.05,
            n_samples: 1_000_000,
            seed: 42,
            divergence_cap: default_cap(),
        }
    }
}

impl CoVConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(CovError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0) {
            return Err(CovError::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.n_samples == 0 {
            return Err(CovError::InvalidParameter("n_samples must be >= 1".into()));
        }
        Ok(())
    }

    fn sampler(&self) -> SeededSampler {
        SeededSampler::new(self.seed)
    }
}

/// Central-difference step for Jacobians when no analytic field is given.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference Jacobian: column `j` is
/// `(f(x + h e_j) - f(x - h e_j)) / (2h)`. Exact on linear maps up to
/// rounding.
pub fn numeric_jacobian(map: &DifferentiableMap, x: &[f64], h: f64) -> Result<Matrix> {
    if !(h > 0.0) {
        return Err(CovError::InvalidParameter(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let d = map.dim();
    let mut m = Matrix::zeros(d);
    let mut probe = x.to_vec();
    for j in 0..d {
        probe[j] = x[j] + h;
        let fp = map.forward_checked(&probe)?;
        probe[j] = x[j] - h;
        let fm = map.forward_checked(&probe)?;
        probe[j] = x[j];
        for i in 0..d {
            m.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
    }
    Ok(m)
}

fn capture_error(slot: &Mutex<Option<CovError>>, err: CovError) {
    let mut guard = slot.lock().expect("error slot poisoned");
    if guard.is_none() {
        *guard = Some(err);
    }
}

/// Right-hand side of the identity: Monte Carlo estimate of
/// `integral over s of |det Df(x)| * g(f(x)) dx`.
pub fn cov_rhs(
    map: &DifferentiableMap,
    region: &RegionSpec,
    g: &IntegrandSpec,
    cfg: &CoVConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if map.dim() != region.dim() {
        return Err(CovError::DimensionMismatch {
            expected: map.dim(),
            got: region.dim(),
        });
    }
    let bounds = region.bounding_box();
    let vol = bounds.volume();
    if vol == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let d = map.dim();
    let failure: Mutex<Option<CovError>> = Mutex::new(None);
    let est = mc_estimate(&cfg.sampler().substream(0), cfg.n_samples, vol, |rng, x| {
        x.clear();
        for i in 0..d {
            x.push(uniform_in(rng, bounds.lower[i], bounds.upper[i]));
        }
        if !region.contains(x) {
            return 0.0;
        }
        let jac = match map.jacobian_at(x, DEFAULT_FD_STEP) {
            Ok(j) => j,
            Err(e) => {
                capture_error(&failure, e);
                return 0.0;
            }
        };
        let fx = match map.forward_checked(x) {
            Ok(y) => y,
            Err(e) => {
                capture_error(&failure, e);
                return 0.0;
            }
        };
        jac.determinant().abs() * g.eval(&fx)
    });
    if let Some(err) = failure.into_inner().expect("error slot poisoned") {
        return Err(err);
    }
    Ok(est)
}

/// How [`cov_lhs`] locates the image-side integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LhsMode {
    /// Inverse sampling when the map has an inverse, grid pushforward
    /// otherwise.
    #[default]
    Auto,
    /// Sample a bounding box of `f(s)` and accept `y` when
    /// `inverse(y) in s`. Errors without an inverse oracle.
    InverseSampling,
    /// Deterministic pushforward of the mesh cells of `s` (midpoint rule);
    /// no inverse needed, reported with zero standard error.
    Grid,
}

/// Bounding box of `f(s)`: images of the corner points of the bounding box
/// of `s` plus seeded boundary samples, inflated by 10%.
pub fn image_bounding_box(
    map: &DifferentiableMap,
    region: &RegionSpec,
    sampler: &SeededSampler,
) -> Result<Aabb> {
    const BOUNDARY_SAMPLES: usize = 1000;
    let bounds = region.bounding_box();
    let d = map.dim();
    let mut images: Vec<Vec<f64>> = Vec::new();
    // corners
    let corners = 1usize << d.min(20);
    for mask in 0..corners {
        let corner: Vec<f64> = (0..d)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    bounds.upper[i]
                } else {
                    bounds.lower[i]
                }
            })
            .collect();
        images.push(map.forward_checked(&corner)?);
    }
    // boundary samples: uniform on a random face
    let mut rng = sampler.rng();
    for _ in 0..BOUNDARY_SAMPLES {
        let axis = rng_usize(&mut rng, d);
        let side = uniform_in(&mut rng, 0.0, 1.0) < 0.5;
        let x: Vec<f64> = (0..d)
            .map(|i| {
                if i == axis {
                    if side {
                        bounds.lower[i]
                    } else {
                        bounds.upper[i]
                    }
                } else {
                    uniform_in(&mut rng, bounds.lower[i], bounds.upper[i])
                }
            })
            .collect();
        images.push(map.forward_checked(&x)?);
    }
    let mut lower = images[0].clone();
    let mut upper = images[0].clone();
    for img in &images {
        for i in 0..d {
            lower[i] = lower[i].min(img[i]);
            upper[i] = upper[i].max(img[i]);
        }
    }
    Ok(Aabb::from_bounds(&lower, &upper)?.inflate(0.1))
}

fn rng_usize(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> usize {
    (uniform_in(rng, 0.0, n as f64) as usize).min(n - 1)
}

/// Left-hand side of the identity: `integral over f(s) of g(y) dy`.
pub fn cov_lhs(
    map: &DifferentiableMap,
    region: &RegionSpec,
    g: &IntegrandSpec,
    cfg: &CoVConfig,
) -> Result<Estimate> {
    cov_lhs_with_mode(map, region, g, cfg, LhsMode::Auto)
}

pub fn cov_lhs_with_mode(
    map: &DifferentiableMap,
    region: &RegionSpec,
    g: &IntegrandSpec,
    cfg: &CoVConfig,
    mode: LhsMode,
) -> Result<Estimate> {
    cfg.validate()?;
    if map.dim() != region.dim() {
        return Err(CovError::DimensionMismatch {
            expected: map.dim(),
            got: region.dim(),
        });
    }
    let mode = match mode {
        LhsMode::Auto => {
            if map.has_inverse() {
                LhsMode::InverseSampling
            } else {
                LhsMode::Grid
            }
        }
        m => m,
    };
    match mode {
        LhsMode::InverseSampling => {
            if !map.has_inverse() {
                return Err(CovError::MissingInverse);
            }
            let bbox = image_bounding_box(map, region, &cfg.sampler().substream(1))?;
            let vol = bbox.volume();
            if vol == 0.0 {
                return Ok(Estimate::exact(0.0));
            }
            let d = map.dim();
            Ok(mc_estimate(
                &cfg.sampler().substream(2),
                cfg.n_samples,
                vol,
                |rng, y| {
                    y.clear();
                    for i in 0..d {
                        y.push(uniform_in(rng, bbox.lower[i], bbox.upper[i]));
                    }
                    let x = map.inverse(y).expect("inverse checked above");
                    if x.iter().all(|v| v.is_finite()) && region.contains(&x) {
                        g.eval(y)
                    } else {
                        0.0
                    }
                },
            ))
        }
        LhsMode::Grid => {
            let cells = mesh_cover(region, cfg.epsilon)?;
            let mut total = 0.0;
            for cell in &cells {
                let c = cell.center.as_slice();
                if !region.contains(c) {
                    continue;
                }
                let jac = map.jacobian_at(c, DEFAULT_FD_STEP)?;
                let fc = map.forward_checked(c)?;
                total += jac.determinant().abs() * g.eval(&fc) * cell.cell.volume();
            }
            Ok(Estimate::exact(total))
        }
        LhsMode::Auto => unreachable!("resolved above"),
    }
}

/// One linearized mesh cell: the box, its center, the Jacobian there, and
/// `|det|`.
#[derive(Debug, Clone)]
pub struct LinearizedCell {
    pub cell: Aabb,
    pub center: Vector,
    pub jacobian: Matrix,
    pub det_abs: f64,
    /// Entirely inside the region (contributes to the lower bound).
    pub interior: bool,
    /// Worst probed linearization slack `|f(y) - f(c) - A(y-c)| / epsilon`.
    pub slack: f64,
}

/// Mesh linearization report accompanying the sandwich bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshReport {
    pub cells: usize,
    pub interior_cells: usize,
    /// `sum |det A_i| vol(B_i)` over all cells (the `K_epsilon` side).
    pub sum_all: f64,
    /// Same sum over interior cells only.
    pub sum_interior: f64,
    /// Slack used in the sandwich exponents: the worst probed per-cell
    /// linearization slack (floored at 1e-9 to absorb rounding).
    pub delta_used: f64,
    /// True when every cell's probed slack is within `cfg.delta`.
    pub certified: bool,
    /// Indices of cells whose probed slack exceeded `cfg.delta`.
    pub violations: Vec<usize>,
}

/// Sandwich bounds for `Leb(f(K))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageBounds {
    pub lower: f64,
    pub upper: f64,
    pub report: MeshReport,
}

const DELTA_FLOOR: f64 = 1e-9;
const CERTIFICATION_PROBES: usize = 8;

/// Mesh-linearization sandwich: covers `K` with an epsilon mesh, linearizes
/// `f` at each cell center, and returns
///
/// ```text
/// lower = (1+d)^-(n+1) * sum over interior cells of |det A_i| vol(B_i)
/// upper = (1+d)^(n+1)  * sum over all cells      of |det A_i| vol(B_i)
/// ```
///
/// where `d` is the worst probed per-cell linearization slack (floored at
/// 1e-9) and `n` the dimension. The run is certified when every probed
/// slack stays within `cfg.delta`; otherwise the offending cells are listed
/// and the bounds are returned uncertified.
pub fn image_measure_bounds(
    map: &DifferentiableMap,
    region: &RegionSpec,
    cfg: &CoVConfig,
) -> Result<ImageBounds> {
    let (bounds, _) = image_measure_bounds_with_cells(map, region, cfg)?;
    Ok(bounds)
}

/// As [`image_measure_bounds`], also returning the per-cell linearization.
pub fn image_measure_bounds_with_cells(
    map: &DifferentiableMap,
    region: &RegionSpec,
    cfg: &CoVConfig,
) -> Result<(ImageBounds, Vec<LinearizedCell>)> {
    cfg.validate()?;
    if map.dim() != region.dim() {
        return Err(CovError::DimensionMismatch {
            expected: map.dim(),
            got: region.dim(),
        });
    }
    let mesh = mesh_cover(region, cfg.epsilon)?;
    let sampler = cfg.sampler().substream(3);
    let d = map.dim();
    let mut cells = Vec::with_capacity(mesh.len());
    let mut sum_all = 0.0;
    let mut sum_interior = 0.0;
    let mut interior_cells = 0usize;
    let mut violations = Vec::new();
    let mut worst_slack = 0.0f64;
    for (idx, mesh_box) in mesh.iter().enumerate() {
        let c = mesh_box.center.as_slice();
        let jac = map.jacobian_at(c, DEFAULT_FD_STEP)?;
        let det_abs = jac.determinant().abs();
        let fc = map.forward_checked(c)?;
        // probe the linearization quality at seeded points of the cell
        let mut rng = sampler.substream(idx as u64).rng();
        let mut slack = 0.0f64;
        for _ in 0..CERTIFICATION_PROBES {
            let y: Vec<f64> = (0..d)
                .map(|i| uniform_in(&mut rng, mesh_box.cell.lower[i], mesh_box.cell.upper[i]))
                .collect();
            let fy = map.forward_checked(&y)?;
            let dy: Vec<f64> = (0..d).map(|i| y[i] - c[i]).collect();
            let lin = jac.apply(&dy);
            let err = (0..d)
                .map(|i| (fy[i] - fc[i] - lin[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            slack = slack.max(err / cfg.epsilon);
        }
        worst_slack = worst_slack.max(slack);
        if slack > cfg.delta {
            violations.push(idx);
        }
        let contribution = det_abs * mesh_box.cell.volume();
        sum_all += contribution;
        let interior = region.contains_box(&mesh_box.cell);
        if interior {
            sum_interior += contribution;
            interior_cells += 1;
        }
        cells.push(LinearizedCell {
            cell: mesh_box.cell.clone(),
            center: mesh_box.center.clone(),
            jacobian: jac,
            det_abs,
            interior,
            slack,
        });
    }
    let delta_used = worst_slack.max(DELTA_FLOOR);
    let exponent = (d + 1) as i32;
    let grow = (1.0 + delta_used).powi(exponent);
    let report = MeshReport {
        cells: mesh.len(),
        interior_cells,
        sum_all,
        sum_interior,
        delta_used,
        certified: violations.is_empty(),
        violations,
    };
    Ok((
        ImageBounds {
            lower: sum_interior / grow,
            upper: sum_all * grow,
            report,
        },
        cells,
    ))
}

/// Independent image-measure estimate used to check the sandwich: Monte
/// Carlo over the image bounding box with inverse membership.
pub fn image_measure_via_inverse(
    map: &DifferentiableMap,
    region: &RegionSpec,
    cfg: &CoVConfig,
) -> Result<Estimate> {
    if !map.has_inverse() {
        return Err(CovError::MissingInverse);
    }
    let bbox = image_bounding_box(map, region, &cfg.sampler().substream(4))?;
    let pred = {
        let map = map.clone();
        let region = region.clone();
        move |y: &[f64]| match map.inverse(y) {
            Some(x) => x.iter().all(|v| v.is_finite()) && region.contains(&x),
            None => false,
        }
    };
    let image_region = RegionSpec::predicate(bbox, pred);
    mc_measure(
        &image_region,
        &MeasureModel::lebesgue(1.0)?,
        &cfg.sampler().substream(5),
        cfg.n_samples,
    )
}

/// Verdict of the integrability companion check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompanionCheck {
    /// `integral over f(s) of |g|`, final doubling stage.
    pub lhs_abs: Estimate,
    /// `integral over s of |det Df| |g o f|`, final doubling stage.
    pub rhs_abs: Estimate,
    pub lhs_divergent: bool,
    pub rhs_divergent: bool,
    /// Both finite and within 3 combined standard errors, or both
    /// divergent.
    pub agree: bool,
    /// Estimates at each doubling stage `n/4, n/2, n`, per side.
    pub lhs_stages: Vec<f64>,
    pub rhs_stages: Vec<f64>,
}

fn divergent(stages: &[f64], cap: f64) -> bool {
    let last = *stages.last().expect("at least one stage");
    if last.abs() > cap {
        return true;
    }
    // consistent strong growth across both doublings also flags divergence
    stages.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        a.abs() > 0.0 && (b - a) / a.abs() > 0.5
    })
}

/// Checks that `g` is integrable on `f(s)` exactly when
/// `|det Df| * (g o f)` is integrable on `s`, by comparing the two
/// absolute-value integrals under sample doubling. A side is flagged
/// divergent when its running estimate exceeds `cfg.divergence_cap` or
/// keeps growing by more than 50% per doubling.
pub fn integrability_companion(
    map: &DifferentiableMap,
    region: &RegionSpec,
    g: &IntegrandSpec,
    cfg: &CoVConfig,
) -> Result<CompanionCheck> {
    cfg.validate()?;
    let g_abs = g.abs();
    let stages = [cfg.n_samples / 4, cfg.n_samples / 2, cfg.n_samples];
    let mut lhs_stages = Vec::new();
    let mut rhs_stages = Vec::new();
    let mut lhs_final = Estimate::exact(0.0);
    let mut rhs_final = Estimate::exact(0.0);
    for &n in &stages {
        let stage_cfg = CoVConfig {
            n_samples: n.max(1),
            ..*cfg
        };
        lhs_final = cov_lhs(map, region, &g_abs, &stage_cfg)?;
        rhs_final = cov_rhs(map, region, &g_abs, &stage_cfg)?;
        lhs_stages.push(lhs_final.value);
        rhs_stages.push(rhs_final.value);
    }
    let lhs_divergent = divergent(&lhs_stages, cfg.divergence_cap);
    let rhs_divergent = divergent(&rhs_stages, cfg.divergence_cap);
    let agree = if lhs_divergent || rhs_divergent {
        lhs_divergent == rhs_divergent
    } else {
        let sigma = lhs_final.combined_sigma(&rhs_final);
        (lhs_final.value - rhs_final.value).abs() <= 3.0 * sigma.max(1e-12)
    };
    Ok(CompanionCheck {
        lhs_abs: lhs_final,
        rhs_abs: rhs_final,
        lhs_divergent,
        rhs_divergent,
        agree,
        lhs_stages,
        rhs_stages,
    })
}

/// Result of the Gaussian integral demonstration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianDemo {
    /// Estimate of `I^2 = integral over R^2 of exp(-(x^2+y^2)/2)`, computed
    /// through the polar change of variables; the true value is `2 pi`.
    pub i_squared: Estimate,
    /// `I = sqrt(I^2)`, to be compared with `sqrt(2 pi) ~ 2.5066`.
    pub i: f64,
    pub i_std_error: f64,
    /// Radial truncation; the analytic tail `2 pi exp(-R^2/2)` is far below
    /// the Monte Carlo noise.
    pub truncation_radius: f64,
}

/// Truncation radius for the Gaussian demo; tail mass `2 pi e^{-32}`.
pub const GAUSSIAN_TRUNCATION_RADIUS: f64 = 8.0;

/// Computes the Gaussian integral through the polar change of variables:
/// the right-hand side of the identity on `(0, R) x (-pi, pi)` with
/// integrand `exp(-|y|^2/2)` integrates `r exp(-r^2/2)` and converges to
/// `2 pi`.
pub fn gaussian_demo(cfg: &CoVConfig) -> Result<GaussianDemo> {
    let r = GAUSSIAN_TRUNCATION_RADIUS;
    let region = RegionSpec::Box(Aabb::from_bounds(
        &[0.0, -std::f64::consts::PI],
        &[r, std::f64::consts::PI],
    )?);
    let i_squared = cov_rhs(
        &DifferentiableMap::polar(),
        &region,
        &IntegrandSpec::gauss(),
        cfg,
    )?;
    let i = i_squared.value.max(0.0).sqrt();
    let i_std_error = if i > 0.0 {
        i_squared.std_error / (2.0 * i)
    } else {
        i_squared.std_error
    };
    Ok(GaussianDemo {
        i_squared,
        i,
        i_std_error,
        truncation_radius: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    fn unit_square() -> RegionSpec {
        RegionSpec::Box(Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap())
    }

    #[test]
    fn numeric_jacobian_exact_on_linear_maps() {
        let m = Matrix::from_rows(vec![vec![2.0, -1.0], vec![0.5, 3.0]]).unwrap();
        let map = DifferentiableMap::new(2, "m", {
            let m = m.clone();
            move |x: &[f64]| m.apply(x)
        });
        let j = numeric_jacobian(&map, &[0.3, -0.7], 1e-4).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert!((j.get(i, k) - m.get(i, k)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn numeric_jacobian_identity() {
        let map = DifferentiableMap::identity(3);
        let j = numeric_jacobian(&map, &[0.1, 0.2, 0.3], 1e-5).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((j.get(i, k) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn numeric_jacobian_polar_determinant_is_radius() {
        let map = DifferentiableMap::new(2, "polar-fd", |x: &[f64]| {
            vec![x[0] * x[1].cos(), x[0] * x[1].sin()]
        });
        let j = numeric_jacobian(&map, &[2.0, 0.0], 1e-5).unwrap();
        assert!(
            (j.determinant() - 2.0).abs() < 1e-8,
            "det {}",
            j.determinant()
        );
    }

    #[test]
    fn numeric_jacobian_reports_bad_point() {
        let map = DifferentiableMap::new(1, "log", |x: &[f64]| vec![x[0].ln()]);
        let err = numeric_jacobian(&map, &[0.0], 1e-3).unwrap_err();
        assert!(matches!(err, CovError::Evaluation { .. }));
    }

    #[test]
    fn rhs_identity_is_plain_integral() {
        let cfg = CoVConfig {
            n_samples: 200_000,
            ..CoVConfig::default()
        };
        let est = cov_rhs(
            &DifferentiableMap::identity(2),
            &unit_square(),
            &IntegrandSpec::one(),
            &cfg,
        )
        .unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn rhs_linear_constant_integrand() {
        let m = Matrix::from_rows(vec![vec![2.0, 1.0], vec![0.0, 1.5]]).unwrap();
        let det = m.determinant().abs();
        let cfg = CoVConfig {
            n_samples: 50_000,
            ..CoVConfig::default()
        };
        let est = cov_rhs(
            &DifferentiableMap::linear(m),
            &unit_square(),
            &IntegrandSpec::one(),
            &cfg,
        )
        .unwrap();
        assert!((est.value - det).abs() < 1e-12);
    }

    #[test]
    fn rhs_polar_gaussian_matches_analytic() {
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.0, -PI], &[8.0, PI]).unwrap());
        let cfg = CoVConfig::default();
        let est = cov_rhs(
            &DifferentiableMap::polar(),
            &region,
            &IntegrandSpec::gauss(),
            &cfg,
        )
        .unwrap();
        let want = 2.0 * PI * (1.0 - (-32.0f64).exp());
        assert!(
            (est.value - want).abs() <= 3.0 * est.std_error,
            "polar gaussian {} +- {} vs {want}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn lhs_identity_matches_rhs() {
        let cfg = CoVConfig {
            n_samples: 300_000,
            ..CoVConfig::default()
        };
        let lhs = cov_lhs(
            &DifferentiableMap::identity(2),
            &unit_square(),
            &IntegrandSpec::gauss(),
            &cfg,
        )
        .unwrap();
        let rhs = cov_rhs(
            &DifferentiableMap::identity(2),
            &unit_square(),
            &IntegrandSpec::gauss(),
            &cfg,
        )
        .unwrap();
        let sigma = lhs.combined_sigma(&rhs);
        assert!(
            (lhs.value - rhs.value).abs() <= 3.0 * sigma,
            "lhs {} rhs {} sigma {sigma}",
            lhs.value,
            rhs.value
        );
    }

    #[test]
    fn lhs_diagonal_map_doubles_area() {
        let m = Matrix::diagonal(&[2.0, 1.0]);
        let cfg = CoVConfig {
            n_samples: 400_000,
            ..CoVConfig::default()
        };
        let lhs = cov_lhs(
            &DifferentiableMap::linear(m),
            &unit_square(),
            &IntegrandSpec::one(),
            &cfg,
        )
        .unwrap();
        assert!(
            (lhs.value - 2.0).abs() <= 3.0 * lhs.std_error.max(1e-9),
            "lhs {} +- {}",
            lhs.value,
            lhs.std_error
        );
    }

    #[test]
    fn lhs_missing_inverse_errors_in_strict_mode() {
        let map = DifferentiableMap::new(1, "square", |x: &[f64]| vec![x[0] * x[0]]);
        let region = RegionSpec::Box(Aabb::from_bounds(&[1.0], &[2.0]).unwrap());
        let err = cov_lhs_with_mode(
            &map,
            &region,
            &IntegrandSpec::one(),
            &CoVConfig::default(),
            LhsMode::InverseSampling,
        )
        .unwrap_err();
        assert!(matches!(err, CovError::MissingInverse));
    }

    #[test]
    fn lhs_grid_mode_close_to_inverse_mode() {
        let cfg = CoVConfig {
            epsilon: 0.02,
            n_samples: 300_000,
            ..CoVConfig::default()
        };
        let map = DifferentiableMap::cubic_shear();
        let region = unit_square();
        let grid =
            cov_lhs_with_mode(&map, &region, &IntegrandSpec::gauss(), &cfg, LhsMode::Grid).unwrap();
        let inv = cov_lhs_with_mode(
            &map,
            &region,
            &IntegrandSpec::gauss(),
            &cfg,
            LhsMode::InverseSampling,
        )
        .unwrap();
        assert!(
            (grid.value - inv.value).abs() < 3.0 * inv.std_error + 0.01,
            "grid {} inverse {}",
            grid.value,
            inv.value
        );
    }

    #[test]
    fn sandwich_identity_unit_square() {
        let cfg = CoVConfig {
            epsilon: 0.1,
            delta: 0.01,
            n_samples: 10_000,
            ..CoVConfig::default()
        };
        let out =
            image_measure_bounds(&DifferentiableMap::identity(2), &unit_square(), &cfg).unwrap();
        assert!(out.report.certified);
        assert!(out.lower <= 1.0 && 1.0 <= out.upper);
        assert!(out.upper / out.lower <= 1.01f64.powi(6));
    }

    #[test]
    fn sandwich_brackets_linear_area() {
        let cfg = CoVConfig {
            epsilon: 0.05,
            delta: 0.01,
            n_samples: 10_000,
            ..CoVConfig::default()
        };
        let m = Matrix::diagonal(&[2.0, 1.0]);
        let out =
            image_measure_bounds(&DifferentiableMap::linear(m), &unit_square(), &cfg).unwrap();
        assert!(out.report.certified);
        assert!(out.lower <= 2.0 && 2.0 <= out.upper, "{out:?}");
    }

    #[test]
    fn sandwich_polar_brackets_and_tightens() {
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.5, 0.0], &[1.0, 1.0]).unwrap());
        let map = DifferentiableMap::polar();
        let mut widths = Vec::new();
        for eps in [0.1, 0.05, 0.025] {
            let cfg = CoVConfig {
                epsilon: eps,
                delta: 0.05,
                n_samples: 400_000,
                ..CoVConfig::default()
            };
            let out = image_measure_bounds(&map, &region, &cfg).unwrap();
            assert!(out.report.certified, "uncertified at eps {eps}");
            let est = image_measure_via_inverse(&map, &region, &cfg).unwrap();
            assert!(
                out.lower <= est.value + 3.0 * est.std_error
                    && est.value - 3.0 * est.std_error <= out.upper,
                "bounds [{}, {}] vs estimate {} at eps {eps}",
                out.lower,
                out.upper,
                est.value
            );
            // true image measure: integral of r over the box = 0.375
            assert!(out.lower <= 0.375 && 0.375 <= out.upper);
            widths.push(out.upper - out.lower);
        }
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    }

    #[test]
    fn sandwich_uncertified_when_delta_too_tight() {
        // coarse mesh on a curved map with a delta below the actual
        // linearization slack: bounds still come back, flagged
        let cfg = CoVConfig {
            epsilon: 0.5,
            delta: 1e-9,
            n_samples: 10_000,
            ..CoVConfig::default()
        };
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.5, 0.0], &[1.5, 2.0]).unwrap());
        let out = image_measure_bounds(&DifferentiableMap::polar(), &region, &cfg).unwrap();
        assert!(!out.report.certified);
        assert!(!out.report.violations.is_empty());
        assert!(out.lower <= out.upper);
    }

    #[test]
    fn companion_zero_integrand_agrees() {
        let g = IntegrandSpec::new("zero", |_: &[f64]| 0.0);
        let out = integrability_companion(
            &DifferentiableMap::identity(2),
            &unit_square(),
            &g,
            &CoVConfig {
                n_samples: 10_000,
                ..CoVConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.lhs_abs.value, 0.0);
        assert_eq!(out.rhs_abs.value, 0.0);
        assert!(out.agree);
        assert!(!out.lhs_divergent && !out.rhs_divergent);
    }

    #[test]
    fn companion_integrable_polar_agrees() {
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.0, -PI], &[4.0, PI]).unwrap());
        let out = integrability_companion(
            &DifferentiableMap::polar(),
            &region,
            &IntegrandSpec::gauss(),
            &CoVConfig {
                n_samples: 400_000,
                ..CoVConfig::default()
            },
        )
        .unwrap();
        assert!(!out.lhs_divergent && !out.rhs_divergent);
        assert!(out.agree, "{out:?}");
    }

    #[test]
    fn gaussian_demo_hits_sqrt_two_pi() {
        let demo = gaussian_demo(&CoVConfig::default()).unwrap();
        let want = (2.0 * PI).sqrt();
        assert!(
            (demo.i - want).abs() < 5e-3,
            "I = {} vs {want}, sigma {}",
            demo.i,
            demo.i_std_error
        );
    }

    #[test]
    fn gaussian_demo_deterministic() {
        let a = gaussian_demo(&CoVConfig::default()).unwrap();
        let b = gaussian_demo(&CoVConfig::default()).unwrap();
        assert_eq!(a.i.to_bits(), b.i.to_bits());
    }

    #[test]
    fn bundled_map_names_resolve() {
        for name in ["identity", "identity:3", "polar", "cubic-shear"] {
            assert!(DifferentiableMap::from_name(name).is_ok(), "{name}");
        }
        let m = DifferentiableMap::from_name("linear:[[1.0,1.0],[0.0,1.0]]").unwrap();
        assert_eq!(m.dim(), 2);
        assert!(DifferentiableMap::from_name("mystery").is_err());
    }

    #[test]
    fn inverse_roundtrip_spot_check() {
        let map = DifferentiableMap::polar();
        let region = RegionSpec::Box(Aabb::from_bounds(&[0.1, -3.0], &[1.5, 3.0]).unwrap());
        let err = map
            .inverse_roundtrip_max_error(&region, &SeededSampler::new(12), 500)
            .unwrap();
        assert!(err < 1e-8, "roundtrip error {err}");
    }
}
