//! Dense square matrices, transvection decomposition, and numerical checks
//! that linear maps rescale volume by the absolute determinant.
//!
//! The decomposition routine factors any square matrix as
//! `L_1 ... L_p * D * R_1 ... R_q` where every `L`/`R` factor is a
//! transvection (identity plus one off-diagonal entry) and `D` is diagonal.
//! No permutation factors are used: a pivot is moved onto the diagonal by
//! adding its row/column to the pivot row/column, which is itself a
//! transvection, so the factor alphabet stays exactly {transvection,
//! diagonal}.

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::geometry::{Aabb, Norm, Vector};
use crate::sampler::{mc_estimate, uniform_in, SeededSampler};

/// Pivots below this magnitude are treated as exact zeros.
pub const PIVOT_TOL: f64 = 1e-12;

/// A dense `d x d` real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(CovError::InvalidParameter(
                "matrix must have dimension >= 1".into(),
            ));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(CovError::InvalidParameter(format!(
                    "matrix must be square: row of length {} in a {}-row matrix",
                    row.len(),
                    dim
                )));
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CovError::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Determinant by partial-pivoting elimination. Singular matrices (no
    /// usable pivot) return exactly 0.
    pub fn determinant(&self) -> f64 {
        let d = self.dim;
        let mut a = self.clone();
        let mut sign = 1.0;
        let mut det = 1.0;
        for k in 0..d {
            let mut piv = k;
            for i in k + 1..d {
                if a.get(i, k).abs() > a.get(piv, k).abs() {
                    piv = i;
                }
            }
            let p = a.get(piv, k);
            if p.abs() < PIVOT_TOL {
                return 0.0;
            }
            if piv != k {
                for j in k..d {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(piv, j));
                    a.set(piv, j, t);
                }
                sign = -sign;
            }
            det *= a.get(k, k);
            for i in k + 1..d {
                let f = a.get(i, k) / a.get(k, k);
                if f == 0.0 {
                    continue;
                }
                for j in k..d {
                    a.set(i, j, a.get(i, j) - f * a.get(k, j));
                }
            }
        }
        sign * det
    }

    /// Inverse by Gauss-Jordan with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<Matrix> {
        let d = self.dim;
        let mut a = self.clone();
        let mut inv = Matrix::identity(d);
        for k in 0..d {
            let mut piv = k;
            for i in k + 1..d {
                if a.get(i, k).abs() > a.get(piv, k).abs() {
                    piv = i;
                }
            }
            if a.get(piv, k).abs() < PIVOT_TOL {
                return None;
            }
            if piv != k {
                for j in 0..d {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(piv, j));
                    a.set(piv, j, t);
                    let t = inv.get(k, j);
                    inv.set(k, j, inv.get(piv, j));
                    inv.set(piv, j, t);
                }
            }
            let p = a.get(k, k);
            for j in 0..d {
                a.set(k, j, a.get(k, j) / p);
                inv.set(k, j, inv.get(k, j) / p);
            }
            for i in 0..d {
                if i == k {
                    continue;
                }
                let f = a.get(i, k);
                if f == 0.0 {
                    continue;
                }
                for j in 0..d {
                    a.set(i, j, a.get(i, j) - f * a.get(k, j));
                    inv.set(i, j, inv.get(i, j) - f * inv.get(k, j));
                }
            }
        }
        Some(inv)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = CovError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Vec<Vec<f64>> {
        m.rows()
    }
}

/// The elementary matrix `I + coeff * E_{row,col}`, `row != col`.
/// Determinant 1; preserves Lebesgue measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transvection {
    pub row: usize,
    pub col: usize,
    pub coeff: f64,
}

impl Transvection {
    pub fn new(row: usize, col: usize, coeff: f64) -> Result<Self> {
        if row == col {
            return Err(CovError::InvalidParameter(
                "transvection indices must differ".into(),
            ));
        }
        Ok(Transvection { row, col, coeff })
    }

    pub fn matrix(&self, dim: usize) -> Matrix {
        let mut m = Matrix::identity(dim);
        m.set(self.row, self.col, self.coeff);
        m
    }

    pub fn inverse(&self) -> Transvection {
        Transvection {
            row: self.row,
            col: self.col,
            coeff: -self.coeff,
        }
    }
}

/// `source = prod(left) * Diagonal(diag) * prod(right)`, every factor a
/// transvection except the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransvectionDecomposition {
    pub left: Vec<Transvection>,
    pub diag: Vec<f64>,
    pub right: Vec<Transvection>,
}

impl TransvectionDecomposition {
    /// Multiplies the factors back together.
    pub fn reconstruct(&self) -> Matrix {
        let d = self.diag.len();
        let mut m = Matrix::diagonal(&self.diag);
        // left factors applied as row operations on the diagonal seed
        for t in self.left.iter().rev() {
            // prod(left) * m: row t.row += coeff * row t.col
            for j in 0..d {
                let v = m.get(t.row, j) + t.coeff * m.get(t.col, j);
                m.set(t.row, j, v);
            }
        }
        for t in &self.right {
            // m * T: col t.col += coeff * col t.row
            for i in 0..d {
                let v = m.get(i, t.col) + t.coeff * m.get(i, t.row);
                m.set(i, t.col, v);
            }
        }
        m
    }

    /// Product of the diagonal entries, which equals the determinant of the
    /// source matrix (transvections have determinant 1).
    pub fn diag_product(&self) -> f64 {
        self.diag.iter().product()
    }
}

/// Pivot threshold: the diagonal entry is kept as pivot if it is at least
/// this fraction of the largest remaining entry.
const PIVOT_PREFERENCE: f64 = 0.1;

/// Factors `m` into transvections and a diagonal by two-sided elimination.
///
/// At each step the pivot is either the current diagonal entry (if large
/// enough relative to the remaining block) or the block maximum, pulled onto
/// the diagonal by sign-aligned row/column additions. For singular inputs
/// the diagonal contains exact zeros.
pub fn transvection_decompose(m: &Matrix) -> TransvectionDecomposition {
    let d = m.dim();
    let mut a = m.clone();
    let mut left: Vec<Transvection> = Vec::new();
    let mut right_rev: Vec<Transvection> = Vec::new();

    // row op: row r += c * row s  (left factor T(r, s, c))
    let row_op = |a: &mut Matrix, r: usize, s: usize, c: f64, from: usize| {
        for j in from..d {
            let v = a.get(r, j) + c * a.get(s, j);
            a.set(r, j, v);
        }
    };
    // col op: col c += g * col s  (right factor T(s, c, g))
    let col_op = |a: &mut Matrix, cidx: usize, s: usize, g: f64, from: usize| {
        for i in from..d {
            let v = a.get(i, cidx) + g * a.get(i, s);
            a.set(i, cidx, v);
        }
    };

    let mut diag = vec![0.0; d];
    for k in 0..d {
        // largest entry of the remaining block
        let (mut pi, mut pj, mut pmax) = (k, k, 0.0f64);
        for i in k..d {
            for j in k..d {
                let v = a.get(i, j).abs();
                if v > pmax {
                    pmax = v;
                    pi = i;
                    pj = j;
                }
            }
        }
        if pmax < PIVOT_TOL {
            // numerically zero block: remaining diagonal entries stay 0
            break;
        }
        if a.get(k, k).abs() < PIVOT_PREFERENCE * pmax {
            // pull the block maximum onto the diagonal with sign-aligned
            // additions so magnitudes accumulate instead of cancelling
            if pi != k {
                let c = if a.get(k, pj) * a.get(pi, pj) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                row_op(&mut a, k, pi, c, k);
                left.push(Transvection {
                    row: k,
                    col: pi,
                    coeff: -c,
                });
            }
            if pj != k {
                let g = if a.get(k, k) * a.get(k, pj) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                col_op(&mut a, k, pj, g, k);
                right_rev.push(Transvection {
                    row: pj,
                    col: k,
                    coeff: -g,
                });
            }
        }
        let pivot = a.get(k, k);
        for i in k + 1..d {
            let f = a.get(i, k) / pivot;
            if f != 0.0 {
                row_op(&mut a, i, k, -f, k);
                left.push(Transvection {
                    row: i,
                    col: k,
                    coeff: f,
                });
            }
            a.set(i, k, 0.0);
        }
        for j in k + 1..d {
            let f = a.get(k, j) / pivot;
            if f != 0.0 {
                col_op(&mut a, j, k, -f, k + 1);
                right_rev.push(Transvection {
                    row: k,
                    col: j,
                    coeff: f,
                });
            }
            a.set(k, j, 0.0);
        }
        diag[k] = pivot;
    }

    right_rev.reverse();
    TransvectionDecomposition {
        left,
        diag,
        right: right_rev,
    }
}

/// Outcome of a Monte Carlo check that a linear map scales volume by
/// `|det|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMeasureCheck {
    /// Estimated `Leb(m(b)) / Leb(b)`.
    pub estimated_ratio: f64,
    pub std_error: f64,
    pub abs_det: f64,
}

/// Exact bounding box of the image of `b` under `m` (interval arithmetic;
/// the image is a parallelotope so per-axis extrema separate).
pub fn linear_image_bounding_box(m: &Matrix, b: &Aabb) -> Aabb {
    let d = m.dim();
    let mut lower = vec![0.0; d];
    let mut upper = vec![0.0; d];
    for i in 0..d {
        let (mut lo, mut hi) = (0.0, 0.0);
        for j in 0..d {
            let c = m.get(i, j);
            let a = c * b.lower[j];
            let bb = c * b.upper[j];
            lo += a.min(bb);
            hi += a.max(bb);
        }
        lower[i] = lo;
        upper[i] = hi;
    }
    Aabb::from_bounds(&lower, &upper).expect("interval extrema are ordered")
}

/// Estimates `Leb(m(b)) / Leb(b)` by sampling the image bounding box and
/// testing inverse membership, and reports `|det m|` next to it. Singular
/// maps (`|det| < PIVOT_TOL`) have lower-dimensional images and return
/// ratio 0.
pub fn linear_image_measure_check(
    m: &Matrix,
    b: &Aabb,
    sampler: &SeededSampler,
    n: usize,
) -> Result<ImageMeasureCheck> {
    if n < 10_000 {
        return Err(CovError::InvalidParameter(format!(
            "image measure check needs n >= 10^4, got {n}"
        )));
    }
    if m.dim() != b.dim() {
        return Err(CovError::DimensionMismatch {
            expected: m.dim(),
            got: b.dim(),
        });
    }
    let vol_b = b.volume();
    if vol_b == 0.0 {
        return Err(CovError::InvalidParameter(
            "source box must have positive volume".into(),
        ));
    }
    let abs_det = m.determinant().abs();
    if abs_det < PIVOT_TOL {
        return Ok(ImageMeasureCheck {
            estimated_ratio: 0.0,
            std_error: 0.0,
            abs_det: 0.0,
        });
    }
    let inv = m
        .inverse()
        .ok_or_else(|| CovError::InvalidParameter("matrix is numerically singular".into()))?;
    let bbox = linear_image_bounding_box(m, b);
    let d = m.dim();
    let est = mc_estimate(sampler, n, bbox.volume(), |rng, y| {
        y.clear();
        for i in 0..d {
            y.push(uniform_in(rng, bbox.lower[i], bbox.upper[i]));
        }
        let x = inv.apply(y);
        if b.contains(&x) {
            1.0
        } else {
            0.0
        }
    });
    Ok(ImageMeasureCheck {
        estimated_ratio: est.value / vol_b,
        std_error: est.std_error / vol_b,
        abs_det,
    })
}

/// Estimates `mu(B(x, r)) / r^d` for each radius, for `mu = mu_scale *
/// Lebesgue`. All radii reuse one set of unit-box samples (the membership
/// tests are evaluated at the actual scaled points), so the returned ratios
/// are constant across radii up to floating rounding, exhibiting the
/// `mu(B(x,r)) = r^d * mu(B(0,1))` scaling law.
pub fn ball_volume_scaling(
    mu_scale: f64,
    d: usize,
    norm: Norm,
    x: &Vector,
    radii: &[f64],
    sampler: &SeededSampler,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if d == 0 || x.dim() != d {
        return Err(CovError::DimensionMismatch {
            expected: d,
            got: x.dim(),
        });
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(CovError::InvalidParameter("radii must be positive".into()));
    }
    if n == 0 {
        return Err(CovError::InvalidParameter(
            "sample count must be >= 1".into(),
        ));
    }
    // shared unit-box draws
    let mut rng = sampler.substream(0).rng();
    let mut units = Vec::with_capacity(n);
    for _ in 0..n {
        let u: Vec<f64> = (0..d).map(|_| uniform_in(&mut rng, -1.0, 1.0)).collect();
        units.push(u);
    }
    let mut out = Vec::with_capacity(radii.len());
    let xs = x.as_slice();
    for &r in radii {
        let mut hits = 0usize;
        let mut y = vec![0.0; d];
        for u in &units {
            for i in 0..d {
                y[i] = xs[i] + r * u[i];
            }
            if norm.distance(&y, xs) <= r {
                hits += 1;
            }
        }
        let ball_measure = mu_scale * (2.0 * r).powi(d as i32) * hits as f64 / n as f64;
        out.push((r, ball_measure / r.powi(d as i32)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cofactor-expansion determinant, exponential time; the test oracle.
    fn det_cofactor(m: &Matrix) -> f64 {
        let d = m.dim();
        if d == 1 {
            return m.get(0, 0);
        }
        let mut acc = 0.0;
        for j in 0..d {
            let mut minor = Matrix::zeros(d - 1);
            for i in 1..d {
                let mut cj = 0;
                for jj in 0..d {
                    if jj == j {
                        continue;
                    }
                    minor.set(i - 1, cj, m.get(i, jj));
                    cj += 1;
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * m.get(0, j) * det_cofactor(&minor);
        }
        acc
    }

    fn random_matrix(rng: &mut impl rand::Rng, d: usize) -> Matrix {
        Matrix::from_rows(
            (0..d)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn determinant_identity() {
        for d in 1..=5 {
            assert_eq!(Matrix::identity(d).determinant(), 1.0);
        }
    }

    #[test]
    fn determinant_diagonal() {
        let m = Matrix::diagonal(&[2.0, 3.0]);
        assert_eq!(m.determinant(), 6.0);
    }

    #[test]
    fn determinant_matches_cofactor_oracle() {
        let mut rng = SeededSampler::new(101).rng();
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 3);
            let lu = m.determinant();
            let co = det_cofactor(&m);
            assert!(
                (lu - co).abs() <= 1e-12 * co.abs().max(1.0),
                "lu {lu} vs cofactor {co}"
            );
        }
    }

    #[test]
    fn determinant_multiplicative() {
        let mut rng = SeededSampler::new(7).rng();
        for d in 2..=4 {
            for _ in 0..25 {
                let a = random_matrix(&mut rng, d);
                let b = random_matrix(&mut rng, d);
                let lhs = a.mul(&b).determinant();
                let rhs = a.determinant() * b.determinant();
                assert!(
                    (lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-8),
                    "det(AB) {lhs} vs det(A)det(B) {rhs}"
                );
            }
        }
    }

    #[test]
    fn decompose_identity_is_trivial() {
        let dec = transvection_decompose(&Matrix::identity(3));
        assert!(dec.left.is_empty());
        assert!(dec.right.is_empty());
        assert_eq!(dec.diag, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn decompose_shear_single_transvection() {
        let c = 0.75;
        let m = Matrix::from_rows(vec![vec![1.0, c], vec![0.0, 1.0]]).unwrap();
        let dec = transvection_decompose(&m);
        assert_eq!(dec.left.len() + dec.right.len(), 1);
        let t = dec.left.first().or(dec.right.first()).unwrap();
        assert_eq!((t.row, t.col), (0, 1));
        assert!((t.coeff - c).abs() < 1e-15);
        assert_eq!(dec.diag, vec![1.0, 1.0]);
    }

    #[test]
    fn decompose_reconstructs_random_matrices() {
        let mut rng = SeededSampler::new(33).rng();
        for d in 1..=6 {
            for _ in 0..100 {
                let m = random_matrix(&mut rng, d);
                let dec = transvection_decompose(&m);
                let rec = dec.reconstruct();
                let mut err = 0.0f64;
                for i in 0..d {
                    for j in 0..d {
                        err += (rec.get(i, j) - m.get(i, j)).powi(2);
                    }
                }
                let err = err.sqrt();
                assert!(
                    err <= 1e-10 * m.frobenius_norm().max(1.0),
                    "d={d} reconstruction error {err}"
                );
                let dp = dec.diag_product();
                let det = m.determinant();
                assert!(
                    (dp - det).abs() <= 1e-8 * det.abs().max(1e-12),
                    "diag product {dp} vs det {det}"
                );
            }
        }
    }

    #[test]
    fn decompose_is_scale_equivariant_in_accuracy() {
        // the reconstruction tolerance is relative to the Frobenius norm,
        // so uniformly rescaled matrices must pass unchanged
        let mut rng = SeededSampler::new(47).rng();
        for scale in [1e-6, 1e-3, 1e3, 1e6] {
            for d in 2..=5 {
                let mut m = random_matrix(&mut rng, d);
                for i in 0..d {
                    for j in 0..d {
                        m.set(i, j, m.get(i, j) * scale);
                    }
                }
                let dec = transvection_decompose(&m);
                let rec = dec.reconstruct();
                let mut err = 0.0f64;
                for i in 0..d {
                    for j in 0..d {
                        err += (rec.get(i, j) - m.get(i, j)).powi(2);
                    }
                }
                assert!(
                    err.sqrt() <= 1e-10 * m.frobenius_norm().max(1.0),
                    "scale {scale} d={d}: error {}",
                    err.sqrt()
                );
            }
        }
    }

    #[test]
    fn decompose_zero_matrix() {
        let dec = transvection_decompose(&Matrix::zeros(3));
        assert!(dec.left.is_empty() && dec.right.is_empty());
        assert_eq!(dec.diag, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn decompose_singular_has_zero_diag() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let dec = transvection_decompose(&m);
        assert!(dec.diag.contains(&0.0));
        let rec = dec.reconstruct();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec.get(i, j) - m.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn transvections_have_unit_determinant() {
        for d in 2..=4 {
            for (i, j) in [(0usize, 1usize), (1, 0), (d - 1, 0)] {
                let t = Transvection::new(i, j, 2.5).unwrap();
                assert_eq!(det_cofactor(&t.matrix(d)), 1.0);
            }
        }
    }

    #[test]
    fn image_measure_diag_scaling() {
        let m = Matrix::diagonal(&[2.0, 3.0]);
        let b = Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let chk = linear_image_measure_check(&m, &b, &SeededSampler::new(4), 100_000).unwrap();
        assert_eq!(chk.abs_det, 6.0);
        // image of the unit square is exactly the image bounding box here
        assert_eq!(chk.estimated_ratio, 6.0);
    }

    #[test]
    fn image_measure_shear_preserves_volume() {
        let m = Matrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let b = Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let chk = linear_image_measure_check(&m, &b, &SeededSampler::new(4), 1_000_000).unwrap();
        assert_eq!(chk.abs_det, 1.0);
        assert!(
            (chk.estimated_ratio - 1.0).abs() < 0.02,
            "shear ratio {}",
            chk.estimated_ratio
        );
    }

    #[test]
    fn image_measure_rejects_small_sample_counts() {
        let m = Matrix::identity(2);
        let b = Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(linear_image_measure_check(&m, &b, &SeededSampler::new(1), 9_999).is_err());
    }

    #[test]
    fn image_measure_singular_is_zero() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = Aabb::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let chk = linear_image_measure_check(&m, &b, &SeededSampler::new(4), 10_000).unwrap();
        assert_eq!(chk.estimated_ratio, 0.0);
    }

    #[test]
    fn ball_scaling_interval() {
        let x = Vector::new(vec![0.3]).unwrap();
        let out = ball_volume_scaling(
            1.5,
            1,
            Norm::Euclidean,
            &x,
            &[1.0, 2.0],
            &SeededSampler::new(2),
            10_000,
        )
        .unwrap();
        for (_, ratio) in &out {
            assert!((ratio - 3.0).abs() < 1e-12, "interval ratio {ratio}");
        }
    }

    #[test]
    fn ball_scaling_sup_square() {
        let x = Vector::new(vec![0.1, -0.2]).unwrap();
        let out = ball_volume_scaling(
            1.0,
            2,
            Norm::Sup,
            &x,
            &[0.5, 1.0],
            &SeededSampler::new(2),
            10_000,
        )
        .unwrap();
        for (_, ratio) in &out {
            assert!((ratio - 4.0).abs() < 1e-12, "sup ratio {ratio}");
        }
    }

    #[test]
    fn ball_scaling_euclidean_disc_matches_pi() {
        let x = Vector::new(vec![0.0, 0.0]).unwrap();
        let out = ball_volume_scaling(
            1.0,
            2,
            Norm::Euclidean,
            &x,
            &[0.5, 1.0, 2.0],
            &SeededSampler::new(6),
            1_000_000,
        )
        .unwrap();
        for (r, ratio) in &out {
            assert!(
                (ratio - std::f64::consts::PI).abs() < 0.01,
                "disc ratio at r={r}: {ratio}"
            );
        }
        // scaling law is exact across radii with shared samples
        assert!((out[0].1 - out[1].1).abs() < 1e-12);
        assert!((out[1].1 - out[2].1).abs() < 1e-12);
    }

    #[test]
    fn doubling_constant_from_scaling() {
        let x = Vector::new(vec![0.0, 0.0, 0.0]).unwrap();
        let out = ball_volume_scaling(
            1.0,
            3,
            Norm::Euclidean,
            &x,
            &[0.5, 1.0],
            &SeededSampler::new(8),
            200_000,
        )
        .unwrap();
        let (r1, q1) = out[0];
        let (r2, q2) = out[1];
        let doubling = (q2 * r2.powi(3)) / (q1 * r1.powi(3));
        assert!((doubling - 8.0).abs() < 1e-9, "doubling {doubling}");
    }
}
