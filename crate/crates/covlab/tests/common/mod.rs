//! Independent oracles shared by the integration tests. Everything here is
//! deliberately brute force and must stay decoupled from the library's own
//! algorithms.

use covlab::geometry::{Aabb, Ball, Norm};
use covlab::linalg::Matrix;

/// Cofactor-expansion determinant, O(d!) — usable for d <= 6 or so.
pub fn det_cofactor(m: &Matrix) -> f64 {
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

/// Brute-force cell/disc intersection: probes a dense lattice of the cell.
pub fn cell_meets_disc(cell: &Aabb, center: &[f64], radius: f64, per_axis: usize) -> bool {
    let d = cell.dim();
    let mut idx = vec![0usize; d];
    loop {
        let p: Vec<f64> = (0..d)
            .map(|i| {
                let t = idx[i] as f64 / (per_axis - 1) as f64;
                cell.lower[i] + t * (cell.upper[i] - cell.lower[i])
            })
            .collect();
        let dist2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2.sqrt() <= radius {
            return true;
        }
        let mut k = 0;
        loop {
            if k == d {
                return false;
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

/// Exhaustive 1-D packing oracle: the maximum number of points of a fine
/// grid on [-2, 2] with pairwise gaps >= 1, found by dynamic programming.
pub fn exhaustive_packing_1d(grid_step: f64) -> usize {
    let n = (4.0 / grid_step).round() as usize + 1;
    let pts: Vec<f64> = (0..n).map(|i| -2.0 + i as f64 * grid_step).collect();
    // best[i]: largest packing ending at point i
    let mut best = vec![1usize; n];
    let mut answer = 1;
    for i in 0..n {
        for j in 0..i {
            if pts[i] - pts[j] >= 1.0 - 1e-12 {
                best[i] = best[i].max(best[j] + 1);
            }
        }
        answer = answer.max(best[i]);
    }
    answer
}

/// Independent first-fit replay for Besicovitch partitions (input order,
/// assuming balls are already sorted as the implementation would sort).
pub fn first_fit_replay(balls: &[Ball]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| {
        balls[b]
            .radius
            .partial_cmp(&balls[a].radius)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut families: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let mut placed = false;
        for f in families.iter_mut() {
            if f.iter().all(|&j| disjoint(&balls[i], &balls[j])) {
                f.push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            families.push(vec![i]);
        }
    }
    families
}

pub fn disjoint(a: &Ball, b: &Ball) -> bool {
    let dist = a.norm.distance(a.center.as_slice(), b.center.as_slice());
    dist > a.radius + b.radius - 1e-12
}

/// Measure of `ball` under a gridded density by direct fine summation.
pub fn grid_ball_measure(
    grid: &covlab::measure::GridDensity,
    center: &[f64],
    radius: f64,
    norm: Norm,
    per_axis: usize,
) -> f64 {
    let d = center.len();
    let h = 2.0 * radius / per_axis as f64;
    let cell_vol = h.powi(d as i32);
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let p: Vec<f64> = (0..d)
            .map(|i| center[i] - radius + (idx[i] as f64 + 0.5) * h)
            .collect();
        if norm.distance(&p, center) <= radius {
            total += grid.density(&p) * cell_vol;
        }
        let mut k = 0;
        loop {
            if k == d {
                return total;
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
