//! Greedy combinatorial cores of the Vitali and Besicovitch covering
//! theorems, iterative almost-covering, and packing-based lower bounds for
//! the Besicovitch constant `N(E)`.
//!
//! Transfinite induction in the classical proofs degenerates, on finite
//! families, to greedy processing in order of decreasing radius with ties
//! broken by input index; that ordering is used everywhere here so outputs
//! are reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{CovError, Result};
use crate::geometry::{Ball, Norm, RegionSpec, Vector};
use crate::measure::MeasureModel;
use crate::sampler::{uniform_in, SeededSampler};

/// Two balls count as disjoint when their centers are farther apart than
/// the sum of radii minus this slack (touching balls are disjoint).
pub const DISJOINT_TOL: f64 = 1e-12;

/// Classical enlargement constant: 5r-dilations of a greedy selection cover
/// the whole family union.
pub const VITALI_ENLARGEMENT: f64 = 5.0;

pub fn balls_disjoint(a: &Ball, b: &Ball) -> bool {
    let dist = a.norm.distance(a.center.as_slice(), b.center.as_slice());
    dist > a.radius + b.radius - DISJOINT_TOL
}

/// A finite family of balls sharing one norm, with optional target points
/// (the set whose points must be covered or centered).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<Vector>>,
}

impl BallFamily {
    pub fn new(balls: Vec<Ball>) -> Self {
        BallFamily {
            balls,
            targets: None,
        }
    }

    pub fn with_targets(balls: Vec<Ball>, targets: Vec<Vector>) -> Self {
        BallFamily {
            balls,
            targets: Some(targets),
        }
    }

    /// Indices sorted by decreasing radius, ties by input index.
    fn greedy_order(&self, subset: &[usize]) -> Vec<usize> {
        let mut order = subset.to_vec();
        order.sort_by(|&a, &b| {
            self.balls[b]
                .radius
                .partial_cmp(&self.balls[a].radius)
                .unwrap()
                .then(a.cmp(&b))
        });
        order
    }
}

/// Disjoint subfamilies as index sets into the originating family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubfamilyPartition {
    pub families: Vec<Vec<usize>>,
}

/// Greedy disjoint selection: process balls by decreasing radius and keep
/// each ball that is disjoint from everything kept so far. Every discarded
/// ball meets a kept ball of at least its own radius, so the 5r-enlargements
/// of the kept balls cover the union of the family.
pub fn vitali_select(family: &BallFamily) -> Vec<usize> {
    let all: Vec<usize> = (0..family.balls.len()).collect();
    let mut selected: Vec<usize> = Vec::new();
    for i in family.greedy_order(&all) {
        if selected
            .iter()
            .all(|&j| balls_disjoint(&family.balls[i], &family.balls[j]))
        {
            selected.push(i);
        }
    }
    selected
}

/// Keeps the largest ball per distinct center among `subset`, then first-fit
/// packs them into disjoint families by decreasing radius.
fn first_fit_partition(family: &BallFamily, subset: &[usize]) -> Vec<Vec<usize>> {
    // retain the largest-radius ball per center
    let mut retained: Vec<usize> = Vec::new();
    for &i in subset {
        let ci = family.balls[i].center.as_slice();
        match retained.iter_mut().find(|j| {
            family.balls[**j]
                .norm
                .distance(family.balls[**j].center.as_slice(), ci)
                <= DISJOINT_TOL
        }) {
            Some(j) => {
                if family.balls[i].radius > family.balls[*j].radius {
                    *j = i;
                }
            }
            None => retained.push(i),
        }
    }
    let mut families: Vec<Vec<usize>> = Vec::new();
    for i in family.greedy_order(&retained) {
        let slot = families.iter_mut().find(|f| {
            f.iter()
                .all(|&j| balls_disjoint(&family.balls[i], &family.balls[j]))
        });
        match slot {
            Some(f) => f.push(i),
            None => families.push(vec![i]),
        }
    }
    families
}

/// Splits a family of balls centered at the target points into disjoint
/// subfamilies that still cover every target (each target's ball is placed
/// in some family). Duplicate balls per center keep the largest.
pub fn besicovitch_partition(family: &BallFamily) -> Result<SubfamilyPartition> {
    if let Some(targets) = &family.targets {
        for t in targets {
            let covered = family
                .balls
                .iter()
                .any(|b| b.norm.distance(b.center.as_slice(), t.as_slice()) <= DISJOINT_TOL);
            if !covered {
                return Err(CovError::InvalidParameter(format!(
                    "target {t} is not the center of any ball"
                )));
            }
        }
    }
    let all: Vec<usize> = (0..family.balls.len()).collect();
    Ok(SubfamilyPartition {
        families: first_fit_partition(family, &all),
    })
}

/// A packing of points in the ball of radius 2 with pairwise distances
/// at least 1: a certified lower bound for the Besicovitch constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackingResult {
    pub points: Vec<Vector>,
    pub count: usize,
    pub norm: Norm,
}

impl PackingResult {
    /// Checks the packing invariants exactly as stated: pairwise distances
    /// >= 1 - 1e-9 and all points within 2 + 1e-9 of the origin.
    pub fn is_valid(&self) -> bool {
        let origin = vec![0.0; self.points.first().map_or(1, |p| p.dim())];
        for (i, p) in self.points.iter().enumerate() {
            if self.norm.distance(p.as_slice(), &origin) > 2.0 + 1e-9 {
                return false;
            }
            for q in self.points.iter().skip(i + 1) {
                if self.norm.distance(p.as_slice(), q.as_slice()) < 1.0 - 1e-9 {
                    return false;
                }
            }
        }
        true
    }
}

/// Insertion acceptance: at least 1 apart (up to rounding) and inside the
/// radius-2 ball.
fn packing_accepts(points: &[Vec<f64>], cand: &[f64], norm: Norm) -> bool {
    let origin = vec![0.0; cand.len()];
    if norm.distance(cand, &origin) > 2.0 {
        return false;
    }
    points
        .iter()
        .all(|p| norm.distance(p, cand) >= 1.0 - DISJOINT_TOL)
}

/// Orders candidates by distance from the origin (ties lexicographic) and
/// drops those outside the radius-2 ball, so seeding fills from the middle
/// out deterministically.
fn finish_block(mut cands: Vec<Vec<f64>>, norm: Norm) -> Vec<Vec<f64>> {
    cands.retain(|p| norm.length(p) <= 2.0 + 1e-12);
    cands.sort_by(|a, b| {
        norm.length(a)
            .partial_cmp(&norm.length(b))
            .unwrap()
            .then_with(|| a.partial_cmp(b).unwrap())
    });
    cands
}

/// Deterministic structured candidate blocks, one per restart: the
/// hexagonal lattice in the euclidean plane (19 points inside the radius-2
/// disc), then the integer lattice for every dimension and norm. Blocks are
/// kept separate so one lattice never poisons another's greedy fill.
fn structured_blocks(d: usize, norm: Norm) -> Vec<Vec<Vec<f64>>> {
    let mut blocks = Vec::new();
    if d == 2 && norm == Norm::Euclidean {
        let s3 = 3.0f64.sqrt() / 2.0;
        let mut hex = Vec::new();
        for j in -2i64..=2 {
            for i in -4i64..=4 {
                hex.push(vec![i as f64 + 0.5 * j as f64, j as f64 * s3]);
            }
        }
        blocks.push(finish_block(hex, norm));
    }
    let mut lattice = Vec::new();
    let mut idx = vec![-2i64; d];
    'outer: loop {
        lattice.push(idx.iter().map(|&v| v as f64).collect());
        let mut k = 0;
        loop {
            if k == d {
                break 'outer;
            }
            idx[k] += 1;
            if idx[k] <= 2 {
                break;
            }
            idx[k] = -2;
            k += 1;
        }
    }
    blocks.push(finish_block(lattice, norm));
    blocks
}

/// Randomized greedy packing search with structured seeding and local
/// perturbation restarts. Returns the best packing found within `budget`
/// insertion attempts; the result is a certified lower bound on `N(E)`,
/// deterministic for a fixed sampler and monotone nondecreasing in budget
/// for a fixed seed schedule.
pub fn estimate_besicovitch_constant(
    d: usize,
    norm: Norm,
    budget: usize,
    sampler: &SeededSampler,
) -> Result<PackingResult> {
    if d == 0 {
        return Err(CovError::InvalidParameter("dimension must be >= 1".into()));
    }
    if budget == 0 {
        return Err(CovError::InvalidParameter("budget must be >= 1".into()));
    }
    const RESTART_ATTEMPTS: usize = 2048;
    const STALL_LIMIT: usize = 64;

    let blocks = structured_blocks(d, norm);
    let mut best: Vec<Vec<f64>> = Vec::new();
    let mut spent = 0usize;
    let mut restart = 0u64;
    while spent < budget {
        let mut rng = sampler.substream(restart).rng();
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut stall = 0usize;
        let structured = blocks.get(restart as usize).cloned().unwrap_or_default();
        let mut structured_iter = structured.into_iter();
        let chunk = RESTART_ATTEMPTS.min(budget - spent);
        for _ in 0..chunk {
            spent += 1;
            let cand: Vec<f64> = match structured_iter.next() {
                Some(c) => c,
                None => (0..d).map(|_| uniform_in(&mut rng, -2.0, 2.0)).collect(),
            };
            if packing_accepts(&points, &cand, norm) {
                points.push(cand);
                stall = 0;
            } else {
                stall += 1;
                if stall >= STALL_LIMIT {
                    // local perturbation: jitter each point, keeping validity
                    for i in 0..points.len() {
                        let prop: Vec<f64> = points[i]
                            .iter()
                            .map(|&v| v + uniform_in(&mut rng, -0.15, 0.15))
                            .collect();
                        let rest: Vec<Vec<f64>> = points
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, p)| p.clone())
                            .collect();
                        if packing_accepts(&rest, &prop, norm) {
                            points[i] = prop;
                        }
                    }
                    stall = 0;
                }
            }
            if points.len() > best.len() {
                best = points.clone();
            }
        }
        restart += 1;
    }
    let points = best
        .into_iter()
        .map(|p| Vector::new(p).expect("packing points are finite"))
        .collect::<Vec<_>>();
    let count = points.len();
    Ok(PackingResult {
        points,
        count,
        norm,
    })
}

/// Result of the iterative almost-covering extraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlmostCover {
    /// Pairwise disjoint selection, as indices into the input family.
    pub selected: Vec<usize>,
    /// Monte Carlo estimate of the covered fraction of the region measure.
    pub covered_fraction: f64,
    pub std_error: f64,
    /// Raised when a round gained less than 0.1% new measure (or ran out of
    /// usable balls) before reaching the target fraction.
    pub stagnated: bool,
    pub rounds: usize,
    /// Covered fraction after each round (nondecreasing).
    pub fraction_history: Vec<f64>,
}

/// Iteratively extracts disjoint subfamilies until the selected balls cover
/// at least `target_fraction` of `mu(region)` (Monte Carlo estimate): each
/// round partitions the balls still disjoint from the selection and keeps
/// the single subfamily with the largest estimated uncovered gain.
pub fn measure_almost_cover(
    family: &BallFamily,
    region: &RegionSpec,
    mu: &MeasureModel,
    target_fraction: f64,
    sampler: &SeededSampler,
) -> Result<AlmostCover> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(CovError::InvalidParameter(format!(
            "target fraction must lie in (0,1), got {target_fraction}"
        )));
    }
    const POINTS: usize = 20_000;
    let bounds = region.bounding_box();
    let d = bounds.dim();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    if let MeasureModel::WeightedSamples { points, weights: w } = mu {
        // atomic measures are covered atom by atom, exactly
        for (p, w) in points.iter().zip(w) {
            if region.contains(p.as_slice()) {
                pts.push(p.as_slice().to_vec());
                weights.push(*w);
            }
        }
    } else {
        let mut rng = sampler.substream(0).rng();
        let max_attempts = POINTS * 50;
        let mut attempts = 0;
        while pts.len() < POINTS && attempts < max_attempts {
            attempts += 1;
            let x: Vec<f64> = (0..d)
                .map(|i| uniform_in(&mut rng, bounds.lower[i], bounds.upper[i]))
                .collect();
            if region.contains(&x) {
                let w = mu.density_at(&x);
                pts.push(x);
                weights.push(w);
            }
        }
    }
    if pts.is_empty() {
        return Err(CovError::InvalidParameter(
            "could not sample any region point; is the region empty?".into(),
        ));
    }
    let total_weight: f64 = weights.iter().sum();
    if total_weight == 0.0 {
        return Err(CovError::InvalidParameter(
            "region has zero measure under mu".into(),
        ));
    }

    let mut covered = vec![false; pts.len()];
    let mut covered_weight = 0.0;
    let mut selected: Vec<usize> = Vec::new();
    let mut usable: Vec<usize> = (0..family.balls.len()).collect();
    let mut stagnated = false;
    let mut rounds = 0usize;
    let mut fraction_history: Vec<f64> = Vec::new();

    loop {
        let fraction = covered_weight / total_weight;
        if fraction >= target_fraction {
            break;
        }
        if usable.is_empty() {
            stagnated = true;
            break;
        }
        rounds += 1;
        let families = first_fit_partition(family, &usable);
        // gain of a subfamily: weight of uncovered points it captures
        let mut best_gain = -1.0;
        let mut best_family: Option<&Vec<usize>> = None;
        for f in &families {
            let gain: f64 = pts
                .iter()
                .zip(&weights)
                .zip(&covered)
                .filter(|((p, _), c)| !**c && f.iter().any(|&bi| family.balls[bi].contains(p)))
                .map(|((_, w), _)| *w)
                .sum();
            if gain > best_gain {
                best_gain = gain;
                best_family = Some(f);
            }
        }
        let best_family = match best_family {
            Some(f) => f.clone(),
            None => {
                stagnated = true;
                break;
            }
        };
        if best_gain / total_weight < 1e-3 {
            stagnated = true;
            break;
        }
        for (k, p) in pts.iter().enumerate() {
            if !covered[k] && best_family.iter().any(|&bi| family.balls[bi].contains(p)) {
                covered[k] = true;
                covered_weight += weights[k];
            }
        }
        selected.extend(best_family.iter().copied());
        usable.retain(|&i| {
            !selected.contains(&i)
                && selected
                    .iter()
                    .all(|&j| balls_disjoint(&family.balls[i], &family.balls[j]))
        });
        fraction_history.push(covered_weight / total_weight);
    }

    let fraction = covered_weight / total_weight;
    // effective sample size for the weighted binomial fraction; atomic
    // measures are summed exactly
    let std_error = if mu.is_atomic() {
        0.0
    } else {
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        let n_eff = if sum_sq > 0.0 {
            total_weight * total_weight / sum_sq
        } else {
            1.0
        };
        (fraction * (1.0 - fraction) / n_eff).sqrt()
    };
    Ok(AlmostCover {
        selected,
        covered_fraction: fraction,
        std_error,
        stagnated,
        rounds,
        fraction_history,
    })
}
