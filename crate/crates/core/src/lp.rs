//! Low-dimensional linear feasibility by Seidel's randomized incremental
//! method.
//!
//! The kernel works inside an axis-aligned bounding box, which doubles as the
//! starting vertex and keeps every subproblem bounded. Constraints are rows of
//! `k + 1` values, coefficients followed by the right-hand side of `a·x ≤ b`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tolerance of the feasibility contract: a system with a point of slack
/// `≥ FEAS_TOL` is feasible, one whose best point violates a constraint by
/// `≥ FEAS_TOL` is infeasible.
pub const FEAS_TOL: f64 = 1e-9;

/// Every normalized constraint is relaxed by this amount before solving.
pub(crate) const RELAX: f64 = 0.5 * FEAS_TOL;

/// Half width of the search region used when the caller supplies no box.
pub const LP_BOUND: f64 = 1e6;

const INNER_TOL: f64 = 1e-13;
const PIVOT_MIN: f64 = 1e-12;

/// A closed halfspace `{x : normal · x ≤ offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Halfspace { normal, offset }
    }
}

/// Whether the intersection of `halfspaces` in dimension `dim` is nonempty.
/// The search is confined to the cube `[-LP_BOUND, LP_BOUND]^dim`.
pub fn lp_feasible(halfspaces: &[Halfspace], dim: usize) -> bool {
    if dim == 0 {
        return halfspaces.iter().all(|h| h.offset >= -RELAX);
    }
    let w = dim + 1;
    let mut rows = Vec::with_capacity(halfspaces.len() * w);
    for h in halfspaces {
        debug_assert_eq!(h.normal.len(), dim);
        let n = crate::geometry::norm(&h.normal);
        if n == 0.0 {
            if h.offset < -RELAX {
                return false;
            }
            continue;
        }
        rows.extend(h.normal.iter().map(|a| a / n));
        rows.push(h.offset / n + RELAX);
    }
    let lo = vec![-LP_BOUND; dim];
    let hi = vec![LP_BOUND; dim];
    feasible_in_box(&mut rows, dim, &lo, &hi)
}

/// Feasibility of `rows` intersected with the box `[lo, hi]`. Rows are
/// shuffled in place with a fixed seed, so results are reproducible.
pub(crate) fn feasible_in_box(rows: &mut [f64], k: usize, lo: &[f64], hi: &[f64]) -> bool {
    let w = k + 1;
    let m = rows.len() / w;
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return false;
    }
    if m > 2 {
        let mut order: Vec<usize> = (0..m).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ m as u64);
        order.shuffle(&mut rng);
        let src = rows.to_vec();
        for (dst, &o) in order.iter().enumerate() {
            rows[dst * w..(dst + 1) * w].copy_from_slice(&src[o * w..(o + 1) * w]);
        }
    }
    let c: Vec<f64> = (0..k).map(|j| 1.0 + 0.318_309_886 * j as f64).collect();
    solve(rows, k, lo, hi, &c).is_some()
}

fn solve(rows: &[f64], k: usize, lo: &[f64], hi: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    if k == 1 {
        return solve_1d(rows, lo[0], hi[0], c[0]).map(|x| vec![x]);
    }
    let w = k + 1;
    let m = rows.len() / w;
    let mut x: Vec<f64> = (0..k)
        .map(|j| if c[j] > 0.0 { lo[j] } else { hi[j] })
        .collect();
    for i in 0..m {
        let row = &rows[i * w..(i + 1) * w];
        let (a, b) = (&row[..k], row[k]);
        let lhs: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
        let mag: f64 = a.iter().zip(&x).map(|(p, q)| (p * q).abs()).sum();
        if lhs <= b + INNER_TOL * (1.0 + b.abs() + mag) {
            continue;
        }
        // The new point lies on a·x = b; eliminate the largest coefficient.
        let j = (0..k)
            .max_by(|&p, &q| a[p].abs().total_cmp(&a[q].abs()))
            .unwrap();
        let p = a[j];
        if p.abs() < PIVOT_MIN {
            return None;
        }
        let g: Vec<f64> = a.iter().map(|v| v / p).collect();
        let g0 = b / p;
        let mut sub = Vec::with_capacity((i + 2) * k);
        for r in 0..i {
            let rr = &rows[r * w..(r + 1) * w];
            let f = rr[j];
            for l in (0..k).filter(|&l| l != j) {
                sub.push(rr[l] - f * g[l]);
            }
            sub.push(rr[k] - f * g0);
        }
        // lo_j ≤ x_j = g0 − Σ g_l x_l ≤ hi_j
        for l in (0..k).filter(|&l| l != j) {
            sub.push(-g[l]);
        }
        sub.push(hi[j] - g0);
        for l in (0..k).filter(|&l| l != j) {
            sub.push(g[l]);
        }
        sub.push(g0 - lo[j]);

        let sub_lo: Vec<f64> = (0..k).filter(|&l| l != j).map(|l| lo[l]).collect();
        let sub_hi: Vec<f64> = (0..k).filter(|&l| l != j).map(|l| hi[l]).collect();
        let sub_c: Vec<f64> = (0..k)
            .filter(|&l| l != j)
            .map(|l| c[l] - c[j] * g[l])
            .collect();
        let y = solve(&sub, k - 1, &sub_lo, &sub_hi, &sub_c)?;
        let mut it = y.into_iter();
        let mut xj = g0;
        for l in 0..k {
            if l != j {
                x[l] = it.next().unwrap();
                xj -= g[l] * x[l];
            }
        }
        x[j] = xj;
    }
    Some(x)
}

fn solve_1d(rows: &[f64], mut lo: f64, mut hi: f64, c: f64) -> Option<f64> {
    for row in rows.chunks_exact(2) {
        let (a, b) = (row[0], row[1]);
        if a > PIVOT_MIN {
            hi = hi.min(b / a);
        } else if a < -PIVOT_MIN {
            lo = lo.max(b / a);
        } else if b < -INNER_TOL * (1.0 + b.abs()) {
            return None;
        }
    }
    let slack = INNER_TOL * (1.0 + lo.abs().max(hi.abs()));
    if lo > hi + slack {
        return None;
    }
    if lo > hi {
        return Some(0.5 * (lo + hi));
    }
    Some(if c > 0.0 { lo } else { hi })
}
