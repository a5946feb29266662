//! Implicit Voronoi-cell predicates.
//!
//! The cell of site `s` is the intersection of the bisector halfspaces
//! `2(t − s)·x ≤ ‖t‖² − ‖s‖²` over all other sites `t`. Whether a cell meets
//! a box is decided by linear feasibility of those halfspaces together with
//! the box faces; no explicit diagram is ever built.

use crate::error::{Error, Result};
use crate::geometry::{dist2, OrientedBox, Point, HARD_MAX_DIM};
use crate::lp::{feasible_in_box, RELAX};

/// Canonical site identifier: the position of the site in its [`SiteSet`].
pub type SiteId = u32;

/// The input sites, stored flat. Sites are pairwise distinct.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSet {
    dim: usize,
    coords: Vec<f64>,
}

impl SiteSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let dim = points.first().ok_or(Error::NoPoints)?.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            coords.extend_from_slice(p.coords());
        }
        SiteSet::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if dim > HARD_MAX_DIM {
            return Err(Error::DimensionTooLarge {
                dim,
                max: HARD_MAX_DIM,
            });
        }
        if coords.is_empty() {
            return Err(Error::NoPoints);
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len() % dim,
            });
        }
        if coords.len() / dim > SiteId::MAX as usize {
            return Err(Error::InvalidParameter {
                name: "sites",
                reason: "too many sites".into(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("site coordinates"));
        }
        let set = SiteSet { dim, coords };
        set.check_distinct()?;
        Ok(set)
    }

    fn check_distinct(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let cmp = |a: &usize, b: &usize| {
            self.site(*a)
                .iter()
                .zip(self.site(*b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        };
        order.sort_by(cmp);
        for w in order.windows(2) {
            // Exact coordinate equality; -0.0 and 0.0 compare equal here.
            if self.site(w[0]) == self.site(w[1]) {
                let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::DuplicateSite { first, second });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(self.site(i).to_vec()).expect("sites are validated")
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(dist2(self.site(i), self.site(j)));
            }
        }
        best.sqrt()
    }
}

/// Index of the site closest to `q`; ties go to the smallest index.
pub fn nearest_site(q: &Point, sites: &SiteSet) -> Result<SiteId> {
    if q.dim() != sites.dim() {
        return Err(Error::DimensionMismatch {
            expected: sites.dim(),
            got: q.dim(),
        });
    }
    Ok(nearest_site_coords(q.coords(), sites))
}

pub(crate) fn nearest_site_coords(q: &[f64], sites: &SiteSet) -> SiteId {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, s) in sites.iter().enumerate() {
        let d = dist2(q, s);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best as SiteId
}

/// Whether the Voronoi cell of site `i`, taken with respect to the sites in
/// `candidates`, meets the closed box `b`.
///
/// Restricting the bisectors to `candidates` gives the true answer whenever
/// the candidates include every site whose cell meets some box enclosing `b`.
pub fn cell_box_intersects(
    i: SiteId,
    sites: &SiteSet,
    b: &OrientedBox,
    candidates: &[SiteId],
) -> Result<bool> {
    let d = sites.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: b.dim(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    for &c in candidates.iter().chain(std::iter::once(&i)) {
        if c as usize >= sites.len() {
            return Err(Error::SiteOutOfRange {
                index: c as usize,
                len: sites.len(),
            });
        }
    }
    let pos = candidates
        .iter()
        .position(|&c| c == i)
        .ok_or(Error::InvalidParameter {
            name: "candidates",
            reason: format!("site {i} is not a candidate"),
        })?;
    // Sites in the box frame, relative to its center.
    let mut local = Vec::with_capacity(candidates.len() * d);
    let mut y = [0.0; HARD_MAX_DIM];
    for &c in candidates {
        b.local_coords(sites.site(c as usize), &mut y);
        local.extend_from_slice(&y[..d]);
    }
    let mut tester = CellTester::default();
    Ok(tester.touches(&local, d, candidates.len(), pos, b.half_extents()))
}

/// Counters for the feasibility work done during a build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FeasibilityCounters {
    /// Cell–box predicate evaluations.
    pub cell_tests: u64,
    /// Predicates that needed the LP kernel after the cheap filters.
    pub lp_calls: u64,
}

/// Reusable scratch space for cell–box tests against axis-aligned boxes in
/// some tree frame.
#[derive(Default)]
pub(crate) struct CellTester {
    rel: Vec<f64>,
    norms: Vec<f64>,
    rows: Vec<f64>,
    pub counters: FeasibilityCounters,
}

impl CellTester {
    /// Pushes to `out` every candidate (a local index into `pts`) whose cell
    /// meets the box `center ± half`, in candidate order.
    pub(crate) fn intersecting(
        &mut self,
        pts: &[f64],
        d: usize,
        candidates: &[u32],
        center: &[f64],
        half: &[f64],
        out: &mut Vec<u32>,
    ) {
        if candidates.len() == 1 {
            out.push(candidates[0]);
            return;
        }
        let mut rel = std::mem::take(&mut self.rel);
        rel.clear();
        for &c in candidates {
            let p = &pts[c as usize * d..(c as usize + 1) * d];
            rel.extend(p.iter().zip(center).map(|(a, b)| a - b));
        }
        for (k, &c) in candidates.iter().enumerate() {
            if self.touches(&rel, d, candidates.len(), k, half) {
                out.push(c);
            }
        }
        self.rel = rel;
    }

    /// Cell of site `k` among the `m` sites in `rel` (coordinates relative to
    /// the box center) against the box `±half`.
    fn touches(&mut self, rel: &[f64], d: usize, m: usize, k: usize, half: &[f64]) -> bool {
        self.counters.cell_tests += 1;
        if m == 1 {
            return true;
        }
        let own = &rel[k * d..(k + 1) * d];
        // A site lies in its own cell.
        if (0..d).all(|j| own[j].abs() <= half[j] + RELAX) {
            return true;
        }
        self.norms.clear();
        self.norms
            .extend(rel.chunks_exact(d).map(|r| r.iter().map(|v| v * v).sum::<f64>()));

        // Cheap witness: the box point closest to the site.
        let mut clamp = [0.0; HARD_MAX_DIM];
        for j in 0..d {
            clamp[j] = own[j].clamp(-half[j], half[j]);
        }
        self.rows.clear();
        let mut center_ok = true;
        let mut clamp_ok = true;
        let mut a = [0.0; HARD_MAX_DIM];
        for t in (0..m).filter(|&t| t != k) {
            let other = &rel[t * d..(t + 1) * d];
            for j in 0..d {
                a[j] = 2.0 * (other[j] - own[j]);
            }
            let na = a[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            let beta = (self.norms[t] - self.norms[k]) / na + RELAX;
            let mut spread = 0.0;
            for j in 0..d {
                a[j] /= na;
                spread += a[j].abs() * (half[j] + RELAX);
            }
            if -spread > beta {
                // The whole box is on the far side of this bisector.
                return false;
            }
            if spread <= beta {
                continue;
            }
            center_ok &= beta >= 0.0;
            clamp_ok &= (0..d).map(|j| a[j] * clamp[j]).sum::<f64>() <= beta;
            self.rows.extend_from_slice(&a[..d]);
            self.rows.push(beta);
        }
        if center_ok || clamp_ok || self.rows.len() <= d + 1 {
            return true;
        }
        self.counters.lp_calls += 1;
        let mut lo = [0.0; HARD_MAX_DIM];
        let mut hi = [0.0; HARD_MAX_DIM];
        for j in 0..d {
            hi[j] = half[j] + RELAX;
            lo[j] = -hi[j];
        }
        feasible_in_box(&mut self.rows, d, &lo[..d], &hi[..d])
    }
}
