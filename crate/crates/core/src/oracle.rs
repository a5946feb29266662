//! Ground truth by sampling: the ε-ANN set of a query estimated from random
//! points of the ε-ball, the smallest enclosing ball, and the expected
//! cardinality experiment on uniform sites.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxtree::BuildParams;
use crate::cells::{nearest_site_coords, SiteId, SiteSet};
use crate::error::{Error, Result};
use crate::geometry::{dist2, Point};
use crate::index::AnnIndex;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub samples_per_ball: usize,
    pub rng_seed: u64,
    /// Relative radius slack `τ` of the sandwich checks.
    pub slack: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            samples_per_ball: 10_000,
            rng_seed: 0,
            slack: 0.1,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_ball == 0 {
            return Err(Error::InvalidParameter {
                name: "samples_per_ball",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Uniform point of the closed ball of radius `r` about `c`, by rejection
/// from the enclosing cube.
pub fn sample_ball(rng: &mut impl Rng, c: &[f64], r: f64, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for (o, &cj) in out.iter_mut().zip(c) {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            n2 += u * u;
            *o = cj + r * u;
        }
        if n2 <= 1.0 {
            return;
        }
    }
}

/// Sites whose cells can meet the ball of radius `r` about `q`, ascending.
fn ball_candidates(q: &[f64], sites: &SiteSet, r: f64) -> Vec<SiteId> {
    let nn = nearest_site_coords(q, sites) as usize;
    let reach = dist2(q, sites.site(nn)).sqrt() + 2.0 * r;
    let reach2 = reach * reach * (1.0 + 1e-12) + 1e-300;
    (0..sites.len())
        .filter(|&i| dist2(q, sites.site(i)) <= reach2)
        .map(|i| i as SiteId)
        .collect()
}

struct Restricted {
    ids: Vec<SiteId>,
    sub: SiteSet,
}

impl Restricted {
    fn new(q: &[f64], sites: &SiteSet, r: f64) -> Self {
        let ids = ball_candidates(q, sites, r);
        let mut flat = Vec::with_capacity(ids.len() * sites.dim());
        for &i in &ids {
            flat.extend_from_slice(sites.site(i as usize));
        }
        let sub = SiteSet::from_flat(sites.dim(), flat).expect("subset of valid sites");
        Restricted { ids, sub }
    }

    fn nearest(&self, p: &[f64]) -> SiteId {
        self.ids[nearest_site_coords(p, &self.sub) as usize]
    }
}

/// Nearest sites of `q` and of `samples_per_ball` uniform points of the
/// closed `eps`-ball about `q`, ascending.
pub fn oracle_s_prime(q: &Point, sites: &SiteSet, eps: f64, cfg: &OracleConfig) -> Result<Vec<SiteId>> {
    check(q, sites, cfg)?;
    let r = eps.max(0.0);
    let restricted = Restricted::new(q.coords(), sites, r);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut found = vec![restricted.nearest(q.coords())];
    let mut p = vec![0.0; q.dim()];
    for _ in 0..cfg.samples_per_ball {
        sample_ball(&mut rng, q.coords(), r, &mut p);
        found.push(restricted.nearest(&p));
    }
    found.sort_unstable();
    found.dedup();
    Ok(found)
}

/// For each target, whether some sample of the `radius`-ball about `q` (or
/// `q` itself) has it as nearest site. Stops once every target is seen.
pub fn witnesses(
    q: &Point,
    sites: &SiteSet,
    radius: f64,
    targets: &[SiteId],
    cfg: &OracleConfig,
) -> Result<Vec<bool>> {
    check(q, sites, cfg)?;
    let restricted = Restricted::new(q.coords(), sites, radius.max(0.0));
    let mut seen = vec![false; targets.len()];
    let mut missing = targets.len();
    let mark = |s: SiteId, seen: &mut Vec<bool>| {
        let mut fresh = 0;
        for (k, &t) in targets.iter().enumerate() {
            if t == s && !seen[k] {
                seen[k] = true;
                fresh += 1;
            }
        }
        fresh
    };
    missing -= mark(restricted.nearest(q.coords()), &mut seen);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut p = vec![0.0; q.dim()];
    for _ in 0..cfg.samples_per_ball {
        if missing == 0 {
            break;
        }
        sample_ball(&mut rng, q.coords(), radius.max(0.0), &mut p);
        missing -= mark(restricted.nearest(&p), &mut seen);
    }
    Ok(seen)
}

fn check(q: &Point, sites: &SiteSet, cfg: &OracleConfig) -> Result<()> {
    cfg.validate()?;
    if q.dim() != sites.dim() {
        return Err(Error::DimensionMismatch {
            expected: sites.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

/// Outcome of both sandwich checks for one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SandwichOutcome {
    /// Every returned site is witnessed within `ε·(1+τ)`.
    pub upper: bool,
    /// Every site witnessed within `ε·(1−τ)` belongs to some leaf set
    /// containing the query.
    pub lower: bool,
    /// Returned sites without a witness.
    pub unwitnessed: Vec<SiteId>,
}

pub fn sandwich(index: &AnnIndex, q: &Point, cfg: &OracleConfig) -> Result<SandwichOutcome> {
    let eps = index.params().eps;
    let r = index.query(q)?;
    let seen = witnesses(q, index.sites(), eps * (1.0 + cfg.slack), &r.s_prime, cfg)?;
    let unwitnessed: Vec<SiteId> = r
        .s_prime
        .iter()
        .zip(&seen)
        .filter(|(_, &w)| !w)
        .map(|(&s, _)| s)
        .collect();
    let inner = oracle_s_prime(q, index.sites(), eps * (1.0 - cfg.slack), cfg)?;
    let sets = index.containing_leaf_sets(q)?;
    let lower = inner
        .iter()
        .all(|s| sets.iter().any(|set| set.binary_search(s).is_ok()));
    Ok(SandwichOutcome {
        upper: unwitnessed.is_empty(),
        lower,
        unwitnessed,
    })
}

/// Radius of the smallest ball enclosing all sites.
pub fn smallest_enclosing_ball_radius(sites: &SiteSet) -> f64 {
    let mut pts: Vec<&[f64]> = sites.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ba11);
    pts.shuffle(&mut rng);
    let ball = welzl(&pts, pts.len(), &mut Vec::new(), sites.dim());
    ball.radius2.sqrt()
}

struct Ball {
    center: Vec<f64>,
    radius2: f64,
}

impl Ball {
    fn contains(&self, p: &[f64]) -> bool {
        dist2(&self.center, p) <= self.radius2 * (1.0 + 1e-12) + 1e-18
    }
}

/// Smallest ball enclosing `pts[..end]` with every point of `boundary` on
/// its surface.
fn welzl<'a>(pts: &[&'a [f64]], end: usize, boundary: &mut Vec<&'a [f64]>, d: usize) -> Ball {
    let mut ball = circumball(boundary, d);
    if boundary.len() == d + 1 {
        return ball;
    }
    for i in 0..end {
        if !ball.contains(pts[i]) {
            boundary.push(pts[i]);
            ball = welzl(pts, i, boundary, d);
            boundary.pop();
        }
    }
    ball
}

/// Smallest ball with all of `b` on its surface: center in the affine hull,
/// from the Gram system of the edge vectors.
fn circumball(b: &[&[f64]], d: usize) -> Ball {
    match b.len() {
        0 => {
            return Ball {
                center: vec![0.0; d],
                radius2: -1.0,
            }
        }
        1 => {
            return Ball {
                center: b[0].to_vec(),
                radius2: 0.0,
            }
        }
        _ => {}
    }
    let p0 = b[0];
    let k = b.len() - 1;
    let e: Vec<Vec<f64>> = b[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(x, y)| x - y).collect())
        .collect();
    // 2·(e_i·e_j) λ_j = |e_i|²
    let mut m = vec![0.0; k * (k + 1)];
    for i in 0..k {
        for j in 0..k {
            m[i * (k + 1) + j] = 2.0 * crate::geometry::dot(&e[i], &e[j]);
        }
        m[i * (k + 1) + k] = crate::geometry::dot(&e[i], &e[i]);
    }
    let lambda = solve_dense(&mut m, k);
    let mut center = p0.to_vec();
    for (l, ei) in lambda.iter().zip(&e) {
        for (c, v) in center.iter_mut().zip(ei) {
            *c += l * v;
        }
    }
    let radius2 = b.iter().map(|p| dist2(&center, p)).fold(0.0, f64::max);
    Ball { center, radius2 }
}

/// Gaussian elimination with partial pivoting on the augmented `k×(k+1)`
/// matrix. Degenerate pivots leave their unknown at zero.
fn solve_dense(m: &mut [f64], k: usize) -> Vec<f64> {
    let w = k + 1;
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut pivots = vec![usize::MAX; k];
    let mut row = 0;
    for col in 0..k {
        let best = (row..k).max_by(|&a, &b| m[a * w + col].abs().total_cmp(&m[b * w + col].abs()));
        let Some(best) = best else { break };
        if m[best * w + col].abs() < 1e-14 * scale {
            continue;
        }
        for j in 0..w {
            m.swap(row * w + j, best * w + j);
        }
        for r in 0..k {
            if r != row {
                let f = m[r * w + col] / m[row * w + col];
                if f != 0.0 {
                    for j in col..w {
                        m[r * w + j] -= f * m[row * w + j];
                    }
                }
            }
        }
        pivots[col] = row;
        row += 1;
    }
    (0..k)
        .map(|col| match pivots[col] {
            usize::MAX => 0.0,
            r => m[r * w + k] / m[r * w + col],
        })
        .collect()
}

/// Result of the expected-cardinality experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    /// Radius of the ball the sites are drawn from.
    pub r: f64,
    /// `(eps/(2r))^d · n`.
    pub predicted: f64,
    pub measured_mean: f64,
    pub trials: usize,
    /// `|S′|` per trial.
    pub cardinalities: Vec<usize>,
    /// Smallest enclosing ball radius of each trial's sites.
    pub enclosing_radii: Vec<f64>,
}

impl ExperimentReport {
    pub fn ratio(&self) -> f64 {
        self.measured_mean / self.predicted
    }

    /// One `key=value` record per trial, then the summary record.
    pub fn to_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .cardinalities
            .iter()
            .zip(&self.enclosing_radii)
            .enumerate()
            .map(|(t, (c, r))| format!("trial={t} sprime_size={c} enclosing_radius={r:.6}"))
            .collect();
        out.push(format!(
            "n={} d={} eps={} r={} trials={} predicted={} measured_mean={} ratio={}",
            self.n,
            self.d,
            self.eps,
            self.r,
            self.trials,
            self.predicted,
            self.measured_mean,
            self.ratio()
        ));
        out
    }
}

/// Per trial: `n` uniform sites in the unit ball, one uniform query in the
/// concentric ball of radius 1/2, and the size of its answer. Trial `t` is
/// seeded with `seed + t`.
pub fn run_cardinality_experiment(
    n: usize,
    d: usize,
    eps: f64,
    trials: usize,
    seed: u64,
    max_nodes: Option<u64>,
) -> Result<ExperimentReport> {
    if n < 10 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need at least 10 sites, got {n}"),
        });
    }
    if trials < 10 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: format!("need at least 10 trials, got {trials}"),
        });
    }
    let params = BuildParams::new(eps, d)?.with_max_nodes(max_nodes);
    let origin = vec![0.0; d];
    let mut cardinalities = Vec::with_capacity(trials);
    let mut enclosing_radii = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let mut flat = vec![0.0; n * d];
        for p in flat.chunks_exact_mut(d) {
            sample_ball(&mut rng, &origin, 1.0, p);
        }
        let sites = SiteSet::from_flat(d, flat)?;
        enclosing_radii.push(smallest_enclosing_ball_radius(&sites));
        let index = AnnIndex::build(sites, &params)?;
        let mut q = vec![0.0; d];
        sample_ball(&mut rng, &origin, 0.5, &mut q);
        let r = index.query(&Point::new(q)?)?;
        log::info!("trial {t}: |S'| = {}", r.s_prime.len());
        cardinalities.push(r.s_prime.len());
    }
    let measured_mean = cardinalities.iter().sum::<usize>() as f64 / trials as f64;
    Ok(ExperimentReport {
        n,
        d,
        eps,
        r: 1.0,
        predicted: (eps / 2.0).powi(d as i32) * n as f64,
        measured_mean,
        trials,
        cardinalities,
        enclosing_radii,
    })
}
