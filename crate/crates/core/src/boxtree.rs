//! Box trees: `2^d`-ary subdivision of a root hyperbox with per-node site
//! sets, plus the main tree over the bounding box and its point location.
//!
//! Node boxes are implicit. A node at `level` with integer cell coordinates
//! `cell` (in units of the level's side length) has, in the root frame,
//! center `-H + (2·cell + 1)·H/2^level` and half extents `H/2^level`, where
//! `H` are the root half extents. Point location quantizes the query once at
//! the deepest possible level and then walks down by the bits of the cell
//! coordinates, which realizes the lower-closed/upper-open child convention.

use std::collections::HashMap;

use crate::cells::{CellTester, SiteId, SiteSet};
use crate::error::{Error, Result};
use crate::geometry::{OrientedBox, Point, GEOM_TOL, HARD_MAX_DIM};

pub type NodeId = u32;
pub(crate) const NONE: u32 = u32::MAX;

/// Relative slack on the leaf-volume test, so a box whose volume equals
/// `delta` up to rounding is still subdivided.
pub(crate) const VOLUME_SLACK: f64 = 1e-9;

/// Default cap on the total number of tree nodes an index may allocate.
pub const DEFAULT_MAX_NODES: u64 = 60_000_000;

/// `(eps / (2·√d))^d`: a cube of this volume has main diagonal `eps / 2`.
pub fn compute_delta(eps: f64, dim: usize) -> f64 {
    (eps / (2.0 * (dim as f64).sqrt())).powi(dim as i32)
}

/// `max(2, √d)`.
pub fn default_scale(dim: usize) -> f64 {
    (dim as f64).sqrt().max(2.0)
}

/// Build parameters shared by the main and auxiliary trees.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildParams {
    /// Approximation radius, in the units of the sites.
    pub eps: f64,
    /// Volume tolerance; always `compute_delta(eps, dim)`.
    pub delta: f64,
    /// Bounding-box inflation relative to the extent of the sites.
    pub margin_factor: f64,
    /// Auxiliary root scaling.
    pub scale_factor: f64,
    pub max_dim: usize,
    /// Cap on the total node count; `None` disables the guard.
    pub max_nodes: Option<u64>,
    /// Build the hashed leaf overlay for constant-time point location.
    pub hash_locate: bool,
}

impl BuildParams {
    pub fn new(eps: f64, dim: usize) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("must be positive and finite, got {eps}"),
            });
        }
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(BuildParams {
            eps,
            delta: compute_delta(eps, dim),
            margin_factor: 1.0,
            scale_factor: default_scale(dim),
            max_dim: 6,
            max_nodes: Some(DEFAULT_MAX_NODES),
            hash_locate: false,
        })
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin >= 0.0) || !margin.is_finite() {
            return Err(Error::InvalidParameter {
                name: "margin",
                reason: format!("must be non-negative, got {margin}"),
            });
        }
        self.margin_factor = margin;
        Ok(self)
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale >= 2.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("must be at least 2, got {scale}"),
            });
        }
        self.scale_factor = scale;
        Ok(self)
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Result<Self> {
        if max_dim == 0 || max_dim > HARD_MAX_DIM {
            return Err(Error::InvalidParameter {
                name: "max_dim",
                reason: format!("must be in 1..={HARD_MAX_DIM}"),
            });
        }
        self.max_dim = max_dim;
        Ok(self)
    }

    pub fn with_max_nodes(mut self, max_nodes: Option<u64>) -> Self {
        self.max_nodes = max_nodes;
        self
    }

    pub fn with_hash_locate(mut self, on: bool) -> Self {
        self.hash_locate = on;
        self
    }

    /// Volumes below this threshold make a leaf.
    pub(crate) fn leaf_volume(&self) -> f64 {
        self.delta * (1.0 - VOLUME_SLACK)
    }
}

/// Axis-aligned cube centered on the midpoint of the sites' bounding box,
/// of side `extent·(1 + 2·margin)` but at least `eps`, where `extent` is the
/// largest per-axis spread of the sites.
pub fn make_bounding_box(sites: &SiteSet, margin_factor: f64, eps: f64) -> Result<OrientedBox> {
    if sites.is_empty() {
        return Err(Error::NoPoints);
    }
    let d = sites.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for s in sites.iter() {
        for j in 0..d {
            lo[j] = lo[j].min(s[j]);
            hi[j] = hi[j].max(s[j]);
        }
    }
    let extent = (0..d).map(|j| hi[j] - lo[j]).fold(0.0, f64::max);
    let side = (extent * (1.0 + 2.0 * margin_factor)).max(eps);
    let center: Vec<f64> = (0..d).map(|j| 0.5 * (lo[j] + hi[j])).collect();
    OrientedBox::axis_aligned(Point::new(center)?, vec![0.5 * side; d])
}

/// Pads a cube so that its side is `delta^(1/d)·2^k`, making `V/δ` an exact
/// power of `2^d`. Returns the padded cube and `k`.
pub(crate) fn pad_to_power_of_two(bb: &OrientedBox, params: &BuildParams) -> Result<(OrientedBox, u32)> {
    let d = bb.dim();
    let base = params.eps / (2.0 * (d as f64).sqrt());
    let want = 2.0 * bb.half_extents()[0];
    let mut side = base;
    let mut k = 0u32;
    while side < want * (1.0 - 1e-12) {
        side *= 2.0;
        k += 1;
    }
    let padded = OrientedBox::axis_aligned(bb.center().clone(), vec![0.5 * side; d])?;
    Ok((padded, k))
}

/// Geometry of one box tree: its root box and the deepest level any node can
/// reach under the volume stop.
#[derive(Clone, Debug)]
pub(crate) struct Frame {
    pub root: OrientedBox,
    pub depth_limit: u32,
}

impl Frame {
    pub fn new(root: OrientedBox, leaf_volume: f64) -> Result<Self> {
        let d = root.dim() as i32;
        let mut vol = root.volume();
        let mut depth_limit = 0;
        while vol >= leaf_volume {
            vol /= 2f64.powi(d);
            depth_limit += 1;
            if depth_limit > 60 {
                return Err(Error::Capacity {
                    what: "tree depth",
                    needed: depth_limit as u64,
                    budget: 60,
                });
            }
        }
        Ok(Frame { root, depth_limit })
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn half_at(&self, level: u32, out: &mut [f64]) {
        let f = 0.5f64.powi(level as i32);
        for (o, h) in out.iter_mut().zip(self.root.half_extents()) {
            *o = h * f;
        }
    }

    pub fn volume_at(&self, level: u32) -> f64 {
        self.root.volume() * 0.5f64.powi((level as usize * self.dim()) as i32)
    }

    /// Node center in root-frame coordinates, relative to the root center.
    pub fn local_center(&self, level: u32, cell: &[u64], out: &mut [f64]) {
        let f = 0.5f64.powi(level as i32);
        for (j, o) in out.iter_mut().enumerate().take(self.dim()) {
            let h = self.root.half_extents()[j];
            *o = -h + (2 * cell[j] + 1) as f64 * (h * f);
        }
    }

    pub fn node_box(&self, level: u32, cell: &[u64]) -> OrientedBox {
        let d = self.dim();
        let mut local = [0.0; HARD_MAX_DIM];
        let mut world = vec![0.0; d];
        let mut half = vec![0.0; d];
        self.local_center(level, cell, &mut local);
        self.root.world_coords(&local[..d], &mut world);
        self.half_at(level, &mut half);
        OrientedBox::new(
            Point::new(world).expect("finite center"),
            half,
            self.root.rotation().clone(),
        )
        .expect("valid node box")
    }

    /// Cell coordinates of `x` at the deepest level, or `None` when `x` lies
    /// outside the (closed) root box.
    pub fn quantize(&self, x: &[f64]) -> Option<[u64; HARD_MAX_DIM]> {
        let mut y = [0.0; HARD_MAX_DIM];
        self.root.local_coords(x, &mut y);
        quantize_local(&y[..self.dim()], self.root.half_extents(), self.depth_limit)
    }
}

/// Deepest-level cell of the root-frame point `y` in a root of half extents
/// `half`. Points on the upper faces fall into the last cell.
pub(crate) fn quantize_local(y: &[f64], half: &[f64], depth_limit: u32) -> Option<[u64; HARD_MAX_DIM]> {
    let cells = 1u64 << depth_limit;
    let mut m = [0u64; HARD_MAX_DIM];
    for (j, (&yj, &h)) in y.iter().zip(half).enumerate() {
        if !(yj.abs() <= h + GEOM_TOL) {
            return None;
        }
        let width = 2.0 * h / cells as f64;
        let t = ((yj + h) / width).floor();
        m[j] = if t <= 0.0 { 0 } else { (t as u64).min(cells - 1) };
    }
    Some(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Node {
    pub first_child: u32,
    pub sites_start: u32,
    pub sites_len: u32,
    /// Auxiliary list id for multi-site main leaves.
    pub aux: u32,
}

impl Node {
    pub const EMPTY: Node = Node {
        first_child: NONE,
        sites_start: 0,
        sites_len: 0,
        aux: NONE,
    };

    pub fn is_leaf(&self) -> bool {
        self.first_child == NONE
    }
}

/// Flat storage for the nodes and site sets of one or more trees.
#[derive(Clone, Debug, Default)]
pub(crate) struct Arena {
    pub nodes: Vec<Node>,
    pub sites: Vec<SiteId>,
}

impl Arena {
    pub fn sites_of(&self, id: NodeId) -> &[SiteId] {
        let n = &self.nodes[id as usize];
        &self.sites[n.sites_start as usize..(n.sites_start + n.sites_len) as usize]
    }

    pub fn alloc(&mut self, count: usize) -> Result<NodeId> {
        let first = self.nodes.len();
        if first + count >= NONE as usize {
            return Err(Error::Capacity {
                what: "node arena",
                needed: (first + count) as u64,
                budget: NONE as u64 - 1,
            });
        }
        self.nodes.resize(first + count, Node::EMPTY);
        Ok(first as NodeId)
    }

    /// Drops the site sets cached at internal nodes.
    pub fn drop_internal_sites(&mut self) {
        let mut kept = Vec::new();
        for n in &mut self.nodes {
            let start = kept.len() as u32;
            if n.is_leaf() {
                let s = n.sites_start as usize;
                kept.extend_from_slice(&self.sites[s..s + n.sites_len as usize]);
            }
            n.sites_start = start;
            n.sites_len = kept.len() as u32 - start;
        }
        self.sites = kept;
    }

    pub fn set_sites(&mut self, id: NodeId, sites: impl IntoIterator<Item = SiteId>) -> Result<()> {
        let start = self.sites.len();
        self.sites.extend(sites);
        if self.sites.len() >= u32::MAX as usize {
            return Err(Error::Capacity {
                what: "site arena",
                needed: self.sites.len() as u64,
                budget: u32::MAX as u64 - 1,
            });
        }
        let node = &mut self.nodes[id as usize];
        node.sites_start = start as u32;
        node.sites_len = (self.sites.len() - start) as u32;
        Ok(())
    }
}

/// Node-count guard shared by all trees of one build.
#[derive(Debug)]
pub(crate) struct Budget {
    pub used: u64,
    pub limit: Option<u64>,
}

impl Budget {
    /// Fails if `n` more nodes would exceed the limit, without taking them.
    pub fn ensure(&self, n: u64, what: &'static str) -> Result<()> {
        match self.limit {
            Some(limit) if self.used.saturating_add(n) > limit => Err(Error::Capacity {
                what,
                needed: self.used.saturating_add(n),
                budget: limit,
            }),
            _ => Ok(()),
        }
    }

    pub fn take(&mut self, n: u64, what: &'static str) -> Result<()> {
        self.used += n;
        match self.limit {
            Some(limit) if self.used > limit => Err(Error::Capacity {
                what,
                needed: self.used,
                budget: limit,
            }),
            _ => Ok(()),
        }
    }
}

/// Shape of one built tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct TreeShape {
    pub nodes: u64,
    pub max_depth: u32,
}

/// Recursive builder for one tree. `pts` holds the candidate sites in the
/// root frame, relative to the root center, indexed by local id; `globals`
/// maps local ids to site ids and must be increasing.
pub(crate) struct TreeBuilder<'a> {
    pub frame: &'a Frame,
    pub pts: &'a [f64],
    pub globals: Option<&'a [SiteId]>,
    pub leaf_volume: f64,
    pub tester: &'a mut CellTester,
    pub budget: &'a mut Budget,
    pub what: &'static str,
    pub shape: TreeShape,
}

impl TreeBuilder<'_> {
    pub fn build(&mut self, arena: &mut Arena, root: NodeId, candidates: &[u32]) -> Result<()> {
        self.shape = TreeShape {
            nodes: 1,
            max_depth: 0,
        };
        self.fill(arena, root, 0, [0; HARD_MAX_DIM], candidates)
    }

    fn fill(
        &mut self,
        arena: &mut Arena,
        node: NodeId,
        level: u32,
        cell: [u64; HARD_MAX_DIM],
        candidates: &[u32],
    ) -> Result<()> {
        let d = self.frame.dim();
        let mut center = [0.0; HARD_MAX_DIM];
        let mut half = [0.0; HARD_MAX_DIM];
        self.frame.local_center(level, &cell, &mut center);
        self.frame.half_at(level, &mut half[..d]);
        let mut set = Vec::with_capacity(candidates.len());
        self.tester
            .intersecting(self.pts, d, candidates, &center[..d], &half[..d], &mut set);
        debug_assert!(!set.is_empty());
        match self.globals {
            Some(g) => arena.set_sites(node, set.iter().map(|&l| g[l as usize]))?,
            None => arena.set_sites(node, set.iter().copied())?,
        }
        self.shape.max_depth = self.shape.max_depth.max(level);
        if set.len() < 2 || self.frame.volume_at(level) < self.leaf_volume {
            return Ok(());
        }
        let fan = 1usize << d;
        self.budget.take(fan as u64, self.what)?;
        let first = arena.alloc(fan)?;
        arena.nodes[node as usize].first_child = first;
        self.shape.nodes += fan as u64;
        for c in 0..fan {
            let mut child = [0u64; HARD_MAX_DIM];
            for j in 0..d {
                child[j] = 2 * cell[j] + (c >> j & 1) as u64;
            }
            self.fill(arena, first + c as u32, level + 1, child, &set)?;
        }
        Ok(())
    }
}

/// Result of walking a tree down to a leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Located {
    pub leaf: NodeId,
    pub level: u32,
    /// Cell coordinates of the leaf at its own level.
    pub cell: [u64; HARD_MAX_DIM],
    pub visited: u32,
}

/// Walks from `root` by the bits of the deepest-level cell `m`.
pub(crate) fn descend(arena: &Arena, d: usize, limit: u32, root: NodeId, m: &[u64; HARD_MAX_DIM]) -> Located {
    let mut node = root;
    let mut level = 0;
    let mut visited = 1;
    loop {
        let n = arena.nodes[node as usize];
        if n.is_leaf() {
            break;
        }
        let shift = limit - level - 1;
        let c: u32 = (0..d).map(|j| ((m[j] >> shift & 1) as u32) << j).sum();
        node = n.first_child + c;
        level += 1;
        visited += 1;
    }
    let mut cell = [0u64; HARD_MAX_DIM];
    for j in 0..d {
        cell[j] = m[j] >> (limit - level);
    }
    Located {
        leaf: node,
        level,
        cell,
        visited,
    }
}

/// Hash table from deepest-level cell coordinates to main-tree leaves at
/// that level. Leaves higher up are not hashed; looking them up misses.
#[derive(Clone, Debug, Default)]
pub(crate) struct GridOverlay {
    map: HashMap<u128, NodeId>,
}

impl GridOverlay {
    pub fn key(cell: &[u64; HARD_MAX_DIM], d: usize, bits: u32) -> u128 {
        let mut k = 0u128;
        for &c in cell.iter().take(d) {
            k = (k << bits) | c as u128;
        }
        k
    }

    pub fn fits(d: usize, bits: u32) -> bool {
        d as u32 * bits <= 128
    }

    pub fn insert(&mut self, key: u128, leaf: NodeId) {
        self.map.insert(key, leaf);
    }

    pub fn get(&self, key: u128) -> Option<NodeId> {
        self.map.get(&key).copied()
    }
}

/// The main tree over the padded bounding box.
#[derive(Clone, Debug)]
pub(crate) struct MainTree {
    pub frame: Frame,
    pub arena: Arena,
    pub grid: Option<GridOverlay>,
}

impl MainTree {
    pub fn build(
        sites: &SiteSet,
        bb: OrientedBox,
        params: &BuildParams,
        tester: &mut CellTester,
        budget: &mut Budget,
    ) -> Result<Self> {
        let d = sites.dim();
        let frame = Frame::new(bb, params.leaf_volume())?;
        let mut pts = Vec::with_capacity(sites.flat().len());
        let mut y = [0.0; HARD_MAX_DIM];
        for s in sites.iter() {
            frame.root.local_coords(s, &mut y);
            pts.extend_from_slice(&y[..d]);
        }
        let mut arena = Arena::default();
        budget.take(1, "main tree")?;
        let root = arena.alloc(1)?;
        let all: Vec<u32> = (0..sites.len() as u32).collect();
        let mut builder = TreeBuilder {
            frame: &frame,
            pts: &pts,
            globals: None,
            leaf_volume: params.leaf_volume(),
            tester,
            budget,
            what: "main tree",
            shape: TreeShape::default(),
        };
        builder.build(&mut arena, root, &all)?;
        let mut tree = MainTree {
            frame,
            arena,
            grid: None,
        };
        if params.hash_locate {
            tree.build_grid();
        }
        Ok(tree)
    }

    pub fn build_grid(&mut self) {
        let d = self.frame.dim();
        let bits = self.frame.depth_limit;
        if !GridOverlay::fits(d, bits) {
            log::warn!("grid overlay skipped: {d}×{bits} bits do not fit a 128-bit key");
            return;
        }
        let mut grid = GridOverlay::default();
        let limit = self.frame.depth_limit;
        let arena = &self.arena;
        walk(arena, 0, d, &mut |id, level, cell| {
            if level == limit && arena.nodes[id as usize].is_leaf() {
                grid.insert(GridOverlay::key(cell, d, bits), id);
            }
        });
        self.grid = Some(grid);
    }

    /// Leaf holding `x`, or `None` when `x` is outside the bounding box.
    pub fn locate(&self, x: &[f64]) -> Option<Located> {
        let m = self.frame.quantize(x)?;
        Some(descend(&self.arena, self.frame.dim(), self.frame.depth_limit, 0, &m))
    }

    /// Hashed lookup; `None` on a miss or for exterior points.
    pub fn grid_locate(&self, x: &[f64]) -> Option<Located> {
        let grid = self.grid.as_ref()?;
        let m = self.frame.quantize(x)?;
        let d = self.frame.dim();
        let leaf = grid.get(GridOverlay::key(&m, d, self.frame.depth_limit))?;
        Some(Located {
            leaf,
            level: self.frame.depth_limit,
            cell: m,
            visited: 1,
        })
    }
}

/// Preorder walk over the subtree at `root`, calling `f(id, level, cell)`.
pub(crate) fn walk(
    arena: &Arena,
    root: NodeId,
    d: usize,
    f: &mut dyn FnMut(NodeId, u32, &[u64; HARD_MAX_DIM]),
) {
    let mut stack = vec![(root, 0u32, [0u64; HARD_MAX_DIM])];
    while let Some((id, level, cell)) = stack.pop() {
        f(id, level, &cell);
        let n = arena.nodes[id as usize];
        if n.is_leaf() {
            continue;
        }
        // Reverse push keeps children in index order.
        for c in (0..1usize << d).rev() {
            let mut child = [0u64; HARD_MAX_DIM];
            for j in 0..d {
                child[j] = 2 * cell[j] + (c >> j & 1) as u64;
            }
            stack.push((n.first_child + c as u32, level + 1, child));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;

    fn sites(pts: &[&[f64]]) -> SiteSet {
        SiteSet::new(pts.iter().map(|p| Point::new(p.to_vec()).unwrap()).collect()).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert!((compute_delta(0.2, 2) - 0.005).abs() < 1e-15);
        for d in 1..=6 {
            let eps = 2.0 * (d as f64).sqrt();
            assert!((compute_delta(eps, d) - 1.0).abs() < 1e-12);
        }
        assert_eq!(compute_delta(1.0, 1), 0.5);
    }

    #[test]
    fn delta_cube_has_half_eps_diagonal() {
        for d in 1..=6 {
            let eps = 0.37;
            let side = compute_delta(eps, d).powf(1.0 / d as f64);
            assert!(((d as f64).sqrt() * side - eps / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bounding_box_examples() {
        let s = sites(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let bb = make_bounding_box(&s, 1.0, 0.1).unwrap();
        assert_eq!(bb.center().coords(), &[0.5, 0.5]);
        assert_eq!(bb.half_extents(), &[1.5, 1.5]);

        let one = sites(&[&[3.0, 4.0]]);
        let bb = make_bounding_box(&one, 1.0, 0.25).unwrap();
        assert_eq!(bb.center().coords(), &[3.0, 4.0]);
        assert_eq!(bb.half_extents(), &[0.125, 0.125]);
    }

    #[test]
    fn padding_makes_volume_ratio_a_power() {
        let s = sites(&[&[0.0, 0.0], &[1.0, 0.3]]);
        let p = BuildParams::new(0.1, 2).unwrap();
        let bb = make_bounding_box(&s, 1.0, p.eps).unwrap();
        let (padded, k) = pad_to_power_of_two(&bb, &p).unwrap();
        let ratio = padded.volume() / p.delta;
        assert!((ratio / 4f64.powi(k as i32) - 1.0).abs() < 1e-9);
        assert!(padded.half_extents()[0] >= bb.half_extents()[0]);
        let frame = Frame::new(padded, p.leaf_volume()).unwrap();
        assert_eq!(frame.depth_limit, k + 1);
    }

    #[test]
    fn one_d_locate_convention() {
        // Root [0,2] with two leaves split at 1.
        let root = OrientedBox::axis_aligned(Point::new(vec![1.0]).unwrap(), vec![1.0]).unwrap();
        let frame = Frame::new(root, 1.5).unwrap();
        assert_eq!(frame.depth_limit, 1);
        let mut arena = Arena::default();
        arena.alloc(3).unwrap();
        arena.nodes[0].first_child = 1;
        let at = |x: f64| descend(&arena, 1, frame.depth_limit, 0, &frame.quantize(&[x]).unwrap()).leaf;
        assert_eq!(at(0.5), 1);
        assert_eq!(at(1.0), 2);
        assert_eq!(at(2.0), 2);
        assert_eq!(at(0.0), 1);
        assert!(frame.quantize(&[2.1]).is_none());
    }

    #[test]
    fn node_boxes_tile_the_root() {
        let root = OrientedBox::new(
            Point::new(vec![0.3, -0.2]).unwrap(),
            vec![1.0, 1.0],
            Rotation::from_angles(2, &[0.4]).unwrap(),
        )
        .unwrap();
        let frame = Frame::new(root.clone(), 0.2).unwrap();
        let kids = root.subdivide();
        for (c, kid) in kids.iter().enumerate() {
            let cell = [(c & 1) as u64, (c >> 1 & 1) as u64, 0, 0, 0, 0, 0, 0];
            let b = frame.node_box(1, &cell);
            for j in 0..2 {
                assert!((b.center()[j] - kid.center()[j]).abs() < 1e-12);
            }
            assert_eq!(b.half_extents(), kid.half_extents());
        }
    }

    #[test]
    fn budget_guard() {
        let mut b = Budget {
            used: 0,
            limit: Some(10),
        };
        assert!(b.take(10, "x").is_ok());
        assert!(matches!(b.take(1, "x"), Err(Error::Capacity { needed: 11, .. })));
    }
}
