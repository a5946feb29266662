//! Auxiliary box trees: for every multi-site main leaf, one tree per
//! orientation over the leaf box scaled about its center and rotated.

use std::f64::consts::PI;

use crate::boxtree::{
    descend, quantize_local, walk, Arena, Budget, BuildParams, Frame, Located, MainTree, NodeId,
    TreeBuilder, TreeShape, NONE,
};
use crate::cells::{CellTester, SiteId, SiteSet};
use crate::error::Result;
use crate::geometry::{dist2, norm, OrientedBox, Point, Rotation, HARD_MAX_DIM};

/// Number of angle steps per plane: `⌈π/ε⌉`, or 0 when `ε ≥ π`.
fn steps(eps: f64) -> u64 {
    if eps >= PI {
        0
    } else {
        (PI / eps - 1e-9).ceil() as u64
    }
}

/// `⌈π/ε⌉^(d−1) − 1`, the number of orientations per multi-site leaf.
pub fn orientation_count(eps: f64, dim: usize) -> u64 {
    let s = steps(eps);
    if s == 0 || dim < 2 {
        return 0;
    }
    s.pow(dim as u32 - 1) - 1
}

/// All nonzero angle vectors with entries in `{0, ε, …, (⌈π/ε⌉−1)·ε}`, one
/// angle per coordinate plane, in lexicographic order.
pub fn enumerate_orientations(eps: f64, dim: usize) -> Vec<Vec<f64>> {
    let s = steps(eps);
    if s == 0 {
        log::warn!("eps {eps} is at least pi: no auxiliary orientations");
        return Vec::new();
    }
    if dim < 2 {
        return Vec::new();
    }
    let k = dim - 1;
    let mut out = Vec::new();
    let mut idx = vec![0u64; k];
    loop {
        // Advance like an odometer, last coordinate fastest.
        let mut j = k;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < s {
                break;
            }
            idx[j] = 0;
        }
        out.push(idx.iter().map(|&i| i as f64 * eps).collect());
    }
}

/// Root box of the auxiliary tree over `leaf` for one orientation: the leaf
/// scaled by `scale` about its center and rotated by `angles`.
pub fn aux_root_box(leaf: &OrientedBox, angles: &[f64], scale: f64) -> Result<OrientedBox> {
    let rotation = Rotation::from_angles(leaf.dim(), angles)?;
    leaf.scale(scale)?.with_rotation(rotation)
}

/// One multi-site main leaf and its trees. The root for orientation `o` is
/// node `first_root + o` of the forest arena.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct AuxEntry {
    pub leaf: NodeId,
    pub level: u32,
    pub cell: [u64; HARD_MAX_DIM],
    pub first_root: NodeId,
    pub depth_limit: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct ForestStats {
    pub trees: u64,
    pub nodes: u64,
    pub max_depth: u32,
    pub max_tree_nodes: u64,
}

impl ForestStats {
    pub fn record(&mut self, shape: TreeShape) {
        self.trees += 1;
        self.nodes += shape.nodes;
        self.max_depth = self.max_depth.max(shape.max_depth);
        self.max_tree_nodes = self.max_tree_nodes.max(shape.nodes);
    }
}

/// Every auxiliary tree of an index, in one arena.
#[derive(Clone, Debug)]
pub(crate) struct AuxForest {
    pub rotations: Vec<Rotation>,
    pub scale: f64,
    pub arena: Arena,
    pub lists: Vec<AuxEntry>,
    pub stats: ForestStats,
}

impl AuxForest {
    pub fn empty(dim: usize, params: &BuildParams) -> Result<Self> {
        let rotations = enumerate_orientations(params.eps, dim)
            .iter()
            .map(|a| Rotation::from_angles(dim, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(AuxForest {
            rotations,
            scale: params.scale_factor,
            arena: Arena::default(),
            lists: Vec::new(),
            stats: ForestStats::default(),
        })
    }

    pub fn orientations(&self) -> usize {
        self.rotations.len()
    }

    /// Center and half extents of the aux roots of `entry`.
    pub fn root_geometry(&self, main: &Frame, entry: &AuxEntry) -> (Vec<f64>, Vec<f64>) {
        let d = main.dim();
        let mut local = [0.0; HARD_MAX_DIM];
        main.local_center(entry.level, &entry.cell, &mut local);
        let mut center = vec![0.0; d];
        main.root.world_coords(&local[..d], &mut center);
        let mut half = vec![0.0; d];
        main.half_at(entry.level, &mut half);
        for h in &mut half {
            *h *= self.scale;
        }
        (center, half)
    }

    pub fn root_box(&self, main: &Frame, entry: &AuxEntry, o: usize) -> OrientedBox {
        let (center, half) = self.root_geometry(main, entry);
        OrientedBox::new(
            Point::new(center).expect("finite center"),
            half,
            self.rotations[o].clone(),
        )
        .expect("valid aux root")
    }

    pub fn frame(&self, main: &Frame, entry: &AuxEntry, o: usize) -> Frame {
        Frame {
            root: self.root_box(main, entry, o),
            depth_limit: entry.depth_limit,
        }
    }

    /// Builds the trees of every multi-site leaf of `main`, in preorder.
    pub fn build(
        &mut self,
        main: &mut MainTree,
        sites: &SiteSet,
        params: &BuildParams,
        tester: &mut CellTester,
        budget: &mut Budget,
    ) -> Result<()> {
        let d = sites.dim();
        let mut leaves = Vec::new();
        {
            let arena = &main.arena;
            walk(arena, 0, d, &mut |id, level, cell| {
                let n = arena.nodes[id as usize];
                if n.is_leaf() && n.sites_len >= 2 {
                    leaves.push((id, level, *cell));
                }
            });
        }
        let q = self.orientations() as u64;
        if q > 0 && !leaves.is_empty() {
            // Each root contains its leaf, so it meets at least two cells and
            // is split whenever its volume permits.
            let (_, level, _) = leaves[0];
            let root_volume = main.frame.volume_at(level) * self.scale.powi(d as i32);
            let per_tree = if root_volume >= params.leaf_volume() {
                1 + (1u64 << d)
            } else {
                1
            };
            budget.ensure(
                (leaves.len() as u64).saturating_mul(q).saturating_mul(per_tree),
                "auxiliary trees",
            )?;
        }

        let mut cand = Vec::new();
        let mut pts = Vec::new();
        let mut y = [0.0; HARD_MAX_DIM];
        for (leaf, level, cell) in leaves {
            let entry_id = self.lists.len() as u32;
            let mut entry = AuxEntry {
                leaf,
                level,
                cell,
                first_root: NONE,
                depth_limit: 0,
            };
            main.arena.nodes[leaf as usize].aux = entry_id;
            if q == 0 {
                self.lists.push(entry);
                continue;
            }
            let (center, half) = self.root_geometry(&main.frame, &entry);
            prefilter(sites, &center, 2.0 * norm(&half), &mut cand);
            budget.take(q, "auxiliary trees")?;
            entry.first_root = self.arena.alloc(q as usize)?;
            for o in 0..q as usize {
                let root = OrientedBox::new(
                    Point::new(center.clone())?,
                    half.clone(),
                    self.rotations[o].clone(),
                )?;
                let frame = Frame::new(root, params.leaf_volume())?;
                entry.depth_limit = frame.depth_limit;
                pts.clear();
                for &c in &cand {
                    frame.root.local_coords(sites.site(c as usize), &mut y);
                    pts.extend_from_slice(&y[..d]);
                }
                let local: Vec<u32> = (0..cand.len() as u32).collect();
                let mut builder = TreeBuilder {
                    frame: &frame,
                    pts: &pts,
                    globals: Some(&cand),
                    leaf_volume: params.leaf_volume(),
                    tester: &mut *tester,
                    budget: &mut *budget,
                    what: "auxiliary trees",
                    shape: TreeShape::default(),
                };
                builder.build(&mut self.arena, entry.first_root + o as u32, &local)?;
                self.stats.record(builder.shape);
            }
            self.lists.push(entry);
        }
        Ok(())
    }

    /// Calls `f(orientation, leaf)` for every tree of `entry` whose root
    /// contains `x`. `center` and `half` come from `root_geometry`.
    pub fn locate(
        &self,
        entry: &AuxEntry,
        center: &[f64],
        half: &[f64],
        x: &[f64],
        mut f: impl FnMut(usize, Located),
    ) {
        let d = center.len();
        let mut rel = [0.0; HARD_MAX_DIM];
        for j in 0..d {
            rel[j] = x[j] - center[j];
        }
        let mut y = [0.0; HARD_MAX_DIM];
        for (o, r) in self.rotations.iter().enumerate() {
            r.apply_transpose(&rel[..d], &mut y);
            if let Some(m) = quantize_local(&y[..d], half, entry.depth_limit) {
                let root = entry.first_root + o as u32;
                f(o, descend(&self.arena, d, entry.depth_limit, root, &m));
            }
        }
    }
}

/// Sites whose cells can meet a box of diameter `diam` centered at `c`: any
/// such site is within `diam` plus the nearest-site distance of `c`.
pub(crate) fn prefilter(sites: &SiteSet, c: &[f64], diam: f64, out: &mut Vec<SiteId>) {
    out.clear();
    let dists: Vec<f64> = sites.iter().map(|s| dist2(c, s).sqrt()).collect();
    let nearest = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = nearest + diam + 1e-9 * (1.0 + nearest + diam);
    out.extend(
        dists
            .iter()
            .enumerate()
            .filter(|(_, &r)| r <= bound)
            .map(|(i, _)| i as SiteId),
    );
}
