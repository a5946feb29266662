//! The ANN index: build, query and read-only views of the trees.

use crate::auxtree::{orientation_count, AuxEntry, AuxForest};
use crate::boxtree::{
    make_bounding_box, pad_to_power_of_two, walk, Budget, BuildParams, Frame, Located, MainTree,
    NodeId, NONE,
};
use crate::cells::{nearest_site_coords, CellTester, FeasibilityCounters, SiteId, SiteSet};
use crate::error::{Error, Result};
use crate::geometry::{OrientedBox, Point, HARD_MAX_DIM};

/// Counters collected while building.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildStats {
    pub main_nodes: u64,
    pub main_leaves: u64,
    pub multi_site_leaves: u64,
    pub main_max_depth: u32,
    /// `V/δ` of the padded bounding box.
    pub volume_ratio: f64,
    pub orientations: u64,
    pub aux_trees: u64,
    pub aux_nodes: u64,
    pub aux_max_depth: u32,
    pub aux_max_tree_nodes: u64,
    pub feasibility: FeasibilityCounters,
    /// Site-list entries including the sets cached at internal nodes during
    /// the build.
    pub site_entries_cached: u64,
    /// Site-list entries kept after the build (leaves only).
    pub site_entries: u64,
}

impl BuildStats {
    pub fn total_nodes(&self) -> u64 {
        self.main_nodes + self.aux_nodes
    }

    /// `key=value` lines.
    pub fn to_lines(&self) -> Vec<String> {
        vec![
            format!("main_nodes={}", self.main_nodes),
            format!("main_leaves={}", self.main_leaves),
            format!("multi_site_leaves={}", self.multi_site_leaves),
            format!("main_max_depth={}", self.main_max_depth),
            format!("volume_ratio={}", self.volume_ratio),
            format!("orientations={}", self.orientations),
            format!("aux_trees={}", self.aux_trees),
            format!("aux_nodes={}", self.aux_nodes),
            format!("aux_max_depth={}", self.aux_max_depth),
            format!("aux_max_tree_nodes={}", self.aux_max_tree_nodes),
            format!("cell_tests={}", self.feasibility.cell_tests),
            format!("lp_calls={}", self.feasibility.lp_calls),
            format!("site_entries_cached={}", self.site_entries_cached),
            format!("site_entries={}", self.site_entries),
        ]
    }
}

/// Answer to one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryResult {
    /// Ascending site ids.
    pub s_prime: Vec<SiteId>,
    pub exact: bool,
    pub nodes_visited: u64,
    pub lists_traversed: u64,
}

/// Visit counters of one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub nodes_visited: u64,
    pub lists_traversed: u64,
}

#[derive(Clone, Debug)]
pub struct AnnIndex {
    pub(crate) params: BuildParams,
    pub(crate) sites: SiteSet,
    pub(crate) main: MainTree,
    pub(crate) aux: AuxForest,
    pub(crate) stats: BuildStats,
}

impl AnnIndex {
    pub fn build(sites: SiteSet, params: &BuildParams) -> Result<Self> {
        let d = sites.dim();
        validate_params(params, d)?;
        let bb = make_bounding_box(&sites, params.margin_factor, params.eps)?;
        let (root, _) = pad_to_power_of_two(&bb, params)?;
        let mut tester = CellTester::default();
        let mut budget = Budget {
            used: 0,
            limit: params.max_nodes,
        };
        let mut main = MainTree::build(&sites, root, params, &mut tester, &mut budget)?;
        let mut aux = AuxForest::empty(d, params)?;
        aux.build(&mut main, &sites, params, &mut tester, &mut budget)?;
        let cached = (main.arena.sites.len() + aux.arena.sites.len()) as u64;
        main.arena.drop_internal_sites();
        aux.arena.drop_internal_sites();
        let mut index = AnnIndex {
            params: params.clone(),
            sites,
            main,
            aux,
            stats: BuildStats::default(),
        };
        index.stats = index.measure();
        index.stats.feasibility = tester.counters;
        index.stats.site_entries_cached = cached;
        Ok(index)
    }

    /// Structural counters recomputed from the trees.
    pub(crate) fn measure(&self) -> BuildStats {
        let d = self.dim();
        let mut s = BuildStats {
            main_nodes: self.main.arena.nodes.len() as u64,
            volume_ratio: self.volume_ratio(),
            orientations: self.aux.orientations() as u64,
            aux_nodes: self.aux.arena.nodes.len() as u64,
            site_entries: (self.main.arena.sites.len() + self.aux.arena.sites.len()) as u64,
            ..BuildStats::default()
        };
        let arena = &self.main.arena;
        walk(arena, 0, d, &mut |id, level, _| {
            let n = arena.nodes[id as usize];
            s.main_max_depth = s.main_max_depth.max(level);
            if n.is_leaf() {
                s.main_leaves += 1;
                if n.sites_len >= 2 {
                    s.multi_site_leaves += 1;
                }
            }
        });
        for entry in &self.aux.lists {
            for o in 0..self.aux.orientations() {
                let (nodes, depth) = tree_shape(&self.aux, entry, o, d);
                s.aux_trees += 1;
                s.aux_max_depth = s.aux_max_depth.max(depth);
                s.aux_max_tree_nodes = s.aux_max_tree_nodes.max(nodes);
            }
        }
        s.feasibility = self.stats.feasibility;
        s.site_entries_cached = self.stats.site_entries_cached.max(s.site_entries);
        s
    }

    pub fn dim(&self) -> usize {
        self.sites.dim()
    }

    pub fn params(&self) -> &BuildParams {
        &self.params
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    /// The padded bounding box, root of the main tree.
    pub fn bounding_box(&self) -> &OrientedBox {
        &self.main.frame.root
    }

    pub fn volume_ratio(&self) -> f64 {
        self.bounding_box().volume() / self.params.delta
    }

    /// `⌊(1/d)·lg(V/δ)⌋ + 1`.
    pub fn main_depth_bound(&self) -> u32 {
        depth_bound(self.volume_ratio(), self.dim())
    }

    /// Angle vectors of the auxiliary trees, in list order.
    pub fn orientations(&self) -> Vec<&[f64]> {
        self.aux.rotations.iter().map(|r| r.angles()).collect()
    }

    /// Upper bound on `nodes_visited` for any query.
    pub fn nodes_visited_bound(&self) -> u64 {
        let q = orientation_count(self.params.eps, self.dim());
        let per_aux = self.params.scale_factor.log2().floor() as u64 + 2;
        self.main_depth_bound() as u64 + q * per_aux
    }

    /// Builds the hashed leaf overlay if it is missing.
    pub fn enable_hash_locate(&mut self) {
        self.params.hash_locate = true;
        if self.main.grid.is_none() {
            self.main.build_grid();
        }
    }

    pub fn query(&self, q: &Point) -> Result<QueryResult> {
        self.check_dim(q)?;
        Ok(self.query_coords(q.coords()))
    }

    pub fn query_stats(&self, q: &Point) -> Result<QueryStats> {
        let r = self.query(q)?;
        Ok(QueryStats {
            nodes_visited: r.nodes_visited,
            lists_traversed: r.lists_traversed,
        })
    }

    pub(crate) fn query_coords(&self, q: &[f64]) -> QueryResult {
        let located = match self.locate(q) {
            Some(l) => l,
            None => {
                return QueryResult {
                    s_prime: vec![nearest_site_coords(q, &self.sites)],
                    exact: true,
                    nodes_visited: 0,
                    lists_traversed: 0,
                }
            }
        };
        let leaf = self.main.arena.nodes[located.leaf as usize];
        let mut result = self.main.arena.sites_of(located.leaf).to_vec();
        let mut visited = located.visited as u64;
        let mut lists = 0;
        if result.len() >= 2 && leaf.aux != NONE {
            let entry = &self.aux.lists[leaf.aux as usize];
            let (center, half) = self.aux.root_geometry(&self.main.frame, entry);
            self.aux.locate(entry, &center, &half, q, |_, hit| {
                lists += 1;
                visited += hit.visited as u64;
                intersect_in_place(&mut result, self.aux.arena.sites_of(hit.leaf));
            });
        }
        debug_assert!(!result.is_empty());
        QueryResult {
            exact: result.len() == 1,
            s_prime: result,
            nodes_visited: visited,
            lists_traversed: lists,
        }
    }

    fn locate(&self, q: &[f64]) -> Option<Located> {
        if self.params.hash_locate {
            if let Some(l) = self.main.grid_locate(q) {
                return Some(l);
            }
        }
        self.main.locate(q)
    }

    fn check_dim(&self, q: &Point) -> Result<()> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: q.dim(),
            });
        }
        Ok(())
    }

    /// Site sets of the main leaf and of every auxiliary leaf holding `q`,
    /// before intersection. Empty outside the bounding box.
    pub fn containing_leaf_sets(&self, q: &Point) -> Result<Vec<&[SiteId]>> {
        self.check_dim(q)?;
        let mut out = Vec::new();
        let Some(located) = self.locate(q.coords()) else {
            return Ok(out);
        };
        out.push(self.main.arena.sites_of(located.leaf));
        let leaf = self.main.arena.nodes[located.leaf as usize];
        if leaf.aux != NONE {
            let entry = &self.aux.lists[leaf.aux as usize];
            let (center, half) = self.aux.root_geometry(&self.main.frame, entry);
            self.aux.locate(entry, &center, &half, q.coords(), |_, hit| {
                out.push(self.aux.arena.sites_of(hit.leaf));
            });
        }
        Ok(out)
    }

    /// Main leaf holding `q` by tree descent; `None` outside the bounding box.
    pub fn locate_leaf(&self, q: &Point) -> Result<Option<NodeView<'_>>> {
        self.check_dim(q)?;
        Ok(self
            .main
            .locate(q.coords())
            .map(|l| self.main_view(l.leaf, l.level, &l.cell)))
    }

    /// Main leaf holding `q` through the hashed overlay; `None` on a miss,
    /// outside the bounding box, or when the overlay was not built.
    pub fn grid_locate(&self, q: &Point) -> Result<Option<NodeView<'_>>> {
        self.check_dim(q)?;
        Ok(self
            .main
            .grid_locate(q.coords())
            .map(|l| self.main_view(l.leaf, l.level, &l.cell)))
    }

    fn main_view(&self, id: NodeId, level: u32, cell: &[u64; HARD_MAX_DIM]) -> NodeView<'_> {
        let n = self.main.arena.nodes[id as usize];
        NodeView {
            id,
            level,
            cell: *cell,
            bounds: self.main.frame.node_box(level, cell),
            sites: self.main.arena.sites_of(id),
            is_leaf: n.is_leaf(),
            aux: (n.aux != NONE).then_some(n.aux),
        }
    }

    /// Visits the main tree in preorder.
    pub fn walk_main(&self, mut f: impl FnMut(&NodeView<'_>)) {
        walk(&self.main.arena, 0, self.dim(), &mut |id, level, cell| {
            f(&self.main_view(id, level, cell))
        });
    }

    /// Auxiliary list of a multi-site main leaf.
    pub fn aux_list(&self, leaf: &NodeView<'_>) -> Option<AuxListView<'_>> {
        leaf.aux.map(|a| AuxListView {
            index: self,
            entry: &self.aux.lists[a as usize],
        })
    }

    /// All auxiliary lists, in preorder of their leaves.
    pub fn aux_lists(&self) -> impl Iterator<Item = AuxListView<'_>> {
        self.aux.lists.iter().map(move |entry| AuxListView { index: self, entry })
    }
}

fn validate_params(params: &BuildParams, d: usize) -> Result<()> {
    if d > params.max_dim {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: params.max_dim,
        });
    }
    if !(params.eps > 0.0) || !params.eps.is_finite() {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive and finite, got {}", params.eps),
        });
    }
    let want = crate::boxtree::compute_delta(params.eps, d);
    if (params.delta - want).abs() > 1e-12 * want {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("expected {want} for eps {} in dimension {d}", params.eps),
        });
    }
    if !(params.scale_factor >= 2.0) || !params.scale_factor.is_finite() {
        return Err(Error::InvalidParameter {
            name: "scale",
            reason: format!("must be at least 2, got {}", params.scale_factor),
        });
    }
    if !(params.margin_factor >= 0.0) || !params.margin_factor.is_finite() {
        return Err(Error::InvalidParameter {
            name: "margin",
            reason: format!("must be non-negative, got {}", params.margin_factor),
        });
    }
    Ok(())
}

/// `⌊(1/d)·lg(ratio)⌋ + 1`, robust to rounding when `ratio` is a power of
/// `2^d`.
pub fn depth_bound(ratio: f64, d: usize) -> u32 {
    ((ratio.log2() / d as f64 + 1e-9).floor().max(0.0)) as u32 + 1
}

/// `2^{2d}/(2^d−1)·r − 1/(2^d−1)` with `r` rounded up to a power of `2^d`.
pub fn node_count_bound(ratio: f64, d: usize) -> f64 {
    let f = 2f64.powi(d as i32);
    let k = (ratio.log2() / d as f64 - 1e-9).ceil().max(0.0);
    let r = f.powf(k);
    (f * f * r - 1.0) / (f - 1.0)
}

fn tree_shape(aux: &AuxForest, entry: &AuxEntry, o: usize, d: usize) -> (u64, u32) {
    let mut nodes = 0;
    let mut depth = 0;
    walk(&aux.arena, entry.first_root + o as u32, d, &mut |_, level, _| {
        nodes += 1;
        depth = depth.max(level);
    });
    (nodes, depth)
}

/// Keeps the members of `acc` that also occur in `other`; both ascending.
fn intersect_in_place(acc: &mut Vec<SiteId>, other: &[SiteId]) {
    let mut j = 0;
    acc.retain(|&s| {
        while j < other.len() && other[j] < s {
            j += 1;
        }
        j < other.len() && other[j] == s
    });
}

/// A node of one of the trees, with its box.
#[derive(Clone, Debug)]
pub struct NodeView<'a> {
    pub id: NodeId,
    pub level: u32,
    cell: [u64; HARD_MAX_DIM],
    pub bounds: OrientedBox,
    /// Ascending site ids; empty for internal nodes.
    pub sites: &'a [SiteId],
    pub is_leaf: bool,
    aux: Option<u32>,
}

impl NodeView<'_> {
    /// Integer position of the node among the nodes of its level.
    pub fn cell(&self) -> &[u64] {
        &self.cell[..self.bounds.dim()]
    }

    pub fn has_aux_list(&self) -> bool {
        self.aux.is_some()
    }
}

/// The auxiliary trees of one multi-site main leaf.
#[derive(Clone, Copy)]
pub struct AuxListView<'a> {
    index: &'a AnnIndex,
    entry: &'a AuxEntry,
}

impl<'a> AuxListView<'a> {
    pub fn len(&self) -> usize {
        if self.entry.first_root == NONE {
            0
        } else {
            self.index.aux.orientations()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Main-tree id of the owning leaf.
    pub fn leaf(&self) -> NodeId {
        self.entry.leaf
    }

    pub fn leaf_box(&self) -> OrientedBox {
        self.index
            .main
            .frame
            .node_box(self.entry.level, &self.entry.cell)
    }

    pub fn angles(&self, o: usize) -> &'a [f64] {
        self.index.aux.rotations[o].angles()
    }

    pub fn root_box(&self, o: usize) -> OrientedBox {
        self.index.aux.root_box(&self.index.main.frame, self.entry, o)
    }

    /// Node count and depth of tree `o`.
    pub fn tree_shape(&self, o: usize) -> (u64, u32) {
        tree_shape(&self.index.aux, self.entry, o, self.index.dim())
    }

    /// Visits tree `o` in preorder.
    pub fn walk_tree(&self, o: usize, mut f: impl FnMut(&NodeView<'_>)) {
        let aux = &self.index.aux;
        let frame: Frame = aux.frame(&self.index.main.frame, self.entry, o);
        let root = self.entry.first_root + o as u32;
        walk(&aux.arena, root, self.index.dim(), &mut |id, level, cell| {
            let n = aux.arena.nodes[id as usize];
            f(&NodeView {
                id,
                level,
                cell: *cell,
                bounds: frame.node_box(level, cell),
                sites: aux.arena.sites_of(id),
                is_leaf: n.is_leaf(),
                aux: None,
            })
        });
    }

    /// For each tree whose root contains `q`: the orientation and the site
    /// set of the leaf reached by descent.
    pub fn locate(&self, q: &Point) -> Result<Vec<(usize, &'a [SiteId])>> {
        self.index.check_dim(q)?;
        let aux = &self.index.aux;
        let (center, half) = aux.root_geometry(&self.index.main.frame, self.entry);
        let mut out = Vec::new();
        aux.locate(self.entry, &center, &half, q.coords(), |o, hit| {
            out.push((o, aux.arena.sites_of(hit.leaf)));
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(c: &[&[f64]]) -> SiteSet {
        SiteSet::new(c.iter().map(|p| Point::new(p.to_vec()).unwrap()).collect()).unwrap()
    }

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn two_site_examples() {
        let s = pts(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let idx = AnnIndex::build(s, &BuildParams::new(0.1, 2).unwrap()).unwrap();
        let r = idx.query(&p(&[0.0, 0.0])).unwrap();
        assert_eq!(r.s_prime, vec![0]);
        assert!(r.exact);
        let r = idx.query(&p(&[1.0, 0.0])).unwrap();
        assert_eq!(r.s_prime, vec![0, 1]);
        assert!(!r.exact);
        assert!(r.lists_traversed <= idx.orientations().len() as u64);
        assert!(r.nodes_visited <= idx.nodes_visited_bound());
    }

    #[test]
    fn single_site_is_always_exact() {
        let idx = AnnIndex::build(pts(&[&[0.3, 0.7]]), &BuildParams::new(0.2, 2).unwrap()).unwrap();
        assert_eq!(idx.stats().main_nodes, 1);
        assert_eq!(idx.stats().aux_trees, 0);
        for q in [[0.3, 0.7], [0.35, 0.6], [5.0, 5.0]] {
            let r = idx.query(&p(&q)).unwrap();
            assert_eq!(r.s_prime, vec![0]);
            assert!(r.exact);
            assert_eq!(r.lists_traversed, 0);
        }
        assert_eq!(idx.query(&p(&[0.3, 0.7])).unwrap().nodes_visited, 1);
    }

    #[test]
    fn exterior_query_falls_back_to_nearest() {
        let s = pts(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let idx = AnnIndex::build(s, &BuildParams::new(0.2, 2).unwrap()).unwrap();
        let r = idx.query(&p(&[40.0, 1.0])).unwrap();
        assert_eq!(r.s_prime, vec![1]);
        assert!(r.exact);
        assert!(idx.locate_leaf(&p(&[40.0, 1.0])).unwrap().is_none());
    }

    #[test]
    fn dimension_checks() {
        let s = pts(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let idx = AnnIndex::build(s.clone(), &BuildParams::new(0.2, 2).unwrap()).unwrap();
        assert!(matches!(
            idx.query(&p(&[0.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        let params = BuildParams::new(0.2, 2).unwrap().with_max_dim(1).unwrap();
        assert!(matches!(
            AnnIndex::build(s.clone(), &params),
            Err(Error::DimensionTooLarge { dim: 2, max: 1 })
        ));
        let mut bad = BuildParams::new(0.2, 3).unwrap();
        bad.scale_factor = 2.0;
        assert!(matches!(
            AnnIndex::build(s, &bad),
            Err(Error::InvalidParameter { name: "delta", .. })
        ));
    }

    #[test]
    fn budget_refuses_large_builds() {
        let s = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let params = BuildParams::new(0.05, 2).unwrap().with_max_nodes(Some(100));
        assert!(matches!(AnnIndex::build(s, &params), Err(Error::Capacity { .. })));
    }

    #[test]
    fn formula_helpers() {
        assert_eq!(depth_bound(1024.0, 2), 6);
        assert_eq!(depth_bound(1.0, 3), 1);
        assert_eq!(depth_bound(64.0 * (1.0 - 1e-15), 3), 3);
        // d=2, r=4: 16/3·4 − 1/3 = 21 = 1 + 4 + 16.
        assert!((node_count_bound(4.0, 2) - 21.0).abs() < 1e-9);
        assert!((node_count_bound(3.0, 2) - 21.0).abs() < 1e-9);
        assert!((node_count_bound(1.0, 2) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn intersection_merge() {
        let mut a = vec![1, 3, 5, 7, 9];
        intersect_in_place(&mut a, &[0, 3, 4, 9, 12]);
        assert_eq!(a, vec![3, 9]);
        intersect_in_place(&mut a, &[]);
        assert!(a.is_empty());
    }

    #[test]
    fn hashed_location_matches_descent() {
        let s = pts(&[&[0.0, 0.0], &[1.0, 0.2], &[0.4, 0.9], &[0.8, 0.7]]);
        let params = BuildParams::new(0.3, 2).unwrap().with_hash_locate(true);
        let idx = AnnIndex::build(s, &params).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let q = p(&[-1.0 + i as f64 * 0.075, -1.0 + j as f64 * 0.075]);
                let a = idx.locate_leaf(&q).unwrap().map(|v| v.id);
                if let Some(g) = idx.grid_locate(&q).unwrap() {
                    assert_eq!(Some(g.id), a);
                }
            }
        }
    }

    #[test]
    fn aux_views_are_consistent() {
        let s = pts(&[&[0.0, 0.0], &[1.0, 0.2], &[0.4, 0.9]]);
        let idx = AnnIndex::build(s, &BuildParams::new(0.4, 2).unwrap()).unwrap();
        let mut seen = 0;
        idx.walk_main(|v| {
            if !v.is_leaf {
                assert!(v.sites.is_empty());
                return;
            }
            assert_eq!(v.has_aux_list(), v.sites.len() >= 2);
            if let Some(list) = idx.aux_list(v) {
                seen += 1;
                assert_eq!(list.len(), idx.orientations().len());
                let c = v.bounds.center().clone();
                let hits = list.locate(&c).unwrap();
                assert_eq!(hits.len(), list.len());
                for (o, sites) in hits {
                    assert!(!sites.is_empty());
                    assert!(list.root_box(o).contains(&c).unwrap());
                }
            }
        });
        assert_eq!(seen as u64, idx.stats().multi_site_leaves);
    }
}
