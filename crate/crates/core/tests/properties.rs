//! Structural properties of built indexes on random instances.

use boxann::index::{depth_bound, node_count_bound};
use boxann::{cell_box_intersects, nearest_site, AnnIndex, BuildParams, Point, SiteId, SiteSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sites(d: usize, n: usize, seed: u64) -> SiteSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    SiteSet::from_flat(d, flat).unwrap()
}

fn build(d: usize, n: usize, eps: f64, seed: u64) -> AnnIndex {
    AnnIndex::build(random_sites(d, n, seed), &BuildParams::new(eps, d).unwrap()).unwrap()
}

fn random_query(rng: &mut ChaCha8Rng, index: &AnnIndex) -> Point {
    boxann::cli::sample_box(rng, index.bounding_box())
}

/// Every site found nearest on a grid of points inside a leaf belongs to that
/// leaf, and every listed site really has a cell meeting the leaf box.
#[test]
fn leaf_site_sets_are_exact() {
    for (n, eps, seed) in [(12, 0.3, 1), (25, 0.2, 2)] {
        let index = build(2, n, eps, seed);
        let all: Vec<SiteId> = (0..index.sites().len() as SiteId).collect();
        let mut leaves = 0;
        index.walk_main(|v| {
            if !v.is_leaf {
                return;
            }
            leaves += 1;
            for &s in v.sites {
                assert!(cell_box_intersects(s, index.sites(), &v.bounds, &all).unwrap());
            }
            let h = v.bounds.half_extents();
            let mut world = vec![0.0; 2];
            for i in 0..10 {
                for j in 0..10 {
                    let local = [
                        -h[0] + (i as f64 + 0.5) * h[0] / 5.0,
                        -h[1] + (j as f64 + 0.5) * h[1] / 5.0,
                    ];
                    v.bounds.world_coords(&local, &mut world);
                    let p = Point::new(world.clone()).unwrap();
                    let nn = nearest_site(&p, index.sites()).unwrap();
                    assert!(v.sites.contains(&nn), "site {nn} missing from leaf {}", v.id);
                }
            }
        });
        assert_eq!(leaves as u64, index.stats().main_leaves);
    }
}

#[test]
fn leaves_cover_the_bounding_box() {
    for d in 1..=3 {
        let index = build(d, 8, 0.4, 10 + d as u64);
        let mut vol = 0.0;
        index.walk_main(|v| {
            if v.is_leaf {
                vol += v.bounds.volume();
            }
        });
        let bb = index.bounding_box().volume();
        assert!((vol - bb).abs() <= 1e-9 * bb, "d={d}: {vol} vs {bb}");
    }
}

#[test]
fn depth_and_node_count_bounds() {
    let mut cases = vec![(50, 0.2, 7)];
    for seed in 0..6 {
        cases.push((10 + 15 * seed as usize, 0.1 + 0.05 * seed as f64, 100 + seed));
    }
    for (n, eps, seed) in cases {
        let index = build(2, n, eps, seed);
        let s = index.stats();
        let ratio = index.volume_ratio();
        assert!(s.main_max_depth <= depth_bound(ratio, 2), "n={n} eps={eps}");
        assert!(s.main_nodes as f64 <= node_count_bound(ratio, 2), "n={n} eps={eps}");
        assert_eq!(index.main_depth_bound(), depth_bound(ratio, 2));
    }
}

#[test]
fn aux_trees_respect_their_node_bound() {
    for d in 2..=3 {
        let index = build(d, 10, if d == 2 { 0.3 } else { 1.2 }, 40 + d as u64);
        let f = 2f64.powi(d as i32);
        let bound = (2.0 * f * f - 1.0) / (f - 1.0);
        let mut trees = 0;
        for list in index.aux_lists() {
            for o in 0..list.len() {
                let (nodes, depth) = list.tree_shape(o);
                assert!(nodes as f64 <= bound && depth <= 2);
                trees += 1;
            }
        }
        assert!(trees > 0);
    }
}

#[test]
fn located_leaf_contains_the_query() {
    let index = build(2, 40, 0.15, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let q = random_query(&mut rng, &index);
        let leaf = index.locate_leaf(&q).unwrap().expect("interior query");
        assert!(leaf.is_leaf);
        assert!(leaf.bounds.contains(&q).unwrap());
    }
}

#[test]
fn grid_overlay_agrees_with_descent() {
    let plain = build(2, 60, 0.1, 4);
    let mut index = build(2, 60, 0.1, 4);
    index.enable_hash_locate();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut hits = 0;
    for _ in 0..10_000 {
        let q = random_query(&mut rng, &index);
        let by_descent = index.locate_leaf(&q).unwrap().unwrap();
        if let Some(by_grid) = index.grid_locate(&q).unwrap() {
            hits += 1;
            assert_eq!(by_grid.id, by_descent.id);
        }
        assert_eq!(index.query(&q).unwrap().s_prime, plain.query(&q).unwrap().s_prime);
    }
    assert!(hits > 0);
}

/// Aux trees are traversed exactly when their root holds the query, and the
/// leaf reached holds it too.
#[test]
fn aux_leaves_contain_the_query() {
    let index = build(2, 30, 0.25, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut traversed = 0;
    for _ in 0..500 {
        let q = random_query(&mut rng, &index);
        let leaf = index.locate_leaf(&q).unwrap().unwrap();
        let Some(list) = index.aux_list(&leaf) else { continue };
        let hits = list.locate(&q).unwrap();
        let expected: Vec<usize> = (0..list.len())
            .filter(|&o| list.root_box(o).contains(&q).unwrap())
            .collect();
        assert_eq!(hits.iter().map(|h| h.0).collect::<Vec<_>>(), expected);
        for &(o, sites) in &hits {
            let mut found = false;
            list.walk_tree(o, |v| {
                if v.is_leaf && v.bounds.contains(&q).unwrap() && v.sites == sites {
                    found = true;
                }
            });
            assert!(found);
        }
        traversed += hits.len();
        assert_eq!(index.query(&q).unwrap().lists_traversed, hits.len() as u64);
    }
    assert!(traversed > 0);
}

/// Halving eps with an unchanged bounding box refines the main tree.
#[test]
fn smaller_eps_nests_main_leaves() {
    let sites = random_sites(2, 40, 21);
    let coarse = AnnIndex::build(sites.clone(), &BuildParams::new(0.2, 2).unwrap()).unwrap();
    let fine = AnnIndex::build(sites, &BuildParams::new(0.1, 2).unwrap()).unwrap();
    assert_eq!(coarse.bounding_box(), fine.bounding_box());
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut superset = 0;
    for _ in 0..1000 {
        let q = random_query(&mut rng, &fine);
        let a = fine.locate_leaf(&q).unwrap().unwrap();
        let b = coarse.locate_leaf(&q).unwrap().unwrap();
        assert!(a.level >= b.level);
        let shift = a.level - b.level;
        assert!(a.cell().iter().zip(b.cell()).all(|(x, y)| x >> shift == *y));
        assert!(a.sites.iter().all(|s| b.sites.contains(s)));
        let (sa, sb) = (fine.query(&q).unwrap().s_prime, coarse.query(&q).unwrap().s_prime);
        superset += sa.iter().all(|s| sb.contains(s)) as usize;
    }
    println!("query answers nested in {superset} of 1000 cases");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn answers_contain_the_nearest_site(
        seed in 0u64..1000,
        n in 2usize..30,
        eps in 0.1f64..0.6,
        qseed in 0u64..1000,
    ) {
        let index = build(2, n, eps, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(qseed);
        for _ in 0..50 {
            let q = random_query(&mut rng, &index);
            let r = index.query(&q).unwrap();
            let nn = nearest_site(&q, index.sites()).unwrap();
            prop_assert!(r.s_prime.binary_search(&nn).is_ok());
            prop_assert!(r.s_prime.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(r.nodes_visited <= index.nodes_visited_bound());
            for set in index.containing_leaf_sets(&q).unwrap() {
                prop_assert!(r.s_prime.iter().all(|s| set.contains(s)));
            }
        }
    }
}
