//! Command-line surface. Each command writes its report to the given sink
//! as `key=value` lines.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxtree::{BuildParams, DEFAULT_MAX_NODES};
use crate::cells::nearest_site;
use crate::format::{load_index, parse_point, parse_points, save_index};
use crate::geometry::{OrientedBox, Point};
use crate::index::AnnIndex;
use crate::oracle::{run_cardinality_experiment, sandwich, OracleConfig};

#[derive(Parser, Debug)]
#[command(name = "boxann", version, about = "Approximate nearest neighbor index over box trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an index from a points file.
    Build {
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        margin: f64,
        /// Auxiliary root scaling, or `auto` for max(2, √d).
        #[arg(long, default_value = "auto")]
        scale: String,
        #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
        max_nodes: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Answer one query.
    Query {
        index: PathBuf,
        /// Whitespace-separated coordinates.
        point: String,
        #[arg(long)]
        hash_locate: bool,
    },
    /// Audit answers on random interior queries against the sampled oracle.
    Check {
        index: PathBuf,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Render a 2-D index as SVG.
    Viz {
        index: PathBuf,
        output: PathBuf,
        /// Draw the auxiliary roots of the k-th multi-site leaf.
        #[arg(long)]
        aux_leaf: Option<usize>,
    },
    /// Time random interior queries and check the visit bound.
    Bench {
        index: PathBuf,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        hash_locate: bool,
    },
    /// Expected answer size on uniform sites in the unit ball.
    Experiment {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
        max_nodes: u64,
    },
}

pub fn run(cli: Cli, out: &mut impl Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Build {
            input,
            eps,
            margin,
            scale,
            max_nodes,
            output,
        } => cmd_build(&input, eps, margin, &scale, max_nodes, &output, out),
        Command::Query {
            index,
            point,
            hash_locate,
        } => cmd_query(&index, &point, hash_locate, out),
        Command::Check {
            index,
            queries,
            seed,
            samples,
        } => cmd_check(&index, queries, seed, samples, out),
        Command::Viz {
            index,
            output,
            aux_leaf,
        } => cmd_viz(&index, &output, aux_leaf, out),
        Command::Bench {
            index,
            queries,
            seed,
            hash_locate,
        } => cmd_bench(&index, queries, seed, hash_locate, out),
        Command::Experiment {
            n,
            dim,
            eps,
            trials,
            seed,
            max_nodes,
        } => {
            let report = run_cardinality_experiment(n, dim, eps, trials, seed, Some(max_nodes))?;
            for line in report.to_lines() {
                writeln!(out, "{line}")?;
            }
            Ok(())
        }
    }
}

pub fn read_index(path: &Path) -> anyhow::Result<AnnIndex> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_index(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn cmd_build(
    input: &Path,
    eps: f64,
    margin: f64,
    scale: &str,
    max_nodes: u64,
    output: &Path,
    out: &mut impl Write,
) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let sites = parse_points(&text).with_context(|| format!("parsing {}", input.display()))?;
    let mut params = BuildParams::new(eps, sites.dim())?
        .with_margin(margin)?
        .with_max_nodes(Some(max_nodes));
    if scale != "auto" {
        let s: f64 = scale
            .parse()
            .with_context(|| format!("--scale expects a number or `auto`, got {scale:?}"))?;
        params = params.with_scale(s)?;
    }
    let index = AnnIndex::build(sites, &params)?;
    let f = File::create(output).with_context(|| format!("creating {}", output.display()))?;
    let mut w = BufWriter::new(f);
    save_index(&index, &mut w)?;
    w.flush()?;
    for line in index.stats().to_lines() {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// `sprime=.. exact=.. nodes_visited=.. lists_traversed=..`
pub fn format_query(r: &crate::index::QueryResult) -> String {
    let ids: Vec<String> = r.s_prime.iter().map(|s| s.to_string()).collect();
    format!(
        "sprime={} exact={} nodes_visited={} lists_traversed={}",
        ids.join(","),
        r.exact,
        r.nodes_visited,
        r.lists_traversed
    )
}

pub fn cmd_query(path: &Path, point: &str, hash_locate: bool, out: &mut impl Write) -> anyhow::Result<()> {
    let mut index = read_index(path)?;
    if hash_locate {
        index.enable_hash_locate();
    }
    let q = parse_point(point)?;
    let r = index.query(&q)?;
    writeln!(out, "{}", format_query(&r))?;
    Ok(())
}

/// Uniform point of a box.
pub fn sample_box(rng: &mut impl Rng, b: &OrientedBox) -> Point {
    let d = b.dim();
    let local: Vec<f64> = b.half_extents().iter().map(|&h| rng.gen_range(-h..=h)).collect();
    let mut world = vec![0.0; d];
    b.world_coords(&local, &mut world);
    Point::new(world).expect("finite sample")
}

pub fn cmd_check(
    path: &Path,
    queries: usize,
    seed: u64,
    samples: usize,
    out: &mut impl Write,
) -> anyhow::Result<()> {
    let index = read_index(path)?;
    let cfg = OracleConfig {
        samples_per_ball: samples,
        rng_seed: seed,
        ..OracleConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut complete, mut upper, mut lower, mut exact) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..queries {
        let q = sample_box(&mut rng, index.bounding_box());
        let r = index.query(&q)?;
        if r.s_prime.binary_search(&nearest_site(&q, index.sites())?).is_ok() {
            complete += 1;
        }
        exact += r.exact as usize;
        let s = sandwich(&index, &q, &cfg)?;
        upper += s.upper as usize;
        lower += s.lower as usize;
    }
    let rate = |k: usize| if queries == 0 { 1.0 } else { k as f64 / queries as f64 };
    writeln!(out, "queries={queries}")?;
    writeln!(out, "completeness={}", rate(complete))?;
    writeln!(out, "exact={}", rate(exact))?;
    writeln!(out, "soundness={}", rate(upper))?;
    writeln!(out, "lower_sandwich={}", rate(lower))?;
    if complete != queries {
        bail!("{} completeness failures", queries - complete);
    }
    Ok(())
}

pub fn cmd_viz(path: &Path, output: &Path, aux_leaf: Option<usize>, out: &mut impl Write) -> anyhow::Result<()> {
    let index = read_index(path)?;
    let svg = crate::svg::render(&index, aux_leaf)?;
    std::fs::write(output, &svg).with_context(|| format!("writing {}", output.display()))?;
    writeln!(out, "bytes={}", svg.len())?;
    Ok(())
}

/// Mean, median and 99th percentile.
fn summary(mut xs: Vec<f64>) -> (f64, f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    xs.sort_by(f64::total_cmp);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let at = |p: f64| xs[((p * xs.len() as f64).ceil() as usize).clamp(1, xs.len()) - 1];
    (mean, at(0.5), at(0.99))
}

pub fn cmd_bench(
    path: &Path,
    queries: usize,
    seed: u64,
    hash_locate: bool,
    out: &mut impl Write,
) -> anyhow::Result<()> {
    let mut index = read_index(path)?;
    if hash_locate {
        index.enable_hash_locate();
    }
    let bound = index.nodes_visited_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visits = Vec::with_capacity(queries);
    let mut micros = Vec::with_capacity(queries);
    let mut over = 0;
    for _ in 0..queries {
        let q = sample_box(&mut rng, index.bounding_box());
        let t = Instant::now();
        let r = index.query(&q)?;
        micros.push(t.elapsed().as_secs_f64() * 1e6);
        over += (r.nodes_visited > bound) as usize;
        visits.push(r.nodes_visited as f64);
    }
    let (vm, vmed, vp99) = summary(visits);
    let (tm, tmed, tp99) = summary(micros);
    writeln!(out, "queries={queries}")?;
    writeln!(out, "nodes_visited_bound={bound}")?;
    writeln!(out, "nodes_visited_mean={vm} nodes_visited_median={vmed} nodes_visited_p99={vp99}")?;
    writeln!(out, "time_us_mean={tm:.3} time_us_median={tmed:.3} time_us_p99={tp99:.3}")?;
    writeln!(out, "bound_violations={over}")?;
    if over > 0 {
        bail!("{over} queries exceeded the nodes_visited bound");
    }
    Ok(())
}
