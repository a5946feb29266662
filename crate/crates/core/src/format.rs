//! Text formats: the points file read by `build` and the versioned index
//! file.
//!
//! The index file lists the header, the sites, then every main-tree node in
//! preorder. The auxiliary trees of a multi-site leaf follow that leaf's
//! record, one preorder run per orientation. Reals use 17 significant
//! digits, which round-trips `f64` exactly.

use std::io::{BufRead, Write};

use crate::auxtree::{AuxEntry, AuxForest};
use crate::boxtree::{Arena, BuildParams, Frame, MainTree, NodeId, NONE};
use crate::cells::{SiteId, SiteSet};
use crate::error::{Error, Result};
use crate::geometry::{OrientedBox, Point, HARD_MAX_DIM};
use crate::index::AnnIndex;

const MAGIC: &str = "VBOXTREE 1";

/// Reads whitespace-separated points, one per line. `#` starts a comment;
/// blank lines are skipped.
pub fn parse_points(text: &str) -> Result<SiteSet> {
    let mut dim = None;
    let mut flat = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = parse_reals(line).map_err(|message| Error::Parse {
            line: i + 1,
            message,
        })?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {d} coordinates, found {}", row.len()),
                })
            }
            _ => {}
        }
        flat.extend(row);
    }
    match dim {
        None => Err(Error::NoPoints),
        Some(d) => SiteSet::from_flat(d, flat),
    }
}

/// Parses one point given as whitespace-separated decimals.
pub fn parse_point(text: &str) -> Result<Point> {
    let row = parse_reals(text.trim()).map_err(|message| Error::Parse { line: 1, message })?;
    if row.is_empty() {
        return Err(Error::NoPoints);
    }
    Point::new(row)
}

fn parse_reals(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|t| {
            let v: f64 = t.parse().map_err(|_| format!("not a number: {t:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("non-finite value: {t:?}"))
            }
        })
        .collect()
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn reals(xs: &[f64]) -> String {
    xs.iter().map(|&x| real(x)).collect::<Vec<_>>().join(" ")
}

/// Writes `index` in the index-file format.
pub fn save_index(index: &AnnIndex, w: &mut impl Write) -> Result<()> {
    let d = index.dim();
    let p = index.params();
    let bb = index.bounding_box();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "dim {d}")?;
    writeln!(w, "eps {}", real(p.eps))?;
    writeln!(w, "delta {}", real(p.delta))?;
    writeln!(w, "scale {}", real(p.scale_factor))?;
    writeln!(w, "bbox {} {}", reals(bb.center().coords()), reals(bb.half_extents()))?;
    writeln!(w, "sites {}", index.sites().len())?;
    for s in index.sites().iter() {
        writeln!(w, "{}", reals(s))?;
    }
    writeln!(w, "mainnodes {}", index.main.arena.nodes.len())?;
    let zero = vec![0.0; d - 1];
    let mut err = None;
    index.walk_main(|v| {
        if err.is_some() {
            return;
        }
        let r = write_node(w, &v.bounds, &zero, v.is_leaf, v.sites).and_then(|_| {
            match index.aux_list(v) {
                Some(list) => {
                    writeln!(w, " aux: {}", list.len())?;
                    for o in 0..list.len() {
                        let mut inner = Ok(());
                        list.walk_tree(o, |a| {
                            if inner.is_ok() {
                                inner = write_node(w, &a.bounds, list.angles(o), a.is_leaf, a.sites)
                                    .and_then(|_| Ok(writeln!(w)?));
                            }
                        });
                        inner?;
                    }
                    Ok(())
                }
                None => Ok(writeln!(w)?),
            }
        });
        if let Err(e) = r {
            err = Some(e);
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn write_node(
    w: &mut impl Write,
    b: &OrientedBox,
    angles: &[f64],
    leaf: bool,
    sites: &[SiteId],
) -> Result<()> {
    write!(
        w,
        "N {} {} {}",
        if leaf { "leaf" } else { "internal" },
        reals(b.center().coords()),
        reals(b.half_extents())
    )?;
    if !angles.is_empty() {
        write!(w, " {}", reals(angles))?;
    }
    if leaf {
        write!(w, " sites: {}", sites.len())?;
        for s in sites {
            write!(w, " {s}")?;
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<&str> {
        self.buf.clear();
        if self.inner.read_line(&mut self.buf)? == 0 {
            return Err(Error::Format(format!("unexpected end of file after line {}", self.line)));
        }
        self.line += 1;
        Ok(self.buf.trim_end())
    }

    fn fail(&self, msg: impl std::fmt::Display) -> Error {
        Error::Format(format!("line {}: {msg}", self.line))
    }

    /// Next line, which must be `key` followed by values.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let line = self.next()?.to_string();
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(self.fail(format!("expected `{key}`")));
        }
        Ok(it.map(str::to_string).collect())
    }

    fn keyed_reals(&mut self, key: &str, count: usize) -> Result<Vec<f64>> {
        let toks = self.keyed(key)?;
        if toks.len() != count {
            return Err(self.fail(format!("`{key}` needs {count} values")));
        }
        toks.iter().map(|t| self.real(t)).collect()
    }

    fn keyed_count(&mut self, key: &str) -> Result<usize> {
        match self.keyed(key)?.as_slice() {
            [v] => v.parse().map_err(|_| self.fail(format!("bad count {v:?}"))),
            _ => Err(self.fail(format!("`{key}` needs one value"))),
        }
    }

    fn real(&self, t: &str) -> Result<f64> {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.fail(format!("bad real {t:?}")))
    }
}

/// One parsed node record.
struct Record {
    leaf: bool,
    center: Vec<f64>,
    half: Vec<f64>,
    angles: Vec<f64>,
    sites: Vec<SiteId>,
    aux: Option<usize>,
}

fn parse_record<R: BufRead>(lines: &mut Lines<R>, d: usize, n: usize) -> Result<Record> {
    let line = lines.next()?.to_string();
    let toks: Vec<&str> = line.split_whitespace().collect();
    let fixed = 2 + 2 * d + (d - 1);
    if toks.len() < fixed || toks[0] != "N" {
        return Err(lines.fail("malformed node record"));
    }
    let leaf = match toks[1] {
        "leaf" => true,
        "internal" => false,
        other => return Err(lines.fail(format!("unknown node kind {other:?}"))),
    };
    let nums = toks[2..fixed]
        .iter()
        .map(|t| lines.real(t))
        .collect::<Result<Vec<_>>>()?;
    let mut rec = Record {
        leaf,
        center: nums[..d].to_vec(),
        half: nums[d..2 * d].to_vec(),
        angles: nums[2 * d..].to_vec(),
        sites: Vec::new(),
        aux: None,
    };
    let mut rest = toks[fixed..].iter();
    while let Some(&key) = rest.next() {
        let count: usize = rest
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| lines.fail(format!("`{key}` needs a count")))?;
        match key {
            "sites:" if leaf && rec.sites.is_empty() => {
                for _ in 0..count {
                    let s: SiteId = rest
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| lines.fail("bad site id"))?;
                    if s as usize >= n {
                        return Err(lines.fail(format!("site {s} out of range")));
                    }
                    rec.sites.push(s);
                }
                if count == 0 || rec.sites.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(lines.fail("site list must be nonempty and ascending"));
                }
            }
            "aux:" if leaf && rec.aux.is_none() => rec.aux = Some(count),
            _ => return Err(lines.fail(format!("unexpected field {key:?}"))),
        }
    }
    if leaf && rec.sites.is_empty() {
        return Err(lines.fail("leaf without sites"));
    }
    Ok(rec)
}

fn check_geometry<R: BufRead>(lines: &Lines<R>, rec: &Record, want: &OrientedBox, angles: &[f64]) -> Result<()> {
    let scale = want
        .half_extents()
        .iter()
        .chain(want.center().coords())
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-12 * scale;
    let ok = rec.center.iter().zip(want.center().coords()).all(|(a, b)| (a - b).abs() <= tol)
        && rec.half.iter().zip(want.half_extents()).all(|(a, b)| (a - b).abs() <= tol)
        && rec.angles.iter().zip(angles).all(|(a, b)| (a - b).abs() <= 1e-12);
    if ok {
        Ok(())
    } else {
        Err(lines.fail("node box does not match its position in the tree"))
    }
}

struct Loader<'a, R> {
    lines: Lines<R>,
    d: usize,
    n: usize,
    main: &'a Frame,
    arena: Arena,
    aux: AuxForest,
    leaf_volume: f64,
    main_count: usize,
}

impl<R: BufRead> Loader<'_, R> {
    fn main_node(&mut self, id: NodeId, level: u32, cell: [u64; HARD_MAX_DIM]) -> Result<()> {
        self.main_count += 1;
        let rec = parse_record(&mut self.lines, self.d, self.n)?;
        let zero = vec![0.0; self.d - 1];
        check_geometry(&self.lines, &rec, &self.main.node_box(level, &cell), &zero)?;
        if rec.leaf {
            let multi = rec.sites.len() >= 2;
            self.arena.set_sites(id, rec.sites)?;
            match (multi, rec.aux) {
                (true, Some(m)) => self.aux_list(id, level, cell, m),
                (false, None) => Ok(()),
                _ => Err(self.lines.fail("aux list required exactly on multi-site leaves")),
            }
        } else {
            self.split(level, self.main.depth_limit)?;
            let first = self.arena.alloc(1 << self.d)?;
            self.arena.nodes[id as usize].first_child = first;
            for c in 0..1usize << self.d {
                self.main_node(first + c as u32, level + 1, child_cell(&cell, c, self.d))?;
            }
            Ok(())
        }
    }

    fn split(&self, level: u32, limit: u32) -> Result<()> {
        if level >= limit {
            return Err(self.lines.fail("internal node below the volume threshold"));
        }
        Ok(())
    }

    fn aux_list(&mut self, leaf: NodeId, level: u32, cell: [u64; HARD_MAX_DIM], m: usize) -> Result<()> {
        let q = self.aux.orientations();
        if m != q {
            return Err(self.lines.fail(format!("expected {q} auxiliary trees, found {m}")));
        }
        let mut entry = AuxEntry {
            leaf,
            level,
            cell,
            first_root: NONE,
            depth_limit: 0,
        };
        self.arena.nodes[leaf as usize].aux = self.aux.lists.len() as u32;
        if q > 0 {
            entry.first_root = self.aux.arena.alloc(q)?;
            for o in 0..q {
                let frame = Frame::new(self.aux.root_box(self.main, &entry, o), self.leaf_volume)?;
                entry.depth_limit = frame.depth_limit;
                self.aux_node(&frame, o, entry.first_root + o as u32, 0, [0; HARD_MAX_DIM])?;
            }
        }
        self.aux.lists.push(entry);
        Ok(())
    }

    fn aux_node(&mut self, frame: &Frame, o: usize, id: NodeId, level: u32, cell: [u64; HARD_MAX_DIM]) -> Result<()> {
        let rec = parse_record(&mut self.lines, self.d, self.n)?;
        let angles = self.aux.rotations[o].angles().to_vec();
        check_geometry(&self.lines, &rec, &frame.node_box(level, &cell), &angles)?;
        if rec.aux.is_some() {
            return Err(self.lines.fail("auxiliary node with an aux list"));
        }
        if rec.leaf {
            self.aux.arena.set_sites(id, rec.sites)
        } else {
            self.split(level, frame.depth_limit)?;
            let first = self.aux.arena.alloc(1 << self.d)?;
            self.aux.arena.nodes[id as usize].first_child = first;
            for c in 0..1usize << self.d {
                self.aux_node(frame, o, first + c as u32, level + 1, child_cell(&cell, c, self.d))?;
            }
            Ok(())
        }
    }
}

fn child_cell(cell: &[u64; HARD_MAX_DIM], c: usize, d: usize) -> [u64; HARD_MAX_DIM] {
    let mut out = [0u64; HARD_MAX_DIM];
    for j in 0..d {
        out[j] = 2 * cell[j] + (c >> j & 1) as u64;
    }
    out
}

/// Reads an index file written by [`save_index`]. Every node box is checked
/// against the geometry implied by its position in the tree.
pub fn load_index(r: impl BufRead) -> Result<AnnIndex> {
    let mut lines = Lines {
        inner: r,
        line: 0,
        buf: String::new(),
    };
    if lines.next()? != MAGIC {
        return Err(lines.fail(format!("expected `{MAGIC}`")));
    }
    let d = lines.keyed_count("dim")?;
    if d == 0 || d > HARD_MAX_DIM {
        return Err(lines.fail(format!("dimension {d} out of range")));
    }
    let eps = lines.keyed_reals("eps", 1)?[0];
    let delta = lines.keyed_reals("delta", 1)?[0];
    let scale = lines.keyed_reals("scale", 1)?[0];
    let mut params = BuildParams::new(eps, d)?
        .with_scale(scale)?
        .with_max_dim(d.max(6))?;
    if (params.delta - delta).abs() > 1e-12 * params.delta {
        return Err(lines.fail(format!("delta {delta} does not match eps {eps}")));
    }
    params.delta = delta;
    let bb = lines.keyed_reals("bbox", 2 * d)?;
    let root = OrientedBox::axis_aligned(Point::new(bb[..d].to_vec())?, bb[d..].to_vec())?;
    let n = lines.keyed_count("sites")?;
    let mut flat = Vec::with_capacity(n * d);
    for _ in 0..n {
        let line = lines.next()?.to_string();
        let row = parse_reals(&line).map_err(|m| lines.fail(m))?;
        if row.len() != d {
            return Err(lines.fail(format!("site needs {d} coordinates")));
        }
        flat.extend(row);
    }
    let sites = SiteSet::from_flat(d, flat)?;
    let main_nodes = lines.keyed_count("mainnodes")?;
    let frame = Frame::new(root, params.leaf_volume())?;
    let mut loader = Loader {
        lines,
        d,
        n,
        main: &frame,
        arena: Arena::default(),
        aux: AuxForest::empty(d, &params)?,
        leaf_volume: params.leaf_volume(),
        main_count: 0,
    };
    loader.arena.alloc(1)?;
    loader.main_node(0, 0, [0; HARD_MAX_DIM])?;
    if loader.main_count != main_nodes {
        return Err(Error::Format(format!(
            "mainnodes says {main_nodes}, found {}",
            loader.main_count
        )));
    }
    let Loader { arena, aux, .. } = loader;
    let mut main = MainTree {
        frame,
        arena,
        grid: None,
    };
    if params.hash_locate {
        main.build_grid();
    }
    let mut index = AnnIndex {
        params,
        sites,
        main,
        aux,
        stats: Default::default(),
    };
    index.stats = index.measure();
    Ok(index)
}
