//! SVG rendering of 2-D indexes: main leaves, sites, and optionally the
//! auxiliary roots of one multi-site leaf.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::geometry::OrientedBox;
use crate::index::AnnIndex;

const CANVAS: f64 = 800.0;

struct View {
    x0: f64,
    y1: f64,
    k: f64,
}

impl View {
    fn map(&self, p: &[f64]) -> (f64, f64) {
        ((p[0] - self.x0) * self.k, (self.y1 - p[1]) * self.k)
    }
}

/// Renders `index`. `aux_leaf` picks the multi-site leaf, by preorder rank,
/// whose auxiliary roots are drawn.
pub fn render(index: &AnnIndex, aux_leaf: Option<usize>) -> Result<String> {
    if index.dim() != 2 {
        return Err(Error::UnsupportedDimension(index.dim()));
    }
    let bb = index.bounding_box();
    let (c, h) = (bb.center().coords(), bb.half_extents());
    let view = View {
        x0: c[0] - h[0],
        y1: c[1] + h[1],
        k: CANVAS / (2.0 * h[0].max(h[1])),
    };
    let mut out = String::new();
    let (w, ht) = (2.0 * h[0] * view.k, 2.0 * h[1] * view.k);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{ht:.3}" viewBox="0 0 {w:.3} {ht:.3}">"#
    )
    .unwrap();
    writeln!(out, r##"<g id="leaves" stroke="#555" stroke-width="0.5">"##).unwrap();
    index.walk_main(|v| {
        if !v.is_leaf {
            return;
        }
        let fill = if v.sites.len() >= 2 { "#f4b183" } else { "none" };
        let c = v.bounds.center().coords();
        let hh = v.bounds.half_extents();
        let (x, y) = view.map(&[c[0] - hh[0], c[1] + hh[1]]);
        writeln!(
            out,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
            2.0 * hh[0] * view.k,
            2.0 * hh[1] * view.k
        )
        .unwrap();
    });
    writeln!(out, "</g>").unwrap();
    if let Some(rank) = aux_leaf {
        let list = index.aux_lists().nth(rank).ok_or_else(|| Error::InvalidParameter {
            name: "aux_leaf",
            reason: format!("only {} multi-site leaves", index.aux_lists().count()),
        })?;
        writeln!(out, r##"<g id="aux" fill="none" stroke="#2f5597" stroke-width="0.7">"##).unwrap();
        for o in 0..list.len() {
            writeln!(out, r#"<polygon points="{}"/>"#, polygon(&list.root_box(o), &view)).unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, r##"<g id="sites" fill="#c00000">"##).unwrap();
    for s in index.sites().iter() {
        let (x, y) = view.map(s);
        writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2.5"/>"#).unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

fn polygon(b: &OrientedBox, view: &View) -> String {
    // Corners in cyclic order: bits 00, 01, 11, 10.
    let corners = b.corners();
    [0, 1, 3, 2]
        .iter()
        .map(|&i| {
            let (x, y) = view.map(corners[i].coords());
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}
