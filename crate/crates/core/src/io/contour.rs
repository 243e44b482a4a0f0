//! Iso-contours of an element density field as closed, oriented polylines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

use super::vtk::cell_to_point;

/// Closed polylines (first point repeated at the end) with the solid side on
/// the left of the direction of travel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContourSet {
    pub loops: Vec<Vec<[f64; 2]>>,
    pub threshold: f64,
}

/// Grid edge carrying a crossing: horizontal `(i, j)-(i+1, j)` or vertical
/// `(i, j)-(i, j+1)`, in padded node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeId {
    H(usize, usize),
    V(usize, usize),
}

/// Marching squares at `threshold` on the node-averaged field.
///
/// The node grid is padded with a ring of zero-valued nodes so that material
/// touching the domain boundary still yields closed loops; crossings on the
/// padding edges are placed on the boundary node itself. Saddle cells join
/// the two solid corners when the mean of the four corner values reaches the
/// threshold.
pub fn extract_contour(mesh: &Mesh, density: &[f64], threshold: f64) -> Result<ContourSet> {
    if density.len() != mesh.n_elements() {
        return Err(Error::Internal(format!(
            "density has {} entries for {} elements",
            density.len(),
            mesh.n_elements()
        )));
    }
    if density.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Domain("density values must lie in [0, 1]".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::config(format!("contour threshold must lie in (0, 1], got {threshold}")));
    }
    let (nex, ney) = (mesh.nex(), mesh.ney());
    let nodal = cell_to_point(mesh.elements(), mesh.n_nodes(), density);

    // padded node grid: (nex + 3) × (ney + 3), real node (i, j) at (i + 1, j + 1)
    let (px, py) = (nex + 3, ney + 3);
    let real = |i: usize, j: usize| i >= 1 && j >= 1 && i <= nex + 1 && j <= ney + 1;
    let value = |i: usize, j: usize| if real(i, j) { nodal[mesh.grid_node(i - 1, j - 1)] } else { 0.0 };
    let position = |i: usize, j: usize| mesh.coords()[mesh.grid_node(i - 1, j - 1)];
    let inside = |i: usize, j: usize| value(i, j) >= threshold;

    let crossing = |a: (usize, usize), b: (usize, usize)| -> [f64; 2] {
        match (real(a.0, a.1), real(b.0, b.1)) {
            (true, true) => {
                let (va, vb) = (value(a.0, a.1), value(b.0, b.1));
                let t = (va - threshold) / (va - vb);
                let (xa, xb) = (position(a.0, a.1), position(b.0, b.1));
                [xa[0] + t * (xb[0] - xa[0]), xa[1] + t * (xb[1] - xa[1])]
            }
            (true, false) => position(a.0, a.1),
            (false, true) => position(b.0, b.1),
            (false, false) => unreachable!("padding nodes never cross the threshold"),
        }
    };

    // next edge and start point for every oriented segment, keyed by its start edge
    let mut next: BTreeMap<EdgeId, (EdgeId, [f64; 2])> = BTreeMap::new();
    for j in 0..py - 1 {
        for i in 0..px - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let ins = corners.map(|(a, b)| inside(a, b));
            let edges = [EdgeId::H(i, j), EdgeId::V(i + 1, j), EdgeId::H(i, j + 1), EdgeId::V(i, j)];
            // crossings in counter-clockwise order: (edge, leaving the solid?)
            let mut cross = Vec::with_capacity(4);
            for k in 0..4 {
                let (a, b) = (ins[k], ins[(k + 1) % 4]);
                if a != b {
                    cross.push((k, a));
                }
            }
            if cross.is_empty() {
                continue;
            }
            let joined = cross.len() == 4 && {
                let mean: f64 = corners.iter().map(|&(a, b)| value(a, b)).sum::<f64>() / 4.0;
                mean >= threshold
            };
            let nc = cross.len();
            for (pos, &(k, leaving)) in cross.iter().enumerate() {
                if !leaving {
                    continue;
                }
                // pair a solid-to-void crossing with the following void-to-solid
                // crossing when the solid corners are joined, else the preceding one
                let partner = if nc == 2 || joined { (pos + 1) % nc } else { (pos + nc - 1) % nc };
                let (kend, _) = cross[partner];
                let start = crossing(corners[k], corners[(k + 1) % 4]);
                next.insert(edges[k], (edges[kend], start));
            }
        }
    }

    let mut loops = Vec::new();
    while let Some((&first, _)) = next.iter().next() {
        let mut poly: Vec<[f64; 2]> = Vec::new();
        let mut edge = first;
        loop {
            let (to, point) = next
                .remove(&edge)
                .ok_or_else(|| Error::Internal("open contour chain".into()))?;
            if poly.last() != Some(&point) {
                poly.push(point);
            }
            edge = to;
            if edge == first {
                break;
            }
        }
        if poly.len() > 1 && poly.first() == poly.last() {
            poly.pop();
        }
        if poly.len() >= 3 {
            poly.push(poly[0]);
            loops.push(poly);
        }
    }
    if loops.is_empty() {
        log::warn!("no material above the contour threshold {threshold}");
    }
    Ok(ContourSet { loops, threshold })
}

/// Signed area of a closed polyline (positive when counter-clockwise).
pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    0.5 * poly
        .windows(2)
        .map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1])
        .sum::<f64>()
}

impl ContourSet {
    /// Plain text: one `x y` pair per line, a blank line between loops.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, poly) in self.loops.iter().enumerate() {
            if k > 0 {
                s.push('\n');
            }
            for p in poly {
                let _ = writeln!(s, "{:e} {:e}", p[0], p[1]);
            }
        }
        s
    }

    /// Minimal ASCII DXF with one closed POLYLINE entity per loop.
    pub fn to_dxf(&self) -> String {
        let mut s = String::from("0\nSECTION\n2\nENTITIES\n");
        for poly in &self.loops {
            s.push_str("0\nPOLYLINE\n8\n0\n66\n1\n70\n1\n");
            // the closing vertex is implied by the closed flag
            for p in &poly[..poly.len() - 1] {
                let _ = write!(s, "0\nVERTEX\n8\n0\n10\n{}\n20\n{}\n", p[0], p[1]);
            }
            s.push_str("0\nSEQEND\n");
        }
        s.push_str("0\nENDSEC\n0\nEOF\n");
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn write_dxf(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_dxf()).map_err(|e| Error::io(path, e))
    }
}
