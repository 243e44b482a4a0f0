//! Structured bilinear-quad grids, DOF numbering and problem presets.
//!
//! Nodes are numbered row-major with x fastest: node `(i, j)` has id
//! `j * (nex + 1) + i`. Element `(ex, ey)` has id `ey * nex + ex` and lists
//! its corners counter-clockwise starting at the lower-left node.
//! Displacement DOFs of node `n` are `2n` (x) and `2n + 1` (y); the pressure
//! DOF of node `n` is `n`.

pub mod preset;
pub mod shape;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use preset::{apply_preset, Axis, ClampEnd, ClampSpec, PresetKind, PresetSpec, Problem, ProblemPreset, Rect};

/// One side of the rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// Rectangular grid of bilinear quadrilaterals.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nex: usize,
    ney: usize,
    lx: f64,
    ly: f64,
    thickness: f64,
    coords: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
}

impl Mesh {
    /// Uniform `nex × ney` grid over `[0, lx] × [0, ly]`.
    pub fn build_grid(nex: usize, ney: usize, lx: f64, ly: f64, thickness: f64) -> Result<Mesh> {
        if nex == 0 || ney == 0 {
            return Err(Error::config(format!(
                "element counts must be positive (got {nex} × {ney})"
            )));
        }
        for (name, v) in [("lx", lx), ("ly", ly), ("thickness", thickness)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive (got {v})")));
            }
        }
        let dx = lx / nex as f64;
        let dy = ly / ney as f64;
        let mut coords = Vec::with_capacity((nex + 1) * (ney + 1));
        for j in 0..=ney {
            for i in 0..=nex {
                coords.push([i as f64 * dx, j as f64 * dy]);
            }
        }
        let mut elements = Vec::with_capacity(nex * ney);
        for ey in 0..ney {
            for ex in 0..nex {
                let n0 = ey * (nex + 1) + ex;
                elements.push([n0, n0 + 1, n0 + nex + 2, n0 + nex + 1]);
            }
        }
        Ok(Mesh {
            nex,
            ney,
            lx,
            ly,
            thickness,
            coords,
            elements,
        })
    }

    /// Same geometry with nodes relabelled: node `old` becomes `new_of_old[old]`.
    ///
    /// Element order is unchanged. Edge and nearest-node queries are geometric
    /// and follow the relabelling; `grid_node` keeps the original numbering.
    pub fn renumbered(&self, new_of_old: &[usize]) -> Mesh {
        assert_eq!(new_of_old.len(), self.n_nodes());
        let mut coords = vec![[0.0; 2]; self.n_nodes()];
        for (old, &new) in new_of_old.iter().enumerate() {
            coords[new] = self.coords[old];
        }
        let elements = self
            .elements
            .iter()
            .map(|e| [new_of_old[e[0]], new_of_old[e[1]], new_of_old[e[2]], new_of_old[e[3]]])
            .collect();
        Mesh {
            coords,
            elements,
            ..self.clone()
        }
    }

    pub fn nex(&self) -> usize {
        self.nex
    }

    pub fn ney(&self) -> usize {
        self.ney
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    /// Element width and height.
    pub fn element_size(&self) -> (f64, f64) {
        (self.lx / self.nex as f64, self.ly / self.ney as f64)
    }

    /// Characteristic element size `h = min(dx, dy)`.
    pub fn h(&self) -> f64 {
        let (dx, dy) = self.element_size();
        dx.min(dy)
    }

    /// Grid position `(i, j)` to node id, for the original numbering.
    pub fn grid_node(&self, i: usize, j: usize) -> usize {
        j * (self.nex + 1) + i
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        self.elements[e]
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        let n = self.elements[e];
        [self.coords[n[0]], self.coords[n[1]], self.coords[n[2]], self.coords[n[3]]]
    }

    /// Displacement DOFs of element `e` in the order `[u0x, u0y, u1x, ...]`.
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.elements[e];
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let xy = self.element_coords(e);
        let mut c = [0.0; 2];
        for p in &xy {
            c[0] += 0.25 * p[0];
            c[1] += 0.25 * p[1];
        }
        c
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let p = self.element_coords(e);
        // shoelace
        0.5 * (0..4)
            .map(|a| {
                let b = (a + 1) % 4;
                p[a][0] * p[b][1] - p[b][0] * p[a][1]
            })
            .sum::<f64>()
    }

    /// Element volumes (area × thickness).
    pub fn element_volumes(&self) -> Vec<f64> {
        (0..self.n_elements())
            .map(|e| self.element_area(e) * self.thickness)
            .collect()
    }

    /// Nodes on one side of the domain, ordered by increasing coordinate.
    pub fn edge_nodes(&self, edge: Edge) -> Vec<usize> {
        let tol = 1e-9 * self.lx.max(self.ly);
        let mut nodes: Vec<usize> = (0..self.n_nodes())
            .filter(|&n| {
                let [x, y] = self.coords[n];
                match edge {
                    Edge::Left => x.abs() < tol,
                    Edge::Right => (x - self.lx).abs() < tol,
                    Edge::Bottom => y.abs() < tol,
                    Edge::Top => (y - self.ly).abs() < tol,
                }
            })
            .collect();
        let along = |n: &usize| match edge {
            Edge::Left | Edge::Right => self.coords[*n][1],
            Edge::Bottom | Edge::Top => self.coords[*n][0],
        };
        nodes.sort_by(|a, b| along(a).total_cmp(&along(b)));
        nodes
    }

    /// Node closest to `point`; ties go to the lowest id.
    pub fn nearest_node(&self, point: [f64; 2]) -> usize {
        let d2 = |n: usize| {
            let c = self.coords[n];
            (c[0] - point[0]).powi(2) + (c[1] - point[1]).powi(2)
        };
        (0..self.n_nodes())
            .min_by(|&a, &b| d2(a).total_cmp(&d2(b)).then(a.cmp(&b)))
            .unwrap()
    }

    /// Checks the connectivity invariants: distinct nodes and positive
    /// Jacobian at every Gauss point (which implies counter-clockwise order).
    pub fn validate(&self) -> Result<()> {
        for e in 0..self.n_elements() {
            let n = self.elements[e];
            for a in 0..4 {
                for b in a + 1..4 {
                    if n[a] == n[b] {
                        return Err(Error::config(format!("element {e} repeats node {}", n[a])));
                    }
                }
            }
            shape::gauss_points(&self.element_coords(e))
                .map_err(|_| Error::config(format!("element {e} has a non-positive Jacobian")))?;
        }
        Ok(())
    }
}
