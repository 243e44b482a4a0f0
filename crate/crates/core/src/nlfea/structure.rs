//! Solid-only quad models for verification, including extraction of a
//! thresholded design from the optimization grid.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::mesh::Problem;

use super::follower::FollowerBoundary;

/// A quad mesh with supports and an optional output spring.
#[derive(Clone, Debug)]
pub struct Structure {
    pub coords: Vec<[f64; 2]>,
    /// Counter-clockwise node lists.
    pub elements: Vec<[usize; 4]>,
    pub thickness: f64,
    pub fixed_dofs: Vec<usize>,
    pub output_dof: usize,
    pub output_direction: f64,
    pub spring_stiffness: f64,
}

impl Structure {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.coords.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        self.elements[e].map(|n| self.coords[n])
    }

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

    pub fn fixed_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_dofs()];
        for &d in &self.fixed_dofs {
            m[d] = true;
        }
        m
    }

    /// Deformed nodal coordinates.
    pub fn current(&self, u: &[f64]) -> Vec<[f64; 2]> {
        self.coords
            .iter()
            .enumerate()
            .map(|(n, x)| [x[0] + u[2 * n], x[1] + u[2 * n + 1]])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let nn = self.n_nodes();
        if self.elements.is_empty() {
            return Err(Error::config("structure has no elements"));
        }
        if self.elements.iter().flatten().any(|&n| n >= nn) {
            return Err(Error::config("element references a missing node"));
        }
        if self.fixed_dofs.iter().any(|&d| d >= 2 * nn) || self.output_dof >= 2 * nn {
            return Err(Error::config("DOF id out of range"));
        }
        if self.fixed_dofs.is_empty() {
            return Err(Error::config("structure has no supports"));
        }
        if !(self.thickness > 0.0) || self.spring_stiffness < 0.0 {
            return Err(Error::config("thickness must be positive and spring stiffness non-negative"));
        }
        Ok(())
    }
}

/// A design extracted from the optimization grid.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub structure: Structure,
    pub boundary: FollowerBoundary,
    /// Grid element id of each kept element.
    pub grid_elements: Vec<usize>,
    /// Grid node id of each structure node.
    pub grid_nodes: Vec<usize>,
}

impl Extraction {
    /// Replaces the detected loaded edges with `grid_edges`, given as grid
    /// node pairs. Both nodes of every edge must belong to the extracted
    /// design.
    pub fn override_edges(&mut self, grid_edges: &[[usize; 2]]) -> Result<()> {
        let max = self.grid_nodes.iter().copied().max().unwrap_or(0);
        let mut local = vec![usize::MAX; max + 1];
        for (k, &n) in self.grid_nodes.iter().enumerate() {
            local[n] = k;
        }
        let find = |n: usize| match local.get(n) {
            Some(&k) if k != usize::MAX => Ok(k),
            _ => Err(Error::config(format!("pressure edge node {n} is not part of the extracted design"))),
        };
        let mut edges = Vec::with_capacity(grid_edges.len());
        for &[a, b] in grid_edges {
            if a == b {
                return Err(Error::config(format!("pressure edge [{a}, {b}] is degenerate")));
            }
            edges.push([find(a)?, find(b)?]);
        }
        self.boundary.edges = edges;
        Ok(())
    }
}

/// Element neighbours across the four counter-clockwise edges
/// (bottom, right, top, left) of a structured grid element.
fn grid_neighbours(e: usize, nex: usize, ney: usize) -> [Option<usize>; 4] {
    let (i, j) = (e % nex, e / nex);
    [
        (j > 0).then(|| e - nex),
        (i + 1 < nex).then(|| e + 1),
        (j + 1 < ney).then(|| e + nex),
        (i > 0).then(|| e - 1),
    ]
}

/// Keeps elements with `density ≥ threshold` that are edge-connected to a
/// support, and finds the edges loaded by the cavity pressure.
///
/// The cavity is the set of discarded cells reachable through shared edges
/// from cells touching a pressure-inlet node. A kept element edge is loaded
/// when the cell across it belongs to the cavity, or when it lies on the
/// domain boundary with both nodes on the inlet.
pub fn extract_design(problem: &Problem, density: &[f64], threshold: f64, pressure: f64) -> Result<Extraction> {
    let mesh = &problem.mesh;
    let preset = &problem.preset;
    let (nex, ney) = (mesh.nex(), mesh.ney());
    let ne = mesh.n_elements();
    if density.len() != ne {
        return Err(Error::Internal(format!(
            "density has {} entries for {ne} elements",
            density.len()
        )));
    }
    let solid: Vec<bool> = density.iter().map(|&r| r >= threshold).collect();

    let supported_nodes: BTreeSet<usize> = preset.fixed_dofs.iter().map(|d| d / 2).collect();
    let mut keep = vec![false; ne];
    let mut seen = vec![false; ne];
    for start in 0..ne {
        if !solid[start] || seen[start] {
            continue;
        }
        let mut component = vec![start];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(e) = queue.pop_front() {
            for nb in grid_neighbours(e, nex, ney).into_iter().flatten() {
                if solid[nb] && !seen[nb] {
                    seen[nb] = true;
                    component.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        let anchored = component
            .iter()
            .any(|&e| mesh.element_nodes(e).iter().any(|n| supported_nodes.contains(n)));
        if anchored {
            for e in component {
                keep[e] = true;
            }
        }
    }
    let grid_elements: Vec<usize> = (0..ne).filter(|&e| keep[e]).collect();
    if grid_elements.is_empty() {
        return Err(Error::config(format!(
            "no supported material at threshold {threshold}"
        )));
    }

    let mut new_node = vec![usize::MAX; mesh.n_nodes()];
    let mut grid_nodes = Vec::new();
    for &e in &grid_elements {
        for n in mesh.element_nodes(e) {
            if new_node[n] == usize::MAX {
                new_node[n] = 0;
            }
        }
    }
    for (n, slot) in new_node.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = grid_nodes.len();
            grid_nodes.push(n);
        }
    }
    let coords = grid_nodes.iter().map(|&n| mesh.coords()[n]).collect();
    let elements = grid_elements
        .iter()
        .map(|&e| mesh.element_nodes(e).map(|n| new_node[n]))
        .collect();
    let fixed_dofs: Vec<usize> = preset
        .fixed_dofs
        .iter()
        .filter(|&&d| new_node[d / 2] != usize::MAX)
        .map(|&d| 2 * new_node[d / 2] + d % 2)
        .collect();
    let out_node = new_node[preset.output_dof / 2];
    if out_node == usize::MAX {
        return Err(Error::config("output node is not part of the extracted design"));
    }
    let structure = Structure {
        coords,
        elements,
        thickness: mesh.thickness(),
        fixed_dofs,
        output_dof: 2 * out_node + preset.output_dof % 2,
        output_direction: preset.output_direction,
        spring_stiffness: preset.spring_stiffness,
    };
    structure.validate()?;

    let inlet: BTreeSet<usize> = preset.pressure_input.0.iter().copied().collect();
    let sink: BTreeSet<usize> = preset.pressure_zero.iter().copied().collect();
    let mut cavity = vec![false; ne];
    let mut queue: VecDeque<usize> = (0..ne)
        .filter(|&e| !keep[e] && mesh.element_nodes(e).iter().any(|n| inlet.contains(n)))
        .collect();
    for &e in &queue {
        cavity[e] = true;
    }
    while let Some(e) = queue.pop_front() {
        for nb in grid_neighbours(e, nex, ney).into_iter().flatten() {
            if !keep[nb] && !cavity[nb] {
                cavity[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    let leaks = (0..ne).any(|e| cavity[e] && mesh.element_nodes(e).iter().any(|n| sink.contains(n)));
    if leaks {
        log::warn!("pressurized cavity reaches a zero-pressure boundary; the extracted design does not seal it");
    }

    let mut edges = Vec::new();
    for &e in &grid_elements {
        let nodes = mesh.element_nodes(e);
        for (side, nb) in grid_neighbours(e, nex, ney).into_iter().enumerate() {
            let (a, b) = (nodes[side], nodes[(side + 1) % 4]);
            let loaded = match nb {
                Some(c) => cavity[c],
                None => inlet.contains(&a) && inlet.contains(&b),
            };
            if loaded {
                edges.push([new_node[a], new_node[b]]);
            }
        }
    }
    if edges.is_empty() {
        log::warn!("extracted design has no pressurized edges");
    }
    Ok(Extraction {
        structure,
        boundary: FollowerBoundary { edges, pressure },
        grid_elements,
        grid_nodes,
    })
}
