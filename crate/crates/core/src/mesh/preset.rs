//! Problem presets: pressure boundaries, supports, passive regions and the
//! output spring for the inverter, gripper and contractor mechanisms.
//!
//! A [`PresetSpec`] describes a problem geometrically (edges, rectangles in
//! metres, points) and is what preset files contain. Resolving it against a
//! [`Mesh`] produces a [`ProblemPreset`] holding node, DOF and element ids.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, Mesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetKind {
    Inverter,
    Gripper,
    Contractor,
}

impl std::str::FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverter" => Ok(PresetKind::Inverter),
            "gripper" => Ok(PresetKind::Gripper),
            "contractor" => Ok(PresetKind::Contractor),
            other => Err(Error::config(format!(
                "unknown preset '{other}' (expected inverter, gripper or contractor)"
            ))),
        }
    }
}

impl std::fmt::Display for PresetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PresetKind::Inverter => "inverter",
            PresetKind::Gripper => "gripper",
            PresetKind::Contractor => "contractor",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Which end of an edge a clamp starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClampEnd {
    /// End with the smaller coordinate along the edge.
    Low,
    /// End with the larger coordinate along the edge.
    High,
}

/// Fully fixed patch of nodes along an edge, measured in element lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClampSpec {
    pub edge: Edge,
    pub end: ClampEnd,
    pub elements: usize,
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]` in metres. An element
/// belongs to it when its centroid does.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lx: f64,
    pub ly: f64,
    #[serde(default = "default_thickness")]
    pub thickness: f64,
}

fn default_thickness() -> f64 {
    0.001
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSpec {
    /// Edges held at the input pressure.
    pub pressure_input: Vec<Edge>,
    /// Edges held at zero pressure.
    pub pressure_zero: Vec<Edge>,
    /// Symmetry edge: roller support and natural zero-flux condition.
    #[serde(default)]
    pub symmetry: Option<Edge>,
    #[serde(default)]
    pub clamps: Vec<ClampSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassiveSpec {
    #[serde(default)]
    pub solid: Vec<Rect>,
    #[serde(default)]
    pub void: Vec<Rect>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringSpec {
    /// Workpiece stiffness at the output DOF (N/m).
    pub stiffness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output point; snapped to the nearest node.
    pub x: f64,
    pub y: f64,
    pub axis: Axis,
    /// Desired direction of motion along `axis`, +1 or -1.
    pub direction: f64,
    /// Magnitude of the unit dummy load (N).
    #[serde(default = "default_dummy")]
    pub dummy_load: f64,
}

fn default_dummy() -> f64 {
    1.0
}

/// Geometric problem description; the schema of preset files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub domain: DomainSpec,
    pub bcs: BcSpec,
    #[serde(default)]
    pub passive: PassiveSpec,
    pub spring: SpringSpec,
    pub output: OutputSpec,
}

/// Default clamp length in elements for the built-in presets.
pub const DEFAULT_CLAMP_ELEMENTS: usize = 2;

impl PresetSpec {
    /// Built-in half-domain presets on `lx × ly`.
    pub fn builtin(kind: PresetKind, lx: f64, ly: f64, thickness: f64) -> PresetSpec {
        let clamp = |edge, end| ClampSpec {
            edge,
            end,
            elements: DEFAULT_CLAMP_ELEMENTS,
        };
        let domain = DomainSpec { lx, ly, thickness };
        let spring = SpringSpec { stiffness: 1e4 };
        match kind {
            PresetKind::Inverter => PresetSpec {
                domain,
                bcs: BcSpec {
                    pressure_input: vec![Edge::Left],
                    pressure_zero: vec![Edge::Top, Edge::Right],
                    symmetry: Some(Edge::Bottom),
                    clamps: vec![clamp(Edge::Left, ClampEnd::High), clamp(Edge::Left, ClampEnd::Low)],
                },
                passive: PassiveSpec::default(),
                spring,
                output: OutputSpec {
                    x: lx,
                    y: 0.0,
                    axis: Axis::X,
                    direction: -1.0,
                    dummy_load: 1.0,
                },
            },
            PresetKind::Gripper => {
                let a = lx / 5.0;
                let b = lx / 40.0;
                PresetSpec {
                    domain,
                    bcs: BcSpec {
                        pressure_input: vec![Edge::Left],
                        pressure_zero: vec![Edge::Top, Edge::Right],
                        symmetry: Some(Edge::Bottom),
                        clamps: vec![
                            clamp(Edge::Left, ClampEnd::High),
                            clamp(Edge::Left, ClampEnd::Low),
                        ],
                    },
                    passive: PassiveSpec {
                        solid: vec![Rect {
                            x0: lx - a,
                            y0: a,
                            x1: lx,
                            y1: a + b,
                        }],
                        void: vec![Rect {
                            x0: lx - a,
                            y0: 0.0,
                            x1: lx,
                            y1: a,
                        }],
                    },
                    spring,
                    output: OutputSpec {
                        x: lx,
                        y: a,
                        axis: Axis::Y,
                        direction: -1.0,
                        dummy_load: 1.0,
                    },
                }
            }
            PresetKind::Contractor => {
                let w = lx / 40.0;
                let hgt = ly / 4.0;
                let block = Rect {
                    x0: 0.5 * (lx - w),
                    y0: 0.5 * (ly - hgt),
                    x1: 0.5 * (lx + w),
                    y1: 0.5 * (ly + hgt),
                };
                PresetSpec {
                    domain,
                    bcs: BcSpec {
                        pressure_input: vec![Edge::Left, Edge::Right],
                        pressure_zero: vec![Edge::Top],
                        symmetry: Some(Edge::Bottom),
                        clamps: vec![
                            clamp(Edge::Left, ClampEnd::High),
                            clamp(Edge::Right, ClampEnd::High),
                        ],
                    },
                    passive: PassiveSpec {
                        solid: vec![block],
                        void: vec![],
                    },
                    spring,
                    output: OutputSpec {
                        x: 0.5 * lx,
                        y: block.y0,
                        axis: Axis::Y,
                        direction: -1.0,
                        dummy_load: 1.0,
                    },
                }
            }
        }
    }

    pub fn from_toml_str(text: &str) -> Result<PresetSpec> {
        toml::from_str(text).map_err(|e| Error::config(format!("preset file: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<PresetSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("preset serialization")
    }

    /// Resolves the geometric description to node, DOF and element ids.
    pub fn resolve(&self, mesh: &Mesh, input_pressure: f64) -> Result<ProblemPreset> {
        let tol = 1e-9 * mesh.lx().max(mesh.ly());
        if (self.domain.lx - mesh.lx()).abs() > tol || (self.domain.ly - mesh.ly()).abs() > tol {
            return Err(Error::config(format!(
                "preset domain {}×{} does not match mesh {}×{}",
                self.domain.lx,
                self.domain.ly,
                mesh.lx(),
                mesh.ly()
            )));
        }
        if self.bcs.pressure_input.is_empty() {
            return Err(Error::config("bcs.pressure_input must list at least one edge"));
        }
        for e in self.bcs.pressure_input.iter().chain(&self.bcs.pressure_zero) {
            if Some(*e) == self.bcs.symmetry {
                return Err(Error::config(format!(
                    "edge {e:?} cannot carry pressure and be the symmetry edge"
                )));
            }
        }
        let input: BTreeSet<usize> = self
            .bcs
            .pressure_input
            .iter()
            .flat_map(|&e| mesh.edge_nodes(e))
            .collect();
        let zero: BTreeSet<usize> = self
            .bcs
            .pressure_zero
            .iter()
            .flat_map(|&e| mesh.edge_nodes(e))
            .filter(|n| !input.contains(n))
            .collect();

        let mut fixed = BTreeSet::new();
        for c in &self.bcs.clamps {
            let nodes = mesh.edge_nodes(c.edge);
            let step = match c.edge {
                Edge::Left | Edge::Right => mesh.element_size().1,
                Edge::Bottom | Edge::Top => mesh.element_size().0,
            };
            let extent = c.elements as f64 * step + tol;
            let along = |n: usize| match c.edge {
                Edge::Left | Edge::Right => mesh.coords()[n][1],
                Edge::Bottom | Edge::Top => mesh.coords()[n][0],
            };
            let (lo, hi) = (along(nodes[0]), along(*nodes.last().unwrap()));
            for &n in &nodes {
                let d = match c.end {
                    ClampEnd::Low => along(n) - lo,
                    ClampEnd::High => hi - along(n),
                };
                if d <= extent {
                    fixed.insert(2 * n);
                    fixed.insert(2 * n + 1);
                }
            }
        }
        if let Some(sym) = self.bcs.symmetry {
            let comp = match sym {
                Edge::Bottom | Edge::Top => 1,
                Edge::Left | Edge::Right => 0,
            };
            for n in mesh.edge_nodes(sym) {
                fixed.insert(2 * n + comp);
            }
        }

        let select = |rects: &[Rect]| -> Vec<usize> {
            (0..mesh.n_elements())
                .filter(|&e| rects.iter().any(|r| r.contains(mesh.centroid(e), tol)))
                .collect()
        };
        let passive_solid = select(&self.passive.solid);
        let passive_void = select(&self.passive.void);

        let out_node = mesh.nearest_node([self.output.x, self.output.y]);
        let comp = match self.output.axis {
            Axis::X => 0,
            Axis::Y => 1,
        };
        if self.output.direction.abs() != 1.0 {
            return Err(Error::config("output.direction must be +1 or -1"));
        }
        if !(self.spring.stiffness >= 0.0) {
            return Err(Error::config("spring.stiffness must be non-negative"));
        }
        Ok(ProblemPreset {
            pressure_input: (input.into_iter().collect(), input_pressure),
            pressure_zero: zero.into_iter().collect(),
            fixed_dofs: fixed.into_iter().collect(),
            passive_solid,
            passive_void,
            symmetry: self.bcs.symmetry,
            output_dof: 2 * out_node + comp,
            output_direction: self.output.direction,
            spring_stiffness: self.spring.stiffness,
            dummy_load: self.output.dummy_load,
        })
    }
}

/// Boundary data resolved to mesh ids.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemPreset {
    /// Nodes held at the input pressure, and that pressure (N/m²).
    pub pressure_input: (Vec<usize>, f64),
    /// Nodes held at zero pressure.
    pub pressure_zero: Vec<usize>,
    /// Sorted structural DOFs with zero displacement.
    pub fixed_dofs: Vec<usize>,
    pub passive_solid: Vec<usize>,
    pub passive_void: Vec<usize>,
    pub symmetry: Option<Edge>,
    pub output_dof: usize,
    /// Desired sign of motion at the output DOF.
    pub output_direction: f64,
    /// Spring stiffness at the output DOF (N/m).
    pub spring_stiffness: f64,
    /// Dummy load magnitude (N).
    pub dummy_load: f64,
}

impl ProblemPreset {
    pub fn input_pressure(&self) -> f64 {
        self.pressure_input.1
    }

    /// Flags and prescribed values for the pressure DOFs.
    pub fn pressure_dirichlet(&self, n_nodes: usize) -> (Vec<bool>, Vec<f64>) {
        let mut fixed = vec![false; n_nodes];
        let mut values = vec![0.0; n_nodes];
        for &n in &self.pressure_input.0 {
            fixed[n] = true;
            values[n] = self.pressure_input.1;
        }
        for &n in &self.pressure_zero {
            fixed[n] = true;
        }
        (fixed, values)
    }

    pub fn fixed_mask(&self, n_dofs: usize) -> Vec<bool> {
        let mut m = vec![false; n_dofs];
        for &d in &self.fixed_dofs {
            m[d] = true;
        }
        m
    }

    /// Dummy load vector: `dummy_load` along the desired output direction.
    pub fn dummy_load_vector(&self, n_dofs: usize) -> Vec<f64> {
        let mut f = vec![0.0; n_dofs];
        f[self.output_dof] = self.dummy_load * self.output_direction;
        f
    }

    /// Per-element passivity: `Some(1.0)` solid, `Some(0.0)` void, `None` design.
    pub fn passive_values(&self, n_elements: usize) -> Vec<Option<f64>> {
        let mut p = vec![None; n_elements];
        for &e in &self.passive_solid {
            p[e] = Some(1.0);
        }
        for &e in &self.passive_void {
            p[e] = Some(0.0);
        }
        p
    }
}

/// A mesh annotated with a validated preset.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub preset: ProblemPreset,
}

/// Attaches `preset` to `mesh` after checking ids and set invariants.
pub fn apply_preset(mesh: Mesh, preset: ProblemPreset) -> Result<Problem> {
    let nn = mesh.n_nodes();
    let nd = mesh.n_dofs();
    let ne = mesh.n_elements();
    let bad = |what: &str, id: usize, lim: usize| {
        Error::config(format!("{what} id {id} out of range (limit {lim})"))
    };
    for &n in preset.pressure_input.0.iter().chain(&preset.pressure_zero) {
        if n >= nn {
            return Err(bad("pressure node", n, nn));
        }
    }
    for &d in &preset.fixed_dofs {
        if d >= nd {
            return Err(bad("fixed DOF", d, nd));
        }
    }
    for &e in preset.passive_solid.iter().chain(&preset.passive_void) {
        if e >= ne {
            return Err(bad("passive element", e, ne));
        }
    }
    if preset.output_dof >= nd {
        return Err(bad("output DOF", preset.output_dof, nd));
    }
    if preset.pressure_input.0.is_empty() {
        return Err(Error::config("no pressure input nodes"));
    }
    let input: BTreeSet<_> = preset.pressure_input.0.iter().collect();
    if preset.pressure_zero.iter().any(|n| input.contains(n)) {
        return Err(Error::config("pressure input and zero-pressure node sets overlap"));
    }
    if preset.fixed_dofs.binary_search(&preset.output_dof).is_ok() {
        return Err(Error::config("output DOF is fixed"));
    }
    let solid: BTreeSet<_> = preset.passive_solid.iter().collect();
    if preset.passive_void.iter().any(|e| solid.contains(e)) {
        return Err(Error::config("passive solid and void element sets overlap"));
    }
    Ok(Problem { mesh, preset })
}

impl Problem {
    /// Builds a grid and applies a built-in preset in one step.
    pub fn builtin(
        kind: PresetKind,
        nex: usize,
        ney: usize,
        lx: f64,
        ly: f64,
        thickness: f64,
        input_pressure: f64,
    ) -> Result<Problem> {
        let mesh = Mesh::build_grid(nex, ney, lx, ly, thickness)?;
        let preset = PresetSpec::builtin(kind, lx, ly, thickness).resolve(&mesh, input_pressure)?;
        apply_preset(mesh, preset)
    }
}
