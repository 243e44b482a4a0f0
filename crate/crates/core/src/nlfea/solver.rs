//! Internal forces, tangents and the load-stepped Newton solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elasticity::element_stiffness;
use crate::error::{Error, Result};
use crate::linalg::{norm, solve_general, AssemblyPattern, CsrMatrix, SolverKind, SpdSolver};
use crate::mesh::shape::{self, PointData};

use super::follower::{follower_load, FollowerBoundary};
use super::material::{plane_stress_from_gradient, HyperelasticParams, Mat2};
use super::structure::Structure;

fn tag_inversion(err: Error, element: usize) -> Error {
    match err {
        Error::Inversion { jacobian, .. } => Error::Inversion { element, jacobian },
        Error::Numerical { residual, .. } if residual <= 0.0 => Error::Inversion {
            element,
            jacobian: residual,
        },
        other => other,
    }
}

/// Displacement gradient `H = F − I = Σ u_I ⊗ ∂N_I/∂X` at a reference point.
fn displacement_gradient(p: &PointData, ue: &[[f64; 2]; 4]) -> Mat2 {
    let mut f = [[0.0; 2]; 2];
    for a in 0..4 {
        for i in 0..2 {
            for j in 0..2 {
                f[i][j] += ue[a][i] * p.dn[a][j];
            }
        }
    }
    f
}

/// Reference coordinates, nodal displacements and current coordinates.
fn element_state(s: &Structure, e: usize, u: &[f64]) -> ([[f64; 2]; 4], [[f64; 2]; 4], [[f64; 2]; 4]) {
    let reference = s.element_coords(e);
    let ue = s.elements[e].map(|n| [u[2 * n], u[2 * n + 1]]);
    let mut x = reference;
    for a in 0..4 {
        x[a][0] += ue[a][0];
        x[a][1] += ue[a][1];
    }
    (reference, ue, x)
}

/// Element internal force `∫ B_ULᵀ σ dv` evaluated on the deformed element,
/// with the current thickness `t·λ₃`.
pub fn element_internal_force(s: &Structure, e: usize, u: &[f64], m: &HyperelasticParams) -> Result<[f64; 8]> {
    let (reference, ue, x) = element_state(s, e, u);
    let mut f = [0.0; 8];
    for g in shape::GAUSS_2X2 {
        let p0 = shape::evaluate(&reference, g[0], g[1])?;
        let pt = shape::evaluate(&x, g[0], g[1]).map_err(|err| tag_inversion(err, e))?;
        let hg = displacement_gradient(&p0, &ue);
        let mp = plane_stress_from_gradient(&hg, m).map_err(|err| tag_inversion(err, e))?;
        let dv = s.thickness * mp.stretch * pt.det_j;
        for a in 0..4 {
            for i in 0..2 {
                f[2 * a + i] += (mp.cauchy[i][0] * pt.dn[a][0] + mp.cauchy[i][1] * pt.dn[a][1]) * dv;
            }
        }
    }
    Ok(f)
}

/// Element internal force `∫ B₀ᵀ P dV` and tangent on the reference element.
pub fn element_reference_response(
    s: &Structure,
    e: usize,
    u: &[f64],
    m: &HyperelasticParams,
) -> Result<([f64; 8], [f64; 64], f64)> {
    let (reference, ue, _) = element_state(s, e, u);
    let mut f = [0.0; 8];
    let mut k = [0.0; 64];
    let mut energy = 0.0;
    for g in shape::GAUSS_2X2 {
        let p0 = shape::evaluate(&reference, g[0], g[1])?;
        let hg = displacement_gradient(&p0, &ue);
        let mp = plane_stress_from_gradient(&hg, m).map_err(|err| tag_inversion(err, e))?;
        let dv = s.thickness * p0.det_j;
        energy += mp.energy * dv;
        for a in 0..4 {
            for i in 0..2 {
                f[2 * a + i] += (mp.piola[i][0] * p0.dn[a][0] + mp.piola[i][1] * p0.dn[a][1]) * dv;
                for b in 0..4 {
                    for kk in 0..2 {
                        let mut v = 0.0;
                        for jj in 0..2 {
                            for l in 0..2 {
                                v += p0.dn[a][jj] * mp.tangent[i][jj][kk][l] * p0.dn[b][l];
                            }
                        }
                        k[(2 * a + i) * 8 + 2 * b + kk] += v * dv;
                    }
                }
            }
        }
    }
    Ok((f, k, energy))
}

/// Global internal force on the deformed configuration, springs excluded.
pub fn internal_force(s: &Structure, u: &[f64], m: &HyperelasticParams) -> Result<Vec<f64>> {
    let local: Vec<[f64; 8]> = (0..s.elements.len())
        .into_par_iter()
        .map(|e| element_internal_force(s, e, u, m))
        .collect::<Result<_>>()?;
    let mut f = vec![0.0; s.n_dofs()];
    for (e, fe) in local.iter().enumerate() {
        for (r, d) in s.element_dofs(e).iter().enumerate() {
            f[*d] += fe[r];
        }
    }
    Ok(f)
}

/// Total stored energy of the elements.
pub fn strain_energy_total(s: &Structure, u: &[f64], m: &HyperelasticParams) -> Result<f64> {
    let energies: Vec<f64> = (0..s.elements.len())
        .into_par_iter()
        .map(|e| element_reference_response(s, e, u, m).map(|r| r.2))
        .collect::<Result<_>>()?;
    Ok(energies.iter().sum())
}

/// Settings for the load-stepped Newton solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    pub load_steps: usize,
    /// Convergence on `‖R‖ / ‖F_ext‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Halvings of a failed load increment before giving up.
    pub max_halvings: usize,
    /// Include the follower-load tangent in the Jacobian.
    pub follower_tangent: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            load_steps: 10,
            tolerance: 1e-8,
            max_iterations: 30,
            max_halvings: 4,
            follower_tangent: true,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if self.load_steps == 0 || self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::config("load_steps, max_iterations and tolerance must be positive"));
        }
        Ok(())
    }
}

/// One converged load level.
#[derive(Clone, Debug)]
pub struct LoadStep {
    pub pressure: f64,
    pub u: Vec<f64>,
    pub output_displacement: f64,
    pub iterations: usize,
    /// `‖R‖ / ‖F_ext‖` after each Newton update, starting with the initial residual.
    pub residuals: Vec<f64>,
}

/// Result of a pressure ramp; `history` holds every converged level.
#[derive(Clone, Debug)]
pub struct NonlinearResult {
    pub target_pressure: f64,
    pub history: Vec<LoadStep>,
    pub converged: bool,
    pub failure: Option<String>,
}

impl NonlinearResult {
    pub fn final_step(&self) -> Option<&LoadStep> {
        self.history.last()
    }

    /// Output displacement at the target pressure, if it was reached.
    pub fn output_displacement(&self) -> Option<f64> {
        if self.converged {
            self.final_step().map(|s| s.output_displacement)
        } else {
            None
        }
    }
}

/// Nonlinear verification model: structure, pressure boundary and material.
pub struct NonlinearModel<'a> {
    pub structure: &'a Structure,
    pub edges: &'a [[usize; 2]],
    pub material: HyperelasticParams,
    pattern: AssemblyPattern,
    fixed: Vec<bool>,
}

impl<'a> NonlinearModel<'a> {
    pub fn new(structure: &'a Structure, edges: &'a [[usize; 2]], material: HyperelasticParams) -> Result<Self> {
        structure.validate()?;
        material.validate()?;
        let nn = structure.n_nodes();
        if edges.iter().flatten().any(|&n| n >= nn) {
            return Err(Error::config("pressurized edge references a missing node"));
        }
        let dofs: Vec<Vec<usize>> = (0..structure.elements.len())
            .map(|e| structure.element_dofs(e).to_vec())
            .collect();
        let pattern = AssemblyPattern::new(structure.n_dofs(), &dofs);
        Ok(NonlinearModel {
            structure,
            edges,
            material,
            pattern,
            fixed: structure.fixed_mask(),
        })
    }

    fn boundary(&self, pressure: f64) -> FollowerBoundary {
        FollowerBoundary {
            edges: self.edges.to_vec(),
            pressure,
        }
    }

    /// Residual `F_int + k_s u_out − F_ext` on free DOFs, and `‖F_ext‖`.
    pub fn residual(&self, u: &[f64], pressure: f64) -> Result<(Vec<f64>, f64)> {
        let s = self.structure;
        let mut r = internal_force(s, u, &self.material)?;
        let (fext, _) = follower_load(&self.boundary(pressure), &s.current(u), s.thickness)?;
        r[s.output_dof] += s.spring_stiffness * u[s.output_dof];
        let mut fnorm = 0.0;
        for d in 0..r.len() {
            if self.fixed[d] {
                r[d] = 0.0;
            } else {
                r[d] -= fext[d];
                fnorm += fext[d] * fext[d];
            }
        }
        Ok((r, fnorm.sqrt()))
    }

    /// Jacobian of [`residual`](Self::residual), constrained rows set to identity.
    pub fn tangent(&self, u: &[f64], pressure: f64, follower: bool) -> Result<CsrMatrix> {
        let s = self.structure;
        let local: Vec<[f64; 64]> = (0..s.elements.len())
            .into_par_iter()
            .map(|e| element_reference_response(s, e, u, &self.material).map(|r| r.1))
            .collect::<Result<_>>()?;
        let mut k = self.pattern.assemble(|e| local[e].to_vec());
        k.add_to(s.output_dof, s.output_dof, s.spring_stiffness)?;
        if follower {
            let (_, kext) = follower_load(&self.boundary(pressure), &s.current(u), s.thickness)?;
            for (r, c, v) in kext {
                k.add_to(r, c, -v)?;
            }
        }
        Ok(k.constrained(&self.fixed))
    }

    /// Newton iterations at fixed pressure starting from `u`.
    fn equilibrate(&self, u: &mut Vec<f64>, pressure: f64, settings: &NewtonSettings) -> Result<(usize, Vec<f64>)> {
        let mut history = Vec::new();
        for iter in 0..=settings.max_iterations {
            let (r, fnorm) = self.residual(u, pressure)?;
            let rn = norm(&r);
            let rel = if fnorm > 0.0 { rn / fnorm } else { rn };
            history.push(rel);
            if !rel.is_finite() {
                return Err(Error::numerical("Newton residual is not finite", rel));
            }
            if rel <= settings.tolerance || rn == 0.0 {
                return Ok((iter, history));
            }
            if iter == settings.max_iterations {
                break;
            }
            let k = self.tangent(u, pressure, settings.follower_tangent)?;
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let du = solve_general(&k, &rhs)?;
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
            }
        }
        Err(Error::numerical(
            format!("Newton did not converge in {} iterations", settings.max_iterations),
            history.last().copied().unwrap_or(f64::NAN),
        ))
    }

    /// Ramps the pressure to `target` in `load_steps` equal increments,
    /// halving an increment (up to `max_halvings` times) when Newton fails.
    pub fn solve(&self, target: f64, settings: &NewtonSettings) -> Result<NonlinearResult> {
        settings.validate()?;
        if !(target >= 0.0) {
            return Err(Error::config(format!("target pressure must be non-negative, got {target}")));
        }
        let s = self.structure;
        let mut u = vec![0.0; s.n_dofs()];
        let mut history = Vec::new();
        let mut level = 0.0;
        let mut failure = None;
        'steps: for k in 1..=settings.load_steps {
            let goal = target * k as f64 / settings.load_steps as f64;
            let mut increment = goal - level;
            let mut halvings = 0;
            loop {
                let next = if level + increment >= goal { goal } else { level + increment };
                let mut trial = u.clone();
                match self.equilibrate(&mut trial, next, settings) {
                    Ok((iterations, residuals)) => {
                        u = trial;
                        level = next;
                        if level >= goal {
                            history.push(LoadStep {
                                pressure: level,
                                output_displacement: u[s.output_dof],
                                u: u.clone(),
                                iterations,
                                residuals,
                            });
                            break;
                        }
                    }
                    Err(err) => {
                        if halvings == settings.max_halvings {
                            failure = Some(format!("at pressure {next:.6e}: {err}"));
                            break 'steps;
                        }
                        halvings += 1;
                        increment *= 0.5;
                        log::debug!("halving load increment to {increment:.3e} after: {err}");
                    }
                }
            }
        }
        Ok(NonlinearResult {
            target_pressure: target,
            converged: failure.is_none(),
            history,
            failure,
        })
    }
}

/// Small-strain linear solution on the same structure and edges.
///
/// Uses the plane-stress linear element with the modulus and Poisson's ratio
/// that the neo-Hookean constants reduce to at the reference state.
pub fn linear_response(s: &Structure, edges: &[[usize; 2]], material: &HyperelasticParams, pressure: f64) -> Result<Vec<f64>> {
    s.validate()?;
    let nu = material.lame / (2.0 * (material.lame + material.shear));
    let young = 2.0 * material.shear * (1.0 + nu);
    let dofs: Vec<Vec<usize>> = (0..s.elements.len()).map(|e| s.element_dofs(e).to_vec()).collect();
    let pattern = AssemblyPattern::new(s.n_dofs(), &dofs);
    let local: Vec<[f64; 64]> = (0..s.elements.len())
        .map(|e| element_stiffness(young, nu, s.thickness, &s.element_coords(e)))
        .collect::<Result<_>>()?;
    let mut k = pattern.assemble(|e| local[e].to_vec());
    k.add_to(s.output_dof, s.output_dof, s.spring_stiffness)?;
    let fixed = s.fixed_mask();
    let boundary = FollowerBoundary {
        edges: edges.to_vec(),
        pressure,
    };
    let (mut f, _) = follower_load(&boundary, &s.coords, s.thickness)?;
    for (d, fv) in f.iter_mut().enumerate() {
        if fixed[d] {
            *fv = 0.0;
        }
    }
    SpdSolver::new(k.constrained(&fixed), SolverKind::Direct)?.solve(&f)
}

/// Output displacements for a set of pressures, one row per design.
#[derive(Clone, Debug, Default)]
pub struct SweepTable {
    pub pressures: Vec<f64>,
    /// `(label, Δ per pressure in m; None where the solve failed)`.
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl SweepTable {
    /// CSV with pressures in bar as columns and Δ in mm as values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("design");
        for p in &self.pressures {
            out.push_str(&format!(",{} bar", p / 1e5));
        }
        out.push('\n');
        for (label, values) in &self.rows {
            out.push_str(label);
            for v in values {
                match v {
                    Some(d) => out.push_str(&format!(",{:.6}", d * 1e3)),
                    None => out.push_str(",failed"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs independent pressure ramps concurrently.
pub fn pressure_sweep(model: &NonlinearModel<'_>, pressures: &[f64], settings: &NewtonSettings) -> Result<Vec<NonlinearResult>> {
    pressures.par_iter().map(|&p| model.solve(p, settings)).collect()
}
