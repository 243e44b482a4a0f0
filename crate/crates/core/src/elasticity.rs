//! Linear plane-stress analysis with modified SIMP interpolation and an
//! output spring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, AssemblyPattern, CsrMatrix, SolverKind, SpdSolver};
use crate::mesh::{shape, Mesh, ProblemPreset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Young's modulus of solid (N/m²).
    pub e_solid: f64,
    /// Young's modulus of void (N/m²).
    pub e_void: f64,
    pub poisson: f64,
    /// SIMP exponent.
    pub penalty: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            e_solid: 3e9,
            e_void: 3e3,
            poisson: 0.4,
            penalty: 3.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_void > 0.0 && self.e_void < self.e_solid) {
            return Err(Error::config("need 0 < E_void < E_solid"));
        }
        if !(0.0..0.5).contains(&self.poisson) {
            return Err(Error::config("Poisson's ratio must lie in [0, 0.5)"));
        }
        if !(self.penalty >= 1.0) {
            return Err(Error::config("SIMP penalty must be at least 1"));
        }
        Ok(())
    }
}

/// `E = E₀ + ρ̄^ζ (E₁ − E₀)`.
pub fn simp_modulus(rho: f64, m: &MaterialParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("density {rho} outside [0, 1]")));
    }
    Ok(m.e_void + rho.powf(m.penalty) * (m.e_solid - m.e_void))
}

pub fn simp_modulus_derivative(rho: f64, m: &MaterialParams) -> f64 {
    m.penalty * rho.powf(m.penalty - 1.0) * (m.e_solid - m.e_void)
}

/// Plane-stress Q4 stiffness (row-major 8×8) for modulus `e`.
pub fn element_stiffness(e: f64, poisson: f64, thickness: f64, xy: &[[f64; 2]; 4]) -> Result<[f64; 64]> {
    let c = e / (1.0 - poisson * poisson);
    let d = [[c, c * poisson, 0.0], [c * poisson, c, 0.0], [0.0, 0.0, c * (1.0 - poisson) / 2.0]];
    let mut k = [0.0; 64];
    for g in shape::gauss_points(xy)? {
        let mut b = [[0.0; 8]; 3];
        for a in 0..4 {
            b[0][2 * a] = g.dn[a][0];
            b[1][2 * a + 1] = g.dn[a][1];
            b[2][2 * a] = g.dn[a][1];
            b[2][2 * a + 1] = g.dn[a][0];
        }
        let w = g.det_j * thickness;
        let mut db = [[0.0; 8]; 3];
        for r in 0..3 {
            for j in 0..8 {
                db[r][j] = (0..3).map(|s| d[r][s] * b[s][j]).sum();
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                k[8 * i + j] += w * (0..3).map(|r| b[r][i] * db[r][j]).sum::<f64>();
            }
        }
    }
    for i in 0..8 {
        for j in i + 1..8 {
            let avg = 0.5 * (k[8 * i + j] + k[8 * j + i]);
            k[8 * i + j] = avg;
            k[8 * j + i] = avg;
        }
    }
    Ok(k)
}

/// Per-mesh stiffness data: unit-modulus element matrices, the DOF pattern
/// and the supports.
#[derive(Clone, Debug)]
pub struct ElasticModel {
    pattern: AssemblyPattern,
    element_dofs: Vec<[usize; 8]>,
    unit: Vec<[f64; 64]>,
    fixed: Vec<bool>,
    output_dof: usize,
    spring: f64,
}

impl ElasticModel {
    pub fn new(mesh: &Mesh, poisson: f64, preset: &ProblemPreset) -> Result<Self> {
        let unit = (0..mesh.n_elements())
            .map(|e| element_stiffness(1.0, poisson, mesh.thickness(), &mesh.element_coords(e)))
            .collect::<Result<Vec<_>>>()?;
        let element_dofs: Vec<[usize; 8]> = (0..mesh.n_elements()).map(|e| mesh.element_dofs(e)).collect();
        let lists: Vec<Vec<usize>> = element_dofs.iter().map(|d| d.to_vec()).collect();
        Ok(ElasticModel {
            pattern: AssemblyPattern::new(mesh.n_dofs(), &lists),
            element_dofs,
            unit,
            fixed: preset.fixed_mask(mesh.n_dofs()),
            output_dof: preset.output_dof,
            spring: preset.spring_stiffness,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.fixed.len()
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        self.element_dofs[e]
    }

    pub fn unit_stiffness(&self, e: usize) -> &[f64; 64] {
        &self.unit[e]
    }

    /// Global stiffness with spring, before support elimination.
    pub fn assemble_free(&self, rho: &[f64], m: &MaterialParams) -> Result<CsrMatrix> {
        if rho.len() != self.unit.len() {
            return Err(Error::Internal("density field size mismatch".into()));
        }
        let moduli = rho.iter().map(|&r| simp_modulus(r, m)).collect::<Result<Vec<_>>>()?;
        let mut k = self
            .pattern
            .assemble(|e| self.unit[e].iter().map(|v| moduli[e] * v).collect());
        k.add_to(self.output_dof, self.output_dof, self.spring)?;
        Ok(k)
    }

    /// Global stiffness with spring and supports eliminated.
    pub fn assemble(&self, rho: &[f64], m: &MaterialParams) -> Result<CsrMatrix> {
        Ok(self.assemble_free(rho, m)?.constrained(&self.fixed))
    }

    /// Factorizes `k` (already constrained) and solves the state and dummy
    /// systems with one factorization.
    pub fn solve(&self, k: CsrMatrix, load: &[f64], dummy: &[f64], kind: SolverKind) -> Result<ElasticSolution> {
        let solver = SpdSolver::new(k, kind).map_err(|e| match e {
            Error::Numerical { message, .. } => Error::config(format!("singular stiffness matrix: {message}")),
            other => other,
        })?;
        let load = self.mask(load);
        let dummy = self.mask(dummy);
        let u = solver.solve(&load)?;
        let v = solver.solve(&dummy)?;
        Ok(ElasticSolution {
            se: 0.5 * dot(&u, &load),
            mse: dot(&dummy, &u),
            delta: u[self.output_dof],
            u,
            v,
        })
    }

    fn mask(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .zip(&self.fixed)
            .map(|(&v, &fx)| if fx { 0.0 } else { v })
            .collect()
    }
}

/// Global stiffness for density field `rho` with spring and supports.
pub fn assemble_stiffness(mesh: &Mesh, rho: &[f64], m: &MaterialParams, preset: &ProblemPreset) -> Result<CsrMatrix> {
    ElasticModel::new(mesh, m.poisson, preset)?.assemble(rho, m)
}

/// Solves `K u = F` for a constrained stiffness matrix.
pub fn solve_state(k: &CsrMatrix, load: &[f64]) -> Result<Vec<f64>> {
    SpdSolver::new(k.clone(), SolverKind::Direct)?.solve(load)
}

/// Solves `K v = F_d` for a constrained stiffness matrix.
pub fn solve_dummy(k: &CsrMatrix, dummy: &[f64]) -> Result<Vec<f64>> {
    solve_state(k, dummy)
}

#[derive(Clone, Debug)]
pub struct ElasticSolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Strain energy `½ uᵀ K u`.
    pub se: f64,
    /// Mutual strain energy `vᵀ K u`.
    pub mse: f64,
    /// State displacement at the output DOF (m).
    pub delta: f64,
}

impl ElasticSolution {
    pub fn new(k: &CsrMatrix, u: Vec<f64>, v: Vec<f64>, output_dof: usize) -> Self {
        let ku = k.mul_vec(&u);
        ElasticSolution {
            se: 0.5 * dot(&u, &ku),
            mse: dot(&v, &ku),
            delta: u[output_dof],
            u,
            v,
        }
    }
}
