//! Design-dependent pressure field from Darcy flow with a drainage term.
//!
//! Each element carries a flow coefficient `K(ρ̄)` and a drainage
//! coefficient `D(ρ̄)`, both smooth Heaviside interpolations of the physical
//! density. The nodal pressure solves `A p = 0` with the input and zero
//! pressure boundaries prescribed, and the consistent structural load is
//! `F = −T p` where `T` couples pressure gradients to displacement DOFs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Realization;
use crate::linalg::{lift_rhs, AssemblyPattern, CsrMatrix, SolverKind, SpdSolver};
use crate::mesh::{shape, Mesh, ProblemPreset};

/// Flow and drainage parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarcyParams {
    /// Flow coefficient of a void element `K_v` (m⁴ N⁻¹ s⁻¹).
    pub k_void: f64,
    /// Flow contrast `ε = K_s / K_v`.
    pub flow_contrast: f64,
    pub eta_k: f64,
    pub beta_k: f64,
    pub eta_d: f64,
    pub beta_d: f64,
    /// Fraction of the input pressure remaining at the penetration depth.
    pub remainder: f64,
    /// Penetration depth `Δs` (m).
    pub penetration_depth: f64,
}

impl DarcyParams {
    /// Reference parameters with `Δs = 2h`.
    pub fn with_element_size(h: f64) -> Self {
        DarcyParams {
            k_void: 1.0,
            flow_contrast: 1e-7,
            eta_k: 0.3,
            beta_k: 10.0,
            eta_d: 0.2,
            beta_d: 10.0,
            remainder: 0.1,
            penetration_depth: 2.0 * h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if !(self.k_void > 0.0) {
            return bad("k_void must be positive");
        }
        if !(self.flow_contrast > 0.0 && self.flow_contrast <= 1.0) {
            return bad("flow contrast must lie in (0, 1]");
        }
        if !(self.remainder > 0.0 && self.remainder < 1.0) {
            return bad("remainder r must lie in (0, 1)");
        }
        if !(self.penetration_depth > 0.0) {
            return bad("penetration depth must be positive");
        }
        if !(self.beta_k > 0.0 && self.beta_d > 0.0) {
            return bad("beta_k and beta_d must be positive");
        }
        if !((0.0..=1.0).contains(&self.eta_k) && (0.0..=1.0).contains(&self.eta_d)) {
            return bad("eta_k and eta_d must lie in [0, 1]");
        }
        Ok(())
    }

    /// Flow coefficient of solid, `K_s = ε K_v`.
    pub fn k_solid(&self) -> f64 {
        self.flow_contrast * self.k_void
    }

    /// Drainage coefficient of solid, `D_s = (ln r / Δs)² K_s`.
    pub fn drainage_solid(&self) -> f64 {
        (self.remainder.ln() / self.penetration_depth).powi(2) * self.k_solid()
    }
}

/// Smooth Heaviside `H(x; β, η)` normalized so that `H(0) = 0`, `H(1) = 1`.
pub fn smooth_heaviside(x: f64, beta: f64, eta: f64) -> f64 {
    let a = (beta * eta).tanh();
    (a + (beta * (x - eta)).tanh()) / (a + (beta * (1.0 - eta)).tanh())
}

/// `dH/dx` of [`smooth_heaviside`].
pub fn smooth_heaviside_derivative(x: f64, beta: f64, eta: f64) -> f64 {
    let t = (beta * (x - eta)).tanh();
    beta * (1.0 - t * t) / ((beta * eta).tanh() + (beta * (1.0 - eta)).tanh())
}

fn check_density(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Domain(format!("density {rho} outside [0, 1]")))
    }
}

/// `K(ρ̄) = K_v (1 − (1 − ε) H(ρ̄; β_κ, η_κ))`.
pub fn flow_coefficient(rho: f64, p: &DarcyParams) -> Result<f64> {
    check_density(rho)?;
    Ok(flow_coefficient_unchecked(rho, p))
}

/// `D(ρ̄) = D_s H(ρ̄; β_d, η_d)`.
pub fn drainage_coefficient(rho: f64, p: &DarcyParams) -> Result<f64> {
    check_density(rho)?;
    Ok(drainage_coefficient_unchecked(rho, p))
}

fn flow_coefficient_unchecked(rho: f64, p: &DarcyParams) -> f64 {
    p.k_void * (1.0 - (1.0 - p.flow_contrast) * smooth_heaviside(rho, p.beta_k, p.eta_k))
}

fn drainage_coefficient_unchecked(rho: f64, p: &DarcyParams) -> f64 {
    p.drainage_solid() * smooth_heaviside(rho, p.beta_d, p.eta_d)
}

pub fn flow_coefficient_derivative(rho: f64, p: &DarcyParams) -> f64 {
    -p.k_void * (1.0 - p.flow_contrast) * smooth_heaviside_derivative(rho, p.beta_k, p.eta_k)
}

pub fn drainage_coefficient_derivative(rho: f64, p: &DarcyParams) -> f64 {
    p.drainage_solid() * smooth_heaviside_derivative(rho, p.beta_d, p.eta_d)
}

/// Per-element base matrices (unit coefficients) and the coupling matrix
/// for one mesh. Built once; everything design dependent is a reweighting.
#[derive(Clone, Debug)]
pub struct DarcyModel {
    pattern: AssemblyPattern,
    element_nodes: Vec<[usize; 4]>,
    /// `t ∫ Bₚᵀ Bₚ dA` per element, row-major 4×4.
    conduction: Vec<[f64; 16]>,
    /// `t ∫ Nₚᵀ Nₚ dA` per element.
    mass: Vec<[f64; 16]>,
    coupling: CsrMatrix,
}

impl DarcyModel {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let t = mesh.thickness();
        let mut conduction = Vec::with_capacity(mesh.n_elements());
        let mut mass = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let (c, m) = element_darcy_matrices(&mesh.element_coords(e), t)?;
            conduction.push(c);
            mass.push(m);
        }
        let element_nodes = mesh.elements().to_vec();
        let lists: Vec<Vec<usize>> = element_nodes.iter().map(|n| n.to_vec()).collect();
        Ok(DarcyModel {
            pattern: AssemblyPattern::new(mesh.n_nodes(), &lists),
            element_nodes,
            conduction,
            mass,
            coupling: transformation_matrix(mesh)?,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.pattern.size()
    }

    /// Coupling matrix `T` with `F = −T p`.
    pub fn coupling(&self) -> &CsrMatrix {
        &self.coupling
    }

    /// `A = Σₑ (K(ρ̄ₑ) Cₑ + D(ρ̄ₑ) Mₑ)`.
    pub fn assemble(&self, rho: &[f64], params: &DarcyParams) -> Result<CsrMatrix> {
        if rho.len() != self.conduction.len() {
            return Err(Error::Internal(format!(
                "density field has {} entries for {} elements",
                rho.len(),
                self.conduction.len()
            )));
        }
        for &r in rho {
            check_density(r)?;
        }
        Ok(self.pattern.assemble(|e| {
            let k = flow_coefficient_unchecked(rho[e], params);
            let d = drainage_coefficient_unchecked(rho[e], params);
            (0..16)
                .map(|i| k * self.conduction[e][i] + d * self.mass[e][i])
                .collect()
        }))
    }

    /// `(∂Aₑ/∂ρ̄ₑ) pₑ` for every element.
    pub fn element_derivative_products(
        &self,
        rho: &[f64],
        p: &[f64],
        params: &DarcyParams,
    ) -> Vec<[f64; 4]> {
        (0..self.conduction.len())
            .map(|e| {
                let dk = flow_coefficient_derivative(rho[e], params);
                let dd = drainage_coefficient_derivative(rho[e], params);
                let nodes = self.element_nodes[e];
                let mut out = [0.0; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        let m = dk * self.conduction[e][4 * a + b] + dd * self.mass[e][4 * a + b];
                        out[a] += m * p[nodes[b]];
                    }
                }
                out
            })
            .collect()
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        self.element_nodes[e]
    }
}

/// Element conduction and mass matrices by 2×2 Gauss quadrature.
pub fn element_darcy_matrices(xy: &[[f64; 2]; 4], thickness: f64) -> Result<([f64; 16], [f64; 16])> {
    let mut c = [0.0; 16];
    let mut m = [0.0; 16];
    for g in shape::gauss_points(xy)? {
        let w = g.det_j * thickness;
        for a in 0..4 {
            for b in 0..4 {
                c[4 * a + b] += w * (g.dn[a][0] * g.dn[b][0] + g.dn[a][1] * g.dn[b][1]);
                m[4 * a + b] += w * g.n[a] * g.n[b];
            }
        }
    }
    Ok((c, m))
}

/// Global Darcy matrix for density field `rho`.
pub fn assemble_darcy(mesh: &Mesh, rho: &[f64], params: &DarcyParams) -> Result<CsrMatrix> {
    DarcyModel::new(mesh)?.assemble(rho, params)
}

/// Factorized pressure system; reused for the adjoint solve.
#[derive(Clone, Debug)]
pub struct PressureSystem {
    solver: SpdSolver,
    fixed: Vec<bool>,
}

impl PressureSystem {
    /// Eliminates the pressure Dirichlet DOFs and factorizes.
    pub fn new(a: &CsrMatrix, preset: &ProblemPreset, kind: SolverKind) -> Result<(Self, Vec<f64>)> {
        let n = a.n_rows();
        let (fixed, values) = preset.pressure_dirichlet(n);
        if !fixed.iter().any(|&f| f) {
            return Err(Error::config("pressure problem has no Dirichlet nodes"));
        }
        let rhs = lift_rhs(a, &vec![0.0; n], &fixed, &values);
        let solver = SpdSolver::new(a.constrained(&fixed), kind).map_err(|e| match e {
            Error::Numerical { message, .. } => {
                Error::config(format!("singular Darcy matrix after boundary conditions: {message}"))
            }
            other => other,
        })?;
        let mut p = solver.solve(&rhs)?;
        for i in 0..n {
            if fixed[i] {
                p[i] = values[i];
            }
        }
        Ok((PressureSystem { solver, fixed }, p))
    }

    /// Solves `A_ff x_f = b_f` with `x = 0` on Dirichlet nodes.
    pub fn solve_homogeneous(&self, b: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = b
            .iter()
            .zip(&self.fixed)
            .map(|(&v, &f)| if f { 0.0 } else { v })
            .collect();
        let mut x = self.solver.solve(&rhs)?;
        for (xi, &f) in x.iter_mut().zip(&self.fixed) {
            if f {
                *xi = 0.0;
            }
        }
        Ok(x)
    }
}

/// Nodal pressure field for the Darcy matrix `a` and the preset boundaries.
pub fn solve_pressure(a: &CsrMatrix, preset: &ProblemPreset) -> Result<Vec<f64>> {
    PressureSystem::new(a, preset, SolverKind::Direct).map(|(_, p)| p)
}

/// Coupling matrix `T` (DOFs × nodes) with `Tₑ = t ∫ N_uᵀ Bₚ dA`, so the
/// consistent load of a pressure field is `F = −T p`.
pub fn transformation_matrix(mesh: &Mesh) -> Result<CsrMatrix> {
    let t = mesh.thickness();
    let mut triplets = Vec::with_capacity(mesh.n_elements() * 32);
    for e in 0..mesh.n_elements() {
        let te = element_coupling(&mesh.element_coords(e), t)?;
        let dofs = mesh.element_dofs(e);
        let nodes = mesh.element_nodes(e);
        for (r, &dof) in dofs.iter().enumerate() {
            for (c, &node) in nodes.iter().enumerate() {
                triplets.push((dof, node, te[r][c]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_dofs(), mesh.n_nodes(), &triplets))
}

/// Element coupling block `t ∫ N_uᵀ Bₚ dA` (8 × 4).
pub fn element_coupling(xy: &[[f64; 2]; 4], thickness: f64) -> Result<[[f64; 4]; 8]> {
    let mut te = [[0.0; 4]; 8];
    for g in shape::gauss_points(xy)? {
        let w = g.det_j * thickness;
        for a in 0..4 {
            for b in 0..4 {
                te[2 * a][b] += w * g.n[a] * g.dn[b][0];
                te[2 * a + 1][b] += w * g.n[a] * g.dn[b][1];
            }
        }
    }
    Ok(te)
}

/// Consistent structural loads `F = −T p`.
pub fn nodal_loads(t: &CsrMatrix, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != t.n_cols() {
        return Err(Error::Internal(format!(
            "pressure field has {} entries, coupling expects {}",
            p.len(),
            t.n_cols()
        )));
    }
    Ok(t.mul_vec(p).into_iter().map(|v| -v).collect())
}

/// Pressure field and consistent load of one realization.
#[derive(Clone, Debug)]
pub struct PressureSolution {
    pub realization: Realization,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{apply_preset, Edge, PresetKind, Problem};
    use approx::assert_relative_eq;

    fn params() -> DarcyParams {
        DarcyParams::with_element_size(0.001)
    }

    #[test]
    fn flow_coefficient_endpoints() {
        let p = params();
        assert_eq!(flow_coefficient(0.0, &p).unwrap(), 1.0);
        assert_relative_eq!(flow_coefficient(1.0, &p).unwrap(), 1e-7, max_relative = 1e-12);
    }

    #[test]
    fn flow_coefficient_at_step() {
        // H(0.3; 10, 0.3) = tanh 3 / (tanh 3 + tanh 7)
        let h = 3f64.tanh() / (3f64.tanh() + 7f64.tanh());
        assert_relative_eq!(h, 0.4988, epsilon = 1e-4);
        let p = params();
        let k = flow_coefficient(0.3, &p).unwrap();
        assert_relative_eq!(k, 1.0 - (1.0 - 1e-7) * h, max_relative = 1e-14);
    }

    #[test]
    fn drainage_values() {
        let p = params();
        assert_eq!(drainage_coefficient(0.0, &p).unwrap(), 0.0);
        let ds = (0.1f64.ln() / 0.002).powi(2) * 1e-7;
        assert_relative_eq!(drainage_coefficient(1.0, &p).unwrap(), ds, max_relative = 1e-13);
        let h = 2f64.tanh() / (2f64.tanh() + 8f64.tanh());
        assert_relative_eq!(h, 0.4908, epsilon = 1e-4);
        assert_relative_eq!(drainage_coefficient(0.2, &p).unwrap(), h * ds, max_relative = 1e-13);
    }

    #[test]
    fn out_of_range_density_is_domain_error() {
        assert!(matches!(flow_coefficient(1.2, &params()), Err(Error::Domain(_))));
        assert!(matches!(drainage_coefficient(-0.1, &params()), Err(Error::Domain(_))));
    }

    fn five_point(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn coefficient_derivatives_match_central_differences() {
        let p = params();
        let h = 1e-4;
        for i in 1..=9 {
            let r = i as f64 / 10.0;
            let fd_k = five_point(|x| flow_coefficient_unchecked(x, &p), r, h);
            let fd_d = five_point(|x| drainage_coefficient_unchecked(x, &p), r, h);
            assert_relative_eq!(flow_coefficient_derivative(r, &p), fd_k, max_relative = 1e-7);
            assert_relative_eq!(drainage_coefficient_derivative(r, &p), fd_d, max_relative = 1e-7);
        }
    }

    #[test]
    fn unit_square_conduction_matrix() {
        // hand-integrated bilinear Laplacian on a square: diag 2/3, edge -1/6, diagonal -1/3
        let xy = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let (c, m) = element_darcy_matrices(&xy, 1.0).unwrap();
        let expected_c = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        let expected_m = [
            [4.0, 2.0, 1.0, 2.0],
            [2.0, 4.0, 2.0, 1.0],
            [1.0, 2.0, 4.0, 2.0],
            [2.0, 1.0, 2.0, 4.0],
        ];
        for a in 0..4 {
            for b in 0..4 {
                assert_relative_eq!(c[4 * a + b], expected_c[a][b] / 6.0, epsilon = 1e-14);
                assert_relative_eq!(m[4 * a + b], expected_m[a][b] / 36.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn single_element_void_and_solid_matrices() {
        let mesh = Mesh::build_grid(1, 1, 1.0, 1.0, 1.0).unwrap();
        let p = DarcyParams {
            penetration_depth: 2.0,
            ..params()
        };
        let a0 = assemble_darcy(&mesh, &[0.0], &p).unwrap();
        let a1 = assemble_darcy(&mesh, &[1.0], &p).unwrap();
        let (c, m) = element_darcy_matrices(&mesh.element_coords(0), 1.0).unwrap();
        let nodes = mesh.element_nodes(0);
        for a in 0..4 {
            for b in 0..4 {
                let (i, j) = (nodes[a], nodes[b]);
                assert_relative_eq!(a0.get(i, j), c[4 * a + b], epsilon = 1e-15);
                let solid = p.k_solid() * c[4 * a + b] + p.drainage_solid() * m[4 * a + b];
                assert_relative_eq!(a1.get(i, j), solid, max_relative = 1e-12);
            }
        }
        assert_eq!(a0.asymmetry(), 0.0);
        assert_eq!(a1.asymmetry(), 0.0);
    }

    fn strip_problem(nex: usize, ney: usize, lx: f64, ly: f64, pin: f64) -> Problem {
        let mesh = Mesh::build_grid(nex, ney, lx, ly, 1.0).unwrap();
        let mut layout = crate::mesh::PresetSpec::builtin(PresetKind::Inverter, lx, ly, 1.0);
        layout.bcs.pressure_zero = vec![Edge::Right];
        layout.bcs.symmetry = None;
        let preset = layout.resolve(&mesh, pin).unwrap();
        apply_preset(mesh, preset).unwrap()
    }

    #[test]
    fn void_strip_pressure_is_linear() {
        let pr = strip_problem(10, 3, 1.0, 0.3, 1e5);
        let a = assemble_darcy(&pr.mesh, &vec![0.0; 30], &params()).unwrap();
        let p = solve_pressure(&a, &pr.preset).unwrap();
        for (n, c) in pr.mesh.coords().iter().enumerate() {
            assert_relative_eq!(p[n], 1e5 * (1.0 - c[0]), epsilon = 1e-10 * 1e5);
        }
    }

    #[test]
    fn solid_column_drainage_calibration() {
        // reference grid size h = 1 mm, Δs = 2h; the column is 10Δs long with 200 elements
        let h = 0.001;
        let dp = DarcyParams::with_element_size(h);
        let n = 200;
        let lx = 10.0 * dp.penetration_depth;
        let pr = strip_problem(n, 1, lx, lx / n as f64, 1e5);
        let a = assemble_darcy(&pr.mesh, &vec![1.0; n], &dp).unwrap();
        let p = solve_pressure(&a, &pr.preset).unwrap();
        let at_depth = p[n / 10] / 1e5;
        assert!((at_depth - 0.1).abs() <= 0.001, "p(Δs)/p_in = {at_depth}");
    }

    #[test]
    fn homogeneous_boundary_data_gives_zero_pressure() {
        let pr = strip_problem(4, 2, 1.0, 0.5, 0.0);
        let a = assemble_darcy(&pr.mesh, &[0.5; 8], &params()).unwrap();
        let p = solve_pressure(&a, &pr.preset).unwrap();
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_dirichlet_data_is_config_error() {
        let pr = strip_problem(2, 1, 1.0, 0.5, 1.0);
        let mut preset = pr.preset.clone();
        preset.pressure_input.0.clear();
        preset.pressure_zero.clear();
        let a = assemble_darcy(&pr.mesh, &[0.0, 0.0], &params()).unwrap();
        assert!(matches!(solve_pressure(&a, &preset), Err(Error::Config(_))));
    }

    #[test]
    fn linear_pressure_over_one_element_gives_rightward_force() {
        let h = 0.1;
        let t = 0.01;
        let mesh = Mesh::build_grid(1, 1, h, h, t).unwrap();
        let tm = transformation_matrix(&mesh).unwrap();
        let p0 = 3.0;
        // nodes 0 (0,0), 1 (h,0), 2 (0,h), 3 (h,h)
        let f = nodal_loads(&tm, &[p0, 0.0, p0, 0.0]).unwrap();
        let fx: f64 = f.iter().step_by(2).sum();
        let fy: f64 = f.iter().skip(1).step_by(2).sum();
        assert_relative_eq!(fx, p0 * h * t, max_relative = 1e-13);
        assert!(fy.abs() < 1e-15);
    }

    #[test]
    fn uniform_pressure_gives_no_load() {
        let mesh = Mesh::build_grid(5, 3, 0.5, 0.3, 0.01).unwrap();
        let tm = transformation_matrix(&mesh).unwrap();
        let f = nodal_loads(&tm, &vec![7.0; mesh.n_nodes()]).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-14));
        let zero = nodal_loads(&tm, &vec![0.0; mesh.n_nodes()]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(nodal_loads(&tm, &[1.0]).is_err());
    }

    #[test]
    fn inverter_pressure_pushes_right() {
        let pr = Problem::builtin(PresetKind::Inverter, 20, 10, 0.2, 0.1, 0.001, 1e5).unwrap();
        let rho = vec![0.3; 200];
        let model = DarcyModel::new(&pr.mesh).unwrap();
        let dp = DarcyParams::with_element_size(pr.mesh.h());
        let a = model.assemble(&rho, &dp).unwrap();
        let p = solve_pressure(&a, &pr.preset).unwrap();
        let f = nodal_loads(model.coupling(), &p).unwrap();
        let fx: f64 = f.iter().step_by(2).sum();
        assert!(fx > 0.0, "net x force {fx}");
        let f2 = nodal_loads(model.coupling(), &p.iter().map(|v| 2.0 * v).collect::<Vec<_>>()).unwrap();
        for (a, b) in f.iter().zip(&f2) {
            assert_relative_eq!(2.0 * a, *b, max_relative = 1e-15);
        }
    }
}
