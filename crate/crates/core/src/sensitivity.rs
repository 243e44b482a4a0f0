//! Objective `f₀ = −μ MSE / SE` and its adjoint sensitivities with respect
//! to the physical densities of one realization.
//!
//! The gradient has two parts: the stiffness term (load held fixed) and the
//! load term, which follows the pressure field through `F = −T p` and
//! `A(ρ̄) p = 0`. Both adjoint solves reuse the forward factorizations.

use serde::{Deserialize, Serialize};

use crate::darcy::{nodal_loads, DarcyModel, DarcyParams, PressureSystem};
use crate::elasticity::{simp_modulus_derivative, ElasticModel, ElasticSolution, MaterialParams};
use crate::error::{Error, Result};
use crate::linalg::SolverKind;
use crate::mesh::Problem;

/// Physics and solver settings shared by every evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub material: MaterialParams,
    pub darcy: DarcyParams,
    /// Objective scale `μ`.
    pub objective_scale: f64,
    pub solver: SolverKind,
}

/// `f₀ = −μ MSE / SE`.
pub fn objective(sol: &ElasticSolution, mu: f64) -> Result<f64> {
    if !(sol.se > 0.0) {
        return Err(Error::numerical("degenerate state: strain energy is not positive", sol.se));
    }
    Ok(-mu * sol.mse / sol.se)
}

/// Stiffness part of `df₀/dρ̄` (load held fixed):
/// `μ uₑᵀ (∂Kₑ/∂ρ̄ₑ) (vₑ/SE − uₑ MSE/(2 SE²))`.
pub fn objective_sensitivity(
    sol: &ElasticSolution,
    rho_bar: &[f64],
    model: &ElasticModel,
    m: &MaterialParams,
    mu: f64,
) -> Vec<f64> {
    let (se, mse) = (sol.se, sol.mse);
    (0..rho_bar.len())
        .map(|e| {
            let dofs = model.element_dofs(e);
            let k0 = model.unit_stiffness(e);
            let ue: [f64; 8] = dofs.map(|d| sol.u[d]);
            let we: [f64; 8] = dofs.map(|d| sol.v[d] / se - sol.u[d] * mse / (2.0 * se * se));
            let mut acc = 0.0;
            for i in 0..8 {
                let row: f64 = (0..8).map(|j| k0[8 * i + j] * we[j]).sum();
                acc += ue[i] * row;
            }
            mu * simp_modulus_derivative(rho_bar[e], m) * acc
        })
        .collect()
}

/// Load part of `df₀/dρ̄`: `μ (MSE/SE² uᵀ − vᵀ/SE) T A⁻¹ (∂A/∂ρ̄) p`,
/// evaluated with one adjoint pressure solve.
pub fn load_sensitivity(
    sol: &ElasticSolution,
    p: &[f64],
    rho_bar: &[f64],
    darcy: &DarcyModel,
    pressure: &PressureSystem,
    params: &DarcyParams,
    mu: f64,
) -> Result<Vec<f64>> {
    let (se, mse) = (sol.se, sol.mse);
    let w: Vec<f64> = sol
        .u
        .iter()
        .zip(&sol.v)
        .map(|(&u, &v)| mu * (mse / (se * se) * u - v / se))
        .collect();
    let rhs = darcy.coupling().transpose_mul_vec(&w);
    let lambda = pressure.solve_homogeneous(&rhs)?;
    let products = darcy.element_derivative_products(rho_bar, p, params);
    Ok(products
        .iter()
        .enumerate()
        .map(|(e, dp)| {
            let nodes = darcy.element_nodes(e);
            (0..4).map(|a| lambda[nodes[a]] * dp[a]).sum()
        })
        .collect())
}

/// Volume fraction of `rho_bar`, its gradient, and the constraint value
/// `V/V* − 1` with its gradient.
#[derive(Clone, Debug)]
pub struct VolumeConstraint {
    pub fraction: f64,
    pub value: f64,
    pub gradient: Vec<f64>,
}

pub fn volume_and_sensitivity(rho_bar: &[f64], volumes: &[f64], target: f64) -> VolumeConstraint {
    let total: f64 = volumes.iter().sum();
    let fraction = rho_bar.iter().zip(volumes).map(|(r, v)| r * v).sum::<f64>() / total;
    VolumeConstraint {
        fraction,
        value: fraction / target - 1.0,
        gradient: volumes.iter().map(|v| v / (total * target)).collect(),
    }
}

/// Everything computed for one physical density field.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    pub pressure: Vec<f64>,
    pub loads: Vec<f64>,
    pub elastic: ElasticSolution,
    /// Stiffness part of the gradient, zero on passive elements.
    pub theta_objective: Vec<f64>,
    /// Load part of the gradient, zero on passive elements.
    pub theta_load: Vec<f64>,
}

impl Evaluation {
    /// `df₀/dρ̄` including the load term when `with_load_term` is set.
    pub fn gradient(&self, with_load_term: bool) -> Vec<f64> {
        if with_load_term {
            self.theta_objective
                .iter()
                .zip(&self.theta_load)
                .map(|(a, b)| a + b)
                .collect()
        } else {
            self.theta_objective.clone()
        }
    }
}

/// Prepared analysis for one problem: element matrices, patterns and the
/// dummy load are built once.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub problem: Problem,
    pub params: AnalysisParams,
    darcy: DarcyModel,
    elastic: ElasticModel,
    volumes: Vec<f64>,
    dummy: Vec<f64>,
    passive: Vec<bool>,
}

impl Analysis {
    pub fn new(problem: Problem, params: AnalysisParams) -> Result<Self> {
        params.material.validate()?;
        params.darcy.validate()?;
        let darcy = DarcyModel::new(&problem.mesh)?;
        let elastic = ElasticModel::new(&problem.mesh, params.material.poisson, &problem.preset)?;
        let volumes = problem.mesh.element_volumes();
        let dummy = problem.preset.dummy_load_vector(problem.mesh.n_dofs());
        let passive = problem
            .preset
            .passive_values(problem.mesh.n_elements())
            .iter()
            .map(Option::is_some)
            .collect();
        Ok(Analysis {
            problem,
            params,
            darcy,
            elastic,
            volumes,
            dummy,
            passive,
        })
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn darcy_model(&self) -> &DarcyModel {
        &self.darcy
    }

    pub fn elastic_model(&self) -> &ElasticModel {
        &self.elastic
    }

    /// Pressure, loads and elastic state for `rho_bar`.
    pub fn solve(&self, rho_bar: &[f64]) -> Result<(PressureSystem, Vec<f64>, Vec<f64>, ElasticSolution)> {
        let a = self.darcy.assemble(rho_bar, &self.params.darcy)?;
        let (system, p) = PressureSystem::new(&a, &self.problem.preset, self.params.solver)?;
        let f = nodal_loads(self.darcy.coupling(), &p)?;
        let k = self.elastic.assemble(rho_bar, &self.params.material)?;
        let sol = self.elastic.solve(k, &f, &self.dummy, self.params.solver)?;
        Ok((system, p, f, sol))
    }

    /// Objective value only.
    pub fn objective(&self, rho_bar: &[f64]) -> Result<f64> {
        let (_, _, _, sol) = self.solve(rho_bar)?;
        objective(&sol, self.params.objective_scale)
    }

    /// Objective and both sensitivity parts.
    pub fn evaluate(&self, rho_bar: &[f64]) -> Result<Evaluation> {
        let mu = self.params.objective_scale;
        let (system, p, f, sol) = self.solve(rho_bar)?;
        let value = objective(&sol, mu)?;
        let mut theta_objective = objective_sensitivity(&sol, rho_bar, &self.elastic, &self.params.material, mu);
        let mut theta_load = load_sensitivity(&sol, &p, rho_bar, &self.darcy, &system, &self.params.darcy, mu)?;
        for (e, &passive) in self.passive.iter().enumerate() {
            if passive {
                theta_objective[e] = 0.0;
                theta_load[e] = 0.0;
            }
        }
        Ok(Evaluation {
            objective: value,
            pressure: p,
            loads: f,
            elastic: sol,
            theta_objective,
            theta_load,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::PresetKind;
    use approx::assert_relative_eq;

    fn analysis(nex: usize, ney: usize) -> Analysis {
        let problem = Problem::builtin(PresetKind::Inverter, nex, ney, 0.2, 0.1, 0.001, 1e5).unwrap();
        let h = problem.mesh.h();
        Analysis::new(
            problem,
            AnalysisParams {
                material: MaterialParams::default(),
                darcy: DarcyParams::with_element_size(h),
                objective_scale: 1000.0,
                solver: SolverKind::Direct,
            },
        )
        .unwrap()
    }

    fn sample_density(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.15 + 0.7 * ((i * 13 % 17) as f64 / 17.0)).collect()
    }

    fn fake_solution(u: Vec<f64>, v: Vec<f64>, se: f64, mse: f64) -> ElasticSolution {
        ElasticSolution { u, v, se, mse, delta: 0.0 }
    }

    #[test]
    fn objective_basics() {
        let s = fake_solution(vec![], vec![], 2.0, 0.0);
        assert_eq!(objective(&s, 1000.0).unwrap(), 0.0);
        let s1 = fake_solution(vec![], vec![], 2.0, 1.0);
        let s2 = fake_solution(vec![], vec![], 8.0, 2.0);
        assert_relative_eq!(objective(&s2, 1000.0).unwrap(), 0.5 * objective(&s1, 1000.0).unwrap());
        assert!(objective(&fake_solution(vec![], vec![], 0.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn frozen_load_gradient_matches_finite_differences() {
        let an = analysis(6, 3);
        let rho = sample_density(18);
        let (_, _, f, _) = an.solve(&rho).unwrap();
        let eval = an.evaluate(&rho).unwrap();
        let frozen = |r: &[f64]| {
            let k = an.elastic.assemble(r, &an.params.material).unwrap();
            let sol = an.elastic.solve(k, &f, &an.dummy, SolverKind::Direct).unwrap();
            objective(&sol, 1000.0).unwrap()
        };
        let h = 1e-6;
        for e in 0..18 {
            let mut p = rho.clone();
            let mut q = rho.clone();
            p[e] += h;
            q[e] -= h;
            let fd = (frozen(&p) - frozen(&q)) / (2.0 * h);
            assert_relative_eq!(eval.theta_objective[e], fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn flat_interpolations_give_no_load_term() {
        let mut an = analysis(6, 3);
        // steep steps far from every density value make both slopes vanish
        an.params.darcy.beta_k = 1e4;
        an.params.darcy.beta_d = 1e4;
        let rho: Vec<f64> = (0..18).map(|i| if i % 3 == 0 { 0.9 } else { 0.95 }).collect();
        let eval = an.evaluate(&rho).unwrap();
        assert!(eval.theta_load.iter().all(|&t| t == 0.0));
        assert!(eval.theta_objective.iter().any(|&t| t != 0.0));
    }

    #[test]
    fn volume_examples() {
        let vols = vec![2.0; 10];
        let full = volume_and_sensitivity(&[1.0; 10], &vols, 0.5);
        assert_relative_eq!(full.fraction, 1.0);
        let c = volume_and_sensitivity(&[0.22; 10], &vols, 0.22);
        assert_relative_eq!(c.fraction, 0.22, max_relative = 1e-14);
        assert!(c.value.abs() < 1e-14);
        assert!(c.gradient.iter().all(|&g| g == c.gradient[0]));
    }

    #[test]
    fn zero_displacement_element_has_zero_stiffness_term() {
        let an = analysis(4, 2);
        let n = an.problem.mesh.n_dofs();
        let sol = fake_solution(vec![0.0; n], vec![1.0; n], 1.0, 1.0);
        let t = objective_sensitivity(&sol, &[0.0; 8], &an.elastic, &an.params.material, 1000.0);
        assert!(t.iter().all(|&x| x == 0.0));
    }
}
