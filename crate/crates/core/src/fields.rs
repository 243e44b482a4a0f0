//! Density filter, tanh projection and the eroded / intermediate / dilated
//! realizations of one design field.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;

/// One of the three projected realizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Realization {
    Eroded,
    Intermediate,
    Dilated,
}

impl Realization {
    pub const ALL: [Realization; 3] = [Realization::Eroded, Realization::Intermediate, Realization::Dilated];

    /// Projection threshold for threshold deviation `delta_eta`.
    pub fn threshold(self, delta_eta: f64) -> f64 {
        match self {
            Realization::Eroded => 0.5 + delta_eta,
            Realization::Intermediate => 0.5,
            Realization::Dilated => 0.5 - delta_eta,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Realization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Realization::Eroded => "eroded",
            Realization::Intermediate => "intermediate",
            Realization::Dilated => "dilated",
        })
    }
}

/// Linear density filter `ρ̃ = W ρ` with hat weights `max(0, 1 − d/r)`
/// scaled by neighbour volume and normalized per row.
#[derive(Clone, Debug)]
pub struct DensityFilter {
    radius: f64,
    weights: CsrMatrix,
}

impl DensityFilter {
    pub fn new(mesh: &Mesh, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::config(format!("filter radius must be positive (got {radius})")));
        }
        if radius <= mesh.h() {
            log::warn!("filter radius {radius} does not exceed the element size; filter is the identity");
        }
        let ne = mesh.n_elements();
        let centroids: Vec<[f64; 2]> = (0..ne).map(|e| mesh.centroid(e)).collect();
        let volumes = mesh.element_volumes();

        // bucket index with cell size = radius
        let nbx = ((mesh.lx() / radius).ceil() as usize).max(1);
        let nby = ((mesh.ly() / radius).ceil() as usize).max(1);
        let bucket_of = |c: [f64; 2]| {
            let bx = ((c[0] / radius) as usize).min(nbx - 1);
            let by = ((c[1] / radius) as usize).min(nby - 1);
            (bx, by)
        };
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nbx * nby];
        for (e, &c) in centroids.iter().enumerate() {
            let (bx, by) = bucket_of(c);
            buckets[by * nbx + bx].push(e);
        }

        let mut triplets = Vec::new();
        let mut row = Vec::new();
        for (e, &c) in centroids.iter().enumerate() {
            row.clear();
            let (bx, by) = bucket_of(c);
            for ny in by.saturating_sub(1)..=(by + 1).min(nby - 1) {
                for nx in bx.saturating_sub(1)..=(bx + 1).min(nbx - 1) {
                    for &j in &buckets[ny * nbx + nx] {
                        let d = ((centroids[j][0] - c[0]).powi(2) + (centroids[j][1] - c[1]).powi(2)).sqrt();
                        let w = (1.0 - d / radius).max(0.0) * volumes[j];
                        if w > 0.0 {
                            row.push((j, w));
                        }
                    }
                }
            }
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            triplets.extend(row.iter().map(|&(j, w)| (e, j, w / total)));
        }
        Ok(DensityFilter {
            radius,
            weights: CsrMatrix::from_triplets(ne, ne, &triplets),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Normalized weight matrix.
    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        self.weights.mul_vec(rho)
    }

    /// Transpose action: maps `df/dρ̃` to `df/dρ`.
    pub fn apply_transpose(&self, grad: &[f64]) -> Vec<f64> {
        self.weights.transpose_mul_vec(grad)
    }
}

/// Builds the density filter of radius `radius` on `mesh`.
pub fn build_filter(mesh: &Mesh, radius: f64) -> Result<DensityFilter> {
    DensityFilter::new(mesh, radius)
}

/// Threshold projection of one value. `β = 0` is the identity.
pub fn project_value(x: f64, beta: f64, eta: f64) -> f64 {
    if beta == 0.0 {
        return x;
    }
    let a = (beta * eta).tanh();
    (a + (beta * (x - eta)).tanh()) / (a + (beta * (1.0 - eta)).tanh())
}

/// `dρ̄/dρ̃` of [`project_value`].
pub fn project_slope(x: f64, beta: f64, eta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let t = (beta * (x - eta)).tanh();
    beta * (1.0 - t * t) / ((beta * eta).tanh() + (beta * (1.0 - eta)).tanh())
}

pub fn project(rho_tilde: &[f64], beta: f64, eta: f64) -> Vec<f64> {
    rho_tilde.iter().map(|&x| project_value(x, beta, eta)).collect()
}

pub fn project_derivative(rho_tilde: &[f64], beta: f64, eta: f64) -> Vec<f64> {
    rho_tilde.iter().map(|&x| project_slope(x, beta, eta)).collect()
}

/// Eroded, intermediate and dilated projections of `rho_tilde`.
pub fn realize_three(rho_tilde: &[f64], beta: f64, delta_eta: f64) -> [Vec<f64>; 3] {
    Realization::ALL.map(|r| project(rho_tilde, beta, r.threshold(delta_eta)))
}

/// Gray-scale indicator `Σ 4ρ̄(1 − ρ̄) / n`.
pub fn gray_indicator(rho_bar: &[f64]) -> f64 {
    if rho_bar.is_empty() {
        return 0.0;
    }
    rho_bar.iter().map(|&r| 4.0 * r * (1.0 - r)).sum::<f64>() / rho_bar.len() as f64
}

/// Volume fraction `Σ vₑ ρ̄ₑ / Σ vₑ`.
pub fn volume_fraction(rho_bar: &[f64], volumes: &[f64]) -> f64 {
    let total: f64 = volumes.iter().sum();
    rho_bar.iter().zip(volumes).map(|(r, v)| r * v).sum::<f64>() / total
}

/// Design variables together with every derived field.
#[derive(Clone, Debug)]
pub struct DesignState {
    pub rho: Vec<f64>,
    pub rho_tilde: Vec<f64>,
    /// Indexed by [`Realization::index`].
    pub physical: [Vec<f64>; 3],
    pub beta: f64,
    pub delta_eta: f64,
    /// `Some(value)` for passive elements.
    pub passive: Vec<Option<f64>>,
}

impl DesignState {
    /// Filters and projects `rho`; passive elements keep their fixed value in
    /// every derived field.
    pub fn new(
        rho: Vec<f64>,
        filter: &DensityFilter,
        beta: f64,
        delta_eta: f64,
        passive: Vec<Option<f64>>,
    ) -> Result<Self> {
        if rho.len() != passive.len() || rho.len() != filter.weights.n_rows() {
            return Err(Error::Internal("design field size mismatch".into()));
        }
        if !(0.0..=0.5).contains(&delta_eta) {
            return Err(Error::config(format!("delta_eta must lie in [0, 0.5] (got {delta_eta})")));
        }
        let mut rho = rho;
        for (r, p) in rho.iter_mut().zip(&passive) {
            if let Some(v) = p {
                *r = *v;
            }
        }
        let mut rho_tilde: Vec<f64> = filter.apply(&rho).into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let mut physical = realize_three(&rho_tilde, beta, delta_eta);
        for (e, p) in passive.iter().enumerate() {
            if let Some(v) = *p {
                rho_tilde[e] = v;
                for field in physical.iter_mut() {
                    field[e] = v;
                }
            }
        }
        Ok(DesignState {
            rho,
            rho_tilde,
            physical,
            beta,
            delta_eta,
            passive,
        })
    }

    pub fn physical(&self, r: Realization) -> &[f64] {
        &self.physical[r.index()]
    }

    /// Chain rule from `df/dρ̄` of realization `r` to `df/dρ`, zero on
    /// passive elements.
    pub fn backprop(&self, grad_physical: &[f64], filter: &DensityFilter, r: Realization) -> Vec<f64> {
        let eta = r.threshold(self.delta_eta);
        let scaled: Vec<f64> = grad_physical
            .iter()
            .zip(&self.rho_tilde)
            .zip(&self.passive)
            .map(|((&g, &x), p)| if p.is_some() { 0.0 } else { g * project_slope(x, self.beta, eta) })
            .collect();
        let mut out = filter.apply_transpose(&scaled);
        for (o, p) in out.iter_mut().zip(&self.passive) {
            if p.is_some() {
                *o = 0.0;
            }
        }
        out
    }
}

/// Chain rule through projection and filter without passive handling.
pub fn backprop(grad_physical: &[f64], rho_tilde: &[f64], filter: &DensityFilter, beta: f64, eta: f64) -> Vec<f64> {
    let scaled: Vec<f64> = grad_physical
        .iter()
        .zip(rho_tilde)
        .map(|(&g, &x)| g * project_slope(x, beta, eta))
        .collect();
    filter.apply_transpose(&scaled)
}
