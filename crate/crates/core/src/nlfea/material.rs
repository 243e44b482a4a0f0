//! Compressible neo-Hookean law and its plane-stress reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];
pub type Mat2 = [[f64; 2]; 2];

/// Shear modulus and first Lamé constant of the neo-Hookean solid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperelasticParams {
    pub shear: f64,
    pub lame: f64,
}

impl HyperelasticParams {
    /// Lamé constants from Young's modulus and Poisson's ratio.
    pub fn from_young(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) {
            return Err(Error::config(format!("Young's modulus must be positive, got {young}")));
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::config(format!("Poisson's ratio must lie in (-1, 0.5), got {poisson}")));
        }
        let shear = young / (2.0 * (1.0 + poisson));
        let lame = 2.0 * shear * poisson / (1.0 - 2.0 * poisson);
        Ok(HyperelasticParams { shear, lame })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shear > 0.0) || !(self.lame + 2.0 * self.shear / 3.0 > 0.0) {
            return Err(Error::config("neo-Hookean constants must give positive shear and bulk moduli"));
        }
        Ok(())
    }
}

pub fn det3(f: &Mat3) -> f64 {
    f[0][0] * (f[1][1] * f[2][2] - f[1][2] * f[2][1]) - f[0][1] * (f[1][0] * f[2][2] - f[1][2] * f[2][0])
        + f[0][2] * (f[1][0] * f[2][1] - f[1][1] * f[2][0])
}

fn inverse3(f: &Mat3, det: f64) -> Mat3 {
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (f[a][c] * f[b][d] - f[a][d] * f[b][c]) / det;
        }
    }
    inv
}

/// `det(I + H) − 1` without cancellation for small `H`.
fn det_minus_one(h: &Mat3) -> f64 {
    let trace = h[0][0] + h[1][1] + h[2][2];
    let minors = h[0][0] * h[1][1] - h[0][1] * h[1][0] + h[0][0] * h[2][2] - h[0][2] * h[2][0] + h[1][1] * h[2][2]
        - h[1][2] * h[2][1];
    trace + minors + det3(h)
}

fn identity_plus(h: &Mat3) -> Mat3 {
    let mut f = *h;
    for (i, row) in f.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    f
}

fn minus_identity(f: &Mat3) -> Mat3 {
    let mut h = *f;
    for (i, row) in h.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    h
}

/// `(J, ln J)` for `F = I + H`.
fn volume_ratio(h: &Mat3) -> Result<(f64, f64)> {
    let jm1 = det_minus_one(h);
    let j = 1.0 + jm1;
    if !(j > 0.0) {
        return Err(Error::Inversion { element: usize::MAX, jacobian: j });
    }
    Ok((j, jm1.ln_1p()))
}

/// Stored energy per unit reference volume.
pub fn strain_energy(f: &Mat3, m: &HyperelasticParams) -> Result<f64> {
    energy_from_gradient(&minus_identity(f), m)
}

fn energy_from_gradient(h: &Mat3, m: &HyperelasticParams) -> Result<f64> {
    let (_, lnj) = volume_ratio(h)?;
    let trace = h[0][0] + h[1][1] + h[2][2];
    let sq: f64 = h.iter().flatten().map(|v| v * v).sum();
    Ok(0.5 * m.shear * (2.0 * trace + sq - 2.0 * lnj) + 0.5 * m.lame * lnj * lnj)
}

/// Cauchy stress `(G/J)(F Fᵀ − I) + (λ/J) ln J I`.
pub fn cauchy_stress(f: &Mat3, m: &HyperelasticParams) -> Result<Mat3> {
    cauchy_from_gradient(&minus_identity(f), m)
}

/// Cauchy stress with `F Fᵀ − I = H + Hᵀ + H Hᵀ`.
fn cauchy_from_gradient(h: &Mat3, m: &HyperelasticParams) -> Result<Mat3> {
    let (j, lnj) = volume_ratio(h)?;
    let mut s = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let hh: f64 = (0..3).map(|k| h[a][k] * h[b][k]).sum();
            let delta = if a == b { 1.0 } else { 0.0 };
            s[a][b] = (m.shear * (h[a][b] + h[b][a] + hh) + m.lame * lnj * delta) / j;
        }
    }
    Ok(s)
}

/// First Piola-Kirchhoff stress `G(F − F⁻ᵀ) + λ ln J F⁻ᵀ`.
pub fn first_piola(f: &Mat3, m: &HyperelasticParams) -> Result<Mat3> {
    piola_from_gradient(&minus_identity(f), m)
}

/// First Piola-Kirchhoff stress with `F − F⁻ᵀ = H + Hᵀ F⁻ᵀ`.
fn piola_from_gradient(h: &Mat3, m: &HyperelasticParams) -> Result<Mat3> {
    let (j, lnj) = volume_ratio(h)?;
    let inv = inverse3(&identity_plus(h), j);
    let mut p = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            // (Hᵀ F⁻ᵀ)_ab = Σ_k H_ka F⁻¹_bk
            let ht_inv_t: f64 = (0..3).map(|k| h[k][a] * inv[b][k]).sum();
            p[a][b] = m.shear * (h[a][b] + ht_inv_t) + m.lame * lnj * inv[b][a];
        }
    }
    Ok(p)
}

/// `∂P_iJ/∂F_kL`, indexed `[i][J][k][L]`.
pub fn piola_tangent(f: &Mat3, m: &HyperelasticParams) -> Result<[[[[f64; 3]; 3]; 3]; 3]> {
    tangent_from_gradient(&minus_identity(f), m)
}

fn tangent_from_gradient(h: &Mat3, m: &HyperelasticParams) -> Result<[[[[f64; 3]; 3]; 3]; 3]> {
    let (j, lnj) = volume_ratio(h)?;
    let inv = inverse3(&identity_plus(h), j);
    let c = m.shear - m.lame * lnj;
    let mut t = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let id = if i == k && jj == l { m.shear } else { 0.0 };
                    t[i][jj][k][l] = id + c * inv[l][i] * inv[jj][k] + m.lame * inv[jj][i] * inv[l][k];
                }
            }
        }
    }
    Ok(t)
}

/// Material response at one point under plane stress.
#[derive(Clone, Copy, Debug)]
pub struct PlaneStressPoint {
    /// Out-of-plane stretch that makes σ₃₃ vanish.
    pub stretch: f64,
    /// In-plane block of the first Piola-Kirchhoff stress.
    pub piola: Mat2,
    /// In-plane Cauchy stress.
    pub cauchy: Mat2,
    /// In-plane tangent `dP/dF` with the out-of-plane stretch condensed out,
    /// indexed `[i][J][k][L]`.
    pub tangent: [[[[f64; 2]; 2]; 2]; 2],
    /// Stored energy per unit reference volume.
    pub energy: f64,
}

/// Embeds an in-plane gradient with out-of-plane stretch `s`.
pub fn embed(f: &Mat2, s: f64) -> Mat3 {
    [[f[0][0], f[0][1], 0.0], [f[1][0], f[1][1], 0.0], [0.0, 0.0, s]]
}

/// Solves `σ₃₃(F, s) = 0` for the thickness stretch `s`.
pub fn thickness_stretch(f: &Mat2, m: &HyperelasticParams) -> Result<f64> {
    let h = [[f[0][0] - 1.0, f[0][1]], [f[1][0], f[1][1] - 1.0]];
    log_thickness_stretch(&h, m).map(f64::exp)
}

/// `q = ln s` for the in-plane displacement gradient `h`.
///
/// The condition `G(e^{2q} − 1) + λ(q + ln J₂) = 0` is increasing and convex
/// in `q`, so Newton converges from any start.
fn log_thickness_stretch(h: &Mat2, m: &HyperelasticParams) -> Result<f64> {
    let j2m1 = h[0][0] + h[1][1] + h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if !(j2m1 > -1.0) {
        return Err(Error::Inversion {
            element: usize::MAX,
            jacobian: 1.0 + j2m1,
        });
    }
    let lnj2 = j2m1.ln_1p();
    let mut q = 0.0_f64;
    for _ in 0..60 {
        let g = m.shear * (2.0 * q).exp_m1() + m.lame * (q + lnj2);
        let dg = 2.0 * m.shear * (2.0 * q).exp() + m.lame;
        let dq = g / dg;
        q -= dq;
        if dq.abs() <= 1e-15 * q.abs() || g == 0.0 {
            return Ok(q);
        }
    }
    Err(Error::numerical("thickness stretch iteration did not converge", q))
}

pub fn plane_stress(f: &Mat2, m: &HyperelasticParams) -> Result<PlaneStressPoint> {
    plane_stress_from_gradient(&[[f[0][0] - 1.0, f[0][1]], [f[1][0], f[1][1] - 1.0]], m)
}

/// Plane-stress response for the in-plane displacement gradient `H = F − I`.
///
/// Working with `H` keeps stresses accurate when strains are far below
/// round-off relative to one.
pub fn plane_stress_from_gradient(h: &Mat2, m: &HyperelasticParams) -> Result<PlaneStressPoint> {
    let q = log_thickness_stretch(h, m)?;
    let h3 = [[h[0][0], h[0][1], 0.0], [h[1][0], h[1][1], 0.0], [0.0, 0.0, q.exp_m1()]];
    let p3 = piola_from_gradient(&h3, m)?;
    let s3 = cauchy_from_gradient(&h3, m)?;
    let c3 = tangent_from_gradient(&h3, m)?;
    let d = c3[2][2][2][2];
    let mut tangent = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for jj in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    tangent[i][jj][k][l] = c3[i][jj][k][l] - c3[i][jj][2][2] * c3[2][2][k][l] / d;
                }
            }
        }
    }
    Ok(PlaneStressPoint {
        stretch: q.exp(),
        piola: [[p3[0][0], p3[0][1]], [p3[1][0], p3[1][1]]],
        cauchy: [[s3[0][0], s3[0][1]], [s3[1][0], s3[1][1]]],
        tangent,
        energy: energy_from_gradient(&h3, m)?,
    })
}
