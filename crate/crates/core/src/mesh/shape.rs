//! Bilinear quadrilateral shape functions and 2×2 Gauss quadrature.

use crate::error::{Error, Result};

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// 2×2 Gauss points `(ξ, η)` with unit weights.
pub const GAUSS_2X2: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

/// Natural coordinates of the four corner nodes, counter-clockwise.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Shape function values at `(ξ, η)`.
pub fn values(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
    }
    n
}

/// Derivatives `[∂N/∂ξ, ∂N/∂η]` of each shape function at `(ξ, η)`.
pub fn natural_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut d = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        d[a][0] = 0.25 * c[0] * (1.0 + c[1] * eta);
        d[a][1] = 0.25 * c[1] * (1.0 + c[0] * xi);
    }
    d
}

/// Shape data at one quadrature point in physical coordinates.
#[derive(Clone, Copy, Debug)]
pub struct PointData {
    pub n: [f64; 4],
    /// `[∂N/∂x, ∂N/∂y]` per node.
    pub dn: [[f64; 2]; 4],
    pub det_j: f64,
}

/// Evaluates shape functions and physical gradients for an element with
/// nodal coordinates `xy` at natural point `(ξ, η)`.
pub fn evaluate(xy: &[[f64; 2]; 4], xi: f64, eta: f64) -> Result<PointData> {
    let dnat = natural_derivatives(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] += dnat[a][r] * xy[a][c];
            }
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det > 0.0) {
        return Err(Error::numerical("non-positive element Jacobian", det));
    }
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let mut dn = [[0.0; 2]; 4];
    for a in 0..4 {
        for c in 0..2 {
            dn[a][c] = inv[c][0] * dnat[a][0] + inv[c][1] * dnat[a][1];
        }
    }
    Ok(PointData {
        n: values(xi, eta),
        dn,
        det_j: det,
    })
}

/// Shape data at the four Gauss points.
pub fn gauss_points(xy: &[[f64; 2]; 4]) -> Result<[PointData; 4]> {
    let mut out = [PointData {
        n: [0.0; 4],
        dn: [[0.0; 2]; 4],
        det_j: 0.0,
    }; 4];
    for (g, p) in GAUSS_2X2.iter().enumerate() {
        out[g] = evaluate(xy, p[0], p[1])?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        for &(xi, eta) in &[(0.1, -0.3), (0.9, 0.9), (-1.0, 1.0)] {
            let n = values(xi, eta);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let d = natural_derivatives(xi, eta);
            assert!(d.iter().map(|v| v[0]).sum::<f64>().abs() < 1e-15);
            assert!(d.iter().map(|v| v[1]).sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_of_rectangle() {
        let xy = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let p = evaluate(&xy, 0.2, 0.4).unwrap();
        assert!((p.det_j - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clockwise_element_is_rejected() {
        let xy = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(evaluate(&xy, 0.0, 0.0).is_err());
    }
}
