//! Follower pressure on straight two-node edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pressurized boundary edges and the pressure acting on them.
///
/// Each edge `[a, b]` is traversed from `a` to `b` with the solid on its
/// left, so the normal `e₃ × a_p` points into the solid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollowerBoundary {
    pub edges: Vec<[usize; 2]>,
    pub pressure: f64,
}

/// `n ⊗ a − a ⊗ n` for in-plane unit vectors.
pub fn skew_kernel(n: [f64; 2], a: [f64; 2]) -> [[f64; 2]; 2] {
    let mut k = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            k[i][j] = n[i] * a[j] - a[i] * n[j];
        }
    }
    k
}

/// Consistent nodal force and its derivative for one deformed edge.
///
/// Returns `(f, k)` with `f = [f1x, f1y, f2x, f2y]` and `k[r][c] = ∂f_r/∂x_c`
/// in the same ordering. With linear shape functions the integral over the
/// edge gives `fᵢ = p t l/2 · n` at both nodes, and the linearization uses
/// the contravariant tangent `a¹ = 2 a_p / l`.
pub fn edge_load(x1: [f64; 2], x2: [f64; 2], pressure: f64, thickness: f64) -> Result<([f64; 4], [[f64; 4]; 4])> {
    let d = [x2[0] - x1[0], x2[1] - x1[1]];
    let l = d[0].hypot(d[1]);
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::numerical("degenerate pressurized edge", l));
    }
    let ap = [d[0] / l, d[1] / l];
    let n = [-ap[1], ap[0]];
    let half = 0.5 * pressure * thickness * l;
    let f = [half * n[0], half * n[1], half * n[0], half * n[1]];

    // ∫ N_I N_J,ξ dξ = ±1 with N_J,ξ = ∓1/2; da = t l/2 dξ and a¹ = 2 a_p/l
    let kern = skew_kernel(n, ap);
    let dn = [-0.5, 0.5];
    let mut k = [[0.0; 4]; 4];
    for a in 0..2 {
        for b in 0..2 {
            // ∫ N_a dξ = 1
            let w = pressure * thickness * dn[b];
            for i in 0..2 {
                for j in 0..2 {
                    k[2 * a + i][2 * b + j] = w * kern[i][j];
                }
            }
        }
    }
    Ok((f, k))
}

/// Global follower force and tangent entries for the current configuration.
///
/// `current` holds deformed nodal coordinates. The tangent is returned as
/// `(row, col, ∂F_ext/∂u)` triplets over displacement DOFs.
pub fn follower_load(
    boundary: &FollowerBoundary,
    current: &[[f64; 2]],
    thickness: f64,
) -> Result<(Vec<f64>, Vec<(usize, usize, f64)>)> {
    let mut f = vec![0.0; 2 * current.len()];
    let mut k = Vec::with_capacity(16 * boundary.edges.len());
    for &[a, b] in &boundary.edges {
        let (fe, ke) = edge_load(current[a], current[b], boundary.pressure, thickness)?;
        let dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
        for r in 0..4 {
            f[dofs[r]] += fe[r];
            for c in 0..4 {
                if ke[r][c] != 0.0 {
                    k.push((dofs[r], dofs[c], ke[r][c]));
                }
            }
        }
    }
    Ok((f, k))
}
