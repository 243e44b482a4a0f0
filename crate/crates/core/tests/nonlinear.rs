use std::f64::consts::PI;

use pacm_core::mesh::Mesh;
use pacm_core::nlfea::{HyperelasticParams, NewtonSettings, NonlinearModel, Structure};

fn material() -> HyperelasticParams {
    HyperelasticParams::from_young(3e9, 0.4).unwrap()
}

/// 8×2 cantilever clamped on the left, rotated by `angle` about the origin,
/// with the top face pressurized.
fn cantilever(angle: f64) -> (Structure, Vec<[usize; 2]>) {
    let mesh = Mesh::build_grid(8, 2, 0.08, 0.01, 0.001).unwrap();
    let (c, s) = (angle.cos(), angle.sin());
    let coords = mesh.coords().iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
    let fixed_dofs = (0..3).flat_map(|j| {
        let n = mesh.grid_node(0, j);
        [2 * n, 2 * n + 1]
    });
    let edges = (0..8).map(|i| [mesh.grid_node(i + 1, 2), mesh.grid_node(i, 2)]).collect();
    let structure = Structure {
        coords,
        elements: mesh.elements().to_vec(),
        thickness: 0.001,
        fixed_dofs: fixed_dofs.collect(),
        output_dof: 2 * mesh.grid_node(8, 2) + 1,
        output_direction: 1.0,
        spring_stiffness: 0.0,
    };
    (structure, edges)
}

#[test]
fn response_rotates_with_the_model() {
    let settings = NewtonSettings {
        tolerance: 1e-11,
        ..Default::default()
    };
    let pressure = 2e5;
    let (s0, e0) = cantilever(0.0);
    let angle = 0.7;
    let (s1, e1) = cantilever(angle);
    let u0 = NonlinearModel::new(&s0, &e0, material()).unwrap().solve(pressure, &settings).unwrap();
    let u1 = NonlinearModel::new(&s1, &e1, material()).unwrap().solve(pressure, &settings).unwrap();
    assert!(u0.converged && u1.converged, "{:?} {:?}", u0.failure, u1.failure);
    let (u0, u1) = (&u0.final_step().unwrap().u, &u1.final_step().unwrap().u);
    let scale = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // large enough to be outside the linear range
    assert!(scale > 1e-3, "tip deflection {scale}");
    let (c, s) = (angle.cos(), angle.sin());
    for n in 0..s0.n_nodes() {
        let rotated = [c * u0[2 * n] - s * u0[2 * n + 1], s * u0[2 * n] + c * u0[2 * n + 1]];
        for k in 0..2 {
            assert!((rotated[k] - u1[2 * n + k]).abs() <= 1e-8 * scale, "node {n}: {:e}", (rotated[k] - u1[2 * n + k]).abs() / scale);
        }
    }
}

/// Half ring clamped at both ends and inflated from the inside.
fn arch() -> (Structure, Vec<[usize; 2]>) {
    let (nr, nt) = (2, 24);
    let node = |i: usize, j: usize| j * (nr + 1) + i;
    let mut coords = Vec::new();
    for j in 0..=nt {
        let theta = PI * j as f64 / nt as f64;
        for i in 0..=nr {
            let r = 0.1 + 0.005 * i as f64 / nr as f64;
            coords.push([r * theta.cos(), r * theta.sin()]);
        }
    }
    let mut elements = Vec::new();
    for j in 0..nt {
        for i in 0..nr {
            elements.push([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
        }
    }
    let fixed_dofs = (0..=nr).flat_map(|i| [node(i, 0), node(i, nt)]).flat_map(|n| [2 * n, 2 * n + 1]);
    let edges = (0..nt).map(|j| [node(0, j + 1), node(0, j)]).collect();
    let structure = Structure {
        coords,
        elements,
        thickness: 0.001,
        fixed_dofs: fixed_dofs.collect(),
        output_dof: 2 * node(nr, nt / 2) + 1,
        output_direction: 1.0,
        spring_stiffness: 0.0,
    };
    (structure, edges)
}

#[test]
fn follower_tangent_restores_quadratic_convergence() {
    let (s, edges) = arch();
    let model = NonlinearModel::new(&s, &edges, material()).unwrap();
    let pressure = 5e6;
    let full = NewtonSettings {
        load_steps: 4,
        tolerance: 1e-12,
        ..Default::default()
    };
    let degraded = NewtonSettings {
        follower_tangent: false,
        ..full
    };
    let a = model.solve(pressure, &full).unwrap();
    let b = model.solve(pressure, &degraded).unwrap();
    assert!(a.converged, "{:?}", a.failure);
    let crown = a.output_displacement().unwrap();
    assert!(crown > 1e-3, "crown rise {crown}");

    // order estimate from the last three residuals above round-off
    let order = |residuals: &[f64]| {
        let r: Vec<f64> = residuals.iter().copied().filter(|&v| v > 1e-10).collect();
        assert!(r.len() >= 3, "{residuals:?}");
        let k = r.len() - 1;
        (r[k] / r[k - 1]).ln() / (r[k - 1] / r[k - 2]).ln()
    };
    for step in &a.history {
        let q = order(&step.residuals);
        assert!(q > 1.6, "order {q} from {:?}", step.residuals);
    }
    // without the load tangent the rate drops to linear
    assert!(b.converged, "{:?}", b.failure);
    for step in &b.history {
        let q = order(&step.residuals);
        assert!(q < 1.3, "order {q} from {:?}", step.residuals);
    }
    let iterations = |res: &pacm_core::nlfea::NonlinearResult| res.history.iter().map(|s| s.iterations).sum::<usize>();
    assert!(iterations(&b) > 2 * iterations(&a));
    let d = b.output_displacement().unwrap();
    assert!((d - crown).abs() <= 1e-8 * crown.abs());
}
