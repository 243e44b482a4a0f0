use pacm_core::darcy::{drainage_coefficient, flow_coefficient, smooth_heaviside, DarcyParams};
use pacm_core::elasticity::MaterialParams;
use pacm_core::fields::{backprop, build_filter, project_derivative, project_value};
use pacm_core::io::{cell_to_point, extract_contour, VtkGrid};
use pacm_core::linalg::SolverKind;
use pacm_core::mesh::{Mesh, PresetKind, Problem};
use pacm_core::optimizer::{Optimizer, OptimizerSettings};
use pacm_core::sensitivity::{Analysis, AnalysisParams};
use proptest::prelude::*;

fn analysis(kind: PresetKind, nex: usize, ney: usize) -> Analysis {
    let problem = Problem::builtin(kind, nex, ney, 0.2, 0.1, 0.001, 1e5).unwrap();
    let h = problem.mesh.h();
    let params = AnalysisParams {
        material: MaterialParams::default(),
        darcy: DarcyParams::with_element_size(h),
        objective_scale: 1000.0,
        solver: SolverKind::Direct,
    };
    Analysis::new(problem, params).unwrap()
}

/// Winding number of `loops` around `p`.
fn winding(loops: &[Vec<[f64; 2]>], p: [f64; 2]) -> i32 {
    let mut w = 0;
    for l in loops {
        for s in l.windows(2) {
            let (a, b) = (s[0], s[1]);
            let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
            if a[1] <= p[1] && b[1] > p[1] && side > 0.0 {
                w += 1;
            } else if a[1] > p[1] && b[1] <= p[1] && side < 0.0 {
                w -= 1;
            }
        }
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothed_step_is_bounded_and_monotone(
        a in 0.0f64..=1.0, b in 0.0f64..=1.0, beta in 0.5f64..50.0, eta in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (hl, hh) = (smooth_heaviside(lo, beta, eta), smooth_heaviside(hi, beta, eta));
        prop_assert!((0.0..=1.0).contains(&hl) && (0.0..=1.0).contains(&hh));
        prop_assert!(hl <= hh);
        prop_assert_eq!(smooth_heaviside(0.0, beta, eta), 0.0);
        prop_assert!((smooth_heaviside(1.0, beta, eta) - 1.0).abs() <= 1e-15);

        let p = DarcyParams::with_element_size(0.001);
        prop_assert!(flow_coefficient(lo, &p).unwrap() >= flow_coefficient(hi, &p).unwrap());
        prop_assert!(drainage_coefficient(lo, &p).unwrap() <= drainage_coefficient(hi, &p).unwrap());
    }

    #[test]
    fn projection_is_monotone_in_density_and_threshold(
        a in 0.0f64..=1.0, b in 0.0f64..=1.0, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0, beta in 1.0f64..128.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (el, eh) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        for v in [lo, hi] {
            let x = project_value(v, beta, el);
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert!(project_value(v, beta, eh) <= x);
        }
        prop_assert!(project_value(lo, beta, el) <= project_value(hi, beta, el));
    }

    #[test]
    fn backprop_is_the_adjoint_of_the_linearized_map(
        rho in proptest::collection::vec(0.0f64..=1.0, 24),
        d_rho in proptest::collection::vec(-1.0f64..=1.0, 24),
        g in proptest::collection::vec(-1.0f64..=1.0, 24),
        beta in 1.0f64..64.0,
        eta in 0.3f64..0.7,
    ) {
        let mesh = Mesh::build_grid(6, 4, 0.6, 0.4, 0.01).unwrap();
        let filter = build_filter(&mesh, 0.25).unwrap();
        let tilde = filter.apply(&rho);
        let slope = project_derivative(&tilde, beta, eta);
        let forward: Vec<f64> = filter.apply(&d_rho).iter().zip(&slope).map(|(x, s)| x * s).collect();
        let lhs: f64 = forward.iter().zip(&g).map(|(a, b)| a * b).sum();
        let back = backprop(&g, &tilde, &filter, beta, eta);
        let rhs: f64 = d_rho.iter().zip(&back).map(|(a, b)| a * b).sum();
        let scale: f64 = forward.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn vtk_round_trip_keeps_twelve_digits(values in proptest::collection::vec(-1e6f64..1e6, 6)) {
        let mesh = Mesh::build_grid(3, 2, 0.3, 0.2, 0.01).unwrap();
        let text = VtkGrid::from_mesh(&mesh, "p").with_cell_scalar("v", values.clone()).to_vtk_string().unwrap();
        let back = VtkGrid::parse(&text).unwrap();
        for (a, b) in values.iter().zip(back.cell_scalar("v").unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn contours_wind_once_around_solid_nodes(
        rho in proptest::collection::vec(0.0f64..=1.0, 48),
        threshold in 0.2f64..0.9,
    ) {
        let (nex, ney) = (8, 6);
        let mesh = Mesh::build_grid(nex, ney, 0.8, 0.6, 0.01).unwrap();
        let set = extract_contour(&mesh, &rho, threshold).unwrap();
        for l in &set.loops {
            prop_assert_eq!(l.first(), l.last());
        }
        let nodal = cell_to_point(mesh.elements(), mesh.n_nodes(), &rho);
        for j in 1..ney {
            for i in 1..nex {
                let n = mesh.grid_node(i, j);
                if (nodal[n] - threshold).abs() < 1e-9 {
                    continue;
                }
                let expected = i32::from(nodal[n] >= threshold);
                prop_assert_eq!(winding(&set.loops, mesh.coords()[n]), expected, "node ({}, {})", i, j);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn strain_energy_is_positive_and_output_is_a_dof_value(
        rho in proptest::collection::vec(0.0f64..=1.0, 50),
    ) {
        let an = analysis(PresetKind::Inverter, 10, 5);
        let ev = an.evaluate(&rho).unwrap();
        prop_assert!(ev.elastic.se > 0.0);
        prop_assert_eq!(ev.elastic.delta, ev.elastic.u[an.problem.preset.output_dof]);
    }
}

#[test]
fn gradients_vanish_on_passive_elements() {
    let an = analysis(PresetKind::Gripper, 20, 10);
    let passive = an.problem.preset.passive_values(200);
    assert!(passive.iter().any(Option::is_some));
    let rho: Vec<f64> = (0..200).map(|e| 0.2 + 0.6 * ((e * 37 % 200) as f64 / 200.0)).collect();
    let ev = an.evaluate(&rho).unwrap();
    for (e, p) in passive.iter().enumerate() {
        if p.is_some() {
            assert_eq!(ev.theta_objective[e], 0.0);
            assert_eq!(ev.theta_load[e], 0.0);
        }
    }
}

#[test]
fn iterates_respect_bounds_and_passive_values() {
    let an = analysis(PresetKind::Gripper, 20, 10);
    let filter = build_filter(&an.problem.mesh, 2.5 * an.problem.mesh.h()).unwrap();
    let passive = an.problem.preset.passive_values(200);
    let opt = Optimizer {
        analysis: &an,
        filter: &filter,
        settings: OptimizerSettings {
            max_iterations: 6,
            ..Default::default()
        },
    };
    let mut seen = 0;
    opt.run_with(|p| {
        seen += 1;
        for (e, r) in p.state.rho.iter().enumerate() {
            assert!((0.0..=1.0).contains(r));
            if let Some(v) = passive[e] {
                assert_eq!(*r, v);
                for phys in &p.state.physical {
                    assert_eq!(phys[e], v);
                }
            }
        }
        let rec = p.record;
        assert_eq!(rec.minmax(), rec.f0_eroded.max(rec.f0_intermediate).max(rec.f0_dilated));
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, 6);
}
