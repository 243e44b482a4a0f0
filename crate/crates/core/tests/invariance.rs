use pacm_core::darcy::DarcyParams;
use pacm_core::elasticity::MaterialParams;
use pacm_core::linalg::SolverKind;
use pacm_core::mesh::{apply_preset, PresetKind, PresetSpec, Problem};
use pacm_core::sensitivity::{Analysis, AnalysisParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn analysis(problem: Problem) -> Analysis {
    let h = problem.mesh.h();
    let params = AnalysisParams {
        material: MaterialParams::default(),
        darcy: DarcyParams::with_element_size(h),
        objective_scale: 1000.0,
        solver: SolverKind::Direct,
    };
    Analysis::new(problem, params).unwrap()
}

#[test]
fn node_renumbering_leaves_objective_and_gradient_unchanged() {
    let base = Problem::builtin(PresetKind::Inverter, 12, 6, 0.2, 0.1, 0.001, 1e5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut perm: Vec<usize> = (0..base.mesh.n_nodes()).collect();
    perm.shuffle(&mut rng);
    let mesh = base.mesh.renumbered(&perm);
    let layout = PresetSpec::builtin(PresetKind::Inverter, 0.2, 0.1, 0.001);
    let preset = layout.resolve(&mesh, 1e5).unwrap();
    let shuffled = apply_preset(mesh, preset).unwrap();

    let (a, b) = (analysis(base), analysis(shuffled));
    let rho: Vec<f64> = (0..72).map(|_| rng.gen_range(0.05..1.0)).collect();
    let (ea, eb) = (a.evaluate(&rho).unwrap(), b.evaluate(&rho).unwrap());
    assert!((ea.objective - eb.objective).abs() <= 1e-9 * ea.objective.abs());
    let (ga, gb) = (ea.gradient(true), eb.gradient(true));
    let scale = ga.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for (x, y) in ga.iter().zip(&gb) {
        assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
    }
    for (old, &new) in perm.iter().enumerate() {
        assert!((ea.pressure[old] - eb.pressure[new]).abs() <= 1e-9 * 1e5);
    }
}
