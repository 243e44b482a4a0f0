//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line and
//! asserts at its stated tolerance. Run with `--nocapture` to see the lines.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use pacm_core::darcy::{assemble_darcy, solve_pressure, DarcyParams};
use pacm_core::elasticity::MaterialParams;
use pacm_core::fields::{
    build_filter, gray_indicator, realize_three, volume_fraction, DensityFilter, DesignState, Realization,
};
use pacm_core::linalg::SolverKind;
use pacm_core::mesh::{apply_preset, Edge, Mesh, PresetKind, PresetSpec, Problem};
use pacm_core::nlfea::{
    cauchy_stress, edge_load, extract_design, linear_response, pressure_sweep, strain_energy, HyperelasticParams,
    NewtonSettings, NonlinearModel,
};
use pacm_core::optimizer::{Optimizer, OptimizerSettings, RunResult};
use pacm_core::sensitivity::{Analysis, AnalysisParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, pass: bool, detail: String) {
    println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} failed: {detail}");
}

fn analysis(problem: Problem) -> Analysis {
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

/// Worst relative error between the adjoint gradient and central differences
/// over elements with non-negligible gradient.
fn adjoint_error(
    an: &Analysis,
    filter: &DensityFilter,
    rho: &[f64],
    beta: f64,
    delta_eta: f64,
    r: Realization,
    with_load_term: bool,
) -> f64 {
    let passive = an.problem.preset.passive_values(rho.len());
    let state = DesignState::new(rho.to_vec(), filter, beta, delta_eta, passive.clone()).unwrap();
    let ev = an.evaluate(state.physical(r)).unwrap();
    let grad = state.backprop(&ev.gradient(with_load_term), filter, r);
    let f = |x: &[f64]| {
        let s = DesignState::new(x.to_vec(), filter, beta, delta_eta, passive.clone()).unwrap();
        an.objective(s.physical(r)).unwrap()
    };
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let step = 1e-4;
    let mut worst = 0.0f64;
    for k in 0..rho.len() {
        if grad[k].abs() <= 1e-12 * scale {
            continue;
        }
        let mut plus = rho.to_vec();
        let mut minus = rho.to_vec();
        plus[k] += step;
        minus[k] -= step;
        let fd = (f(&plus) - f(&minus)) / (2.0 * step);
        worst = worst.max((grad[k] - fd).abs() / grad[k].abs());
    }
    worst
}

#[test]
fn criterion_1_adjoint_matches_finite_differences() {
    let t0 = Instant::now();
    let problem = Problem::builtin(PresetKind::Inverter, 8, 4, 0.2, 0.1, 0.001, 1e5).unwrap();
    let filter = build_filter(&problem.mesh, 2.5 * problem.mesh.h()).unwrap();
    let an = analysis(problem);
    let ne = an.problem.mesh.n_elements();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut worst_without_load = 0.0f64;
    for _ in 0..20 {
        let rho: Vec<f64> = (0..ne).map(|_| rng.gen_range(0.0..1.0)).collect();
        for beta in [1.0, 8.0] {
            for r in Realization::ALL {
                worst = worst.max(adjoint_error(&an, &filter, &rho, beta, 0.15, r, true));
            }
        }
    }
    let elapsed = t0.elapsed();
    // the same check with the load sensitivity dropped must fail
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let rho: Vec<f64> = (0..ne).map(|_| rng.gen_range(0.0..1.0)).collect();
        for beta in [1.0, 8.0] {
            for r in Realization::ALL {
                worst_without_load = worst_without_load.max(adjoint_error(&an, &filter, &rho, beta, 0.15, r, false));
            }
        }
    }
    report(
        "C1 adjoint",
        worst <= 1e-4 && worst_without_load > 1e-2 && elapsed < Duration::from_secs(30),
        format!("max rel err {worst:.3e} (≤ 1e-4), without load term {worst_without_load:.3e} (> 1e-2), {elapsed:.1?}"),
    );
}

fn strip_problem(nex: usize, ney: usize, lx: f64, ly: f64, pin: f64) -> Problem {
    let mesh = Mesh::build_grid(nex, ney, lx, ly, 1.0).unwrap();
    let mut layout = PresetSpec::builtin(PresetKind::Inverter, lx, ly, 1.0);
    layout.bcs.pressure_zero = vec![Edge::Right];
    layout.bcs.symmetry = None;
    let preset = layout.resolve(&mesh, pin).unwrap();
    apply_preset(mesh, preset).unwrap()
}

#[test]
fn criterion_2_drainage_calibration() {
    let t0 = Instant::now();
    // reference element size 1 mm, so the penetration depth is 2 mm and the
    // 200-element column spans ten penetration depths
    let dp = DarcyParams::with_element_size(0.001);
    let n = 200;
    let length = 10.0 * dp.penetration_depth;
    let pr = strip_problem(n, 1, length, length / n as f64, 1e5);
    let a = assemble_darcy(&pr.mesh, &vec![1.0; n], &dp).unwrap();
    let p = solve_pressure(&a, &pr.preset).unwrap();
    let ratio = p[n / 10] / 1e5;
    // screened diffusion p'' = λ² p on [0, L]: p(x)/p_in = sinh(λ(L − x)) / sinh(λL)
    let lambda = (dp.drainage_solid() / dp.k_solid()).sqrt();
    let oracle = (lambda * (length - dp.penetration_depth)).sinh() / (lambda * length).sinh();
    let elapsed = t0.elapsed();
    report(
        "C2 drainage",
        (ratio - 0.1).abs() <= 0.001 && (ratio - oracle).abs() <= 0.01 * oracle && elapsed < Duration::from_secs(1),
        format!("p(Δs)/p_in = {ratio:.6} (0.1 ± 1%), closed form {oracle:.6}, {elapsed:.1?}"),
    );
}

#[test]
fn criterion_3_void_pressure_is_linear() {
    let t0 = Instant::now();
    let pin = 1e5;
    let pr = strip_problem(40, 8, 0.2, 0.04, pin);
    let ne = pr.mesh.n_elements();
    let a = assemble_darcy(&pr.mesh, &vec![0.0; ne], &DarcyParams::with_element_size(pr.mesh.h())).unwrap();
    let p = solve_pressure(&a, &pr.preset).unwrap();
    let worst = pr
        .mesh
        .coords()
        .iter()
        .zip(&p)
        .map(|(c, v)| (v - pin * (1.0 - c[0] / 0.2)).abs() / pin)
        .fold(0.0, f64::max);
    let elapsed = t0.elapsed();
    report(
        "C3 void profile",
        worst <= 1e-10 && elapsed < Duration::from_secs(1),
        format!("max rel deviation from linear {worst:.2e} (≤ 1e-10), {elapsed:.1?}"),
    );
}

#[test]
fn criterion_4_three_field_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    for k in 0..1000 {
        let n = rng.gen_range(1..200);
        let field: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let volumes: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let beta = [1.0, 2.0, 8.0, 32.0, 128.0][k % 5];
        for delta_eta in [0.05, 0.15] {
            let [ero, int, dil] = realize_three(&field, beta, delta_eta);
            let elementwise = (0..n).all(|e| ero[e] <= int[e] && int[e] <= dil[e]);
            let [ve, vi, vd] = [&ero, &int, &dil].map(|r| volume_fraction(r, &volumes));
            if !elementwise || !(ve <= vi && vi <= vd) {
                violations += 1;
            }
        }
    }
    report(
        "C4 ordering",
        violations == 0,
        format!("{violations} violations over 1000 fields × 2 thresholds"),
    );
}

struct DeskRun {
    problem: Problem,
    result: RunResult,
    elapsed: Duration,
}

fn desk_run() -> DeskRun {
    let t0 = Instant::now();
    let problem = Problem::builtin(PresetKind::Inverter, 100, 50, 0.2, 0.1, 0.001, 1e5).unwrap();
    let filter = build_filter(&problem.mesh, 5.4 * problem.mesh.h()).unwrap();
    let an = analysis(problem.clone());
    let settings = OptimizerSettings {
        volume_fraction: 0.2,
        delta_eta: 0.05,
        max_iterations: 200,
        beta_interval: 25,
        ..Default::default()
    };
    let opt = Optimizer {
        analysis: &an,
        filter: &filter,
        settings,
    };
    let result = opt.run().unwrap();
    DeskRun {
        problem,
        result,
        elapsed: t0.elapsed(),
    }
}

fn shared_desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(desk_run)
}

#[test]
fn criterion_5_desk_scale_inverter() {
    let run = shared_desk_run();
    let last = run.result.log.last().unwrap();
    let mnd = Realization::ALL.map(|r| gray_indicator(run.result.state.physical(r)));
    let [fe, fi, fd] = last.objectives();
    let checks = [
        (
            (last.vf_intermediate - 0.2).abs() <= 0.002,
            format!("(a) V_i = {:.4}", last.vf_intermediate),
        ),
        (
            mnd.iter().all(|&m| m <= 0.02),
            format!("(b) M_nd = {:.2}% / {:.2}% / {:.2}%", 100.0 * mnd[0], 100.0 * mnd[1], 100.0 * mnd[2]),
        ),
        (
            last.delta_intermediate < 0.0,
            format!("(c) Δ_i = {:.4} mm", 1e3 * last.delta_intermediate),
        ),
        (fi <= fe && fi <= fd, format!("(d) f0 e/i/d = {fe:.4} / {fi:.4} / {fd:.4}")),
        (
            run.elapsed < Duration::from_secs(15 * 60),
            format!("runtime {:.1?}", run.elapsed),
        ),
    ];
    let detail = checks.iter().map(|(_, d)| d.as_str()).collect::<Vec<_>>().join(", ");
    report("C5 desk run", checks.iter().all(|(ok, _)| *ok), detail);
}

#[test]
fn criterion_6_nonlinear_verification() {
    // (a) undeformed state
    let m = HyperelasticParams::from_young(3e9, 0.4).unwrap();
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let sigma = cauchy_stress(&identity, &m).unwrap();
    let energy = strain_energy(&identity, &m).unwrap();
    let a_ok = sigma.iter().flatten().all(|&s| s == 0.0) && energy == 0.0;
    report("C6a rest state", a_ok, format!("max |σ| = {:e}, W = {energy:e}", sigma.iter().flatten().fold(0.0f64, |a, s| a.max(s.abs()))));

    // (b) follower tangent against central differences of the edge load
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let x2 = [x1[0] + rng.gen_range(0.1..1.0), x1[1] + rng.gen_range(-1.0..1.0)];
        let (p, t) = (rng.gen_range(1e3..5e6), rng.gen_range(1e-3..1e-2));
        let (_, k) = edge_load(x1, x2, p, t).unwrap();
        let scale = k.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let step = 1e-6;
        for j in 0..4 {
            let shifted = |d: f64| {
                let (mut a, mut b) = (x1, x2);
                if j < 2 {
                    a[j] += d;
                } else {
                    b[j - 2] += d;
                }
                edge_load(a, b, p, t).unwrap().0
            };
            let (fp, fm) = (shifted(step), shifted(-step));
            for i in 0..4 {
                let fd = (fp[i] - fm[i]) / (2.0 * step);
                worst = worst.max((k[i][j] - fd).abs() / scale);
            }
        }
    }
    report("C6b follower tangent", worst <= 1e-6, format!("max rel err {worst:.2e} over 200 edges"));

    // (c) and (d) on the thresholded desk design
    let run = shared_desk_run();
    let rho = run.result.state.physical(Realization::Intermediate);
    let ex = extract_design(&run.problem, rho, 0.85, 1e5).unwrap();
    let model = NonlinearModel::new(&ex.structure, &ex.boundary.edges, m).unwrap();
    let p_small = 0.01e5;
    let linear = linear_response(&ex.structure, &ex.boundary.edges, &m, p_small).unwrap()[ex.structure.output_dof];
    let nonlinear = model
        .solve(p_small, &NewtonSettings { load_steps: 1, ..Default::default() })
        .unwrap()
        .output_displacement();
    let c_ok = nonlinear.is_some_and(|d| (d - linear).abs() <= 0.01 * linear.abs());
    report(
        "C6c small-strain limit",
        c_ok,
        format!("0.01 bar: nonlinear {nonlinear:?} m, linear {linear:e} m"),
    );

    let pressures = [10e5, 25e5, 50e5];
    let results = pressure_sweep(&model, &pressures, &NewtonSettings::default()).unwrap();
    let deltas: Vec<Option<f64>> = results.iter().map(|r| r.output_displacement()).collect();
    let d_ok = deltas.iter().all(Option::is_some)
        && deltas.windows(2).all(|w| w[1].unwrap().abs() > w[0].unwrap().abs());
    let shown: Vec<String> = deltas
        .iter()
        .map(|d| d.map_or("failed".to_string(), |v| format!("{:.3} mm", 1e3 * v)))
        .collect();
    report("C6d pressure sweep", d_ok, format!("Δ at 10/25/50 bar: {}", shown.join(", ")));
}

#[test]
fn criterion_7_gray_indicator() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let binary: Vec<f64> = (0..500).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
    let (g0, g1) = (gray_indicator(&binary), gray_indicator(&[0.5; 500]));
    report(
        "C7 gray indicator",
        g0 == 0.0 && g1 == 1.0,
        format!("binary {:.1}%, all-0.5 {:.1}%", 100.0 * g0, 100.0 * g1),
    );
}

#[test]
fn criterion_8_determinism() {
    let first = shared_desk_run().result.log.to_csv();
    let second = desk_run().result.log.to_csv();
    let rows = first.lines().count() - 1;
    report(
        "C8 determinism",
        first == second,
        format!("{rows} logged iterations, CSVs {}", if first == second { "identical" } else { "differ" }),
    );
}
