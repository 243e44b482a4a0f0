use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use pacm_core::error::{Error, Result};
use pacm_core::fields::{build_filter, gray_indicator, Realization};
use pacm_core::io::{export_csv, extract_contour, read_field, write_field, RunConfig, VtkGrid};
use pacm_core::mesh::Problem;
use pacm_core::nlfea::{
    extract_design, linear_response, pressure_sweep, HyperelasticParams, NonlinearModel, Structure, SweepTable,
};
use pacm_core::optimizer::Optimizer;
use pacm_core::sensitivity::Analysis;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_design(path: &Path, problem: &Problem) -> Result<Vec<f64>> {
    let rho = read_field(path)?;
    let ne = problem.mesh.n_elements();
    if rho.len() != ne {
        return Err(Error::config(format!(
            "{} has {} values but the mesh has {ne} elements",
            path.display(),
            rho.len()
        )));
    }
    if let Some(v) = rho.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::config(format!("{}: density {v} outside [0, 1]", path.display())));
    }
    Ok(rho)
}

fn write_contours(cfg: &RunConfig, problem: &Problem, rho_bar: &[f64], threshold: f64, dir: &Path) -> Result<usize> {
    let contours = extract_contour(&problem.mesh, rho_bar, threshold)?;
    contours.write_text(&dir.join("contour.txt"))?;
    if cfg.output.dxf {
        contours.write_dxf(&dir.join("contour.dxf"))?;
    }
    Ok(contours.loops.len())
}

pub fn optimize(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output.dir;
    let checkpoints = dir.join("checkpoints");
    create_dir(&checkpoints)?;
    write_text(&dir.join("config.toml"), &cfg.to_toml_string())?;

    let problem = cfg.build_problem()?;
    info!(
        "{} preset, {}×{} elements, filter radius {:.3e} m",
        cfg.mesh.preset,
        cfg.mesh.nex,
        cfg.mesh.ney,
        cfg.filter_radius()
    );
    let filter = build_filter(&problem.mesh, cfg.filter_radius())?;
    let analysis = Analysis::new(problem, cfg.analysis_params())?;
    let optimizer = Optimizer {
        analysis: &analysis,
        filter: &filter,
        settings: cfg.optimizer.clone(),
    };
    let interval = cfg.output.checkpoint_interval;
    let result = optimizer.run_with(|p| {
        let r = p.record;
        if r.iter == 1 || r.iter % 10 == 0 {
            info!(
                "iter {:4}  beta {:5}  f0 e/i/d {:.4} {:.4} {:.4}  V_i {:.4}  M_nd {:.2}%",
                r.iter,
                r.beta,
                r.f0_eroded,
                r.f0_intermediate,
                r.f0_dilated,
                r.vf_intermediate,
                100.0 * r.mnd_intermediate
            );
        }
        if interval > 0 && r.iter % interval == 0 {
            write_field(&checkpoints.join(format!("rho_{:04}.txt", r.iter)), &p.state.rho)?;
        }
        Ok(())
    })?;

    if cfg.output.csv {
        export_csv(&result.log, &dir.join("log.csv"))?;
    }
    let state = &result.state;
    write_field(&dir.join("rho.txt"), &state.rho)?;
    for r in Realization::ALL {
        write_field(&dir.join(format!("rho_bar_{r}.txt")), state.physical(r))?;
    }
    let mesh = &analysis.problem.mesh;
    if cfg.output.vtk {
        let ev = &result.evaluations[Realization::Intermediate.index()];
        let mut grid = VtkGrid::from_mesh(mesh, "pacm optimized design")
            .with_cell_scalar("rho", state.rho.clone())
            .with_cell_scalar("rho_tilde", state.rho_tilde.clone());
        for r in Realization::ALL {
            grid = grid.with_cell_scalar(&format!("rho_bar_{r}"), state.physical(r).to_vec());
        }
        grid.with_point_scalar("pressure", ev.pressure.clone())
            .with_point_vector("displacement", &ev.elastic.u)
            .write(&dir.join("design.vtk"))?;
    }
    let intermediate = state.physical(Realization::Intermediate);
    if cfg.output.contour {
        let loops = write_contours(cfg, &analysis.problem, intermediate, cfg.verify.threshold, dir)?;
        info!("{loops} contour loops at threshold {}", cfg.verify.threshold);
    }
    if let Some(last) = result.log.last() {
        println!(
            "iterations {}  f0 e/i/d {:.6} {:.6} {:.6}  V_i {:.4}  M_nd {:.2}%  delta_i {:.4} mm",
            last.iter,
            last.f0_eroded,
            last.f0_intermediate,
            last.f0_dilated,
            last.vf_intermediate,
            100.0 * gray_indicator(intermediate),
            1e3 * last.delta_intermediate
        );
    }
    println!("results written to {}", dir.display());
    Ok(())
}

fn structure_grid(s: &Structure, title: &str, u: &[f64]) -> VtkGrid {
    VtkGrid {
        title: title.to_string(),
        points: s.coords.clone(),
        cells: s.elements.clone(),
        ..Default::default()
    }
    .with_point_vector("displacement", u)
}

pub fn verify(cfg: &RunConfig, design: &Path) -> Result<()> {
    let problem = cfg.build_problem()?;
    let rho_bar = read_design(design, &problem)?;
    let dir = cfg.output.dir.join("verify");
    create_dir(&dir)?;
    let material = HyperelasticParams::from_young(cfg.material.e_solid, cfg.material.poisson)?;
    let mut ex = extract_design(&problem, &rho_bar, cfg.verify.threshold, cfg.darcy.input_pressure)?;
    if let Some(edges) = &cfg.verify.pressure_edges {
        ex.override_edges(edges)?;
    }
    let s = &ex.structure;
    info!(
        "extracted {} elements, {} nodes, {} pressurized edges",
        s.elements.len(),
        s.n_nodes(),
        ex.boundary.edges.len()
    );
    let model = NonlinearModel::new(s, &ex.boundary.edges, material)?;
    let pressures = &cfg.verify.pressures;
    let results = pressure_sweep(&model, pressures, &cfg.verify.newton)?;

    let mut linear = Vec::with_capacity(pressures.len());
    for &p in pressures {
        linear.push(Some(linear_response(s, &ex.boundary.edges, &material, p)?[s.output_dof]));
    }
    let label = design
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "design".into());
    let table = SweepTable {
        pressures: pressures.clone(),
        rows: vec![
            (label.clone(), results.iter().map(|r| r.output_displacement()).collect()),
            (format!("{label} (linear)"), linear),
        ],
    };
    write_text(&dir.join("sweep.csv"), &table.to_csv())?;

    for (p, res) in pressures.iter().zip(&results) {
        let tag = format!("{}bar", p / 1e5);
        for (k, step) in res.history.iter().enumerate() {
            let title = format!("pressure {:.6e} Pa", step.pressure);
            structure_grid(s, &title, &step.u).write(&dir.join(format!("{tag}_step{:02}.vtk", k + 1)))?;
        }
        match (&res.failure, res.output_displacement()) {
            (None, Some(d)) => println!("{:>6} bar: delta {:.4} mm", p / 1e5, 1e3 * d),
            (failure, _) => {
                let reached = res.final_step().map_or(0.0, |st| st.pressure);
                warn!(
                    "{} bar failed after reaching {:.3} bar: {}",
                    p / 1e5,
                    reached / 1e5,
                    failure.as_deref().unwrap_or("unknown")
                );
                println!("{:>6} bar: failed", p / 1e5);
            }
        }
    }
    println!("sweep written to {}", dir.join("sweep.csv").display());
    Ok(())
}

pub fn extract(cfg: &RunConfig, design: &Path, threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let problem = cfg.build_problem()?;
    let rho_bar = read_design(design, &problem)?;
    let dir: PathBuf = cfg.output.dir.clone();
    create_dir(&dir)?;
    let loops = write_contours(cfg, &problem, &rho_bar, threshold, &dir)?;
    println!("{loops} loops written to {}", dir.join("contour.txt").display());
    Ok(())
}

pub fn export(cfg: &RunConfig, design: &Path) -> Result<()> {
    let problem = cfg.build_problem()?;
    let rho_bar = read_design(design, &problem)?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let analysis = Analysis::new(problem, cfg.analysis_params())?;
    let ev = analysis.evaluate(&rho_bar)?;
    let path = dir.join("export.vtk");
    VtkGrid::from_mesh(&analysis.problem.mesh, "pacm analysis")
        .with_cell_scalar("rho_bar", rho_bar)
        .with_point_scalar("pressure", ev.pressure.clone())
        .with_point_vector("displacement", &ev.elastic.u)
        .write(&path)?;
    println!(
        "f0 {:.6}  delta {:.4} mm  written to {}",
        ev.objective,
        1e3 * ev.elastic.delta,
        path.display()
    );
    Ok(())
}
