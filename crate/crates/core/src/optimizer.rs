//! Robust min-max optimization loop.
//!
//! Each iteration projects the design into its three realizations, solves
//! pressure and elasticity for each, and hands the three objectives (as
//! bound constraints `f₀ˡ ≤ z`) plus the dilated volume constraint to MMA.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gray_indicator, volume_fraction, DensityFilter, DesignState, Realization};
use crate::mma::{MmaSettings, MmaState};
use crate::sensitivity::{volume_and_sensitivity, Analysis, Evaluation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    /// Permitted volume fraction of the intermediate design `V_i*`.
    pub volume_fraction: f64,
    /// Threshold deviation `Δη` of the eroded and dilated projections.
    pub delta_eta: f64,
    pub max_iterations: usize,
    /// External move limit on the design variables.
    pub move_limit: f64,
    /// Iterations between doublings of β.
    pub beta_interval: usize,
    pub beta_max: f64,
    /// Iterations between updates of the dilated volume target.
    pub volume_update_interval: usize,
    /// Early stop threshold on `‖Δρ‖∞` once β is at its cap.
    pub stop_tolerance: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            volume_fraction: 0.2,
            delta_eta: 0.05,
            max_iterations: 400,
            move_limit: 0.1,
            beta_interval: 50,
            beta_max: 128.0,
            volume_update_interval: 25,
            stop_tolerance: 1e-4,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(Error::config("volume fraction must lie in (0, 1)"));
        }
        if !(0.0..=0.5).contains(&self.delta_eta) {
            return Err(Error::config("delta_eta must lie in [0, 0.5]"));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(Error::config("move limit must lie in (0, 1]"));
        }
        if self.beta_interval == 0 || self.volume_update_interval == 0 {
            return Err(Error::config("schedule intervals must be positive"));
        }
        if !(self.beta_max >= 1.0) {
            return Err(Error::config("beta_max must be at least 1"));
        }
        Ok(())
    }

    pub fn beta_at(&self, iter: usize) -> f64 {
        beta_schedule_with(iter, self.beta_interval, self.beta_max)
    }
}

/// β doubling every 50 iterations from 1, capped at 128.
pub fn beta_schedule(iter: usize) -> f64 {
    beta_schedule_with(iter, 50, 128.0)
}

pub fn beta_schedule_with(iter: usize, interval: usize, beta_max: f64) -> f64 {
    let doublings = (iter.max(1) - 1) / interval;
    if doublings >= 64 {
        return beta_max;
    }
    ((1u64 << doublings) as f64).min(beta_max)
}

/// Dilated volume target that keeps the intermediate design at `target`:
/// `V_d* = V_i* · V(ρ̄ᵈ) / V(ρ̄ⁱ)`.
pub fn dilated_volume_update(target: f64, intermediate_fraction: f64, dilated_fraction: f64) -> f64 {
    target / intermediate_fraction * dilated_fraction
}

/// One row of the convergence log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptRecord {
    pub iter: usize,
    pub beta: f64,
    pub f0_eroded: f64,
    pub f0_intermediate: f64,
    pub f0_dilated: f64,
    pub vf_eroded: f64,
    pub vf_intermediate: f64,
    pub vf_dilated: f64,
    pub mnd_intermediate: f64,
    /// Intermediate output displacement (m).
    pub delta_intermediate: f64,
}

impl OptRecord {
    pub fn objectives(&self) -> [f64; 3] {
        [self.f0_eroded, self.f0_intermediate, self.f0_dilated]
    }

    /// Worst-case objective over the three realizations.
    pub fn minmax(&self) -> f64 {
        self.objectives().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptLog {
    pub records: Vec<OptRecord>,
}

pub const LOG_COLUMNS: [&str; 10] = [
    "iter",
    "beta",
    "f0_eroded",
    "f0_intermediate",
    "f0_dilated",
    "vf_eroded",
    "vf_intermediate",
    "vf_dilated",
    "mnd_intermediate",
    "delta_intermediate",
];

impl OptLog {
    /// CSV text with a header row; floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = LOG_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.beta,
                r.f0_eroded,
                r.f0_intermediate,
                r.f0_dilated,
                r.vf_eroded,
                r.vf_intermediate,
                r.vf_dilated,
                r.mnd_intermediate,
                r.delta_intermediate
            );
        }
        out
    }

    pub fn last(&self) -> Option<&OptRecord> {
        self.records.last()
    }
}

/// Callback data after each completed iteration.
pub struct Progress<'a> {
    pub record: &'a OptRecord,
    pub state: &'a DesignState,
    pub evaluations: &'a [Evaluation; 3],
}

/// Final design and history of a run.
#[derive(Clone, Debug)]
pub struct RunResult {
    /// Last evaluated design.
    pub state: DesignState,
    pub evaluations: [Evaluation; 3],
    pub log: OptLog,
    pub dilated_volume_target: f64,
    pub stopped_early: bool,
}

/// The robust optimization problem: analysis, filter and settings.
pub struct Optimizer<'a> {
    pub analysis: &'a Analysis,
    pub filter: &'a DensityFilter,
    pub settings: OptimizerSettings,
}

impl Optimizer<'_> {
    pub fn run(&self) -> Result<RunResult> {
        self.run_with(|_| Ok(()))
    }

    /// Runs the loop, calling `observe` after every logged iteration.
    pub fn run_with<F>(&self, mut observe: F) -> Result<RunResult>
    where
        F: FnMut(&Progress) -> Result<()>,
    {
        let s = &self.settings;
        s.validate()?;
        let mesh = &self.analysis.problem.mesh;
        let ne = mesh.n_elements();
        let passive = self.analysis.problem.preset.passive_values(ne);
        let design: Vec<usize> = (0..ne).filter(|&e| passive[e].is_none()).collect();
        if design.is_empty() {
            return Err(Error::config("no design elements"));
        }
        let volumes = self.analysis.volumes();

        let mut rho: Vec<f64> = passive.iter().map(|p| p.unwrap_or(s.volume_fraction)).collect();
        let x0: Vec<f64> = design.iter().map(|&e| rho[e]).collect();
        let nd = design.len();
        let mut mma = MmaState::new(
            &x0,
            vec![0.0; nd],
            vec![1.0; nd],
            MmaSettings::standard(vec![1.0, 1.0, 1.0, 0.0], s.move_limit),
        );
        let mut target_dilated = s.volume_fraction;
        let mut log = OptLog::default();
        let mut last = None;
        let mut stopped_early = false;

        for iter in 1..=s.max_iterations {
            let beta = s.beta_at(iter);
            let step = || -> Result<_> {
                let state = DesignState::new(rho.clone(), self.filter, beta, s.delta_eta, passive.clone())?;
                let evaluations = self.evaluate_all(&state)?;
                Ok((state, evaluations))
            };
            let (state, evaluations) = step().map_err(|e| e.at_iteration(iter))?;

            let vf = Realization::ALL.map(|r| volume_fraction(state.physical(r), volumes));
            if iter % s.volume_update_interval == 0 {
                target_dilated = dilated_volume_update(s.volume_fraction, vf[1], vf[2]);
            }
            let record = OptRecord {
                iter,
                beta,
                f0_eroded: evaluations[0].objective,
                f0_intermediate: evaluations[1].objective,
                f0_dilated: evaluations[2].objective,
                vf_eroded: vf[0],
                vf_intermediate: vf[1],
                vf_dilated: vf[2],
                mnd_intermediate: gray_indicator(state.physical(Realization::Intermediate)),
                delta_intermediate: evaluations[1].elastic.delta,
            };
            log::info!(
                "iter {iter:4} beta {beta:5} f0 [{:.4}, {:.4}, {:.4}] vf [{:.4}, {:.4}, {:.4}] mnd {:.4}",
                record.f0_eroded,
                record.f0_intermediate,
                record.f0_dilated,
                vf[0],
                vf[1],
                vf[2],
                record.mnd_intermediate
            );
            observe(&Progress {
                record: &record,
                state: &state,
                evaluations: &evaluations,
            })?;

            // MMA step over the design elements
            let objectives = record.objectives();
            let max_abs = objectives.iter().fold(0.0f64, |a, f| a.max(f.abs()));
            let shift = if max_abs > 0.0 { 2.0 * max_abs } else { 1.0 };
            let volume = volume_and_sensitivity(state.physical(Realization::Dilated), volumes, target_dilated);
            let restrict = |g: &[f64]| design.iter().map(|&e| g[e]).collect::<Vec<f64>>();
            let mut fval: Vec<f64> = objectives.iter().map(|f| f + shift).collect();
            fval.push(volume.value);
            let mut dfdx: Vec<Vec<f64>> = Realization::ALL
                .iter()
                .zip(&evaluations)
                .map(|(&r, ev)| restrict(&state.backprop(&ev.gradient(true), self.filter, r)))
                .collect();
            dfdx.push(restrict(&state.backprop(&volume.gradient, self.filter, Realization::Dilated)));
            let x: Vec<f64> = design.iter().map(|&e| rho[e]).collect();
            let next = mma
                .update(&x, &vec![0.0; nd], &fval, &dfdx)
                .map_err(|e| e.at_iteration(iter))?;

            let change = next.x.iter().zip(&x).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
            for (k, &e) in design.iter().enumerate() {
                rho[e] = next.x[k].clamp(0.0, 1.0);
            }
            log.records.push(record);
            last = Some((state, evaluations));
            if beta >= s.beta_max && change < s.stop_tolerance {
                stopped_early = iter < s.max_iterations;
                break;
            }
        }

        let (state, evaluations) = last.ok_or_else(|| Error::config("max_iterations must be positive"))?;
        Ok(RunResult {
            state,
            evaluations,
            log,
            dilated_volume_target: target_dilated,
            stopped_early,
        })
    }

    /// Evaluates the three realizations, concurrently. With `Δη = 0` they
    /// coincide and one evaluation is shared.
    fn evaluate_all(&self, state: &DesignState) -> Result<[Evaluation; 3]> {
        if state.delta_eta == 0.0 {
            let ev = self.analysis.evaluate(state.physical(Realization::Intermediate))?;
            return Ok([ev.clone(), ev.clone(), ev]);
        }
        let results: Vec<Result<Evaluation>> = Realization::ALL
            .par_iter()
            .map(|&r| self.analysis.evaluate(state.physical(r)))
            .collect();
        let mut it = results.into_iter();
        Ok([it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_schedule_examples() {
        assert_eq!(beta_schedule(1), 1.0);
        assert_eq!(beta_schedule(50), 1.0);
        assert_eq!(beta_schedule(51), 2.0);
        assert_eq!(beta_schedule(351), 128.0);
        assert_eq!(beta_schedule(10_000), 128.0);
        assert_eq!(beta_schedule_with(26, 25, 128.0), 2.0);
    }

    #[test]
    fn volume_update_examples() {
        assert_eq!(dilated_volume_update(0.2, 0.2, 0.31), 0.31);
        assert_eq!(dilated_volume_update(0.2, 0.25, 0.25), 0.2);
        assert!((dilated_volume_update(0.2, 0.25, 0.3) - 0.24).abs() < 1e-15);
    }

    #[test]
    fn csv_has_header_and_one_row_per_record() {
        let rec = OptRecord {
            iter: 1,
            beta: 1.0,
            f0_eroded: -1.0,
            f0_intermediate: -2.0,
            f0_dilated: -1.5,
            vf_eroded: 0.1,
            vf_intermediate: 0.2,
            vf_dilated: 0.3,
            mnd_intermediate: 0.5,
            delta_intermediate: -1e-4,
        };
        assert_eq!(rec.minmax(), -1.0);
        let log = OptLog {
            records: vec![rec.clone(), OptRecord { iter: 2, ..rec }],
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], LOG_COLUMNS.join(","));
        assert!(lines[1].starts_with("1,1,-1,-2,-1.5,"));
    }

    #[test]
    fn settings_validation() {
        assert!(OptimizerSettings::default().validate().is_ok());
        let bad = OptimizerSettings {
            delta_eta: 0.7,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
