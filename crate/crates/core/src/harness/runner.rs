use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use super::record::{Experiment, ExperimentRecord, FailureRecord};
use crate::analysis::{fit_diffusion_flagged, wigner_time, SystemScales};
use crate::dynamics::{
    central_adiabatic_state, log_time_grid, run_driven, run_frozen, run_quench, CurveParams,
    PropagatorOptions, RunGuards, RunMode, SpreadingCurve, StaticBanded, Trajectory,
};
use crate::ensemble::{
    build_frozen_hamiltonian, derive_seed, sample_banded_matrix, unperturbed_levels, DrivenSystem,
};
use crate::error::{Error, Result};

/// One parameter point of a sweep. `index` keys the seed streams.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSpec {
    pub index: usize,
    pub s0: f64,
    /// Zero for quenches.
    pub fdot: f64,
    pub eps: f64,
}

impl PointSpec {
    pub fn driven(cfg: &RunConfig, index: usize, s0: f64, fdot: f64) -> Self {
        Self {
            index,
            s0,
            fdot,
            eps: cfg.eps_of_fdot(fdot),
        }
    }

    pub fn quench(index: usize, s0: f64, eps: f64) -> Self {
        Self {
            index,
            s0,
            fdot: 0.0,
            eps,
        }
    }

    fn sigma(&self, mode: RunMode) -> f64 {
        match mode {
            RunMode::Quench => 0.0,
            _ => 2.0,
        }
    }

    pub fn t_eps(&self, mode: RunMode, hbar: f64) -> Result<f64> {
        wigner_time(self.eps, self.s0 - self.sigma(mode), hbar)
    }
}

pub fn scales(cfg: &RunConfig) -> SystemScales {
    SystemScales {
        omega0: 1.0,
        omega_cl: cfg.band as f64,
        hbar: cfg.hbar,
        rho: 1.0,
    }
}

/// Log-spaced sample times from `t_cl / 10` to `t_max_factor * t_eps`.
pub fn time_grid(cfg: &RunConfig, t_eps: f64) -> Result<Vec<f64>> {
    let lo = scales(cfg).t_cl() / 10.0;
    let hi = cfg.t_max_factor * t_eps;
    if !(hi > lo) {
        return Err(Error::Validation(format!(
            "t_max = {hi:.4} does not exceed the first sample time {lo:.4}"
        )));
    }
    Ok(log_time_grid(lo, hi, cfg.sample_points))
}

pub fn propagator_options(cfg: &RunConfig, fdot: f64) -> PropagatorOptions {
    let mut opts = PropagatorOptions::for_driving(fdot, cfg.band as f64);
    if let Some(h) = cfg.max_step {
        opts.max_step = h;
    }
    opts.hbar = cfg.hbar;
    opts
}

type Attempt = std::result::Result<(u64, Trajectory), (Vec<u64>, String)>;

fn run_one(
    cfg: &RunConfig,
    point: &PointSpec,
    mode: RunMode,
    seed: u64,
    times: &[f64],
) -> Result<Trajectory> {
    let profile = cfg.profile(point.s0)?;
    let guards = RunGuards::new(cfg.band);
    match mode {
        RunMode::Quench => {
            let ham = StaticBanded {
                diag: unperturbed_levels(cfg.n, cfg.levels, derive_seed(seed, 3)),
                v: sample_banded_matrix(&profile, cfg.n, derive_seed(seed, 1))?,
                eps: point.eps,
            };
            run_quench(&ham, cfg.n / 2, times, cfg.hbar, &guards)
        }
        RunMode::Driven | RunMode::Frozen => {
            let mut sys = DrivenSystem::generate(&profile, cfg.n, point.fdot, seed, cfg.levels)?;
            sys.hbar = cfg.hbar;
            let frozen = build_frozen_hamiltonian(&sys)?;
            if mode == RunMode::Frozen {
                return run_frozen(&frozen, times, &guards);
            }
            let psi0 = central_adiabatic_state(&frozen);
            run_driven(&sys, &psi0, times, &propagator_options(cfg, point.fdot), &guards)
        }
    }
}

/// Runs one realization, retrying once with a fresh seed after a numerical
/// failure. Input errors abort.
fn run_with_retry(
    cfg: &RunConfig,
    point: &PointSpec,
    mode: RunMode,
    r: usize,
    times: &[f64],
) -> Result<Attempt> {
    let mut seeds = Vec::new();
    let mut last = String::new();
    for attempt in 0..2 {
        let seed = cfg.realization_seed(point.index, r, attempt);
        seeds.push(seed);
        match run_one(cfg, point, mode, seed, times) {
            Ok(tr) => return Ok(Ok((seed, tr))),
            Err(e) if e.is_numerical() => last = e.to_string(),
            Err(e) => return Err(e),
        }
    }
    Ok(Err((seeds, last)))
}

/// Ensemble over `cfg.realizations` members for each mode, averaged in
/// realization order. A mode with no surviving member yields no curve.
pub struct EnsembleResult {
    pub curves: Vec<SpreadingCurve>,
    pub failures: Vec<FailureRecord>,
    pub failed_points: Vec<String>,
}

fn thread_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every `(point, mode, realization)` task on the worker pool and folds
/// the results in task order.
pub fn run_ensembles(
    cfg: &RunConfig,
    jobs: &[(PointSpec, RunMode, Vec<f64>)],
) -> Result<EnsembleResult> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = (0..jobs.len())
        .flat_map(|j| (0..cfg.realizations).map(move |r| (j, r)))
        .collect();
    let pool = thread_pool(cfg)?;
    let outcomes: Vec<Result<Attempt>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(j, r)| {
                let (point, mode, times) = &jobs[j];
                run_with_retry(cfg, point, *mode, r, times)
            })
            .collect()
    });

    let mut result = EnsembleResult {
        curves: vec![],
        failures: vec![],
        failed_points: vec![],
    };
    let mut outcomes = outcomes.into_iter();
    for (point, mode, _) in jobs {
        let mut trajectories = Vec::new();
        let mut seeds = Vec::new();
        let mut excluded = Vec::new();
        for r in 0..cfg.realizations {
            match outcomes.next().expect("one outcome per task")? {
                Ok((seed, tr)) => {
                    seeds.push(seed);
                    trajectories.push(tr);
                }
                Err((failed_seeds, message)) => {
                    excluded.extend(&failed_seeds);
                    result.failures.push(FailureRecord {
                        mode: *mode,
                        s0: point.s0,
                        fdot: point.fdot,
                        eps: point.eps,
                        realization: r,
                        seeds: failed_seeds,
                        message,
                    });
                }
            }
        }
        if trajectories.is_empty() {
            result.failed_points.push(format!(
                "{} s0={} fdot={} eps={}: every realization failed",
                mode.as_str(),
                point.s0,
                point.fdot,
                point.eps
            ));
            continue;
        }
        let params = CurveParams {
            s0: point.s0,
            sigma: point.sigma(*mode),
            fdot: point.fdot,
            eps: point.eps,
            dim: cfg.n,
            band: cfg.band,
            hbar: cfg.hbar,
            seeds,
            excluded_seeds: excluded,
        };
        result
            .curves
            .push(SpreadingCurve::from_trajectories(*mode, params, &trajectories)?);
    }
    Ok(result)
}

fn absorb(record: &mut ExperimentRecord, res: EnsembleResult) {
    record.curves.extend(res.curves);
    record.failures.extend(res.failures);
    record.failed_points.extend(res.failed_points);
}

/// Driven and frozen ensembles for every `(s0, fdot)`.
pub fn run_fig1(cfg: &RunConfig) -> Result<ExperimentRecord> {
    let start = Instant::now();
    cfg.validate()?;
    if cfg.fdot_list.is_empty() {
        return Err(Error::Validation("fdot_list is empty".into()));
    }
    let mut modes = Vec::new();
    if cfg.mode.driven() {
        modes.push(RunMode::Driven);
    }
    if cfg.mode.frozen() {
        modes.push(RunMode::Frozen);
    }
    if modes.is_empty() {
        return Err(Error::Validation("fig1 needs mode driven, frozen or all".into()));
    }
    let mut jobs = Vec::new();
    for (i, &s0) in cfg.s0_list.iter().enumerate() {
        for (k, &fdot) in cfg.fdot_list.iter().enumerate() {
            let point = PointSpec::driven(cfg, i * cfg.fdot_list.len() + k, s0, fdot);
            let times = time_grid(cfg, point.t_eps(RunMode::Driven, cfg.hbar)?)?;
            for &m in &modes {
                jobs.push((point, m, times.clone()));
            }
        }
    }
    cfg.check_seed_uniqueness(jobs.len())?;
    let mut record = ExperimentRecord::new(Experiment::Fig1, cfg.clone());
    absorb(&mut record, run_ensembles(cfg, &jobs)?);
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

/// Parameter points of the diffusion sweep, from `x_list` when given.
pub fn fig2_points(cfg: &RunConfig) -> Result<Vec<PointSpec>> {
    let per_s0 = if cfg.x_list.is_empty() {
        cfg.fdot_list.len()
    } else {
        cfg.x_list.len()
    };
    if per_s0 == 0 {
        return Err(Error::Validation("fig2 needs a non-empty fdot_list or x_list".into()));
    }
    let mut points = Vec::new();
    for (i, &s0) in cfg.s0_list.iter().enumerate() {
        for k in 0..per_s0 {
            let fdot = if cfg.x_list.is_empty() {
                cfg.fdot_list[k]
            } else {
                cfg.fdot_of_x(cfg.x_list[k], s0 - 2.0)
            };
            points.push(PointSpec::driven(cfg, i * per_s0 + k, s0, fdot));
        }
    }
    Ok(points)
}

/// Driven ensembles and diffusion fits over `(s0, fdot)`.
pub fn run_fig2(cfg: &RunConfig) -> Result<ExperimentRecord> {
    let start = Instant::now();
    cfg.validate()?;
    let points = fig2_points(cfg)?;
    let sc = scales(cfg);
    let mut record = ExperimentRecord::new(Experiment::Fig2, cfg.clone());
    let mut jobs = Vec::new();
    if cfg.fit_window.1 > cfg.t_max_factor {
        record.warnings.push(format!(
            "fit window ends at {} t_eps beyond the last sample at {} t_eps",
            cfg.fit_window.1, cfg.t_max_factor
        ));
    }
    for p in &points {
        let t_eps = p.t_eps(RunMode::Driven, cfg.hbar)?;
        let x = p.eps.powf(2.0 / (2.0 - (p.s0 - 2.0)));
        if !(x > sc.omega0 && x < sc.omega_cl) {
            record.warnings.push(format!(
                "s0={} fdot={}: X = {x:.4} lies outside ({}, {})",
                p.s0, p.fdot, sc.omega0, sc.omega_cl
            ));
        }
        if p.fdot >= sc.omega_cl {
            record.warnings.push(format!(
                "s0={} fdot={}: the perturbation rotates faster than the bandwidth {}",
                p.s0, p.fdot, sc.omega_cl
            ));
        }
        jobs.push((*p, RunMode::Driven, time_grid(cfg, t_eps)?));
    }
    cfg.check_seed_uniqueness(jobs.len())?;
    absorb(&mut record, run_ensembles(cfg, &jobs)?);
    for c in &record.curves {
        let t_eps = wigner_time(c.params.eps, c.params.s(), c.params.hbar)?;
        let window = (cfg.fit_window.0 * t_eps, cfg.fit_window.1 * t_eps);
        match fit_diffusion_flagged(c, window) {
            Ok(est) => record.estimates.push(est),
            Err(e) => record.warnings.push(format!(
                "s0={} fdot={}: no diffusion fit: {e}",
                c.params.s0, c.params.fdot
            )),
        }
    }
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

/// Quench ensembles over `(s0, eps)`.
pub fn run_quench_sweep(cfg: &RunConfig) -> Result<ExperimentRecord> {
    let start = Instant::now();
    cfg.validate()?;
    if cfg.eps_list.is_empty() {
        return Err(Error::Validation("eps_list is empty".into()));
    }
    let mut jobs = Vec::new();
    for (i, &s0) in cfg.s0_list.iter().enumerate() {
        for (k, &eps) in cfg.eps_list.iter().enumerate() {
            let p = PointSpec::quench(i * cfg.eps_list.len() + k, s0, eps);
            let times = time_grid(cfg, p.t_eps(RunMode::Quench, cfg.hbar)?)?;
            jobs.push((p, RunMode::Quench, times));
        }
    }
    cfg.check_seed_uniqueness(jobs.len())?;
    let mut record = ExperimentRecord::new(Experiment::Quench, cfg.clone());
    absorb(&mut record, run_ensembles(cfg, &jobs)?);
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}
