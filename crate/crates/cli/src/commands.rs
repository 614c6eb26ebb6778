//! One function per subcommand: run the experiment, collect output files and
//! acceptance checks.

use serde::Serialize;

use qtraj_core::belavkin_diffusive::{solve_diffusive_density, solve_diffusive_sde};
use qtraj_core::belavkin_jump::{solve_jump_density, solve_jump_sde};
use qtraj_core::discrete::{build_unitary, DiscreteModel, InitialState};
use qtraj_core::ensemble::try_map_paths;
use qtraj_core::experiments::stats::{mean_se, MeanSe};
use qtraj_core::experiments::{
    continuous_y2_at, convergence_harness, decay_experiment, discrete_expectation_check, grid_index,
    noise_statistics, unravelling_check, ContinuousKind, ConvergenceReport, DecayOptions, DecayReport,
    ExpectationReport, MasterFlow, NoiseStatistics, UnravellingReport,
};
use qtraj_core::qmath::{trace_distance, WaveFunction};
use qtraj_core::scaling::{residual_scan, ResidualChecks, ResidualReport};
use qtraj_core::table::Table;
use qtraj_core::{ContinuousModel, Execution, MeasurementKind, ModelSpec};

use crate::error::{validation, Result};
use crate::output::{json_bytes, table_csv, Artifact};
use crate::scenario::{Command, Job, Scenario};

/// Largest accepted discrete unitarity and trace-preservation defect.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Largest accepted `|p + q − 1|` along a discrete path.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Largest accepted pure/density trace distance on a shared continuous path.
pub const UNRAVELLING_PATH_TOL: f64 = 5e-3;
pub const EXPECTATION_TOL: f64 = 0.01;
pub const UNRAVEL_TOL: f64 = 0.03;
pub const FIRST_JUMP_KS_TOL: f64 = 0.02;
pub const CONVERGE_KS_TOL: f64 = 0.05;
pub const CONVERGE_DISTANCE_TOL: f64 = 0.02;
pub const NOISE_VARIANCE_TOL: f64 = 0.05;
/// `n^{3/2}·r⁰₁` must stay below this, and is required non-increasing from
/// `n = 2⁸` on.
pub const RESIDUAL_BOUND: f64 = 10.0;
pub const RESIDUAL_TAIL_FROM: u64 = 1 << 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name, passed, detail: detail.into() }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<Artifact>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    experiment: &'static str,
    scenario: &'a Scenario,
    seed: u64,
    stream: u64,
    results: R,
    checks: &'a [Check],
    passed: bool,
}

fn finish<R: Serialize>(job: &Job, mut files: Vec<Artifact>, results: R, checks: Vec<Check>) -> Result<RunOutput> {
    let rng = job.rng_block();
    let report = Report {
        experiment: job.command.name(),
        scenario: &job.scenario,
        seed: rng.seed,
        stream: rng.stream,
        results,
        checks: &checks,
        passed: checks.iter().all(|c| c.passed),
    };
    files.push(Artifact { name: "report.json".into(), bytes: json_bytes(&report)? });
    Ok(RunOutput { files, checks })
}

fn csv(name: &str, t: &Table) -> Result<Artifact> {
    Ok(Artifact { name: name.into(), bytes: table_csv(t)? })
}

fn exec() -> Execution {
    Execution::default()
}

pub fn run(job: &Job) -> Result<RunOutput> {
    match job.command {
        Command::Discrete => discrete(job),
        Command::Jump | Command::Diffusive => continuous(job),
        Command::Converge => converge(job),
        Command::Decay => decay(job),
        Command::Unravel => unravel(job),
        Command::ScalingScan => scaling_scan(job),
    }
}

fn measured_kind(job: &Job) -> ContinuousKind {
    MeasurementKind::of_observable(&job.observable).into()
}

fn initial_state(job: &Job) -> InitialState {
    if job.reference.is_pure_ground() {
        InitialState::Pure(job.psi0)
    } else {
        InitialState::Mixed(job.psi0.dyad())
    }
}

#[derive(Serialize)]
struct DiscreteResults {
    tau: f64,
    n: Option<u64>,
    steps: usize,
    paths: usize,
    unitarity_defect: f64,
    trace_preservation_defect: f64,
    max_normalization_defect: f64,
    outcome_counts: [usize; 2],
    expectation: Option<ExpectationReport>,
    noise: Option<NoiseStatistics>,
}

fn discrete(job: &Job) -> Result<RunOutput> {
    let (spec, n) = match (job.run.n, job.run.tau) {
        (Some(n), _) => (ModelSpec::scaled(job.system, job.reference, job.observable, n)?, Some(n)),
        (None, Some(tau)) => {
            (ModelSpec::new(job.system, job.reference, job.observable, tau, 1.0 / tau.sqrt())?, None)
        }
        (None, None) => return Err(validation("run.n or run.tau is required for discrete")),
    };
    let steps = job.steps()?;
    let paths = job.paths()?;
    let model = DiscreteModel::new(&spec)?;
    let traj = model.run(initial_state(job), steps, job.rng.path(0, 0))?;
    let unitarity = build_unitary(&spec)?.unitarity_defect();
    let trace = model.channel.trace_preservation_defect();
    let norm = traj.probabilities.iter().map(|pq| (pq[0] + pq[1] - 1.0).abs()).fold(0.0, f64::max);
    let ones = traj.outcomes.iter().filter(|w| **w == 1).count();

    let mut checks = vec![
        check("unitarity", unitarity <= STRUCTURAL_TOL, format!("{unitarity:.2e}")),
        check("trace_preservation", trace <= STRUCTURAL_TOL, format!("{trace:.2e}")),
        check("normalization", norm <= NORMALIZATION_TOL, format!("{norm:.2e}")),
    ];
    let expectation = if paths >= 2 {
        let r = discrete_expectation_check(&spec, initial_state(job), steps, paths, job.rng, exec())?;
        checks.push(check(
            "expectation",
            r.distance < EXPECTATION_TOL,
            format!("distance {:.5} (SE {:.5})", r.distance, r.stderr),
        ));
        Some(r)
    } else {
        None
    };
    let noise = match n {
        Some(n) if paths >= 2 && spec.measurement_kind() == MeasurementKind::Diffusive => {
            let ns = job.run.noise_steps.unwrap_or(steps);
            let s = noise_statistics(&spec, initial_state(job), ns, paths, job.rng, exec())?;
            let count = (s.paths * s.steps) as f64;
            let w_target = ns as f64 / n as f64;
            checks.push(check(
                "noise_mean",
                s.mean.abs() <= 3.0 / count.sqrt(),
                format!("{:.3e} (bound {:.3e})", s.mean, 3.0 / count.sqrt()),
            ));
            checks.push(check(
                "noise_variance",
                (s.variance - 1.0).abs() <= NOISE_VARIANCE_TOL,
                format!("{:.5}", s.variance),
            ));
            checks.push(check(
                "partial_sum_variance",
                (s.w_variance - w_target).abs() <= NOISE_VARIANCE_TOL * w_target,
                format!("{:.5} (target {w_target})", s.w_variance),
            ));
            Some(s)
        }
        _ => None,
    };
    let results = DiscreteResults {
        tau: spec.tau,
        n,
        steps,
        paths,
        unitarity_defect: unitarity,
        trace_preservation_defect: trace,
        max_normalization_defect: norm,
        outcome_counts: [traj.outcomes.len() - ones, ones],
        expectation,
        noise,
    };
    finish(job, vec![csv("trajectory.csv", &traj.table())?], results, checks)
}

#[derive(Serialize)]
struct PathSummary {
    steps: usize,
    jumps: Option<usize>,
    max_norm_defect: f64,
    pure_density_distance: f64,
}

#[derive(Serialize)]
struct EnsembleSummary {
    t: Vec<f64>,
    mean_y2: Vec<f64>,
    stderr_y2: Vec<f64>,
    reference_y2: Vec<f64>,
    paths: usize,
    dt: f64,
    seed: u64,
}

#[derive(Serialize)]
struct ContinuousResults {
    path: PathSummary,
    ensemble: Option<EnsembleSummary>,
}

fn continuous(job: &Job) -> Result<RunOutput> {
    let kind = if job.command == Command::Jump { ContinuousKind::Jump } else { ContinuousKind::Diffusive };
    let model = ContinuousModel::from_system(&job.system)?;
    let horizon = job.horizon()?;
    let dt = job.dt()?;
    let paths = job.paths()?;
    let density = job.run.density.unwrap_or(false);
    let rng0 = job.rng.path(0, 0);
    let rho0 = job.psi0.dyad();
    let mut files = Vec::new();
    let mut checks = Vec::new();

    let mut distance = 0.0f64;
    let summary = match kind {
        ContinuousKind::Jump => {
            let pure = solve_jump_sde(&model, &job.psi0, horizon, dt, rng0)?;
            let mixed = solve_jump_density(&model, &rho0, horizon, dt, rng0)?;
            for (a, b) in pure.states.iter().zip(&mixed.states) {
                distance = distance.max(trace_distance(a.dyad().matrix(), b.matrix())?);
            }
            let (table, events, defect) = if density {
                (mixed.table(), mixed.events_table(), mixed.max_norm_defect)
            } else {
                (pure.table(), pure.events_table(), pure.max_norm_defect)
            };
            files.push(csv("trajectory.csv", &table)?);
            files.push(csv("events.csv", &events)?);
            let bound = 10.0 * dt * dt;
            checks.push(check("norm_defect", defect <= bound, format!("{defect:.2e} (bound {bound:.2e})")));
            PathSummary {
                steps: pure.times.len() - 1,
                jumps: Some(pure.jump_times.len()),
                max_norm_defect: defect,
                pure_density_distance: distance,
            }
        }
        ContinuousKind::Diffusive => {
            let pure = solve_diffusive_sde(&model, &job.psi0, horizon, dt, rng0)?;
            let mixed = solve_diffusive_density(&model, &rho0, horizon, dt, rng0)?;
            for (a, b) in pure.states.iter().zip(&mixed.states) {
                distance = distance.max(trace_distance(a.dyad().matrix(), b.matrix())?);
            }
            let (table, defect) =
                if density { (mixed.table(), mixed.max_norm_defect) } else { (pure.table(), pure.max_norm_defect) };
            files.push(csv("path.csv", &table)?);
            PathSummary { steps: pure.times.len() - 1, jumps: None, max_norm_defect: defect, pure_density_distance: distance }
        }
    };
    checks.push(check(
        "pure_density_agreement",
        distance <= UNRAVELLING_PATH_TOL,
        format!("{distance:.2e}"),
    ));

    let ensemble = if paths >= 2 {
        let t_grid = job.run.t_grid.clone().unwrap_or_else(|| vec![horizon]);
        if t_grid.iter().any(|t| *t > horizon) {
            return Err(validation(format!("run.t_grid entries must not exceed run.T = {horizon}")));
        }
        let ks = t_grid.iter().map(|t| grid_index(*t, horizon, dt)).collect::<qtraj_core::Result<Vec<_>>>()?;
        let samples = try_map_paths(exec(), paths, |i| {
            continuous_y2_at(kind, &model, &job.psi0, &ks, horizon, dt, job.rng.path(0, i))
        })?;
        let flow = MasterFlow::new(&model);
        let mut table = Table::new(&[("t", "time"), ("mean_y2", "1"), ("stderr_y2", "1"), ("reference_y2", "1")]);
        let mut s = EnsembleSummary {
            t: t_grid.clone(),
            mean_y2: vec![],
            stderr_y2: vec![],
            reference_y2: vec![],
            paths,
            dt,
            seed: job.rng_block().seed,
        };
        let mut worst = 0.0f64;
        let mut within = true;
        for (j, &t) in t_grid.iter().enumerate() {
            let col: Vec<f64> = samples.iter().map(|p| p[j]).collect();
            let MeanSe { mean, se, .. } = mean_se(&col)?;
            let reference = flow.at(rho0.matrix(), t)?.excited_population();
            within &= (mean - reference).abs() <= 3.0 * se + 0.01;
            worst = worst.max((mean - reference).abs());
            table.push(vec![t, mean, se, reference]);
            s.mean_y2.push(mean);
            s.stderr_y2.push(se);
            s.reference_y2.push(reference);
        }
        files.push(csv("ensemble.csv", &table)?);
        checks.push(check("ensemble_mean", within, format!("largest deviation {worst:.4}")));
        Some(s)
    } else {
        None
    };
    finish(job, files, ContinuousResults { path: summary, ensemble }, checks)
}

fn converge(job: &Job) -> Result<RunOutput> {
    if !job.reference.is_pure_ground() {
        return Err(validation("model.eta must be [1, 0] for converge"));
    }
    let n_list = job.n_list()?;
    if n_list.len() < 2 {
        return Err(validation("run.n_list needs at least two values for converge"));
    }
    let r: ConvergenceReport = convergence_harness(
        measured_kind(job),
        &job.system,
        &job.psi0,
        job.horizon()?,
        &n_list,
        job.paths()?,
        job.dt()?,
        job.rng,
        exec(),
    )?;
    let c = r.checks(CONVERGE_KS_TOL, CONVERGE_DISTANCE_TOL);
    let last = r.rows.last().expect("at least two rows");
    let ks: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.ks)).collect();
    let d: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.distance)).collect();
    let checks = vec![
        check("ks_monotone", c.ks_monotone, ks.join(", ")),
        check("ks_final", c.ks_final, format!("{:.4}", last.ks)),
        check("distance_monotone", c.distance_monotone, d.join(", ")),
        check("distance_final", c.distance_final, format!("{:.4}", last.distance)),
    ];
    let files = vec![csv("convergence.csv", &r.table())?];
    finish(job, files, r, checks)
}

#[derive(Serialize)]
struct DecayResults {
    decay: DecayReport,
    ground_jumps: Option<u64>,
}

fn decay(job: &Job) -> Result<RunOutput> {
    let kind = measured_kind(job);
    let model = ContinuousModel::from_system(&job.system)?;
    let t_grid = job.t_grid()?;
    let (paths, dt) = (job.paths()?, job.dt()?);
    let opts = DecayOptions::default();
    let r = decay_experiment(kind, &model, &job.psi0, &t_grid, paths, dt, job.rng, exec(), &opts)?;
    let mut files = vec![csv("decay.csv", &r.table())?];
    let mut checks = vec![check("exponential_law", r.law_holds, format!("largest deviation {:.4}", r.max_abs_deviation))];
    let mut ground_jumps = None;
    if let Some(j) = &r.jump {
        let mut first = Table::new(&[("i", "1"), ("T1", "time")]);
        for (i, t) in j.first_jump_times.iter().enumerate() {
            first.push(vec![i as f64, *t]);
        }
        let mut hist = Table::new(&[("lo", "time"), ("hi", "time"), ("count", "1")]);
        for b in &j.histogram {
            hist.push(b.to_vec());
        }
        files.push(csv("first_jumps.csv", &first)?);
        files.push(csv("first_jump_histogram.csv", &hist)?);
        let ks = j.ks_exponential.unwrap_or(f64::INFINITY);
        checks.push(check("first_jump_ks", ks < FIRST_JUMP_KS_TOL, format!("{ks:.4}")));
        checks.push(check(
            "absorption",
            j.absorbed_paths == j.first_jump_times.len(),
            format!("{}/{}", j.absorbed_paths, j.first_jump_times.len()),
        ));
        let g = decay_experiment(kind, &model, &WaveFunction::ground(), &t_grid, paths, dt, job.rng.path(1, 0), exec(), &opts)?;
        let total = g.jump.map_or(0, |s| s.total_jumps);
        checks.push(check("ground_never_jumps", total == 0, format!("{total} jumps")));
        ground_jumps = Some(total);
    }
    finish(job, files, DecayResults { decay: r, ground_jumps }, checks)
}

fn unravel(job: &Job) -> Result<RunOutput> {
    let kind = measured_kind(job);
    let model = ContinuousModel::from_system(&job.system)?;
    let t_grid = match &job.run.t_grid {
        Some(g) => g.clone(),
        None => vec![job.horizon()?],
    };
    let (paths, dt) = (job.paths()?, job.dt()?);
    let mut reports: Vec<UnravellingReport> = Vec::new();
    let mut table = Table::new(&[
        ("t", "time"),
        ("distance", "1"),
        ("stderr", "1"),
        ("mean_rho11", "1"),
        ("master_rho11", "1"),
    ]);
    for &t in &t_grid {
        let r = unravelling_check(kind, &model, &job.psi0, t, paths, dt, job.rng, exec())?;
        table.push(vec![t, r.distance, r.stderr, r.mean.0[1][1].re, r.oracle.0[1][1].re]);
        reports.push(r);
    }
    let worst = reports.iter().map(|r| r.distance).fold(0.0, f64::max);
    let checks = vec![check("unravelling", worst < UNRAVEL_TOL, format!("largest distance {worst:.4}"))];
    finish(job, vec![csv("unravel.csv", &table)?], reports, checks)
}

#[derive(Serialize)]
struct ScanResults {
    report: ResidualReport,
    checks: ResidualChecks,
}

fn scaling_scan(job: &Job) -> Result<RunOutput> {
    let n_list = job.n_list()?;
    if n_list.len() < 2 {
        return Err(validation("run.n_list needs at least two values for scaling-scan"));
    }
    let r = residual_scan(&job.system, &n_list)?;
    let c = r.checks(RESIDUAL_TAIL_FROM, RESIDUAL_BOUND);
    let fmt = |v: Vec<f64>| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(", ");
    let diag = fmt(r.rows.iter().map(|row| row.n_r00()).collect());
    let off = fmt(r.rows.iter().map(|row| row.n32_r01()).collect());
    let checks = vec![
        check("diagonal_decreasing", c.diagonal_decreasing, diag),
        check("off_diagonal_bounded", c.off_diagonal_bounded, off.clone()),
        check("off_diagonal_non_increasing", c.off_diagonal_non_increasing, off),
    ];
    let files = vec![csv("residuals.csv", &r.table())?];
    finish(job, files, ScanResults { report: r, checks: c }, checks)
}
