//! `run`, `verify`, `converge` and `sweep`.

use std::io;
use std::path::{Path, PathBuf};

use nematic_core::diagnostics::{
    continuous_dependence_metric, eta_thresholds, identity_suite, observed_orders, oracle_check,
    strictly_decreasing, threshold_check, CheckOutcome, CheckStatus, IdentityOptions, SigmaSFn,
    ThresholdReport,
};
use nematic_core::dynamics::{run, RunError, RunOutput, SimulationState, Stepper, StepperConfig};
use nematic_core::field::{
    random_initial_q, validate_coefficients, Coefficients, QTensorField, ScalarField,
    VelocityField,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::io::{fmt_f64, write_snapshot, SeriesWriter};

/// Overrides the directory that relative `output.dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "NEMATIC_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("coefficients rejected: {0}")]
    Coefficients(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("check failed: {0}")]
    Check(String),
    #[error("numerical blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },
}

impl CliError {
    /// 1 check failure, 2 configuration or i/o problem, 3 blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) | CliError::Coefficients(_) | CliError::Io(_) => 2,
            CliError::BlowUp { .. } => 3,
        }
    }
}

/// `output.dir`, placed under `$NEMATIC_OUTPUT_ROOT` when that is set and the
/// directory is relative.
pub fn output_dir(cfg: &RunConfig, root: Option<&Path>) -> PathBuf {
    match root {
        Some(r) if cfg.output_dir.is_relative() => r.join(&cfg.output_dir),
        _ => cfg.output_dir.clone(),
    }
}

pub fn env_output_root() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from)
}

pub fn stepper_for(cfg: &RunConfig) -> Result<Stepper, CliError> {
    Stepper::new(cfg.grid(), cfg.coefficients, StepperConfig::new(cfg.dt))
        .map_err(|e| CliError::Coefficients(e.to_string()))
}

/// Initial state described by the `[init]` section.
pub fn initial_state(cfg: &RunConfig, stepper: &Stepper) -> Result<SimulationState, CliError> {
    let grid = cfg.grid();
    let init = &cfg.init;
    let q = if init.q_linf == 0.0 {
        QTensorField::zeros(grid)
    } else if init.max_mode == 0 {
        // constant director angle derived from the seed
        let theta = (init.seed as f64 * 2.399_963_229_728_653).rem_euclid(std::f64::consts::TAU);
        let r = init.q_linf / 2f64.sqrt();
        QTensorField::new(
            ScalarField::constant(grid, r * theta.cos()),
            ScalarField::constant(grid, r * theta.sin()),
        )
    } else {
        random_initial_q(grid, init.seed, init.max_mode, init.q_linf)
            .map_err(|e| ConfigError::Invalid { key: "init", reason: e.to_string() })?
    };
    let u = if init.u_mode == 0 {
        VelocityField::zeros(grid)
    } else {
        let k = std::f64::consts::TAU * init.u_mode as f64;
        let a = init.u_amp;
        stepper.admissible_velocity(&VelocityField::new(
            ScalarField::from_fn(grid, |x, y| a * (k * x).sin() * (k * y).cos()),
            ScalarField::from_fn(grid, |x, y| -a * (k * x).cos() * (k * y).sin()),
        ))
    };
    Ok(SimulationState::new(0.0, u, q))
}

fn blow_up(e: RunError) -> CliError {
    match e {
        RunError::Step { t, source, .. } => CliError::BlowUp {
            t,
            reason: source.to_string(),
        },
        other => CliError::Check(other.to_string()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub steps: usize,
    pub final_t: f64,
    pub max_q_linf: f64,
    pub final_total: f64,
}

/// Runs the configured simulation, writing `config.ini`, `series.csv` and
/// snapshots into `dir`. Rows are flushed as they are produced.
pub fn cmd_run(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, CliError> {
    let stepper = stepper_for(cfg)?;
    let initial = initial_state(cfg, &stepper)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.ini"), cfg.to_ini_string())?;
    let mut series = SeriesWriter::create(&dir.join("series.csv"))?;
    let mut io_error: Option<io::Error> = None;
    let result = run(&initial, &stepper, cfg.t_end, cfg.stride, |state, sample| {
        if io_error.is_some() {
            return;
        }
        let written = series
            .push(sample)
            .and_then(|_| write_snapshot(dir, sample.step, state).map(|_| ()));
        if let Err(e) = written {
            io_error = Some(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let out = result.map_err(blow_up)?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        steps: out.steps,
        final_t: out.final_state.t,
        max_q_linf: out.q_linf.iter().copied().fold(0.0, f64::max),
        final_total: out.ledgers.last().map_or(0.0, |l| l.total),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub thresholds: Option<ThresholdReport>,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn failed_names(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Failed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Random inputs per identity check.
pub const VERIFY_SEEDS: usize = 8;

/// Identity suite, variational oracle and threshold checks for the
/// configured coefficients. `sigma_s` is the distortion stress under test.
pub fn cmd_verify(cfg: &RunConfig, sigma_s: SigmaSFn) -> Result<VerifyReport, CliError> {
    let coeffs = Coefficients {
        allow_isotropic: true,
        ..cfg.coefficients
    };
    let mut checks = Vec::new();
    let derived = validate_coefficients(&cfg.coefficients);
    let names: Vec<String> = derived.violations.iter().map(|v| v.to_string()).collect();
    checks.push(
        CheckOutcome::measured("coefficients", derived.violations.len() as f64, 0.0, 1)
            .with_detail(names.join("; ")),
    );
    let opts = IdentityOptions {
        seed_base: cfg.init.seed,
        sigma_s,
        ..IdentityOptions::new(cfg.n, VERIFY_SEEDS, coeffs)
    };
    let suite = identity_suite(&opts).map_err(|e| CliError::Check(e.to_string()))?;
    checks.extend(suite.checks);
    checks.push(
        oracle_check(cfg.n.min(32), 2, 4, &coeffs).map_err(|e| CliError::Check(e.to_string()))?,
    );
    let thresholds = eta_thresholds(&coeffs, cfg.thresholds).ok();
    match (&thresholds, cfg.coefficients.l4 == 0.0) {
        (_, true) => {
            checks.push(CheckOutcome::skipped("thresholds", "L4 = 0: no smallness threshold"));
            checks.push(CheckOutcome::skipped(
                "max_principle_hypotheses",
                "L4 = 0: no smallness threshold",
            ));
        }
        (Some(r), false) => {
            checks.push(threshold_check(&coeffs, cfg.thresholds).map_err(|e| CliError::Check(e.to_string()))?);
            let bound = r.eta_lemma32.sqrt();
            let ok = cfg.init.q_linf <= bound && cfg.coefficients.a >= r.a_lower.lemma32;
            checks.push(
                CheckOutcome::measured("max_principle_hypotheses", if ok { 0.0 } else { 1.0 }, 0.0, 1)
                    .with_detail(format!(
                        "q_linf {} vs sqrt(eta) {}, a {} vs -c*eta {}",
                        cfg.init.q_linf, bound, cfg.coefficients.a, r.a_lower.lemma32
                    )),
            );
        }
        (None, false) => checks.push(
            CheckOutcome::measured("thresholds", 1.0, 0.0, 1).with_detail(names.join("; ")),
        ),
    }
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.status != CheckStatus::Failed),
        thresholds,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Dt,
    Delta,
    Eps,
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dt" => Ok(Axis::Dt),
            "delta" => Ok(Axis::Delta),
            "eps" => Ok(Axis::Eps),
            other => Err(format!("unknown axis {other:?} (dt, delta, eps)")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeRow {
    pub parameter: f64,
    pub error: f64,
    /// Order against the previous row.
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeTable {
    pub axis: Axis,
    pub rows: Vec<ConvergeRow>,
    /// Whether the errors decrease strictly along the ladder.
    pub monotone: bool,
}

impl ConvergeTable {
    fn new(axis: Axis, params: Vec<f64>, errors: Vec<f64>) -> Self {
        let orders = observed_orders(&params, &errors);
        let rows = params
            .iter()
            .zip(&errors)
            .enumerate()
            .map(|(i, (&parameter, &error))| ConvergeRow {
                parameter,
                error,
                observed_order: i.checked_sub(1).map(|j| orders[j]),
            })
            .collect();
        Self {
            axis,
            rows,
            monotone: strictly_decreasing(&errors),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("parameter,error,observed_order\n");
        for r in &self.rows {
            let order = r.observed_order.map(fmt_f64).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", fmt_f64(r.parameter), fmt_f64(r.error), order));
        }
        s
    }
}

fn simulate(
    cfg: &RunConfig,
    initial: &SimulationState,
    mut observer: impl FnMut(&SimulationState),
) -> Result<RunOutput, CliError> {
    let stepper = stepper_for(cfg)?;
    run(initial, &stepper, cfg.t_end, 1, |s, _| observer(s)).map_err(blow_up)
}

fn distance(a: &SimulationState, b: &SimulationState) -> f64 {
    (a.q.sub(&b.q).l2_sq() + a.u.sub(&b.u).l2_sq()).sqrt()
}

fn parallel<T: Send>(jobs: Vec<Box<dyn FnOnce() -> T + Send + '_>>) -> Vec<T> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs.into_iter().map(|job| scope.spawn(job)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Refinement study along one axis:
/// - `dt`: four halvings of `time.dt` against a run at `dt/64`;
///   error `‖(Q, u) − (Q, u)_ref‖_{L²}` at `t_end`.
/// - `delta`: four quarterings of `coefficients.delta` (1e−2 if unset);
///   error `sup_t ‖u_δ − u₀‖_{L²}`.
/// - `eps`: `Q₀` perturbed by `ε ∈ {1e−2, 1e−3, 1e−4}` in `L²`; parameter is
///   the initial dependence metric, error the metric at `t_end`.
pub fn cmd_converge(cfg: &RunConfig, axis: Axis) -> Result<ConvergeTable, CliError> {
    let stepper = stepper_for(cfg)?;
    let initial = initial_state(cfg, &stepper)?;
    match axis {
        Axis::Dt => {
            let params: Vec<f64> = (0..4).map(|k| cfg.dt / f64::powi(2.0, k)).collect();
            let jobs = std::iter::once(cfg.dt / 64.0)
                .chain(params.iter().copied())
                .map(|dt| {
                    let c = RunConfig { dt, ..cfg.clone() };
                    let init = &initial;
                    Box::new(move || simulate(&c, init, |_| {}).map(|o| o.final_state))
                        as Box<dyn FnOnce() -> _ + Send>
                })
                .collect();
            let finals = parallel(jobs).into_iter().collect::<Result<Vec<_>, _>>()?;
            let errors = finals[1..].iter().map(|s| distance(s, &finals[0])).collect();
            Ok(ConvergeTable::new(axis, params, errors))
        }
        Axis::Delta => {
            let base = if cfg.coefficients.delta > 0.0 { cfg.coefficients.delta } else { 1e-2 };
            let params: Vec<f64> = (0..4).map(|k| base / f64::powi(4.0, k)).collect();
            let with_delta = |delta| RunConfig {
                coefficients: Coefficients { delta, ..cfg.coefficients },
                ..cfg.clone()
            };
            let mut reference = Vec::new();
            simulate(&with_delta(0.0), &initial, |s| reference.push(s.u.clone()))?;
            let reference = &reference;
            let jobs = params
                .iter()
                .map(|&delta| {
                    let c = with_delta(delta);
                    let init = &initial;
                    Box::new(move || {
                        let mut worst: f64 = 0.0;
                        let mut k = 0;
                        simulate(&c, init, |s| {
                            worst = worst.max(s.u.sub(&reference[k]).l2_sq().sqrt());
                            k += 1;
                        })
                        .map(|_| worst)
                    }) as Box<dyn FnOnce() -> _ + Send>
                })
                .collect();
            let errors = parallel(jobs).into_iter().collect::<Result<Vec<_>, _>>()?;
            Ok(ConvergeTable::new(axis, params, errors))
        }
        Axis::Eps => {
            let grid = cfg.grid();
            let sp = stepper.spectral();
            let dir = random_initial_q(grid, cfg.init.seed.wrapping_add(1000), cfg.init.max_mode.max(1), 1.0)
                .map_err(|e| ConfigError::Invalid { key: "init", reason: e.to_string() })?;
            let dir = dir.scale(1.0 / dir.l2_sq().sqrt());
            let eps = [1e-2, 1e-3, 1e-4];
            let starts: Vec<SimulationState> = std::iter::once(0.0)
                .chain(eps)
                .map(|e| SimulationState { q: initial.q.add(&dir.scale(e)), ..initial.clone() })
                .collect();
            let jobs = starts
                .iter()
                .map(|s| {
                    Box::new(move || simulate(cfg, s, |_| {}).map(|o| o.final_state))
                        as Box<dyn FnOnce() -> _ + Send>
                })
                .collect();
            let finals = parallel(jobs).into_iter().collect::<Result<Vec<_>, _>>()?;
            let metric = |a: &SimulationState, b: &SimulationState| {
                continuous_dependence_metric(a, b, sp).map(|m| m.value).map_err(|e| CliError::Check(e.to_string()))
            };
            let mut params = Vec::new();
            let mut errors = Vec::new();
            for k in 1..starts.len() {
                params.push(metric(&starts[k], &starts[0])?);
                errors.push(metric(&finals[k], &finals[0])?);
            }
            Ok(ConvergeTable::new(axis, params, errors))
        }
    }
}

/// Directory name of one sweep member.
pub fn sweep_dir(base: &Path, key: &str, value: &str) -> PathBuf {
    let clean: String = format!("{key}={value}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._=-+".contains(c) { c } else { '_' })
        .collect();
    base.join(clean)
}

/// One run per value of `key`, each in its own directory under `base`,
/// executed concurrently.
pub fn cmd_sweep(
    cfg: &RunConfig,
    base: &Path,
    key: &str,
    values: &[String],
) -> Result<Vec<(String, Result<RunSummary, CliError>)>, CliError> {
    let configs = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set(key, v)?;
            Ok((v.clone(), c))
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut results = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(workers) {
        let jobs = chunk
            .iter()
            .map(|(v, c)| {
                let dir = sweep_dir(base, key, v);
                Box::new(move || (v.clone(), cmd_run(c, &dir))) as Box<dyn FnOnce() -> _ + Send>
            })
            .collect();
        results.extend(parallel(jobs));
    }
    Ok(results)
}
