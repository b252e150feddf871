//! Experiment drivers behind the CLI: single completion runs, convergence
//! traces against ground truth, and the success-rate sweep over `p`.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::TuckerForm;
use crate::error::{Error, Result};
use crate::initialization::{spectral_init, Deletion};
use crate::problem::{gen_problem, Problem, ProblemSpec};
use crate::riemannian::{run_rgm, RetractionPath, RgmConfig, RunTrace};
use crate::sampling::SampleSet;
use crate::verification::{metrics, Reference};

/// A trial succeeds when the final relative `‖·‖_∞` error is at most this.
pub const SUCCESS_THRESHOLD: f64 = 1e-2;

/// Iteration cap per phase trial.
pub const PHASE_MAX_ITERS: usize = 100;

/// Environment variable capping the phase worker pool.
pub const THREADS_ENV: &str = "TUCKER_THREADS";

/// Starting point of a completion run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Spectral initialization with diagonal deletion.
    Dd,
    /// Spectral initialization without diagonal deletion.
    Nodd,
    /// The ground truth itself (needs a reference).
    Oracle,
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dd" => Ok(InitKind::Dd),
            "nodd" => Ok(InitKind::Nodd),
            "oracle" => Ok(InitKind::Oracle),
            other => Err(Error::InvalidArgument(format!("unknown init {other:?}"))),
        }
    }
}

pub fn initialize(
    obs: &SampleSet,
    p: f64,
    r: usize,
    kind: InitKind,
    truth: Option<&TuckerForm>,
) -> Result<TuckerForm> {
    match kind {
        InitKind::Dd => Ok(spectral_init(obs, p, r, Deletion::On)?.form),
        InitKind::Nodd => Ok(spectral_init(obs, p, r, Deletion::Off)?.form),
        InitKind::Oracle => truth.cloned().ok_or_else(|| {
            Error::InvalidArgument("oracle initialization needs the ground truth".into())
        }),
    }
}

/// Settings shared by single runs.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub init: InitKind,
    pub max_iters: usize,
    pub tol: f64,
    pub path: RetractionPath,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            init: InitKind::Dd,
            max_iters: 200,
            tol: 1e-12,
            path: RetractionPath::Structured,
        }
    }
}

impl RunSettings {
    fn config(&self, r: usize, p: f64) -> RgmConfig {
        RgmConfig {
            max_iters: self.max_iters,
            tol_rel_residual: self.tol,
            retraction_path: self.path,
            ..RgmConfig::new(r, p)
        }
    }
}

/// Initializes and runs the iteration on observed data. Ground-truth
/// metrics are traced when `reference` is given.
pub fn complete(
    obs: &SampleSet,
    p: f64,
    r: usize,
    settings: &RunSettings,
    reference: Option<&Reference>,
) -> Result<RunTrace> {
    let init = initialize(obs, p, r, settings.init, reference.map(|rf| rf.truth()))?;
    run_rgm(&init, obs, &settings.config(r, p), reference)
}

/// Generates a problem and runs it with ground-truth metrics.
pub fn convergence_run(spec: &ProblemSpec, settings: &RunSettings) -> Result<(Problem, RunTrace)> {
    let problem = gen_problem(spec)?;
    let reference = Reference::with_full(problem.truth.clone(), problem.full.clone())?;
    let trace = complete(&problem.obs, spec.p, spec.r, settings, Some(&reference))?;
    Ok((problem, trace))
}

/// Parses `lo:hi:count` into `count` equispaced values including both ends.
pub fn parse_p_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("p-grid {s:?} is not lo:hi:count"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 || !(lo > 0.0 && lo <= hi && hi <= 1.0) || (count == 1 && lo != hi) {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
        .collect())
}

/// One `(p, variant)` cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub p: f64,
    pub trials: usize,
    pub successes: usize,
}

impl PhaseCell {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

pub const PHASE_CSV_HEADER: &str = "p,trials,successes,rate";

pub fn phase_csv(cells: &[PhaseCell]) -> String {
    let mut s = String::from(PHASE_CSV_HEADER);
    s.push('\n');
    for c in cells {
        s.push_str(&format!("{},{},{},{}\n", c.p, c.trials, c.successes, c.rate()));
    }
    s
}

/// Sweep settings.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseConfig {
    pub n: usize,
    pub r: usize,
    pub p_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    #[serde(skip)]
    pub path: RetractionPath,
    /// Worker cap; `None` reads [`THREADS_ENV`] and falls back to the
    /// available parallelism.
    #[serde(skip)]
    pub threads: Option<usize>,
    pub success_threshold: f64,
}

impl PhaseConfig {
    pub fn new(n: usize, r: usize, p_grid: Vec<f64>, trials: usize, base_seed: u64) -> Self {
        PhaseConfig {
            n,
            r,
            p_grid,
            trials,
            base_seed,
            max_iters: PHASE_MAX_ITERS,
            tol: 1e-12,
            path: RetractionPath::Structured,
            threads: None,
            success_threshold: SUCCESS_THRESHOLD,
        }
    }

    /// Problem seed of trial `trial` at grid point `grid_idx`.
    pub fn trial_seed(&self, grid_idx: usize, trial: usize) -> u64 {
        self.base_seed
            .wrapping_add(1000 * grid_idx as u64)
            .wrapping_add(trial as u64)
    }
}

/// Per-trial outcome, for both initializations on the same problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub grid_idx: usize,
    pub trial: usize,
    /// Final relative `‖·‖_∞` error, `None` if the run failed.
    pub dd_rel_inf: Option<f64>,
    pub nodd_rel_inf: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PhaseResult {
    pub dd: Vec<PhaseCell>,
    pub nodd: Vec<PhaseCell>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Worker count from [`THREADS_ENV`], or the available parallelism.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Final relative `‖·‖_∞` error of one run, or `None` on failure.
fn trial_error(problem: &Problem, reference: &Reference, kind: InitKind, cfg: &PhaseConfig) -> Option<f64> {
    let settings = RunSettings {
        init: kind,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        path: cfg.path,
    };
    let init = initialize(&problem.obs, problem.spec.p, cfg.r, kind, None).ok()?;
    let mut rc = settings.config(cfg.r, problem.spec.p);
    rc.trace_metrics = false;
    let trace = run_rgm(&init, &problem.obs, &rc, None).ok()?;
    let m = metrics(&trace.final_iterate, reference).ok()?;
    m.rel_inf.is_finite().then_some(m.rel_inf)
}

fn run_trial(cfg: &PhaseConfig, grid_idx: usize, trial: usize) -> TrialOutcome {
    let p = cfg.p_grid[grid_idx];
    let spec = ProblemSpec::new(cfg.n, cfg.r, p, cfg.trial_seed(grid_idx, trial));
    let (dd, nodd) = match gen_problem(&spec) {
        Ok(problem) => {
            let reference = Reference::with_full(problem.truth.clone(), problem.full.clone())
                .expect("generated truth matches its expansion");
            (
                trial_error(&problem, &reference, InitKind::Dd, cfg),
                trial_error(&problem, &reference, InitKind::Nodd, cfg),
            )
        }
        Err(_) => (None, None),
    };
    TrialOutcome {
        grid_idx,
        trial,
        dd_rel_inf: dd,
        nodd_rel_inf: nodd,
    }
}

/// Runs every `(p, trial)` pair with both initializations on the same
/// problem and counts successes. Results do not depend on the worker count.
pub fn phase_sweep(cfg: &PhaseConfig) -> Result<PhaseResult> {
    if cfg.p_grid.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidArgument("empty p-grid or zero trials".into()));
    }
    if cfg.r == 0 || cfg.r > cfg.n {
        return Err(Error::InvalidArgument(format!("need n ≥ r ≥ 1, got n = {}, r = {}", cfg.n, cfg.r)));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.p_grid.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let threads = cfg.threads.unwrap_or_else(threads_from_env).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> =
        pool.install(|| jobs.par_iter().map(|&(g, t)| run_trial(cfg, g, t)).collect());

    let tally = |pick: fn(&TrialOutcome) -> Option<f64>| -> Vec<PhaseCell> {
        cfg.p_grid
            .iter()
            .enumerate()
            .map(|(g, &p)| PhaseCell {
                p,
                trials: cfg.trials,
                successes: outcomes
                    .iter()
                    .filter(|o| o.grid_idx == g)
                    .filter(|o| pick(o).is_some_and(|e| e <= cfg.success_threshold))
                    .count(),
            })
            .collect()
    };
    Ok(PhaseResult {
        dd: tally(|o| o.dd_rel_inf),
        nodd: tally(|o| o.nodd_rel_inf),
        outcomes,
    })
}
