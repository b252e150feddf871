use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tucker_completion::experiments::{
    complete, convergence_run, parse_p_grid, phase_csv, phase_sweep, InitKind, PhaseConfig,
    RunSettings,
};
use tucker_completion::io::{load_samples, load_tensor, save_mask, save_samples, save_tensor};
use tucker_completion::problem::{gen_problem, ProblemSpec};
use tucker_completion::riemannian::StopReason;
use tucker_completion::verification::Reference;
use tucker_completion::{hosvd, Error, RetractionPath, RunTrace};

#[derive(Parser)]
#[command(name = "tucker", version, about = "Low-multilinear-rank tensor completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem and write TKT3/TKM3/TKS3 files.
    Gen(GenArgs),
    /// Initialize and run the gradient iteration, writing the trace CSV.
    Complete(CompleteArgs),
    /// Generated problem with ground-truth metrics traced every iteration.
    Convergence(ConvergenceArgs),
    /// Success rate against p for both spectral initializations.
    Phase(PhaseArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    r: usize,
    #[arg(long, default_value_t = 0.3, value_parser = parse_rate)]
    p: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Target condition number of the generated truth.
    #[arg(long)]
    kappa: Option<f64>,
}

impl ProblemArgs {
    fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            n: self.n,
            r: self.r,
            seed: self.seed,
            kappa_target: self.kappa,
            p: self.p,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Dd,
    Nodd,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Structured,
    Dense,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "dd")]
    init: InitArg,
    #[arg(long, value_enum, default_value = "structured")]
    path: PathArg,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Leave the seconds column empty so the CSV is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

impl SolverArgs {
    fn settings(&self) -> RunSettings {
        RunSettings {
            init: match self.init {
                InitArg::Dd => InitKind::Dd,
                InitArg::Nodd => InitKind::Nodd,
                InitArg::Oracle => InitKind::Oracle,
            },
            max_iters: self.max_iters,
            tol: self.tol,
            path: path_of(self.path),
        }
    }
}

fn path_of(p: PathArg) -> RetractionPath {
    match p {
        PathArg::Structured => RetractionPath::Structured,
        PathArg::Dense => RetractionPath::Dense,
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output prefix; writes PREFIX.tkt3, PREFIX.tkm3 and PREFIX.tks3.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompleteArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Observed entries (TKS3). Without it a problem is generated from the
    /// problem flags.
    #[arg(long)]
    obs: Option<PathBuf>,
    /// Full ground-truth tensor (TKT3) for metrics and oracle init.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, default_value_t = 60)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// Inclusive equispaced grid `lo:hi:count`.
    #[arg(long, default_value = "0.02:0.2:10", value_parser = parse_grid)]
    p_grid: Grid,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, value_enum, default_value = "structured")]
    path: PathArg,
    /// Base output name; `_dd` and `_nodd` are inserted before the
    /// extension, and run settings go to `<stem>.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(format!("sampling rate {p} outside (0, 1]"))
    }
}

#[derive(Clone)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    parse_p_grid(s).map(Grid).map_err(|e| e.to_string())
}

/// Solver-side failure, reported with the library error variant.
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(format!("{}: {e}", e.variant()))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn with_suffix(out: &Path, suffix: &str, ext: Option<&str>) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = ext
        .map(str::to_owned)
        .or_else(|| out.extension().map(|e| e.to_string_lossy().into_owned()));
    let name = match ext {
        Some(e) => format!("{stem}{suffix}.{e}"),
        None => format!("{stem}{suffix}"),
    };
    out.with_file_name(name)
}

fn write_trace(out: &Path, trace: &RunTrace, timing: bool) -> Result<(), Error> {
    fs::write(out, trace.to_csv(timing))?;
    let last = trace.last();
    eprintln!(
        "{} iterates, stop: {:?}, final rel_res_obs {:e}",
        last.iter, trace.stop, last.rel_res_obs
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen(a) => {
            let pr = gen_problem(&a.problem.spec())?;
            save_tensor(with_suffix(&a.out, "", Some("tkt3")), &pr.full)?;
            save_mask(with_suffix(&a.out, "", Some("tkm3")), pr.obs.mask())?;
            save_samples(with_suffix(&a.out, "", Some("tks3")), &pr.obs)?;
            println!("n={} r={} |Ω|={} mu={:.4} kappa={:.4}", a.problem.n, a.problem.r, pr.obs.len(), pr.mu, pr.kappa);
        }
        Command::Complete(a) => {
            let settings = a.solver.settings();
            let r = a.problem.r;
            let (obs, p, reference) = match &a.obs {
                Some(path) => {
                    let obs = load_samples(path)?;
                    let reference = match &a.truth {
                        Some(t) => {
                            let full = load_tensor(t)?;
                            Some(Reference::with_full(hosvd(&full, r)?, full)?)
                        }
                        None => None,
                    };
                    (obs, a.problem.p, reference)
                }
                None => {
                    let pr = gen_problem(&a.problem.spec())?;
                    let reference = Reference::with_full(pr.truth, pr.full)?;
                    (pr.obs, a.problem.p, Some(reference))
                }
            };
            let trace = complete(&obs, p, r, &settings, reference.as_ref())?;
            write_trace(&a.out, &trace, !a.solver.no_timing)?;
            if let StopReason::Failed(msg) = trace.stop {
                return Err(Failure(msg));
            }
        }
        Command::Convergence(a) => {
            let (_, trace) = convergence_run(&a.problem.spec(), &a.solver.settings())?;
            write_trace(&a.out, &trace, !a.solver.no_timing)?;
        }
        Command::Phase(a) => {
            let mut cfg = PhaseConfig::new(a.n, a.r, a.p_grid.0.clone(), a.trials, a.seed);
            cfg.max_iters = a.max_iters;
            cfg.tol = a.tol;
            cfg.path = path_of(a.path);
            let res = phase_sweep(&cfg)?;
            fs::write(with_suffix(&a.out, "_dd", None), phase_csv(&res.dd))?;
            fs::write(with_suffix(&a.out, "_nodd", None), phase_csv(&res.nodd))?;
            let meta = serde_json::to_string_pretty(&cfg)
                .map_err(|e| Failure::from(Error::Format(e.to_string())))?;
            fs::write(with_suffix(&a.out, "", Some("meta.json")), meta + "\n")?;
            for (d, nd) in res.dd.iter().zip(&res.nodd) {
                eprintln!("p={:.4} dd {}/{} nodd {}/{}", d.p, d.successes, d.trials, nd.successes, nd.trials);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
