use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dfgm_core::cost_model::{self, CalibrationGrid, EstimateConfig};
use dfgm_core::{bench, io, oracle, random, report, solver};
use dfgm_core::{Backend, BackendKind, Error, QpProblem, SolverOptions};

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dfgm",
    version,
    about = "Dual fast gradient QP solver, oracle, benchmark and cycle model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file with the dual fast gradient method.
    Solve {
        file: PathBuf,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        #[arg(long, default_value = "tree")]
        backend: BackendKind,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        precondition: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time repeated solves across kernel backends.
    Bench {
        file: PathBuf,
        /// Comma-separated list, e.g. `naive,tree,parallel:4`.
        #[arg(long, value_delimiter = ',', required = true)]
        backends: Vec<Backend>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        /// Also compare every backend against the enumeration oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Exact solution by active-set enumeration (m ≤ 20).
    Oracle { file: PathBuf },
    /// Cycle and resource estimates for the problem's dimensions.
    Estimate {
        file: PathBuf,
        /// Directive config file; repeat for one column per config.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Overrides the `iters` key of every config.
        #[arg(long)]
        iters: Option<u64>,
        /// Only used to show milliseconds next to cycle counts.
        #[arg(long)]
        clock_mhz: Option<f64>,
    },
    /// Grid-search the cycle model for three per-iteration latency targets.
    Calibrate {
        #[arg(long, value_delimiter = ',', default_values_t = [9000u64, 1000, 237])]
        targets: Vec<u64>,
        #[arg(long, default_value_t = 0.15)]
        tolerance: f64,
        /// Write the three configs and a problem file of the found
        /// dimensions into this directory.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence { .. } | Error::Bench(_) => EXIT_DIVERGED,
            Error::InvalidOption(_) => EXIT_USAGE,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<QpProblem, Failure> {
    let p = io::load_qp(&read(path)?).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let rep = p.validate();
    if !rep.ok {
        return Err(fail(
            EXIT_INVALID,
            format!("{}: {}", path.display(), rep.violations.join("; ")),
        ));
    }
    Ok(p)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Solve {
            file,
            iters,
            tol,
            backend,
            workers,
            precondition,
            out,
        } => {
            let p = load_problem(&file)?;
            let mut b = Backend::new(backend);
            if let Some(w) = workers {
                if backend != BackendKind::Parallel {
                    return Err(fail(EXIT_USAGE, "--workers only applies to --backend parallel"));
                }
                b.workers = w;
            }
            let opts = SolverOptions {
                max_iters: iters,
                tol,
                backend: b,
                precondition,
                initial_lambda: None,
            };
            let sol = solver::solve(&p, &opts)?;
            let text = io::save_solution(&sol);
            match out {
                Some(path) => {
                    write(&path, &text)?;
                    println!(
                        "wrote {} ({} iterations, residual {:e}, gap {:e})",
                        path.display(),
                        sol.iters,
                        sol.primal_residual,
                        sol.gap
                    );
                }
                None => print!("{text}"),
            }
        }
        Command::Bench {
            file,
            backends,
            reps,
            iters,
            oracle,
        } => {
            let p = load_problem(&file)?;
            let opts = SolverOptions {
                max_iters: iters,
                ..SolverOptions::default()
            };
            let rep = bench::run_benchmark(&p, &backends, reps, &opts, oracle).map_err(|e| match e {
                Error::Bench(msg) => fail(EXIT_USAGE, msg),
                other => other.into(),
            })?;
            if rep.rows.is_empty() {
                return Err(fail(EXIT_DIVERGED, rep.failures.join("\n")));
            }
            print!("{}", report::render_bench_report(&rep)?);
            if !rep.passed() {
                return Err(fail(EXIT_DIVERGED, "benchmark failed"));
            }
        }
        Command::Oracle { file } => {
            let p = load_problem(&file)?;
            let sol = oracle::solve_enumerate(&p)?;
            let kkt = oracle::check_kkt(&p, &sol.z, &sol.lambda, 1e-8)?;
            let join = |v: &[f64]| v.iter().map(|&x| format!(" {}", io::fmt_num(x))).collect::<String>();
            println!("z:{}", join(&sol.z));
            println!("lambda:{}", join(&sol.lambda));
            let active: Vec<String> = sol.active_set.iter().map(|i| i.to_string()).collect();
            println!("active: {}", active.join(" "));
            println!("objective: {}", io::fmt_num(sol.objective));
            println!(
                "kkt: stationarity {:e} primal {:e} dual {:e} complementarity {:e} ({})",
                kkt.stationarity,
                kkt.primal,
                kkt.dual,
                kkt.complementarity,
                if kkt.pass { "pass" } else { "fail" }
            );
        }
        Command::Estimate {
            file,
            config,
            iters,
            clock_mhz,
        } => {
            let p = load_problem(&file)?;
            let (n, m) = (p.n() as u64, p.m() as u64);
            if m == 0 {
                return Err(fail(EXIT_INVALID, "cycle model needs at least one constraint"));
            }
            let mut reports = Vec::new();
            for path in &config {
                let mut est = cost_model::parse_config(&read(path)?)
                    .map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", path.display())))?;
                if let Some(it) = iters {
                    est.iters = it;
                }
                let label = path
                    .file_stem()
                    .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
                reports.push(cost_model::cycle_report(&label, n, m, &est)?);
            }
            println!("n = {n}, m = {m}");
            print!("{}", report::render_cycle_report(&reports, clock_mhz)?);
        }
        Command::Calibrate {
            targets,
            tolerance,
            emit,
        } => {
            let targets: [u64; 3] = targets
                .try_into()
                .map_err(|_| fail(EXIT_USAGE, "--targets takes exactly three values"))?;
            let cal = cost_model::calibrate(targets, tolerance, &CalibrationGrid::default())?;
            let (s1, s2) = cal.speedups();
            let base = &cal.configs[0];
            println!(
                "dimensions: n = {}, m = {}; L_mul = {}, L_add = {}, c_loop = {}, c_vec = {}, c_fixed = {}",
                cal.n, cal.m, base.l_mul, base.l_add, base.c_loop, base.c_vec, base.c_fixed
            );
            println!(
                "version A: unroll = {}, II = {}, row_par = {}; version B: row_par = {}",
                cal.configs[1].unroll, cal.configs[1].ii, cal.configs[1].row_par, cal.configs[2].row_par
            );
            let errs = cal.rel_errors();
            println!(
                "relative errors: {:.2}% / {:.2}% / {:.2}%; speedups {:.2}x and {:.2}x; {} points searched",
                errs[0] * 100.0,
                errs[1] * 100.0,
                errs[2] * 100.0,
                s1,
                s2,
                cal.points_searched
            );
            let labels = ["naive", "version_a", "version_b"];
            let mut reports = Vec::new();
            for (label, kernel) in labels.iter().zip(cal.configs) {
                let est = EstimateConfig {
                    kernel,
                    ..EstimateConfig::default()
                };
                reports.push(cost_model::cycle_report(label, cal.n, cal.m, &est)?);
                if let Some(dir) = &emit {
                    fs::create_dir_all(dir).map_err(|e| fail(EXIT_INVALID, format!("{}: {e}", dir.display())))?;
                    write(&dir.join(format!("{label}.cfg")), &cost_model::render_config(&est))?;
                }
            }
            print!("{}", report::render_cycle_report(&reports, None)?);
            if let Some(dir) = &emit {
                let mut rng = random::rng(cal.n * 1000 + cal.m);
                let p = random::random_qp(&mut rng, cal.n as usize, cal.m as usize);
                let path = dir.join(format!("calibration_{}x{}.qp", cal.n, cal.m));
                write(&path, &io::save_qp(&p))?;
                println!("wrote configs and {}", path.display());
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
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
