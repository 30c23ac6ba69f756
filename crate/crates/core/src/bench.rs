//! Wall-clock benchmark of the solver across kernel backends.

use std::time::{Duration, Instant};

use crate::error::Error;
use crate::kernels::Backend;
use crate::oracle;
use crate::problem::QpProblem;
use crate::solver::{self, SolverOptions};

/// Relative mismatch between backends above which a report fails.
pub const MISMATCH_TOL: f64 = 1e-6;

/// Primal agreement with the oracle, relative to `1 + ‖z*‖∞`.
pub const ORACLE_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub backend: Backend,
    pub median: Duration,
    pub p95: Duration,
    /// `median / iterations`; equals `median` when no iterations ran.
    pub per_iteration: Duration,
    pub checksum: f64,
    pub iters: usize,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub reps: usize,
    pub env_note: String,
    /// Human-readable reasons the run failed; empty on success.
    pub failures: Vec<String>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Nearest-rank percentile of sorted durations.
fn percentile(sorted: &[Duration], pct: f64) -> Duration {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median(sorted: &[Duration]) -> Duration {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    }
}

pub fn env_note() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{}, {} hardware threads, {} build",
        std::env::consts::OS,
        std::env::consts::ARCH,
        threads,
        if cfg!(debug_assertions) { "debug" } else { "release" }
    )
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = 1.0 + b.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs())) / scale
}

/// Solves `p` `reps` times per backend with identical options. The first
/// run of each backend is a warm-up and is not timed into the statistics.
/// Only `solve` itself is inside the timed region.
///
/// Divergence and cross-backend disagreement do not abort the run; they
/// are recorded in `failures`.
pub fn run_benchmark(
    p: &QpProblem,
    backends: &[Backend],
    reps: usize,
    opts: &SolverOptions,
    check_oracle: bool,
) -> Result<BenchReport, Error> {
    if backends.is_empty() {
        return Err(Error::Bench("no backends given".into()));
    }
    if reps < 3 {
        return Err(Error::Bench(format!("need at least 3 repetitions, got {reps}")));
    }
    p.validate().into_result()?;
    opts.validate()?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for backend in backends {
        let run_opts = SolverOptions {
            backend: *backend,
            ..opts.clone()
        };
        let mut times = Vec::with_capacity(reps - 1);
        let mut last = None;
        let mut failed = false;
        for rep in 0..reps {
            let start = Instant::now();
            let result = solver::solve(p, &run_opts);
            let elapsed = start.elapsed();
            match result {
                Ok(sol) => {
                    if rep > 0 {
                        times.push(elapsed);
                    }
                    last = Some(sol);
                }
                Err(e) => {
                    failures.push(format!("{backend}: {e}"));
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            continue;
        }
        let sol = last.expect("at least one repetition");
        times.sort();
        let med = median(&times);
        rows.push(BenchRow {
            backend: *backend,
            median: med,
            p95: percentile(&times, 95.0),
            per_iteration: med / sol.iters.max(1) as u32,
            checksum: sol.checksum(),
            iters: sol.iters,
            z: sol.z,
        });
    }

    if let Some(first) = rows.first() {
        for row in &rows[1..] {
            let diff = rel_diff(&row.z, &first.z);
            if diff > MISMATCH_TOL {
                failures.push(format!(
                    "{} disagrees with {}: relative difference {diff:.3e}",
                    row.backend, first.backend
                ));
            }
        }
        if check_oracle {
            let exact = oracle::solve_enumerate(p)?;
            for row in &rows {
                let diff = rel_diff(&row.z, &exact.z);
                if diff > ORACLE_TOL {
                    failures.push(format!(
                        "{} differs from the oracle: relative difference {diff:.3e}",
                        row.backend
                    ));
                }
            }
        }
    }

    Ok(BenchReport {
        rows,
        reps,
        env_note: env_note(),
        failures,
    })
}
