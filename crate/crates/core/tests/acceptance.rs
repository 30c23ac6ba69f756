//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use dfgm_core::cost_model::{
    calibrate, directive_grid, estimate_matvec_cycles, estimate_resources, solve_cycles_from_iteration,
    CalibrationGrid, KernelConfig, Unroll,
};
use dfgm_core::kernels::{self, Backend};
use dfgm_core::oracle::{check_kkt, solve_enumerate};
use dfgm_core::{random, solve, Matrix, QpProblem, SolverOptions};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table_arithmetic() -> Outcome {
    let got = [9000, 1000, 237].map(|it| solve_cycles_from_iteration(500, it, 0, 0));
    let rounded = (got[2] as f64 / 120_000.0 - 1.0).abs();
    check(
        got == [4_500_000, 500_000, 118_500] && rounded <= 0.015,
        format!("{got:?}, last is {:.2}% from 0.12e6", rounded * 100.0),
    )
}

fn calibration() -> Outcome {
    let start = Instant::now();
    let cal = calibrate([9000, 1000, 237], 0.15, &CalibrationGrid::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let (s1, s2) = cal.speedups();
    let base = &cal.configs[0];
    check(
        cal.max_rel_error <= 0.15 && s1 >= 8.0 && s2 >= 3.5 && secs < 60.0,
        format!(
            "n={} m={} L_mul={} L_add={} c_loop={}: {:?} cycles, max error {:.2}%, speedups {s1:.2}x / {s2:.2}x, {secs:.2}s",
            cal.n,
            cal.m,
            base.l_mul,
            base.l_add,
            base.c_loop,
            cal.estimates,
            cal.max_rel_error * 100.0
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let opts = SolverOptions {
        max_iters: 5000,
        precondition: true,
        ..SolverOptions::default()
    };
    let suite = random::random_suite(2024, 100, 12, 10);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (i, p) in suite.iter().enumerate() {
        let exact = solve_enumerate(p).map_err(|e| format!("oracle on problem {i}: {e}"))?;
        let sol = solve(p, &opts).map_err(|e| format!("solve on problem {i}: {e}"))?;
        let rel = max_diff(&sol.z, &exact.z) / (1.0 + inf_norm(&exact.z));
        worst = worst.max(rel);
        let kkt = check_kkt(p, &sol.z, &sol.lambda, 1e-3).map_err(|e| e.to_string())?;
        if rel > 1e-4 || !kkt.pass {
            failures.push(i);
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{}/{} passed, worst scaled error {worst:.1e}{}",
            suite.len() - failures.len(),
            suite.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failing {failures:?}")
            }
        ),
    )
}

fn fixed_budget() -> Outcome {
    let mut counts = Vec::new();
    for p in random::random_suite(500, 20, 12, 10) {
        for precondition in [false, true] {
            let opts = SolverOptions {
                precondition,
                ..SolverOptions::default()
            };
            counts.push(solve(&p, &opts).map_err(|e| e.to_string())?.iters);
        }
    }
    check(
        counts.iter().all(|&k| k == 500),
        format!(
            "{} solves, iteration counts {}..={}",
            counts.len(),
            counts.iter().min().unwrap_or(&0),
            counts.iter().max().unwrap_or(&0)
        ),
    )
}

fn kernel_agreement() -> Outcome {
    let mut rng = random::rng(64);
    let backends = [
        Backend::naive(),
        Backend::tree(),
        Backend::blocked(8),
        Backend::parallel(4),
    ];
    let cases = 1000;
    for case in 0..cases {
        let p = rng.gen_range(1..=64);
        let q = rng.gen_range(1..=64);
        let scale = 10f64.powi(rng.gen_range(-3..=3));
        let a = random::uniform_matrix(&mut rng, p, q, scale);
        let x = random::uniform_vec(&mut rng, q, 1.0);
        let bound = q as f64 * f64::EPSILON * a.norm_inf() * inf_norm(&x);
        let reference = kernels::matvec(&a, &x, &backends[0]).map_err(|e| e.to_string())?;
        for b in &backends[1..] {
            let r = kernels::matvec(&a, &x, b).map_err(|e| e.to_string())?;
            if max_diff(&r, &reference) > bound {
                return Err(format!("case {case} ({p}x{q}): {b} outside bound"));
            }
        }
        let block = rng.gen_range(1..=16);
        let par1 = kernels::matvec(&a, &x, &Backend::parallel(1).with_block_rows(block)).map_err(|e| e.to_string())?;
        for w in [2, 4, 8] {
            let r = kernels::matvec(&a, &x, &Backend::parallel(w).with_block_rows(block)).map_err(|e| e.to_string())?;
            if r != par1 {
                return Err(format!(
                    "case {case} ({p}x{q}): parallel:{w} differs bitwise from parallel:1"
                ));
            }
        }
    }
    Ok(format!(
        "{cases} random cases, p, q <= 64; workers 1/2/4/8 bitwise equal"
    ))
}

fn tree_sum_exact() -> Outcome {
    let mut rng = random::rng(4096);
    let count = 10_000;
    for case in 0..count {
        let len = rng.gen_range(0..=4096);
        let ints: Vec<i64> = (0..len).map(|_| rng.gen_range(-1_000_000..=1_000_000)).collect();
        let exact: i64 = ints.iter().sum();
        let v: Vec<f64> = ints.iter().map(|&x| x as f64).collect();
        let got = kernels::tree_sum(&v);
        if got.to_bits() != (exact as f64).to_bits() {
            return Err(format!("case {case}: {got} != {exact}"));
        }
    }
    Ok(format!("{count} integer vectors, length <= 4096"))
}

fn unroll_rank(u: Unroll) -> u64 {
    match u {
        Unroll::Factor(f) => f,
        Unroll::Full => u64::MAX,
    }
}

fn cost_model_grid() -> Outcome {
    let mut checked = 0;
    for (p, q) in [(4, 4), (8, 56), (56, 8), (64, 64), (5, 3)] {
        for (l_mul, l_add, c_loop) in [(1, 1, 0), (3, 4, 2), (4, 6, 0)] {
            let base = KernelConfig {
                l_mul,
                l_add,
                c_loop,
                ..KernelConfig::default()
            };
            let grid = directive_grid(&base);
            for x in &grid {
                for y in &grid {
                    let cx = estimate_matvec_cycles(p, q, x).map_err(|e| e.to_string())?;
                    let cy = estimate_matvec_cycles(p, q, y).map_err(|e| e.to_string())?;
                    let rx = estimate_resources(p, q, x).map_err(|e| e.to_string())?;
                    let ry = estimate_resources(p, q, y).map_err(|e| e.to_string())?;
                    let only_unroll =
                        x.ii == y.ii && x.row_par == y.row_par && unroll_rank(x.unroll) < unroll_rank(y.unroll);
                    let only_rp = x.unroll == y.unroll && x.ii == y.ii && x.row_par < y.row_par;
                    let ii01 = x.unroll == y.unroll && x.row_par == y.row_par && x.ii == 0 && y.ii == 1;
                    let fewer_resources = ry.mults < rx.mults || ry.adders < rx.adders || ry.mem_banks < rx.mem_banks;
                    let bad = (only_unroll && (cy > cx || fewer_resources)) || ((only_rp || ii01) && cy > cx);
                    if bad {
                        return Err(format!("{p}x{q}: {x:?} -> {y:?}: {cx} -> {cy}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} config pairs over 36-point grids"))
}

fn analytic_cases() -> Outcome {
    let one = QpProblem::new(
        Matrix::from_rows(&[[2.0]]).unwrap(),
        vec![-2.0],
        Matrix::from_rows(&[[1.0]]).unwrap(),
        vec![0.5],
    )
    .unwrap();
    let two = QpProblem::new(
        Matrix::identity(2),
        vec![-3.0, -4.0],
        Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        vec![1.0],
    )
    .unwrap();
    let opts = SolverOptions::default();
    let s1 = solve(&one, &opts).map_err(|e| e.to_string())?;
    let s2 = solve(&two, &opts).map_err(|e| e.to_string())?;
    let e1 = (s1.z[0] - 0.5).abs().max((s1.lambda[0] - 1.0).abs());
    let e2 = max_diff(&s2.z, &[0.0, 1.0]).max((s2.lambda[0] - 3.0).abs());
    check(
        e1 <= 1e-9 && e2 <= 1e-6 && s1.iters <= 500,
        format!("1-D error {e1:.1e} after {} iterations, 2-D error {e2:.1e}", s1.iters),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("table arithmetic", table_arithmetic),
        ("calibration reproduction", calibration),
        ("oracle equivalence", oracle_equivalence),
        ("fixed iteration budget", fixed_budget),
        ("kernel backend agreement", kernel_agreement),
        ("tree_sum exactness", tree_sum_exact),
        ("cost-model grid properties", cost_model_grid),
        ("analytic cases", analytic_cases),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
