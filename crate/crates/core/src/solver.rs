//! Dual fast gradient method.
//!
//! The solver runs in three phases:
//!
//! 1. **prologue**: factor `H`, form the dual-to-primal map `M = −H⁻¹Cᵀ`,
//!    the unconstrained minimizer `v = −H⁻¹g`, and the step sizes;
//! 2. **main loop**: a fixed number of accelerated projected gradient steps
//!    on the dual, two matrix-vector products per step;
//! 3. **epilogue**: recover `z = Mλ + v` from the last dual iterate and
//!    compute diagnostics.
//!
//! Iterations are strictly sequential. Any parallelism lives inside the
//! kernel backend's matrix-vector products.

use crate::error::Error;
use crate::kernels::{self, Backend};
use crate::matrix::{Cholesky, Matrix};
use crate::problem::QpProblem;

pub const DEFAULT_MAX_ITERS: usize = 500;

/// Power-iteration stopping rule and the safety factor applied to its result.
pub const POWER_REL_TOL: f64 = 1e-6;
pub const POWER_MAX_STEPS: usize = 500;
pub const LIPSCHITZ_SAFETY: f64 = 1.01;

/// Preconditioner entries below this fraction of the largest are raised to it.
pub const PRECOND_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Zero means run exactly `max_iters` iterations.
    pub tol: f64,
    pub backend: Backend,
    pub precondition: bool,
    /// Optional warm start for the dual iterate. Negative entries are clipped.
    pub initial_lambda: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: DEFAULT_MAX_ITERS,
            tol: 0.0,
            backend: Backend::default(),
            precondition: false,
            initial_lambda: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), Error> {
        if self.max_iters == 0 {
            return Err(Error::InvalidOption("max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidOption("tol must be >= 0".into()));
        }
        self.backend.validate()
    }
}

/// Result of [`estimate_lipschitz`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate {
    /// Upper bound used for the step size (Rayleigh quotient × safety factor).
    pub value: f64,
    /// Final Rayleigh quotient.
    pub rayleigh: f64,
    pub power_steps: usize,
    /// Set when the operator vanished on the start vector; `value` is then
    /// the smallest positive normal number.
    pub degenerate: bool,
}

/// Diagonal dual scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct Preconditioner {
    /// `D_i = (C H⁻¹ Cᵀ)_ii`, floored at `1e-12·max_j D_j`.
    pub diag: Vec<f64>,
    /// Lipschitz bound of `D^{-1/2} C H⁻¹ Cᵀ D^{-1/2}`.
    pub scaled: LipschitzEstimate,
}

/// Prologue products, immutable once built.
#[derive(Clone, Debug)]
pub struct Precomputed {
    pub chol: Cholesky,
    /// `M = −H⁻¹Cᵀ`, n×m.
    pub dual_to_primal: Matrix,
    /// `v = −H⁻¹g`.
    pub offset: Vec<f64>,
    /// Bound on `λ_max(C H⁻¹ Cᵀ)`; `None` when there are no constraints.
    pub lipschitz: Option<LipschitzEstimate>,
    pub precond: Option<Preconditioner>,
    /// Per-row dual step: `1/L`, or `1/(L_s·D_i)` when preconditioned.
    pub step: Vec<f64>,
}

/// Applies `w ↦ C·H⁻¹·(Cᵀw)`.
fn apply_dual_hessian(c: &Matrix, chol: &Cholesky, w: &[f64]) -> Vec<f64> {
    let n = c.cols();
    let mut ct_w = vec![0.0; n];
    for (row, &wi) in c.row_iter().zip(w) {
        for (acc, &cij) in ct_w.iter_mut().zip(row) {
            *acc += cij * wi;
        }
    }
    chol.solve_in_place(&mut ct_w);
    c.mul_vec(&ct_w)
}

fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, m: usize) -> LipschitzEstimate {
    // Ramp start: the plain all-ones vector is annihilated by paired
    // constraint rows such as C = [I; −I].
    let mut w: Vec<f64> = (0..m).map(|i| 1.0 + (i + 1) as f64 / (m + 1) as f64).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter_mut().for_each(|x| *x /= norm);

    let mut rayleigh = f64::NAN;
    let mut steps = 0;
    while steps < POWER_MAX_STEPS {
        steps += 1;
        let kw = apply(&w);
        let next_rayleigh: f64 = w.iter().zip(&kw).map(|(a, b)| a * b).sum();
        let kw_norm = kw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if kw_norm.is_nan() || kw_norm <= 0.0 || next_rayleigh.is_nan() || next_rayleigh <= 0.0 {
            return LipschitzEstimate {
                value: f64::MIN_POSITIVE,
                rayleigh: 0.0,
                power_steps: steps,
                degenerate: true,
            };
        }
        let converged = (next_rayleigh - rayleigh).abs() < POWER_REL_TOL * next_rayleigh;
        rayleigh = next_rayleigh;
        w = kw.into_iter().map(|x| x / kw_norm).collect();
        if converged {
            break;
        }
    }
    LipschitzEstimate {
        value: rayleigh * LIPSCHITZ_SAFETY,
        rayleigh,
        power_steps: steps,
        degenerate: false,
    }
}

/// Power iteration on `C H⁻¹ Cᵀ`: stops when the Rayleigh quotient moves by
/// less than `1e-6` relative or after 500 steps, then scales by 1.01.
pub fn estimate_lipschitz(p: &QpProblem, chol: &Cholesky) -> Result<LipschitzEstimate, Error> {
    if p.m() == 0 {
        return Err(Error::InvalidProblem(
            "Lipschitz estimate needs at least one constraint".into(),
        ));
    }
    if chol.dim() != p.n() {
        return Err(Error::Dimension("factorization does not match H".into()));
    }
    Ok(power_iteration(|w| apply_dual_hessian(&p.c, chol, w), p.m()))
}

fn build_preconditioner(p: &QpProblem, chol: &Cholesky, m_map: &Matrix) -> Option<Preconditioner> {
    // (C H⁻¹ Cᵀ)_ii = −c_i · M[:, i]
    let mut diag: Vec<f64> = (0..p.m())
        .map(|i| {
            -p.c.row(i)
                .iter()
                .enumerate()
                .map(|(j, cij)| cij * m_map[(j, i)])
                .sum::<f64>()
        })
        .collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if max.is_nan() || max <= 0.0 {
        return None;
    }
    let floor = PRECOND_FLOOR * max;
    diag.iter_mut().for_each(|x| *x = x.max(floor));
    let inv_sqrt: Vec<f64> = diag.iter().map(|x| 1.0 / x.sqrt()).collect();
    let scaled = power_iteration(
        |w| {
            let sw: Vec<f64> = w.iter().zip(&inv_sqrt).map(|(a, b)| a * b).collect();
            apply_dual_hessian(&p.c, chol, &sw)
                .iter()
                .zip(&inv_sqrt)
                .map(|(a, b)| a * b)
                .collect()
        },
        p.m(),
    );
    if scaled.degenerate {
        return None;
    }
    Some(Preconditioner { diag, scaled })
}

/// Prologue: factorization, primal-recovery map, step sizes.
pub fn prologue(p: &QpProblem, opts: &SolverOptions) -> Result<Precomputed, Error> {
    let chol = Cholesky::factor(&p.h)?;
    let (n, m) = (p.n(), p.m());

    let mut offset = chol.solve(&p.g);
    offset.iter_mut().for_each(|x| *x = -*x);

    let mut m_map = Matrix::zeros(n, m);
    for i in 0..m {
        let col = chol.solve(p.c.row(i));
        for (j, v) in col.into_iter().enumerate() {
            m_map[(j, i)] = -v;
        }
    }

    let (lipschitz, precond, step) = if m == 0 {
        (None, None, Vec::new())
    } else {
        let lip = estimate_lipschitz(p, &chol)?;
        let precond = if opts.precondition {
            build_preconditioner(p, &chol, &m_map)
        } else {
            None
        };
        let step = match &precond {
            Some(pc) => pc.diag.iter().map(|d| 1.0 / (pc.scaled.value * d)).collect(),
            None => vec![1.0 / lip.value; m],
        };
        (Some(lip), precond, step)
    };

    if !m_map.is_finite() || offset.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidProblem("prologue produced non-finite values".into()));
    }

    Ok(Precomputed {
        chol,
        dual_to_primal: m_map,
        offset,
        lipschitz,
        precond,
        step,
    })
}

/// Iteration state carried across main-loop cycles.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub lambda: Vec<f64>,
    /// Extrapolated dual point.
    pub y: Vec<f64>,
    pub t: f64,
    pub k: usize,
    /// Primal point `M·y + v` from the last iteration.
    pub z: Vec<f64>,
    /// `C·z − d` from the last iteration.
    pub r: Vec<f64>,
}

impl DualState {
    pub fn cold(n: usize, m: usize) -> Self {
        DualState {
            lambda: vec![0.0; m],
            y: vec![0.0; m],
            t: 1.0,
            k: 0,
            z: vec![0.0; n],
            r: vec![0.0; m],
        }
    }

    pub fn warm(n: usize, lambda: &[f64]) -> Self {
        let lambda = kernels::project_nonneg(lambda);
        DualState {
            y: lambda.clone(),
            r: vec![0.0; lambda.len()],
            lambda,
            t: 1.0,
            k: 0,
            z: vec![0.0; n],
        }
    }
}

fn check_finite(v: &[f64], iteration: usize, what: &'static str) -> Result<(), Error> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { iteration, what })
    }
}

/// One main-loop cycle:
///
/// 1. `z ← M·y + v`
/// 2. `r ← C·z − d`
/// 3. `λ⁺ ← max(0, y + step∘r)`
/// 4. `t⁺ ← (1 + √(1 + 4t²))/2`
/// 5. `y ← λ⁺ + ((t − 1)/t⁺)(λ⁺ − λ)`
/// 6. `k ← k + 1`
///
/// With no constraints only `z ← v` happens.
pub fn iterate_once(pre: &Precomputed, p: &QpProblem, s: &mut DualState, backend: &Backend) -> Result<(), Error> {
    let iteration = s.k + 1;
    if p.m() == 0 {
        s.z.clone_from(&pre.offset);
        return Ok(());
    }

    kernels::matvec_into(&pre.dual_to_primal, &s.y, &mut s.z, backend)?;
    for (zi, vi) in s.z.iter_mut().zip(&pre.offset) {
        *zi += vi;
    }
    check_finite(&s.z, iteration, "z")?;

    kernels::matvec_into(&p.c, &s.z, &mut s.r, backend)?;
    for (ri, di) in s.r.iter_mut().zip(&p.d) {
        *ri -= di;
    }
    check_finite(&s.r, iteration, "r")?;

    let t_next = 0.5 * (1.0 + (1.0 + 4.0 * s.t * s.t).sqrt());
    let beta = (s.t - 1.0) / t_next;
    for i in 0..s.lambda.len() {
        let next = (s.y[i] + pre.step[i] * s.r[i]).max(0.0);
        if !next.is_finite() {
            return Err(Error::Divergence {
                iteration,
                what: "lambda",
            });
        }
        s.y[i] = next + beta * (next - s.lambda[i]);
        s.lambda[i] = next;
    }
    s.t = t_next;
    s.k = iteration;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iters: usize,
    /// `max(0, max_i (Cz − d)_i)`.
    pub primal_residual: f64,
    /// `|primal objective − Lagrangian|` at `z = z(λ)`.
    pub gap: f64,
    pub objective: f64,
}

impl Solution {
    /// Sum of the primal entries.
    pub fn checksum(&self) -> f64 {
        self.z.iter().sum()
    }
}

struct Diagnostics {
    z: Vec<f64>,
    residual: f64,
    objective: f64,
    gap: f64,
}

fn diagnose(pre: &Precomputed, p: &QpProblem, lambda: &[f64], backend: &Backend) -> Result<Diagnostics, Error> {
    let mut z = kernels::matvec(&pre.dual_to_primal, lambda, backend)?;
    for (zi, vi) in z.iter_mut().zip(&pre.offset) {
        *zi += vi;
    }
    let mut r = kernels::matvec(&p.c, &z, backend)?;
    for (ri, di) in r.iter_mut().zip(&p.d) {
        *ri -= di;
    }
    let residual = r.iter().cloned().fold(0.0, f64::max);
    let hz = kernels::matvec(&p.h, &z, backend)?;
    let objective = 0.5 * kernels::dot(&z, &hz, backend)? + kernels::dot(&p.g, &z, backend)?;
    let lagrangian = objective + kernels::dot(lambda, &r, backend)?;
    Ok(Diagnostics {
        z,
        residual,
        objective,
        gap: (objective - lagrangian).abs(),
    })
}

/// Epilogue: primal recovery from the final `λ` (not the extrapolated `y`).
pub fn epilogue(pre: &Precomputed, p: &QpProblem, s: &DualState, backend: &Backend) -> Result<Solution, Error> {
    let diag = diagnose(pre, p, &s.lambda, backend)?;
    check_finite(&diag.z, s.k, "z")?;
    Ok(Solution {
        z: diag.z,
        lambda: s.lambda.clone(),
        iters: s.k,
        primal_residual: diag.residual,
        gap: diag.gap,
        objective: diag.objective,
    })
}

/// Runs the main loop on an already prepared state.
pub fn run_iterations(pre: &Precomputed, p: &QpProblem, s: &mut DualState, opts: &SolverOptions) -> Result<(), Error> {
    if p.m() == 0 {
        return Ok(());
    }
    while s.k < opts.max_iters {
        iterate_once(pre, p, s, &opts.backend)?;
        if opts.tol > 0.0 {
            let diag = diagnose(pre, p, &s.lambda, &opts.backend)?;
            if diag.gap <= opts.tol && diag.residual <= opts.tol {
                break;
            }
        }
    }
    Ok(())
}

/// Prologue, main loop and epilogue.
///
/// With `tol = 0` the loop runs exactly `max_iters` times. Without
/// constraints the loop is skipped and `z = v`, reported as zero iterations.
pub fn solve(p: &QpProblem, opts: &SolverOptions) -> Result<Solution, Error> {
    opts.validate()?;
    p.validate().into_result()?;
    let pre = prologue(p, opts)?;
    solve_prepared(&pre, p, opts)
}

/// Main loop and epilogue for a problem whose prologue is already done.
pub fn solve_prepared(pre: &Precomputed, p: &QpProblem, opts: &SolverOptions) -> Result<Solution, Error> {
    opts.validate()?;
    let mut state = match &opts.initial_lambda {
        Some(l) if l.len() == p.m() => DualState::warm(p.n(), l),
        Some(l) => {
            return Err(Error::Dimension(format!(
                "warm start has {} entries, problem has {} constraints",
                l.len(),
                p.m()
            )))
        }
        None => DualState::cold(p.n(), p.m()),
    };
    run_iterations(pre, p, &mut state, opts)?;
    epilogue(pre, p, &state, &opts.backend)
}
