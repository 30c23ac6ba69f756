//! Exact small-scale QP solutions by active-set enumeration.
//!
//! Every subset `S` of constraints is tried as the active set by solving the
//! equality-constrained KKT system
//!
//! ```text
//! [ H    C_Sᵀ ] [ z ]   [ −g  ]
//! [ C_S   0   ] [ μ ] = [ d_S ]
//! ```
//!
//! with a partial-pivoting LU factorization. Candidates with `μ ≥ −1e-10` and
//! `Cz ≤ d + 1e-9` are kept and the one with the lowest objective wins.
//! Subsets are visited by size and then lexicographically, so ties go to the
//! smaller, then lexicographically first, set.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::problem::QpProblem;

pub const MAX_ORACLE_CONSTRAINTS: usize = 20;
pub const DUAL_TOL: f64 = -1e-10;
pub const PRIMAL_TOL: f64 = 1e-9;

/// Pivot ratio below which a KKT matrix is treated as singular.
const SINGULAR_RATIO: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Sorted constraint indices.
    pub active_set: Vec<usize>,
    pub optimal: bool,
    pub objective: f64,
}

/// Visits all subsets of `0..m` ordered by size, then lexicographically.
fn for_each_subset(m: usize, mut f: impl FnMut(&[usize])) {
    for size in 0..=m {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            f(&idx);
            // rightmost position that can still move right
            let mut i = size;
            while i > 0 && idx[i - 1] == m - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}

struct Candidate {
    z: Vec<f64>,
    mu: Vec<f64>,
}

fn solve_kkt(p: &QpProblem, set: &[usize]) -> Option<Candidate> {
    let n = p.n();
    let k = set.len();
    if k > n {
        // C_S has more rows than columns: the system is singular
        return None;
    }
    let dim = n + k;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = p.h[(i, j)];
        }
        rhs[i] = -p.g[i];
    }
    for (a, &ci) in set.iter().enumerate() {
        for j in 0..n {
            let v = p.c[(ci, j)];
            kkt[(n + a, j)] = v;
            kkt[(j, n + a)] = v;
        }
        rhs[n + a] = p.d[ci];
    }
    let lu = kkt.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..dim).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if max.is_nan() || max <= 0.0 || min <= SINGULAR_RATIO * max {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(Candidate {
        z: sol.rows(0, n).iter().cloned().collect(),
        mu: sol.rows(n, k).iter().cloned().collect(),
    })
}

/// Exact solution by enumerating all `2^m` active sets.
pub fn solve_enumerate(p: &QpProblem) -> Result<OracleSolution, Error> {
    let m = p.m();
    if m > MAX_ORACLE_CONSTRAINTS {
        return Err(Error::TooManyConstraints {
            m,
            limit: MAX_ORACLE_CONSTRAINTS,
        });
    }
    p.validate().into_result()?;

    let mut best: Option<OracleSolution> = None;
    for_each_subset(m, |set| {
        let Some(cand) = solve_kkt(p, set) else {
            return;
        };
        if cand.mu.iter().any(|&mu| mu < DUAL_TOL) {
            return;
        }
        let feasible = p.constraint_residual(&cand.z).iter().all(|&r| r <= PRIMAL_TOL);
        if !feasible {
            return;
        }
        let objective = p.objective(&cand.z);
        let better = match &best {
            None => true,
            Some(b) => objective < b.objective - 1e-12 * (1.0 + b.objective.abs()),
        };
        if better {
            let mut lambda = vec![0.0; m];
            for (&ci, &mu) in set.iter().zip(&cand.mu) {
                lambda[ci] = mu.max(0.0);
            }
            best = Some(OracleSolution {
                z: cand.z,
                lambda,
                active_set: set.to_vec(),
                optimal: true,
                objective,
            });
        }
    });
    best.ok_or(Error::OracleInfeasible)
}

/// KKT residuals of a primal-dual pair.
#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    /// `‖Hz + g + Cᵀλ‖∞`
    pub stationarity: f64,
    /// `max(0, max(Cz − d))`
    pub primal: f64,
    /// `max(0, max(−λ))`
    pub dual: f64,
    /// `max_i |λ_i (Cz − d)_i|`
    pub complementarity: f64,
    pub pass: bool,
}

pub fn check_kkt(p: &QpProblem, z: &[f64], lambda: &[f64], tol: f64) -> Result<KktReport, Error> {
    if z.len() != p.n() || lambda.len() != p.m() {
        return Err(Error::Dimension(format!(
            "check_kkt: z has {} entries (n = {}), lambda has {} (m = {})",
            z.len(),
            p.n(),
            lambda.len(),
            p.m()
        )));
    }
    let mut grad = p.h.mul_vec(z);
    for (gi, g) in grad.iter_mut().zip(&p.g) {
        *gi += g;
    }
    for (row, &li) in p.c.row_iter().zip(lambda) {
        for (gi, cij) in grad.iter_mut().zip(row) {
            *gi += cij * li;
        }
    }
    let stationarity = grad.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let r = p.constraint_residual(z);
    let primal = r.iter().cloned().fold(0.0, f64::max);
    let dual = lambda.iter().fold(0.0_f64, |acc, l| acc.max(-l));
    let complementarity = r
        .iter()
        .zip(lambda)
        .fold(0.0_f64, |acc, (ri, li)| acc.max((ri * li).abs()));
    let pass = stationarity <= tol && primal <= tol && dual <= tol && complementarity <= tol;
    Ok(KktReport {
        stationarity,
        primal,
        dual,
        complementarity,
        pass,
    })
}
