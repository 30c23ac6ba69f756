//! Seeded random instances for tests, benchmarks and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;
use crate::problem::QpProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-scale, scale)`.
pub fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_row_major(rows, cols, data).unwrap()
}

pub fn uniform_vec<R: Rng>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// `AᵀA + I` for a uniform square `A`.
pub fn spd_matrix<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let a = uniform_matrix(rng, n, n, 1.0);
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..n).map(|k| a[(k, i)] * a[(k, j)]).sum();
            h[(i, j)] = s;
            h[(j, i)] = s;
        }
        h[(i, i)] += 1.0;
    }
    h
}

/// A feasible strictly convex QP: `H = AᵀA + I`, uniform `C`, and `d > 0`
/// so that `z = 0` is strictly feasible. `g` is large enough that a good
/// share of constraints end up active.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m: usize) -> QpProblem {
    let h = spd_matrix(rng, n);
    let g = uniform_vec(rng, n, 5.0);
    let c = uniform_matrix(rng, m, n, 1.0);
    let d = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    QpProblem::new(h, g, c, d).unwrap()
}

/// `count` problems with `1 ≤ n ≤ max_n` and `1 ≤ m ≤ max_m`.
pub fn random_suite(seed: u64, count: usize, max_n: usize, max_m: usize) -> Vec<QpProblem> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_n);
            let m = rng.gen_range(1..=max_m);
            random_qp(&mut rng, n, m)
        })
        .collect()
}
