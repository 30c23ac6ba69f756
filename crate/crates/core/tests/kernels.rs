use dfgm_core::kernels::{self, Backend};
use dfgm_core::{random, Matrix};
use proptest::prelude::*;
use rand::Rng;

fn backends() -> Vec<Backend> {
    vec![
        Backend::naive(),
        Backend::tree(),
        Backend::blocked(5),
        Backend::parallel(3),
    ]
}

fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = (Matrix, Vec<f64>)> {
    (1..=max_rows, 0..=max_cols).prop_flat_map(|(p, q)| {
        (
            prop::collection::vec(-1e3..1e3f64, p * q),
            prop::collection::vec(-1e3..1e3f64, q),
        )
            .prop_map(move |(a, x)| (Matrix::from_row_major(p, q, a).unwrap(), x))
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

#[test]
fn naive_and_tree_agree_on_33x17() {
    let mut rng = random::rng(33);
    let a = random::uniform_matrix(&mut rng, 33, 17, 1.0);
    let x = random::uniform_vec(&mut rng, 17, 1.0);
    let naive = kernels::matvec(&a, &x, &Backend::naive()).unwrap();
    let tree = kernels::matvec(&a, &x, &Backend::tree()).unwrap();
    for (n, t) in naive.iter().zip(&tree) {
        assert!((n - t).abs() <= 1e-12 * n.abs().max(1.0));
    }
    for w in [1, 2, 4] {
        let par = kernels::matvec(&a, &x, &Backend::parallel(w)).unwrap();
        assert_eq!(par, tree, "workers = {w}");
    }
}

#[test]
fn tree_sum_against_sequential_sum() {
    let mut rng = random::rng(1000);
    let v = random::uniform_vec(&mut rng, 1000, 1.0);
    let (t, s) = (kernels::tree_sum(&v), kernels::sequential_sum(&v));
    assert!((t - s).abs() <= 1e-12 * s.abs().max(1.0));

    let ints: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1000..=1000) as f64).collect();
    let exact: i64 = ints.iter().map(|&x| x as i64).sum();
    assert_eq!(kernels::tree_sum(&ints), exact as f64);
    assert_eq!(kernels::sequential_sum(&ints), exact as f64);
}

#[test]
fn blocked_clamps_block_size() {
    let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let big = Backend::blocked(100);
    assert_eq!(kernels::matvec(&a, &[1.0, 1.0], &big).unwrap(), vec![3.0, 7.0]);
    let many = Backend::parallel(16).with_block_rows(1);
    assert_eq!(kernels::matvec(&a, &[1.0, 1.0], &many).unwrap(), vec![3.0, 7.0]);
}

proptest! {
    #[test]
    fn backends_within_rounding_bound((a, x) in matrix_strategy(40, 40)) {
        let q = a.cols() as f64;
        let xn = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let bound = q * f64::EPSILON * a.norm_inf() * xn;
        let results: Vec<Vec<f64>> =
            backends().iter().map(|b| kernels::matvec(&a, &x, b).unwrap()).collect();
        for r in &results[1..] {
            prop_assert!(max_abs_diff(&results[0], r) <= bound);
        }
        // tree, blocked and parallel share the per-row reduction order
        prop_assert_eq!(&results[1], &results[2]);
        prop_assert_eq!(&results[1], &results[3]);
    }

    #[test]
    fn parallel_independent_of_workers((a, x) in matrix_strategy(64, 24), block in 1usize..9) {
        let reference = kernels::matvec(&a, &x, &Backend::parallel(1).with_block_rows(block)).unwrap();
        for w in [2, 4, 8] {
            let r = kernels::matvec(&a, &x, &Backend::parallel(w).with_block_rows(block)).unwrap();
            prop_assert_eq!(&r, &reference);
        }
    }

    #[test]
    fn matvec_is_linear(
        (a, x) in matrix_strategy(20, 20),
        alpha in -10.0..10.0f64,
        beta in -10.0..10.0f64,
        seed in any::<u64>(),
    ) {
        let mut rng = random::rng(seed);
        let y = random::uniform_vec(&mut rng, x.len(), 1e3);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| alpha * xi + beta * yi).collect();
        for b in backends() {
            let lhs = kernels::matvec(&a, &combo, &b).unwrap();
            let ax = kernels::matvec(&a, &x, &b).unwrap();
            let ay = kernels::matvec(&a, &y, &b).unwrap();
            let q = a.cols().max(1) as f64;
            let scale = a.norm_inf() * (alpha.abs() + beta.abs()) * 1e3;
            for i in 0..lhs.len() {
                let rhs = alpha * ax[i] + beta * ay[i];
                prop_assert!((lhs[i] - rhs).abs() <= 4.0 * q * f64::EPSILON * scale + 1e-300);
            }
        }
    }

    #[test]
    fn tree_sum_exact_on_integers(v in prop::collection::vec(-1_000_000i64..=1_000_000, 0..600)) {
        let exact: i64 = v.iter().sum();
        let f: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        prop_assert_eq!(kernels::tree_sum(&f), exact as f64);
    }

    #[test]
    fn tree_depth_is_ceil_log2(k in 1usize..100_000) {
        let d = kernels::tree_depth(k);
        prop_assert!(1usize << d >= k);
        if d > 0 {
            prop_assert!(1usize << (d - 1) < k);
        }
    }

    #[test]
    fn projection_idempotent(v in prop::collection::vec(-1e6..1e6f64, 0..50)) {
        let once = kernels::project_nonneg(&v);
        prop_assert!(once.iter().all(|&x| x >= 0.0));
        prop_assert_eq!(kernels::project_nonneg(&once), once);
    }

    #[test]
    fn self_dot_nonnegative(v in prop::collection::vec(-1e6..1e6f64, 0..50)) {
        for b in backends() {
            prop_assert!(kernels::dot(&v, &v, &b).unwrap() >= 0.0);
        }
    }
}
