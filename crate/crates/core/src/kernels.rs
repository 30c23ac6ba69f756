//! Matrix-vector and vector primitives.
//!
//! Each backend is defined by the order in which it adds products, not by
//! how fast it runs:
//!
//! * `Naive` accumulates every row left to right.
//! * `Tree` forms the row's products and combines them pairwise, level by
//!   level, carrying an odd tail element up unchanged.
//! * `Blocked` walks contiguous row blocks and reduces each row as `Tree`.
//! * `Parallel` hands row blocks to worker threads; per-row arithmetic is
//!   that of `Tree`, so results do not depend on the worker count.

use std::fmt;
use std::str::FromStr;
use std::thread;

use crate::error::Error;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Naive,
    Tree,
    Blocked,
    Parallel,
}

impl BackendKind {
    pub const ALL: [BackendKind; 4] = [
        BackendKind::Naive,
        BackendKind::Tree,
        BackendKind::Blocked,
        BackendKind::Parallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Naive => "naive",
            BackendKind::Tree => "tree",
            BackendKind::Blocked => "blocked",
            BackendKind::Parallel => "parallel",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(BackendKind::Naive),
            "tree" => Ok(BackendKind::Tree),
            "blocked" => Ok(BackendKind::Blocked),
            "parallel" => Ok(BackendKind::Parallel),
            other => Err(Error::InvalidOption(format!("unknown backend {other:?}"))),
        }
    }
}

pub const DEFAULT_BLOCK_ROWS: usize = 8;
pub const DEFAULT_WORKERS: usize = 4;

/// A kernel backend selection. `block_rows` is used by `Blocked` and
/// `Parallel`, `workers` only by `Parallel`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Backend {
    pub kind: BackendKind,
    pub block_rows: usize,
    pub workers: usize,
}

impl Backend {
    pub fn new(kind: BackendKind) -> Self {
        Backend {
            kind,
            block_rows: DEFAULT_BLOCK_ROWS,
            workers: DEFAULT_WORKERS,
        }
    }

    pub fn naive() -> Self {
        Backend::new(BackendKind::Naive)
    }

    pub fn tree() -> Self {
        Backend::new(BackendKind::Tree)
    }

    pub fn blocked(block_rows: usize) -> Self {
        Backend {
            block_rows,
            ..Backend::new(BackendKind::Blocked)
        }
    }

    pub fn parallel(workers: usize) -> Self {
        Backend {
            workers,
            ..Backend::new(BackendKind::Parallel)
        }
    }

    pub fn with_block_rows(mut self, block_rows: usize) -> Self {
        self.block_rows = block_rows;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.block_rows == 0 {
            return Err(Error::InvalidOption("block_rows must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidOption("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Whether this backend reduces rows in tree order.
    pub fn uses_tree_order(&self) -> bool {
        self.kind != BackendKind::Naive
    }
}

impl Default for Backend {
    fn default() -> Self {
        Backend::tree()
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BackendKind::Parallel => write!(f, "parallel:{}", self.workers),
            BackendKind::Blocked => write!(f, "blocked:{}", self.block_rows),
            k => f.write_str(k.name()),
        }
    }
}

/// Parses `naive`, `tree`, `blocked[:rows]` or `parallel[:workers]`.
impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let kind: BackendKind = kind.parse()?;
        let mut b = Backend::new(kind);
        if let Some(arg) = arg {
            let v: usize = arg
                .trim()
                .parse()
                .map_err(|_| Error::InvalidOption(format!("bad backend argument {arg:?}")))?;
            match kind {
                BackendKind::Parallel => b.workers = v,
                BackendKind::Blocked => b.block_rows = v,
                _ => return Err(Error::InvalidOption(format!("backend {kind} takes no argument"))),
            }
        }
        b.validate()?;
        Ok(b)
    }
}

/// Number of adder levels used by [`tree_sum`] on `k` values: `⌈log₂ k⌉`.
pub fn tree_depth(k: usize) -> u32 {
    if k <= 1 {
        0
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// Pairwise reduction of `buf`, clobbering it. Adjacent pairs are added
/// level by level; an unpaired last element moves up one level untouched.
pub fn tree_reduce_in_place(buf: &mut [f64]) -> f64 {
    let mut len = buf.len();
    if len == 0 {
        return 0.0;
    }
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            buf[i] = buf[2 * i] + buf[2 * i + 1];
        }
        if len % 2 == 1 {
            buf[half] = buf[len - 1];
            len = half + 1;
        } else {
            len = half;
        }
    }
    buf[0]
}

pub fn tree_sum(v: &[f64]) -> f64 {
    let mut buf = v.to_vec();
    tree_reduce_in_place(&mut buf)
}

/// Left-to-right accumulation starting from zero.
pub fn sequential_sum(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x)
}

fn naive_row(row: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in row.iter().zip(x) {
        acc += a * b;
    }
    acc
}

fn tree_row(row: &[f64], x: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(row.iter().zip(x).map(|(a, b)| a * b));
    tree_reduce_in_place(scratch)
}

fn tree_rows(a: &Matrix, first_row: usize, out: &mut [f64], x: &[f64]) {
    let mut scratch = Vec::with_capacity(x.len());
    for (k, o) in out.iter_mut().enumerate() {
        *o = tree_row(a.row(first_row + k), x, &mut scratch);
    }
}

fn check_matvec(a: &Matrix, x: &[f64], out: &[f64]) -> Result<(), Error> {
    if a.cols() != x.len() {
        return Err(Error::Dimension(format!(
            "matvec: matrix has {} columns, vector has {} entries",
            a.cols(),
            x.len()
        )));
    }
    if a.rows() != out.len() {
        return Err(Error::Dimension(format!(
            "matvec: matrix has {} rows, output has {} entries",
            a.rows(),
            out.len()
        )));
    }
    Ok(())
}

/// Writes `A·x` into `out` using the given backend.
pub fn matvec_into(a: &Matrix, x: &[f64], out: &mut [f64], backend: &Backend) -> Result<(), Error> {
    check_matvec(a, x, out)?;
    backend.validate()?;
    if a.cols() == 0 {
        out.fill(0.0);
        return Ok(());
    }
    match backend.kind {
        BackendKind::Naive => {
            for (i, o) in out.iter_mut().enumerate() {
                *o = naive_row(a.row(i), x);
            }
        }
        BackendKind::Tree => tree_rows(a, 0, out, x),
        BackendKind::Blocked => {
            let block = backend.block_rows.min(a.rows()).max(1);
            for (b, chunk) in out.chunks_mut(block).enumerate() {
                tree_rows(a, b * block, chunk, x);
            }
        }
        BackendKind::Parallel => {
            let block = backend.block_rows.min(a.rows()).max(1);
            let blocks: Vec<(usize, &mut [f64])> = out
                .chunks_mut(block)
                .enumerate()
                .map(|(b, chunk)| (b * block, chunk))
                .collect();
            let workers = backend.workers.min(blocks.len()).max(1);
            if workers == 1 {
                for (first, chunk) in blocks {
                    tree_rows(a, first, chunk, x);
                }
                return Ok(());
            }
            // Round-robin assignment of blocks to workers; each output block
            // is owned by exactly one worker.
            let mut per_worker: Vec<Vec<(usize, &mut [f64])>> = (0..workers).map(|_| Vec::new()).collect();
            for (idx, blk) in blocks.into_iter().enumerate() {
                per_worker[idx % workers].push(blk);
            }
            thread::scope(|s| {
                for work in per_worker {
                    s.spawn(move || {
                        for (first, chunk) in work {
                            tree_rows(a, first, chunk, x);
                        }
                    });
                }
            });
        }
    }
    Ok(())
}

/// `A·x` with the given backend. Callers add offsets themselves.
pub fn matvec(a: &Matrix, x: &[f64], backend: &Backend) -> Result<Vec<f64>, Error> {
    let mut out = vec![0.0; a.rows()];
    matvec_into(a, x, &mut out, backend)?;
    Ok(out)
}

/// Elementwise `max(0, v_i)`.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

pub fn project_nonneg_in_place(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Scalar product using the backend's row reduction order.
pub fn dot(a: &[f64], b: &[f64], backend: &Backend) -> Result<f64, Error> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("dot: lengths {} and {}", a.len(), b.len())));
    }
    Ok(if backend.uses_tree_order() {
        let mut scratch = Vec::with_capacity(a.len());
        tree_row(a, b, &mut scratch)
    } else {
        naive_row(a, b)
    })
}

/// Returns `y + alpha·x`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>, Error> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("axpy: lengths {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(xi, yi)| yi + alpha * xi).collect())
}
