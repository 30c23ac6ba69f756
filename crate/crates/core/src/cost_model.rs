//! Analytic cycle and resource estimates for the main loop under HLS-style
//! directives: inner-loop unrolling with a tree adder, outer-loop
//! pipelining at a given initiation interval, and row partitioning.
//!
//! Row body depth with unroll factor `u` over `q` columns:
//!
//! ```text
//! B(u) = L_mul + ⌈log₂ u⌉·L_add + (⌈q/u⌉ − 1)·(L_mul + L_add)
//! ```
//!
//! A `p`-row product then costs
//!
//! * not pipelined, `u = 1`: `⌈p/P⌉·(q·(L_mul + L_add + c_loop) + c_loop) + c_fixed`
//! * not pipelined, `u ≥ 2`: `⌈p/P⌉·(B(u) + ⌈q/u⌉·c_loop + c_loop) + c_fixed`
//! * pipelined:              `B(u) + (⌈p/P⌉ − 1)·II + c_fixed`
//!
//! where `P` is the number of rows processed side by side. The model is a
//! closed form, not a scheduler; `II` is an input.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unroll {
    Factor(u64),
    /// Unroll by the full row length.
    Full,
}

impl Unroll {
    /// Effective factor for a row of `q` columns.
    pub fn resolve(self, q: u64) -> u64 {
        match self {
            Unroll::Factor(u) => u.min(q).max(1),
            Unroll::Full => q.max(1),
        }
    }
}

impl fmt::Display for Unroll {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unroll::Factor(u) => write!(f, "{u}"),
            Unroll::Full => f.write_str("full"),
        }
    }
}

impl FromStr for Unroll {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(Unroll::Full);
        }
        s.parse::<u64>()
            .map(Unroll::Factor)
            .map_err(|_| format!("unroll must be a positive integer or `full`, got {s:?}"))
    }
}

/// Directive set and operator latencies, all in cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelConfig {
    pub l_mul: u64,
    pub l_add: u64,
    pub unroll: Unroll,
    /// Outer-loop initiation interval; 0 means not pipelined.
    pub ii: u64,
    /// Rows processed concurrently (needs partitioned arrays).
    pub row_par: u64,
    pub c_loop: u64,
    pub c_fixed: u64,
    /// Cycles per element for the vector operations of one iteration.
    pub c_vec: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            l_mul: 1,
            l_add: 1,
            unroll: Unroll::Factor(1),
            ii: 0,
            row_par: 1,
            c_loop: 0,
            c_fixed: 0,
            c_vec: 1,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.l_mul < 1 {
            return bad("L_mul must be >= 1");
        }
        if self.l_add < 1 {
            return bad("L_add must be >= 1");
        }
        if self.unroll == Unroll::Factor(0) {
            return bad("unroll must be >= 1");
        }
        if self.row_par < 1 {
            return bad("row_par must be >= 1");
        }
        Ok(())
    }

    pub fn is_pipelined(&self) -> bool {
        self.ii > 0
    }
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        (64 - (x - 1).leading_zeros()) as u64
    }
}

/// Depth of one row's multiply-accumulate with unroll factor `u`.
pub fn row_body_depth(q: u64, u: u64, cfg: &KernelConfig) -> u64 {
    cfg.l_mul + ceil_log2(u) * cfg.l_add + (ceil_div(q, u) - 1) * (cfg.l_mul + cfg.l_add)
}

/// Cycles for a `p×q` matrix-vector product. `unroll` and `row_par` are
/// clamped to the matrix dimensions.
pub fn estimate_matvec_cycles(p: u64, q: u64, cfg: &KernelConfig) -> Result<u64, Error> {
    cfg.validate()?;
    if p == 0 || q == 0 {
        return Err(Error::InvalidConfig(format!(
            "matvec dimensions must be >= 1, got {p}x{q}"
        )));
    }
    let u = cfg.unroll.resolve(q);
    let row_groups = ceil_div(p, cfg.row_par.min(p));
    let body = row_body_depth(q, u, cfg);
    let cycles = if cfg.is_pipelined() {
        body + (row_groups - 1) * cfg.ii
    } else if u == 1 {
        row_groups * (q * (cfg.l_mul + cfg.l_add + cfg.c_loop) + cfg.c_loop)
    } else {
        row_groups * (body + ceil_div(q, u) * cfg.c_loop + cfg.c_loop)
    };
    Ok(cycles + cfg.c_fixed)
}

/// One main-loop iteration: the `n×m` and `m×n` products plus `c_vec`
/// cycles per vector element.
pub fn estimate_iteration_cycles(n: u64, m: u64, cfg: &KernelConfig) -> Result<u64, Error> {
    let dual_to_primal = estimate_matvec_cycles(n, m, cfg)?;
    let residual = estimate_matvec_cycles(m, n, cfg)?;
    Ok(dual_to_primal + residual + cfg.c_vec * (m + n))
}

/// `iters·iteration + c_pro + c_epi`.
pub fn solve_cycles_from_iteration(iters: u64, iteration: u64, c_pro: u64, c_epi: u64) -> u64 {
    iters * iteration + c_pro + c_epi
}

pub fn estimate_solve_cycles(
    iters: u64,
    n: u64,
    m: u64,
    cfg: &KernelConfig,
    c_pro: u64,
    c_epi: u64,
) -> Result<u64, Error> {
    if iters == 0 {
        return Err(Error::InvalidConfig("iters must be >= 1".into()));
    }
    let it = estimate_iteration_cycles(n, m, cfg)?;
    Ok(solve_cycles_from_iteration(iters, it, c_pro, c_epi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resources {
    pub mults: u64,
    pub adders: u64,
    pub mem_banks: u64,
}

/// Datapath proxies: `unroll·row_par` multipliers and banks and
/// `(unroll − 1)·row_par` tree adders. `full` resolves against the wider of
/// the two products.
pub fn estimate_resources(n: u64, m: u64, cfg: &KernelConfig) -> Result<Resources, Error> {
    cfg.validate()?;
    let width = n.max(m).max(1);
    let u = cfg.unroll.resolve(width);
    let rp = cfg.row_par.min(width);
    Ok(Resources {
        mults: u * rp,
        adders: (u - 1) * rp,
        mem_banks: u * rp,
    })
}

/// Estimates for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    pub label: String,
    pub iter_cycles: u64,
    pub solve_cycles: u64,
    pub iters: u64,
    pub resources: Resources,
}

pub fn cycle_report(label: &str, n: u64, m: u64, est: &EstimateConfig) -> Result<CycleReport, Error> {
    let iter_cycles = estimate_iteration_cycles(n, m, &est.kernel)?;
    Ok(CycleReport {
        label: label.to_string(),
        iter_cycles,
        solve_cycles: estimate_solve_cycles(est.iters, n, m, &est.kernel, est.c_pro, est.c_epi)?,
        iters: est.iters,
        resources: estimate_resources(n, m, &est.kernel)?,
    })
}

/// Contents of a `key = value` config file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimateConfig {
    pub kernel: KernelConfig,
    pub iters: u64,
    pub c_pro: u64,
    pub c_epi: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            kernel: KernelConfig::default(),
            iters: 500,
            c_pro: 0,
            c_epi: 0,
        }
    }
}

/// Parses `key = value` lines. Keys are the config field names
/// (`L_mul`, `L_add`, `unroll`, `II`, `row_par`, `c_loop`, `c_fixed`,
/// `c_vec`) plus `iters`, `c_pro` and `c_epi`, matched case-insensitively.
/// Missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<EstimateConfig, ParseError> {
    let mut cfg = EstimateConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ParseError::Section {
            line,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let int = || {
            value.parse::<u64>().map_err(|_| ParseError::Number {
                line,
                token: value.to_string(),
            })
        };
        match key.as_str() {
            "l_mul" => cfg.kernel.l_mul = int()?,
            "l_add" => cfg.kernel.l_add = int()?,
            "unroll" => {
                cfg.kernel.unroll = value.parse().map_err(|_| ParseError::Number {
                    line,
                    token: value.to_string(),
                })?
            }
            "ii" => cfg.kernel.ii = int()?,
            "row_par" => cfg.kernel.row_par = int()?,
            "c_loop" => cfg.kernel.c_loop = int()?,
            "c_fixed" => cfg.kernel.c_fixed = int()?,
            "c_vec" => cfg.kernel.c_vec = int()?,
            "iters" => cfg.iters = int()?,
            "c_pro" => cfg.c_pro = int()?,
            "c_epi" => cfg.c_epi = int()?,
            _ => {
                return Err(ParseError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    Ok(cfg)
}

pub fn render_config(cfg: &EstimateConfig) -> String {
    let k = &cfg.kernel;
    format!(
        "L_mul = {}\nL_add = {}\nunroll = {}\nII = {}\nrow_par = {}\nc_loop = {}\nc_fixed = {}\nc_vec = {}\niters = {}\nc_pro = {}\nc_epi = {}\n",
        k.l_mul,
        k.l_add,
        k.unroll,
        k.ii,
        k.row_par,
        k.c_loop,
        k.c_fixed,
        k.c_vec,
        cfg.iters,
        cfg.c_pro,
        cfg.c_epi
    )
}

/// One directive change that lowered latency but also lowered the
/// `mults·adders` product.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffException {
    pub from: KernelConfig,
    pub to: KernelConfig,
    pub cycles: (u64, u64),
    pub product: (u64, u64),
}

/// The directive grid: unroll ∈ {1, 2, 4, full}, II ∈ {0, 1, 2},
/// row_par ∈ {1, 2, 4}, other fields taken from `base`.
pub fn directive_grid(base: &KernelConfig) -> Vec<KernelConfig> {
    let mut out = Vec::new();
    for unroll in [Unroll::Factor(1), Unroll::Factor(2), Unroll::Factor(4), Unroll::Full] {
        for ii in [0, 1, 2] {
            for row_par in [1, 2, 4] {
                out.push(KernelConfig {
                    unroll,
                    ii,
                    row_par,
                    ..*base
                });
            }
        }
    }
    out
}

/// Checks every single-directive change on the grid and returns the ones
/// that cut `p×q` matvec latency while also cutting `mults·adders`.
pub fn tradeoff_exceptions(p: u64, q: u64, base: &KernelConfig) -> Result<Vec<TradeoffException>, Error> {
    let grid = directive_grid(base);
    let mut out = Vec::new();
    for a in &grid {
        for b in &grid {
            let changed = (a.unroll != b.unroll) as u8 + (a.ii != b.ii) as u8 + (a.row_par != b.row_par) as u8;
            if changed != 1 {
                continue;
            }
            let ca = estimate_matvec_cycles(p, q, a)?;
            let cb = estimate_matvec_cycles(p, q, b)?;
            let ra = estimate_resources(p, q, a)?;
            let rb = estimate_resources(p, q, b)?;
            let (pa, pb) = (ra.mults * ra.adders, rb.mults * rb.adders);
            if cb < ca && pb < pa {
                out.push(TradeoffException {
                    from: *a,
                    to: *b,
                    cycles: (ca, cb),
                    product: (pa, pb),
                });
            }
        }
    }
    Ok(out)
}

/// A model point reproducing three per-iteration latency targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub n: u64,
    pub m: u64,
    /// Naive, unrolled + pipelined, and the same with row partitioning.
    pub configs: [KernelConfig; 3],
    pub estimates: [u64; 3],
    pub targets: [u64; 3],
    /// Largest `|estimate/target − 1|` over the three configurations.
    pub max_rel_error: f64,
    pub points_searched: u64,
}

impl Calibration {
    pub fn speedups(&self) -> (f64, f64) {
        let [a, b, c] = self.estimates.map(|e| e as f64);
        (a / b, b / c)
    }

    pub fn rel_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| rel_error(self.estimates[i], self.targets[i]))
    }
}

/// Search space for [`calibrate`].
#[derive(Clone, Debug)]
pub struct CalibrationGrid {
    pub dims: Vec<u64>,
    pub l_mul: Vec<u64>,
    pub l_add: Vec<u64>,
    pub c_loop: Vec<u64>,
    pub c_vec: u64,
    pub ii: Vec<u64>,
    pub row_par: Vec<u64>,
    pub min_speedups: (f64, f64),
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        CalibrationGrid {
            dims: (8..=64).step_by(4).collect(),
            l_mul: (1..=6).collect(),
            l_add: (1..=8).collect(),
            c_loop: (0..=3).collect(),
            c_vec: 1,
            ii: (1..=32).collect(),
            row_par: (2..=16).collect(),
            min_speedups: (8.0, 3.5),
        }
    }
}

fn rel_error(est: u64, target: u64) -> f64 {
    (est as f64 / target as f64 - 1.0).abs()
}

/// Grid search for dimensions and latency constants such that
///
/// 1. the naive datapath (`unroll = 1`, not pipelined),
/// 2. full unroll with a pipelined outer loop at some `II`, and
/// 3. the same with `row_par > 1`
///
/// land within `tolerance` of the three per-iteration targets, with the
/// required speedups between consecutive configurations. Among qualifying
/// points the one with the smallest worst-case relative error wins; ties go
/// to the first point in grid order.
pub fn calibrate(targets: [u64; 3], tolerance: f64, grid: &CalibrationGrid) -> Result<Calibration, Error> {
    if targets.contains(&0) {
        return Err(Error::InvalidConfig("targets must be positive".into()));
    }
    let mut best: Option<Calibration> = None;
    let mut searched = 0u64;
    for &n in &grid.dims {
        for &m in &grid.dims {
            for &l_mul in &grid.l_mul {
                for &l_add in &grid.l_add {
                    for &c_loop in &grid.c_loop {
                        let naive = KernelConfig {
                            l_mul,
                            l_add,
                            unroll: Unroll::Factor(1),
                            ii: 0,
                            row_par: 1,
                            c_loop,
                            c_fixed: 0,
                            c_vec: grid.c_vec,
                        };
                        searched += 1;
                        let e0 = estimate_iteration_cycles(n, m, &naive)?;
                        let err0 = rel_error(e0, targets[0]);
                        if err0 > tolerance {
                            continue;
                        }
                        for &ii in &grid.ii {
                            let a = KernelConfig {
                                unroll: Unroll::Full,
                                ii,
                                ..naive
                            };
                            searched += 1;
                            let e1 = estimate_iteration_cycles(n, m, &a)?;
                            let err1 = rel_error(e1, targets[1]);
                            if err1 > tolerance || (e0 as f64 / e1 as f64) < grid.min_speedups.0 {
                                continue;
                            }
                            for &row_par in &grid.row_par {
                                let b = KernelConfig { row_par, ..a };
                                searched += 1;
                                let e2 = estimate_iteration_cycles(n, m, &b)?;
                                let err2 = rel_error(e2, targets[2]);
                                if err2 > tolerance || (e1 as f64 / e2 as f64) < grid.min_speedups.1 {
                                    continue;
                                }
                                let worst = err0.max(err1).max(err2);
                                if best.as_ref().is_none_or(|b| worst < b.max_rel_error) {
                                    best = Some(Calibration {
                                        n,
                                        m,
                                        configs: [naive, a, b],
                                        estimates: [e0, e1, e2],
                                        targets,
                                        max_rel_error: worst,
                                        points_searched: 0,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let mut cal = best.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "no grid point within {:.1}% of targets {targets:?}",
            tolerance * 100.0
        ))
    })?;
    cal.points_searched = searched;
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(l_mul: u64, l_add: u64, c_loop: u64) -> KernelConfig {
        KernelConfig {
            l_mul,
            l_add,
            c_loop,
            ..KernelConfig::default()
        }
    }

    #[test]
    fn naive_matvec_formula() {
        let c = cfg(3, 4, 2);
        assert_eq!(estimate_matvec_cycles(4, 4, &c).unwrap(), 152);
    }

    #[test]
    fn unrolled_pipelined_matvec() {
        let c = KernelConfig {
            unroll: Unroll::Full,
            ii: 1,
            ..cfg(3, 4, 2)
        };
        assert_eq!(row_body_depth(4, 4, &c), 11);
        assert_eq!(estimate_matvec_cycles(4, 4, &c).unwrap(), 14);
        let c2 = KernelConfig { row_par: 2, ..c };
        assert_eq!(estimate_matvec_cycles(4, 4, &c2).unwrap(), 12);
        assert_eq!(estimate_iteration_cycles(4, 4, &c).unwrap(), 36);
    }

    #[test]
    fn solve_cycles_from_table_rows() {
        assert_eq!(solve_cycles_from_iteration(500, 9000, 0, 0), 4_500_000);
        assert_eq!(solve_cycles_from_iteration(500, 1000, 0, 0), 500_000);
        assert_eq!(solve_cycles_from_iteration(500, 237, 0, 0), 118_500);
    }

    #[test]
    fn resources() {
        let r = estimate_resources(8, 8, &KernelConfig::default()).unwrap();
        assert_eq!((r.mults, r.adders, r.mem_banks), (1, 0, 1));
        let c = KernelConfig {
            unroll: Unroll::Factor(4),
            row_par: 2,
            ..KernelConfig::default()
        };
        let r = estimate_resources(8, 8, &c).unwrap();
        assert_eq!((r.mults, r.adders, r.mem_banks), (8, 6, 8));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            KernelConfig {
                l_mul: 0,
                ..KernelConfig::default()
            },
            KernelConfig {
                l_add: 0,
                ..KernelConfig::default()
            },
            KernelConfig {
                row_par: 0,
                ..KernelConfig::default()
            },
            KernelConfig {
                unroll: Unroll::Factor(0),
                ..KernelConfig::default()
            },
        ];
        for c in bad {
            assert!(estimate_matvec_cycles(4, 4, &c).is_err(), "{c:?}");
        }
        assert!(estimate_matvec_cycles(0, 4, &KernelConfig::default()).is_err());
        assert!(estimate_solve_cycles(0, 4, 4, &KernelConfig::default(), 0, 0).is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let text = "# version B\nL_mul = 3\nL_add=4\nunroll = full\nII = 15\nrow_par = 5\nc_loop = 1\niters = 500\nc_pro = 10 # prologue\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.kernel.unroll, Unroll::Full);
        assert_eq!(c.kernel.ii, 15);
        assert_eq!(c.kernel.c_vec, 1);
        assert_eq!(c.c_pro, 10);
        assert_eq!(parse_config(&render_config(&c)).unwrap(), c);
    }

    #[test]
    fn config_file_errors() {
        assert!(matches!(
            parse_config("L_mul = 3\nspeed = 9\n"),
            Err(ParseError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("II = fast\n"),
            Err(ParseError::Number { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("unroll\n"),
            Err(ParseError::Section { line: 1, .. })
        ));
    }

    #[test]
    fn doubling_row_par_never_hurts() {
        for n in [1, 3, 8, 17] {
            for m in [1, 5, 16] {
                for base in directive_grid(&cfg(3, 4, 2)) {
                    for rp in [1, 2, 4, 8] {
                        let a = KernelConfig { row_par: rp, ..base };
                        let b = KernelConfig {
                            row_par: 2 * rp,
                            ..base
                        };
                        assert!(
                            estimate_iteration_cycles(n, m, &b).unwrap()
                                <= estimate_iteration_cycles(n, m, &a).unwrap()
                        );
                    }
                }
            }
        }
    }
}
