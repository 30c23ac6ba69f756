//! QP instances, their validation, and condensed MPC construction.

use crate::error::Error;
use crate::matrix::{Cholesky, Matrix};

/// Relative tolerance for the symmetry check on `H`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Strictly convex QP: minimize `½ zᵀHz + gᵀz` subject to `Cz ≤ d`.
///
/// `C` always has `n` columns, including when there are no constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: Matrix,
    pub g: Vec<f64>,
    pub c: Matrix,
    pub d: Vec<f64>,
}

/// Outcome of [`QpProblem::validate`]. Violations are listed, never thrown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<(), Error> {
        if self.ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem(self.violations.join("; ")))
        }
    }
}

impl QpProblem {
    /// Assembles a problem, checking only that the shapes fit together.
    pub fn new(h: Matrix, g: Vec<f64>, c: Matrix, d: Vec<f64>) -> Result<Self, Error> {
        let p = QpProblem { h, g, c, d };
        let shape = p.shape_violations();
        if shape.is_empty() {
            Ok(p)
        } else {
            Err(Error::Dimension(shape.join("; ")))
        }
    }

    /// Problem without inequality constraints.
    pub fn unconstrained(h: Matrix, g: Vec<f64>) -> Result<Self, Error> {
        let n = h.cols();
        QpProblem::new(h, g, Matrix::zeros(0, n), Vec::new())
    }

    pub fn n(&self) -> usize {
        self.h.rows()
    }

    pub fn m(&self) -> usize {
        self.c.rows()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let hz = self.h.mul_vec(z);
        let quad: f64 = z.iter().zip(&hz).map(|(a, b)| a * b).sum();
        let lin: f64 = z.iter().zip(&self.g).map(|(a, b)| a * b).sum();
        0.5 * quad + lin
    }

    /// `Cz − d`.
    pub fn constraint_residual(&self, z: &[f64]) -> Vec<f64> {
        self.c.mul_vec(z).iter().zip(&self.d).map(|(cz, d)| cz - d).collect()
    }

    fn shape_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let n = self.h.rows();
        if self.h.cols() != n {
            v.push(format!("H is {}x{}, not square", self.h.rows(), self.h.cols()));
        }
        if self.g.len() != n {
            v.push(format!("g has length {}, expected {n}", self.g.len()));
        }
        if self.c.cols() != n {
            v.push(format!("C has {} columns, expected {n}", self.c.cols()));
        }
        if self.d.len() != self.c.rows() {
            v.push(format!("d has length {}, expected {}", self.d.len(), self.c.rows()));
        }
        v
    }

    /// Checks every problem invariant and names each violation.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = self.shape_violations();
        let finite = self.h.is_finite() && self.c.is_finite() && self.g.iter().chain(&self.d).all(|x| x.is_finite());
        if !finite {
            violations.push("non-finite entries".to_string());
        }
        if self.h.rows() == self.h.cols() && finite {
            if !is_symmetric(&self.h) {
                violations.push("H not symmetric".to_string());
            } else if Cholesky::factor(&self.h).is_err() {
                violations.push("H not positive definite".to_string());
            }
        }
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }
}

/// `max|A_ij − A_ji| ≤ 1e-12·max|A_ij|`.
pub fn is_symmetric(a: &Matrix) -> bool {
    if a.rows() != a.cols() {
        return false;
    }
    let scale = a.max_abs();
    let n = a.rows();
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// Linear time-invariant model with input bounds and quadratic weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MpcModel {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub horizon: usize,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub x0: Vec<f64>,
}

impl MpcModel {
    pub fn nx(&self) -> usize {
        self.a.rows()
    }

    pub fn nu(&self) -> usize {
        self.b.cols()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (nx, nu) = (self.nx(), self.nu());
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.a.shape() != (nx, nx) {
            return bad("A must be square".into());
        }
        if self.b.rows() != nx {
            return bad(format!("B has {} rows, expected {nx}", self.b.rows()));
        }
        if self.q.shape() != (nx, nx) {
            return bad(format!("Q must be {nx}x{nx}"));
        }
        if self.r.shape() != (nu, nu) {
            return bad(format!("R must be {nu}x{nu}"));
        }
        if self.u_min.len() != nu || self.u_max.len() != nu {
            return bad(format!("input bounds must have length {nu}"));
        }
        if self.x0.len() != nx {
            return bad(format!("x0 must have length {nx}"));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.u_min.iter().zip(&self.u_max).any(|(lo, hi)| lo > hi) {
            return bad("u_min exceeds u_max".into());
        }
        if !is_symmetric(&self.q) || !is_psd(&self.q) {
            return bad("Q not symmetric positive semidefinite".into());
        }
        if !is_symmetric(&self.r) || Cholesky::factor(&self.r).is_err() {
            return bad("R not symmetric positive definite".into());
        }
        Ok(())
    }
}

fn is_psd(a: &Matrix) -> bool {
    let n = a.rows();
    let shift = 1e-12 * a.max_abs().max(1.0);
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }
    Cholesky::factor(&shifted).is_ok()
}

/// Condensed MPC QP over the stacked inputs `u₀..u_{N−1}`.
///
/// Predicted states are `x_{i+1} = A^{i+1}x₀ + Σ_{j≤i} A^{i−j}B u_j` for
/// `i = 0..N−1`. The cost `Σ x_{i+1}ᵀQx_{i+1} + u_iᵀRu_i` (no separate
/// terminal weight) gives `H = ΓᵀQ̄Γ + R̄` and `g = ΓᵀQ̄Φx₀`. Constraint
/// rows are the `N·nu` upper bounds followed by the `N·nu` lower bounds.
pub fn condense_mpc(mdl: &MpcModel) -> Result<QpProblem, Error> {
    mdl.validate()?;
    let (nx, nu, horizon) = (mdl.nx(), mdl.nu(), mdl.horizon);
    let n = horizon * nu;

    // powers[k] = A^k for k = 0..=N
    let mut powers = vec![Matrix::identity(nx)];
    for k in 0..horizon {
        let next = powers[k].mul(&mdl.a)?;
        powers.push(next);
    }

    let mut gamma = Matrix::zeros(horizon * nx, n);
    for i in 0..horizon {
        for j in 0..=i {
            let blk = powers[i - j].mul(&mdl.b)?;
            gamma.set_block(i * nx, j * nu, &blk);
        }
    }
    let mut phi_x0 = Vec::with_capacity(horizon * nx);
    for i in 0..horizon {
        phi_x0.extend(powers[i + 1].mul_vec(&mdl.x0));
    }

    let mut q_bar = Matrix::zeros(horizon * nx, horizon * nx);
    let mut r_bar = Matrix::zeros(n, n);
    for i in 0..horizon {
        q_bar.set_block(i * nx, i * nx, &mdl.q);
        r_bar.set_block(i * nu, i * nu, &mdl.r);
    }

    let gt_q = gamma.transpose().mul(&q_bar)?;
    let mut h = gt_q.mul(&gamma)?.add(&r_bar)?;
    symmetrize(&mut h);
    let g = gt_q.mul_vec(&phi_x0);

    let mut c = Matrix::zeros(2 * n, n);
    let mut d = Vec::with_capacity(2 * n);
    for k in 0..n {
        c[(k, k)] = 1.0;
        d.push(mdl.u_max[k % nu]);
    }
    for k in 0..n {
        c[(n + k, k)] = -1.0;
        d.push(-mdl.u_min[k % nu]);
    }

    let p = QpProblem::new(h, g, c, d)?;
    Cholesky::factor(&p.h)?;
    p.validate().into_result()?;
    Ok(p)
}

fn symmetrize(h: &mut Matrix) {
    let n = h.rows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = avg;
            h[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]]).unwrap()
    }

    fn one_d() -> QpProblem {
        QpProblem::new(scalar(2.0), vec![-2.0], scalar(1.0), vec![0.5]).unwrap()
    }

    #[test]
    fn validate_accepts_one_d() {
        let rep = one_d().validate();
        assert!(rep.ok, "{:?}", rep.violations);
    }

    #[test]
    fn validate_flags_zero_pivot() {
        let p = QpProblem::unconstrained(scalar(0.0), vec![0.0]).unwrap();
        let rep = p.validate();
        assert!(!rep.ok);
        assert_eq!(rep.violations, vec!["H not positive definite".to_string()]);
    }

    #[test]
    fn validate_flags_asymmetry() {
        let h = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        let rep = QpProblem::unconstrained(h, vec![0.0, 0.0]).unwrap().validate();
        assert!(!rep.ok);
        assert_eq!(rep.violations, vec!["H not symmetric".to_string()]);
    }

    #[test]
    fn validate_flags_nonfinite_and_shape() {
        let p = QpProblem {
            h: scalar(f64::NAN),
            g: vec![0.0, 1.0],
            c: Matrix::zeros(0, 1),
            d: vec![],
        };
        let rep = p.validate();
        assert!(!rep.ok);
        assert_eq!(rep.violations.len(), 2, "{:?}", rep.violations);
    }

    #[test]
    fn new_rejects_shape_mismatch() {
        assert!(QpProblem::new(scalar(1.0), vec![1.0], Matrix::zeros(1, 2), vec![0.0]).is_err());
        assert!(QpProblem::new(scalar(1.0), vec![1.0], scalar(1.0), vec![]).is_err());
    }

    fn scalar_model(a: f64, r: f64, x0: f64) -> MpcModel {
        MpcModel {
            a: scalar(a),
            b: scalar(1.0),
            q: scalar(1.0),
            r: scalar(r),
            horizon: 1,
            u_min: vec![-1.0],
            u_max: vec![1.0],
            x0: vec![x0],
        }
    }

    #[test]
    fn condense_scalar_zero_dynamics() {
        let p = condense_mpc(&scalar_model(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(p.h, scalar(2.0));
        assert_eq!(p.g, vec![0.0]);
        assert_eq!(p.c, Matrix::from_rows(&[[1.0], [-1.0]]).unwrap());
        assert_eq!(p.d, vec![1.0, 1.0]);
    }

    #[test]
    fn condense_scalar_integrator() {
        let p = condense_mpc(&scalar_model(1.0, 0.5, 1.0)).unwrap();
        // BᵀQB + R = 1 + 0.5
        assert_eq!(p.h, scalar(1.5));
        assert_eq!(p.g, vec![1.0]);
    }

    #[test]
    fn condense_rejects_indefinite_r() {
        let err = condense_mpc(&scalar_model(1.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)), "{err}");
        let mut m = scalar_model(1.0, 1.0, 1.0);
        m.u_min = vec![2.0];
        assert!(condense_mpc(&m).is_err());
        m = scalar_model(1.0, 1.0, 1.0);
        m.horizon = 0;
        assert!(condense_mpc(&m).is_err());
    }

    #[test]
    fn condense_zero_state_weight_gives_input_weight() {
        let mdl = MpcModel {
            a: Matrix::from_rows(&[[0.9, 0.2], [-0.1, 0.7]]).unwrap(),
            b: Matrix::from_rows(&[[0.5, 0.0], [0.1, 1.0]]).unwrap(),
            q: Matrix::zeros(2, 2),
            r: Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap(),
            horizon: 3,
            u_min: vec![-1.0, -2.0],
            u_max: vec![1.0, 0.5],
            x0: vec![1.0, -1.0],
        };
        let p = condense_mpc(&mdl).unwrap();
        let mut r_bar = Matrix::zeros(6, 6);
        for i in 0..3 {
            r_bar.set_block(2 * i, 2 * i, &mdl.r);
        }
        assert_eq!(p.h, r_bar);
        assert!(p.g.iter().all(|&v| v == 0.0));
        assert_eq!(p.m(), 12);
        assert_eq!(&p.d[..6], &[1.0, 0.5, 1.0, 0.5, 1.0, 0.5]);
        assert_eq!(&p.d[6..], &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }
}
