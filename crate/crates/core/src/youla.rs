//! The Youla parameter in a fixed rational basis, the quadratic
//! realizability constraint on it and its tangent subspace.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{FrequencyGrid, Quadrature};
use crate::linalg::{self, c, fro, zeros, CMat, RMat, I, ONE};
use crate::physreal::{feedthrough_defect, signature};
use crate::stabilization::{controller_from_parameter, denominator_feedthrough_det, parameter_from_controller, CoprimeFactorization};
use crate::statespace::{is_hurwitz, is_spectrally_generic, FreqResponse, StateSpace, GENERICITY_TOL, HURWITZ_MARGIN, MINIMAL_TOL};

pub const CONSTRAINT_TOL: f64 = 1e-6;
pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_ORDER: usize = 8;
const NULL_TOL: f64 = 1e-10;
const LSTSQ_TOL: f64 = 1e-12;

/// `Q(s) = Q0 + Σ_{k=1..K} Q_k / (s + β)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct YoulaParameter {
    beta: f64,
    coeffs: Vec<CMat>,
}

/// `[1, (s+β)^-1, ..., (s+β)^-K]`.
pub fn basis_values(beta: f64, order: usize, s: Complex64) -> Vec<Complex64> {
    let r = ONE / (s + beta);
    let mut out = Vec::with_capacity(order + 1);
    let mut v = ONE;
    for _ in 0..=order {
        out.push(v);
        v *= r;
    }
    out
}

impl YoulaParameter {
    pub fn new(beta: f64, coeffs: Vec<CMat>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("basis pole must be positive, got {beta}")));
        }
        let Some(first) = coeffs.first() else {
            return Err(Error::InvalidConfig("Youla parameter needs at least Q0".into()));
        };
        let shape = first.shape();
        if coeffs.iter().any(|q| q.shape() != shape) {
            return Err(Error::DimensionMismatch("Youla coefficients differ in shape".into()));
        }
        if coeffs.iter().any(|q| !linalg::is_finite(q)) {
            return Err(Error::NonFinite("Youla coefficients"));
        }
        Ok(Self { beta, coeffs })
    }

    pub fn zeros(beta: f64, order: usize, rows: usize, cols: usize) -> Result<Self> {
        Self::new(beta, vec![zeros(rows, cols); order + 1])
    }

    pub fn constant(beta: f64, order: usize, q0: CMat) -> Result<Self> {
        let mut q = Self::zeros(beta, order, q0.nrows(), q0.ncols())?;
        q.coeffs[0] = q0;
        Ok(q)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }
    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }
    pub fn rows(&self) -> usize {
        self.coeffs[0].nrows()
    }
    pub fn cols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.beta == other.beta && self.order() == other.order() && self.rows() == other.rows() && self.cols() == other.cols()
    }

    /// Realization with the chain `x_1' = -β x_1 + u`, `x_k' = -β x_k + x_{k-1}`.
    pub fn realization(&self) -> StateSpace {
        let (p, m, k) = (self.rows(), self.cols(), self.order());
        if k == 0 {
            return StateSpace::static_gain(self.coeffs[0].clone());
        }
        let n = k * m;
        let mut a = CMat::identity(n, n) * c(-self.beta, 0.0);
        for j in 1..k {
            for i in 0..m {
                a[(j * m + i, (j - 1) * m + i)] = ONE;
            }
        }
        let mut b = zeros(n, m);
        b.view_mut((0, 0), (m, m)).fill_with_identity();
        let mut cc = zeros(p, n);
        for j in 0..k {
            cc.view_mut((0, j * m), (p, m)).copy_from(&self.coeffs[j + 1]);
        }
        StateSpace::new(a, b, cc, self.coeffs[0].clone()).expect("consistent shapes")
    }

    /// Number of real unknowns (real and imaginary part of every entry).
    pub fn n_params(&self) -> usize {
        2 * self.coeffs.len() * self.rows() * self.cols()
    }

    /// Coefficients as a real vector; entry order is coefficient, column,
    /// row, then (re, im).
    pub fn to_params(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for q in &self.coeffs {
            for z in q.iter() {
                v.push(z.re);
                v.push(z.im);
            }
        }
        DVector::from_vec(v)
    }

    pub fn with_params(&self, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), self.n_params());
        let (p, m) = (self.rows(), self.cols());
        let per = p * m;
        let coeffs = (0..self.coeffs.len())
            .map(|k| CMat::from_fn(p, m, |i, j| {
                let e = 2 * (k * per + j * p + i);
                c(v[e], v[e + 1])
            }))
            .collect();
        Self { beta: self.beta, coeffs }
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Self) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b * c(t, 0.0)).collect();
        Self { beta: self.beta, coeffs }
    }

    /// `Q` recovered from a stabilizing controller and fitted onto the basis.
    pub fn from_controller(cf: &CoprimeFactorization, k: &StateSpace, beta: f64, order: usize) -> Result<Self> {
        let q = parameter_from_controller(cf, k)?;
        Self::fit(&q, &FrequencyGrid::fitting(), beta, order)
    }

    /// Least-squares fit of a response onto the basis on a grid.
    pub fn fit(target: &impl FreqResponse, grid: &FrequencyGrid, beta: f64, order: usize) -> Result<Self> {
        let shape = Self::zeros(beta, order, target.n_outputs(), target.n_inputs())?;
        let samples = target.sweep(grid, Exec::default())?;
        let weights = vec![1.0; grid.len()];
        let a = sample_matrix(&shape, grid, &weights);
        let rhs = stack_samples(&samples, &weights);
        let (x, _) = linalg::real_lstsq(&a, &rhs, LSTSQ_TOL);
        Ok(shape.with_params(&x))
    }
}

impl FreqResponse for YoulaParameter {
    fn n_outputs(&self) -> usize {
        self.rows()
    }
    fn n_inputs(&self) -> usize {
        self.cols()
    }
    fn eval(&self, s: Complex64) -> Result<CMat> {
        let b = basis_values(self.beta, self.order(), s);
        let mut out = zeros(self.rows(), self.cols());
        for (q, bk) in self.coeffs.iter().zip(b) {
            out += q * bk;
        }
        Ok(out)
    }
}

/// Unit complex value of real parameter `j` at coefficient index, row and
/// column, for a parameter of the given shape.
fn param_slot(j: usize, rows: usize, cols: usize) -> (usize, usize, usize, Complex64) {
    let part = if j.is_multiple_of(2) { ONE } else { I };
    let e = j / 2;
    let per = rows * cols;
    let k = e / per;
    let r = e % per;
    (k, r % rows, r / rows, part)
}

fn push_complex(out: &mut Vec<f64>, m: &CMat) {
    for z in m.iter() {
        out.push(z.re);
        out.push(z.im);
    }
}

/// Real coordinates of a Hermitian matrix: diagonal, then `√2 Re` and
/// `√2 Im` of each strictly upper entry, so the Euclidean norm equals the
/// Frobenius norm.
pub fn hermitian_coords(h: &CMat) -> Vec<f64> {
    let n = h.nrows();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.push(h[(i, i)].re);
    }
    let r2 = std::f64::consts::SQRT_2;
    for j in 0..n {
        for i in 0..j {
            v.push(r2 * h[(i, j)].re);
            v.push(r2 * h[(i, j)].im);
        }
    }
    v
}

/// Rows: real and imaginary parts of `√w_k X(iω_k)` for each node; columns:
/// real parameters.
fn sample_matrix(shape: &YoulaParameter, grid: &FrequencyGrid, weights: &[f64]) -> RMat {
    let (p, m) = (shape.rows(), shape.cols());
    let np = shape.n_params();
    let per = 2 * p * m;
    let mut a = RMat::zeros(grid.len() * per, np);
    for (kw, (&w, &wt)) in grid.points().iter().zip(weights).enumerate() {
        let b = basis_values(shape.beta, shape.order(), I * w);
        let sw = wt.sqrt();
        for j in 0..np {
            let (k, r, col, part) = param_slot(j, p, m);
            let v = b[k] * part * sw;
            let row = kw * per + 2 * (col * p + r);
            a[(row, j)] = v.re;
            a[(row + 1, j)] = v.im;
        }
    }
    a
}

fn stack_samples(samples: &[CMat], weights: &[f64]) -> DVector<f64> {
    let mut v = Vec::new();
    for (s, &wt) in samples.iter().zip(weights) {
        push_complex(&mut v, &(s * c(wt.sqrt(), 0.0)));
    }
    DVector::from_vec(v)
}

/// `Φ`, `Λ`, `Π` of the constraint `Φ + Q~Λ + Λ~Q + Q~ΠQ = 0`.
#[derive(Debug, Clone)]
pub struct ConstraintData {
    pub phi: StateSpace,
    pub lambda: StateSpace,
    pub pi: StateSpace,
}

impl ConstraintData {
    pub fn new(phi: StateSpace, lambda: StateSpace, pi: StateSpace) -> Result<Self> {
        let (w, y) = (lambda.n_outputs(), lambda.n_inputs());
        if phi.n_outputs() != y || phi.n_inputs() != y || pi.n_outputs() != w || pi.n_inputs() != w {
            return Err(Error::DimensionMismatch("constraint blocks".into()));
        }
        Ok(Self { phi, lambda, pi })
    }

    /// Number of rows of `Q`.
    pub fn q_rows(&self) -> usize {
        self.lambda.n_outputs()
    }
    pub fn q_cols(&self) -> usize {
        self.lambda.n_inputs()
    }

    pub fn eval_at(&self, w: f64) -> Result<(CMat, CMat, CMat)> {
        Ok((self.phi.at(w)?, self.lambda.at(w)?, self.pi.at(w)?))
    }

    /// `Φ + Q^*Λ + Λ^*Q + Q^*ΠQ` at `iω` for a given value of `Q(iω)`.
    pub fn residual_matrix(&self, w: f64, q: &CMat) -> Result<CMat> {
        let (phi, lam, pi) = self.eval_at(w)?;
        let qa = q.adjoint();
        Ok(phi + &qa * &lam + lam.adjoint() * q + qa * pi * q)
    }
}

/// `Φ = U~JU - V~JV`, `Λ = M~JU - N~JV`, `Π = M~JM - N~JN` with `J` the
/// signature matrix of the loop.
pub fn build_constraint_data(cf: &CoprimeFactorization) -> Result<ConstraintData> {
    let w = cf.m.n_outputs();
    if !w.is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!("loop width {w} is not doubled-up")));
    }
    let j = StateSpace::static_gain(signature(w / 2));
    let quad = |x: &StateSpace, y: &StateSpace| StateSpace::chain(&[&x.conjugate(), &j, y]);
    let phi = quad(&cf.u, &cf.u)?.sub(&quad(&cf.v, &cf.v)?)?;
    let lambda = quad(&cf.m, &cf.u)?.sub(&quad(&cf.n, &cf.v)?)?;
    let pi = quad(&cf.m, &cf.m)?.sub(&quad(&cf.n, &cf.n)?)?;
    ConstraintData::new(phi, lambda, pi)
}

/// `max_ω ‖Φ + Q^*Λ + Λ^*Q + Q^*ΠQ‖_F` over the grid.
pub fn constraint_residual(cd: &ConstraintData, q: &impl FreqResponse, grid: &FrequencyGrid) -> Result<f64> {
    let r = Exec::default().try_map(grid.points(), |&w| Ok::<f64, Error>(fro(&cd.residual_matrix(w, &q.at(w)?)?)))?;
    Ok(r.into_iter().fold(0.0, f64::max))
}

/// `|det (V + N Q)(∞)| > tol`.
pub fn feedthrough_ok(cf: &CoprimeFactorization, q: &StateSpace, tol: f64) -> Result<bool> {
    Ok(denominator_feedthrough_det(cf, q)?.norm() > tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QhatVerdict {
    pub stable: bool,
    pub feedthrough_ok: bool,
    pub constraint_residual: f64,
    pub constraint_ok: bool,
    pub controller_generic: bool,
    pub controller_feedthrough_defect: f64,
    pub controller_feedthrough_ok: bool,
    /// Stable, well-posed and satisfying the quadratic constraint.
    pub in_q: bool,
    /// Additionally yields a spectrally generic controller with feedthrough
    /// of the form `Δ(S, 0)`, `S` unitary.
    pub overall: bool,
}

/// Itemized test of `Q` against the admissible set. Items that cannot be
/// evaluated because an earlier one failed are reported as failing.
pub fn membership_qhat(cf: &CoprimeFactorization, cd: &ConstraintData, q: &StateSpace, grid: &FrequencyGrid, tol: f64) -> Result<QhatVerdict> {
    let stable = q.is_static() || is_hurwitz(q.a(), HURWITZ_MARGIN);
    let ft = feedthrough_ok(cf, q, 1e-9)?;
    let residual = if stable { constraint_residual(cd, q, grid)? } else { f64::INFINITY };
    let constraint_ok = residual <= tol;
    let (generic, defect) = if ft {
        let k = controller_from_parameter(cf, q)?.minimal_realization(MINIMAL_TOL);
        (is_spectrally_generic(k.a(), GENERICITY_TOL), feedthrough_defect(k.d()))
    } else {
        (false, f64::INFINITY)
    };
    let kinf_ok = defect <= tol;
    let in_q = stable && ft && constraint_ok;
    Ok(QhatVerdict {
        stable,
        feedthrough_ok: ft,
        constraint_residual: residual,
        constraint_ok,
        controller_generic: generic,
        controller_feedthrough_defect: defect,
        controller_feedthrough_ok: kinf_ok,
        in_q,
        overall: in_q && generic && kinf_ok,
    })
}

/// Frequency nodes with nonnegative weights.
#[derive(Debug, Clone)]
pub struct Omega {
    pub grid: FrequencyGrid,
    pub weights: Vec<f64>,
}

impl Omega {
    pub fn new(grid: FrequencyGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidGrid("weights must be finite, nonnegative, one per node".into()));
        }
        Ok(Self { grid, weights })
    }

    pub fn uniform(grid: FrequencyGrid) -> Self {
        let weights = vec![1.0; grid.len()];
        Self { grid, weights }
    }

    pub fn quadrature(q: &Quadrature) -> Self {
        Self { grid: q.grid(), weights: q.weights.clone() }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `Σ_k w_k Re tr(A_k^* B_k)`.
    pub fn pairing(&self, a: &[CMat], b: &[CMat]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| w * (x.adjoint() * y).trace().re)
            .sum()
    }

    pub fn norm(&self, a: &[CMat]) -> f64 {
        self.pairing(a, a).max(0.0).sqrt()
    }
}

/// Directions `X` with `X^*Z + Z^*X = 0` at every node, `Z = Λ + ΠQ`.
#[derive(Debug, Clone)]
pub struct TangentSubspace {
    pub omega: Omega,
    pub base: YoulaParameter,
    z: Vec<CMat>,
}

impl TangentSubspace {
    pub fn new(cd: &ConstraintData, q: &YoulaParameter, omega: Omega) -> Result<Self> {
        if q.rows() != cd.q_rows() || q.cols() != cd.q_cols() {
            return Err(Error::DimensionMismatch("Q does not match constraint data".into()));
        }
        let z = Exec::default().try_map(omega.grid.points(), |&w| {
            let (_, lam, pi) = cd.eval_at(w)?;
            Ok::<CMat, Error>(lam + pi * q.at(w)?)
        })?;
        Ok(Self { omega, base: q.clone(), z })
    }

    /// Value of the linearized map at node `k`.
    pub fn map_at(&self, k: usize, x: &CMat) -> CMat {
        let xz = x.adjoint() * &self.z[k];
        &xz + xz.adjoint()
    }

    /// `max_k ‖X^*Z + Z^*X‖_F` over the nodes.
    pub fn max_violation(&self, x: &YoulaParameter) -> Result<f64> {
        let mut worst = 0.0f64;
        for (k, &w) in self.omega.grid.points().iter().enumerate() {
            worst = worst.max(fro(&self.map_at(k, &x.at(w)?)));
        }
        Ok(worst)
    }

    /// Real matrix of the linearized map on parameters, stacked over nodes.
    pub fn constraint_matrix(&self) -> RMat {
        let shape = &self.base;
        let (p, m) = (shape.rows(), shape.cols());
        let np = shape.n_params();
        let per = m * m;
        let mut a = RMat::zeros(self.omega.len() * per, np);
        for (kw, &w) in self.omega.grid.points().iter().enumerate() {
            let b = basis_values(shape.beta, shape.order(), I * w);
            for j in 0..np {
                let (k, r, col, part) = param_slot(j, p, m);
                let mut x = zeros(p, m);
                x[(r, col)] = b[k] * part;
                for (i, v) in hermitian_coords(&self.map_at(kw, &x)).into_iter().enumerate() {
                    a[(kw * per + i, j)] = v;
                }
            }
        }
        a
    }

    /// Orthonormal basis (in parameter space) of the directions satisfying
    /// the linearized constraint at every node.
    pub fn basis(&self) -> RMat {
        linalg::real_null_space(&self.constraint_matrix(), NULL_TOL).0
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub x: YoulaParameter,
    /// The weighted least-squares problem restricted to the tangent space was
    /// numerically rank deficient; `x` is the minimum-norm solution.
    pub rank_deficient: bool,
    pub tangent_dim: usize,
}

/// `X` in the basis span minimizing `Σ_k w_k ‖X(iω_k) - D_k‖_F^2` subject to
/// the linearized constraint at every node, with the node weights of the
/// tangent subspace.
pub fn project_direction(ts: &TangentSubspace, samples: &[CMat]) -> Result<Projection> {
    project_weighted(ts, samples, &ts.omega.weights)
}

pub fn project_weighted(ts: &TangentSubspace, samples: &[CMat], weights: &[f64]) -> Result<Projection> {
    project_with_basis(ts, &ts.basis(), samples, weights)
}

pub(crate) fn project_with_basis(ts: &TangentSubspace, nb: &RMat, samples: &[CMat], weights: &[f64]) -> Result<Projection> {
    if samples.len() != ts.omega.len() || weights.len() != ts.omega.len() {
        return Err(Error::DimensionMismatch("one sample and weight per node".into()));
    }
    let shape = &ts.base;
    let zero = YoulaParameter::zeros(shape.beta(), shape.order(), shape.rows(), shape.cols())?;
    let dim = nb.ncols();
    if dim == 0 {
        return Ok(Projection { x: zero, rank_deficient: false, tangent_dim: 0 });
    }
    let a = sample_matrix(shape, &ts.omega.grid, weights);
    let rhs = stack_samples(samples, weights);
    let an = a * nb;
    let (phi, rank) = linalg::real_lstsq(&an, &rhs, LSTSQ_TOL);
    let theta = nb * phi;
    Ok(Projection { x: zero.with_params(&theta), rank_deficient: rank < dim, tangent_dim: dim })
}

/// Gauss–Newton restoration of the quadratic constraint on the nodes of
/// `omega`: repeatedly solve the linearized equation for the minimum-norm
/// coefficient correction. Returns the corrected parameter and its residual.
pub fn restore_constraint(cd: &ConstraintData, q: &YoulaParameter, omega: &Omega, tol: f64, max_steps: usize) -> Result<(YoulaParameter, f64)> {
    let mut q = q.clone();
    let mut res = constraint_residual(cd, &q, &omega.grid)?;
    for _ in 0..max_steps {
        if res <= tol {
            break;
        }
        let ts = TangentSubspace::new(cd, &q, omega.clone())?;
        let a = ts.constraint_matrix();
        let mut r = Vec::with_capacity(a.nrows());
        for &w in omega.grid.points() {
            r.extend(hermitian_coords(&cd.residual_matrix(w, &q.at(w)?)?));
        }
        let rhs = -DVector::from_vec(r);
        let (delta, _) = linalg::real_lstsq(&a, &rhs, LSTSQ_TOL);
        let trial = q.with_params(&(q.to_params() + delta));
        let tres = constraint_residual(cd, &trial, &omega.grid)?;
        if tres >= res {
            break;
        }
        q = trial;
        res = tres;
    }
    Ok((q, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eye;

    fn trivial_cd(pi_scale: f64) -> ConstraintData {
        let j = signature(1);
        ConstraintData::new(
            StateSpace::static_gain(-j.clone()),
            StateSpace::zero(2, 2),
            StateSpace::static_gain(j * c(pi_scale, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn realization_matches_direct_evaluation() {
        let coeffs: Vec<CMat> = (0..4)
            .map(|k| CMat::from_fn(2, 3, |i, j| c((k + i) as f64 * 0.3 - j as f64, (i * j) as f64 * 0.1 + k as f64)))
            .collect();
        let q = YoulaParameter::new(0.7, coeffs).unwrap();
        let ss = q.realization();
        for w in [0.0, 0.3, 2.0, -5.0] {
            assert!(fro(&(ss.at(w).unwrap() - q.at(w).unwrap())) < 1e-12);
        }
        let v = q.to_params();
        assert_eq!(q.with_params(&v), q);
    }

    #[test]
    fn fit_recovers_members_of_the_span() {
        let q = YoulaParameter::new(1.0, vec![eye(1) * c(-0.5, 0.0), eye(1) * c(-0.5, 0.0)]).unwrap();
        let fitted = YoulaParameter::fit(&q.realization(), &FrequencyGrid::verification(), 1.0, 4).unwrap();
        assert!(fro(&(&fitted.coeffs()[1] - &q.coeffs()[1])) < 1e-10);
        assert!(fro(&fitted.coeffs()[3]) < 1e-10);
    }

    #[test]
    fn trivial_constraint() {
        let grid = FrequencyGrid::verification();
        let cd = trivial_cd(1.0);
        assert!(constraint_residual(&cd, &StateSpace::identity(2), &grid).unwrap() < 1e-15);
        let r0 = constraint_residual(&cd, &StateSpace::zero(2, 2), &grid).unwrap();
        assert!((r0 - 2f64.sqrt()).abs() < 1e-15);
        let bad = trivial_cd(2.0);
        let r = constraint_residual(&bad, &StateSpace::identity(2), &grid).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hermitian_coords_preserve_norm() {
        let h = CMat::from_fn(3, 3, |i, j| if i == j { c(i as f64, 0.0) } else { c((i + j) as f64, i as f64 - j as f64) });
        let v = hermitian_coords(&h);
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - fro(&h)).abs() < 1e-12);
    }

    #[test]
    fn projection_properties_on_trivial_fixture() {
        let cd = trivial_cd(1.0);
        let q = YoulaParameter::constant(1.0, 2, eye(2)).unwrap();
        let omega = Omega::uniform(FrequencyGrid::log(0.1, 10.0, 7).unwrap());
        let ts = TangentSubspace::new(&cd, &q, omega.clone()).unwrap();
        let samples: Vec<CMat> = (0..omega.len())
            .map(|k| CMat::from_fn(2, 2, |i, j| c((k + i) as f64 - j as f64, (i * k) as f64 * 0.1)))
            .collect();
        let p = project_direction(&ts, &samples).unwrap();
        assert!(p.tangent_dim > 0);
        assert!(ts.max_violation(&p.x).unwrap() < 1e-10);
        let xs = p.x.sweep(&omega.grid, Exec::default()).unwrap();
        let p2 = project_direction(&ts, &xs).unwrap();
        assert!((p2.x.to_params() - p.x.to_params()).norm() < 1e-9);
    }

    #[test]
    fn restoration_returns_to_the_constraint() {
        let cd = trivial_cd(1.0);
        let omega = Omega::uniform(FrequencyGrid::log(0.1, 10.0, 9).unwrap());
        let mut q0 = eye(2);
        q0[(0, 1)] = c(0.05, 0.02);
        let q = YoulaParameter::constant(1.0, 1, q0).unwrap();
        let (fixed, res) = restore_constraint(&cd, &q, &omega, 1e-12, 10).unwrap();
        assert!(res < 1e-12, "{res}");
        assert!(constraint_residual(&cd, &fixed, &omega.grid).unwrap() < 1e-12);
    }
}
