//! Complex state-space models `Γ(s) = C (sI - A)^{-1} B + D` and the
//! algebra used to assemble factorizations and closed loops from them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::FrequencyGrid;
use crate::linalg::{self, c, block, block_diag, eye, fro, hcat, lu_solve, vcat, zeros, CMat, I};

/// Anything that can be evaluated pointwise in the complex plane.
pub trait FreqResponse: Sync {
    fn n_outputs(&self) -> usize;
    fn n_inputs(&self) -> usize;
    fn eval(&self, s: Complex64) -> Result<CMat>;

    fn at(&self, omega: f64) -> Result<CMat> {
        self.eval(I * omega)
    }

    fn sweep(&self, grid: &FrequencyGrid, exec: Exec) -> Result<Vec<CMat>> {
        exec.try_map(grid.points(), |&w| self.at(w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
}

impl StateSpace {
    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, C is {}x{} for {n} states",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if !linalg::is_finite(m) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `Γ(s) = d`.
    pub fn static_gain(d: CMat) -> Self {
        let (p, m) = d.shape();
        Self { a: zeros(0, 0), b: zeros(0, m), c: zeros(p, 0), d }
    }

    pub fn identity(n: usize) -> Self {
        Self::static_gain(eye(n))
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::static_gain(zeros(outputs, inputs))
    }

    /// Scalar transfer function `k / (s + a)` repeated on an `n x n` diagonal.
    pub fn first_order_lag(n: usize, gain: f64, pole: f64) -> Self {
        Self {
            a: eye(n) * c(-pole, 0.0),
            b: eye(n) * c(gain, 0.0),
            c: eye(n),
            d: zeros(n, n),
        }
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }
    pub fn b(&self) -> &CMat {
        &self.b
    }
    pub fn c(&self) -> &CMat {
        &self.c
    }
    pub fn d(&self) -> &CMat {
        &self.d
    }

    pub fn into_parts(self) -> (CMat, CMat, CMat, CMat) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_static(&self) -> bool {
        self.n_states() == 0
    }

    /// Frequency response at `s = iω`, via an LU solve of `(iωI - A) X = B`.
    pub fn freq_response(&self, omega: f64) -> Result<CMat> {
        self.eval(I * omega)
    }

    /// Conjugate system `Γ~(s) = Γ(-s̄)^*`, realized as `(-A^*, -C^*, B^*, D^*)`.
    pub fn conjugate(&self) -> Self {
        Self {
            a: -self.a.adjoint(),
            b: -self.c.adjoint(),
            c: self.b.adjoint(),
            d: self.d.adjoint(),
        }
    }

    /// Cascade `self · other`: the signal passes through `other` first.
    pub fn series(&self, other: &Self) -> Result<Self> {
        if self.n_inputs() != other.n_outputs() {
            return Err(Error::DimensionMismatch(format!(
                "series: {} inputs vs {} outputs",
                self.n_inputs(),
                other.n_outputs()
            )));
        }
        let z = zeros(other.n_states(), self.n_states());
        let a = block(&[&[&self.a, &(&self.b * &other.c)], &[&z, &other.a]]);
        let b = vcat(&(&self.b * &other.d), &other.b);
        let cc = hcat(&self.c, &(&self.d * &other.c));
        Self::new(a, b, cc, &self.d * &other.d)
    }

    /// Product of a chain `g0 · g1 · ... · gk`.
    pub fn chain(parts: &[&Self]) -> Result<Self> {
        let mut acc = parts[parts.len() - 1].clone();
        for p in parts[..parts.len() - 1].iter().rev() {
            acc = p.series(&acc)?;
        }
        Ok(acc)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n_inputs() != other.n_inputs() || self.n_outputs() != other.n_outputs() {
            return Err(Error::DimensionMismatch("add: shapes differ".into()));
        }
        Self::new(
            block_diag(&self.a, &other.a),
            vcat(&self.b, &other.b),
            hcat(&self.c, &other.c),
            &self.d + &other.d,
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { a: self.a.clone(), b: self.b.clone(), c: -&self.c, d: -&self.d }
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self { a: self.a.clone(), b: self.b.clone(), c: &self.c * k, d: &self.d * k }
    }

    /// `m · Γ` for a constant matrix `m`.
    pub fn premul(&self, m: &CMat) -> Result<Self> {
        Self::static_gain(m.clone()).series(self)
    }

    /// `Γ · m` for a constant matrix `m`.
    pub fn postmul(&self, m: &CMat) -> Result<Self> {
        self.series(&Self::static_gain(m.clone()))
    }

    /// `[Γ1 Γ2]`
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.n_outputs() != other.n_outputs() {
            return Err(Error::DimensionMismatch("hstack: output counts differ".into()));
        }
        Self::new(
            block_diag(&self.a, &other.a),
            block_diag(&self.b, &other.b),
            hcat(&self.c, &other.c),
            hcat(&self.d, &other.d),
        )
    }

    /// `[Γ1; Γ2]`
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.n_inputs() != other.n_inputs() {
            return Err(Error::DimensionMismatch("vstack: input counts differ".into()));
        }
        Self::new(
            block_diag(&self.a, &other.a),
            vcat(&self.b, &other.b),
            block_diag(&self.c, &other.c),
            vcat(&self.d, &other.d),
        )
    }

    /// `diag(Γ1, Γ2)`
    pub fn block_diag(&self, other: &Self) -> Self {
        Self {
            a: block_diag(&self.a, &other.a),
            b: block_diag(&self.b, &other.b),
            c: block_diag(&self.c, &other.c),
            d: block_diag(&self.d, &other.d),
        }
    }

    /// Rational inverse; requires an invertible feedthrough.
    pub fn inverse(&self) -> Result<Self> {
        if self.n_inputs() != self.n_outputs() {
            return Err(Error::DimensionMismatch("inverse of a non-square system".into()));
        }
        let di = linalg::inverse(&self.d).ok_or(Error::FeedthroughSingular)?;
        let bdi = &self.b * &di;
        Self::new(&self.a - &bdi * &self.c, bdi, -(&di * &self.c), di)
    }

    /// Sub-block with the given output rows and input columns.
    pub fn select(&self, outputs: std::ops::Range<usize>, inputs: std::ops::Range<usize>) -> Self {
        let n = self.n_states();
        Self {
            a: self.a.clone(),
            b: self.b.view((0, inputs.start), (n, inputs.len())).into_owned(),
            c: self.c.view((outputs.start, 0), (outputs.len(), n)).into_owned(),
            d: self.d.view((outputs.start, inputs.start), (outputs.len(), inputs.len())).into_owned(),
        }
    }

    /// Reorder channels: output `i` of the result is output `out_perm[i]` of
    /// `self`, input `j` of the result is input `in_perm[j]` of `self`.
    pub fn permute(&self, out_perm: &[usize], in_perm: &[usize]) -> Result<Self> {
        if out_perm.len() != self.n_outputs() || in_perm.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let n = self.n_states();
        let b = CMat::from_fn(n, in_perm.len(), |i, j| self.b[(i, in_perm[j])]);
        let cc = CMat::from_fn(out_perm.len(), n, |i, j| self.c[(out_perm[i], j)]);
        let d = CMat::from_fn(out_perm.len(), in_perm.len(), |i, j| self.d[(out_perm[i], in_perm[j])]);
        Self::new(self.a.clone(), b, cc, d)
    }

    /// Similarity transform by a matrix with orthonormal columns `t`
    /// (`x = t x_r`), used to restrict to an invariant subspace.
    fn restrict(&self, t: &CMat) -> Self {
        Self {
            a: t.adjoint() * &self.a * t,
            b: t.adjoint() * &self.b,
            c: &self.c * t,
            d: self.d.clone(),
        }
    }

    /// Remove uncontrollable and unobservable states (orthogonal Krylov
    /// staircase with singular-value rank decisions at `tol` times the
    /// largest singular value of `[A B]` or `[A; C]`).
    pub fn minimal_realization(&self, tol: f64) -> Self {
        let tol = if tol > 0.0 { tol } else { 1e-9 };
        let n = self.n_states();
        if n == 0 {
            return self.clone();
        }
        let qc = controllable_basis(&self.a, &self.b, tol);
        let ctrb = if qc.ncols() < n { self.restrict(&qc) } else { self.clone() };
        if ctrb.n_states() == 0 {
            return Self::static_gain(self.d.clone());
        }
        let qo = controllable_basis(&ctrb.a.adjoint(), &ctrb.c.adjoint(), tol);
        if qo.ncols() < ctrb.n_states() {
            if qo.ncols() == 0 {
                return Self::static_gain(self.d.clone());
            }
            ctrb.restrict(&qo)
        } else {
            ctrb
        }
    }

    pub fn is_strictly_proper(&self, tol: f64) -> bool {
        linalg::max_abs(&self.d) <= tol
    }

    /// Largest pointwise Frobenius distance between two responses on a grid.
    pub fn max_distance(&self, other: &impl FreqResponse, grid: &FrequencyGrid, exec: Exec) -> Result<f64> {
        let d = exec.try_map(grid.points(), |&w| Ok::<f64, Error>(fro(&(self.at(w)? - other.at(w)?))))?;
        Ok(d.into_iter().fold(0.0, f64::max))
    }
}

impl FreqResponse for StateSpace {
    fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    fn eval(&self, s: Complex64) -> Result<CMat> {
        let n = self.n_states();
        if n == 0 {
            return Ok(self.d.clone());
        }
        let res = eye(n) * s - &self.a;
        let x = lu_solve(&res, &self.b).ok_or(Error::SingularResolvent(s))?;
        Ok(&self.c * x + &self.d)
    }
}

/// Orthonormal basis of the controllable subspace of `(a, b)`.
fn controllable_basis(a: &CMat, b: &CMat, tol: f64) -> CMat {
    let n = a.nrows();
    let scale = linalg::sigma_max(a).max(linalg::sigma_max(b));
    if scale == 0.0 {
        return zeros(n, 0);
    }
    let thresh = tol * scale;
    let mut q = linalg::orth(b, thresh);
    let mut newest = q.clone();
    while newest.ncols() > 0 && q.ncols() < n {
        let mut w = a * &newest;
        for _ in 0..2 {
            let proj = q.adjoint() * &w;
            w -= &q * proj;
        }
        newest = linalg::orth(&w, thresh);
        if newest.ncols() > 0 {
            q = hcat(&q, &newest);
        }
    }
    q
}

/// Lower LFT `P11 + P12 K (I - P22 K)^{-1} P21` where `plant` has inputs
/// `[r; u]` of widths `(n_r, n_u)` and outputs `[z; y]` of widths
/// `(n_z, n_y)`; `ctrl` maps `y` to `u`.
pub fn lft_lower(plant: &StateSpace, ctrl: &StateSpace, n_r: usize, n_z: usize) -> Result<StateSpace> {
    let n_u = plant.n_inputs().checked_sub(n_r).ok_or_else(|| Error::DimensionMismatch("n_r".into()))?;
    let n_y = plant.n_outputs().checked_sub(n_z).ok_or_else(|| Error::DimensionMismatch("n_z".into()))?;
    if ctrl.n_inputs() != n_y || ctrl.n_outputs() != n_u {
        return Err(Error::DimensionMismatch(format!(
            "controller is {}x{}, loop needs {}x{}",
            ctrl.n_outputs(),
            ctrl.n_inputs(),
            n_u,
            n_y
        )));
    }
    let np = plant.n_states();
    let nk = ctrl.n_states();
    let b1 = plant.b.columns(0, n_r).into_owned();
    let b2 = plant.b.columns(n_r, n_u).into_owned();
    let c1 = plant.c.rows(0, n_z).into_owned();
    let c2 = plant.c.rows(n_z, n_y).into_owned();
    let d11 = plant.d.view((0, 0), (n_z, n_r)).into_owned();
    let d12 = plant.d.view((0, n_r), (n_z, n_u)).into_owned();
    let d21 = plant.d.view((n_z, 0), (n_y, n_r)).into_owned();
    let d22 = plant.d.view((n_z, n_r), (n_y, n_u)).into_owned();
    let (ak, bk, ck, dk) = (&ctrl.a, &ctrl.b, &ctrl.c, &ctrl.d);

    let r = linalg::inverse(&(eye(n_y) - &d22 * dk)).ok_or(Error::IllPosedInterconnection)?;
    // y = yx * x + yr * r,  u = ux * x + ur * r  with x = [x_plant; x_ctrl]
    let yx = &r * hcat(&c2, &(&d22 * ck));
    let yr = &r * &d21;
    let ux = hcat(&zeros(n_u, np), ck) + dk * &yx;
    let ur = dk * &yr;

    let a_open = block_diag(&plant.a, ak);
    let a = a_open + vcat(&(&b2 * &ux), &(bk * &yx));
    let b = vcat(&(&b1 + &b2 * &ur), &(bk * &yr));
    let cc = hcat(&c1, &zeros(n_z, nk)) + &d12 * &ux;
    let d = &d11 + &d12 * &ur;
    StateSpace::new(a, b, cc, d)
}

/// True iff every eigenvalue has real part `< -margin`.
pub fn is_hurwitz(a: &CMat, margin: f64) -> bool {
    match linalg::eigenvalues(a) {
        Ok(ev) => ev.iter().all(|z| z.re < -margin),
        Err(_) => false,
    }
}

/// No eigenvalue pair `λ, ν` with `|λ + conj(ν)| <= tol · ρ(A)`.
/// An empty spectrum is generic.
pub fn is_spectrally_generic(a: &CMat, tol: f64) -> bool {
    let ev = match linalg::eigenvalues(a) {
        Ok(ev) => ev,
        Err(_) => return false,
    };
    if ev.is_empty() {
        return true;
    }
    let rho = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let thresh = tol * rho.max(f64::MIN_POSITIVE);
    let mut min_gap = f64::INFINITY;
    for l in &ev {
        for v in &ev {
            min_gap = min_gap.min((l + v.conj()).norm());
        }
    }
    min_gap > thresh
}

pub const HURWITZ_MARGIN: f64 = 1e-9;
pub const GENERICITY_TOL: f64 = 1e-8;
pub const MINIMAL_TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    fn lag() -> StateSpace {
        StateSpace::first_order_lag(1, 1.0, 1.0)
    }

    /// (s - 1)/(s + 1)
    fn allpass() -> StateSpace {
        StateSpace::new(
            real_matrix(1, 1, &[-1.0]),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[-2.0]),
            real_matrix(1, 1, &[1.0]),
        )
        .unwrap()
    }

    fn scalar(m: &CMat) -> Complex64 {
        m[(0, 0)]
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(StateSpace::new(zeros(2, 2), zeros(1, 1), zeros(1, 2), zeros(1, 1)).is_err());
        let mut a = zeros(1, 1);
        a[(0, 0)] = c(f64::NAN, 0.0);
        assert!(StateSpace::new(a, zeros(1, 1), zeros(1, 1), zeros(1, 1)).is_err());
    }

    #[test]
    fn lag_at_dc() {
        assert!((scalar(&lag().freq_response(0.0).unwrap()) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn zero_input_coupling_gives_feedthrough() {
        let d = real_matrix(1, 2, &[0.3, -2.0]);
        let s = StateSpace::new(real_matrix(1, 1, &[-3.0]), zeros(1, 2), real_matrix(1, 1, &[5.0]), d.clone()).unwrap();
        for w in [0.0, 1.0, 17.0] {
            assert_eq!(s.freq_response(w).unwrap(), d);
        }
    }

    #[test]
    fn singular_resolvent() {
        let s = StateSpace::new(real_matrix(1, 1, &[0.0]), real_matrix(1, 1, &[1.0]), real_matrix(1, 1, &[1.0]), zeros(1, 1)).unwrap();
        assert!(matches!(s.freq_response(0.0), Err(Error::SingularResolvent(_))));
    }

    #[test]
    fn conjugate_of_static_and_allpass() {
        let d = CMat::from_row_slice(1, 2, &[c(1.0, 2.0), c(0.0, -1.0)]);
        let s = StateSpace::static_gain(d.clone());
        assert_eq!(s.conjugate().freq_response(3.0).unwrap(), d.adjoint());
        let g = allpass();
        let gg = g.conjugate().series(&g).unwrap();
        for w in [0.0, 0.5, 3.0, 100.0] {
            assert!((scalar(&gg.freq_response(w).unwrap()) - 1.0).norm() < 1e-12);
        }
        let twice = g.conjugate().conjugate();
        for w in [0.1, 2.0] {
            assert!(fro(&(twice.freq_response(w).unwrap() - g.freq_response(w).unwrap())) < 1e-14);
        }
    }

    #[test]
    fn series_and_sum_identities() {
        let g = allpass();
        let id = StateSpace::identity(1);
        let grid = FrequencyGrid::log(1e-2, 1e2, 11).unwrap();
        assert!(g.series(&id).unwrap().max_distance(&g, &grid, Exec::Sequential).unwrap() < 1e-14);
        let z = g.add(&g.neg()).unwrap();
        assert!(z.max_distance(&StateSpace::zero(1, 1), &grid, Exec::Sequential).unwrap() < 1e-14);
        let l2 = lag().series(&lag()).unwrap();
        assert!((scalar(&l2.freq_response(0.0).unwrap()) - 1.0).norm() < 1e-14);
        assert!(matches!(lag().series(&StateSpace::zero(2, 1)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn lft_with_zero_controller_is_p11() {
        let plant = StateSpace::new(
            real_matrix(1, 1, &[-2.0]),
            real_matrix(1, 2, &[1.0, 0.5]),
            real_matrix(2, 1, &[1.0, -1.0]),
            real_matrix(2, 2, &[0.1, 0.2, 0.3, 0.4]),
        )
        .unwrap();
        let cl = lft_lower(&plant, &StateSpace::zero(1, 1), 1, 1).unwrap();
        let p11 = plant.select(0..1, 0..1);
        assert!(cl.max_distance(&p11, &FrequencyGrid::verification(), Exec::Sequential).unwrap() < 1e-13);
    }

    #[test]
    fn lft_static_open_loop_sum() {
        // P = [[P11, I], [I, 0]] gives P11 + K
        let p11 = lag();
        let plant = StateSpace::new(
            p11.a().clone(),
            hcat(p11.b(), &zeros(1, 1)),
            vcat(p11.c(), &zeros(1, 1)),
            real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        )
        .unwrap();
        let k = allpass();
        let cl = lft_lower(&plant, &k, 1, 1).unwrap();
        let sum = p11.add(&k).unwrap();
        assert!(cl.max_distance(&sum, &FrequencyGrid::verification(), Exec::Sequential).unwrap() < 1e-12);
    }

    #[test]
    fn lft_ill_posed() {
        let plant = StateSpace::static_gain(real_matrix(2, 2, &[0.0, 1.0, 1.0, 1.0]));
        let k = StateSpace::static_gain(real_matrix(1, 1, &[1.0]));
        assert!(matches!(lft_lower(&plant, &k, 1, 1), Err(Error::IllPosedInterconnection)));
    }

    #[test]
    fn minimal_realization_removes_unreachable_mode() {
        let s = StateSpace::new(
            real_matrix(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            real_matrix(2, 1, &[1.0, 0.0]),
            real_matrix(1, 2, &[1.0, 1.0]),
            zeros(1, 1),
        )
        .unwrap();
        let m = s.minimal_realization(MINIMAL_TOL);
        assert_eq!(m.n_states(), 1);
        assert!(m.max_distance(&lag(), &FrequencyGrid::verification(), Exec::Sequential).unwrap() < 1e-12);
        assert_eq!(allpass().minimal_realization(MINIMAL_TOL).n_states(), 1);
    }

    #[test]
    fn minimal_realization_cancels_allpass_and_inverse() {
        let g = allpass();
        let gi = g.inverse().unwrap();
        let prod = g.series(&gi).unwrap();
        assert_eq!(prod.n_states(), 2);
        let m = prod.minimal_realization(MINIMAL_TOL);
        assert_eq!(m.n_states(), 0);
        assert!((scalar(m.d()) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn hurwitz_and_genericity() {
        assert!(is_hurwitz(&real_matrix(1, 1, &[-1.0]), HURWITZ_MARGIN));
        assert!(!is_hurwitz(&real_matrix(1, 1, &[1.0]), HURWITZ_MARGIN));
        assert!(!is_hurwitz(&real_matrix(2, 2, &[0.0, 1.0, -1.0, 0.0]), HURWITZ_MARGIN));
        assert!(is_spectrally_generic(&real_matrix(2, 2, &[-1.0, 0.0, 0.0, -2.0]), GENERICITY_TOL));
        assert!(!is_spectrally_generic(&real_matrix(2, 2, &[-1.0, 0.0, 0.0, 1.0]), GENERICITY_TOL));
        let mut ai = zeros(1, 1);
        ai[(0, 0)] = I;
        assert!(!is_spectrally_generic(&ai, GENERICITY_TOL));
        assert!(is_spectrally_generic(&zeros(0, 0), GENERICITY_TOL));
    }
}
