//! Open quantum harmonic oscillators: SLH data, the doubled-up state-space
//! map, and the frequency-domain physical realizability test.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::FrequencyGrid;
use crate::linalg::{self, block, c, conj, eye, fro, zeros, CMat, I};
use crate::statespace::{FreqResponse, StateSpace, GENERICITY_TOL, MINIMAL_TOL};

pub const PR_TOL: f64 = 1e-7;

/// Signature matrix `J_r = diag(I_r, -I_r)`.
pub fn signature(r: usize) -> CMat {
    let mut j = eye(2 * r);
    for k in r..2 * r {
        j[(k, k)] = c(-1.0, 0.0);
    }
    j
}

/// Doubled-up matrix `Δ(R1, R2) = [[R1, R2], [conj R2, conj R1]]`.
pub fn doubled(r1: &CMat, r2: &CMat) -> CMat {
    block(&[&[r1, r2], &[&conj(r2), &conj(r1)]])
}

/// Largest entrywise deviation of `m` from the doubled-up pattern.
pub fn doubled_defect(m: &CMat) -> f64 {
    let (p, q) = (m.nrows() / 2, m.ncols() / 2);
    if !m.nrows().is_multiple_of(2) || !m.ncols().is_multiple_of(2) {
        return f64::INFINITY;
    }
    let r1 = m.view((0, 0), (p, q)).into_owned();
    let r2 = m.view((0, q), (p, q)).into_owned();
    linalg::max_abs(&(m - doubled(&r1, &r2)))
}

#[derive(Debug, Clone)]
pub struct SlhModel {
    pub s: CMat,
    pub h1: CMat,
    pub h2: CMat,
    pub l1: CMat,
    pub l2: CMat,
    pub f1: CMat,
    pub f2: CMat,
    theta: CMat,
}

impl SlhModel {
    /// Validates the data and stores `Θ = F J_n F^*` with `F = Δ(F1, F2)`.
    /// `f` defaults to `(I, 0)`.
    pub fn new(s: CMat, h1: CMat, h2: CMat, l1: CMat, l2: CMat, f: Option<(CMat, CMat)>) -> Result<Self> {
        let model = Self::new_candidate(s, h1, h2, l1, l2, f)?;
        let m = model.n_fields();
        let s = &model.s;
        let unit = fro(&(s.adjoint() * s - eye(m))).max(fro(&(s * s.adjoint() - eye(m))));
        if unit > 1e-9 * (1.0 + m as f64) {
            return Err(Error::InvalidSlh(format!("S is not unitary (residual {unit:e})")));
        }
        Ok(model)
    }

    /// Same checks as [`SlhModel::new`] except that `S` need not be unitary,
    /// for data whose realizability is still to be decided.
    pub fn new_candidate(s: CMat, h1: CMat, h2: CMat, l1: CMat, l2: CMat, f: Option<(CMat, CMat)>) -> Result<Self> {
        let n = h1.nrows();
        let m = s.nrows();
        let shape_ok = s.ncols() == m
            && h1.ncols() == n
            && h2.shape() == (n, n)
            && l1.shape() == (m, n)
            && l2.shape() == (m, n);
        if !shape_ok {
            return Err(Error::InvalidSlh(format!(
                "inconsistent shapes: S {:?}, H1 {:?}, H2 {:?}, L1 {:?}, L2 {:?}",
                s.shape(),
                h1.shape(),
                h2.shape(),
                l1.shape(),
                l2.shape()
            )));
        }
        let (f1, f2) = f.unwrap_or_else(|| (eye(n), zeros(n, n)));
        if f1.shape() != (n, n) || f2.shape() != (n, n) {
            return Err(Error::InvalidSlh("F1, F2 must be n x n".into()));
        }
        for (name, x) in [("S", &s), ("H1", &h1), ("H2", &h2), ("L1", &l1), ("L2", &l2), ("F1", &f1), ("F2", &f2)] {
            if !linalg::is_finite(x) {
                return Err(Error::InvalidSlh(format!("{name} has non-finite entries")));
            }
        }
        let tol = 1e-9;
        let scale = |x: &CMat| tol * (1.0 + fro(x));
        if fro(&(&h1 - h1.adjoint())) > scale(&h1) {
            return Err(Error::InvalidSlh("H1 is not Hermitian".into()));
        }
        if fro(&(&h2 - h2.transpose())) > scale(&h2) {
            return Err(Error::InvalidSlh("H2 is not symmetric".into()));
        }
        let fm = doubled(&f1, &f2);
        let theta = &fm * signature(n) * fm.adjoint();
        if linalg::inverse(&theta).is_none() {
            return Err(Error::InvalidSlh("CCR matrix is singular".into()));
        }
        Ok(Self { s, h1, h2, l1, l2, f1, f2, theta })
    }

    /// Single-mode cavity with decay rates `kappa` on each field channel and
    /// detuning `omega0`, `S = I`.
    pub fn cavity(kappa: &[f64], omega0: f64) -> Result<Self> {
        let m = kappa.len();
        let l1 = CMat::from_fn(m, 1, |i, _| c(kappa[i].sqrt(), 0.0));
        Self::new(eye(m), CMat::from_element(1, 1, c(omega0, 0.0)), zeros(1, 1), l1, zeros(m, 1), None)
    }

    pub fn n_modes(&self) -> usize {
        self.h1.nrows()
    }

    pub fn n_fields(&self) -> usize {
        self.s.nrows()
    }

    pub fn theta(&self) -> &CMat {
        &self.theta
    }
}

/// Doubled-up realization:
/// `A = -iΘH - ½ΘL^*J_mL`, `B = -ΘL^*J_mΔ(S,0)`, `C = L`, `D = Δ(S,0)`.
pub fn slh_to_statespace(model: &SlhModel) -> Result<StateSpace> {
    let m = model.n_fields();
    let h = doubled(&model.h1, &model.h2);
    let l = doubled(&model.l1, &model.l2);
    let jm = signature(m);
    let d = doubled(&model.s, &zeros(m, m));
    let th = &model.theta;
    let ljl = l.adjoint() * &jm * &l;
    let a = -(th * &h) * I - th * ljl * c(0.5, 0.0);
    let b = -(th * l.adjoint() * &jm * &d);
    StateSpace::new(a, b, l, d)
}

fn check_square(sys: &StateSpace, m: usize) -> Result<()> {
    if sys.n_inputs() != 2 * m || sys.n_outputs() != 2 * m {
        return Err(Error::DimensionMismatch(format!(
            "system is {}x{}, expected {}x{}",
            sys.n_outputs(),
            sys.n_inputs(),
            2 * m,
            2 * m
        )));
    }
    Ok(())
}

/// `max_ω ‖Γ(iω)^* J_m Γ(iω) - J_m‖_F` over the grid.
pub fn j_unitarity_residual(sys: &impl FreqResponse, grid: &FrequencyGrid, m: usize) -> Result<f64> {
    if sys.n_inputs() != 2 * m || sys.n_outputs() != 2 * m {
        return Err(Error::DimensionMismatch("system must be 2m x 2m".into()));
    }
    let j = signature(m);
    let r = Exec::default().try_map(grid.points(), |&w| {
        let g = sys.at(w)?;
        Ok::<f64, Error>(fro(&(g.adjoint() * &j * &g - &j)))
    })?;
    Ok(r.into_iter().fold(0.0, f64::max))
}

/// Dual form `max_ω ‖Γ(iω) J_m Γ(iω)^* - J_m‖_F`.
pub fn j_unitarity_residual_dual(sys: &impl FreqResponse, grid: &FrequencyGrid, m: usize) -> Result<f64> {
    if sys.n_inputs() != 2 * m || sys.n_outputs() != 2 * m {
        return Err(Error::DimensionMismatch("system must be 2m x 2m".into()));
    }
    let j = signature(m);
    let r = Exec::default().try_map(grid.points(), |&w| {
        let g = sys.at(w)?;
        Ok::<f64, Error>(fro(&(&g * &j * g.adjoint() - &j)))
    })?;
    Ok(r.into_iter().fold(0.0, f64::max))
}

/// Distance of `d` from the set of `Δ(S, 0)` with `S` unitary:
/// the larger of `‖D - Δ(S,0)‖_F` and `‖S^*S - I‖_F`.
pub fn feedthrough_defect(d: &CMat) -> f64 {
    if d.nrows() != d.ncols() || !d.nrows().is_multiple_of(2) {
        return f64::INFINITY;
    }
    let m = d.nrows() / 2;
    let s = d.view((0, 0), (m, m)).into_owned();
    let pattern = fro(&(d - doubled(&s, &zeros(m, m))));
    let unit = fro(&(s.adjoint() * &s - eye(m)));
    pattern.max(unit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrVerdict {
    pub j_unitary_ok: bool,
    pub feedthrough_ok: bool,
    pub spectrally_generic_ok: bool,
    pub minimal_ok: bool,
    pub max_junitarity_residual: f64,
    pub feedthrough_defect: f64,
    pub overall: bool,
}

/// Frequency-domain realizability test. Failures are reported in the
/// verdict; only evaluation errors are returned as `Err`.
pub fn check_physical_realizability(sys: &StateSpace, grid: &FrequencyGrid, m: usize, tol: f64) -> Result<PrVerdict> {
    check_square(sys, m)?;
    let residual = j_unitarity_residual(sys, grid, m)?;
    let fd = feedthrough_defect(sys.d());
    let minimal = sys.minimal_realization(MINIMAL_TOL);
    let minimal_ok = minimal.n_states() == sys.n_states();
    let generic = crate::statespace::is_spectrally_generic(minimal.a(), GENERICITY_TOL);
    let j_ok = residual <= tol;
    let f_ok = fd <= tol;
    Ok(PrVerdict {
        j_unitary_ok: j_ok,
        feedthrough_ok: f_ok,
        spectrally_generic_ok: generic,
        minimal_ok,
        max_junitarity_residual: residual,
        feedthrough_defect: fd,
        overall: j_ok && f_ok && generic && minimal_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    #[test]
    fn signature_squares_to_identity() {
        let j = signature(3);
        assert_eq!(&j * &j, eye(6));
        assert_eq!(j.adjoint(), j);
    }

    #[test]
    fn cavity_matrices() {
        let sys = slh_to_statespace(&SlhModel::cavity(&[2.0], 0.0).unwrap()).unwrap();
        let r2 = 2f64.sqrt();
        assert!(linalg::max_abs(&(sys.a() + eye(2))) < 1e-15);
        assert!(linalg::max_abs(&(sys.b() + eye(2) * c(r2, 0.0))) < 1e-15);
        assert!(linalg::max_abs(&(sys.c() - eye(2) * c(r2, 0.0))) < 1e-15);
        assert_eq!(sys.d(), &eye(2));
        let g0 = sys.at(0.0).unwrap();
        assert!(linalg::max_abs(&(g0 + eye(2))) < 1e-15);
    }

    #[test]
    fn uncoupled_and_detuned() {
        let m = SlhModel::new(eye(1), real_matrix(1, 1, &[3.0]), zeros(1, 1), zeros(1, 1), zeros(1, 1), None).unwrap();
        let sys = slh_to_statespace(&m).unwrap();
        assert!(linalg::max_abs(sys.b()) == 0.0 && linalg::max_abs(sys.c()) == 0.0);
        let det = slh_to_statespace(&SlhModel::cavity(&[0.5], 2.0).unwrap()).unwrap();
        let expect = doubled(&CMat::from_element(1, 1, c(-0.25, -2.0)), &zeros(1, 1));
        assert!(linalg::max_abs(&(det.a() - expect)) < 1e-15);
    }

    #[test]
    fn residual_of_scaled_identity() {
        let sys = StateSpace::static_gain(eye(2) * c(0.5, 0.0));
        let r = j_unitarity_residual(&sys, &FrequencyGrid::verification(), 1).unwrap();
        assert!((r - 0.75 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn verdicts() {
        let grid = FrequencyGrid::pr_default();
        let sys = slh_to_statespace(&SlhModel::cavity(&[2.0], 0.0).unwrap()).unwrap();
        assert!(check_physical_realizability(&sys, &grid, 1, PR_TOL).unwrap().overall);

        let (a, b, cc, _) = sys.clone().into_parts();
        let scaled = StateSpace::new(a, b, cc, eye(2) * c(1.1, 0.0)).unwrap();
        let v = check_physical_realizability(&scaled, &grid, 1, PR_TOL).unwrap();
        assert!(!v.feedthrough_ok && !v.j_unitary_ok && !v.overall);

        let mirror = StateSpace::new(
            real_matrix(2, 2, &[-1.0, 0.0, 0.0, 1.0]),
            eye(2),
            eye(2),
            eye(2),
        )
        .unwrap();
        let v = check_physical_realizability(&mirror, &grid, 1, PR_TOL).unwrap();
        assert!(!v.spectrally_generic_ok && !v.overall);
    }

    #[test]
    fn rejects_non_unitary_scattering() {
        let err = SlhModel::new(eye(1) * c(1.1, 0.0), zeros(1, 1), zeros(1, 1), zeros(1, 1), zeros(1, 1), None);
        assert!(matches!(err, Err(Error::InvalidSlh(_))));
    }
}
