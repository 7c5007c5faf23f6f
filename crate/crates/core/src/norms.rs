//! H2 and H∞ norms of stable state-space models.

use crate::error::{Error, Result};
use crate::linalg::{self, c, eye, CMat};
use crate::statespace::{FreqResponse, StateSpace, HURWITZ_MARGIN};

pub const HINF_REL_TOL: f64 = 1e-6;

fn feedthrough_tol(sys: &StateSpace) -> f64 {
    1e-13 * (1.0 + linalg::max_abs(sys.c()) * linalg::max_abs(sys.b()))
}

fn check_stable(sys: &StateSpace) -> Result<()> {
    let abscissa = linalg::spectral_abscissa(sys.a())?;
    if abscissa >= -HURWITZ_MARGIN {
        return Err(Error::NotStable(abscissa));
    }
    Ok(())
}

/// `‖Γ‖²₂ = Tr(C P C^*)` with `A P + P A^* + B B^* = 0`.
pub fn h2_norm_sq(sys: &StateSpace) -> Result<f64> {
    let dmax = linalg::max_abs(sys.d());
    if dmax > feedthrough_tol(sys) {
        return Err(Error::NotStrictlyProper(dmax));
    }
    if sys.is_static() {
        return Ok(0.0);
    }
    check_stable(sys)?;
    let q = sys.b() * sys.b().adjoint();
    let p = linalg::solve_lyapunov(sys.a(), &q)?;
    Ok((sys.c() * p * sys.c().adjoint()).trace().re.max(0.0))
}

/// H2 inner product `⟨Γ1, Γ2⟩ = (1/2π) ∫ Tr(Γ1(iω)^* Γ2(iω)) dω` of two
/// stable strictly proper systems, via the Sylvester equation
/// `A1^* Y + Y A2 + C1^* C2 = 0`.
pub fn h2_inner(g1: &StateSpace, g2: &StateSpace) -> Result<num_complex::Complex64> {
    if g1.n_inputs() != g2.n_inputs() || g1.n_outputs() != g2.n_outputs() {
        return Err(Error::DimensionMismatch("h2_inner: shapes differ".into()));
    }
    for g in [g1, g2] {
        let dmax = linalg::max_abs(g.d());
        if dmax > feedthrough_tol(g) {
            return Err(Error::NotStrictlyProper(dmax));
        }
        if !g.is_static() {
            check_stable(g)?;
        }
    }
    if g1.is_static() || g2.is_static() {
        return Ok(linalg::ZERO);
    }
    let rhs = -(g1.c().adjoint() * g2.c());
    let y = linalg::solve_sylvester(&g1.a().adjoint(), g2.a(), &rhs)?;
    Ok((g1.b().adjoint() * y * g2.b()).trace())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfNorm {
    pub norm: f64,
    pub peak_omega: f64,
}

/// `sup_ω σ_max(Γ(iω))` by bisection on the level `γ`, using the
/// imaginary-axis eigenvalues of the associated Hamiltonian matrix. Every
/// detected level crossing is verified by evaluating the response between
/// crossings, which also lifts the lower bound.
pub fn hinf_norm(sys: &StateSpace, rel_tol: f64) -> Result<HinfNorm> {
    let rel_tol = if rel_tol > 0.0 { rel_tol } else { HINF_REL_TOL };
    let dnorm = linalg::sigma_max(sys.d());
    if sys.is_static() {
        return Ok(HinfNorm { norm: dnorm, peak_omega: 0.0 });
    }
    check_stable(sys)?;

    let sigma_at = |w: f64| -> Result<f64> { Ok(linalg::sigma_max(&sys.at(w)?)) };

    // warm start on a grid built around the pole locations
    let poles = linalg::eigenvalues(sys.a())?;
    let mut cands: Vec<f64> = vec![0.0];
    for p in &poles {
        cands.push(p.im);
        cands.push(p.norm());
        cands.push(-p.norm());
    }
    let scale = poles.iter().map(|p| p.norm()).fold(1e-12, f64::max);
    let lo = poles.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min).max(1e-12);
    let n_grid = 200;
    let (a, b) = ((lo * 1e-3).log10(), (scale * 1e3).log10());
    for k in 0..n_grid {
        let w = 10f64.powf(a + (b - a) * k as f64 / (n_grid - 1) as f64);
        cands.push(w);
        cands.push(-w);
    }
    cands.sort_by(|x, y| x.total_cmp(y));
    cands.dedup();
    let samples: Vec<f64> = cands.iter().map(|&w| sigma_at(w)).collect::<Result<_>>()?;
    let mut lb = dnorm;
    let mut peak = f64::INFINITY;
    for (&w, &s) in cands.iter().zip(&samples) {
        if s > lb {
            lb = s;
            peak = w;
        }
    }
    if lb == 0.0 {
        return Ok(HinfNorm { norm: 0.0, peak_omega: 0.0 });
    }

    let mut ub = 2.0 * lb;
    let mut found = 0;
    while let Some((s, w)) = level_crossing(sys, ub, &sigma_at)? {
        lb = lb.max(s);
        peak = w;
        ub = 2.0 * lb;
        found += 1;
        if found > 60 {
            return Err(Error::NotStable(0.0));
        }
    }
    for _ in 0..200 {
        if ub - lb <= rel_tol * lb {
            break;
        }
        let gamma = 0.5 * (lb + ub);
        match level_crossing(sys, gamma, &sigma_at)? {
            Some((s, w)) => {
                if s > lb {
                    lb = s;
                    peak = w;
                }
                lb = lb.max(gamma);
            }
            None => ub = gamma,
        }
    }
    // polish the peak so the value is the local maximum itself, not a
    // point within the bisection tolerance below it
    let mut brackets = Vec::new();
    if peak.is_finite() {
        let h = 1e-2 * peak.abs().max(1e-3 * scale);
        brackets.push((peak - h, peak + h));
    }
    // the Hamiltonian test can miss a crossing when an imaginary eigenvalue
    // is perturbed off the axis, so also refine the best sampled local maxima
    let mut local: Vec<usize> = (1..cands.len() - 1).filter(|&i| samples[i] >= samples[i - 1] && samples[i] >= samples[i + 1]).collect();
    local.sort_by(|&i, &j| samples[j].total_cmp(&samples[i]));
    brackets.extend(local.iter().take(5).map(|&i| (cands[i - 1], cands[i + 1])));
    for (a, b) in brackets {
        let (w, s) = golden_max(&sigma_at, a, b)?;
        if s > lb {
            lb = s;
            peak = w;
        }
    }
    Ok(HinfNorm { norm: lb, peak_omega: peak })
}

fn golden_max(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..80 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Look for frequencies where `σ_max(Γ(iω)) > γ`. Returns the largest
/// verified value and its frequency.
fn level_crossing(
    sys: &StateSpace,
    gamma: f64,
    sigma_at: &impl Fn(f64) -> Result<f64>,
) -> Result<Option<(f64, f64)>> {
    let (a, b, cc, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let (p, m) = (d.nrows(), d.ncols());
    let g2 = c(gamma * gamma, 0.0);
    let r = eye(m) * g2 - d.adjoint() * d;
    let s = eye(p) * g2 - d * d.adjoint();
    let (ri, si) = match (linalg::inverse(&r), linalg::inverse(&s)) {
        (Some(ri), Some(si)) => (ri, si),
        _ => return Ok(None),
    };
    let a11 = a + b * &ri * d.adjoint() * cc;
    let h12 = b * &ri * b.adjoint() * c(gamma, 0.0);
    let h21 = -(cc.adjoint() * si * cc) * c(gamma, 0.0);
    let h22 = -a11.adjoint();
    let h: CMat = linalg::block(&[&[&a11, &h12], &[&h21, &h22]]);
    let ev = linalg::eigenvalues(&h)?;
    let mut ws: Vec<f64> = ev
        .iter()
        .filter(|z| z.re.abs() <= 1e-6 * z.norm().max(1.0))
        .map(|z| z.im)
        .collect();
    if ws.is_empty() {
        return Ok(None);
    }
    ws.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut probes = ws.clone();
    for pair in ws.windows(2) {
        probes.push(0.5 * (pair[0] + pair[1]));
    }
    let mut best: Option<(f64, f64)> = None;
    for w in probes {
        let v = sigma_at(w)?;
        if v > gamma && best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, w));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    fn tf1(num: f64, pole: f64, d: f64) -> StateSpace {
        StateSpace::new(
            real_matrix(1, 1, &[-pole]),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[num]),
            real_matrix(1, 1, &[d]),
        )
        .unwrap()
    }

    #[test]
    fn h2_of_first_order_lags() {
        assert!((h2_norm_sq(&tf1(1.0, 1.0, 0.0)).unwrap() - 0.5).abs() < 1e-14);
        let (cc, a) = (3.0, 0.7);
        assert!((h2_norm_sq(&tf1(cc, a, 0.0)).unwrap() - cc * cc / (2.0 * a)).abs() < 1e-12);
    }

    #[test]
    fn h2_errors() {
        assert!(matches!(h2_norm_sq(&tf1(1.0, 1.0, 0.5)), Err(Error::NotStrictlyProper(_))));
        assert!(matches!(h2_norm_sq(&tf1(1.0, -1.0, 0.0)), Err(Error::NotStable(_))));
    }

    #[test]
    fn h2_inner_matches_norm() {
        let g = tf1(2.0, 0.5, 0.0);
        let ip = h2_inner(&g, &g).unwrap();
        assert!((ip.re - h2_norm_sq(&g).unwrap()).abs() < 1e-12 && ip.im.abs() < 1e-12);
        // <1/(s+1), 1/(s+2)> = 1/3
        let ip = h2_inner(&tf1(1.0, 1.0, 0.0), &tf1(1.0, 2.0, 0.0)).unwrap();
        assert!((ip.re - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn hinf_simple_cases() {
        let allpass = tf1(-2.0, 1.0, 1.0);
        assert!((hinf_norm(&allpass, 1e-6).unwrap().norm - 1.0).abs() < 1e-6);
        let lag = hinf_norm(&tf1(1.0, 1.0, 0.0), 1e-6).unwrap();
        assert!((lag.norm - 1.0).abs() < 1e-6);
        assert!(lag.peak_omega.abs() < 1e-2);
        assert!((hinf_norm(&tf1(2.0, 1.0, 0.0), 1e-6).unwrap().norm - 2.0).abs() < 2e-6);
        assert!(matches!(hinf_norm(&tf1(1.0, -1.0, 0.0), 1e-6), Err(Error::NotStable(_))));
    }

    #[test]
    fn hinf_resonant_peak() {
        // lightly damped complex pole: 1/(s + 0.01 - 5i), peak 100 at ω = 5
        let mut a = real_matrix(1, 1, &[-0.01]);
        a[(0, 0)].im = 5.0;
        let sys = StateSpace::new(a, real_matrix(1, 1, &[1.0]), real_matrix(1, 1, &[1.0]), real_matrix(1, 1, &[0.0])).unwrap();
        let h = hinf_norm(&sys, 1e-8).unwrap();
        assert!((h.norm - 100.0).abs() < 1e-5, "{h:?}");
        assert!((h.peak_omega - 5.0).abs() < 1e-3);
    }
}
