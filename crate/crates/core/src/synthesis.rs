//! Weighted H2 synthesis over the Youla parameter: cost, gradient and
//! projected gradient descent.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{FrequencyGrid, Quadrature};
use crate::linalg::{self, c, CMat};
use crate::norms::h2_norm_sq;
use crate::stabilization::{close_loop, closed_loop_triple, controller_from_parameter, ClosedLoopTriple, CoprimeFactorization, ModifiedPlant};
use crate::statespace::{is_hurwitz, FreqResponse, StateSpace, HURWITZ_MARGIN};
use crate::youla::{
    constraint_residual, membership_qhat, project_with_basis, restore_constraint, ConstraintData, Omega, QhatVerdict,
    TangentSubspace, YoulaParameter,
};

/// `𝑻0 = W_out T0 W_in`, `𝑻1 = W_out T1`, `𝑻2 = T2 W_in`.
#[derive(Debug, Clone)]
pub struct WeightedTriple {
    pub t0: StateSpace,
    pub t1: StateSpace,
    pub t2: StateSpace,
}

impl WeightedTriple {
    pub fn new(triple: &ClosedLoopTriple, w_in: &StateSpace, w_out: &StateSpace) -> Result<Self> {
        Ok(Self {
            t0: StateSpace::chain(&[w_out, &triple.t0, w_in])?,
            t1: w_out.series(&triple.t1)?,
            t2: triple.t2.series(w_in)?,
        })
    }

    /// `𝑻0 + 𝑻1 Q 𝑻2`.
    pub fn closed_loop(&self, q: &StateSpace) -> Result<StateSpace> {
        self.t0.add(&StateSpace::chain(&[&self.t1, q, &self.t2])?)
    }

    pub fn closed_loop_at(&self, w: f64, q: &CMat) -> Result<CMat> {
        Ok(self.t0.at(w)? + self.t1.at(w)? * q * self.t2.at(w)?)
    }

    /// Magnitude of the pole cloud, used to scale quadrature rules.
    pub fn poles(&self) -> Result<Vec<num_complex::Complex64>> {
        let mut poles = Vec::new();
        for sys in [&self.t0, &self.t1, &self.t2] {
            poles.extend(linalg::eigenvalues(sys.a())?);
        }
        Ok(poles)
    }

    pub fn frequency_scale(&self) -> Result<f64> {
        let mut mags: Vec<f64> = self.poles()?.into_iter().map(|z| z.norm()).filter(|m| *m > 0.0).collect();
        if mags.is_empty() {
            return Ok(1.0);
        }
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(mags[mags.len() / 2].clamp(1e-3, 1e3))
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub plant: Option<(ModifiedPlant, CoprimeFactorization)>,
    pub cd: ConstraintData,
    pub weighted: WeightedTriple,
    /// `𝑻̂0 = 𝑻1~ 𝑻0 𝑻2~`, `𝑻̂1 = 𝑻1~ 𝑻1`, `𝑻̂2 = 𝑻2 𝑻2~`.
    pub hat_t0: StateSpace,
    pub hat_t1: StateSpace,
    pub hat_t2: StateSpace,
    /// Nodes and weights used for gradients and projections.
    pub omega: Omega,
    /// Rule for frequency-domain inner products.
    pub quadrature: Quadrature,
}

fn feedthrough_scale(sys: &StateSpace) -> f64 {
    1e-12 * (1.0 + linalg::max_abs(sys.b()) * linalg::max_abs(sys.c()))
}

/// Builds the weighted operators and checks that every closed loop
/// `𝑻0 + 𝑻1 Q 𝑻2` with `Q` proper is strictly proper.
pub fn assemble_problem(
    mp: &ModifiedPlant,
    cf: &CoprimeFactorization,
    cd: &ConstraintData,
    w_in: &StateSpace,
    w_out: &StateSpace,
    omega: Option<Omega>,
) -> Result<SynthesisProblem> {
    for (name, w) in [("W_in", w_in), ("W_out", w_out)] {
        if !w.is_static() && !is_hurwitz(w.a(), HURWITZ_MARGIN) {
            let x = linalg::spectral_abscissa(w.a())?;
            return Err(Error::InvalidConfig(format!("{name} is not stable (abscissa {x:e})")));
        }
    }
    let triple = closed_loop_triple(mp, cf)?;
    let weighted = WeightedTriple::new(&triple, w_in, w_out)?;
    let mut sp = from_weighted_triple(weighted, cd.clone(), omega)?;
    sp.plant = Some((mp.clone(), cf.clone()));
    Ok(sp)
}

/// Problem given directly by its weighted triple and constraint data.
pub fn from_weighted_triple(weighted: WeightedTriple, cd: ConstraintData, omega: Option<Omega>) -> Result<SynthesisProblem> {
    let WeightedTriple { t0, t1, t2 } = &weighted;
    let d0 = linalg::max_abs(t0.d());
    if d0 > feedthrough_scale(t0) {
        return Err(Error::NotStrictlyProper(d0));
    }
    let (d1, d2) = (linalg::max_abs(t1.d()), linalg::max_abs(t2.d()));
    if d1 > feedthrough_scale(t1) && d2 > feedthrough_scale(t2) {
        return Err(Error::NotStrictlyProper(d1 * d2));
    }
    if t1.n_inputs() != cd.q_rows() || t2.n_outputs() != cd.q_cols() {
        return Err(Error::DimensionMismatch("weighted triple does not match the Youla parameter".into()));
    }
    for sys in [t0, t1, t2] {
        if !sys.is_static() && !is_hurwitz(sys.a(), HURWITZ_MARGIN) {
            return Err(Error::NotStable(linalg::spectral_abscissa(sys.a())?));
        }
    }
    let scale = weighted.frequency_scale()?;
    let quadrature = Quadrature::adapted(scale, &weighted.poles()?);
    let omega = omega.unwrap_or_else(|| Omega::quadrature(&quadrature));
    Ok(SynthesisProblem {
        plant: None,
        hat_t0: StateSpace::chain(&[&t1.conjugate(), t0, &t2.conjugate()])?,
        hat_t1: t1.conjugate().series(t1)?,
        hat_t2: t2.series(&t2.conjugate())?,
        cd,
        weighted,
        omega,
        quadrature,
    })
}

impl SynthesisProblem {
    pub fn q_shape(&self) -> (usize, usize) {
        (self.cd.q_rows(), self.cd.q_cols())
    }

    /// `(𝑻̂0, 𝑻̂1, 𝑻̂2)` at `iω`, from the weighted triple.
    pub fn hats_at(&self, w: f64) -> Result<(CMat, CMat, CMat)> {
        let t0 = self.weighted.t0.at(w)?;
        let t1 = self.weighted.t1.at(w)?;
        let t2 = self.weighted.t2.at(w)?;
        let t1a = t1.adjoint();
        let t2a = t2.adjoint();
        Ok((&t1a * t0 * &t2a, &t1a * t1, t2 * t2a))
    }

    /// `‖𝑻0 + 𝑻1 Q 𝑻2‖²₂` from a Lyapunov solve.
    pub fn cost(&self, q: &YoulaParameter) -> Result<f64> {
        self.cost_of(&q.realization())
    }

    pub fn cost_of(&self, q: &StateSpace) -> Result<f64> {
        h2_norm_sq(&self.weighted.closed_loop(q)?)
    }

    /// `‖𝑻0‖²₂ + 2 Re⟨𝑻̂0, Q⟩ + ⟨Q, 𝑻̂1 Q 𝑻̂2⟩` with the inner products
    /// evaluated by quadrature.
    pub fn cost_quadrature(&self, q: &impl FreqResponse) -> Result<f64> {
        let quad = &self.quadrature;
        let terms = Exec::default().try_map(&quad.nodes, |&w| {
            let t0 = self.weighted.t0.at(w)?;
            let (h0, h1, h2) = self.hats_at(w)?;
            let qv = q.at(w)?;
            let v = linalg::fro(&t0).powi(2) + 2.0 * (h0.adjoint() * &qv).trace().re + (qv.adjoint() * h1 * &qv * h2).trace().re;
            Ok::<f64, Error>(v)
        })?;
        Ok(quad.integrate(&terms))
    }

    /// `∇E(iω) = 2 (𝑻̂0 + 𝑻̂1 Q 𝑻̂2)(iω)` at each node of `grid`.
    pub fn gradient_on(&self, q: &impl FreqResponse, grid: &FrequencyGrid) -> Result<Vec<CMat>> {
        Exec::default().try_map(grid.points(), |&w| {
            let (h0, h1, h2) = self.hats_at(w)?;
            Ok::<CMat, Error>((h0 + h1 * q.at(w)? * h2) * c(2.0, 0.0))
        })
    }

    pub fn gradient(&self, q: &impl FreqResponse) -> Result<Vec<CMat>> {
        self.gradient_on(q, &self.omega.grid)
    }

    /// `Re⟨∇E, δQ⟩` by quadrature.
    pub fn directional_derivative(&self, q: &impl FreqResponse, dq: &impl FreqResponse) -> Result<f64> {
        let grid = self.quadrature.grid();
        let g = self.gradient_on(q, &grid)?;
        let d = dq.sweep(&grid, Exec::default())?;
        Ok(Omega::quadrature(&self.quadrature).pairing(&g, &d))
    }

    /// Scalar curvature estimate `tr 𝑻̂1 · tr 𝑻̂2 / (rows · cols)` at each
    /// node; exact when both are multiples of the identity.
    fn curvature(&self) -> Result<Vec<f64>> {
        let (p, m) = self.q_shape();
        let raw = Exec::default().try_map(self.omega.grid.points(), |&w| {
            let (_, h1, h2) = self.hats_at(w)?;
            Ok::<f64, Error>(h1.trace().re * h2.trace().re / (p * m) as f64)
        })?;
        let top = raw.iter().copied().fold(0.0, f64::max);
        let floor = 1e-12 * top.max(f64::MIN_POSITIVE);
        Ok(raw.into_iter().map(|r| r.max(floor)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub alpha0: f64,
    pub backtrack_ratio: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub constraint_tol: f64,
    /// Restore the constraint every this many iterations; `0` disables the
    /// restoration entirely.
    pub correction_period: usize,
    /// Scale the direction by the local curvature of the cost.
    pub precondition: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            backtrack_ratio: 0.5,
            max_iters: 200,
            grad_tol: 1e-9,
            constraint_tol: 1e-6,
            correction_period: 5,
            precondition: true,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha0 > 0.0
            && self.backtrack_ratio > 0.0
            && self.backtrack_ratio < 1.0
            && self.grad_tol >= 0.0
            && self.constraint_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("descent settings out of range: {self:?}")))
        }
    }
}

pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub constraint_residual: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DescentTrace {
    /// Row 0 is the starting point; row `k` follows the `k`-th accepted step.
    pub records: Vec<IterRecord>,
    pub converged: bool,
    pub corrections: usize,
    pub rank_deficient_steps: usize,
}

impl DescentTrace {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }
}

/// Projected gradient descent from a feasible `q_init`.
pub fn descend(sp: &SynthesisProblem, q_init: &YoulaParameter, cfg: &DescentConfig) -> Result<(YoulaParameter, DescentTrace)> {
    cfg.validate()?;
    let grid = &sp.omega.grid;
    let residual0 = constraint_residual(&sp.cd, q_init, grid)?;
    if residual0 > cfg.constraint_tol {
        return Err(Error::InfeasibleStart { residual: residual0, tol: cfg.constraint_tol });
    }
    let rho = if cfg.precondition { sp.curvature()? } else { vec![0.5; sp.omega.len()] };
    let weights: Vec<f64> = sp.omega.weights.iter().zip(&rho).map(|(w, r)| w * r).collect();

    let mut q = q_init.clone();
    let mut cost = sp.cost(&q)?;
    let mut trace = DescentTrace::default();
    let g0 = sp.gradient(&q)?;
    trace.records.push(IterRecord {
        iter: 0,
        cost,
        grad_norm: sp.omega.norm(&g0),
        step_norm: 0.0,
        constraint_residual: residual0,
        alpha: 0.0,
    });

    for k in 1..=cfg.max_iters {
        let g = sp.gradient(&q)?;
        let grad_norm = sp.omega.norm(&g);
        let ts = TangentSubspace::new(&sp.cd, &q, sp.omega.clone())?;
        let nb = ts.basis();
        let d: Vec<CMat> = g.iter().zip(&rho).map(|(gk, r)| gk * c(0.5 / r, 0.0)).collect();
        let proj = project_with_basis(&ts, &nb, &d, &weights)?;
        if proj.rank_deficient {
            trace.rank_deficient_steps += 1;
        }
        let x = proj.x;
        let xs = x.sweep(grid, Exec::default())?;
        let x_norm = sp.omega.norm(&xs);
        // the Ω pairing is only a proxy for the H2 inner product when Ω is
        // coarse, so the line search uses the true directional derivative
        let slope = sp.directional_derivative(&q, &x)?;
        if x_norm <= cfg.grad_tol || slope <= 0.0 {
            trace.converged = true;
            break;
        }

        let mut alpha = cfg.alpha0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = q.axpy(-alpha, &x);
            let mut res = constraint_residual(&sp.cd, &trial, grid)?;
            if cfg.correction_period > 0 && (k % cfg.correction_period == 0 || res > cfg.constraint_tol) {
                let (fixed, r) = restore_constraint(&sp.cd, &trial, &sp.omega, 0.01 * cfg.constraint_tol, 5)?;
                trial = fixed;
                res = r;
                trace.corrections += 1;
            }
            match sp.cost(&trial) {
                Ok(e) if e <= cost - 1e-4 * alpha * slope => {
                    accepted = Some((trial, e, res));
                    break;
                }
                Ok(_) | Err(Error::NotStable(_)) => alpha *= cfg.backtrack_ratio,
                Err(e) => return Err(e),
            }
        }
        let Some((next, e, res)) = accepted else {
            // no measurable decrease left to find
            if alpha * slope <= 1e-12 * cost.abs().max(1e-300) / cfg.backtrack_ratio {
                trace.converged = true;
                break;
            }
            return Err(Error::StalledLineSearch(k));
        };
        q = next;
        cost = e;
        trace.records.push(IterRecord {
            iter: k,
            cost,
            grad_norm,
            step_norm: alpha * x_norm,
            constraint_residual: res,
            alpha,
        });
    }
    Ok((q, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationVerdict {
    pub qhat: QhatVerdict,
    pub closed_loop_stable: bool,
    pub overall: bool,
}

/// Admissibility of the final parameter plus internal stability of the
/// assembled loop.
pub fn validate_result(
    mp: &ModifiedPlant,
    cf: &CoprimeFactorization,
    cd: &ConstraintData,
    q: &YoulaParameter,
    grid: &FrequencyGrid,
    tol: f64,
) -> Result<ValidationVerdict> {
    let qs = q.realization();
    let qhat = membership_qhat(cf, cd, &qs, grid, tol)?;
    let closed_loop_stable = if qhat.feedthrough_ok {
        let k = controller_from_parameter(cf, &qs)?;
        match close_loop(mp, &k) {
            Ok(cl) => cl.is_static() || is_hurwitz(cl.a(), HURWITZ_MARGIN),
            Err(Error::IllPosedInterconnection) => false,
            Err(e) => return Err(e),
        }
    } else {
        false
    };
    Ok(ValidationVerdict { overall: qhat.overall && closed_loop_stable, qhat, closed_loop_stable })
}
