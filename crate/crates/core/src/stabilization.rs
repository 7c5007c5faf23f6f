//! Modified plant, stabilizing gains, doubly coprime factors, the Youla
//! map and the affine closed loop.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::FrequencyGrid;
use crate::linalg::{self, block, c, eye, fro, hcat, vcat, zeros, CMat};
use crate::statespace::{is_hurwitz, lft_lower, FreqResponse, StateSpace, HURWITZ_MARGIN, MINIMAL_TOL};

pub const BEZOUT_TOL: f64 = 1e-8;
pub const PBH_TOL: f64 = 1e-9;

/// Channel counts of the loop partition. For a doubled-up plant these count
/// field channels, each of which occupies two rows/columns (annihilation and
/// creation parts).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub n_r: usize,
    pub n_u: usize,
    pub n_z: usize,
    pub n_y: usize,
}

impl PartitionSpec {
    pub fn new(n_r: usize, n_u: usize, n_z: usize, n_y: usize) -> Result<Self> {
        let p = Self { n_r, n_u, n_z, n_y };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_u != self.n_y {
            return Err(Error::InvalidPartition(format!(
                "controller must be square: n_u = {} but n_y = {}",
                self.n_u, self.n_y
            )));
        }
        if self.n_r < self.n_y {
            return Err(Error::InvalidPartition(format!(
                "exogenous inputs ({}) fewer than controller outputs ({})",
                self.n_r, self.n_y
            )));
        }
        Ok(())
    }

    pub fn mu(&self) -> usize {
        self.n_u
    }

    fn doubled(&self) -> Self {
        Self { n_r: 2 * self.n_r, n_u: 2 * self.n_u, n_z: 2 * self.n_z, n_y: 2 * self.n_y }
    }
}

/// Plant in the standard `[[P11, P12], [P21, P22]]` layout with inputs
/// `[r; u]` and outputs `[z; y]`. `widths` are actual row/column counts.
#[derive(Debug, Clone)]
pub struct ModifiedPlant {
    pub full: StateSpace,
    pub widths: PartitionSpec,
}

/// Index order taking `(a, b, a#, b#)` to `(a, a#, b, b#)`.
fn regroup(na: usize, nb: usize) -> Vec<usize> {
    let tot = na + nb;
    (0..na)
        .chain(tot..tot + na)
        .chain(na..tot)
        .chain(tot + na..2 * tot)
        .collect()
}

/// Regroup a doubled-up plant with inputs `(r, u, r#, u#)` and outputs
/// `(z, y, z#, y#)` into `(r, r#, u, u#)` and `(z, z#, y, y#)`.
pub fn modify_plant(plant: &StateSpace, partition: PartitionSpec) -> Result<ModifiedPlant> {
    partition.validate()?;
    let PartitionSpec { n_r, n_u, n_z, n_y } = partition;
    if plant.n_inputs() != 2 * (n_r + n_u) || plant.n_outputs() != 2 * (n_z + n_y) {
        return Err(Error::DimensionMismatch(format!(
            "plant is {}x{}, partition needs {}x{}",
            plant.n_outputs(),
            plant.n_inputs(),
            2 * (n_z + n_y),
            2 * (n_r + n_u)
        )));
    }
    let full = plant.permute(&regroup(n_z, n_y), &regroup(n_r, n_u))?;
    Ok(ModifiedPlant { full, widths: partition.doubled() })
}

/// Inverse of [`modify_plant`].
pub fn unmodify_plant(mp: &ModifiedPlant) -> Result<StateSpace> {
    let w = mp.widths;
    let inv = |p: Vec<usize>| {
        let mut q = vec![0; p.len()];
        for (i, &j) in p.iter().enumerate() {
            q[j] = i;
        }
        q
    };
    mp.full.permute(&inv(regroup(w.n_z / 2, w.n_y / 2)), &inv(regroup(w.n_r / 2, w.n_u / 2)))
}

impl ModifiedPlant {
    /// Plant given directly in the standard layout with the stated widths.
    pub fn from_full(full: StateSpace, widths: PartitionSpec) -> Result<Self> {
        widths.validate()?;
        if full.n_inputs() != widths.n_r + widths.n_u || full.n_outputs() != widths.n_z + widths.n_y {
            return Err(Error::DimensionMismatch("plant size does not match widths".into()));
        }
        Ok(Self { full, widths })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_blocks(
        a: CMat,
        b1: CMat,
        b2: CMat,
        c1: CMat,
        c2: CMat,
        d11: CMat,
        d12: CMat,
        d21: CMat,
        d22: CMat,
    ) -> Result<Self> {
        let widths = PartitionSpec::new(b1.ncols(), b2.ncols(), c1.nrows(), c2.nrows())?;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::DimensionMismatch(what.to_string()))
            }
        };
        check(d11.shape() == (c1.nrows(), b1.ncols()), "D11")?;
        check(d12.shape() == (c1.nrows(), b2.ncols()), "D12")?;
        check(d21.shape() == (c2.nrows(), b1.ncols()), "D21")?;
        check(d22.shape() == (c2.nrows(), b2.ncols()), "D22")?;
        let full = StateSpace::new(
            a,
            hcat(&b1, &b2),
            vcat(&c1, &c2),
            block(&[&[&d11, &d12], &[&d21, &d22]]),
        )?;
        Ok(Self { full, widths })
    }

    pub fn a(&self) -> &CMat {
        self.full.a()
    }
    pub fn b1(&self) -> CMat {
        self.full.b().columns(0, self.widths.n_r).into_owned()
    }
    pub fn b2(&self) -> CMat {
        self.full.b().columns(self.widths.n_r, self.widths.n_u).into_owned()
    }
    pub fn c1(&self) -> CMat {
        self.full.c().rows(0, self.widths.n_z).into_owned()
    }
    pub fn c2(&self) -> CMat {
        self.full.c().rows(self.widths.n_z, self.widths.n_y).into_owned()
    }
    fn d_block(&self, row: usize, col: usize) -> CMat {
        let w = self.widths;
        let (r0, nr) = if row == 0 { (0, w.n_z) } else { (w.n_z, w.n_y) };
        let (c0, nc) = if col == 0 { (0, w.n_r) } else { (w.n_r, w.n_u) };
        self.full.d().view((r0, c0), (nr, nc)).into_owned()
    }
    pub fn d11(&self) -> CMat {
        self.d_block(0, 0)
    }
    pub fn d12(&self) -> CMat {
        self.d_block(0, 1)
    }
    pub fn d21(&self) -> CMat {
        self.d_block(1, 0)
    }
    pub fn d22(&self) -> CMat {
        self.d_block(1, 1)
    }

    pub fn n_states(&self) -> usize {
        self.full.n_states()
    }

    /// Controller size: the loop is square, so this is both `n_u` and `n_y`.
    pub fn loop_width(&self) -> usize {
        self.widths.n_u
    }
}

/// `P22 = (A, B2, C2, D22)`.
pub fn extract_p22(mp: &ModifiedPlant) -> StateSpace {
    let w = mp.widths;
    mp.full.select(w.n_z..w.n_z + w.n_y, w.n_r..w.n_r + w.n_u)
}

fn pbh_rank_deficient(a: &CMat, b: &CMat, tol: f64, stacked_rows: bool) -> Result<Option<Complex64>> {
    let n = a.nrows();
    for lam in linalg::eigenvalues(a)? {
        if lam.re < 0.0 {
            continue;
        }
        let shifted = eye(n) * lam - a;
        let m = if stacked_rows { vcat(&shifted, b) } else { hcat(&shifted, b) };
        let scale = linalg::sigma_max(&m).max(1.0);
        if linalg::rank(&m, tol * scale) < n {
            return Ok(Some(lam));
        }
    }
    Ok(None)
}

/// First closed right half-plane eigenvalue of `A` that `B2` cannot reach.
pub fn uncontrollable_unstable_mode(a: &CMat, b2: &CMat, tol: f64) -> Result<Option<Complex64>> {
    pbh_rank_deficient(a, b2, tol, false)
}

/// First closed right half-plane eigenvalue of `A` invisible through `C2`.
pub fn unobservable_unstable_mode(a: &CMat, c2: &CMat, tol: f64) -> Result<Option<Complex64>> {
    pbh_rank_deficient(a, c2, tol, true)
}

pub fn pbh_stabilizable(a: &CMat, b2: &CMat, tol: f64) -> bool {
    matches!(uncontrollable_unstable_mode(a, b2, tol), Ok(None))
}

pub fn pbh_detectable(a: &CMat, c2: &CMat, tol: f64) -> bool {
    matches!(unobservable_unstable_mode(a, c2, tol), Ok(None))
}

/// How closed-loop eigenvalues are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum GainPolicy {
    /// Move each eigenvalue with `Re λ >= 0` to `-max(|Re λ|, min_decay) + i Im λ`
    /// and leave stable ones alone.
    ReflectUnstable { min_decay: f64 },
    /// Assign the whole spectrum of `A + B2 F` and of `A + L C2`.
    Explicit { state: Vec<Complex64>, observer: Vec<Complex64> },
    /// Assign `-1, -2, ..., -N`.
    Ladder,
    /// `F = 0`, `L = 0`; only valid for a stable plant.
    Zero,
}

impl Default for GainPolicy {
    fn default() -> Self {
        GainPolicy::ReflectUnstable { min_decay: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct GainPair {
    pub f: CMat,
    pub l: CMat,
}

enum Targets<'a> {
    Reflect(f64),
    List(&'a [Complex64]),
}

/// State feedback `F` such that `A + B F` has the requested spectrum, by
/// moving one eigenvalue at a time to the trailing corner of a complex
/// Schur form and correcting it with a rank-one update.
fn place(a: &CMat, b: &CMat, targets: Targets) -> Result<CMat> {
    let n = a.nrows();
    let m = b.ncols();
    let mut f = zeros(m, n);
    if n == 0 {
        return Ok(f);
    }
    if let Targets::List(t) = &targets {
        if t.len() != n {
            return Err(Error::PlacementFailed(format!("{} targets for {} states", t.len(), n)));
        }
    }
    let (mut u, mut t) = linalg::schur(a)?;
    let bscale = linalg::sigma_max(b).max(1.0);
    let mut placed = vec![false; n];
    let mut next_target = 0;
    loop {
        let pick = (0..n).find(|&i| {
            !placed[i]
                && match targets {
                    Targets::Reflect(_) => t[(i, i)].re >= -HURWITZ_MARGIN,
                    Targets::List(_) => true,
                }
        });
        let Some(k) = pick else { break };
        for j in k..n - 1 {
            linalg::schur_swap(&mut t, &mut u, j);
            placed.swap(j, j + 1);
        }
        let lam = t[(n - 1, n - 1)];
        let q = u.columns(n - 1, 1).into_owned();
        let ub = u.adjoint() * b;
        let brow = ub.rows(n - 1, 1).into_owned();
        let bnorm2 = brow.norm_squared();
        let target = match targets {
            Targets::Reflect(min_decay) => c(-lam.re.abs().max(min_decay), lam.im),
            Targets::List(list) => {
                let v = list[next_target];
                next_target += 1;
                v
            }
        };
        if bnorm2.sqrt() <= PBH_TOL * bscale {
            if lam.re >= 0.0 {
                return Err(Error::NotStabilizable { eigenvalue: lam });
            }
            placed[n - 1] = true;
            continue;
        }
        let gain: CMat = brow.adjoint() * ((target - lam) / bnorm2);
        f += &gain * q.adjoint();
        let dcol = &ub * &gain;
        for i in 0..n {
            t[(i, n - 1)] += dcol[(i, 0)];
        }
        placed[n - 1] = true;
    }
    Ok(f)
}

fn state_gain(a: &CMat, b2: &CMat, policy: &GainPolicy) -> Result<CMat> {
    let n = a.nrows();
    let ladder: Vec<Complex64> = (1..=n).map(|k| c(-(k as f64), 0.0)).collect();
    let f = match policy {
        GainPolicy::Zero => zeros(b2.ncols(), n),
        GainPolicy::Ladder => place(a, b2, Targets::List(&ladder))?,
        GainPolicy::Explicit { state, .. } => place(a, b2, Targets::List(state))?,
        GainPolicy::ReflectUnstable { min_decay } => {
            let f = place(a, b2, Targets::Reflect(*min_decay))?;
            if is_hurwitz(&(a + b2 * &f), HURWITZ_MARGIN) {
                f
            } else {
                place(a, b2, Targets::List(&ladder))?
            }
        }
    };
    if !is_hurwitz(&(a + b2 * &f), HURWITZ_MARGIN) {
        return Err(Error::PlacementFailed(format!(
            "A + B2 F has spectral abscissa {:e}",
            linalg::spectral_abscissa(&(a + b2 * &f))?
        )));
    }
    Ok(f)
}

/// `F` and `L` with `A + B2 F` and `A + L C2` Hurwitz. `L` is computed from
/// the dual problem on `(A^*, C2^*)`.
pub fn stabilizing_gains(a: &CMat, b2: &CMat, c2: &CMat, policy: &GainPolicy) -> Result<GainPair> {
    if let Some(eigenvalue) = uncontrollable_unstable_mode(a, b2, PBH_TOL)? {
        return Err(Error::NotStabilizable { eigenvalue });
    }
    if let Some(eigenvalue) = unobservable_unstable_mode(a, c2, PBH_TOL)? {
        return Err(Error::NotDetectable { eigenvalue });
    }
    let f = state_gain(a, b2, policy)?;
    let dual_policy = match policy {
        GainPolicy::Explicit { observer, .. } => GainPolicy::Explicit {
            state: observer.iter().map(|z| z.conj()).collect(),
            observer: vec![],
        },
        p => p.clone(),
    };
    let l = match state_gain(&a.adjoint(), &c2.adjoint(), &dual_policy) {
        Ok(fd) => fd.adjoint(),
        Err(Error::NotStabilizable { eigenvalue }) => {
            return Err(Error::NotDetectable { eigenvalue: eigenvalue.conj() })
        }
        Err(e) => return Err(e),
    };
    if !is_hurwitz(&(a + &l * c2), HURWITZ_MARGIN) {
        return Err(Error::PlacementFailed("A + L C2 is not Hurwitz".into()));
    }
    Ok(GainPair { f, l })
}

pub fn gains_for(mp: &ModifiedPlant, policy: &GainPolicy) -> Result<GainPair> {
    stabilizing_gains(mp.a(), &mp.b2(), &mp.c2(), policy)
}

/// Right factors `M, N, U, V` (all with dynamics `A + B2 F`) and left
/// factors `M̂, N̂, Û, V̂` (dynamics `A + L C2`) of `P22`.
#[derive(Debug, Clone)]
pub struct CoprimeFactorization {
    pub m: StateSpace,
    pub n: StateSpace,
    pub u: StateSpace,
    pub v: StateSpace,
    pub m_hat: StateSpace,
    pub n_hat: StateSpace,
    pub u_hat: StateSpace,
    pub v_hat: StateSpace,
    pub gains: GainPair,
    /// Largest Bézout residual seen on the verification grid.
    pub bezout_residual: f64,
    // shared data for assembling the controller
    af: CMat,
    b2: CMat,
    cf: CMat,
    dmn: CMat,
}

impl CoprimeFactorization {
    /// `[M U; N V]` as one system.
    pub fn right_stack(&self) -> StateSpace {
        let w = self.gains.f.nrows();
        let y = self.gains.l.ncols();
        let d = block(&[&[&eye(w), &zeros(w, y)], &[&self.dmn.rows(w, y).into_owned(), &eye(y)]]);
        StateSpace::new(self.af.clone(), hcat(&self.b2, &(-&self.gains.l)), self.cf.clone(), d).unwrap()
    }

    /// `[V̂ -Û; -N̂ M̂]` as one system.
    pub fn left_stack(&self) -> StateSpace {
        let (a, b) = (self.m_hat.a(), self.v_hat.b());
        let w = self.gains.f.nrows();
        let y = self.gains.l.ncols();
        let d22 = self.n_hat.d();
        let d = block(&[&[&eye(w), &zeros(w, y)], &[&(-d22), &eye(y)]]);
        StateSpace::new(
            a.clone(),
            hcat(b, self.m_hat.b()),
            vcat(&self.gains.f, self.m_hat.c()),
            d,
        )
        .unwrap()
    }

    pub fn n_states(&self) -> usize {
        self.af.nrows()
    }

    pub fn loop_width(&self) -> usize {
        self.gains.l.ncols()
    }
}

/// Pointwise `‖[V̂ -Û; -N̂ M̂][M U; N V] - I‖_F`, maximized over the grid.
pub fn bezout_residual(cf: &CoprimeFactorization, grid: &FrequencyGrid) -> Result<f64> {
    let left = cf.left_stack();
    let right = cf.right_stack();
    let k = left.n_outputs();
    let r = Exec::default().try_map(grid.points(), |&w| {
        Ok::<f64, Error>(fro(&(left.at(w)? * right.at(w)? - eye(k))))
    })?;
    Ok(r.into_iter().fold(0.0, f64::max))
}

pub fn coprime_factorization(mp: &ModifiedPlant, gains: &GainPair) -> Result<CoprimeFactorization> {
    coprime_factorization_with_tol(mp, gains, BEZOUT_TOL)
}

pub fn coprime_factorization_with_tol(mp: &ModifiedPlant, gains: &GainPair, tol: f64) -> Result<CoprimeFactorization> {
    let a = mp.a();
    let (b2, c2, d22) = (mp.b2(), mp.c2(), mp.d22());
    let (w, y, n) = (b2.ncols(), c2.nrows(), a.nrows());
    let (f, l) = (&gains.f, &gains.l);
    if f.shape() != (w, n) || l.shape() != (n, y) {
        return Err(Error::DimensionMismatch(format!(
            "gains F {:?}, L {:?} for plant with {} states, loop {}x{}",
            f.shape(),
            l.shape(),
            n,
            y,
            w
        )));
    }
    let af = a + &b2 * f;
    let al = a + l * &c2;
    if !is_hurwitz(&af, HURWITZ_MARGIN) {
        return Err(Error::FactorUnstable("M, N, U, V"));
    }
    if !is_hurwitz(&al, HURWITZ_MARGIN) {
        return Err(Error::FactorUnstable("M^, N^, U^, V^"));
    }
    let cn = &c2 + &d22 * f;
    let ss = |a: &CMat, b: CMat, cc: CMat, d: CMat| StateSpace::new(a.clone(), b, cc, d);
    let bl = -(&b2 + l * &d22);
    let cf = CoprimeFactorization {
        m: ss(&af, b2.clone(), f.clone(), eye(w))?,
        n: ss(&af, b2.clone(), cn.clone(), d22.clone())?,
        u: ss(&af, -l, f.clone(), zeros(w, y))?,
        v: ss(&af, -l, cn.clone(), eye(y))?,
        m_hat: ss(&al, l.clone(), c2.clone(), eye(y))?,
        n_hat: ss(&al, -&bl, c2.clone(), d22.clone())?,
        u_hat: ss(&al, -l, f.clone(), zeros(w, y))?,
        v_hat: ss(&al, bl, f.clone(), eye(w))?,
        gains: gains.clone(),
        bezout_residual: 0.0,
        dmn: vcat(&eye(w), &d22),
        cf: vcat(f, &cn),
        af,
        b2,
    };
    let residual = bezout_residual(&cf, &FrequencyGrid::verification())?;
    if residual > tol {
        return Err(Error::BezoutResidualTooLarge(residual));
    }
    Ok(CoprimeFactorization { bezout_residual: residual, ..cf })
}

/// Stacked `[U + M Q; V + N Q]` sharing the factor state.
fn numerator_stack(cf: &CoprimeFactorization, q: &StateSpace) -> Result<StateSpace> {
    let w = cf.gains.f.nrows();
    let y = cf.loop_width();
    if q.n_outputs() != w || q.n_inputs() != y {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{}, loop needs {}x{}",
            q.n_outputs(),
            q.n_inputs(),
            w,
            y
        )));
    }
    let (n, nq) = (cf.n_states(), q.n_states());
    let a = block(&[&[&cf.af, &(&cf.b2 * q.c())], &[&zeros(nq, n), q.a()]]);
    let b = vcat(&(&cf.b2 * q.d() - &cf.gains.l), q.b());
    let cc = hcat(&cf.cf, &(&cf.dmn * q.c()));
    let d = &cf.dmn * q.d() + vcat(&zeros(w, y), &eye(y));
    StateSpace::new(a, b, cc, d)
}

/// `det((V + N Q)(∞))`.
pub fn denominator_feedthrough_det(cf: &CoprimeFactorization, q: &StateSpace) -> Result<Complex64> {
    let w = cf.gains.f.nrows();
    let y = cf.loop_width();
    let dy = cf.dmn.rows(w, y) * q.d() + eye(y);
    Ok(linalg::det(&dy))
}

/// `K = (U + M Q)(V + N Q)^{-1}`.
pub fn controller_from_parameter(cf: &CoprimeFactorization, q: &StateSpace) -> Result<StateSpace> {
    let stack = numerator_stack(cf, q)?;
    let w = cf.gains.f.nrows();
    let y = cf.loop_width();
    let (a, b, cc, d) = stack.into_parts();
    let cx = cc.rows(0, w).into_owned();
    let cy = cc.rows(w, y).into_owned();
    let dx = d.rows(0, w).into_owned();
    let dy = d.rows(w, y).into_owned();
    let dyi = linalg::inverse(&dy).ok_or(Error::FeedthroughSingular)?;
    let bdi = &b * &dyi;
    let dxdi = &dx * &dyi;
    StateSpace::new(&a - &bdi * &cy, bdi, &cx - &dxdi * &cy, dxdi)
}

/// Left form `K = (V̂ + Q N̂)^{-1} (Û + Q M̂)`.
pub fn controller_from_parameter_left(cf: &CoprimeFactorization, q: &StateSpace) -> Result<StateSpace> {
    let x = cf.u_hat.add(&q.series(&cf.m_hat)?)?;
    let y = cf.v_hat.add(&q.series(&cf.n_hat)?)?;
    y.inverse()?.series(&x)
}

/// `Q = (V̂ K - Û)(M̂ - N̂ K)^{-1}`, reduced to a minimal realization.
pub fn parameter_from_controller(cf: &CoprimeFactorization, k: &StateSpace) -> Result<StateSpace> {
    let num = cf.v_hat.series(k)?.sub(&cf.u_hat)?;
    let den = cf.m_hat.sub(&cf.n_hat.series(k)?)?;
    let den_inv = den.inverse().map_err(|_| Error::NotInYoulaRange("M^ - N^ K is not invertible".into()))?;
    let q = num.series(&den_inv)?.minimal_realization(MINIMAL_TOL);
    if !q.is_static() && !is_hurwitz(q.a(), HURWITZ_MARGIN) {
        return Err(Error::NotInYoulaRange(format!(
            "recovered parameter has spectral abscissa {:e}",
            linalg::spectral_abscissa(q.a())?
        )));
    }
    Ok(q)
}

/// `G = T0 + T1 Q T2`.
#[derive(Debug, Clone)]
pub struct ClosedLoopTriple {
    pub t0: StateSpace,
    pub t1: StateSpace,
    pub t2: StateSpace,
}

impl ClosedLoopTriple {
    pub fn affine(&self, q: &StateSpace) -> Result<StateSpace> {
        self.t0.add(&StateSpace::chain(&[&self.t1, q, &self.t2])?)
    }
}

/// `T0 = P11 + P12 U M̂ P21`, `T1 = P12 M`, `T2 = M̂ P21`, in realizations
/// whose state matrices are built from `A + B2 F` and `A + L C2` only.
pub fn closed_loop_triple(mp: &ModifiedPlant, cf: &CoprimeFactorization) -> Result<ClosedLoopTriple> {
    let (f, l) = (&cf.gains.f, &cf.gains.l);
    let a = mp.a();
    let (b1, b2, c1, c2) = (mp.b1(), mp.b2(), mp.c1(), mp.c2());
    let (d11, d12, d21) = (mp.d11(), mp.d12(), mp.d21());
    let n = a.nrows();
    let af = a + &b2 * f;
    let al = a + l * &c2;
    let bl = &b1 + l * &d21;
    let cf1 = &c1 + &d12 * f;
    let t0 = StateSpace::new(
        block(&[&[&af, &(-(&b2 * f))], &[&zeros(n, n), &al]]),
        vcat(&b1, &bl),
        hcat(&cf1, &(-(&d12 * f))),
        d11,
    )?;
    let t1 = StateSpace::new(af, b2, cf1, d12)?;
    let t2 = StateSpace::new(al, bl, c2, d21)?;
    Ok(ClosedLoopTriple { t0, t1, t2 })
}

/// Lower LFT of the modified plant with `K`.
pub fn close_loop(mp: &ModifiedPlant, k: &StateSpace) -> Result<StateSpace> {
    lft_lower(&mp.full, k, mp.widths.n_r, mp.widths.n_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    fn r(v: f64) -> CMat {
        real_matrix(1, 1, &[v])
    }

    /// `P22 = 1/(s - 1)` with unit exogenous channels.
    fn scalar_demo() -> ModifiedPlant {
        ModifiedPlant::from_blocks(r(1.0), r(1.0), r(1.0), r(1.0), r(1.0), r(0.0), r(0.0), r(0.0), r(0.0)).unwrap()
    }

    fn tf(num: &[f64], den: &[f64], s: Complex64) -> Complex64 {
        let p = |cs: &[f64]| cs.iter().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * s + k);
        p(num) / p(den)
    }

    #[test]
    fn regrouping_matches_block_layout() {
        // inputs (r, u, r#, u#) -> (r, r#, u, u#)
        assert_eq!(regroup(1, 1), vec![0, 2, 1, 3]);
        assert_eq!(regroup(2, 1), vec![0, 1, 3, 4, 2, 5]);
        let d = CMat::from_fn(4, 4, |i, j| c((10 * (i + 1) + j + 1) as f64, 0.0));
        let plant = StateSpace::static_gain(d);
        let mp = modify_plant(&plant, PartitionSpec::new(1, 1, 1, 1).unwrap()).unwrap();
        let p11 = mp.full.d().view((0, 0), (2, 2)).into_owned();
        assert_eq!(p11, real_matrix(2, 2, &[11.0, 13.0, 31.0, 33.0]));
        let back = unmodify_plant(&mp).unwrap();
        assert_eq!(back.d(), plant.d());
    }

    #[test]
    fn partition_checks() {
        assert!(matches!(PartitionSpec::new(0, 1, 1, 1), Err(Error::InvalidPartition(_))));
        assert!(matches!(PartitionSpec::new(2, 1, 1, 2), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn pbh_examples() {
        assert!(pbh_stabilizable(&r(1.0), &r(1.0), PBH_TOL));
        assert!(!pbh_stabilizable(&r(1.0), &r(0.0), PBH_TOL));
        let a = real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(pbh_detectable(&a, &real_matrix(1, 2, &[1.0, 0.0]), PBH_TOL));
        assert!(!pbh_detectable(&a, &real_matrix(1, 2, &[0.0, 1.0]), PBH_TOL));
    }

    #[test]
    fn scalar_placement() {
        let g = stabilizing_gains(&r(1.0), &r(1.0), &r(1.0), &GainPolicy::default()).unwrap();
        assert!((g.f[(0, 0)] - c(-2.0, 0.0)).norm() < 1e-14);
        assert!((g.l[(0, 0)] - c(-2.0, 0.0)).norm() < 1e-14);
        let err = stabilizing_gains(&r(1.0), &r(0.0), &r(1.0), &GainPolicy::default());
        assert!(matches!(err, Err(Error::NotStabilizable { eigenvalue }) if (eigenvalue - c(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn reflect_policy_keeps_stable_modes() {
        let a = real_matrix(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let b = real_matrix(2, 1, &[0.0, 1.0]);
        let cc = real_matrix(1, 2, &[1.0, 1.0]);
        let g = stabilizing_gains(&a, &b, &cc, &GainPolicy::default()).unwrap();
        let mut ev = linalg::eigenvalues(&(&a + &b * &g.f)).unwrap();
        ev.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        for z in ev {
            assert!((z - c(-1.0, 0.0)).norm() < 1e-6, "{z}");
        }
    }

    #[test]
    fn explicit_placement_multi_input() {
        let a = CMat::from_fn(4, 4, |i, j| c(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0));
        let b = CMat::from_fn(4, 2, |i, j| c((i + j) as f64 * 0.5 - 1.0, (i as f64) * 0.1));
        let targets: Vec<Complex64> = vec![c(-1.0, 1.0), c(-2.0, 0.0), c(-3.0, -0.5), c(-4.0, 0.0)];
        let f = place(&a, &b, Targets::List(&targets)).unwrap();
        let mut ev = linalg::eigenvalues(&(&a + &b * f)).unwrap();
        ev.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap());
        for (z, t) in ev.iter().zip(&targets) {
            assert!((z - t).norm() < 1e-8, "{z} vs {t}");
        }
    }

    #[test]
    fn scalar_demo_factors() {
        let mp = scalar_demo();
        let gains = gains_for(&mp, &GainPolicy::default()).unwrap();
        let cf = coprime_factorization(&mp, &gains).unwrap();
        let grid = FrequencyGrid::verification();
        for &w in grid.points() {
            let s = c(0.0, w);
            let check = |sys: &StateSpace, num: &[f64], den: &[f64]| {
                let v = sys.at(w).unwrap()[(0, 0)];
                assert!((v - tf(num, den, s)).norm() < 1e-9, "w={w}");
            };
            check(&cf.m, &[1.0, -1.0], &[1.0, 1.0]);
            check(&cf.n, &[1.0], &[1.0, 1.0]);
            check(&cf.u, &[-4.0], &[1.0, 1.0]);
            check(&cf.v, &[1.0, 3.0], &[1.0, 1.0]);
            check(&cf.v_hat, &[1.0, 3.0], &[1.0, 1.0]);
            check(&cf.u_hat, &[-4.0], &[1.0, 1.0]);
        }
        assert!(cf.bezout_residual < 1e-12);

        let k = controller_from_parameter(&cf, &StateSpace::zero(1, 1)).unwrap();
        for &w in grid.points() {
            let v = k.at(w).unwrap()[(0, 0)];
            assert!((v - tf(&[-4.0], &[1.0, 3.0], c(0.0, w))).norm() < 1e-12);
        }
        let cl = lft_lower(&extract_p22(&mp), &k, 0, 0).unwrap();
        assert!(is_hurwitz(cl.a(), HURWITZ_MARGIN));
        let q = parameter_from_controller(&cf, &k).unwrap();
        assert!(StateSpace::zero(1, 1).max_distance(&q, &grid, Exec::default()).unwrap() < 1e-9);
    }

    #[test]
    fn feedthrough_singular_parameter() {
        // N(∞) = 0 for the demo, so (V + N Q)(∞) = 1 for any static Q; use a
        // plant with D22 = 1 instead, where Q = -1 cancels it.
        let mp = ModifiedPlant::from_blocks(r(1.0), r(1.0), r(1.0), r(1.0), r(1.0), r(0.0), r(0.0), r(0.0), r(1.0)).unwrap();
        let cf = coprime_factorization(&mp, &gains_for(&mp, &GainPolicy::default()).unwrap()).unwrap();
        let q = StateSpace::static_gain(r(-1.0));
        assert!(denominator_feedthrough_det(&cf, &q).unwrap().norm() < 1e-15);
        assert!(matches!(controller_from_parameter(&cf, &q), Err(Error::FeedthroughSingular)));
    }

    #[test]
    fn stable_plant_zero_gains() {
        let mp = ModifiedPlant::from_blocks(r(-2.0), r(1.0), r(3.0), r(1.0), r(1.0), r(0.0), r(0.0), r(0.0), r(0.5)).unwrap();
        let cf = coprime_factorization(&mp, &gains_for(&mp, &GainPolicy::Zero).unwrap()).unwrap();
        let grid = FrequencyGrid::verification();
        let ex = Exec::default();
        assert!(cf.m.max_distance(&StateSpace::identity(1), &grid, ex).unwrap() < 1e-15);
        assert!(cf.v.max_distance(&StateSpace::identity(1), &grid, ex).unwrap() < 1e-15);
        assert!(cf.u.max_distance(&StateSpace::zero(1, 1), &grid, ex).unwrap() < 1e-15);
        assert!(cf.n.max_distance(&extract_p22(&mp), &grid, ex).unwrap() < 1e-15);
    }

    #[test]
    fn affine_closed_loop_matches_lft() {
        let mp = scalar_demo();
        let cf = coprime_factorization(&mp, &gains_for(&mp, &GainPolicy::default()).unwrap()).unwrap();
        let tri = closed_loop_triple(&mp, &cf).unwrap();
        let grid = FrequencyGrid::verification();
        for q in [StateSpace::zero(1, 1), StateSpace::new(r(-2.0), r(1.0), r(0.7), r(0.3)).unwrap()] {
            let k = controller_from_parameter(&cf, &q).unwrap();
            let lft = close_loop(&mp, &k).unwrap();
            assert!(is_hurwitz(lft.a(), HURWITZ_MARGIN));
            let g = tri.affine(&q).unwrap();
            assert!(g.max_distance(&lft, &grid, Exec::default()).unwrap() < 1e-9);
            let kl = controller_from_parameter_left(&cf, &q).unwrap();
            assert!(k.max_distance(&kl, &grid, Exec::default()).unwrap() < 1e-9);
            let back = parameter_from_controller(&cf, &k).unwrap();
            assert!(back.max_distance(&q, &grid, Exec::default()).unwrap() < 1e-8);
        }
    }
}
