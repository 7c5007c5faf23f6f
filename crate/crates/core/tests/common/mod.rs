//! Random instances shared by the integration tests. Everything is drawn from
//! seeded ChaCha streams so failures reproduce.
#![allow(dead_code)]

use coherent_youla::linalg::{self, c, eye, zeros, CMat};
use coherent_youla::physreal::SlhModel;
use coherent_youla::stabilization::ModifiedPlant;
use coherent_youla::statespace::StateSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cmat(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) * scale)
}

pub fn hermitian(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let x = cmat(r, n, n, scale);
    (&x + x.adjoint()) * c(0.5, 0.0)
}

pub fn symmetric(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let x = cmat(r, n, n, scale);
    (&x + x.transpose()) * c(0.5, 0.0)
}

pub fn unitary(r: &mut ChaCha8Rng, n: usize) -> CMat {
    cmat(r, n, n, 1.0).qr().q()
}

/// Random SLH data with `n` modes and `m` fields. `active` adds squeezing
/// terms (`H2`, `L2`) and a non-trivial CCR transformation `F`.
pub fn slh(r: &mut ChaCha8Rng, n: usize, m: usize, active: bool) -> SlhModel {
    let s = unitary(r, m);
    let h1 = hermitian(r, n, 1.0);
    let l1 = cmat(r, m, n, 1.0);
    let (h2, l2, f) = if active {
        let f1 = eye(n) + cmat(r, n, n, 0.3);
        let f2 = cmat(r, n, n, 0.2);
        (symmetric(r, n, 0.3), cmat(r, m, n, 0.3), Some((f1, f2)))
    } else {
        (zeros(n, n), zeros(m, n), None)
    };
    SlhModel::new(s, h1, h2, l1, l2, f).expect("valid random SLH data")
}

/// Hurwitz matrix whose spectral abscissa lies in `[-2, -0.2]`.
pub fn stable_a(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let x = cmat(r, n, n, scale);
    let shift = linalg::spectral_abscissa(&x).unwrap() + r.random_range(0.2..2.0);
    x - eye(n) * c(shift, 0.0)
}

pub fn stable_system(r: &mut ChaCha8Rng, n: usize, p: usize, m: usize, strictly_proper: bool) -> StateSpace {
    let d = if strictly_proper { zeros(p, m) } else { cmat(r, p, m, 0.5) };
    StateSpace::new(stable_a(r, n, 1.0), cmat(r, n, m, 1.0), cmat(r, p, n, 1.0), d).unwrap()
}

/// Generic modified plant with `n` states, possibly unstable, with the
/// given literal channel widths and `D22 = 0` half the time. `A` is scaled
/// by `1/sqrt(n)` so its spectrum stays in a disc of fixed radius.
pub fn plant(r: &mut ChaCha8Rng, n: usize, (nr, nu, nz, ny): (usize, usize, usize, usize)) -> ModifiedPlant {
    let a = cmat(r, n, n, 1.0);
    let d22 = if r.random_bool(0.5) { zeros(ny, nu) } else { cmat(r, ny, nu, 0.2) };
    ModifiedPlant::from_blocks(
        a,
        cmat(r, n, nr, 1.0),
        cmat(r, n, nu, 1.0),
        cmat(r, nz, n, 1.0),
        cmat(r, ny, n, 1.0),
        cmat(r, nz, nr, 0.5),
        cmat(r, nz, nu, 0.5),
        cmat(r, ny, nr, 0.5),
        d22,
    )
    .unwrap()
}

/// Channel widths `(n_r, n_u, n_z, n_y)` for a plant with `n` states. The
/// loop is at least two channels wide beyond four states and three beyond
/// six, as for doubled-up plants: eigenvalue assignment through a single
/// input becomes too ill-conditioned for identity checks at 1e-8.
pub fn random_widths(r: &mut ChaCha8Rng, n: usize) -> (usize, usize, usize, usize) {
    let least = 1 + usize::from(n > 4) + usize::from(n > 6);
    let nu = r.random_range(least..=least + 1);
    let nr = r.random_range(nu..=nu + 1);
    let nz = r.random_range(1..=3);
    (nr, nu, nz, nu)
}
