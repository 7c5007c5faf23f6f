mod common;

use coherent_youla::grid::FrequencyGrid;
use coherent_youla::linalg::{self, c, fro, zeros};
use coherent_youla::norms::{hinf_norm, HINF_REL_TOL};
use coherent_youla::physreal::{j_unitarity_residual, slh_to_statespace};
use coherent_youla::stabilization::{coprime_factorization, gains_for, GainPolicy};
use coherent_youla::statespace::{FreqResponse, StateSpace};
use coherent_youla::synthesis::{from_weighted_triple, WeightedTriple};
use coherent_youla::youla::{basis_values, hermitian_coords, ConstraintData, YoulaParameter};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(20), ..ProptestConfig::default() }
}

fn grid() -> FrequencyGrid {
    FrequencyGrid::symmetric_log(1e-2, 1e2, 25, true).unwrap()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn conjugate_is_an_involution_and_the_adjoint_on_the_axis(seed in any::<u64>(), n in 1usize..5, p in 1usize..4, m in 1usize..4) {
        let g = common::stable_system(&mut common::rng(seed), n, p, m, false);
        let gc = g.conjugate();
        prop_assert!(gc.conjugate().max_distance(&g, &grid(), Default::default()).unwrap() < 1e-12);
        for &w in grid().points() {
            prop_assert!(fro(&(gc.at(w).unwrap() - g.at(w).unwrap().adjoint())) < 1e-10);
        }
    }

    #[test]
    fn minimal_realization_keeps_the_response(seed in any::<u64>(), n in 1usize..4, extra in 1usize..3) {
        let mut r = common::rng(seed);
        let g = common::stable_system(&mut r, n, 2, 2, false);
        // append states that are unobservable through a zero output map
        let hidden = common::stable_system(&mut r, extra, 2, 2, true);
        let padded = StateSpace::new(
            linalg::block_diag(g.a(), hidden.a()),
            linalg::vcat(g.b(), hidden.b()),
            linalg::hcat(g.c(), &zeros(2, extra)),
            g.d().clone(),
        ).unwrap();
        let min = padded.minimal_realization(1e-10);
        prop_assert!(min.n_states() <= n);
        prop_assert!(min.max_distance(&g, &grid(), Default::default()).unwrap() < 1e-9);
    }

    #[test]
    fn hermitian_coordinates_are_an_isometry(seed in any::<u64>(), n in 1usize..5) {
        let h = common::hermitian(&mut common::rng(seed), n, 2.0);
        let v = hermitian_coords(&h);
        prop_assert_eq!(v.len(), n * n);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - fro(&h)).abs() < 1e-12 * (1.0 + norm));
    }

    #[test]
    fn youla_realization_matches_its_basis(seed in any::<u64>(), order in 0usize..4, beta in 0.2f64..5.0) {
        let mut r = common::rng(seed);
        let coeffs: Vec<_> = (0..=order).map(|_| common::cmat(&mut r, 2, 3, 1.0)).collect();
        let q = YoulaParameter::new(beta, coeffs.clone()).unwrap();
        prop_assert_eq!(&q.with_params(&q.to_params()), &q);
        let real = q.realization();
        for &w in grid().points() {
            let b = basis_values(beta, order, c(0.0, w));
            let direct = coeffs.iter().zip(&b).fold(zeros(2, 3), |acc, (ck, bk)| acc + ck * *bk);
            prop_assert!(fro(&(real.at(w).unwrap() - &direct)) < 1e-10 * (1.0 + fro(&direct)));
            prop_assert!(fro(&(q.at(w).unwrap() - &direct)) < 1e-12 * (1.0 + fro(&direct)));
        }
    }

    #[test]
    fn series_product_of_realizable_systems_is_realizable(seed in any::<u64>(), n1 in 1usize..3, n2 in 1usize..3, m in 1usize..3) {
        let mut r = common::rng(seed);
        let (a1, a2) = (r.random_bool(0.5), r.random_bool(0.5));
        let g1 = slh_to_statespace(&common::slh(&mut r, n1, m, a1)).unwrap();
        let g2 = slh_to_statespace(&common::slh(&mut r, n2, m, a2)).unwrap();
        let g = g2.series(&g1).unwrap();
        prop_assert!(j_unitarity_residual(&g, &grid(), m).unwrap() < 1e-8);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn hinf_norm_satisfies_the_triangle_inequality(seed in any::<u64>(), n1 in 1usize..4, n2 in 1usize..4) {
        let mut r = common::rng(seed);
        let g1 = common::stable_system(&mut r, n1, 2, 2, false);
        let g2 = common::stable_system(&mut r, n2, 2, 2, false);
        let h = |g: &StateSpace| hinf_norm(g, HINF_REL_TOL).unwrap().norm;
        let k = c(r.random_range(-3.0..3.0), 0.0);
        prop_assert!(h(&g1.add(&g2).unwrap()) <= (h(&g1) + h(&g2)) * (1.0 + 1e-6));
        prop_assert!((h(&g1.scale(k)) - k.norm() * h(&g1)).abs() <= 1e-6 * h(&g1) * k.norm() + 1e-12);
    }

    #[test]
    fn bezout_identity_holds_for_random_plants(seed in any::<u64>(), n in 1usize..7) {
        let mut r = common::rng(seed);
        let widths = common::random_widths(&mut r, n);
        let mp = common::plant(&mut r, n, widths);
        let cf = coprime_factorization(&mp, &gains_for(&mp, &GainPolicy::default()).unwrap()).unwrap();
        prop_assert!(cf.bezout_residual < 1e-8);
        prop_assert!(linalg::spectral_abscissa(cf.m.a()).unwrap() < 0.0);
        prop_assert!(linalg::spectral_abscissa(cf.m_hat.a()).unwrap() < 0.0);
    }

    #[test]
    fn h2_cost_is_convex_in_the_parameter(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let weighted = WeightedTriple {
            t0: common::stable_system(&mut r, 2, 1, 1, true),
            t1: common::stable_system(&mut r, 1, 1, 1, false),
            t2: common::stable_system(&mut r, 1, 1, 1, true),
        };
        let zero = StateSpace::zero(1, 1);
        let cd = ConstraintData::new(zero.clone(), zero.clone(), zero).unwrap();
        let sp = from_weighted_triple(weighted, cd, None).unwrap();
        let shape = YoulaParameter::zeros(1.0, 2, 1, 1).unwrap();
        let draw = |r: &mut rand_chacha::ChaCha8Rng| shape.with_params(&nalgebra::DVector::from_fn(shape.n_params(), |_, _| r.random_range(-2.0..2.0)));
        let (q1, q2) = (draw(&mut r), draw(&mut r));
        let mid = q1.axpy(0.5, &q2.axpy(-1.0, &q1));
        let (e1, e2, em) = (sp.cost(&q1).unwrap(), sp.cost(&q2).unwrap(), sp.cost(&mid).unwrap());
        prop_assert!(em <= 0.5 * (e1 + e2) + 1e-9 * (1.0 + e1 + e2));
    }
}
