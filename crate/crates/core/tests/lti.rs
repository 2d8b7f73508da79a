mod common;

use common::{two_mode_mimo, white};
use ctriv_core::closed_loop::{
    control_sensitivity, noiseless_input, simulate_closed_loop, DiscreteController,
};
use ctriv_core::lti::{
    filter_sampled, freq_response, simulate_additive, siso_tf_to_ss, zoh_discretize,
    zoh_equivalent_dtf, Domain,
};
use ctriv_core::{AdditiveModel, MatrixPoly, ScalarPoly, StateSpace, Subsystem};
use ctriv_oracle::{lsim_oracle, simulate_oracle, tf_filter_oracle, zoh_oracle};
use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stable denominator from real and complex-pair poles, unit constant.
fn random_den(rng: &mut ChaCha8Rng, order: usize) -> ScalarPoly {
    let mut roots = Vec::new();
    while roots.len() < order {
        if order - roots.len() >= 2 && rng.random_bool(0.5) {
            let re = -rng.random_range(0.2..5.0);
            let im = rng.random_range(0.5..10.0);
            roots.push(Complex::new(re, im));
            roots.push(Complex::new(re, -im));
        } else {
            roots.push(Complex::new(-rng.random_range(0.2..10.0), 0.0));
        }
    }
    ScalarPoly::from_roots_unit_constant(&roots).unwrap()
}

fn random_num(rng: &mut ChaCha8Rng, degree: usize) -> ScalarPoly {
    ScalarPoly::new(
        (0..=degree)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect::<Vec<_>>(),
    )
}

#[test]
fn zoh_matches_augmented_exponential_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let m = DMatrix::<f64>::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let a = &m - DMatrix::identity(3, 3) * (m.norm() + 0.5);
        let b = DMatrix::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
        let ct = StateSpace::new(
            a.clone(),
            b.clone(),
            DMatrix::zeros(1, 3),
            DMatrix::zeros(1, 1),
            Domain::Continuous,
        )
        .unwrap();
        let dt = zoh_discretize(&ct, 0.01).unwrap();
        let (phi, gam) = zoh_oracle(&a, &b, 0.01);
        assert!((dt.a() - phi).amax() < 1e-12);
        assert!((dt.b() - gam).amax() < 1e-12);
    }
}

#[test]
fn filter_sampled_matches_plain_recursion_and_independent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 0.05;
    for trial in 0..30 {
        let order = 1 + trial % 4;
        let den = random_den(&mut rng, order);
        let deg = rng.random_range(0..=order);
        let num = random_num(&mut rng, deg);
        let x = white(400, 2, trial as u64);
        let got = filter_sampled(&num, &den, &x, h).unwrap();
        let dt = zoh_discretize(&siso_tf_to_ss(&num, &den).unwrap(), h).unwrap();
        for ch in 0..2 {
            let col = x.column(ch).into_owned();
            let plain = lsim_oracle(&dt, &DMatrix::from_column_slice(400, 1, col.as_slice()));
            assert!((got.column(ch) - plain.column(0)).amax() < 1e-12);
            let indep = tf_filter_oracle(num.coeffs(), den.coeffs(), col.as_slice(), h);
            let scale = indep.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (k, v) in indep.iter().enumerate() {
                assert!(
                    (got[(k, ch)] - v).abs() < 1e-9 * scale,
                    "trial {trial} sample {k}"
                );
            }
        }
    }
}

#[test]
fn composition_in_one_realization_equals_product_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 0.02;
    for _ in 0..10 {
        let (dg, dh) = (random_den(&mut rng, 2), random_den(&mut rng, 1));
        let (ng, nh) = (random_num(&mut rng, 1), random_num(&mut rng, 1));
        // Series connection G then H as one continuous realization.
        let g = siso_tf_to_ss(&ng, &dg).unwrap();
        let hh = siso_tf_to_ss(&nh, &dh).unwrap();
        let (n1, n2) = (g.n_states(), hh.n_states());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(g.a());
        a.view_mut((n1, n1), (n2, n2)).copy_from(hh.a());
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(hh.b() * g.c()));
        let mut b = DMatrix::zeros(n1 + n2, 1);
        b.view_mut((0, 0), (n1, 1)).copy_from(g.b());
        b.view_mut((n1, 0), (n2, 1)).copy_from(&(hh.b() * g.d()));
        let mut c = DMatrix::zeros(1, n1 + n2);
        c.view_mut((0, 0), (1, n1)).copy_from(&(hh.d() * g.c()));
        c.view_mut((0, n1), (1, n2)).copy_from(hh.c());
        let series = StateSpace::new(a, b, c, hh.d() * g.d(), Domain::Continuous).unwrap();
        let x = white(300, 1, 7);
        let once = zoh_discretize(&series, h).unwrap().simulate(&x).unwrap();
        let product = filter_sampled(&nh.mul(&ng), &dh.mul(&dg), &x, h).unwrap();
        assert!((once - product).amax() < 1e-9);
    }
}

#[test]
fn discretized_dc_gain_matches_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let den = random_den(&mut rng, 3);
        let num = random_num(&mut rng, 2);
        let dt = zoh_discretize(&siso_tf_to_ss(&num, &den).unwrap(), 0.01).unwrap();
        let dc = dt.transfer_at(Complex::new(1.0, 0.0))[(0, 0)];
        assert!(
            (dc.re - num.coeff(0)).abs() < 1e-9 * (1.0 + num.coeff(0).abs()),
            "{dc} vs {}",
            num.coeff(0)
        );
        assert!(dc.im.abs() < 1e-9, "{dc}");
    }
}

#[test]
fn simulation_matches_entrywise_oracle() {
    let model = two_mode_mimo();
    let u = white(600, 2, 5);
    let y = simulate_additive(&model, &u, 0.05).unwrap();
    let want = simulate_oracle(&model, &u, 0.05);
    assert!((y - &want).amax() < 1e-10 * want.amax());
}

#[test]
fn frequency_response_matches_empirical_transfer() {
    // Periodic multisine, steady-state period, DFT at excited bins.
    let model = AdditiveModel::new(vec![Subsystem::new(
        ScalarPoly::denominator(&[0.2, 0.25]),
        MatrixPoly::new(vec![
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.1),
        ])
        .unwrap(),
    )
    .unwrap()])
    .unwrap();
    let h = 2e-4;
    let period = 40000;
    let bins = [3usize, 7, 12, 18, 25, 40];
    let n = period * 5;
    let w0 = 2.0 * std::f64::consts::PI / (period as f64 * h);
    let u = DMatrix::from_fn(n, 1, |k, _| {
        bins.iter()
            .enumerate()
            .map(|(i, &b)| (w0 * b as f64 * k as f64 * h + i as f64).cos())
            .sum::<f64>()
    });
    let y = simulate_additive(&model, &u, h).unwrap();
    let start = n - period;
    let dft = |x: &DMatrix<f64>, b: usize| {
        (0..period).fold(Complex::new(0.0, 0.0), |acc, k| {
            let ph = -2.0 * std::f64::consts::PI * (b * k) as f64 / period as f64;
            acc + Complex::new(ph.cos(), ph.sin()) * x[(start + k, 0)]
        })
    };
    for &b in &bins {
        let emp = dft(&y, b) / dft(&u, b);
        let g = freq_response(&model, &[w0 * b as f64])[0][(0, 0)];
        assert!((emp - g).norm() < 0.01 * g.norm(), "bin {b}: {emp} vs {g}");
    }
}

fn lead_controller(h: f64, gain: f64) -> DiscreteController {
    let parts: Vec<StateSpace> = (0..2)
        .map(|_| {
            siso_tf_to_ss(
                &ScalarPoly::new(vec![gain, gain]),
                &ScalarPoly::new(vec![1.0, 0.2]),
            )
            .unwrap()
        })
        .collect();
    DiscreteController::new(
        zoh_discretize(&StateSpace::block_diag(&parts).unwrap(), h).unwrap(),
        h,
    )
    .unwrap()
}

#[test]
fn loop_equation_holds_against_oracle_controller() {
    let h = 0.05;
    let model = two_mode_mimo();
    let ctrl = lead_controller(h, 0.5);
    let r = white(800, 2, 8);
    let v = white(800, 2, 9) * 0.1;
    let (u, y) = simulate_closed_loop(&model, &ctrl, &r, &v, h).unwrap();
    let u_check = lsim_oracle(ctrl.ss(), &(&r - &y));
    assert!((&u - u_check).amax() < 1e-10);
    let x = lsim_oracle(&zoh_equivalent_dtf(&model, h).unwrap(), &u);
    assert!((y - x - v).amax() < 1e-10);
}

#[test]
fn noiseless_input_reproduces_logged_input() {
    let h = 0.05;
    let model = two_mode_mimo();
    let ctrl = lead_controller(h, 0.8);
    let r = white(500, 2, 10);
    let (u, _) = simulate_closed_loop(&model, &ctrl, &r, &DMatrix::zeros(500, 2), h).unwrap();
    let z = noiseless_input(&model, &ctrl, &r, h).unwrap();
    assert!((u - z).amax() < 1e-12);
}

#[test]
fn control_sensitivity_is_permutation_invariant() {
    let h = 0.05;
    let model = two_mode_mimo();
    let ctrl = lead_controller(h, 0.5);
    let s1 = control_sensitivity(&model, &ctrl, h).unwrap();
    let s2 = control_sensitivity(&model.permuted(&[1, 0]), &ctrl, h).unwrap();
    for w in [0.1, 1.0, 3.0, 10.0] {
        assert!((s1.freq_response(w) - s2.freq_response(w)).norm() < 1e-10);
    }
}

#[test]
fn simulation_is_deterministic() {
    let model = two_mode_mimo();
    let u = white(300, 2, 11);
    assert_eq!(
        simulate_additive(&model, &u, 0.05).unwrap(),
        simulate_additive(&model, &u, 0.05).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flatten_roundtrip_is_exact(scale in 0.1f64..10.0, seed in 0u64..1000) {
        let model = common::perturb(&two_mode_mimo(), 0.3, seed);
        let beta = model.flatten() * scale;
        let back = model.structure().unflatten(&beta).unwrap();
        prop_assert_eq!(back.flatten(), beta);
    }

    #[test]
    fn simulation_is_linear_in_input(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
        let model = two_mode_mimo();
        let (u1, u2) = (white(200, 2, seed), white(200, 2, seed + 1));
        let y = simulate_additive(&model, &(&u1 * alpha + &u2 * beta), 0.05).unwrap();
        let want = simulate_additive(&model, &u1, 0.05).unwrap() * alpha
            + simulate_additive(&model, &u2, 0.05).unwrap() * beta;
        prop_assert!((y - &want).amax() < 1e-12 * (1.0 + want.amax()));
    }
}
