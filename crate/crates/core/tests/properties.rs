mod common;

use casimir_core::dielectric::{
    kk_transform, DielectricModel, DrudeParams, OpticalTable, Oscillator,
};
use casimir_core::stack::{
    effective_deltas, effective_deltas_with, IntegrandPoint, LayerStack, StackPermittivity,
};
use proptest::prelude::*;

use common::{log_grid, transfer_matrix_deltas};

fn point() -> impl Strategy<Value = IntegrandPoint<f64>> {
    (
        11.0..17.0f64,
        0.0..4.0f64,
        -8.0..-6.0f64,
        prop_oneof![Just(1.0), 1.0..3.0f64],
    )
        .prop_map(|(xi, p, d, e3)| {
            IntegrandPoint::new(10f64.powf(xi), 10f64.powf(p), 10f64.powf(d), e3).unwrap()
        })
}

fn permittivities(max_films: usize) -> impl Strategy<Value = StackPermittivity<f64>> {
    (
        0.0..6.0f64,
        prop::collection::vec((0.0..6.0f64, -10.0..-6.0f64), 0..=max_films),
    )
        .prop_map(|(s, films)| StackPermittivity {
            substrate: 10f64.powf(s),
            films: films
                .into_iter()
                .map(|(e, t)| (10f64.powf(e), 10f64.powf(t)))
                .collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reflection_amplitudes_are_bounded(eps in permittivities(3), pt in point()) {
        let d = effective_deltas_with(&eps, &pt).unwrap();
        prop_assert!(d.delta1.abs() <= 1.0 + 1e-15);
        prop_assert!(d.delta2.abs() <= 1.0 + 1e-15);
    }

    #[test]
    fn matches_transfer_matrix(eps in permittivities(4), pt in point()) {
        let a = effective_deltas_with(&eps, &pt).unwrap();
        let b = transfer_matrix_deltas(&eps, &pt);
        prop_assert!((a.delta1 - b.delta1).abs() < 1e-10, "{a:?} vs {b:?}");
        prop_assert!((a.delta2 - b.delta2).abs() < 1e-10, "{a:?} vs {b:?}");
    }

    #[test]
    fn splitting_a_film_changes_nothing(
        sub in 0.0..5.0f64,
        film in 0.0..5.0f64,
        t in -9.0..-6.0f64,
        frac in 0.05..0.95f64,
        pt in point(),
    ) {
        let (sub, film, t) = (10f64.powf(sub), 10f64.powf(film), 10f64.powf(t));
        let whole = StackPermittivity { substrate: sub, films: vec![(film, t)] };
        let split = StackPermittivity { substrate: sub, films: vec![(film, t * frac), (film, t * (1.0 - frac))] };
        let a = effective_deltas_with(&whole, &pt).unwrap();
        let b = effective_deltas_with(&split, &pt).unwrap();
        prop_assert!((a.delta1 - b.delta1).abs() < 1e-12);
        prop_assert!((a.delta2 - b.delta2).abs() < 1e-12);
    }

    #[test]
    fn interface_is_antisymmetric(e1 in 0.0..6.0f64, e2 in 0.0..6.0f64, pt in point()) {
        let (e1, e2) = (10f64.powf(e1), 10f64.powf(e2));
        let pt = IntegrandPoint { eps3: 1.0, ..pt };
        let s = |e: f64| casimir_core::stack::s_factor(e, 1.0, pt.p).unwrap();
        let a = casimir_core::stack::fresnel_deltas(e1, s(e1), e2, s(e2));
        let b = casimir_core::stack::fresnel_deltas(e2, s(e2), e1, s(e1));
        prop_assert!((a.delta1 + b.delta1).abs() < 1e-15);
        prop_assert!((a.delta2 + b.delta2).abs() < 1e-15);
    }

    #[test]
    fn imaginary_axis_permittivity_decreases(
        wp in 14.0..17.0f64,
        g in 12.0..15.0f64,
        xi in 10.0..18.0f64,
        step in 1.01..10.0f64,
    ) {
        let m = DielectricModel::drude(10f64.powf(wp), 10f64.powf(g)).unwrap();
        let xi = 10f64.powf(xi);
        let a = m.eps_at_imaginary(xi).unwrap();
        let b = m.eps_at_imaginary(xi * step).unwrap();
        prop_assert!(a >= b && b >= 1.0);
    }

    #[test]
    fn bare_stack_deltas_are_consistent(eps in 0.0..6.0f64, pt in point()) {
        let stack = LayerStack::bare(DielectricModel::constant(10f64.powf(eps)).unwrap());
        let direct = effective_deltas(&stack, &pt).unwrap();
        let frozen = StackPermittivity { substrate: 10f64.powf(eps), films: vec![] };
        prop_assert_eq!(direct, effective_deltas_with(&frozen, &pt).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kk_reproduces_drude(wp in 15.0..16.5f64, g in 12.5..14.5f64, xi in 13.0..17.0f64) {
        let drude = DrudeParams::new(10f64.powf(wp), 10f64.powf(g)).unwrap();
        let rows = log_grid(1e7, 1e21, 6000).into_iter().map(|w| (w, drude.im_eps_real_axis(w))).collect();
        let table = OpticalTable::new(rows).unwrap();
        let xi = 10f64.powf(xi);
        let exact = drude.eps_at_imaginary(xi).unwrap();
        prop_assert!((kk_transform(&table, xi).unwrap() / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kk_reproduces_lorentz(c in 0.1..5.0f64, w0 in 14.0..16.5f64, width in 0.02..0.5f64, xi in 13.0..17.0f64) {
        let w0 = 10f64.powf(w0);
        let osc = Oscillator::new(c, w0, width * w0).unwrap();
        // about 20 samples across the resonance full width
        let n = ((1e21f64 / 1e9).ln() * 20.0 / width).ceil() as usize;
        let rows = log_grid(1e9, 1e21, n).into_iter().map(|w| (w, osc.im_eps_real_axis(w))).collect();
        let table = OpticalTable::new(rows).unwrap();
        let xi = 10f64.powf(xi);
        let exact = 1.0 + c * w0 * w0 / (w0 * w0 + xi * xi + width * w0 * xi);
        prop_assert!((kk_transform(&table, xi).unwrap() / exact - 1.0).abs() < 1e-3);
    }
}
