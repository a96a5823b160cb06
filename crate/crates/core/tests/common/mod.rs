#![allow(dead_code)]

use casimir_core::constants::SPEED_OF_LIGHT;
use casimir_core::dielectric::{DielectricModel, Oscillator, OscillatorParams};
use casimir_core::stack::{DeltaPair, IntegrandPoint, StackPermittivity};

/// Pd-like Drude metal.
pub fn palladium() -> DielectricModel<f64> {
    DielectricModel::drude(8.28e15, 2.34e13).unwrap()
}

/// Au-like Drude metal.
pub fn gold() -> DielectricModel<f64> {
    DielectricModel::drude(1.37e16, 5.32e13).unwrap()
}

/// Two-oscillator transparent polymer.
pub fn polystyrene() -> DielectricModel<f64> {
    DielectricModel::Oscillators(
        OscillatorParams::new(vec![
            Oscillator::new(1.45, 1.4e16, 0.0).unwrap(),
            Oscillator::new(0.04, 5.6e14, 0.0).unwrap(),
        ])
        .unwrap(),
    )
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Reflection amplitudes from characteristic matrices.
///
/// Inside each layer the field is `f = A cosh κz + B sinh κz` with
/// `κ = sqrt(k∥² + ε ξ²/c²)`, and `(f, w f')` is continuous, `w = 1` (TE)
/// or `1/ε` (TM). Starting from the decaying substrate solution and
/// carrying `(f, g)` up to the gap gives `Δ = (g − κ₃w₃f)/(g + κ₃w₃f)`.
/// Matrices are scaled by `e^{−κt}` to stay finite.
pub fn transfer_matrix_deltas(
    eps: &StackPermittivity<f64>,
    pt: &IntegrandPoint<f64>,
) -> DeltaPair<f64> {
    let c = SPEED_OF_LIGHT;
    let k2 = (pt.p * pt.p - 1.0) * pt.eps3 * pt.xi * pt.xi / (c * c);
    let kappa = |e: f64| (k2 + e * pt.xi * pt.xi / (c * c)).sqrt();
    let solve = |tm: bool| {
        let w = |e: f64| if tm { 1.0 / e } else { 1.0 };
        let (mut f, mut g) = (1.0, kappa(eps.substrate) * w(eps.substrate));
        for &(e, t) in &eps.films {
            let k = kappa(e);
            let kw = k * w(e);
            let ex = (-2.0 * k * t).exp();
            let ch = 0.5 * (1.0 + ex);
            let sh = 0.5 * (1.0 - ex);
            let (nf, ng) = (ch * f + sh / kw * g, kw * sh * f + ch * g);
            let norm = nf.abs().max(ng.abs());
            f = nf / norm;
            g = ng / norm;
        }
        let k3w3 = kappa(pt.eps3) * w(pt.eps3);
        (g - k3w3 * f) / (g + k3w3 * f)
    };
    DeltaPair {
        delta1: solve(true),
        delta2: solve(false),
    }
}

/// Nested closed-form composition exactly as printed for one or two films:
/// `(Δ₃₅ + Δ*₅₁ e₅)/(1 + Δ₃₅ Δ*₅₁ e₅)`, `Δ*₅₁ = (Δ₅₄ + Δ₄₁ e₄)/(1 + Δ₅₄ Δ₄₁ e₄)`.
pub fn printed_form_deltas(
    eps: &StackPermittivity<f64>,
    pt: &IntegrandPoint<f64>,
) -> DeltaPair<f64> {
    let p = pt.p;
    let s = |e: f64| (p * p - 1.0 + e / pt.eps3).sqrt();
    let delta = |ej: f64, ek: f64| {
        let (sj, sk) = (s(ej), s(ek));
        (
            (sk * ej - sj * ek) / (sk * ej + sj * ek),
            (sk - sj) / (sk + sj),
        )
    };
    let x = pt.x();
    let expo = |e: f64, t: f64| (-(x * t * s(e) / (p * pt.d))).exp();
    let compose = |a: f64, b: f64, e: f64| (a + b * e) / (1.0 + a * b * e);
    let e3 = pt.eps3;
    let e1 = eps.substrate;
    match eps.films.as_slice() {
        [] => {
            let (a, b) = delta(e3, e1);
            DeltaPair {
                delta1: a,
                delta2: b,
            }
        }
        [(e5, t5)] => {
            let d35 = delta(e3, *e5);
            let d51 = delta(*e5, e1);
            let ex = expo(*e5, *t5);
            DeltaPair {
                delta1: compose(d35.0, d51.0, ex),
                delta2: compose(d35.1, d51.1, ex),
            }
        }
        [(e4, t4), (e5, t5)] => {
            let d35 = delta(e3, *e5);
            let d54 = delta(*e5, *e4);
            let d41 = delta(*e4, e1);
            let (x4, x5) = (expo(*e4, *t4), expo(*e5, *t5));
            let star = (compose(d54.0, d41.0, x4), compose(d54.1, d41.1, x4));
            DeltaPair {
                delta1: compose(d35.0, star.0, x5),
                delta2: compose(d35.1, star.1, x5),
            }
        }
        _ => panic!("printed form covers at most two films"),
    }
}
