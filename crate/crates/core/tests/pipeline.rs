mod common;

use casimir_core::calibration::{analyze, fit_alpha_curve, fit_parabola, SweepPoint, SweepRecord};
use casimir_core::constants::VACUUM_PERMITTIVITY;
use casimir_core::force_law::{ForceInterpolant, IdealMetal, LifshitzLaw};
use casimir_core::lifshitz::QuadratureConfig;
use casimir_core::mtb_sim::{simulate_dataset, MtbParams, SweepPlan};
use casimir_core::roughness::{corrected_force, histogram_from_heightmap, HeightMap};
use casimir_core::{DielectricModel64, LayerStack64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::*;

fn quiet() -> MtbParams<f64> {
    MtbParams {
        noise_sigma_a: 0.0,
        ..Default::default()
    }
}

fn plan(seed: u64) -> SweepPlan<f64> {
    let d_pz = (0..12).map(|i| 35e-9 * i as f64).collect();
    SweepPlan::centered(d_pz, -0.2, 0.3, 21, seed)
}

#[test]
fn closure_with_thin_film_lifshitz_curve() {
    let law = LifshitzLaw {
        sphere: LayerStack64::bare(polystyrene())
            .with_film(palladium(), 92e-10)
            .unwrap(),
        plate: LayerStack64::bare(gold()),
        gap: DielectricModel64::Vacuum,
        radius: 100e-6,
        quad: QuadratureConfig::default(),
    };
    let spline = law.tabulate(&log_grid(30e-9, 1e-6, 40)).unwrap();
    let p = quiet();
    let r = analyze(&simulate_dataset(&p, &plan(0), &spline).unwrap(), p.radius).unwrap();
    assert!((r.d0 / p.d0_true - 1.0).abs() < 1e-10);
    for f in &r.forces {
        let truth = spline.eval(f.d).unwrap().abs();
        assert!((f.f_c / truth - 1.0).abs() < 1e-9, "{} vs {truth}", f.f_c);
    }
}

#[test]
fn shifting_bias_and_residual_voltage_together_only_moves_x0() {
    let p = quiet();
    let law = IdealMetal { radius: p.radius };
    let a = analyze(&simulate_dataset(&p, &plan(0), &law).unwrap(), p.radius).unwrap();
    let shift = 0.15;
    let mut shifted_plan = plan(0);
    for v in &mut shifted_plan.v_bias_values {
        *v += shift;
    }
    let q = MtbParams {
        v0_true: p.v0_true - shift,
        ..p
    };
    let b = analyze(
        &simulate_dataset(&q, &shifted_plan, &law).unwrap(),
        p.radius,
    )
    .unwrap();
    for (x, y) in a.forces.iter().zip(&b.forces) {
        assert!((x.f_c / y.f_c - 1.0).abs() < 1e-9);
    }
    assert!((b.v0_per_sweep[0].v0 - (p.v0_true - shift)).abs() < 1e-9);
}

#[test]
fn sweep_order_does_not_matter() {
    let p = MtbParams::<f64>::default();
    let law = IdealMetal { radius: p.radius };
    let data = simulate_dataset(&p, &plan(3), &law).unwrap();
    let mut reversed = data.clone();
    reversed.reverse();
    let a = analyze(&data, p.radius).unwrap();
    let b = analyze(&reversed, p.radius).unwrap();
    for (x, y) in a.forces.iter().zip(&b.forces) {
        assert!((x.f_c - y.f_c).abs() <= 1e-12 * x.f_c.abs() + 1e-24);
        assert!((x.d - y.d).abs() < 1e-15);
    }
}

#[test]
fn plate_rotation_biases_short_distances() {
    let p = MtbParams {
        plate_rotation: true,
        ..quiet()
    };
    let law = IdealMetal { radius: p.radius };
    let d_pz = (0..10).map(|i| 40e-9 * i as f64).collect();
    let plan = SweepPlan::centered(d_pz, -0.2, 0.1, 21, 0);
    let r = analyze(&simulate_dataset(&p, &plan, &law).unwrap(), p.radius).unwrap();
    let rel = |f: &casimir_core::calibration::ForcePoint<f64>| {
        f.f_c / casimir_core::lifshitz::ideal_metal_force(p.radius, f.d).abs() - 1.0
    };
    // analyzed forces fall below the injected law, more so at short range
    let devs: Vec<f64> = r.forces.iter().map(rel).collect();
    assert!(devs.iter().all(|&x| x < 0.0), "{devs:?}");
    assert!(devs.windows(2).all(|w| w[0] < w[1]), "{devs:?}");
    assert!(devs[0] < 3.0 * devs[devs.len() - 1], "{devs:?}");
    assert!(r.d0 < p.d0_true);
}

#[test]
fn noisy_vertex_is_unbiased() {
    let noise = Normal::new(0.0, 5e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sum = 0.0;
    let runs = 100;
    for _ in 0..runs {
        let pts = (0..7)
            .map(|i| {
                let v = -0.5 + 0.1 * i as f64;
                SweepPoint {
                    v_bias: v,
                    a: 3.0 * (v + 0.2).powi(2) + 5.0 + noise.sample(&mut rng),
                }
            })
            .collect();
        sum += fit_parabola(&SweepRecord::new(0.0, pts).unwrap())
            .unwrap()
            .x0;
    }
    assert!((sum / runs as f64 - 0.2).abs() < 2e-3);
}

#[test]
fn alpha_curve_with_one_percent_noise() {
    let k = 1e9 * VACUUM_PERMITTIVITY * std::f64::consts::PI * 1e-4;
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d0s: Vec<f64> = (0..100)
        .map(|_| {
            let pts: Vec<(f64, f64)> = (0..7)
                .map(|i| {
                    let d = 100e-9 + 50e-9 * i as f64;
                    (d, k / (500e-9 - d) * (1.0 + noise.sample(&mut rng)))
                })
                .collect();
            fit_alpha_curve(&pts, 1e-4).unwrap().d0
        })
        .collect();
    let mean = d0s.iter().sum::<f64>() / 100.0;
    let sd = (d0s.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
    assert!((mean - 500e-9).abs() < 2e-9 && sd < 2e-9, "{mean} +/- {sd}");
}

fn gaussian_map(sigma: f64, n: usize, seed: u64) -> HeightMap<f64> {
    let g = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    HeightMap::new((0..n * n).map(|_| g.sample(&mut rng)).collect(), n, 20e-9).unwrap()
}

#[test]
fn gaussian_map_variance() {
    let p = histogram_from_heightmap(&gaussian_map(5e-9, 512, 1), 32).unwrap();
    assert!(
        (p.variance() / 25e-18 - 1.0).abs() < 0.05,
        "{}",
        p.variance()
    );
}

#[test]
fn bin_refinement_is_stable() {
    let map = gaussian_map(3e-9, 256, 2);
    let coarse = histogram_from_heightmap(&map, 16).unwrap();
    let fine = histogram_from_heightmap(&map, 64).unwrap();
    let base = |d: f64| -1e-31 / (d * d * d);
    for d in [60e-9, 100e-9, 200e-9] {
        let a = corrected_force(&base, &coarse, &coarse, d).unwrap();
        let b = corrected_force(&base, &fine, &fine, d).unwrap();
        assert!((a / b - 1.0).abs() < 0.01);
    }
}

#[test]
fn correction_grows_at_short_range() {
    let p = histogram_from_heightmap(&gaussian_map(4e-9, 128, 3), 32).unwrap();
    let spline = ForceInterpolant::new(
        log_grid(20e-9, 1e-6, 60)
            .into_iter()
            .map(|d| (d, casimir_core::lifshitz::ideal_metal_force(1e-4, d)))
            .collect(),
    )
    .unwrap();
    let factor = |d: f64| corrected_force(&spline, &p, &p, d).unwrap() / spline.eval(d).unwrap();
    let (f60, f100, f300) = (factor(60e-9), factor(100e-9), factor(300e-9));
    assert!(f60 > f100 && f100 > f300 && f300 > 1.0);
}
