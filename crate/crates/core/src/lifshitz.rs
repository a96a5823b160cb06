//! Sphere-plate Casimir force in the proximity form of the Lifshitz formula.
//!
//! With `ζ = 2dξ/c` and `x = ζ p √ε₃` the double integral becomes
//!
//! ```text
//! F = ħ c R / (16 π d³) ∫₀^∞ dζ ∫_{ζ√ε₃}^∞ dx  x { ln(1 − Δ⁽¹⁾₃₁Δ⁽¹⁾₃₂ e⁻ˣ) + ln(1 − Δ⁽²⁾₃₁Δ⁽²⁾₃₂ e⁻ˣ) }
//! ```
//!
//! so the fast `e⁻ˣ` decay sits in the inner variable. Both ranges are cut
//! at `x_max`. The result is negative for attraction.

use std::cell::{Cell, RefCell};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::dielectric::DielectricModel;
use crate::error::{Error, Result};
use crate::quadrature::{
    adaptive_gauss_legendre, adaptive_gauss_legendre_segments, tanh_sinh, Estimate, GaussLegendre,
    Tolerance,
};
use crate::scalar::Real;
use crate::stack::{effective_deltas_with, IntegrandPoint, LayerStack, StackPermittivity};

/// Sphere radius and closest surface separation, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry<F> {
    pub radius: F,
    pub separation: F,
}

impl<F: Real> Geometry<F> {
    /// Ratio `d/R` above which the proximity form is flagged.
    pub const PROXIMITY_WARN_RATIO: f64 = 0.1;

    pub fn new(radius: F, separation: F) -> Result<Self> {
        if !(radius > F::zero()) || !radius.is_finite() {
            return Err(Error::Domain(format!(
                "sphere radius must be > 0, got {radius}"
            )));
        }
        if !(separation > F::zero()) || !separation.is_finite() {
            return Err(Error::Domain(format!(
                "separation must be > 0, got {separation}"
            )));
        }
        if separation / radius > F::lit(Self::PROXIMITY_WARN_RATIO) {
            log::warn!(
                "d/R = {:.3} exceeds {}: the proximity sphere-plate form is unreliable here",
                (separation / radius).as_f64(),
                Self::PROXIMITY_WARN_RATIO
            );
        }
        Ok(Self { radius, separation })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Nested adaptive Gauss-Legendre after mapping both variables through
    /// `w = e^(−v)`.
    #[default]
    GaussLegendreMapped,
    /// Nested tanh-sinh on the unmapped variables.
    TanhSinh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig<F> {
    pub rel_tol: F,
    /// Frequency cutoff, rad/s. `None` means `1e4 · c / (2d)`.
    pub xi_max: Option<F>,
    /// Cutoff on the dimensionless `x`.
    pub x_max: F,
    pub scheme: Scheme,
    /// Budget of integrand evaluations per force value.
    pub max_evals: usize,
}

impl<F: Real> Default for QuadratureConfig<F> {
    fn default() -> Self {
        Self {
            rel_tol: F::lit(1e-6),
            xi_max: None,
            x_max: F::lit(50.0),
            scheme: Scheme::GaussLegendreMapped,
            max_evals: 20_000_000,
        }
    }
}

impl<F: Real> QuadratureConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > F::zero() && self.rel_tol < F::lit(1e-2)) {
            return Err(Error::InvalidConfig(format!(
                "rel_tol must lie in (0, 1e-2), got {}",
                self.rel_tol
            )));
        }
        if !(self.x_max >= F::lit(30.0)) {
            return Err(Error::InvalidConfig(format!(
                "x_max must be >= 30, got {}",
                self.x_max
            )));
        }
        if let Some(xi) = self.xi_max {
            if !(xi > F::zero()) {
                return Err(Error::InvalidConfig(format!(
                    "xi_max must be > 0, got {xi}"
                )));
            }
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidConfig("max_evals must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceResult<F> {
    /// Force in newtons, negative when attractive.
    pub force: F,
    /// Estimated relative error.
    pub rel_err: F,
    pub evals: usize,
    /// Quadrature nodes where a logarithm came out positive (a repulsive
    /// contribution). Zero whenever both stacks are denser than the gap.
    pub repulsive_nodes: usize,
}

/// Closed-form perfect-conductor sphere-plate force magnitude,
/// `π³ ħ c R / (360 d³)`.
pub fn ideal_metal_force<F: Real>(radius: F, separation: F) -> F {
    let k = PhysicalConstants::<F>::codata();
    let pi = F::PI();
    pi * pi * pi * k.hbar * k.c * radius / (F::lit(360.0) * separation * separation * separation)
}

const RULE_POINTS: usize = 7;
/// Smallest ζ handed to the material models. The ζ-integrand is continuous
/// at zero, so evaluating nodes below this at the floor changes the result by
/// O(1e-12) while keeping Drude permittivities finite.
const ZETA_FLOOR: f64 = 1e-12;
const TANH_SINH_LEVELS: usize = 12;

struct Integrand<'a, F> {
    sphere: &'a LayerStack<F>,
    plate: &'a LayerStack<F>,
    gap: &'a DielectricModel<F>,
    d: F,
    c: F,
    repulsive: Cell<usize>,
    evals: Cell<usize>,
    failure: RefCell<Option<Error>>,
    inner_abs_err: Cell<F>,
    inner_magnitude: Cell<F>,
}

struct FrozenFrequency<F> {
    xi: F,
    eps3: F,
    sqrt_eps3: F,
    sphere: StackPermittivity<F>,
    plate: StackPermittivity<F>,
}

impl<F: Real> FrozenFrequency<F> {
    /// Break points for the inner range `[x0, x_max]`: the `x = ζ√ε_k` where
    /// `p² ≈ ε_k/ε₃` and medium `k` turns from dense to gap-like, plus
    /// decades of `x` below one, where the integrand varies on a log scale.
    fn transitions(&self, zeta: F, x0: F, x_max: F) -> Vec<F> {
        let mut points = vec![x0, x_max];
        let ten = F::lit(10.0);
        let mut decade = F::one();
        while decade > x0 * ten {
            points.push(decade);
            decade = decade / ten;
        }
        let all = std::iter::once(self.sphere.substrate)
            .chain(self.sphere.films.iter().map(|f| f.0))
            .chain(std::iter::once(self.plate.substrate))
            .chain(self.plate.films.iter().map(|f| f.0));
        for eps in all {
            let x = zeta * eps.sqrt();
            if x > x0 && x < x_max {
                points.push(x);
            }
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        points.dedup();
        points
    }
}

impl<F: Real> Integrand<'_, F> {
    fn fail(&self, e: Error) {
        let mut slot = self.failure.borrow_mut();
        if slot.is_none() {
            *slot = Some(e);
        }
    }

    fn freeze(&self, zeta: F) -> Result<FrozenFrequency<F>> {
        let xi = self.c * zeta / (F::lit(2.0) * self.d);
        let eps3 = self.gap.eps_at_imaginary(xi)?;
        Ok(FrozenFrequency {
            xi,
            eps3,
            sqrt_eps3: eps3.sqrt(),
            sphere: self.sphere.permittivity_at(xi)?,
            plate: self.plate.permittivity_at(xi)?,
        })
    }

    /// `x · { ln(1 − Δ⁽¹⁾Δ⁽¹⁾e⁻ˣ) + ln(1 − Δ⁽²⁾Δ⁽²⁾e⁻ˣ) }` at fixed frequency.
    fn log_terms(&self, frozen: &FrozenFrequency<F>, zeta: F, x: F) -> F {
        self.evals.set(self.evals.get() + 1);
        let p = (x / (zeta * frozen.sqrt_eps3)).max(F::one());
        let point = IntegrandPoint {
            xi: frozen.xi,
            p,
            d: self.d,
            eps3: frozen.eps3,
        };
        let deltas = effective_deltas_with(&frozen.sphere, &point)
            .and_then(|s| Ok((s, effective_deltas_with(&frozen.plate, &point)?)));
        let (s, pl) = match deltas {
            Ok(v) => v,
            Err(e) => {
                self.fail(e);
                return F::zero();
            }
        };
        let decay = (-x).exp();
        let tm = (-(s.delta1 * pl.delta1 * decay)).ln_1p();
        let te = (-(s.delta2 * pl.delta2 * decay)).ln_1p();
        let logs = tm + te;
        if tm > F::zero() || te > F::zero() {
            self.repulsive.set(self.repulsive.get() + 1);
        }
        x * logs
    }

    fn remaining(&self, max_evals: usize) -> usize {
        max_evals.saturating_sub(self.evals.get())
    }

    fn record_inner(&self, est: &Estimate<F>) {
        self.inner_abs_err
            .set(self.inner_abs_err.get() + est.abs_err);
        self.inner_magnitude
            .set(self.inner_magnitude.get() + est.value.abs());
    }

    /// Error of the inner integrals relative to their summed magnitude.
    fn inner_rel_err(&self) -> F {
        let m = self.inner_magnitude.get();
        if m > F::zero() {
            self.inner_abs_err.get() / m
        } else {
            F::zero()
        }
    }
}

/// Sphere-plate Casimir force between two stacks across `gap`.
pub fn force_sphere_plate<F: Real>(
    sphere: &LayerStack<F>,
    plate: &LayerStack<F>,
    gap: &DielectricModel<F>,
    geom: &Geometry<F>,
    quad: &QuadratureConfig<F>,
) -> Result<ForceResult<F>> {
    quad.validate()?;
    let k = PhysicalConstants::<F>::codata();
    let d = geom.separation;
    let two = F::lit(2.0);
    let xi_max = quad.xi_max.unwrap_or_else(|| F::lit(1e4) * k.c / (two * d));
    let zeta_max = (two * d * xi_max / k.c).min(quad.x_max);
    let x_max = quad.x_max;

    let integrand = Integrand {
        sphere,
        plate,
        gap,
        d,
        c: k.c,
        repulsive: Cell::new(0),
        evals: Cell::new(0),
        failure: RefCell::new(None),
        inner_abs_err: Cell::new(F::zero()),
        inner_magnitude: Cell::new(F::zero()),
    };
    let inner_tol = Cell::new(Tolerance::relative(quad.rel_tol / F::lit(10.0)));
    let outer_tol = Tolerance::relative(quad.rel_tol);
    let rule = GaussLegendre::<F>::new(RULE_POINTS);

    // ∫ dx over [ζ√ε₃, x_max] at fixed ζ.
    let inner = |zeta: F| -> F {
        if !(zeta > F::zero()) || integrand.failure.borrow().is_some() {
            return F::zero();
        }
        let zeta = zeta.max(F::lit(ZETA_FLOOR));
        let frozen = match integrand.freeze(zeta) {
            Ok(f) => f,
            Err(e) => {
                integrand.fail(e);
                return F::zero();
            }
        };
        let x0 = zeta * frozen.sqrt_eps3;
        if x0 >= x_max {
            return F::zero();
        }
        let breaks = frozen.transitions(zeta, x0, x_max);
        let budget = integrand.remaining(quad.max_evals);
        let est = match quad.scheme {
            Scheme::GaussLegendreMapped => {
                let w_breaks: Vec<F> = breaks.iter().rev().map(|&x| (x0 - x).exp()).collect();
                adaptive_gauss_legendre_segments(
                    &rule,
                    |w: F| {
                        let x = x0 - w.ln();
                        integrand.log_terms(&frozen, zeta, x) / w
                    },
                    &w_breaks,
                    inner_tol.get(),
                    budget,
                )
            }
            Scheme::TanhSinh => breaks.windows(2).try_fold(
                Estimate {
                    value: F::zero(),
                    abs_err: F::zero(),
                    evals: 0,
                },
                |acc, piece| {
                    let est = tanh_sinh(
                        |x: F| integrand.log_terms(&frozen, zeta, x),
                        piece[0],
                        piece[1],
                        inner_tol.get(),
                        TANH_SINH_LEVELS,
                        integrand.remaining(quad.max_evals),
                    )?;
                    Ok(Estimate {
                        value: acc.value + est.value,
                        abs_err: acc.abs_err + est.abs_err,
                        evals: acc.evals + est.evals,
                    })
                },
            ),
        };
        match est {
            Ok(est) => {
                integrand.record_inner(&est);
                est.value
            }
            Err(e) => {
                integrand.fail(e);
                F::zero()
            }
        }
    };

    // Inner integrals far out in the tails only need to be accurate relative
    // to the bulk of the ζ-integrand, so an absolute floor is taken from a
    // reference value near the peak.
    let reference = inner(F::lit(0.5).min(zeta_max / two)).abs();
    inner_tol.set(Tolerance {
        rel: quad.rel_tol / F::lit(10.0),
        abs: quad.rel_tol * reference / F::lit(1000.0),
    });

    let outer = match quad.scheme {
        Scheme::GaussLegendreMapped => adaptive_gauss_legendre(
            &rule,
            |w: F| inner(-w.ln()) / w,
            (-zeta_max).exp(),
            F::one(),
            outer_tol,
            quad.max_evals,
        ),
        Scheme::TanhSinh => tanh_sinh(
            inner,
            F::zero(),
            zeta_max,
            outer_tol,
            TANH_SINH_LEVELS,
            quad.max_evals,
        ),
    };
    if let Some(e) = integrand.failure.take() {
        return Err(e);
    }
    let prefactor = k.hbar * k.c * geom.radius / (F::lit(16.0) * F::PI() * d * d * d);
    let outer = outer.map_err(|e| match e {
        Error::NonConvergence { value, abs_err, .. } => Error::NonConvergence {
            value: value * prefactor.as_f64(),
            abs_err: abs_err * prefactor.as_f64(),
            evals: integrand.evals.get(),
        },
        other => other,
    })?;
    let rel_err = if outer.value == F::zero() {
        F::zero()
    } else {
        outer.abs_err / outer.value.abs() + integrand.inner_rel_err()
    };
    Ok(ForceResult {
        force: prefactor * outer.value,
        rel_err,
        evals: integrand.evals.get(),
        repulsive_nodes: integrand.repulsive.get(),
    })
}

/// Force at each separation. Points are evaluated in parallel and returned
/// in input order.
pub fn force_curve<F: Real>(
    sphere: &LayerStack<F>,
    plate: &LayerStack<F>,
    gap: &DielectricModel<F>,
    radius: F,
    separations: &[F],
    quad: &QuadratureConfig<F>,
) -> Result<Vec<(F, ForceResult<F>)>> {
    for (i, &d) in separations.iter().enumerate() {
        if !(d > F::zero()) {
            return Err(Error::Domain(format!(
                "separation {i} must be > 0, got {d}"
            )));
        }
        if i > 0 && d < separations[i - 1] {
            return Err(Error::Domain("separations must be sorted ascending".into()));
        }
    }
    separations
        .par_iter()
        .enumerate()
        .map(|(index, &d)| {
            Geometry::new(radius, d)
                .and_then(|g| force_sphere_plate(sphere, plate, gap, &g, quad))
                .map(|r| (d, r))
                .map_err(|e| Error::CurvePoint {
                    index,
                    separation: d.as_f64(),
                    source: Box::new(e),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn metal() -> LayerStack<f64> {
        LayerStack::bare(DielectricModel::constant(1e9).unwrap())
    }

    #[test]
    fn ideal_metal_closed_form() {
        let f = ideal_metal_force(100e-6, 100e-9);
        assert_relative_eq!(f, 2.723e-10, max_relative = 2e-4);
        assert_relative_eq!(
            ideal_metal_force(100e-6, 200e-9),
            f / 8.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            ideal_metal_force(200e-6, 100e-9),
            f * 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn vacuum_everywhere_gives_zero() {
        let vac = LayerStack::bare(DielectricModel::Vacuum);
        let g = Geometry::new(100e-6, 100e-9).unwrap();
        let r = force_sphere_plate(
            &vac,
            &vac,
            &DielectricModel::Vacuum,
            &g,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r.force, 0.0);
    }

    #[test]
    fn ideal_metal_proxy_matches_closed_form() {
        let g = Geometry::new(100e-6, 100e-9).unwrap();
        let r = force_sphere_plate(
            &metal(),
            &metal(),
            &DielectricModel::Vacuum,
            &g,
            &Default::default(),
        )
        .unwrap();
        assert!(r.force < 0.0);
        assert_relative_eq!(
            -r.force,
            ideal_metal_force(100e-6, 100e-9),
            max_relative = 5e-3
        );
        assert_eq!(r.repulsive_nodes, 0);
    }

    #[test]
    fn invalid_quadrature_rejected() {
        let g = Geometry::new(100e-6, 100e-9).unwrap();
        let bad = QuadratureConfig {
            x_max: 10.0,
            ..Default::default()
        };
        assert!(
            force_sphere_plate(&metal(), &metal(), &DielectricModel::Vacuum, &g, &bad).is_err()
        );
    }

    #[test]
    fn tiny_budget_reports_non_convergence() {
        let g = Geometry::new(100e-6, 100e-9).unwrap();
        let q = QuadratureConfig {
            max_evals: 500,
            ..Default::default()
        };
        let e =
            force_sphere_plate(&metal(), &metal(), &DielectricModel::Vacuum, &g, &q).unwrap_err();
        assert!(e.is_non_convergence(), "{e}");
    }

    #[test]
    fn empty_curve() {
        let c = force_curve(
            &metal(),
            &metal(),
            &DielectricModel::Vacuum,
            1e-4,
            &[],
            &Default::default(),
        )
        .unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn unsorted_curve_rejected() {
        let r = force_curve(
            &metal(),
            &metal(),
            &DielectricModel::Vacuum,
            1e-4,
            &[2e-7, 1e-7],
            &Default::default(),
        );
        assert!(r.is_err());
    }
}
