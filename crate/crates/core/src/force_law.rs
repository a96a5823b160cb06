use crate::dielectric::DielectricModel;
use crate::error::{Error, Result};
use crate::lifshitz::{
    force_curve, force_sphere_plate, ideal_metal_force, Geometry, QuadratureConfig,
};
use crate::scalar::Real;
use crate::stack::LayerStack;

/// Signed sphere-plate force as a function of separation (negative = attractive).
pub trait ForceLaw<F>: Sync {
    fn force(&self, d: F) -> Result<F>;

    /// Separations where the law can be evaluated, if restricted.
    fn domain(&self) -> Option<(F, F)> {
        None
    }
}

impl<F, G> ForceLaw<F> for G
where
    G: Fn(F) -> F + Sync,
{
    fn force(&self, d: F) -> Result<F> {
        Ok(self(d))
    }
}

/// No force at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForce;

impl<F: Real> ForceLaw<F> for NoForce {
    fn force(&self, _d: F) -> Result<F> {
        Ok(F::zero())
    }
}

/// Perfect conductors in proximity approximation, `−π³ħcR/(360 d³)`.
#[derive(Debug, Clone, Copy)]
pub struct IdealMetal<F> {
    pub radius: F,
}

impl<F: Real> ForceLaw<F> for IdealMetal<F> {
    fn force(&self, d: F) -> Result<F> {
        if !(d > F::zero()) {
            return Err(Error::Domain(format!("separation must be > 0, got {d}")));
        }
        Ok(ideal_metal_force(self.radius, d))
    }
}

/// Direct Lifshitz evaluation at every requested separation.
#[derive(Debug, Clone)]
pub struct LifshitzLaw<F> {
    pub sphere: LayerStack<F>,
    pub plate: LayerStack<F>,
    pub gap: DielectricModel<F>,
    pub radius: F,
    pub quad: QuadratureConfig<F>,
}

impl<F: Real> LifshitzLaw<F> {
    /// Tabulates the law on `separations` and returns a spline through it.
    pub fn tabulate(&self, separations: &[F]) -> Result<ForceInterpolant<F>> {
        let curve = force_curve(
            &self.sphere,
            &self.plate,
            &self.gap,
            self.radius,
            separations,
            &self.quad,
        )?;
        ForceInterpolant::new(curve.into_iter().map(|(d, r)| (d, r.force)).collect())
    }
}

impl<F: Real> ForceLaw<F> for LifshitzLaw<F> {
    fn force(&self, d: F) -> Result<F> {
        let geom = Geometry::new(self.radius, d)?;
        force_sphere_plate(&self.sphere, &self.plate, &self.gap, &geom, &self.quad).map(|r| r.force)
    }
}

/// Natural cubic spline of `F·d³` against `ln d`.
///
/// Both coordinates vary slowly for dispersion forces, so a modest grid
/// interpolates far better than splining `F(d)` directly. Evaluation outside
/// the tabulated range is an error.
#[derive(Debug, Clone)]
pub struct ForceInterpolant<F> {
    ln_d: Vec<F>,
    y: Vec<F>,
    m: Vec<F>,
}

impl<F: Real> ForceInterpolant<F> {
    pub fn new(mut points: Vec<(F, F)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain(
                "force interpolant needs at least two points".into(),
            ));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        for (i, &(d, f)) in points.iter().enumerate() {
            if !(d > F::zero()) || !f.is_finite() {
                return Err(Error::Domain(format!(
                    "interpolant point {i} is invalid (d = {d}, F = {f})"
                )));
            }
            if i > 0 && d <= points[i - 1].0 {
                return Err(Error::Domain(format!(
                    "duplicate separation {d} in interpolant"
                )));
            }
        }
        let ln_d: Vec<F> = points.iter().map(|p| p.0.ln()).collect();
        let y: Vec<F> = points.iter().map(|&(d, f)| f * d * d * d).collect();
        let m = natural_second_derivatives(&ln_d, &y);
        Ok(Self { ln_d, y, m })
    }

    pub fn range(&self) -> (F, F) {
        (self.ln_d[0].exp(), self.ln_d[self.ln_d.len() - 1].exp())
    }

    pub fn eval(&self, d: F) -> Result<F> {
        let (lo, hi) = self.range();
        // a few ulps of slack so the tabulated endpoints round-trip through ln/exp
        let slack = F::epsilon() * F::lit(4.0);
        if !(d >= lo * (F::one() - slack) && d <= hi * (F::one() + slack)) {
            return Err(Error::Domain(format!(
                "separation {d:e} m outside interpolation range [{lo:e}, {hi:e}] m"
            )));
        }
        let t = d.ln();
        let n = self.ln_d.len();
        let k = self.ln_d.partition_point(|&x| x <= t).clamp(1, n - 1);
        let (x0, x1) = (self.ln_d[k - 1], self.ln_d[k]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let six = F::lit(6.0);
        let y = a * self.y[k - 1]
            + b * self.y[k]
            + ((a * a * a - a) * self.m[k - 1] + (b * b * b - b) * self.m[k]) * h * h / six;
        Ok(y / (d * d * d))
    }
}

impl<F: Real> ForceLaw<F> for ForceInterpolant<F> {
    fn force(&self, d: F) -> Result<F> {
        self.eval(d)
    }

    fn domain(&self) -> Option<(F, F)> {
        Some(self.range())
    }
}

fn natural_second_derivatives<F: Real>(x: &[F], y: &[F]) -> Vec<F> {
    let n = x.len();
    let mut m = vec![F::zero(); n];
    if n < 3 {
        return m;
    }
    let two = F::lit(2.0);
    let six = F::lit(6.0);
    // Thomas algorithm on the interior equations
    let mut c_prime = vec![F::zero(); n];
    let mut d_prime = vec![F::zero(); n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let rhs = six * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        let diag = two * (h0 + h1) - h0 * c_prime[i - 1];
        c_prime[i] = h1 / diag;
        d_prime[i] = (rhs - h0 * d_prime[i - 1]) / diag;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closures_are_force_laws() {
        let law = |d: f64| -1.0 / d;
        assert_eq!(law.force(2.0).unwrap(), -0.5);
        assert_eq!(ForceLaw::<f64>::force(&NoForce, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn interpolant_is_exact_for_inverse_cube() {
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let d = 50e-9 * 1.3f64.powi(i);
                (d, -2.0e-34 / (d * d * d))
            })
            .collect();
        let s = ForceInterpolant::new(pts).unwrap();
        assert_relative_eq!(
            s.eval(123e-9).unwrap(),
            -2.0e-34 / 123e-9f64.powi(3),
            max_relative = 1e-12
        );
        assert!(s.eval(10e-9).is_err());
    }

    #[test]
    fn interpolant_tracks_smooth_law() {
        let law = |d: f64| -1e-30 / (d * d * d) * (1.0 + 30e-9 / d).recip();
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let d = 40e-9 * (10f64).powf(i as f64 / 39.0);
                (d, law(d))
            })
            .collect();
        let s = ForceInterpolant::new(pts).unwrap();
        for d in [41e-9, 77e-9, 150e-9, 399e-9] {
            assert_relative_eq!(s.eval(d).unwrap(), law(d), max_relative = 1e-4);
        }
    }

    #[test]
    fn endpoints_round_trip() {
        let pts = vec![(1e-7, -3.0), (2e-7, -1.0), (4e-7, -0.2)];
        let s = ForceInterpolant::new(pts).unwrap();
        assert_relative_eq!(s.eval(1e-7).unwrap(), -3.0, max_relative = 1e-12);
        assert_relative_eq!(s.eval(4e-7).unwrap(), -0.2, max_relative = 1e-12);
    }
}
