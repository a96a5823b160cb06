//! Dielectric functions on the imaginary frequency axis.
//!
//! Every model is evaluated at `ε(iξ)`, where it is real and at least one.
//! Tabulated absorption spectra are mapped onto the imaginary axis with the
//! Kramers-Kronig relation
//!
//! ```text
//! ε(iξ) = 1 + (2/π) ∫₀^∞ x Im ε(x) / (x² + ξ²) dx
//! ```
//!
//! evaluated after substituting `x = ξ tan u`, which turns the integrand into
//! `tan(u) Im ε(ξ tan u)` on `u ∈ (0, π/2)` and removes the peak at `x ≈ ξ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{
    adaptive_gauss_legendre, adaptive_gauss_legendre_segments, tanh_sinh, GaussLegendre, Tolerance,
};
use crate::scalar::Real;

/// Free-electron response, `ε(iξ) = 1 + ωp² / (ξ (ξ + γ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeParams<F> {
    /// Plasma frequency, rad/s.
    pub omega_p: F,
    /// Relaxation rate, rad/s.
    pub gamma: F,
}

impl<F: Real> DrudeParams<F> {
    pub fn new(omega_p: F, gamma: F) -> Result<Self> {
        if !(omega_p > F::zero() && omega_p.is_finite()) {
            return Err(Error::Domain(format!(
                "Drude omega_p must be > 0, got {omega_p}"
            )));
        }
        if !(gamma > F::zero() && gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "Drude gamma must be > 0, got {gamma}"
            )));
        }
        Ok(Self { omega_p, gamma })
    }

    /// Imaginary part on the real axis, `ωp² γ / (x (x² + γ²))`.
    pub fn im_eps_real_axis(&self, x: F) -> F {
        self.omega_p * self.omega_p * self.gamma / (x * (x * x + self.gamma * self.gamma))
    }

    pub fn eps_at_imaginary(&self, xi: F) -> Result<F> {
        if xi <= F::zero() {
            return Err(Error::Domain(
                "Drude permittivity diverges at xi = 0; evaluate at xi > 0".into(),
            ));
        }
        Ok(F::one() + self.omega_p * self.omega_p / (xi * (xi + self.gamma)))
    }
}

/// One damped Lorentz oscillator of strength `C` at `ω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator<F> {
    pub strength: F,
    pub omega_0: F,
    pub gamma: F,
}

impl<F: Real> Oscillator<F> {
    pub fn new(strength: F, omega_0: F, gamma: F) -> Result<Self> {
        if !(strength > F::zero()) || !(omega_0 > F::zero()) || !(gamma >= F::zero()) {
            return Err(Error::Domain(format!(
                "oscillator needs C > 0, omega_0 > 0, gamma >= 0 (got {strength}, {omega_0}, {gamma})"
            )));
        }
        Ok(Self {
            strength,
            omega_0,
            gamma,
        })
    }

    /// Imaginary part on the real axis, `C ω₀² γ x / ((ω₀² − x²)² + γ² x²)`.
    pub fn im_eps_real_axis(&self, x: F) -> F {
        let w2 = self.omega_0 * self.omega_0;
        let detune = w2 - x * x;
        self.strength * w2 * self.gamma * x / (detune * detune + self.gamma * self.gamma * x * x)
    }

    fn term(&self, xi: F) -> F {
        let w2 = self.omega_0 * self.omega_0;
        self.strength * w2 / (w2 + xi * xi + self.gamma * xi)
    }
}

/// A sum of Lorentz oscillators; the polystyrene-style two-oscillator model
/// is the two-entry case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams<F> {
    pub oscillators: Vec<Oscillator<F>>,
}

impl<F: Real> OscillatorParams<F> {
    pub fn new(oscillators: Vec<Oscillator<F>>) -> Result<Self> {
        for o in &oscillators {
            Oscillator::new(o.strength, o.omega_0, o.gamma)?;
        }
        Ok(Self { oscillators })
    }

    pub fn eps_at_imaginary(&self, xi: F) -> F {
        F::one() + self.oscillators.iter().map(|o| o.term(xi)).sum::<F>()
    }
}

/// How `Im ε` is continued beyond the table support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Tail<F> {
    /// No absorption outside the table.
    Truncate,
    /// Analytic Drude absorption with the given parameters.
    DrudeTail { omega_p: F, gamma: F },
    /// Below the table: `x · Im ε(x)` held constant (the low-frequency Drude
    /// asymptote). Above the table: the log-log slope of the last two rows,
    /// which must be negative.
    PowerLawTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation<F> {
    pub low: Tail<F>,
    pub high: Tail<F>,
}

impl<F: Real> Extrapolation<F> {
    /// Threshold above which a table is assumed to miss the metallic
    /// infrared response.
    pub const DRUDE_TAIL_THRESHOLD: f64 = 1e11;

    /// Default policy for rows starting at `first_omega`: continue the
    /// `1/x` Drude asymptote downward when the table starts above 1e11 rad/s,
    /// otherwise truncate. The high end is truncated.
    pub fn default_for(first_omega: F) -> Self {
        let low = if first_omega > F::lit(Self::DRUDE_TAIL_THRESHOLD) {
            Tail::PowerLawTail
        } else {
            Tail::Truncate
        };
        Self {
            low,
            high: Tail::Truncate,
        }
    }
}

/// Sampled `Im ε(ω)` on the real frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalTable<F> {
    omega: Vec<F>,
    im_eps: Vec<F>,
    /// Log-log slope of each segment; `None` where an endpoint is zero and
    /// the segment is interpolated linearly instead.
    slopes: Vec<Option<F>>,
    extrapolation: Extrapolation<F>,
}

impl<F: Real> OpticalTable<F> {
    /// Builds a table from `(omega, im_eps)` rows with the default tails.
    pub fn new(rows: Vec<(F, F)>) -> Result<Self> {
        let first = rows.first().map(|r| r.0).unwrap_or_else(F::zero);
        Self::with_extrapolation(rows, Extrapolation::default_for(first))
    }

    pub fn with_extrapolation(rows: Vec<(F, F)>, extrapolation: Extrapolation<F>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidTable("table has no rows".into()));
        }
        for (i, &(w, e)) in rows.iter().enumerate() {
            if !(w > F::zero()) || !w.is_finite() {
                return Err(Error::InvalidTable(format!(
                    "row {i}: omega must be positive and finite, got {w}"
                )));
            }
            if !(e >= F::zero()) || !e.is_finite() {
                return Err(Error::InvalidTable(format!(
                    "row {i}: im_eps must be finite and >= 0, got {e}"
                )));
            }
            if i > 0 && !(w > rows[i - 1].0) {
                return Err(Error::InvalidTable(format!(
                    "row {i}: omega must be strictly increasing ({} then {w})",
                    rows[i - 1].0
                )));
            }
        }
        for tail in [extrapolation.low, extrapolation.high] {
            if let Tail::DrudeTail { omega_p, gamma } = tail {
                DrudeParams::new(omega_p, gamma)?;
            }
        }
        let (omega, im_eps): (Vec<F>, Vec<F>) = rows.into_iter().unzip();
        let slopes = omega
            .windows(2)
            .zip(im_eps.windows(2))
            .map(|(w, e)| {
                if e[0] > F::zero() && e[1] > F::zero() {
                    Some((e[1] / e[0]).ln() / (w[1] / w[0]).ln())
                } else {
                    None
                }
            })
            .collect();
        let table = Self {
            omega,
            im_eps,
            slopes,
            extrapolation,
        };
        if let Tail::PowerLawTail = extrapolation.high {
            table.high_power_law()?;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (F, F)> + '_ {
        self.omega.iter().copied().zip(self.im_eps.iter().copied())
    }

    pub fn extrapolation(&self) -> Extrapolation<F> {
        self.extrapolation
    }

    fn high_power_law(&self) -> Result<F> {
        let n = self.omega.len();
        let slope = if n >= 2 { self.slopes[n - 2] } else { None };
        match slope {
            Some(m) if m < F::zero() => Ok(m),
            _ => Err(Error::InvalidTable(
                "power-law high tail needs two positive trailing rows with decreasing im_eps"
                    .into(),
            )),
        }
    }

    /// Interpolated `Im ε(x)` inside the table support.
    pub fn interpolate(&self, x: F) -> F {
        let n = self.omega.len();
        if n == 1 || x <= self.omega[0] {
            return self.im_eps[0];
        }
        if x >= self.omega[n - 1] {
            return self.im_eps[n - 1];
        }
        let i = self.omega.partition_point(|&w| w <= x) - 1;
        self.interpolate_segment(i, x)
    }

    fn interpolate_segment(&self, i: usize, x: F) -> F {
        match self.slopes[i] {
            Some(m) => self.im_eps[i] * (m * (x / self.omega[i]).ln()).exp(),
            None => {
                let t = (x - self.omega[i]) / (self.omega[i + 1] - self.omega[i]);
                self.im_eps[i] + t * (self.im_eps[i + 1] - self.im_eps[i])
            }
        }
    }
}

/// A material's dielectric response on the imaginary axis.
#[derive(Debug, Clone, PartialEq)]
pub enum DielectricModel<F> {
    Vacuum,
    Constant(F),
    Drude(DrudeParams<F>),
    Oscillators(OscillatorParams<F>),
    Tabulated(OpticalTable<F>),
    /// `1 + Σ (εᵢ − 1)` over the parts.
    Sum(Vec<DielectricModel<F>>),
}

impl<F: Real> DielectricModel<F> {
    pub fn constant(eps: F) -> Result<Self> {
        if !(eps >= F::one()) || !eps.is_finite() {
            return Err(Error::Domain(format!(
                "constant permittivity must be finite and >= 1, got {eps}"
            )));
        }
        Ok(Self::Constant(eps))
    }

    pub fn drude(omega_p: F, gamma: F) -> Result<Self> {
        DrudeParams::new(omega_p, gamma).map(Self::Drude)
    }

    /// `ε(iξ)` for `ξ ≥ 0`.
    pub fn eps_at_imaginary(&self, xi: F) -> Result<F> {
        if !(xi >= F::zero()) {
            return Err(Error::Domain(format!("xi must be >= 0, got {xi}")));
        }
        match self {
            Self::Vacuum => Ok(F::one()),
            Self::Constant(e) => Ok(*e),
            Self::Drude(p) => p.eps_at_imaginary(xi),
            Self::Oscillators(p) => Ok(p.eps_at_imaginary(xi)),
            Self::Tabulated(t) => kk_transform(t, xi),
            Self::Sum(parts) => {
                let mut eps = F::one();
                for part in parts {
                    eps = eps + (part.eps_at_imaginary(xi)? - F::one());
                }
                Ok(eps)
            }
        }
    }

    pub fn is_vacuum(&self) -> bool {
        match self {
            Self::Vacuum => true,
            Self::Constant(e) => *e == F::one(),
            Self::Sum(parts) => parts.iter().all(Self::is_vacuum),
            _ => false,
        }
    }
}

/// Free function form of [`DielectricModel::eps_at_imaginary`].
pub fn eps_at_imaginary<F: Real>(model: &DielectricModel<F>, xi: F) -> Result<F> {
    model.eps_at_imaginary(xi)
}

/// Relative accuracy requested from the Kramers-Kronig quadrature.
pub const KK_REL_TOL: f64 = 1e-8;
const KK_MAX_EVALS: usize = 50_000_000;
const KK_RULE_POINTS: usize = 5;

/// Kramers-Kronig transform of a table to `ε(iξ)`, `ξ > 0`.
pub fn kk_transform<F: Real>(table: &OpticalTable<F>, xi: F) -> Result<F> {
    if !(xi > F::zero()) || !xi.is_finite() {
        return Err(Error::Domain(format!(
            "Kramers-Kronig transform needs a finite xi > 0, got {xi}"
        )));
    }
    if table.is_empty() {
        return Err(Error::InvalidTable("table has no rows".into()));
    }
    let rule = GaussLegendre::new(KK_RULE_POINTS);
    let tol = Tolerance::relative(F::lit(KK_REL_TOL));
    let n = table.omega.len();
    let u_of = |w: F| (w / xi).atan();
    let u_first = u_of(table.omega[0]);
    let u_last = u_of(table.omega[n - 1]);

    let mut integral = F::zero();

    integral = integral
        + match table.extrapolation.low {
            Tail::Truncate => F::zero(),
            // x Im ε(x) = ω₁ Im ε₁ gives an integrand constant in u.
            Tail::PowerLawTail => table.omega[0] * table.im_eps[0] / xi * u_first,
            Tail::DrudeTail { omega_p, gamma } => {
                let d = DrudeParams { omega_p, gamma };
                adaptive_gauss_legendre(
                    &rule,
                    |u: F| {
                        let x = xi * u.tan();
                        d.omega_p * d.omega_p * d.gamma / (xi * (x * x + d.gamma * d.gamma))
                    },
                    F::zero(),
                    u_first,
                    tol,
                    KK_MAX_EVALS,
                )?
                .value
            }
        };

    if n >= 2 && table.im_eps.iter().any(|&e| e > F::zero()) {
        let breaks: Vec<F> = table.omega.iter().map(|&w| u_of(w)).collect();
        let est = adaptive_gauss_legendre_segments(
            &rule,
            |u: F| {
                let t = u.tan();
                t * table.interpolate(xi * t)
            },
            &breaks,
            tol,
            KK_MAX_EVALS,
        )?;
        integral = integral + est.value;
    }

    let half_pi = F::FRAC_PI_2();
    integral = integral
        + match table.extrapolation.high {
            Tail::Truncate => F::zero(),
            Tail::DrudeTail { omega_p, gamma } => {
                let d = DrudeParams { omega_p, gamma };
                adaptive_gauss_legendre(
                    &rule,
                    |u: F| {
                        let x = xi * u.tan();
                        d.omega_p * d.omega_p * d.gamma / (xi * (x * x + d.gamma * d.gamma))
                    },
                    u_last,
                    half_pi,
                    tol,
                    KK_MAX_EVALS,
                )?
                .value
            }
            Tail::PowerLawTail => {
                let m = table.high_power_law()?;
                let (w_n, e_n) = (table.omega[n - 1], table.im_eps[n - 1]);
                tanh_sinh(
                    |u: F| {
                        let t = u.tan();
                        t * e_n * (m * (xi * t / w_n).ln()).exp()
                    },
                    u_last,
                    half_pi,
                    tol,
                    14,
                    KK_MAX_EVALS,
                )?
                .value
            }
        };

    Ok(F::one() + F::lit(2.0) / F::PI() * integral)
}
