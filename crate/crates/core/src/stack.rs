//! Reflection amplitudes of bare and coated half-spaces at a Lifshitz
//! integration point.
//!
//! Sign convention: `Δ_jk` is built from the two media named `j` then `k`,
//! and the gap medium is always the first subscript (`Δ_3k`). Swapping the
//! media flips the sign of both polarizations.

use crate::constants::SPEED_OF_LIGHT;
use crate::dielectric::DielectricModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A finite film of one material.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<F> {
    pub material: DielectricModel<F>,
    /// Thickness in meters.
    pub thickness: F,
}

impl<F: Real> Layer<F> {
    pub fn new(material: DielectricModel<F>, thickness: F) -> Result<Self> {
        if !(thickness > F::zero()) || !thickness.is_finite() {
            return Err(Error::Domain(format!(
                "film thickness must be positive, got {thickness}"
            )));
        }
        Ok(Self {
            material,
            thickness,
        })
    }
}

/// A semi-infinite substrate under an ordered list of films. `films[0]`
/// touches the substrate; the last film faces the gap.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack<F> {
    pub substrate: DielectricModel<F>,
    pub films: Vec<Layer<F>>,
}

impl<F: Real> LayerStack<F> {
    pub fn bare(substrate: DielectricModel<F>) -> Self {
        Self {
            substrate,
            films: Vec::new(),
        }
    }

    pub fn new(substrate: DielectricModel<F>, films: Vec<Layer<F>>) -> Result<Self> {
        for f in &films {
            Layer::new(f.material.clone(), f.thickness)?;
        }
        Ok(Self { substrate, films })
    }

    /// Adds a film on the gap side.
    pub fn with_film(mut self, material: DielectricModel<F>, thickness: F) -> Result<Self> {
        self.films.push(Layer::new(material, thickness)?);
        Ok(self)
    }

    /// Evaluates every material at `ξ`.
    pub fn permittivity_at(&self, xi: F) -> Result<StackPermittivity<F>> {
        Ok(StackPermittivity {
            substrate: self.substrate.eps_at_imaginary(xi)?,
            films: self
                .films
                .iter()
                .map(|l| Ok((l.material.eps_at_imaginary(xi)?, l.thickness)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn is_vacuum(&self) -> bool {
        self.substrate.is_vacuum() && self.films.iter().all(|l| l.material.is_vacuum())
    }
}

/// Permittivities of a stack frozen at one imaginary frequency, paired with
/// the film thicknesses.
#[derive(Debug, Clone, PartialEq)]
pub struct StackPermittivity<F> {
    pub substrate: F,
    /// `(ε, thickness)` per film, substrate side first.
    pub films: Vec<(F, F)>,
}

/// One point of the Lifshitz double integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandPoint<F> {
    /// Imaginary angular frequency, rad/s.
    pub xi: F,
    /// Angle variable, `p ≥ 1`.
    pub p: F,
    /// Surface separation, meters.
    pub d: F,
    /// Gap permittivity `ε₃(iξ)`.
    pub eps3: F,
}

impl<F: Real> IntegrandPoint<F> {
    pub fn new(xi: F, p: F, d: F, eps3: F) -> Result<Self> {
        if !(xi > F::zero() && p >= F::one() && d > F::zero() && eps3 >= F::one()) {
            return Err(Error::Domain(format!(
                "integrand point needs xi > 0, p >= 1, d > 0, eps3 >= 1 (got {xi}, {p}, {d}, {eps3})"
            )));
        }
        Ok(Self { xi, p, d, eps3 })
    }

    /// `x = 2 d ξ p √ε₃ / c`.
    pub fn x(&self) -> F {
        F::lit(2.0) * self.d * self.xi * self.p * self.eps3.sqrt() / F::lit(SPEED_OF_LIGHT)
    }
}

/// TM (`delta1`) and TE (`delta2`) reflection amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaPair<F> {
    pub delta1: F,
    pub delta2: F,
}

impl<F: Real> std::ops::Neg for DeltaPair<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            delta1: -self.delta1,
            delta2: -self.delta2,
        }
    }
}

/// `s_k = sqrt(p² − 1 + ε_k/ε₃)`, the positive root.
pub fn s_factor<F: Real>(eps_k: F, eps3: F, p: F) -> Result<F> {
    // written as p·sqrt(1 + (ε_k/ε₃ − 1)/p²) so that huge p cannot overflow p²
    let p2 = p * p;
    let inner = F::one() + (eps_k / eps3 - F::one()) / p2;
    if !(inner >= F::zero()) {
        return Err(Error::Domain(format!(
            "negative radicand in s-factor (eps_k = {eps_k}, eps3 = {eps3}, p = {p})"
        )));
    }
    Ok(p * inner.sqrt())
}

/// Interface amplitudes `Δ_jk` of Eq.-(5) form:
/// `Δ⁽¹⁾ = (s_k ε_j − s_j ε_k)/(s_k ε_j + s_j ε_k)`, `Δ⁽²⁾ = (s_k − s_j)/(s_k + s_j)`.
pub fn fresnel_deltas<F: Real>(eps_j: F, s_j: F, eps_k: F, s_k: F) -> DeltaPair<F> {
    let a = s_k * eps_j;
    let b = s_j * eps_k;
    DeltaPair {
        delta1: (a - b) / (a + b),
        delta2: (s_k - s_j) / (s_k + s_j),
    }
}

/// Effective `Δ_3k` of a stack seen from the gap.
pub fn effective_deltas<F: Real>(
    stack: &LayerStack<F>,
    point: &IntegrandPoint<F>,
) -> Result<DeltaPair<F>> {
    let eps = stack.permittivity_at(point.xi)?;
    effective_deltas_with(&eps, point)
}

/// Same as [`effective_deltas`] with permittivities already evaluated.
///
/// Films are folded from the substrate outwards in admittance form,
/// `Y ← (Y_b + y_f T) / (1 + T Y_b / y_f)` with `T = tanh(x t s / (2 p d))`,
/// which is algebraically the same as composing
/// `Δ ← (Δ_out + Δ e) / (1 + Δ_out Δ e)`, `e = exp(−x t s / (p d))`,
/// but does not cancel catastrophically when `|Δ_out| → 1` and `e → 1`.
pub fn effective_deltas_with<F: Real>(
    eps: &StackPermittivity<F>,
    point: &IntegrandPoint<F>,
) -> Result<DeltaPair<F>> {
    let p = point.p;
    let eps3 = point.eps3;
    let s3 = s_factor(eps3, eps3, p)?;
    let s_sub = s_factor(eps.substrate, eps3, p)?;
    if eps.films.is_empty() {
        return Ok(fresnel_deltas(eps3, s3, eps.substrate, s_sub));
    }
    let x = point.x();
    let mut y = admittance(eps.substrate, s_sub, p);
    for &(eps_f, t) in &eps.films {
        let s_f = s_factor(eps_f, eps3, p)?;
        let y_f = admittance(eps_f, s_f, p);
        let arg = x * t * s_f / (p * point.d);
        let tanh = -(-arg).exp_m1() / (F::one() + (-arg).exp());
        y = DeltaPair {
            delta1: fold(y.delta1, y_f.delta1, tanh),
            delta2: fold(y.delta2, y_f.delta2, tanh),
        };
    }
    let y3 = admittance(eps3, s3, p);
    Ok(DeltaPair {
        delta1: (y3.delta1 - y.delta1) / (y3.delta1 + y.delta1),
        delta2: (y3.delta2 - y.delta2) / (y3.delta2 + y.delta2),
    })
}

/// Normalized TM (`ε p / s`) and TE (`p / s`) admittances, stored in a [`DeltaPair`].
fn admittance<F: Real>(eps: F, s: F, p: F) -> DeltaPair<F> {
    let r = p / s;
    DeltaPair {
        delta1: eps * r,
        delta2: r,
    }
}

fn fold<F: Real>(below: F, film: F, tanh: F) -> F {
    (below + film * tanh) / (F::one() + tanh * (below / film))
}
