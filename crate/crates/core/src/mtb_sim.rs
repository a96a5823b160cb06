use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{SweepPoint, SweepRecord};
use crate::constants::VACUUM_PERMITTIVITY;
use crate::error::{Error, Result};
use crate::force_law::ForceLaw;
use crate::scalar::Real;

/// Torsional balance and read-out parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MtbParams<F> {
    /// Torsional spring constant, N·m/rad.
    pub k_s: F,
    /// Sphere-to-pivot distance, meters.
    pub lever_arm: F,
    /// Bridge gain, a.u./N.
    pub c1_true: F,
    /// Separation at zero piezo extension, meters.
    pub d0_true: F,
    /// Residual voltage, volts.
    pub v0_true: F,
    /// Standard deviation of additive read-out noise, a.u.
    pub noise_sigma_a: F,
    /// Sphere radius, meters.
    pub radius: F,
    /// Shrink the separation by the balance rotation under load.
    pub plate_rotation: bool,
}

impl<F: Real> Default for MtbParams<F> {
    fn default() -> Self {
        let c1 = F::lit(1e9);
        Self {
            k_s: F::lit(1e-8),
            lever_arm: F::lit(250e-6),
            c1_true: c1,
            d0_true: F::lit(500e-9),
            v0_true: F::lit(0.2),
            // 10 pN force resolution
            noise_sigma_a: c1 * F::lit(10e-12),
            radius: F::lit(100e-6),
            plate_rotation: false,
        }
    }
}

impl<F: Real> MtbParams<F> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k_s", self.k_s),
            ("lever_arm", self.lever_arm),
            ("c1_true", self.c1_true),
            ("d0_true", self.d0_true),
            ("radius", self.radius),
        ];
        for (name, v) in positive {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !self.v0_true.is_finite() {
            return Err(Error::InvalidConfig("v0_true must be finite".into()));
        }
        if !(self.noise_sigma_a >= F::zero()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma_a must be >= 0, got {}",
                self.noise_sigma_a
            )));
        }
        Ok(())
    }

    /// Electrostatic sphere-plate force magnitude `ε₀πR(V+V₀)²/d`.
    pub fn electrostatic(&self, v_bias: F, d: F) -> F {
        let u = v_bias + self.v0_true;
        F::lit(VACUUM_PERMITTIVITY) * F::PI() * self.radius * u * u / d
    }
}

/// Piezo positions and bias voltages of a synthetic measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan<F> {
    #[serde(rename = "d_pz_values_m")]
    pub d_pz_values: Vec<F>,
    #[serde(rename = "v_bias_values_V")]
    pub v_bias_values: Vec<F>,
    #[serde(default)]
    pub seed: u64,
}

impl<F: Real> SweepPlan<F> {
    /// `n` bias points spread evenly over `center ± half_width`.
    pub fn centered(d_pz_values: Vec<F>, center: F, half_width: F, n: usize, seed: u64) -> Self {
        let v_bias_values = (0..n)
            .map(|i| {
                let t = if n > 1 {
                    F::lit(i as f64 / (n - 1) as f64)
                } else {
                    F::lit(0.5)
                };
                center - half_width + F::lit(2.0) * half_width * t
            })
            .collect();
        Self {
            d_pz_values,
            v_bias_values,
            seed,
        }
    }

    fn validate(&self, params: &MtbParams<F>) -> Result<()> {
        if self.d_pz_values.is_empty() || self.v_bias_values.is_empty() {
            return Err(Error::InvalidConfig("sweep plan is empty".into()));
        }
        for (i, &d) in self.d_pz_values.iter().enumerate() {
            if !(d < params.d0_true) || !d.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "d_pz[{i}] = {d:e} m must be below d0_true = {:e} m",
                    params.d0_true
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of the torsional-stability search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "d_m", rename_all = "snake_case")]
pub enum JumpToContact<F> {
    /// Largest unstable separation.
    At(F),
    /// The balance is stable everywhere in the search range.
    BelowRange,
}

impl<F: Real> JumpToContact<F> {
    pub fn distance(&self) -> Option<F> {
        match *self {
            JumpToContact::At(d) => Some(d),
            JumpToContact::BelowRange => None,
        }
    }
}

/// Separations searched for the instability, meters.
pub const JTC_SEARCH_RANGE: (f64, f64) = (1e-10, 1e-5);

/// Largest separation where `lever_arm² |dF/dd| ≥ k_s`.
///
/// The derivative is a central difference with step `d/1000`; the boundary
/// is located by bisection in `ln d`. The search covers [`JTC_SEARCH_RANGE`]
/// narrowed to the law's own domain, so a tabulated law that is stable at
/// its shortest separation reports [`JumpToContact::BelowRange`].
pub fn jump_to_contact_distance<F: Real, L: ForceLaw<F> + ?Sized>(
    params: &MtbParams<F>,
    law: &L,
) -> Result<JumpToContact<F>> {
    params.validate()?;
    let b2 = params.lever_arm * params.lever_arm;
    let excess = |d: F| -> Result<F> {
        let h = d / F::lit(1000.0);
        let slope = (law.force(d + h)? - law.force(d - h)?) / (h + h);
        Ok(b2 * slope.abs() - params.k_s)
    };
    let mut lo = F::lit(JTC_SEARCH_RANGE.0);
    let mut hi = F::lit(JTC_SEARCH_RANGE.1);
    if let Some((a, b)) = law.domain() {
        let margin = F::lit(1.002);
        lo = lo.max(a * margin);
        hi = hi.min(b / margin);
        if !(lo < hi) {
            return Err(Error::Domain(format!(
                "force law domain [{a:e}, {b:e}] m is too narrow for a stability search"
            )));
        }
    }
    if excess(lo)? < F::zero() {
        return Ok(JumpToContact::BelowRange);
    }
    if excess(hi)? >= F::zero() {
        return Err(Error::Domain(format!(
            "balance is unstable across the whole search range up to {hi:e} m"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if excess(mid)? >= F::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= F::epsilon() * F::lit(4.0) * hi {
            break;
        }
    }
    Ok(JumpToContact::At(lo))
}

/// Synthetic bridge output for every planned sweep.
///
/// `A = c₁ [ε₀πR(V+V₀)²/d + |F_C(d)|] + noise`, `d = d₀ − d_pz`. Each sweep
/// draws noise from its own ChaCha stream keyed by `(seed, sweep index)`,
/// so output does not depend on thread scheduling.
pub fn simulate_dataset<F: Real, L: ForceLaw<F> + ?Sized>(
    params: &MtbParams<F>,
    plan: &SweepPlan<F>,
    law: &L,
) -> Result<Vec<SweepRecord<F>>> {
    params.validate()?;
    plan.validate(params)?;
    if let JumpToContact::At(jtc) = jump_to_contact_distance(params, law)? {
        for (sweep, &d_pz) in plan.d_pz_values.iter().enumerate() {
            let d = params.d0_true - d_pz;
            if d <= jtc {
                return Err(Error::BelowJumpToContact {
                    sweep,
                    separation: d.as_f64(),
                    jump_to_contact: jtc.as_f64(),
                });
            }
        }
    }
    let noise = Normal::new(0.0, params.noise_sigma_a.as_f64())
        .map_err(|e| Error::InvalidConfig(format!("noise model: {e}")))?;
    plan.d_pz_values
        .par_iter()
        .enumerate()
        .map(|(index, &d_pz)| {
            let mut rng = ChaCha20Rng::seed_from_u64(plan.seed);
            rng.set_stream(index as u64);
            let d = params.d0_true - d_pz;
            let points = plan
                .v_bias_values
                .iter()
                .map(|&v| {
                    let total = total_force(params, law, v, d)?;
                    let a = params.c1_true * total + F::lit(noise.sample(&mut rng));
                    Ok(SweepPoint { v_bias: v, a })
                })
                .collect::<Result<Vec<_>>>()?;
            SweepRecord::new(d_pz, points)
        })
        .collect()
}

/// Attractive force magnitude at nominal separation `d`, optionally at the
/// separation reduced by the balance rotation `d − b²|F|/k_s`.
fn total_force<F: Real, L: ForceLaw<F> + ?Sized>(
    params: &MtbParams<F>,
    law: &L,
    v: F,
    d: F,
) -> Result<F> {
    let at = |s: F| -> Result<F> { Ok(params.electrostatic(v, s) + law.force(s)?.abs()) };
    if !params.plate_rotation {
        return at(d);
    }
    let compliance = params.lever_arm * params.lever_arm / params.k_s;
    let mut s = d;
    for _ in 0..200 {
        let next = d - compliance * at(s)?;
        if !(next > F::zero()) {
            return Err(Error::Domain(format!(
                "plate rotation closes the gap at nominal d = {d:e} m, V = {v}"
            )));
        }
        if (next - s).abs() <= F::epsilon() * F::lit(4.0) * d {
            return at(next);
        }
        s = next;
    }
    Err(Error::Domain(format!(
        "rotated separation did not settle at nominal d = {d:e} m, V = {v}"
    )))
}
