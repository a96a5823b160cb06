use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force_law::ForceLaw;
use crate::scalar::Real;

/// One histogram bin: surface displaced by `delta` (toward the other body)
/// with probability `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin<F> {
    #[serde(rename = "delta_m")]
    pub delta: F,
    pub v: F,
}

/// Mean-centered distribution of local height displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr<F>", into = "ProfileRepr<F>")]
#[serde(bound(
    serialize = "F: Real + Serialize",
    deserialize = "F: Real + Deserialize<'de>"
))]
pub struct RoughnessProfile<F> {
    bins: Vec<Bin<F>>,
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr<F> {
    bins: Vec<Bin<F>>,
}

impl<F: Real> TryFrom<ProfileRepr<F>> for RoughnessProfile<F> {
    type Error = Error;
    fn try_from(r: ProfileRepr<F>) -> Result<Self> {
        Self::new(r.bins)
    }
}

impl<F: Real> From<RoughnessProfile<F>> for ProfileRepr<F> {
    fn from(p: RoughnessProfile<F>) -> Self {
        ProfileRepr { bins: p.bins }
    }
}

impl<F: Real> RoughnessProfile<F> {
    /// Validates normalization, centering and ordering.
    pub fn new(bins: Vec<Bin<F>>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Domain("roughness profile has no bins".into()));
        }
        for (i, b) in bins.iter().enumerate() {
            if !b.delta.is_finite() || !(b.v >= F::zero()) || !b.v.is_finite() {
                return Err(Error::Domain(format!(
                    "bin {i} is invalid (delta = {}, v = {})",
                    b.delta, b.v
                )));
            }
            if i > 0 && b.delta <= bins[i - 1].delta {
                return Err(Error::Domain(format!(
                    "bins must be sorted by strictly increasing delta (bin {i})"
                )));
            }
        }
        let n = F::lit(bins.len() as f64);
        let total: F = bins.iter().map(|b| b.v).sum();
        let norm_tol = F::lit(1e-12).max(F::lit(4.0) * n * F::epsilon());
        if (total - F::one()).abs() > norm_tol {
            return Err(Error::Domain(format!(
                "bin probabilities sum to {total}, expected 1"
            )));
        }
        let mean: F = bins.iter().map(|b| b.v * b.delta).sum();
        let spread: F = bins.iter().map(|b| b.v * b.delta.abs()).sum();
        let mean_tol = F::lit(1e-15).max(F::lit(4.0) * n * F::epsilon() * spread);
        if mean.abs() > mean_tol {
            return Err(Error::Domain(format!(
                "profile is not mean-centered (mean displacement {mean:e} m)"
            )));
        }
        Ok(Self { bins })
    }

    /// Normalizes the weights and subtracts the weighted mean displacement.
    pub fn centered(mut bins: Vec<Bin<F>>) -> Result<Self> {
        bins.sort_by(|a, b| {
            a.delta
                .partial_cmp(&b.delta)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let total: F = bins.iter().map(|b| b.v).sum();
        if !(total > F::zero()) {
            return Err(Error::Domain("bin weights must have a positive sum".into()));
        }
        for b in &mut bins {
            b.v = b.v / total;
        }
        let mean: F = bins.iter().map(|b| b.v * b.delta).sum();
        for b in &mut bins {
            b.delta = b.delta - mean;
        }
        Self::new(bins)
    }

    /// A perfectly flat surface.
    pub fn flat() -> Self {
        Self {
            bins: vec![Bin {
                delta: F::zero(),
                v: F::one(),
            }],
        }
    }

    pub fn bins(&self) -> &[Bin<F>] {
        &self.bins
    }

    pub fn max_delta(&self) -> F {
        self.bins[self.bins.len() - 1].delta
    }

    /// `Σ v δ²`.
    pub fn variance(&self) -> F {
        self.bins.iter().map(|b| b.v * b.delta * b.delta).sum()
    }
}

/// Surface heights on a regular grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap<F> {
    heights: Vec<F>,
    width: usize,
    pitch: F,
}

impl<F: Real> HeightMap<F> {
    pub fn new(heights: Vec<F>, width: usize, pitch: F) -> Result<Self> {
        if heights.is_empty() || width == 0 {
            return Err(Error::Domain("height map is empty".into()));
        }
        if !heights.len().is_multiple_of(width) {
            return Err(Error::Domain(format!(
                "{} heights do not fill rows of width {width}",
                heights.len()
            )));
        }
        if let Some(i) = heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::Domain(format!(
                "height at row {}, column {} is not finite",
                i / width,
                i % width
            )));
        }
        if !(pitch > F::zero()) {
            return Err(Error::Domain(format!("pitch must be > 0, got {pitch}")));
        }
        Ok(Self {
            heights,
            width,
            pitch,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.heights.len() / self.width
    }

    pub fn pitch(&self) -> F {
        self.pitch
    }

    pub fn heights(&self) -> &[F] {
        &self.heights
    }
}

/// Equal-width histogram of the map over `[min, max]`.
///
/// Each non-empty bin is represented by the mean height of its pixels
/// measured from the grid mean, so the profile is centered by construction
/// and an exactly two-level surface maps onto its two levels.
pub fn histogram_from_heightmap<F: Real>(
    map: &HeightMap<F>,
    n_bins: usize,
) -> Result<RoughnessProfile<F>> {
    if n_bins == 0 {
        return Err(Error::Domain("n_bins must be >= 1".into()));
    }
    let h = &map.heights;
    let count = F::lit(h.len() as f64);
    let lo = h.iter().copied().fold(F::infinity(), F::min);
    let hi = h.iter().copied().fold(F::neg_infinity(), F::max);
    if !(hi > lo) {
        return Ok(RoughnessProfile::flat());
    }
    let mean = h.iter().copied().sum::<F>() / count;
    let width = (hi - lo) / F::lit(n_bins as f64);
    let mut sums = vec![F::zero(); n_bins];
    let mut counts = vec![0usize; n_bins];
    for &z in h {
        let k = ((z - lo) / width).to_usize().unwrap_or(0).min(n_bins - 1);
        sums[k] = sums[k] + (z - mean);
        counts[k] += 1;
    }
    let bins = sums
        .into_iter()
        .zip(counts)
        .filter(|&(_, c)| c > 0)
        .map(|(s, c)| {
            let c = F::lit(c as f64);
            Bin {
                delta: s / c,
                v: c / count,
            }
        })
        .collect();
    RoughnessProfile::new(bins)
}

/// `Σᵢⱼ vᵢ vⱼ F(d − δᵢ − δⱼ)`.
///
/// Rows of the double sum are evaluated in parallel; the reduction runs in
/// a fixed order so results do not depend on scheduling.
pub fn corrected_force<F: Real, L: ForceLaw<F> + ?Sized>(
    base: &L,
    sphere: &RoughnessProfile<F>,
    plate: &RoughnessProfile<F>,
    d: F,
) -> Result<F> {
    let closest = d - (sphere.max_delta() + plate.max_delta());
    if !(closest > F::zero()) {
        return Err(Error::Domain(format!(
            "surfaces interpenetrate at d = {d:e} m: sphere bin {} and plate bin {} give local separation {closest:e} m",
            sphere.bins.len() - 1,
            plate.bins.len() - 1
        )));
    }
    let rows: Vec<Result<F>> = sphere
        .bins
        .par_iter()
        .map(|bs| {
            let mut acc = F::zero();
            for bp in &plate.bins {
                let f = base.force(d - (bs.delta + bp.delta))?;
                acc = acc + bp.v * f;
            }
            Ok(bs.v * acc)
        })
        .collect();
    let mut total = F::zero();
    for r in rows {
        total = total + r?;
    }
    Ok(total)
}
