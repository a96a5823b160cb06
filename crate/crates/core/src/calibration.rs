use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::VACUUM_PERMITTIVITY;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One bias-voltage reading of the bridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<F> {
    #[serde(rename = "v_bias_V")]
    pub v_bias: F,
    #[serde(rename = "a_au")]
    pub a: F,
}

/// A bias sweep at one piezo extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord<F> {
    #[serde(rename = "d_pz_m")]
    pub d_pz: F,
    pub points: Vec<SweepPoint<F>>,
}

impl<F: Real> SweepRecord<F> {
    pub const MIN_POINTS: usize = 5;

    pub fn new(d_pz: F, points: Vec<SweepPoint<F>>) -> Result<Self> {
        let s = Self { d_pz, points };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d_pz.is_finite() {
            return Err(Error::Domain(format!(
                "d_pz must be finite, got {}",
                self.d_pz
            )));
        }
        if self.points.len() < Self::MIN_POINTS {
            return Err(Error::Domain(format!(
                "sweep at d_pz = {:e} m has {} points, need at least {}",
                self.d_pz,
                self.points.len(),
                Self::MIN_POINTS
            )));
        }
        let mut v: Vec<F> = Vec::with_capacity(self.points.len());
        for p in &self.points {
            if !p.v_bias.is_finite() || !p.a.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite reading in sweep at d_pz = {:e} m",
                    self.d_pz
                )));
            }
            v.push(p.v_bias);
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!(
                "repeated bias voltage in sweep at d_pz = {:e} m",
                self.d_pz
            )));
        }
        Ok(())
    }
}

/// `a(v) = α (v + x₀)² + β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit<F> {
    pub alpha: F,
    pub x0: F,
    pub beta: F,
    pub residual_rms: F,
    /// Standard error of `β` from the fit covariance (0 for an exact fit).
    pub beta_std_err: F,
    /// Standard error of `x₀`.
    pub x0_std_err: F,
}

/// Ordinary least squares parabola fit.
pub fn fit_parabola<F: Real>(sweep: &SweepRecord<F>) -> Result<QuadraticFit<F>> {
    fit_parabola_weighted(sweep, None)
}

/// Weighted least squares parabola fit; `weights` multiply squared residuals.
///
/// The design is built on bias voltages centered and scaled to `[-1, 1]`,
/// which is the same monomial model with a well conditioned basis.
pub fn fit_parabola_weighted<F: Real>(
    sweep: &SweepRecord<F>,
    weights: Option<&[F]>,
) -> Result<QuadraticFit<F>> {
    sweep.validate()?;
    let pts = &sweep.points;
    let n = pts.len();
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|&x| !(x > F::zero()) || !x.is_finite()) {
            return Err(Error::Domain(
                "weights must be positive and one per point".into(),
            ));
        }
    }
    let weight = |i: usize| weights.map_or(F::one(), |w| w[i]);
    let lo = pts.iter().map(|p| p.v_bias).fold(F::infinity(), F::min);
    let hi = pts.iter().map(|p| p.v_bias).fold(F::neg_infinity(), F::max);
    let two = F::lit(2.0);
    let center = (lo + hi) / two;
    let scale = (hi - lo) / two;
    if !(scale > F::zero()) {
        return Err(Error::RankDeficient("all bias voltages are equal".into()));
    }
    let u = |v: F| (v - center) / scale;

    let mut ata = [[F::zero(); 3]; 3];
    let mut atb = [F::zero(); 3];
    for (i, p) in pts.iter().enumerate() {
        let w = weight(i);
        let x = u(p.v_bias);
        let row = [F::one(), x, x * x];
        for r in 0..3 {
            atb[r] = atb[r] + w * row[r] * p.a;
            for c in 0..3 {
                ata[r][c] = ata[r][c] + w * row[r] * row[c];
            }
        }
    }
    let inv = invert(&ata).ok_or_else(|| {
        Error::RankDeficient(format!(
            "parabola design is singular for sweep at d_pz = {:e} m",
            sweep.d_pz
        ))
    })?;
    let coef: Vec<F> = (0..3)
        .map(|r| (0..3).map(|c| inv[r][c] * atb[c]).sum())
        .collect();
    let (c0, c1, c2) = (coef[0], coef[1], coef[2]);

    let mut ssr = F::zero();
    let mut wsum = F::zero();
    for (i, p) in pts.iter().enumerate() {
        let x = u(p.v_bias);
        let r = p.a - (c0 + c1 * x + c2 * x * x);
        ssr = ssr + weight(i) * r * r;
        wsum = wsum + weight(i);
    }
    let residual_rms = (ssr / wsum).sqrt();
    let s2 = ssr / F::lit((n - 3) as f64);

    let four = F::lit(4.0);
    let alpha = c2 / (scale * scale);
    let u_vertex = -c1 / (two * c2);
    let x0 = -(center + scale * u_vertex);
    let beta = c0 - c1 * c1 / (four * c2);

    // delta-method propagation through (c0, c1, c2)
    let g_beta = [F::one(), -c1 / (two * c2), c1 * c1 / (four * c2 * c2)];
    let g_x0 = [F::zero(), scale / (two * c2), -scale * c1 / (two * c2 * c2)];
    let quad_form = |g: &[F; 3]| -> F {
        let mut acc = F::zero();
        for r in 0..3 {
            for c in 0..3 {
                acc = acc + g[r] * inv[r][c] * g[c];
            }
        }
        (s2 * acc).max(F::zero()).sqrt()
    };
    Ok(QuadraticFit {
        alpha,
        x0,
        beta,
        residual_rms,
        beta_std_err: quad_form(&g_beta),
        x0_std_err: quad_form(&g_x0),
    })
}

/// Result of fitting `α = c₁ ε₀ π R / (d₀ − d_pz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaCurveFit<F> {
    pub d0: F,
    pub c1: F,
    /// Standard errors; absent when the system is exactly determined.
    pub d0_std_err: Option<F>,
    pub c1_std_err: Option<F>,
    /// Covariance of `(d0, c1)`; absent when exactly determined.
    pub covariance: Option<[[F; 2]; 2]>,
}

/// Linear regression of `1/α` on `d_pz`, then one Gauss-Newton step on the
/// nonlinear model.
pub fn fit_alpha_curve<F: Real>(alphas: &[(F, F)], radius: F) -> Result<AlphaCurveFit<F>> {
    if !(radius > F::zero()) {
        return Err(Error::Domain(format!("radius must be > 0, got {radius}")));
    }
    let n = alphas.len();
    let mut dz: Vec<F> = alphas.iter().map(|a| a.0).collect();
    dz.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    dz.dedup();
    if dz.len() < 2 {
        return Err(Error::RankDeficient(
            "alpha curve needs sweeps at two or more distinct d_pz".into(),
        ));
    }
    if let Some(&(d, a)) = alphas.iter().find(|(_, a)| !(*a > F::zero())) {
        return Err(Error::InconsistentData(format!(
            "non-positive curvature {a} at d_pz = {d:e} m"
        )));
    }
    let geom = F::lit(VACUUM_PERMITTIVITY) * F::PI() * radius;

    // 1/α = (d0 − d_pz)/K, K = c1 ε0 π R
    let nf = F::lit(n as f64);
    let mean_d = alphas.iter().map(|a| a.0).sum::<F>() / nf;
    let ys: Vec<F> = alphas.iter().map(|a| a.1.recip()).collect();
    let mean_y = ys.iter().copied().sum::<F>() / nf;
    let mut sxx = F::zero();
    let mut sxy = F::zero();
    for (a, &y) in alphas.iter().zip(&ys) {
        sxx = sxx + (a.0 - mean_d) * (a.0 - mean_d);
        sxy = sxy + (a.0 - mean_d) * (y - mean_y);
    }
    let slope = sxy / sxx;
    if !(slope < F::zero()) {
        return Err(Error::InconsistentData(format!(
            "1/alpha does not decrease with d_pz (slope {slope:e}); alpha must grow as the surfaces approach"
        )));
    }
    let intercept = mean_y - slope * mean_d;
    let mut k = -slope.recip();
    let mut d0 = intercept * k;

    // Gauss-Newton in scaled parameters (d0/ds, K/ks)
    let ds = d0.abs();
    let ks = k;
    let normal = |d0: F, k: F| {
        let mut jtj = [[F::zero(); 2]; 2];
        let mut jtr = [F::zero(); 2];
        let mut ssr = F::zero();
        for &(dp, a) in alphas {
            let gap = d0 - dp;
            let r = a - k / gap;
            let j = [-k / (gap * gap) * ds, ks / gap];
            for i in 0..2 {
                jtr[i] = jtr[i] + j[i] * r;
                for c in 0..2 {
                    jtj[i][c] = jtj[i][c] + j[i] * j[c];
                }
            }
            ssr = ssr + r * r;
        }
        (jtj, jtr, ssr)
    };
    if let Some(d) = alphas.iter().map(|a| a.0).find(|&dp| !(d0 > dp)) {
        return Err(Error::InconsistentData(format!(
            "fitted d0 = {d0:e} m does not exceed d_pz = {d:e} m"
        )));
    }
    let (jtj, jtr, _) = normal(d0, k);
    let inv = invert2(&jtj)
        .ok_or_else(|| Error::RankDeficient("alpha-curve Jacobian is singular".into()))?;
    let step = [
        inv[0][0] * jtr[0] + inv[0][1] * jtr[1],
        inv[1][0] * jtr[0] + inv[1][1] * jtr[1],
    ];
    let d0_new = d0 + step[0] * ds;
    let k_new = k + step[1] * ks;
    if d0_new.is_finite() && k_new > F::zero() && alphas.iter().all(|a| d0_new > a.0) {
        d0 = d0_new;
        k = k_new;
    }
    let c1 = k / geom;

    let (d0_std_err, c1_std_err, covariance) = if n > 2 {
        let (jtj, _, ssr) = normal(d0, k);
        let inv = invert2(&jtj)
            .ok_or_else(|| Error::RankDeficient("alpha-curve Jacobian is singular".into()))?;
        let s2 = ssr / F::lit((n - 2) as f64);
        let scale = [ds, ks / geom];
        let mut cov = [[F::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] = s2 * inv[i][j] * scale[i] * scale[j];
            }
        }
        (Some(cov[0][0].sqrt()), Some(cov[1][1].sqrt()), Some(cov))
    } else {
        (None, None, None)
    };
    Ok(AlphaCurveFit {
        d0,
        c1,
        d0_std_err,
        c1_std_err,
        covariance,
    })
}

/// Casimir force magnitude recovered from one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcePoint<F> {
    #[serde(rename = "d_m")]
    pub d: F,
    #[serde(rename = "abs_force_N")]
    pub f_c: F,
    #[serde(rename = "std_err_N")]
    pub std_err: F,
}

/// `d = d₀ − d_pz`, `|F_C| = β / c₁`, sorted by `d`. Returns the points and
/// warnings for negative apparent forces.
pub fn extract_casimir<F: Real>(
    fits: &[(F, QuadraticFit<F>)],
    c1: F,
    d0: F,
) -> Result<(Vec<ForcePoint<F>>, Vec<String>)> {
    if !(c1 > F::zero()) {
        return Err(Error::Domain(format!("c1 must be > 0, got {c1}")));
    }
    let mut warnings = Vec::new();
    let mut out: Vec<ForcePoint<F>> = fits
        .iter()
        .map(|&(d_pz, fit)| {
            if fit.beta < F::zero() {
                warnings.push(format!(
                    "negative apparent force at d_pz = {d_pz:e} m (beta = {:e})",
                    fit.beta
                ));
            }
            ForcePoint {
                d: d0 - d_pz,
                f_c: fit.beta / c1,
                std_err: fit.beta_std_err / c1,
            }
        })
        .collect();
    out.sort_by(|a, b| a.d.partial_cmp(&b.d).unwrap_or(std::cmp::Ordering::Equal));
    Ok((out, warnings))
}

/// Per-sweep residual voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepV0<F> {
    #[serde(rename = "d_pz_m")]
    pub d_pz: F,
    #[serde(rename = "v0_V")]
    pub v0: F,
    #[serde(rename = "v0_std_err_V")]
    pub std_err: F,
}

/// Outcome of the full reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult<F> {
    #[serde(rename = "d0_m")]
    pub d0: F,
    #[serde(rename = "c1_au_per_N")]
    pub c1: F,
    #[serde(rename = "d0_std_err_m")]
    pub d0_std_err: Option<F>,
    #[serde(rename = "c1_std_err_au_per_N")]
    pub c1_std_err: Option<F>,
    pub v0_per_sweep: Vec<SweepV0<F>>,
    pub forces: Vec<ForcePoint<F>>,
    pub fits: Vec<QuadraticFit<F>>,
    pub warnings: Vec<String>,
}

/// Parabola fits for every sweep, the α-curve fit, then force extraction.
pub fn analyze<F: Real>(sweeps: &[SweepRecord<F>], radius: F) -> Result<CalibrationResult<F>> {
    let fits: Vec<QuadraticFit<F>> = sweeps.par_iter().map(fit_parabola).collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    for (s, f) in sweeps.iter().zip(&fits) {
        if !(f.alpha > F::zero()) {
            warnings.push(format!(
                "non-positive curvature {:e} at d_pz = {:e} m",
                f.alpha, s.d_pz
            ));
        }
    }
    let alphas: Vec<(F, F)> = sweeps
        .iter()
        .zip(&fits)
        .map(|(s, f)| (s.d_pz, f.alpha))
        .collect();
    let curve = fit_alpha_curve(&alphas, radius)?;
    let paired: Vec<(F, QuadraticFit<F>)> = sweeps
        .iter()
        .map(|s| s.d_pz)
        .zip(fits.iter().copied())
        .collect();
    let (forces, w) = extract_casimir(&paired, curve.c1, curve.d0)?;
    warnings.extend(w);
    let v0_per_sweep = paired
        .iter()
        .map(|&(d_pz, f)| SweepV0 {
            d_pz,
            v0: f.x0,
            std_err: f.x0_std_err,
        })
        .collect();
    Ok(CalibrationResult {
        d0: curve.d0,
        c1: curve.c1,
        d0_std_err: curve.d0_std_err,
        c1_std_err: curve.c1_std_err,
        v0_per_sweep,
        forces,
        fits,
        warnings,
    })
}

fn invert<F: Real>(m: &[[F; 3]; 3]) -> Option<[[F; 3]; 3]> {
    let [[a, b, c], [d, e, f], [g, h, i]] = *m;
    let co = [
        [e * i - f * h, c * h - b * i, b * f - c * e],
        [f * g - d * i, a * i - c * g, c * d - a * f],
        [d * h - e * g, b * g - a * h, a * e - b * d],
    ];
    let det = a * co[0][0] + b * co[1][0] + c * co[2][0];
    let norm = m.iter().flatten().map(|x| x.abs()).fold(F::zero(), F::max);
    if !(det.abs() > F::epsilon() * F::lit(64.0) * norm * norm * norm) {
        return None;
    }
    let mut out = co;
    for row in &mut out {
        for x in row.iter_mut() {
            *x = *x / det;
        }
    }
    Some(out)
}

fn invert2<F: Real>(m: &[[F; 2]; 2]) -> Option<[[F; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let norm = m.iter().flatten().map(|x| x.abs()).fold(F::zero(), F::max);
    if !(det.abs() > F::epsilon() * F::lit(16.0) * norm * norm) {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sweep(alpha: f64, x0: f64, beta: f64, n: usize) -> SweepRecord<f64> {
        let pts = (0..n)
            .map(|i| {
                let v = -0.5 + 0.6 * i as f64 / (n - 1) as f64;
                SweepPoint {
                    v_bias: v,
                    a: alpha * (v + x0).powi(2) + beta,
                }
            })
            .collect();
        SweepRecord::new(100e-9, pts).unwrap()
    }

    #[test]
    fn exact_parabola_round_trip() {
        let f = fit_parabola(&sweep(3.0, 0.2, 5.0, 7)).unwrap();
        assert!((f.alpha - 3.0).abs() < 1e-12);
        assert!((f.x0 - 0.2).abs() < 1e-12);
        assert!((f.beta - 5.0).abs() < 1e-12);
        assert!(f.residual_rms < 1e-12);
    }

    #[test]
    fn sweep_invariants() {
        let pts = vec![
            SweepPoint {
                v_bias: 0.1,
                a: 1.0
            };
            5
        ];
        assert!(SweepRecord::new(0.0, pts).is_err());
        let few: Vec<_> = (0..4)
            .map(|i| SweepPoint {
                v_bias: i as f64,
                a: 1.0,
            })
            .collect();
        assert!(SweepRecord::new(0.0, few).is_err());
    }

    #[test]
    fn rank_deficient_design() {
        let s = SweepRecord {
            d_pz: 0.0,
            points: vec![
                SweepPoint {
                    v_bias: 0.3,
                    a: 1.0
                };
                6
            ],
        };
        // bypasses the constructor; fitting still refuses it
        assert!(fit_parabola(&s).is_err());
    }

    #[test]
    fn weighted_fit_matches_for_uniform_weights() {
        let s = sweep(2.0, -0.1, 1.0, 9);
        let w = vec![3.0; 9];
        let a = fit_parabola(&s).unwrap();
        let b = fit_parabola_weighted(&s, Some(&w)).unwrap();
        assert_relative_eq!(a.alpha, b.alpha, max_relative = 1e-12);
    }

    fn alpha_points(d0: f64, c1: f64, r: f64, dz: &[f64]) -> Vec<(f64, f64)> {
        let k = c1 * VACUUM_PERMITTIVITY * std::f64::consts::PI * r;
        dz.iter().map(|&d| (d, k / (d0 - d))).collect()
    }

    #[test]
    fn alpha_curve_noiseless() {
        let dz: Vec<f64> = (0..7).map(|i| 100e-9 + 50e-9 * i as f64).collect();
        let pts = alpha_points(500e-9, 1e9, 1e-4, &dz);
        let fit = fit_alpha_curve(&pts, 1e-4).unwrap();
        assert_relative_eq!(fit.d0, 500e-9, max_relative = 1e-10);
        assert_relative_eq!(fit.c1, 1e9, max_relative = 1e-10);
        assert!(fit.d0_std_err.unwrap() < 1e-15);
    }

    #[test]
    fn alpha_curve_two_points_is_exact() {
        let pts = alpha_points(500e-9, 1e9, 1e-4, &[100e-9, 300e-9]);
        let fit = fit_alpha_curve(&pts, 1e-4).unwrap();
        assert_relative_eq!(fit.d0, 500e-9, max_relative = 1e-12);
        assert_relative_eq!(fit.c1, 1e9, max_relative = 1e-12);
        assert!(fit.d0_std_err.is_none());
    }

    #[test]
    fn alpha_curve_rejects_wrong_trend() {
        let pts = vec![(100e-9, 5.0), (200e-9, 4.0), (300e-9, 3.0)];
        assert!(matches!(
            fit_alpha_curve(&pts, 1e-4),
            Err(Error::InconsistentData(_))
        ));
    }

    #[test]
    fn extraction_divides_and_sorts() {
        let fit = |beta: f64| QuadraticFit {
            alpha: 1.0,
            x0: 0.2,
            beta,
            residual_rms: 0.0,
            beta_std_err: 0.0,
            x0_std_err: 0.0,
        };
        let (pts, warn) = extract_casimir(
            &[
                (100e-9, fit(0.0)),
                (400e-9, fit(2.723e-1)),
                (200e-9, fit(-1e-3)),
            ],
            1e9,
            500e-9,
        )
        .unwrap();
        assert_relative_eq!(pts[0].d, 100e-9, max_relative = 1e-12);
        assert_relative_eq!(pts[0].f_c, 2.723e-10, max_relative = 1e-12);
        assert_eq!(pts[2].f_c, 0.0);
        assert_eq!(warn.len(), 1);
    }
}
