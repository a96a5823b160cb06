//! One-dimensional quadrature kernels.
//!
//! Two independent schemes are provided:
//!
//! * globally adaptive Gauss-Legendre, where each interval's error is the
//!   difference between the rule on the whole interval and on its two halves;
//! * tanh-sinh (double exponential), refined level by level until successive
//!   levels agree.
//!
//! Both are open rules: the interval endpoints are never evaluated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Integral estimate with its error bound and cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<F> {
    pub value: F,
    pub abs_err: F,
    pub evals: usize,
}

/// Convergence target: `abs_err <= max(rel * |value|, abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance<F> {
    pub rel: F,
    pub abs: F,
}

impl<F: Real> Tolerance<F> {
    pub fn relative(rel: F) -> Self {
        Self {
            rel,
            abs: F::zero(),
        }
    }

    fn target(&self, value: F) -> F {
        (self.rel * value.abs()).max(self.abs)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre<F> {
    nodes: Vec<F>,
    weights: Vec<F>,
}

impl<F: Real> GaussLegendre<F> {
    /// Builds an `n`-point rule. Nodes are found by Newton iteration on the
    /// Legendre polynomial in `f64` and then narrowed to `F`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self {
            nodes: nodes.into_iter().map(F::lit).collect(),
            weights: weights.into_iter().map(F::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[F] {
        &self.nodes
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// Applies the rule once on `[a, b]`.
    pub fn apply<G: FnMut(F) -> F>(&self, f: &mut G, a: F, b: F) -> F {
        let half = (b - a) / F::lit(2.0);
        let mid = a + half;
        let sum: F = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        sum * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy)]
struct Interval<F> {
    a: F,
    b: F,
    left: F,
    right: F,
    err: F,
}

impl<F: Real> PartialEq for Interval<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<F: Real> Eq for Interval<F> {}

impl<F: Real> PartialOrd for Interval<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<F: Real> Ord for Interval<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

fn estimate_interval<F: Real, G: FnMut(F) -> F>(
    rule: &GaussLegendre<F>,
    f: &mut G,
    a: F,
    b: F,
    whole: F,
) -> Interval<F> {
    let m = a + (b - a) / F::lit(2.0);
    let left = rule.apply(f, a, m);
    let right = rule.apply(f, m, b);
    let err = (whole - (left + right)).abs();
    Interval {
        a,
        b,
        left,
        right,
        err: if err.is_nan() { F::infinity() } else { err },
    }
}

/// Globally adaptive Gauss-Legendre integration of `f` over `[a, b]`.
pub fn adaptive_gauss_legendre<F: Real, G: FnMut(F) -> F>(
    rule: &GaussLegendre<F>,
    f: G,
    a: F,
    b: F,
    tol: Tolerance<F>,
    max_evals: usize,
) -> Result<Estimate<F>> {
    adaptive_gauss_legendre_segments(rule, f, &[a, b], tol, max_evals)
}

/// Adaptive Gauss-Legendre over consecutive segments `breaks[i]..breaks[i+1]`.
///
/// Every segment starts as its own interval, so kinks or sample points of a
/// piecewise integrand should be passed as break points.
pub fn adaptive_gauss_legendre_segments<F: Real, G: FnMut(F) -> F>(
    rule: &GaussLegendre<F>,
    mut f: G,
    breaks: &[F],
    tol: Tolerance<F>,
    max_evals: usize,
) -> Result<Estimate<F>> {
    let n = rule.len();
    let mut evals = 0usize;
    let mut heap = BinaryHeap::with_capacity(breaks.len());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b == a {
            continue;
        }
        let whole = rule.apply(&mut f, a, b);
        heap.push(estimate_interval(rule, &mut f, a, b, whole));
        evals += 3 * n;
    }
    let mut value: F = heap.iter().map(|iv| iv.left + iv.right).sum();
    let mut err: F = heap.iter().map(|iv| iv.err).sum();
    let mut magnitude: F = heap.iter().map(|iv| iv.left.abs() + iv.right.abs()).sum();
    let mut frozen = Vec::new();
    loop {
        let floor = F::lit(50.0) * F::epsilon() * magnitude;
        if err <= tol.target(value).max(floor) || heap.is_empty() {
            break;
        }
        if evals + 4 * n > max_evals {
            return Err(Error::NonConvergence {
                value: value.as_f64(),
                abs_err: err.as_f64(),
                evals,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let m = worst.a + (worst.b - worst.a) / F::lit(2.0);
        if m <= worst.a || m >= worst.b {
            frozen.push(worst);
            continue;
        }
        let l = estimate_interval(rule, &mut f, worst.a, m, worst.left);
        let r = estimate_interval(rule, &mut f, m, worst.b, worst.right);
        evals += 4 * n;
        value = value - (worst.left + worst.right) + (l.left + l.right + r.left + r.right);
        err = err - worst.err + l.err + r.err;
        magnitude = magnitude - (worst.left.abs() + worst.right.abs())
            + (l.left.abs() + l.right.abs() + r.left.abs() + r.right.abs());
        heap.push(l);
        heap.push(r);
        if !err.is_finite() || !value.is_finite() {
            let all = heap.iter().chain(frozen.iter());
            (value, err) = all.fold((F::zero(), F::zero()), |(v, e), iv| {
                (v + iv.left + iv.right, e + iv.err)
            });
        }
    }
    // Final sums are recomputed so the running updates leave no drift.
    let all = heap.iter().chain(frozen.iter());
    let (value, err) = all.fold((F::zero(), F::zero()), |(v, e), iv| {
        (v + iv.left + iv.right, e + iv.err)
    });
    Ok(Estimate {
        value,
        abs_err: err,
        evals,
    })
}

/// Tanh-sinh integration of `f` over the open interval `(a, b)`.
///
/// Level `k` uses step `2^-k` in the transformed variable. The error estimate
/// is the change between the last two levels.
pub fn tanh_sinh<F: Real, G: FnMut(F) -> F>(
    mut f: G,
    a: F,
    b: F,
    tol: Tolerance<F>,
    max_level: usize,
    max_evals: usize,
) -> Result<Estimate<F>> {
    if a == b {
        return Ok(Estimate {
            value: F::zero(),
            abs_err: F::zero(),
            evals: 0,
        });
    }
    let two = F::lit(2.0);
    let half_pi = F::FRAC_PI_2();
    let centre = a + (b - a) / two;
    let half = (b - a) / two;
    let mut evals = 0usize;

    // Sum of weight * f over nodes t = j*h for the given j values, walking
    // outward until nodes collapse onto the endpoints or weights vanish.
    let node_sum =
        |h: F, start: usize, stride: usize, f: &mut G, evals: &mut usize, abs_sum: &mut F| -> F {
            let mut sum = F::zero();
            let mut j = start;
            loop {
                let t = F::lit(j as f64) * h;
                let u = half_pi * t.sinh();
                let e2u = (two * u).exp();
                // distance from the endpoint, 1 - tanh(u) scaled
                let gap = half * two / (e2u + F::one());
                let sech = two / (u.exp() + (-u).exp());
                let w = half * half_pi * t.cosh() * sech * sech;
                let hi = b - gap;
                let lo = a + gap;
                if !(w > F::zero()) || gap <= F::zero() {
                    break;
                }
                // near a short interval end the node may round onto the endpoint
                // before the other side runs out of representable points
                let hi_ok = hi < b;
                let lo_ok = lo > a;
                if !hi_ok && !lo_ok {
                    break;
                }
                let mut contribution = F::zero();
                if hi_ok {
                    contribution = contribution + f(hi);
                    *evals += 1;
                }
                if lo_ok {
                    contribution = contribution + f(lo);
                    *evals += 1;
                }
                sum = sum + w * contribution;
                *abs_sum = *abs_sum + w * contribution.abs();
                j += stride;
            }
            sum
        };

    // Nodes are rounded to representable points, which costs about one ulp
    // of the interval position relative to its width.
    let position = a.abs().max(b.abs());
    let rounding = F::lit(50.0) * F::epsilon() * (F::one() + position / (b - a).abs());
    let w0 = half * half_pi;
    let centre_term = w0 * f(centre);
    evals += 1;
    let mut abs_sum = centre_term.abs();
    let mut estimate = centre_term + node_sum(F::one(), 1, 1, &mut f, &mut evals, &mut abs_sum);
    let mut abs_estimate = abs_sum;
    let mut last_diff = F::infinity();
    for level in 1..=max_level {
        let h = F::one() / F::lit((1u64 << level) as f64);
        let mut fresh_abs = F::zero();
        let fresh = node_sum(h, 1, 2, &mut f, &mut evals, &mut fresh_abs);
        let next = estimate / two + h * fresh;
        abs_estimate = abs_estimate / two + h * fresh_abs;
        let diff = (next - estimate).abs();
        estimate = next;
        let floor = rounding * abs_estimate;
        if level >= 3 && diff <= tol.target(estimate).max(floor) {
            return Ok(Estimate {
                value: estimate,
                abs_err: diff,
                evals,
            });
        }
        last_diff = diff;
        if evals > max_evals {
            break;
        }
    }
    Err(Error::NonConvergence {
        value: estimate.as_f64(),
        abs_err: last_diff.as_f64(),
        evals,
    })
}
