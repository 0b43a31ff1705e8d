//! Self-convolutions `σ^{(*n)}` of the Lorentz invariant measure on `H^1`
//! and `H^2`, evaluated at `ξ = 0` and transported to other points through
//! the Lorentz reduction `(ξ, τ) ↦ (0, sqrt(τ² - |ξ|²))`.
//!
//! The one-dimensional integrals have inverse square root singularities at
//! both endpoints. Each integral is split at the midpoint; the left half is
//! integrated in `v` with `x = n cosh v` and the right half in `w` with
//! `x = (τ - 1) cos w`. Distances to the endpoints are rewritten through
//! `sinh²(v/2)` and `sin²(w/2)` so they are never formed by subtraction.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Dim;
use crate::quad::{integrate, Estimate, QuadConfig};

/// `σ^{(*3)}(0, 3^+) = 2π/√3`, the supremum of `σ^{(*3)}` on `H^1`.
pub const SIGMA3_BOUNDARY: f64 = 3.627_598_728_468_436;

/// Width of the interval `(3, 3 + BOUNDARY_WINDOW)` on which `σ^{(*3)}` on
/// `H^1` is reported by its boundary limit instead of by quadrature.
pub const BOUNDARY_WINDOW: f64 = 1e-6;

/// One evaluation of a convolution measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvEval {
    pub value: f64,
    pub error: f64,
    /// Set when the value is a boundary limit rather than a computed value:
    /// `+∞` on the edge of the support of `σ*σ` on `H^1`, or `2π/√3` just
    /// above the edge of the support of `σ^{(*3)}` on `H^1`.
    pub boundary: bool,
}

impl ConvEval {
    fn exact(value: f64) -> Self {
        ConvEval {
            value,
            error: 0.0,
            boundary: false,
        }
    }

    fn zero() -> Self {
        Self::exact(0.0)
    }
}

fn squared_interval(xi: &[f64], tau: f64) -> Option<f64> {
    let norm = xi.iter().fold(0.0f64, |acc, &x| acc.hypot(x));
    if !(tau > norm) {
        return None;
    }
    Some((tau - norm) * (tau + norm))
}

/// `(σ*σ)(ξ, τ) = 4 / (sqrt(τ² - ξ²) sqrt(τ² - ξ² - 4))` on `H^1`.
///
/// Zero outside the support; `+∞` on its boundary `τ² - ξ² = 4`.
pub fn conv2_1d(xi: f64, tau: f64) -> f64 {
    match squared_interval(&[xi], tau) {
        Some(s2) if s2 > 4.0 => 4.0 / (s2.sqrt() * (s2 - 4.0).sqrt()),
        Some(4.0) => f64::INFINITY,
        _ => 0.0,
    }
}

/// `(σ*σ)(ξ, τ) = 2π / sqrt(τ² - |ξ|²)` on `H^2`, zero off the support.
pub fn conv2_2d(xi: [f64; 2], tau: f64) -> f64 {
    match squared_interval(&xi, tau) {
        Some(s2) if s2 >= 4.0 => TAU / s2.sqrt(),
        _ => 0.0,
    }
}

/// `σ^{(*3)}(ξ, τ) = (2π)² (1 - 3 / sqrt(τ² - |ξ|²))` on `H^2`, zero off the support.
pub fn conv3_2d(xi: [f64; 2], tau: f64) -> f64 {
    match squared_interval(&xi, tau) {
        Some(s2) if s2 >= 9.0 => TAU * TAU * (1.0 - 3.0 / s2.sqrt()),
        _ => 0.0,
    }
}

/// `σ^{(*3)}(0, τ)` on `H^1`:
/// `16 ∫_2^{τ-1} [((τ+1)² - x²)((τ-1)² - x²)(x² - 4)]^{-1/2} dx`.
pub fn conv3_1d(tau: f64, cfg: &QuadConfig) -> Result<ConvEval> {
    if !tau.is_finite() {
        return Err(Error::domain("τ", format!("τ = {tau}")));
    }
    if tau <= 3.0 {
        return Ok(ConvEval::zero());
    }
    conv3_1d_above(tau - 3.0, cfg)
}

/// `σ^{(*3)}(ξ, τ)` on `H^1` through the Lorentz reduction.
pub fn conv3_1d_at(xi: f64, tau: f64, cfg: &QuadConfig) -> Result<ConvEval> {
    match squared_interval(&[xi], tau) {
        Some(s2) if s2 > 9.0 => conv3_1d(s2.sqrt(), cfg),
        _ => Ok(ConvEval::zero()),
    }
}

// σ^{(*3)}(0, 3 + gap) with the gap τ - 3 given exactly.
fn conv3_1d_above(gap: f64, cfg: &QuadConfig) -> Result<ConvEval> {
    if !(gap > 0.0) {
        return Ok(ConvEval::zero());
    }
    if gap < BOUNDARY_WINDOW {
        return Ok(ConvEval {
            value: SIGMA3_BOUNDARY,
            // L ≤ σ^{(*3)} ≤ U ≤ U(3) = 2π/√3
            error: SIGMA3_BOUNDARY - bound_l(3.0 + gap).unwrap_or(0.0),
            boundary: true,
        });
    }
    let tau = 3.0 + gap;
    let (v_max, w_max) = split_limits(2.0, tau - 1.0, gap);
    // left half: x = 2 cosh v, dx / sqrt(x² - 4) = dv
    let left = integrate(
        |v: f64| {
            let sh = (0.5 * v).sinh();
            let above = 4.0 * sh * sh;
            let x = 2.0 + above;
            let below = gap - above;
            16.0 / ((tau + 1.0 - x) * (tau + 1.0 + x) * below * (tau - 1.0 + x)).sqrt()
        },
        0.0,
        v_max,
        cfg,
    );
    // right half: x = (τ - 1) cos w, dx / sqrt((τ-1)² - x²) = dw
    let right = integrate(
        |w: f64| {
            let sn = (0.5 * w).sin();
            let below = 2.0 * (tau - 1.0) * sn * sn;
            let x = tau - 1.0 - below;
            let above = gap - below;
            16.0 / ((tau + 1.0 - x) * (tau + 1.0 + x) * above * (x + 2.0)).sqrt()
        },
        0.0,
        w_max,
        cfg,
    );
    combine(left, right)
}

// Limits of the two substituted integrals for ∫_lo^hi with hi - lo = gap,
// split at the midpoint: v_max = acosh(m / lo), w_max = acos(m / hi).
fn split_limits(lo: f64, hi: f64, gap: f64) -> (f64, f64) {
    let half = 0.5 * gap;
    let v_max = 2.0 * (half / (2.0 * lo)).sqrt().asinh();
    let w_max = 2.0 * (half / (2.0 * hi)).sqrt().asin();
    (v_max, w_max)
}

fn combine(left: Result<Estimate>, right: Result<Estimate>) -> Result<ConvEval> {
    let parts = |r: &Result<Estimate>| match r {
        Ok(e) => Ok((e.value, e.error)),
        Err(Error::Accuracy { estimate, error }) => Err((*estimate, *error)),
        Err(_) => Ok((f64::NAN, f64::NAN)),
    };
    for r in [&left, &right] {
        if let Err(e) = r {
            if !matches!(e, Error::Accuracy { .. }) {
                return Err(e.clone());
            }
        }
    }
    match (parts(&left), parts(&right)) {
        (Ok((a, ea)), Ok((b, eb))) => Ok(ConvEval {
            value: a + b,
            error: ea + eb,
            boundary: false,
        }),
        (Ok(x) | Err(x), Ok(y) | Err(y)) => Err(Error::Accuracy {
            estimate: x.0 + y.0,
            error: x.1 + y.1,
        }),
    }
}

/// `L(τ) = 16π / [sqrt((τ+1)² - 4) sqrt(2(τ-1)) sqrt(τ+1)]`, a lower bound
/// for `σ^{(*3)}(0, τ)` on `H^1`.
pub fn bound_l(tau: f64) -> Result<f64> {
    check_above_three(tau)?;
    let a = ((tau - 1.0) * (tau + 3.0)).sqrt();
    Ok(16.0 * PI / (a * (2.0 * (tau - 1.0)).sqrt() * (tau + 1.0).sqrt()))
}

/// `U(τ) = 4π / sqrt(τ(τ+1))`, an upper bound for `σ^{(*3)}(0, τ)` on `H^1`.
/// Strictly decreasing with `U(3) = 2π/√3`.
pub fn bound_u(tau: f64) -> Result<f64> {
    check_above_three(tau)?;
    Ok(4.0 * PI / (tau * (tau + 1.0)).sqrt())
}

fn check_above_three(tau: f64) -> Result<()> {
    if !(tau > 3.0) || !tau.is_finite() {
        return Err(Error::domain("τ", format!("τ = {tau}, expected τ > 3")));
    }
    Ok(())
}

/// How a [`MeasureProfile`] produces its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvaluatorKind {
    ClosedForm,
    Quadrature,
    Recursive,
    Interpolated,
}

/// The function `τ ↦ σ^{(*n)}(0, τ)` on `H^d`, vanishing for `τ ≤ n`.
#[derive(Debug, Clone)]
pub struct MeasureProfile {
    dim: Dim,
    folds: u32,
    source: Source,
}

#[derive(Debug, Clone)]
enum Source {
    Sigma2Line,
    Sigma2Plane,
    Sigma3Plane,
    Sigma3Line(QuadConfig),
    Recursive { inner: Arc<MeasureProfile>, cfg: QuadConfig },
    Cached(Arc<ProfileCache>),
}

impl MeasureProfile {
    /// Closed form of `σ*σ` on `H^1`.
    pub fn conv2_1d() -> Self {
        MeasureProfile {
            dim: Dim::One,
            folds: 2,
            source: Source::Sigma2Line,
        }
    }

    /// Closed form of `σ*σ` on `H^2`.
    pub fn conv2_2d() -> Self {
        MeasureProfile {
            dim: Dim::Two,
            folds: 2,
            source: Source::Sigma2Plane,
        }
    }

    /// Closed form of `σ^{(*3)}` on `H^2`.
    pub fn conv3_2d() -> Self {
        MeasureProfile {
            dim: Dim::Two,
            folds: 3,
            source: Source::Sigma3Plane,
        }
    }

    /// `σ^{(*3)}` on `H^1` by direct quadrature.
    pub fn conv3_1d(cfg: QuadConfig) -> Self {
        MeasureProfile {
            dim: Dim::One,
            folds: 3,
            source: Source::Sigma3Line(cfg),
        }
    }

    /// `σ^{(*(n+1))}` on `H^1` from the profile of `σ^{(*n)}`.
    pub fn recursive(inner: MeasureProfile, cfg: QuadConfig) -> Result<Self> {
        if inner.dim != Dim::One {
            return Err(Error::Unsupported("the convolution recursion is implemented on H^1 only".into()));
        }
        Ok(MeasureProfile {
            dim: Dim::One,
            folds: inner.folds + 1,
            source: Source::Recursive {
                inner: Arc::new(inner),
                cfg,
            },
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn folds(&self) -> u32 {
        self.folds
    }

    /// `σ^{(*n)}(0, τ)` vanishes for `τ ≤ n`.
    pub fn support_threshold(&self) -> f64 {
        self.folds as f64
    }

    pub fn kind(&self) -> EvaluatorKind {
        match self.source {
            Source::Sigma2Line | Source::Sigma2Plane | Source::Sigma3Plane => EvaluatorKind::ClosedForm,
            Source::Sigma3Line(_) => EvaluatorKind::Quadrature,
            Source::Recursive { .. } => EvaluatorKind::Recursive,
            Source::Cached(_) => EvaluatorKind::Interpolated,
        }
    }

    /// `σ^{(*n)}(0, τ)`.
    pub fn eval(&self, tau: f64) -> Result<ConvEval> {
        if !tau.is_finite() {
            return Err(Error::domain("τ", format!("τ = {tau}")));
        }
        let n = self.support_threshold();
        if tau < n {
            return Ok(ConvEval::zero());
        }
        self.eval_above(tau - n)
    }

    /// `σ^{(*n)}(ξ, τ)`, through the Lorentz reduction.
    pub fn eval_at(&self, xi: &[f64], tau: f64) -> Result<ConvEval> {
        let expected = self.dim.as_int() as usize;
        if xi.len() != expected {
            return Err(Error::Invalid(format!("ξ has {} components, expected {expected}", xi.len())));
        }
        match squared_interval(xi, tau) {
            Some(s2) => self.eval(s2.sqrt()),
            None => Ok(ConvEval::zero()),
        }
    }

    /// `σ^{(*n)}(0, n + above)`, with the distance to the support edge given
    /// exactly so that values close to the edge keep full relative accuracy.
    pub fn eval_above(&self, above: f64) -> Result<ConvEval> {
        if !(above >= 0.0) {
            return Ok(ConvEval::zero());
        }
        match &self.source {
            Source::Sigma2Line => {
                if above == 0.0 {
                    return Ok(ConvEval {
                        value: f64::INFINITY,
                        error: 0.0,
                        boundary: true,
                    });
                }
                let tau = 2.0 + above;
                Ok(ConvEval::exact(4.0 / (tau * (above * (above + 4.0)).sqrt())))
            }
            Source::Sigma2Plane => Ok(ConvEval::exact(TAU / (2.0 + above))),
            Source::Sigma3Plane => Ok(ConvEval::exact(TAU * TAU * above / (3.0 + above))),
            Source::Sigma3Line(cfg) => conv3_1d_above(above, cfg),
            Source::Recursive { inner, cfg } => recursive_above(inner, above, cfg),
            Source::Cached(cache) => cache.eval_above(above),
        }
    }

    /// Tabulates the profile on `nodes` points with `τ - n` log-spaced in
    /// `[BOUNDARY_WINDOW, tau_max - n]` and returns a profile that
    /// interpolates between them with a monotone cubic. Outside that range
    /// the original evaluator is used. Interpolation runs on `ln σ` against
    /// `ln(τ - n)`, so the profile values must be positive.
    pub fn cached(&self, nodes: usize, tau_max: f64) -> Result<MeasureProfile> {
        let n = self.support_threshold();
        if nodes < 4 || !(tau_max > n + 10.0 * BOUNDARY_WINDOW) {
            return Err(Error::Invalid(format!(
                "profile cache needs at least 4 nodes and τ_max > {n}, got {nodes} and {tau_max}"
            )));
        }
        let cache = ProfileCache::build(self.clone(), nodes, tau_max - n)?;
        Ok(MeasureProfile {
            dim: self.dim,
            folds: self.folds,
            source: Source::Cached(Arc::new(cache)),
        })
    }

    /// Estimated relative interpolation error of a cached profile, `None` otherwise.
    pub fn cache_error(&self) -> Option<f64> {
        match &self.source {
            Source::Cached(c) => Some(c.interp_error),
            _ => None,
        }
    }
}

/// `σ^{(*(n+1))}(0, τ) = 4 ∫_n^{τ-1} x σ^{(*n)}(0, x) [((τ+1)² - x²)((τ-1)² - x²)]^{-1/2} dx`
/// on `H^1`, with `profile_n` evaluating `σ^{(*n)}(0, ·)`.
pub fn conv_recursive(n: u32, profile_n: &MeasureProfile, tau: f64, cfg: &QuadConfig) -> Result<ConvEval> {
    if profile_n.folds() != n || n < 2 {
        return Err(Error::Invalid(format!(
            "profile has {} folds, recursion step expects n = {n} ≥ 2",
            profile_n.folds()
        )));
    }
    if profile_n.dim() != Dim::One {
        return Err(Error::Unsupported("the convolution recursion is implemented on H^1 only".into()));
    }
    if !tau.is_finite() {
        return Err(Error::domain("τ", format!("τ = {tau}")));
    }
    let threshold = n as f64 + 1.0;
    if tau <= threshold {
        return Ok(ConvEval::zero());
    }
    recursive_above(profile_n, tau - threshold, cfg)
}

fn recursive_above(inner: &MeasureProfile, gap: f64, cfg: &QuadConfig) -> Result<ConvEval> {
    if !(gap > 0.0) {
        return Ok(ConvEval::zero());
    }
    let n = inner.support_threshold();
    let tau = n + 1.0 + gap;
    let (v_max, w_max) = split_limits(n, tau - 1.0, gap);
    let mut failure: Option<Error> = None;
    let mut inner_error = 0.0f64;
    let mut sigma = |above: f64| -> f64 {
        match inner.eval_above(above) {
            Ok(e) => {
                inner_error = inner_error.max(e.error / e.value.abs().max(f64::MIN_POSITIVE));
                e.value
            }
            Err(Error::Accuracy { estimate, error }) => {
                inner_error = inner_error.max(error / estimate.abs().max(f64::MIN_POSITIVE));
                estimate
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    // left half: x = n cosh v, dx = n sinh v dv
    let left = integrate(
        |v: f64| {
            let sh = (0.5 * v).sinh();
            let above = 2.0 * n * sh * sh;
            let x = n + above;
            let below = gap - above;
            let jac = n * v.sinh();
            4.0 * x * sigma(above) * jac / ((tau + 1.0 - x) * (tau + 1.0 + x) * below * (tau - 1.0 + x)).sqrt()
        },
        0.0,
        v_max,
        cfg,
    );
    let right = integrate(
        |w: f64| {
            let sn = (0.5 * w).sin();
            let below = 2.0 * (tau - 1.0) * sn * sn;
            let x = tau - 1.0 - below;
            let above = gap - below;
            4.0 * x * sigma(above) / ((tau + 1.0 - x) * (tau + 1.0 + x)).sqrt()
        },
        0.0,
        w_max,
        cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut out = combine(left, right)?;
    out.error += inner_error * out.value;
    Ok(out)
}

#[derive(Debug)]
struct ProfileCache {
    inner: MeasureProfile,
    log_above: Vec<f64>,
    // logarithms of the profile values at the nodes
    values: Vec<f64>,
    slopes: Vec<f64>,
    // relative errors
    node_error: f64,
    interp_error: f64,
}

impl ProfileCache {
    fn build(inner: MeasureProfile, nodes: usize, above_max: f64) -> Result<Self> {
        let lo = BOUNDARY_WINDOW.ln();
        let hi = above_max.ln();
        let log_above: Vec<f64> = (0..nodes).map(|i| lo + (hi - lo) * i as f64 / (nodes - 1) as f64).collect();
        let mut values = Vec::with_capacity(nodes);
        let mut node_error = 0.0f64;
        for &la in &log_above {
            let e = inner.eval_above(la.exp())?;
            node_error = node_error.max(e.error / e.value);
            if !(e.value > 0.0) {
                return Err(Error::Invalid(format!(
                    "profile value {} at τ - n = {} cannot be cached",
                    e.value,
                    la.exp()
                )));
            }
            values.push(e.value.ln());
        }
        let slopes = pchip_slopes(&log_above, &values);
        let mut cache = ProfileCache {
            inner,
            log_above,
            values,
            slopes,
            node_error,
            interp_error: 0.0,
        };
        // compare against direct evaluation at a sample of cell midpoints
        let stride = (nodes / 50).max(1);
        let mut worst = 0.0f64;
        for i in (0..nodes - 1).step_by(stride) {
            let la = 0.5 * (cache.log_above[i] + cache.log_above[i + 1]);
            let direct = cache.inner.eval_above(la.exp())?.value;
            worst = worst.max((cache.interpolate(la) / direct - 1.0).abs());
        }
        cache.interp_error = worst;
        Ok(cache)
    }

    fn eval_above(&self, above: f64) -> Result<ConvEval> {
        let la = above.ln();
        let (first, last) = (self.log_above[0], self.log_above[self.log_above.len() - 1]);
        if !(la >= first && la <= last) {
            return self.inner.eval_above(above);
        }
        let value = self.interpolate(la);
        Ok(ConvEval {
            value,
            error: value * (self.node_error + self.interp_error),
            boundary: false,
        })
    }

    fn interpolate(&self, la: f64) -> f64 {
        let xs = &self.log_above;
        let i = match xs.partition_point(|&x| x <= la) {
            0 => 0,
            k => (k - 1).min(xs.len() - 2),
        };
        hermite(
            xs[i],
            xs[i + 1],
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            la,
        )
        .exp()
    }
}

/// Fritsch–Carlson slopes for a monotone piecewise cubic Hermite interpolant.
pub(crate) fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = pchip_end(
        h[0],
        h.get(1).copied().unwrap_or(h[0]),
        delta[0],
        delta.get(1).copied().unwrap_or(delta[0]),
    );
    d[n - 1] = pchip_end(
        h[n - 2],
        if n > 2 { h[n - 3] } else { h[n - 2] },
        delta[n - 2],
        if n > 2 { delta[n - 3] } else { delta[n - 2] },
    );
    d
}

fn pchip_end(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}

/// One row of the grid report behind [`sup_conv3_1d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub tau: f64,
    pub lower: f64,
    pub sigma3: f64,
    pub sigma3_error: f64,
    pub upper: f64,
}

impl SandwichRow {
    /// `L(τ) ≤ σ^{(*3)}(0, τ) ≤ U(τ) < 2π/√3`, allowing for the quadrature error.
    pub fn holds(&self) -> bool {
        let slack = self.sigma3_error;
        self.lower <= self.sigma3 + slack && self.sigma3 <= self.upper + slack && self.upper < SIGMA3_BOUNDARY
    }
}

/// Grid evidence that `2π/√3` is a strict supremum of `σ^{(*3)}(0, ·)` on `H^1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupCertificate {
    pub value: f64,
    pub rows: Vec<SandwichRow>,
    /// Every row satisfies the sandwich with a strict upper bound.
    pub certified: bool,
    /// `max τ σ^{(*3)}(0, τ)` over the rows with `10 ≤ τ ≤ 100`.
    pub decay_constant: f64,
}

/// Computes `L`, `σ^{(*3)}` and `U` on the given grid of `τ > 3`.
pub fn sandwich_rows(taus: &[f64], cfg: &QuadConfig) -> Result<Vec<SandwichRow>> {
    taus.iter()
        .map(|&tau| {
            let s = conv3_1d(tau, cfg)?;
            Ok(SandwichRow {
                tau,
                lower: bound_l(tau)?,
                sigma3: s.value,
                sigma3_error: s.error,
                upper: bound_u(tau)?,
            })
        })
        .collect()
}

/// The supremum `2π/√3` of `σ^{(*3)}(0, ·)` on `H^1`, approached only as
/// `τ → 3^+`, with a certificate on 500 points whose distance to 3 is
/// log-spaced in `[0.01, 97]`.
pub fn sup_conv3_1d(cfg: &QuadConfig) -> Result<SupCertificate> {
    let taus: Vec<f64> = (0..500).map(|i| 3.0 + 0.01 * (9700f64).powf(i as f64 / 499.0)).collect();
    let rows = sandwich_rows(&taus, cfg)?;
    let certified = rows.iter().all(SandwichRow::holds);
    let decay_constant = rows
        .iter()
        .filter(|r| (10.0..=100.0).contains(&r.tau))
        .map(|r| r.tau * r.sigma3)
        .fold(0.0f64, f64::max);
    Ok(SupCertificate {
        value: SIGMA3_BOUNDARY,
        rows,
        certified,
        decay_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::japanese;
    use crate::quad::GaussLegendre;
    use proptest::prelude::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    // σ^{(*3)}(0, τ) on H^1 with x = 2 + (τ - 3) sin²φ, which removes both
    // endpoint singularities at once: dx / sqrt((x-2)(τ-1-x)) = 2 dφ.
    fn sigma3_oracle(tau: f64) -> f64 {
        let g = tau - 3.0;
        let gl = GaussLegendre::new(40);
        gl.composite(
            |phi: f64| {
                let x = 2.0 + g * phi.sin().powi(2);
                32.0 / (((tau + 1.0).powi(2) - x * x) * (tau - 1.0 + x) * (x + 2.0)).sqrt()
            },
            0.0,
            PI / 2.0,
            16,
        )
    }

    #[test]
    fn boundary_limit_constant() {
        assert!((SIGMA3_BOUNDARY - TAU / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn conv2_1d_examples() {
        assert!((conv2_1d(0.0, 3.0) - 4.0 / (3.0 * 5f64.sqrt())).abs() < 1e-15);
        assert!((conv2_1d(0.0, 3.0) - 0.596_285).abs() < 1e-6);
        assert!((conv2_1d(1.0, 3.0) - conv2_1d(0.0, 8f64.sqrt())).abs() < 1e-14);
        assert!((conv2_1d(1.0, 3.0) - 0.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(conv2_1d(0.0, 1.5), 0.0);
        assert_eq!(conv2_1d(0.0, 2.0), f64::INFINITY);
        assert_eq!(conv2_1d(5.0, 3.0), 0.0);
    }

    #[test]
    fn conv2_1d_mollified_oracle() {
        // σ*σ(0, τ) = ∫ δ(τ - 2 cosh u) / cosh u du after integrating the
        // spatial delta; average it over a box of width 1e-3 around τ.
        for tau in [2.5f64, 3.0, 4.0, 7.0] {
            let h = 1e-3;
            let u0 = ((tau - h / 2.0) / 2.0).acosh();
            let u1 = ((tau + h / 2.0) / 2.0).acosh();
            let gl = GaussLegendre::new(20);
            let brute = 2.0 * gl.composite(|u: f64| 1.0 / u.cosh(), u0, u1, 8) / h;
            let closed = gl.integrate(|t: f64| conv2_1d(0.0, t), tau - h / 2.0, tau + h / 2.0) / h;
            assert!((brute - closed).abs() < 1e-9 * closed, "τ={tau}: {brute} vs {closed}");
        }
    }

    #[test]
    fn conv2_2d_mollified_oracle() {
        // σ*σ(0, τ) = 2π ∫ r δ(τ - 2<r>) / <r>² dr on H^2
        for tau in [2.2f64, 3.0, 6.0] {
            let h = 1e-3;
            let r0 = ((tau - h / 2.0) / 2.0).powi(2) - 1.0;
            let r1 = ((tau + h / 2.0) / 2.0).powi(2) - 1.0;
            let gl = GaussLegendre::new(20);
            let brute = TAU * gl.integrate(|r2: f64| 0.5 / (1.0 + r2), r0.max(0.0), r1) / h;
            let closed = gl.integrate(|t: f64| conv2_2d([0.0, 0.0], t), tau - h / 2.0, tau + h / 2.0) / h;
            assert!((brute - closed).abs() < 1e-8 * closed, "τ={tau}: {brute} vs {closed}");
        }
    }

    #[test]
    fn conv3_2d_shell_oracle() {
        // σ^{(*3)}(0, τ) = ∫ (σ*σ)(-y, τ - <y>) dσ(y), integrated radially
        for tau in [3.5f64, 5.0, 20.0] {
            let gl = GaussLegendre::new(30);
            let r_max = (((tau * tau - 3.0) / (2.0 * tau)).powi(2) - 1.0).sqrt();
            let oracle = gl.composite(
                |r: f64| TAU * r / japanese(r) * conv2_2d([-r, 0.0], tau - japanese(r)),
                0.0,
                r_max,
                200,
            );
            let closed = conv3_2d([0.0, 0.0], tau);
            assert!((oracle - closed).abs() < 1e-3 * closed, "τ={tau}: {oracle} vs {closed}");
        }
    }

    #[test]
    fn two_dimensional_examples() {
        assert!((conv2_2d([0.0, 0.0], 2.0) - PI).abs() < 1e-15);
        assert_eq!(conv2_2d([0.0, 0.0], 1.9), 0.0);
        assert_eq!(conv3_2d([0.0, 0.0], 3.0), 0.0);
        let far = conv3_2d([0.0, 0.0], 300.0);
        assert!(far < TAU * TAU && (TAU * TAU - far) < 0.01 * TAU * TAU);
        assert!((conv3_2d([3.0, 4.0], 13.0) - conv3_2d([0.0, 0.0], 12.0)).abs() < 1e-12);
    }

    #[test]
    fn conv3_1d_examples() {
        let c = cfg();
        let near = conv3_1d(3.0001, &c).unwrap();
        assert!(!near.boundary);
        assert!((near.value / SIGMA3_BOUNDARY - 1.0).abs() < 0.01);
        assert_eq!(conv3_1d(2.5, &c).unwrap().value, 0.0);
        let inside = conv3_1d(3.0 + 1e-8, &c).unwrap();
        assert!(inside.boundary && inside.value == SIGMA3_BOUNDARY);
        let ten = conv3_1d(10.0, &c).unwrap().value;
        let tight = conv3_1d(10.0, &c.with_rel_tol(1e-12)).unwrap().value;
        assert!((ten - tight).abs() < 1e-9 * tight);
        assert!((ten - sigma3_oracle(10.0)).abs() < 1e-10 * ten);
        assert!(bound_l(10.0).unwrap() < ten && ten < bound_u(10.0).unwrap());
    }

    #[test]
    fn conv3_1d_matches_oracle_across_range() {
        let c = cfg();
        for tau in [3.001, 3.1, 3.5, 5.0, 17.0, 100.0, 900.0] {
            let v = conv3_1d(tau, &c).unwrap().value;
            let o = sigma3_oracle(tau);
            assert!((v - o).abs() < 1e-9 * o, "τ={tau}: {v} vs {o}");
        }
    }

    #[test]
    fn lorentz_reduction_is_used() {
        let c = cfg();
        let a = conv3_1d_at(2.0, 6.0, &c).unwrap().value;
        let b = conv3_1d(32f64.sqrt(), &c).unwrap().value;
        assert!((a - b).abs() < 1e-12 * b);
        let p = MeasureProfile::conv3_2d();
        let v = p.eval_at(&[3.0, 4.0], 13.0).unwrap().value;
        assert!((v - conv3_2d([3.0, 4.0], 13.0)).abs() < 1e-12);
        assert!(p.eval_at(&[1.0], 13.0).is_err());
    }

    #[test]
    fn bounds() {
        assert!((bound_u(3.0 + 1e-15).unwrap() - SIGMA3_BOUNDARY).abs() < 1e-12);
        assert!((bound_l(3.0 + 1e-15).unwrap() - SIGMA3_BOUNDARY).abs() < 1e-12);
        assert!(bound_u(4.0).unwrap() < bound_u(3.0 + 1e-12).unwrap());
        assert!(matches!(bound_u(3.0), Err(Error::Domain { .. })));
        assert!(matches!(bound_l(2.0), Err(Error::Domain { .. })));
        let expanded = |t: f64| 16.0 * PI / (((t + 1.0).powi(2) - (t - 1.0).powi(2)).sqrt() * (t + 1.0).sqrt() * 2.0);
        for t in [3.5, 10.0, 80.0] {
            assert!((bound_u(t).unwrap() - expanded(t)).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn upper_bound_decreases(a in 3.0001f64..500.0, b in 3.0001f64..500.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(bound_u(hi).unwrap() <= bound_u(lo).unwrap());
        }

        #[test]
        fn sandwich_holds(t in 3.001f64..100.0) {
            let s = conv3_1d(t, &QuadConfig::default()).unwrap().value;
            prop_assert!(bound_l(t).unwrap() <= s && s <= bound_u(t).unwrap());
        }

        #[test]
        fn profiles_vanish_below_threshold(t in -5.0f64..2.0) {
            for p in [MeasureProfile::conv2_1d(), MeasureProfile::conv2_2d(), MeasureProfile::conv3_2d(), MeasureProfile::conv3_1d(QuadConfig::default())] {
                prop_assert!(p.eval(t).unwrap().value == 0.0);
            }
        }
    }

    #[test]
    fn recursion_reproduces_direct_route() {
        let c = cfg();
        let p2 = MeasureProfile::conv2_1d();
        for i in 0..12 {
            let tau = 3.1 + (50.0 - 3.1) * i as f64 / 11.0;
            let r = conv_recursive(2, &p2, tau, &c).unwrap().value;
            let d = conv3_1d(tau, &c).unwrap().value;
            assert!((r - d).abs() < 1e-8 * d, "τ={tau}: {r} vs {d}");
        }
        assert_eq!(conv_recursive(3, &MeasureProfile::conv3_1d(c), 3.5, &c).unwrap().value, 0.0);
        assert!(conv_recursive(3, &p2, 5.0, &c).is_err());
    }

    #[test]
    fn fourfold_matches_monte_carlo() {
        // σ^{(*4)}(0, 5): integrate u_4 out against the spatial delta and
        // average the time delta over a box of width h.
        let tau = 5.0;
        let h = 0.01;
        let c = cfg();
        let p3 = MeasureProfile::conv3_1d(c);
        let exact = conv_recursive(3, &p3, tau, &c).unwrap().value;
        assert!(exact > 0.0 && exact.is_finite());

        let umax = ((tau + h) / 2.0 - 0.5).acosh();
        let vol = (2.0 * umax).powi(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = 10_000_000usize;
        let (mut sum, mut sum2) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let u = [rng.gen_range(-umax..umax), rng.gen_range(-umax..umax), rng.gen_range(-umax..umax)];
            let s: f64 = u.iter().map(|x| x.sinh()).sum();
            let energy: f64 = u.iter().map(|x| x.cosh()).sum::<f64>() + japanese(s);
            let w = if (energy - tau).abs() < h / 2.0 {
                vol / (h * japanese(s))
            } else {
                0.0
            };
            sum += w;
            sum2 += w * w;
        }
        let mean = sum / samples as f64;
        let se = ((sum2 / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "MC {mean} ± {se} vs {exact}");
    }

    #[test]
    fn cached_profile_interpolates() {
        let c = cfg();
        let p = MeasureProfile::conv3_1d(c).cached(2000, 1000.0).unwrap();
        assert_eq!(p.kind(), EvaluatorKind::Interpolated);
        assert!(p.cache_error().unwrap() < 1e-7);
        for tau in [3.00001, 3.37, 9.99, 123.4, 999.0, 1500.0] {
            let a = p.eval(tau).unwrap().value;
            let b = conv3_1d(tau, &c).unwrap().value;
            assert!((a - b).abs() < 1e-7 * b, "τ={tau}: {a} vs {b}");
        }
        assert!(MeasureProfile::conv2_1d().cached(2, 10.0).is_err());
    }

    #[test]
    fn pchip_preserves_monotone_data() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 5.0, 5.0, 5.0];
        let d = pchip_slopes(&x, &y);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..900 {
            let t = k as f64 / 100.0;
            let i = (t.floor() as usize).min(8);
            let v = hermite(x[i], x[i + 1], y[i], y[i + 1], d[i], d[i + 1], t);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn sup_certificate() {
        let cert = sup_conv3_1d(&cfg()).unwrap();
        assert_eq!(cert.rows.len(), 500);
        assert!(cert.certified);
        assert!((cert.value - TAU / 3f64.sqrt()).abs() < 1e-15);
        assert!(bound_u(3.01).unwrap() < SIGMA3_BOUNDARY);
        assert!(cert.decay_constant.is_finite() && cert.decay_constant < 10.0);
    }
}
