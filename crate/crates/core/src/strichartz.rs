//! The extension operator `Tf(x, t) = ∫ e^{i x·y} e^{i t <y>} f(y) dy / <y>`,
//! its space-time Lebesgue norms, the Strichartz quotient of the exponential
//! family and the optimal constants.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::convolution::{bound_u, conv2_2d, conv3_2d, sup_conv3_1d, MeasureProfile, SIGMA3_BOUNDARY};
use crate::error::{Error, Result};
use crate::geometry::{japanese, Dim, HPoint, HPoint2};
use crate::quad::{integrate, pairwise_sum, Estimate, GaussLegendre, QuadConfig};
use crate::specfun::mass_exp_family_scaled;

pub use crate::trial::{Density, Modulation, TrialFunction, DECAY_CUT};

const PANEL_ORDER: usize = 16;

/// A space-time box `[-x_extent, x_extent) × [-t_extent, t_extent]` with
/// steps `dx`, `dt` and the Lebesgue exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub x_extent: f64,
    pub dx: f64,
    pub t_extent: f64,
    pub dt: f64,
    pub p: f64,
}

impl Default for SpaceTimeGrid {
    fn default() -> Self {
        SpaceTimeGrid {
            x_extent: 200.0,
            dx: 0.1,
            t_extent: 160.0,
            dt: 0.1,
            p: 6.0,
        }
    }
}

impl SpaceTimeGrid {
    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_extent, self.dx, self.t_extent, self.dt]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !ok || self.dx >= self.x_extent || self.dt > self.t_extent {
            return Err(Error::Invalid(format!("space-time grid {self:?} needs positive extents and steps")));
        }
        if !(self.p >= 6.0) || !self.p.is_finite() {
            return Err(Error::domain("Lebesgue exponent", format!("p = {}, expected p ≥ 6", self.p)));
        }
        Ok(())
    }
}

/// `Tf(x, t)`.
///
/// On `H^1` the integral runs in rapidity over Gauss–Legendre panels short
/// enough that the phase `x sinh u + t cosh u` turns by at most `π` per
/// panel; the error estimate compares `N` against `2N` panels. On `H^2`
/// only radial densities are supported: the angular integral is the factor
/// `2π J_0(|x| r)`, computed by the trapezoid rule in the angle.
pub fn extension_eval(f: &TrialFunction, x: &[f64], t: f64, cfg: &QuadConfig) -> Result<Estimate<Complex64>> {
    cfg.validate()?;
    let m = f.modulation();
    let t = t + m.t0;
    match f.dim() {
        Dim::One => {
            if x.len() != 1 {
                return Err(Error::Invalid("x must have one component on H^1".into()));
            }
            // the modulation is absorbed by shifting (x, t)
            let x = x[0] + m.x0[0];
            let g = f.modulated([-m.x0[0], -m.x0[1]], -m.t0);
            let segs = g.rapidity_segments()?;
            let phase = |u: f64| x * u.sinh() + t * u.cosh();
            let coarse = panel_sum(
                &segs,
                |u| g.value_rapidity(u) * Complex64::from_polar(1.0, phase(u)),
                x.abs() + t.abs(),
                1,
            );
            let fine = panel_sum(
                &segs,
                |u| g.value_rapidity(u) * Complex64::from_polar(1.0, phase(u)),
                x.abs() + t.abs(),
                2,
            );
            Ok(Estimate {
                value: fine.0,
                error: (fine.0 - coarse.0).norm(),
                evaluations: fine.1 + coarse.1,
            })
        }
        Dim::Two => {
            if x.len() != 2 {
                return Err(Error::Invalid("x must have two components on H^2".into()));
            }
            let base = f.modulated([-m.x0[0], -m.x0[1]], -m.t0);
            if !base.is_radial() {
                return Err(Error::Unsupported(
                    "the extension on H^2 is computed for radial densities only".into(),
                ));
            }
            let rad = (x[0] + m.x0[0]).hypot(x[1] + m.x0[1]);
            let segs = base.base_segments();
            let integrand = |rho: f64| {
                let r = rho.sinh();
                let fr = HPoint2::new(r, 0.0).and_then(|q| base.value(&HPoint::Two(q))).unwrap_or_default();
                TAU * bessel_j0_trapezoid(rad * r) * Complex64::from_polar(1.0, t * rho.cosh()) * fr * r
            };
            let coarse = panel_sum(&segs, integrand, rad + t.abs(), 1);
            let fine = panel_sum(&segs, integrand, rad + t.abs(), 2);
            Ok(Estimate {
                value: fine.0,
                error: (fine.0 - coarse.0).norm(),
                evaluations: fine.1 + coarse.1,
            })
        }
    }
}

// Σ over segments of a Gauss–Legendre composite rule whose panels keep the
// phase increment below π, `refine` times as many panels as that minimum.
fn panel_sum<F: Fn(f64) -> Complex64>(segs: &[(f64, f64)], f: F, freq: f64, refine: usize) -> (Complex64, usize) {
    let gl = GaussLegendre::new(PANEL_ORDER);
    let mut total = Complex64::new(0.0, 0.0);
    let mut evals = 0;
    for &(a, b) in segs {
        let umax = a.abs().max(b.abs());
        let omega = freq * umax.cosh();
        let width = PI / (omega + 1.0);
        let panels = ((b - a) / width).ceil().max(2.0) as usize * refine;
        total += gl.composite(&f, a, b, panels);
        evals += panels * PANEL_ORDER;
    }
    (total, evals)
}

/// `J_0(z) = (1/2π) ∫_0^{2π} cos(z cos θ) dθ` by the trapezoid rule, which
/// converges geometrically once the number of nodes exceeds `|z|`.
pub fn bessel_j0_trapezoid(z: f64) -> f64 {
    let m = (z.abs().ceil() as usize + 32).next_multiple_of(4);
    let s: f64 = (0..m).map(|k| (z * (TAU * k as f64 / m as f64).cos()).cos()).sum();
    s / m as f64
}

/// Result of [`st_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StNorm {
    /// `||Tf||_{L^p}` over the grid.
    pub norm: f64,
    /// Estimated contribution of the space-time region outside the grid, in
    /// the units of the norm.
    pub tail_bound: f64,
    /// `tail_bound` exceeds 10% of `norm`.
    pub inconclusive: bool,
    /// Spatial step actually used.
    pub dx: f64,
}

/// `||Tf||_{L^p(R^2)}` for a density on `H^1`, by one FFT per time row.
///
/// For fixed `t`, `Tf(·, t)` is the Fourier transform of
/// `g_t(y) = f(y) e^{it<y>} / <y>`, sampled on the dual grid `dy = 2π/(N dx)`
/// with cell averages across jumps of `f`.
/// The spatial step is halved as needed until `π/dx` covers the support of
/// `f` in `y`. The tail bound assumes `∫|Tf(x,t)|^p dx` decays like
/// `|t|^{1-p/2}` beyond the boundary rows (dispersive decay on a light cone
/// of width `|t|`), and adds the mass in the outer 5% of every row.
pub fn st_norm(f: &TrialFunction, grid: &SpaceTimeGrid, cfg: &QuadConfig) -> Result<StNorm> {
    grid.validate()?;
    cfg.validate()?;
    if f.dim() != Dim::One {
        return Err(Error::Unsupported("direct space-time norms are computed on H^1 only".into()));
    }
    let p = grid.p;
    let (lo, hi) = f.rapidity_support()?;
    let y_max = lo.sinh().abs().max(hi.sinh().abs());
    let mut dx = grid.dx;
    while PI / dx < y_max {
        dx *= 0.5;
    }
    let n = ((2.0 * grid.x_extent / dx).ceil() as usize).next_power_of_two();
    let dy = TAU / (n as f64 * dx);
    let half = (n / 2) as f64;
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let global = sign(n / 2);

    // f(y)/<y> with the grid sign folded in, and <y>. Cells cut by a jump
    // of f are split and each part sampled at its own centre.
    let segments: Vec<(f64, f64)> = jump_segments(f)?.into_iter().map(|(a, b)| (a.sinh(), b.sinh())).collect();
    let (amp, jy): (Vec<Complex64>, Vec<f64>) = (0..n)
        .map(|j| {
            let y = (j as f64 - half) * dy;
            let w = japanese(y);
            let (c0, c1) = (y - 0.5 * dy, y + 0.5 * dy);
            let mut v = Complex64::new(0.0, 0.0);
            let first = segments.partition_point(|s| s.1 <= c0);
            for &(a, b) in segments[first..].iter().take_while(|s| s.0 < c1) {
                let (lo, hi) = (a.max(c0), b.min(c1));
                if hi > lo {
                    let m = 0.5 * (lo + hi);
                    v += f.value_rapidity(m.asinh()) * ((hi - lo) / dy / japanese(m));
                }
            }
            (v * sign(j), w)
        })
        .unzip();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(n);
    let x_edge = 0.95 * grid.x_extent;

    let rows = (grid.t_extent / grid.dt).round() as i64;
    let row = |i: i64| -> (f64, f64) {
        let t = i as f64 * grid.dt;
        let mut buf: Vec<Complex64> = amp.iter().zip(&jy).map(|(a, &w)| a * Complex64::from_polar(1.0, t * w)).collect();
        fft.process(&mut buf);
        let mut powers = Vec::with_capacity(n);
        let mut edge = Vec::new();
        for (k, v) in buf.iter().enumerate() {
            let x = (k as f64 - half) * dx;
            if x.abs() > grid.x_extent {
                continue;
            }
            let val = (v * (sign(k) * global * dy)).norm().powf(p);
            powers.push(val);
            if x.abs() >= x_edge {
                edge.push(val);
            }
        }
        (pairwise_sum(&powers) * dx, pairwise_sum(&edge) * dx)
    };
    let sums: Vec<(f64, f64)> = (-rows..=rows).into_par_iter().map(row).collect();
    let weights = |idx: usize| if idx == 0 || idx == sums.len() - 1 { 0.5 } else { 1.0 };
    let body: Vec<f64> = sums.iter().enumerate().map(|(i, s)| s.0 * weights(i) * grid.dt).collect();
    let edges: Vec<f64> = sums.iter().enumerate().map(|(i, s)| s.1 * weights(i) * grid.dt).collect();
    let total = pairwise_sum(&body);
    let t_end = rows as f64 * grid.dt;
    let boundary = sums[0].0 + sums[sums.len() - 1].0;
    let tail_pp = boundary * t_end / (p / 2.0 - 2.0) + pairwise_sum(&edges);
    let norm = total.powf(1.0 / p);
    let tail_bound = (total + tail_pp).powf(1.0 / p) - norm;
    Ok(StNorm {
        norm,
        tail_bound,
        inconclusive: !(tail_bound <= 0.1 * norm),
        dx,
    })
}

// Rapidity segments of `f`, sorted, with touching segments merged where `f`
// is continuous across the join.
fn jump_segments(f: &TrialFunction) -> Result<Vec<(f64, f64)>> {
    let mut segs = f.rapidity_segments()?;
    segs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(segs.len());
    for (a, b) in segs {
        if let Some(last) = out.last_mut() {
            let h = 1e-9 * (1.0 + a.abs());
            if (a - last.1).abs() <= 1e-12 * (1.0 + a.abs()) {
                let (l, r) = (f.value_rapidity(a - h), f.value_rapidity(a + h));
                if (l - r).norm() <= 1e-6 * l.norm().max(r.norm()) {
                    last.1 = b;
                    continue;
                }
            }
        }
        out.push((a, b));
    }
    Ok(out)
}

/// Result of [`quotient_conv_route`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quotient {
    pub value: f64,
    pub error: f64,
    /// Bound on the truncated part `∫_{τ*}^∞`, from `σ^{(*3)} ≤ U`.
    pub tail_bound: f64,
    pub tau_cut: f64,
}

/// The sixth power of the Strichartz quotient of `f_a = e^{-a<y>}` on `H^1`,
/// normalized by `(2π)²`:
/// `Q(a) = ∫_3^∞ τ σ^{(*3)}(0,τ)² H(aτ) / H(a)³ dτ` with `H(a) = ||f_a||²`.
///
/// The integral is truncated at `τ* = 3 + ln(10^18)/(2a)`.
pub fn quotient_conv_route(a: f64, profile: &MeasureProfile, cfg: &QuadConfig) -> Result<Quotient> {
    if profile.dim() != Dim::One || profile.folds() != 3 {
        return Err(Error::Invalid("the quotient needs the profile of σ^{(*3)} on H^1".into()));
    }
    let hs_a = mass_exp_family_scaled(a, cfg)?;
    let tau_cut = 3.0 + (1e18f64).ln() / (2.0 * a);
    let mut failure: Option<Error> = None;
    let mut profile_error = 0.0f64;
    let integrand = |tau: f64| -> f64 {
        let s = match profile.eval(tau) {
            Ok(e) => {
                profile_error = profile_error.max(e.error / e.value.max(f64::MIN_POSITIVE));
                e.value
            }
            Err(e) => {
                failure.get_or_insert(e);
                return 0.0;
            }
        };
        let h = match mass_exp_family_scaled(a * tau, cfg) {
            Ok(h) => h,
            Err(e) => {
                failure.get_or_insert(e);
                return 0.0;
            }
        };
        tau * s * s * (h / hs_a) / (hs_a * hs_a) * (-2.0 * a * (tau - 3.0)).exp()
    };
    // substitute τ = 3 + s² to smooth the square-root behaviour at τ = 3
    let mut g = integrand;
    let est = integrate(|s: f64| 2.0 * s * g(3.0 + s * s), 0.0, (tau_cut - 3.0).sqrt(), cfg);
    if let Some(e) = failure {
        return Err(e);
    }
    let est = est?;
    let u = bound_u(tau_cut)?;
    let e2 = (-2.0 * a * (tau_cut - 3.0)).exp();
    let tail_bound = u * u / (hs_a * hs_a) * e2 * (tau_cut / (2.0 * a) + 1.0 / (4.0 * a * a));
    Ok(Quotient {
        value: est.value,
        error: est.error + 2.0 * profile_error * est.value,
        tail_bound,
        tau_cut,
    })
}

/// `2π ||(f_a σ)^{(*3)}||_{L²(R²)} = 2π (H(a)³ Q(a))^{1/2}`, which equals
/// `||T f_a||³_{L^6}`.
pub fn conv_route_cubed_norm(a: f64, profile: &MeasureProfile, cfg: &QuadConfig) -> Result<f64> {
    let q = quotient_conv_route(a, profile, cfg)?;
    let h = mass_exp_family_scaled(a, cfg)? * (-2.0 * a).exp();
    Ok(TAU * (h * h * h * q.value).sqrt())
}

/// `||T f_a||_{L^6} / ||f_a||` on `H^1`, from `Q(a)`.
pub fn exp_family_quotient_p6(a: f64, profile: &MeasureProfile, cfg: &QuadConfig) -> Result<Quotient> {
    let q = quotient_conv_route(a, profile, cfg)?;
    let value = TAU.powf(1.0 / 3.0) * q.value.powf(1.0 / 6.0);
    Ok(Quotient {
        value,
        error: value * (q.error + q.tail_bound) / (6.0 * q.value),
        tail_bound: value * q.tail_bound / (6.0 * q.value),
        tau_cut: q.tau_cut,
    })
}

/// An optimal constant `H_{d,p} = (2π)^{(d+1)/p} ||σ^{(*p/2)}||_∞^{1/p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalConstant {
    pub d: u32,
    pub p: u32,
    pub value: f64,
    /// `sup σ^{(*p/2)}`.
    pub sup_convolution: f64,
    pub symbolic: String,
    /// The closed form of the constant.
    pub closed_form: f64,
    /// Direct evidence for the supremum: a quadrature value just above the
    /// support edge (d = 1) or the closed-form value at its maximizer.
    pub sup_evidence: f64,
}

/// `H_{1,6}`, `H_{2,4}` or `H_{2,6}`.
pub fn optimal_constant(d: u32, p: u32, cfg: &QuadConfig) -> Result<OptimalConstant> {
    let (sup, symbolic, closed_form, evidence) = match (d, p) {
        (1, 6) => {
            let cert = sup_conv3_1d(cfg)?;
            if !cert.certified {
                return Err(Error::Invalid("the sandwich certificate for sup σ^{(*3)} failed".into()));
            }
            let near = crate::convolution::conv3_1d(3.0 + 1e-5, cfg)?.value;
            (cert.value, "3^(-1/12) (2π)^(1/2)", 3f64.powf(-1.0 / 12.0) * TAU.sqrt(), near)
        }
        (2, 4) => (
            conv2_2d([0.0, 0.0], 2.0),
            "2^(3/4) π",
            2f64.powf(0.75) * PI,
            conv2_2d([0.0, 0.0], 2.0),
        ),
        // σ^{(*3)} on H^2 increases to (2π)² as τ → ∞
        (2, 6) => (TAU * TAU, "(2π)^(5/6)", TAU.powf(5.0 / 6.0), conv3_2d([0.0, 0.0], 1e12)),
        (3, 4) => {
            return Err(Error::Unsupported(
                "H_{3,4} needs convolutions on H^3, which are outside the computed dimensions".into(),
            ))
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "(d, p) = ({d}, {p}); the sharp constant is known here only for (1,6), (2,4), (2,6)"
            )))
        }
    };
    let value = TAU.powf((d as f64 + 1.0) / p as f64) * sup.powf(1.0 / p as f64);
    Ok(OptimalConstant {
        d,
        p,
        value,
        sup_convolution: sup,
        symbolic: symbolic.to_string(),
        closed_form,
        sup_evidence: evidence,
    })
}

/// `H_{1,6} = 3^{-1/12} (2π)^{1/2}`.
pub fn h16() -> f64 {
    TAU.powf(1.0 / 3.0) * SIGMA3_BOUNDARY.powf(1.0 / 6.0)
}

/// Compares `Tf(x,t)` with `2π e^{it√(1-Δ)} g(x)`, `ĝ(y) = f(y)/<y>`, at
/// each point and returns the largest absolute deviation. The right side is
/// the Fourier inversion integral `∫ e^{ixy + it<y>} f(y)/<y> dy`, computed
/// in the spatial variable `y` rather than in rapidity.
pub fn kg_propagator_check(f: &TrialFunction, points: &[(f64, f64)], cfg: &QuadConfig) -> Result<f64> {
    if f.dim() != Dim::One {
        return Err(Error::Unsupported("the propagator check runs on H^1".into()));
    }
    let segs: Vec<(f64, f64)> = f.rapidity_segments()?.into_iter().map(|(a, b)| (a.sinh(), b.sinh())).collect();
    let gl = GaussLegendre::new(PANEL_ORDER);
    let mut worst = 0.0f64;
    for &(x, t) in points {
        let left = extension_eval(f, &[x], t, cfg)?.value;
        let mut right = Complex64::new(0.0, 0.0);
        for &(a, b) in &segs {
            // phase derivative |x + t y/<y>| ≤ |x| + |t|; the density varies on the scale <y>
            let width = (PI / (x.abs() + t.abs() + 1.0)).min(0.25 * japanese(a.abs().min(b.abs())));
            let panels = ((b - a) / width).ceil().max(2.0) as usize;
            let mut g = |y: f64| {
                let w = japanese(y);
                f.value_rapidity(y.asinh()) / w * Complex64::from_polar(1.0, x * y + t * w)
            };
            // geometric panels: the density is spread over |y| ~ e^{|u|}
            right += graded_panels(&gl, &mut g, a, b, panels);
        }
        worst = worst.max((left - right).norm());
    }
    Ok(worst)
}

// Composite rule on [a, b] with panels equal in asinh(y), subdivided so that
// each piece is at most (b - a)/min_panels long in y.
fn graded_panels<F: FnMut(f64) -> Complex64>(gl: &GaussLegendre, g: &mut F, a: f64, b: f64, min_panels: usize) -> Complex64 {
    let (ua, ub) = (a.asinh(), b.asinh());
    let coarse = ((ub - ua) * 8.0).ceil().max(1.0) as usize;
    let mut total = Complex64::new(0.0, 0.0);
    let max_len = (b - a) / min_panels as f64;
    for i in 0..coarse {
        let lo = (ua + (ub - ua) * i as f64 / coarse as f64).sinh();
        let hi = (ua + (ub - ua) * (i + 1) as f64 / coarse as f64).sinh();
        let pieces = ((hi - lo) / max_len).ceil().max(1.0) as usize;
        total += gl.composite(&mut *g, lo, hi, pieces);
    }
    total
}
