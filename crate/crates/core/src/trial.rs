//! Trial densities on `H^1` and `H^2`.
//!
//! A [`TrialFunction`] is a base density transported by an isometry
//! (`f ↦ f ∘ L^{-1}`), multiplied by the modulation `e^{i(x_0·ξ + t_0 τ)}`
//! and by a complex scale. Densities on `H^1` are evaluated in rapidity,
//! densities on `H^2` in polar coordinates.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cap_measure, cap_of, japanese, CapId, Dim, HPoint, HPoint1, HPoint2, Isometry};
use crate::quad::{GaussLegendre, QuadConfig};
use crate::specfun::mass_exp_family;

/// Decay, in units of `ln`, below the peak at which a density counts as zero
/// when its support is truncated for quadrature.
pub const DECAY_CUT: f64 = 40.0;

/// Base densities. Radial densities on `H^2` depend on `r = |ξ|` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Density {
    /// `e^{-a<y>}` on `H^1` or `H^2`.
    ExpFamily { a: f64 },
    /// `exp(-Σ_i c_i u^{2i})` in the rapidity `u` of `H^1`, `c_i ≥ 0`, last coefficient positive.
    ExpEvenPoly { coeffs: Vec<f64> },
    /// Samples on the rapidity grid `u_0 + i du` of `H^1`, linearly interpolated, zero outside.
    RapidityProfile { u0: f64, du: f64, values: Vec<Complex64> },
    /// Samples on the grid `r = i dr` of `H^2`, linearly interpolated, zero outside.
    RadialProfile { dr: f64, values: Vec<f64> },
    /// Constant on each listed cap, zero elsewhere.
    CapSteps { weights: Vec<(CapId, Complex64)> },
}

/// The modulation `e^{i(x_0·ξ + t_0 τ)}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Modulation {
    pub x0: [f64; 2],
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFunction {
    dim: Dim,
    density: Density,
    scale: Complex64,
    modulation: Modulation,
    isometry: Isometry,
}

impl TrialFunction {
    fn from_density(dim: Dim, density: Density) -> Self {
        TrialFunction {
            dim,
            density,
            scale: Complex64::new(1.0, 0.0),
            modulation: Modulation::default(),
            isometry: Isometry::identity(dim),
        }
    }

    pub fn exp_family(dim: Dim, a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::domain("exponential family parameter", format!("a = {a}, expected a > 0")));
        }
        Ok(Self::from_density(dim, Density::ExpFamily { a }))
    }

    pub fn exp_even_poly(coeffs: Vec<f64>) -> Result<Self> {
        let ok = !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite() && *c >= 0.0) && coeffs.last().is_some_and(|c| *c > 0.0);
        if !ok {
            return Err(Error::domain(
                "even polynomial coefficients",
                format!("{coeffs:?}; need c_i ≥ 0 with a positive leading coefficient"),
            ));
        }
        Ok(Self::from_density(Dim::One, Density::ExpEvenPoly { coeffs }))
    }

    pub fn rapidity_profile(u0: f64, du: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(du > 0.0) || !u0.is_finite() || values.len() < 2 || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Invalid(
                "rapidity profile needs du > 0 and at least two finite samples".into(),
            ));
        }
        Ok(Self::from_density(Dim::One, Density::RapidityProfile { u0, du, values }))
    }

    pub fn radial_profile(dr: f64, values: Vec<f64>) -> Result<Self> {
        if !(dr > 0.0) || values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("radial profile needs dr > 0 and at least two finite samples".into()));
        }
        Ok(Self::from_density(Dim::Two, Density::RadialProfile { dr, values }))
    }

    pub fn cap_steps(weights: Vec<(CapId, Complex64)>) -> Result<Self> {
        let Some(first) = weights.first() else {
            return Err(Error::Invalid("cap steps need at least one cap".into()));
        };
        let dim = first.0.dim();
        if weights.iter().any(|(c, _)| c.dim() != dim) {
            return Err(Error::Invalid("cap steps mix caps of H^1 and H^2".into()));
        }
        let mut weights = weights;
        weights.sort_by_key(|a| a.0);
        if weights.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Invalid("cap listed twice".into()));
        }
        Ok(Self::from_density(dim, Density::CapSteps { weights }))
    }

    /// `1_C / sqrt(σ(C))`, the indicator of a cap normalized in `L^2`.
    pub fn normalized_indicator(cap: CapId) -> Self {
        let w = 1.0 / cap_measure(&cap).sqrt();
        Self::from_density(
            cap.dim(),
            Density::CapSteps {
                weights: vec![(cap, Complex64::new(w, 0.0))],
            },
        )
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn scale(&self) -> Complex64 {
        self.scale
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn isometry(&self) -> Isometry {
        self.isometry
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out
    }

    /// Multiplies by `e^{i(x_0·ξ + t_0 τ)}`.
    pub fn modulated(&self, x0: [f64; 2], t0: f64) -> Self {
        let mut out = self.clone();
        out.modulation.x0[0] += x0[0];
        out.modulation.x0[1] += x0[1];
        out.modulation.t0 += t0;
        out
    }

    /// The pushforward `f ∘ iso^{-1}`. The modulation is dropped from the
    /// transport: it must be zero.
    pub fn transported(&self, iso: &Isometry) -> Result<Self> {
        if iso.dim() != self.dim {
            return Err(Error::Invalid("isometry and density live on different hyperboloids".into()));
        }
        if self.modulation != Modulation::default() {
            return Err(Error::Unsupported("transporting a modulated density".into()));
        }
        let mut out = self.clone();
        out.isometry = iso.compose(&self.isometry)?;
        Ok(out)
    }

    /// Whether the density depends on `|ξ|` only (`H^2`).
    pub fn is_radial(&self) -> bool {
        self.dim == Dim::Two
            && self.isometry.boost_parameter() == 0.0
            && self.modulation.x0 == [0.0, 0.0]
            && match &self.density {
                Density::ExpFamily { .. } | Density::RadialProfile { .. } => true,
                Density::CapSteps { weights } => weights.iter().all(|(c, _)| *c == CapId::Two { n: 0, j: 0 }),
                _ => false,
            }
    }

    /// `f(p)`.
    pub fn value(&self, p: &HPoint) -> Result<Complex64> {
        if p.dim() != self.dim {
            return Err(Error::Invalid("point and density live on different hyperboloids".into()));
        }
        let q = if self.isometry.is_identity() {
            *p
        } else {
            self.isometry.inverse().apply(p)?
        };
        let (xi, tau) = p.embed();
        let m = &self.modulation;
        let phase = m.x0[0] * xi[0] + m.x0[1] * xi[1] + m.t0 * tau;
        Ok(self.scale * Complex64::from_polar(1.0, phase) * self.base(&q))
    }

    /// `f` at rapidity `u` of `H^1`.
    pub fn value_rapidity(&self, u: f64) -> Complex64 {
        debug_assert_eq!(self.dim, Dim::One);
        let v = u - self.isometry.rapidity();
        let (s, c) = (u.sinh(), u.cosh());
        let m = &self.modulation;
        let phase = m.x0[0] * s + m.t0 * c;
        self.scale * Complex64::from_polar(1.0, phase) * self.base_rapidity(v)
    }

    fn base(&self, q: &HPoint) -> Complex64 {
        match q {
            HPoint::One(q) => self.base_rapidity(q.u),
            HPoint::Two(q) => self.base_polar(q),
        }
    }

    fn base_rapidity(&self, u: f64) -> Complex64 {
        match &self.density {
            Density::ExpFamily { a } => Complex64::new((-a * u.cosh()).exp(), 0.0),
            Density::ExpEvenPoly { coeffs } => Complex64::new((-even_poly(coeffs, u)).exp(), 0.0),
            Density::RapidityProfile { u0, du, values } => {
                let s = (u - u0) / du;
                if !(s >= 0.0) || s > (values.len() - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let i = (s.floor() as usize).min(values.len() - 2);
                let w = s - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
            Density::CapSteps { weights } => lookup(weights, cap_of(&HPoint::One(HPoint1::new(u)))),
            Density::RadialProfile { .. } => Complex64::new(0.0, 0.0),
        }
    }

    fn base_polar(&self, q: &HPoint2) -> Complex64 {
        match &self.density {
            Density::CapSteps { weights } => lookup(weights, cap_of(&HPoint::Two(*q))),
            _ => Complex64::new(self.base_radial(q.r()), 0.0),
        }
    }

    // radial part of a radial base density on H^2
    fn base_radial(&self, r: f64) -> f64 {
        match &self.density {
            Density::ExpFamily { a } => (-a * japanese(r)).exp(),
            Density::RadialProfile { dr, values } => {
                let s = r / dr;
                if s > (values.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (s.floor() as usize).min(values.len() - 2);
                let w = s - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
            Density::CapSteps { weights } if r < 2.0 => lookup(weights, CapId::Two { n: 0, j: 0 }).re,
            _ => 0.0,
        }
    }

    /// Intervals in the rapidity of `H^1` (radial rapidity `ρ`, `r = sinh ρ`,
    /// on `H^2`) outside of which the base density is negligible, with the
    /// density smooth inside each interval. Not shifted by the isometry.
    pub(crate) fn base_segments(&self) -> Vec<(f64, f64)> {
        match &self.density {
            Density::ExpFamily { a } => {
                let u = (1.0 + DECAY_CUT / a).acosh();
                if self.dim == Dim::One {
                    vec![(-u, u)]
                } else {
                    vec![(0.0, u)]
                }
            }
            Density::ExpEvenPoly { coeffs } => {
                let u = even_poly_root(coeffs, DECAY_CUT);
                vec![(-u, 0.0), (0.0, u)]
            }
            Density::RapidityProfile { u0, du, values } => (0..values.len() - 1)
                .map(|i| (u0 + du * i as f64, u0 + du * (i + 1) as f64))
                .collect(),
            Density::RadialProfile { dr, values } => (0..values.len() - 1)
                .map(|i| ((dr * i as f64).asinh(), (dr * (i + 1) as f64).asinh()))
                .collect(),
            Density::CapSteps { weights } => weights
                .iter()
                .map(|(c, _)| match *c {
                    CapId::One(_) => c.rapidity_bounds().unwrap_or_default(),
                    CapId::Two { .. } => {
                        let (r0, r1, _, _) = c.polar_bounds().unwrap_or_default();
                        (r0.asinh(), r1.asinh())
                    }
                })
                .collect(),
        }
    }

    /// Rapidity intervals carrying the density on `H^1`, after the boost.
    pub fn rapidity_segments(&self) -> Result<Vec<(f64, f64)>> {
        if self.dim != Dim::One {
            return Err(Error::Invalid("rapidity segments exist on H^1 only".into()));
        }
        let beta = self.isometry.rapidity();
        Ok(self.base_segments().into_iter().map(|(a, b)| (a + beta, b + beta)).collect())
    }

    /// `[min, max]` of [`Self::rapidity_segments`].
    pub fn rapidity_support(&self) -> Result<(f64, f64)> {
        let segs = self.rapidity_segments()?;
        let lo = segs.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = segs.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }

    /// `||f||²_{L²(H^d, σ)}`.
    pub fn l2_norm_sq(&self, cfg: &QuadConfig) -> Result<f64> {
        let s2 = self.scale.norm_sqr();
        let base = match (&self.density, self.dim) {
            (Density::ExpFamily { a }, Dim::One) => mass_exp_family(*a, cfg)?,
            // 2π ∫ e^{-2a cosh ρ} sinh ρ dρ
            (Density::ExpFamily { a }, Dim::Two) => TAU * (-2.0 * a).exp() / (2.0 * a),
            (Density::CapSteps { weights }, _) => weights.iter().map(|(c, w)| w.norm_sqr() * cap_measure(c)).sum(),
            (Density::RadialProfile { .. }, _) => {
                let gl = GaussLegendre::new(8);
                self.base_segments()
                    .iter()
                    .map(|&(a, b)| TAU * gl.integrate(|rho: f64| self.base_radial(rho.sinh()).powi(2) * rho.sinh(), a, b))
                    .sum()
            }
            _ => {
                let gl = GaussLegendre::new(16);
                self.base_segments()
                    .iter()
                    .map(|&(a, b)| {
                        let panels = ((b - a) * 8.0).ceil().max(1.0) as usize;
                        gl.composite(|u: f64| self.base_rapidity(u).norm_sqr(), a, b, panels)
                    })
                    .sum()
            }
        };
        Ok(s2 * base)
    }
}

fn lookup(weights: &[(CapId, Complex64)], cap: CapId) -> Complex64 {
    match weights.binary_search_by(|w| w.0.cmp(&cap)) {
        Ok(i) => weights[i].1,
        Err(_) => Complex64::new(0.0, 0.0),
    }
}

fn even_poly(coeffs: &[f64], u: f64) -> f64 {
    let u2 = u * u;
    coeffs.iter().rev().fold(0.0, |acc, &c| (acc + c) * u2)
}

// |u| at which Σ c_i u^{2i} reaches `level`.
fn even_poly_root(coeffs: &[f64], level: f64) -> f64 {
    let mut hi = 1.0;
    while even_poly(coeffs, hi) < level {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if even_poly(coeffs, mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
