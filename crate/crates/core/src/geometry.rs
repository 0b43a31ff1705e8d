//! Points of `H^1` and `H^2`, Lorentz boosts and rotations, and the cap
//! tessellations of both hyperboloids.
//!
//! Points are stored in intrinsic coordinates (rapidity `u` on `H^1`, polar
//! `(r, θ)` on `H^2`) and embedded on demand, so `τ² - |ξ|² = 1` never has to
//! be recovered from a cancelling difference.
//!
//! Sign convention: the boost `L^t` acts on `H^1` as the rapidity shift
//! `u ↦ u + artanh(t)`. Hence `L^{-tanh k}` carries the cap `C_k` onto `C_0`,
//! and `L^{tanh 2}` carries `C_{-2}` onto `C_0`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension of the hyperboloid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn from_int(d: u32) -> Result<Self> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(Error::Unsupported(format!("dimension d = {d}; only d ∈ {{1, 2}} is computed"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

/// `<x> = sqrt(1 + |x|^2)`.
pub fn japanese(x: f64) -> f64 {
    x.hypot(1.0)
}

/// A point `(sinh u, cosh u)` of `H^1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint1 {
    pub u: f64,
}

impl HPoint1 {
    pub fn new(u: f64) -> Self {
        HPoint1 { u }
    }

    pub fn from_spatial(xi: f64) -> Self {
        HPoint1 { u: xi.asinh() }
    }

    /// `(ξ, τ)`.
    pub fn embed(&self) -> (f64, f64) {
        (self.u.sinh(), self.u.cosh())
    }
}

/// A point `(r cos θ, r sin θ, <r>)` of `H^2`, with `θ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint2 {
    r: f64,
    theta: f64,
}

impl HPoint2 {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() || !theta.is_finite() {
            return Err(Error::domain("polar point", format!("r = {r}, θ = {theta}")));
        }
        Ok(HPoint2 {
            r,
            theta: normalize_angle(theta),
        })
    }

    pub fn from_spatial(xi1: f64, xi2: f64) -> Self {
        let theta = if xi1 == 0.0 && xi2 == 0.0 {
            0.0
        } else {
            normalize_angle(xi2.atan2(xi1))
        };
        HPoint2 { r: xi1.hypot(xi2), theta }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        japanese(self.r)
    }

    /// `(ξ_1, ξ_2, τ)`.
    pub fn embed(&self) -> [f64; 3] {
        let (s, c) = self.theta.sin_cos();
        [self.r * c, self.r * s, self.tau()]
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HPoint {
    One(HPoint1),
    Two(HPoint2),
}

impl HPoint {
    pub fn dim(&self) -> Dim {
        match self {
            HPoint::One(_) => Dim::One,
            HPoint::Two(_) => Dim::Two,
        }
    }

    /// Spatial part `ξ` (second entry is zero on `H^1`) and time part `τ`.
    pub fn embed(&self) -> ([f64; 2], f64) {
        match self {
            HPoint::One(p) => {
                let (xi, tau) = p.embed();
                ([xi, 0.0], tau)
            }
            HPoint::Two(p) => {
                let [a, b, tau] = p.embed();
                ([a, b], tau)
            }
        }
    }
}

impl From<HPoint1> for HPoint {
    fn from(p: HPoint1) -> Self {
        HPoint::One(p)
    }
}

impl From<HPoint2> for HPoint {
    fn from(p: HPoint2) -> Self {
        HPoint::Two(p)
    }
}

/// Order in which the rotation and the boost of an [`Isometry`] act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    /// `L^t ∘ R_φ`: rotate first.
    RotateThenBoost,
    /// `R_φ ∘ L^t`: boost first.
    BoostThenRotate,
}

/// A composition of the boost `L^t` along the first axis with the rotation
/// `R_φ(ξ_1, ξ_2, τ) = (ξ_1 cos φ + ξ_2 sin φ, -ξ_1 sin φ + ξ_2 cos φ, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    dim: Dim,
    boost: f64,
    rotation: f64,
    order: Order,
}

impl Isometry {
    pub fn identity(dim: Dim) -> Self {
        Isometry {
            dim,
            boost: 0.0,
            rotation: 0.0,
            order: Order::RotateThenBoost,
        }
    }

    pub fn new(dim: Dim, boost: f64, rotation: f64, order: Order) -> Result<Self> {
        if !(boost.abs() < 1.0) {
            return Err(Error::domain("boost parameter", format!("t = {boost}, expected |t| < 1")));
        }
        if !rotation.is_finite() {
            return Err(Error::domain("rotation angle", format!("φ = {rotation}")));
        }
        let rotation = normalize_angle(rotation);
        if dim == Dim::One && rotation != 0.0 {
            return Err(Error::domain("rotation angle", "rotations act only on H^2"));
        }
        Ok(Isometry {
            dim,
            boost,
            rotation,
            order,
        })
    }

    pub fn boost(dim: Dim, t: f64) -> Result<Self> {
        Self::new(dim, t, 0.0, Order::RotateThenBoost)
    }

    /// The boost whose rapidity is `beta`.
    pub fn from_rapidity(dim: Dim, beta: f64) -> Result<Self> {
        Self::boost(dim, beta.tanh())
    }

    pub fn rotation(phi: f64) -> Result<Self> {
        Self::new(Dim::Two, 0.0, phi, Order::RotateThenBoost)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// The boost parameter `t` of `L^t`.
    pub fn boost_parameter(&self) -> f64 {
        self.boost
    }

    /// `artanh(t)`.
    pub fn rapidity(&self) -> f64 {
        self.boost.atanh()
    }

    pub fn rotation_angle(&self) -> f64 {
        self.rotation
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn is_identity(&self) -> bool {
        self.boost == 0.0 && self.rotation == 0.0
    }

    pub fn inverse(&self) -> Self {
        let order = match self.order {
            Order::RotateThenBoost => Order::BoostThenRotate,
            Order::BoostThenRotate => Order::RotateThenBoost,
        };
        Isometry {
            dim: self.dim,
            boost: -self.boost,
            rotation: normalize_angle(-self.rotation),
            order,
        }
    }

    /// `self ∘ other`, for the pairs that stay inside this family: boosts
    /// along the same axis (rapidities add), rotations (angles add), and a
    /// rotation paired with a boost.
    pub fn compose(&self, other: &Isometry) -> Result<Isometry> {
        if self.dim != other.dim {
            return Err(Error::Invalid("composing isometries of different dimensions".into()));
        }
        if other.is_identity() {
            return Ok(*self);
        }
        if self.is_identity() {
            return Ok(*other);
        }
        let pure_boost = |i: &Isometry| i.rotation == 0.0;
        let pure_rotation = |i: &Isometry| i.boost == 0.0;
        if pure_boost(self) && pure_boost(other) {
            return Isometry::from_rapidity(self.dim, self.rapidity() + other.rapidity());
        }
        if pure_rotation(self) && pure_rotation(other) {
            return Isometry::rotation(self.rotation + other.rotation);
        }
        if pure_boost(self) && pure_rotation(other) {
            return Isometry::new(self.dim, self.boost, other.rotation, Order::RotateThenBoost);
        }
        if pure_rotation(self) && pure_boost(other) {
            return Isometry::new(self.dim, other.boost, self.rotation, Order::BoostThenRotate);
        }
        Err(Error::Unsupported(
            "composition leaves the family of single boost/rotation pairs".into(),
        ))
    }

    /// Applies the isometry to a point.
    pub fn apply(&self, p: &HPoint) -> Result<HPoint> {
        match (self.dim, p) {
            (Dim::One, HPoint::One(q)) => Ok(HPoint::One(HPoint1::new(q.u + self.rapidity()))),
            (Dim::Two, HPoint::Two(q)) => Ok(HPoint::Two(self.apply2(q))),
            _ => Err(Error::Invalid("isometry and point live on different hyperboloids".into())),
        }
    }

    pub(crate) fn apply2(&self, q: &HPoint2) -> HPoint2 {
        match self.order {
            Order::RotateThenBoost => self.boost2(&self.rotate2(q)),
            Order::BoostThenRotate => self.rotate2(&self.boost2(q)),
        }
    }

    fn rotate2(&self, q: &HPoint2) -> HPoint2 {
        if self.rotation == 0.0 {
            return *q;
        }
        HPoint2 {
            r: q.r,
            theta: normalize_angle(q.theta - self.rotation),
        }
    }

    fn boost2(&self, q: &HPoint2) -> HPoint2 {
        if self.boost == 0.0 {
            return *q;
        }
        let beta = self.rapidity();
        let [x1, x2, tau] = q.embed();
        let y1 = x1 * beta.cosh() + tau * beta.sinh();
        HPoint2::from_spatial(y1, x2)
    }
}

/// Applies `iso` to `p`: the boost/rotation action on `H^d`.
pub fn boost_apply(iso: &Isometry, p: &HPoint) -> Result<HPoint> {
    iso.apply(p)
}

/// Index of a cap: `C_k` on `H^1`, `C_{n,j}` on `H^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CapId {
    One(i64),
    Two { n: u32, j: u64 },
}

/// Largest 2-D generation for which caps are indexed.
pub const MAX_GENERATION: u32 = 60;

impl CapId {
    pub fn two(n: u32, j: u64) -> Result<Self> {
        if n > MAX_GENERATION || j >= (1u64 << n) {
            return Err(Error::domain("cap index", format!("(n, j) = ({n}, {j}) needs 0 ≤ j < 2^n")));
        }
        Ok(CapId::Two { n, j })
    }

    pub fn dim(&self) -> Dim {
        match self {
            CapId::One(_) => Dim::One,
            CapId::Two { .. } => Dim::Two,
        }
    }

    /// Radial and angular bounds `(r_lo, r_hi, θ_lo, θ_hi)` of a 2-D cap.
    pub fn polar_bounds(&self) -> Option<(f64, f64, f64, f64)> {
        match *self {
            CapId::One(_) => None,
            CapId::Two { n: 0, .. } => Some((0.0, 2.0, 0.0, TAU)),
            CapId::Two { n, j } => {
                let g = (1u64 << n) as f64;
                Some((g, 2.0 * g, TAU * j as f64 / g, TAU * (j + 1) as f64 / g))
            }
        }
    }

    /// Rapidity interval `[k - 1/2, k + 1/2)` of a 1-D cap.
    pub fn rapidity_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            CapId::One(k) => Some((k as f64 - 0.5, k as f64 + 0.5)),
            CapId::Two { .. } => None,
        }
    }

    /// Membership under the half-open conventions of the tessellation.
    pub fn contains(&self, p: &HPoint) -> bool {
        match (self, p) {
            (CapId::One(_), HPoint::One(q)) => {
                let (lo, hi) = self.rapidity_bounds().unwrap_or_default();
                lo <= q.u && q.u < hi
            }
            (CapId::Two { n: 0, .. }, HPoint::Two(q)) => q.r < 2.0,
            (CapId::Two { .. }, HPoint::Two(q)) => {
                let (r0, r1, t0, t1) = self.polar_bounds().unwrap_or_default();
                r0 <= q.r && q.r < r1 && t0 <= q.theta && q.theta < t1
            }
            _ => false,
        }
    }
}

impl std::fmt::Display for CapId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CapId::One(k) => write!(f, "C_{k}"),
            CapId::Two { n, j } => write!(f, "C_({n},{j})"),
        }
    }
}

/// The cap containing `p`.
pub fn cap_of(p: &HPoint) -> CapId {
    match p {
        HPoint::One(q) => CapId::One((q.u + 0.5).floor() as i64),
        HPoint::Two(q) => {
            if q.r < 2.0 {
                return CapId::Two { n: 0, j: 0 };
            }
            let mut n = q.r.log2().floor().clamp(1.0, MAX_GENERATION as f64) as i32;
            while n < MAX_GENERATION as i32 && 2f64.powi(n + 1) <= q.r {
                n += 1;
            }
            while n > 1 && 2f64.powi(n) > q.r {
                n -= 1;
            }
            let n = n as u32;
            let g = (1u64 << n) as f64;
            let mut j = (q.theta * g / TAU).floor().max(0.0) as u64;
            while j + 1 < (1u64 << n) && TAU * (j + 1) as f64 / g <= q.theta {
                j += 1;
            }
            while j > 0 && TAU * j as f64 / g > q.theta {
                j -= 1;
            }
            CapId::Two { n, j }
        }
    }
}

/// `σ(A_n)`, the measure of the `n`-th annulus of `H^2`.
pub fn annulus_measure(n: u32) -> f64 {
    if n == 0 {
        return TAU * (5f64.sqrt() - 1.0);
    }
    TAU * radial_gap(n)
}

// sqrt(1 + 4^{n+1}) - sqrt(1 + 4^n), written without cancellation.
fn radial_gap(n: u32) -> f64 {
    let a = 4f64.powi(n as i32);
    3.0 * a / ((1.0 + 4.0 * a).sqrt() + (1.0 + a).sqrt())
}

/// `σ(C)`: exactly 1 on `H^1`; `(2π/2^n)(√(1+4^{n+1}) - √(1+4^n))` on `H^2`
/// with `σ(C_{0,0}) = 2π(√5 - 1)`.
pub fn cap_measure(c: &CapId) -> f64 {
    match *c {
        CapId::One(_) => 1.0,
        CapId::Two { n: 0, .. } => annulus_measure(0),
        CapId::Two { n, .. } => TAU / (1u64 << n) as f64 * radial_gap(n),
    }
}

/// An isometry carrying the cap `c` into the fixed bounded region: onto `C_0`
/// for `d = 1`, into `{|ξ| ≤ 2√2 π}` for `d = 2`.
///
/// For `d = 2, n ≥ 3` the result is `L^{-t} ∘ R_φ` with `t = 1 - (π/2^n)^2`
/// and `φ` the central angle of the cap; it is stored with boost parameter
/// `-t`. Caps with `n ≤ 2` already lie in the region and get the identity.
pub fn recenter_cap(c: &CapId) -> Isometry {
    match *c {
        CapId::One(k) => Isometry {
            dim: Dim::One,
            boost: -(k as f64).tanh(),
            rotation: 0.0,
            order: Order::RotateThenBoost,
        },
        CapId::Two { n, .. } if n <= 2 => Isometry::identity(Dim::Two),
        CapId::Two { n, j } => {
            let g = (1u64 << n) as f64;
            let t = 1.0 - (PI / g).powi(2);
            Isometry {
                dim: Dim::Two,
                boost: -t,
                rotation: normalize_angle(TAU * (j as f64 + 0.5) / g),
                order: Order::RotateThenBoost,
            }
        }
    }
}

/// Radius of the disc that [`recenter_cap`] maps every 2-D cap into.
pub const RECENTER_RADIUS: f64 = 2.0 * std::f64::consts::SQRT_2 * PI;

/// `s = sqrt(τ² - |ξ|²)` for `(ξ, τ)` in the open forward cone.
pub fn lorentz_reduce(xi: &[f64], tau: f64) -> Result<f64> {
    let norm = xi.iter().fold(0.0f64, |acc, &x| acc.hypot(x));
    if !(tau > norm) {
        return Err(Error::domain(
            "space-time point",
            format!("τ = {tau} ≤ |ξ| = {norm}, outside the forward cone"),
        ));
    }
    Ok(((tau - norm) * (tau + norm)).sqrt())
}

/// Draws a point of the cap uniformly in its intrinsic coordinates.
pub fn sample_in_cap<R: Rng + ?Sized>(c: &CapId, rng: &mut R) -> HPoint {
    match *c {
        CapId::One(k) => HPoint::One(HPoint1::new(k as f64 - 0.5 + rng.gen::<f64>())),
        CapId::Two { .. } => {
            let (r0, r1, t0, t1) = c.polar_bounds().unwrap_or_default();
            let r = r0 + (r1 - r0) * rng.gen::<f64>();
            let theta = t0 + (t1 - t0) * rng.gen::<f64>();
            HPoint::Two(HPoint2 {
                r,
                theta: normalize_angle(theta),
            })
        }
    }
}
