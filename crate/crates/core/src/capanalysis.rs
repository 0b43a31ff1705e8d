//! Cap decompositions of densities and the diagnostics built on them:
//! bilinear interaction of two caps, the cubic refinement norm, the largest
//! cap mass, the Cauchy–Schwarz functional on `H^2`, and recentering of the
//! heaviest cap.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cap_measure, recenter_cap, CapId, Dim, HPoint, HPoint2, Isometry, RECENTER_RADIUS};
use crate::quad::{integrate, pairwise_sum, GaussLegendre, QuadConfig};
use crate::trial::{Density, TrialFunction};

/// Restriction of a density to one cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapPiece {
    pub cap: CapId,
    /// `||f 1_C||²_{L²}`.
    pub mass_sq: f64,
    /// `(s, ||f 1_C||_{L^s})` for each requested exponent.
    pub norms: Vec<(f64, f64)>,
}

impl CapPiece {
    /// `||f 1_C||_{L²}`.
    pub fn mass(&self) -> f64 {
        self.mass_sq.sqrt()
    }

    pub fn norm(&self, s: f64) -> Option<f64> {
        self.norms.iter().find(|(e, _)| (e - s).abs() < 1e-12).map(|&(_, v)| v)
    }
}

/// `f = Σ_C f 1_C` over the caps where `f` is not negligible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapDecomposition {
    pub dim: Dim,
    pub density: TrialFunction,
    /// Pieces ordered by cap index.
    pub pieces: Vec<CapPiece>,
    pub total_mass_sq: f64,
}

impl CapDecomposition {
    pub fn piece(&self, cap: &CapId) -> Option<&CapPiece> {
        self.pieces.iter().find(|p| p.cap == *cap)
    }

    /// `f 1_C` at `p`.
    pub fn restricted_value(&self, cap: &CapId, p: &HPoint) -> Result<Complex64> {
        if cap.contains(p) {
            self.density.value(p)
        } else {
            Ok(Complex64::new(0.0, 0.0))
        }
    }
}

/// Decomposes `f` along the cap tessellation, with `L^s(σ)` norms of every
/// piece for each `s` in `exponents` (the `L²` mass is always computed).
pub fn decompose(f: &TrialFunction, exponents: &[f64], cfg: &QuadConfig) -> Result<CapDecomposition> {
    cfg.validate()?;
    if let Some(s) = exponents.iter().find(|s| !(**s >= 1.0) || !s.is_finite()) {
        return Err(Error::domain("Lebesgue exponent", format!("s = {s}, expected 1 ≤ s < ∞")));
    }
    let total_mass_sq = f.l2_norm_sq(cfg)?;
    let caps = covering_caps(f)?;
    let pieces = caps
        .par_iter()
        .map(|cap| {
            let mass_sq = cap_integral(f, cap, 2.0)?;
            let norms = exponents
                .iter()
                .map(|&s| Ok((s, cap_integral(f, cap, s)?.powf(1.0 / s))))
                .collect::<Result<Vec<_>>>()?;
            Ok(CapPiece { cap: *cap, mass_sq, norms })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CapDecomposition {
        dim: f.dim(),
        density: f.clone(),
        pieces,
        total_mass_sq,
    })
}

fn covering_caps(f: &TrialFunction) -> Result<Vec<CapId>> {
    if let (Density::CapSteps { weights }, true) = (f.density(), f.isometry().is_identity()) {
        return Ok(weights.iter().map(|w| w.0).collect());
    }
    match f.dim() {
        Dim::One => {
            let (lo, hi) = f.rapidity_support()?;
            let k0 = (lo + 0.5).floor() as i64;
            let k1 = (hi + 0.5).floor() as i64;
            Ok((k0..=k1).map(CapId::One).collect())
        }
        Dim::Two => {
            let rho_max = f.base_segments().iter().map(|s| s.1).fold(0.0f64, f64::max) + f.isometry().rapidity().abs();
            let r_max = rho_max.sinh();
            let n_max = if r_max < 2.0 { 0 } else { r_max.log2().floor() as u32 };
            if n_max > 16 {
                return Err(Error::Unsupported(format!(
                    "density reaches |ξ| ≈ {r_max:.3e}; cap decompositions stop at generation 16"
                )));
            }
            let mut caps = vec![CapId::Two { n: 0, j: 0 }];
            for n in 1..=n_max {
                caps.extend((0..1u64 << n).map(|j| CapId::Two { n, j }));
            }
            Ok(caps)
        }
    }
}

/// `∫_C |f|^s dσ`.
pub fn cap_integral(f: &TrialFunction, cap: &CapId, s: f64) -> Result<f64> {
    if let (Density::CapSteps { weights }, true) = (f.density(), f.isometry().is_identity()) {
        let w = weights.iter().find(|w| w.0 == *cap).map_or(0.0, |w| w.1.norm());
        return Ok(w.powf(s) * f.scale().norm().powf(s) * cap_measure(cap));
    }
    match *cap {
        CapId::One(_) => {
            let (a, b) = cap.rapidity_bounds().unwrap_or_default();
            let gl = GaussLegendre::new(16);
            let mut cuts = vec![a, b];
            for (lo, hi) in f.rapidity_segments()? {
                cuts.extend([lo, hi].into_iter().filter(|c| *c > a && *c < b));
            }
            cuts.sort_by(f64::total_cmp);
            let total = cuts
                .windows(2)
                .map(|w| {
                    let panels = ((w[1] - w[0]) * 16.0).ceil().max(1.0) as usize;
                    gl.composite(|u| f.value_rapidity(u).norm().powf(s), w[0], w[1], panels)
                })
                .sum();
            Ok(total)
        }
        CapId::Two { .. } => {
            let (r0, r1, t0, t1) = cap.polar_bounds().unwrap_or_default();
            let (p0, p1) = (r0.asinh(), r1.asinh());
            let gl = GaussLegendre::new(16);
            let radial = f.is_radial();
            let angular_panels = if radial { 1 } else { 4 };
            let mut err = None;
            let value = gl.composite(
                |rho: f64| {
                    let r = rho.sinh();
                    let ang = gl.composite(
                        |th: f64| match HPoint2::new(r, th).and_then(|q| f.value(&HPoint::Two(q))) {
                            Ok(v) => v.norm().powf(s),
                            Err(e) => {
                                err.get_or_insert(e);
                                0.0
                            }
                        },
                        t0,
                        t1,
                        angular_panels,
                    );
                    ang * r
                },
                p0,
                p1,
                4,
            );
            match err {
                Some(e) => Err(e),
                None => Ok(value),
            }
        }
    }
}

/// `(Σ_k ||f_k||³_{L^{2q/(2q-3)}})^{1/3}`, the cubic refinement norm on `H^1`.
pub fn refinement_norm(dec: &CapDecomposition, q: f64) -> Result<f64> {
    if !(q >= 3.0) || !q.is_finite() {
        return Err(Error::domain("refinement exponent", format!("q = {q}, expected 3 ≤ q < ∞")));
    }
    if dec.dim != Dim::One {
        return Err(Error::Unsupported("the refinement norm is defined on H^1".into()));
    }
    let s = refinement_exponent(q);
    let cubes = dec
        .pieces
        .iter()
        .map(|p| {
            p.norm(s)
                .map(|v| v.powi(3))
                .ok_or_else(|| Error::Invalid(format!("decomposition lacks L^{s} norms; decompose with exponent {s}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&cubes).cbrt())
}

/// `2q/(2q - 3)`.
pub fn refinement_exponent(q: f64) -> f64 {
    2.0 * q / (2.0 * q - 3.0)
}

/// The cap carrying the largest `L²` mass. Near-ties (relative 1e-10) go to
/// the smaller `|k|`, then the smaller `k`, on `H^1` and to the
/// lexicographically smaller `(n, j)` on `H^2`.
pub fn cap_sup_mass(dec: &CapDecomposition) -> Result<(CapId, f64)> {
    let key = |c: &CapId| match *c {
        CapId::One(k) => (k.unsigned_abs(), k, 0u64),
        CapId::Two { n, j } => (n as u64, 0, j),
    };
    let best = dec.pieces.iter().map(|p| p.mass_sq).fold(0.0f64, f64::max);
    dec.pieces
        .iter()
        .filter(|p| p.mass_sq >= best * (1.0 - 1e-10))
        .min_by_key(|p| key(&p.cap))
        .map(|p| (p.cap, p.mass()))
        .ok_or_else(|| Error::Invalid("empty cap decomposition".into()))
}

/// Resolution of the light-cone grid used by [`bilinear_cap_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightConeGrid {
    /// Samples per shortest oscillation period of the waves.
    pub oversample: f64,
    /// Extent of the grid in units of the slowest decay length.
    pub extent: f64,
}

impl Default for LightConeGrid {
    fn default() -> Self {
        LightConeGrid {
            oversample: 4.0,
            extent: 50.0,
        }
    }
}

impl LightConeGrid {
    pub fn doubled(&self) -> Self {
        LightConeGrid {
            oversample: 2.0 * self.oversample,
            extent: 2.0 * self.extent,
        }
    }
}

/// `||T f · T g||_{L^q(R²)}` with `f`, `g` the `L²`-normalized indicators of
/// the caps `C_k`, `C_l` of `H^1`. Indicators of caps have unit `L^s(σ)`
/// norm for every `s`, so this is also the ratio in the weak interaction
/// bound for distant caps.
pub fn bilinear_cap_norm(k: i64, l: i64, q: f64, grid: &LightConeGrid) -> Result<f64> {
    let f = TrialFunction::normalized_indicator(CapId::One(k));
    let g = TrialFunction::normalized_indicator(CapId::One(l));
    bilinear_norm(&f, k, &g, l, q, grid)
}

/// `||T f · T g||_{L^q(R²)}` for densities on `H^1` supported in `C_k` and
/// `C_l`.
///
/// Both densities are boosted by the rapidity `-(k+l)/2`, which leaves the
/// norm unchanged and puts the caps symmetrically about `u = 0`. In the
/// light-cone coordinates `a = t + x`, `b = t - x`,
/// `Tf = ∫ exp(i(a e^u + b e^{-u})/2) f(u) du`; rows `Tf(·, b)` are Fourier
/// transforms in `w = e^u/2` and columns `Tg(a, ·)` are Fourier transforms
/// in `z = e^{-u}/2`, one FFT each.
pub fn bilinear_norm(f: &TrialFunction, k: i64, g: &TrialFunction, l: i64, q: f64, grid: &LightConeGrid) -> Result<f64> {
    if !(q > 2.0) || !q.is_finite() {
        return Err(Error::domain("bilinear exponent", format!("q = {q}, expected 2 < q < ∞")));
    }
    if f.dim() != Dim::One || g.dim() != Dim::One {
        return Err(Error::Unsupported("bilinear cap norms are computed on H^1".into()));
    }
    if !(grid.oversample >= 1.0) || !(grid.extent > 0.0) {
        return Err(Error::Invalid(format!("light-cone grid {grid:?}")));
    }
    for (h, c) in [(f, k), (g, l)] {
        let (lo, hi) = h.rapidity_support()?;
        let (a, b) = CapId::One(c).rapidity_bounds().unwrap_or_default();
        if lo < a - 1e-12 || hi > b + 1e-12 {
            return Err(Error::Invalid(format!("density is not supported in the cap C_{c}")));
        }
    }
    // order the caps so that f sits at the larger rapidity
    let (f, k, g, l) = if k >= l { (f, k, g, l) } else { (g, l, f, k) };
    let shift = Isometry::from_rapidity(Dim::One, -0.5 * (k + l) as f64)?;
    let f = f.transported(&shift)?;
    let g = g.transported(&shift)?;
    let c = 0.5 * (k - l) as f64;
    let (uf0, uf1) = (c - 0.5, c + 0.5);
    let (ug0, ug1) = (-c - 0.5, -c + 0.5);

    // w-range of f, z-range of g, and the fastest rates in both variables
    let (wf0, wf1) = (0.5 * uf0.exp(), 0.5 * uf1.exp());
    let (zg0, zg1) = (0.5 * (-ug1).exp(), 0.5 * (-ug0).exp());
    let fastest = wf1.max(zg1).max(0.5 * ug1.exp()).max(0.5 * (-uf0).exp());
    let step = PI / (grid.oversample * fastest);
    let a_ext = grid.extent / wf0;
    let b_ext = grid.extent / zg0;
    let pad_a = 2.5 * (a_ext + b_ext * (-2.0 * uf0).exp());
    let pad_b = 2.5 * (b_ext + a_ext * (2.0 * ug1).exp());
    let na = ((pad_a / step).ceil() as usize).next_power_of_two();
    let nb = ((pad_b / step).ceil() as usize).next_power_of_two();
    let a_idx = inner_indices(na, step, a_ext);
    let b_idx = inner_indices(nb, step, b_ext);

    // Tf(a, b) on the inner window, one row per b
    let plan_a = FftPlanner::new().plan_fft_inverse(na);
    let rows: Vec<Vec<Complex64>> = b_idx
        .par_iter()
        .map(|&jb| {
            let b = (jb as f64 - (nb / 2) as f64) * step;
            let out = light_cone_transform(&plan_a, na, step, wf0, wf1, |w| {
                let u = (2.0 * w).ln();
                f.value_rapidity(u) * Complex64::from_polar(1.0 / w, b / (4.0 * w))
            });
            a_idx.iter().map(|&ia| out[ia]).collect()
        })
        .collect();
    // Tg(a, b) on the inner window, one column per a
    let plan_b = FftPlanner::new().plan_fft_inverse(nb);
    let cols: Vec<Vec<Complex64>> = a_idx
        .par_iter()
        .map(|&ia| {
            let a = (ia as f64 - (na / 2) as f64) * step;
            let out = light_cone_transform(&plan_b, nb, step, zg0, zg1, |z| {
                let u = -(2.0 * z).ln();
                g.value_rapidity(u) * Complex64::from_polar(1.0 / z, a / (4.0 * z))
            });
            b_idx.iter().map(|&jb| out[jb]).collect()
        })
        .collect();
    let row_sums: Vec<f64> = rows
        .par_iter()
        .enumerate()
        .map(|(jb, row)| {
            let terms: Vec<f64> = row.iter().enumerate().map(|(ia, tf)| (tf * cols[ia][jb]).norm().powf(q)).collect();
            pairwise_sum(&terms)
        })
        .collect();
    // dx dt = da db / 2
    let total = pairwise_sum(&row_sums) * step * step * 0.5;
    Ok(total.powf(1.0 / q))
}

fn inner_indices(n: usize, step: f64, ext: f64) -> Vec<usize> {
    (0..n).filter(|&i| ((i as f64 - (n / 2) as f64) * step).abs() <= ext).collect()
}

// ∫_{w0}^{w1} e^{i a w} h(w) dw at a_k = (k - n/2) step, for a density h
// supported in [w0, w1]. Samples sit at w_j = j dw with dw = 2π/(n step);
// the cells cut by w0 and w1 are weighted by the fraction inside.
fn light_cone_transform<H: Fn(f64) -> Complex64>(plan: &Arc<dyn Fft<f64>>, n: usize, step: f64, w0: f64, w1: f64, h: H) -> Vec<Complex64> {
    let dw = TAU / (n as f64 * step);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let j0 = ((w0 / dw) - 0.5).floor().max(0.0) as usize;
    let j1 = (((w1 / dw) + 0.5).ceil() as usize).min(n - 1);
    for (j, slot) in buf.iter_mut().enumerate().take(j1 + 1).skip(j0) {
        let w = j as f64 * dw;
        let lo = (w - 0.5 * dw).max(w0);
        let hi = (w + 0.5 * dw).min(w1);
        if hi <= lo {
            continue;
        }
        // edge cells are sampled at the centre of their covered part
        let centre = 0.5 * (lo + hi);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *slot = h(centre) * ((hi - lo) * sign);
    }
    plan.process(&mut buf);
    buf
}

/// `θ` with `1/p = θ/4 + (1 - θ)/6`, the log-convexity exponent between
/// `L^4` and `L^6` for `p ∈ (4, 6)`.
pub fn interpolation_theta(p: f64) -> Result<f64> {
    if !(p > 4.0 && p < 6.0) {
        return Err(Error::domain("interpolation exponent", format!("p = {p}, expected 4 < p < 6")));
    }
    Ok((1.0 / p - 1.0 / 6.0) / (1.0 / 4.0 - 1.0 / 6.0))
}

/// `||x||`, the distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// The index blocks `A_{m,n}^{(j)}` and `B_{m,n}^{(j,k)}` of angular
/// indices `0 ≤ ℓ < 2^m` near the direction of the cap `C_{n,j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIndex {
    pub m: u32,
    pub n: u32,
    pub j: u64,
}

impl BlockIndex {
    pub fn new(m: u32, n: u32, j: u64) -> Result<Self> {
        if n > m || m > 40 || j >= (1u64 << n) {
            return Err(Error::domain(
                "block index",
                format!("(m, n, j) = ({m}, {n}, {j}) needs n ≤ m ≤ 40, j < 2^n"),
            ));
        }
        Ok(BlockIndex { m, n, j })
    }

    fn modulus(&self) -> i128 {
        1i128 << self.m
    }

    fn scale(&self) -> i128 {
        1i128 << (self.m - self.n)
    }

    // ℓ ∈ [lo, lo + len) mod 2^m
    fn in_window(&self, l: u64, lo: i128, len: i128) -> bool {
        len >= self.modulus() || (l as i128 - lo).rem_euclid(self.modulus()) < len
    }

    /// `ℓ ∈ [2^{m-n}(j-2), 2^{m-n}(j+2)) mod 2^m`.
    pub fn in_a(&self, l: u64) -> bool {
        self.in_window(l, self.scale() * (self.j as i128 - 2), 4 * self.scale())
    }

    /// `ℓ ∈ [2^{m-n}(j+k), 2^{m-n}(j+k+1)) mod 2^m`.
    pub fn in_b(&self, k: i64, l: u64) -> bool {
        self.in_window(l, self.scale() * (self.j as i128 + k as i128), self.scale())
    }

    pub fn a_set(&self) -> Vec<u64> {
        (0..1u64 << self.m).filter(|&l| self.in_a(l)).collect()
    }

    pub fn b_set(&self, k: i64) -> Vec<u64> {
        (0..1u64 << self.m).filter(|&l| self.in_b(k, l)).collect()
    }

    /// `|A_{m,n}^{(j)}| = 2^{m-n+2}` once `n ≥ 2`; for `n < 2` the window
    /// wraps around and `A` is all of `[0, 2^m)`.
    pub fn a_cardinality(&self) -> u64 {
        (1u64 << (self.m - self.n + 2)).min(1u64 << self.m)
    }

    /// `|B_{m,n}^{(j,k)}| = 2^{m-n}`.
    pub fn b_cardinality(&self) -> u64 {
        1u64 << (self.m - self.n)
    }
}

/// `B(f) = ∫∫ |f(ξ)|² |f(η)|² (σ*σ)(ξ+η, <ξ>+<η>) dσ(ξ) dσ(η)` on `H^2`,
/// with `(σ*σ) = 2π/s` and `s² = 2(1 + <ξ><η> - ξ·η)`.
///
/// Rotation invariance reduces each pair of cells to the radii and the
/// angle difference `φ`, weighted by the overlap of the two angular
/// intervals. Whole rings integrate `φ` in closed form:
/// `∫_0^{2π} dφ / s = 2π / AGM(√(α-β), √(α+β))` with
/// `α = 2(1 + <r><r'>)`, `β = 2 r r'`.
pub fn bilinear_cs_functional(f: &TrialFunction, cfg: &QuadConfig) -> Result<f64> {
    cfg.validate()?;
    if f.dim() != Dim::Two {
        return Err(Error::Unsupported("the Cauchy–Schwarz functional is defined on H^2".into()));
    }
    let cells = cs_cells(f)?;
    let gl = GaussLegendre::new(12);
    let mut pair_terms = Vec::new();
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i..] {
            let mult = if std::ptr::eq(a, b) { 1.0 } else { 2.0 };
            pair_terms.push((a, b, mult));
        }
    }
    let values = pair_terms
        .par_iter()
        .map(|&(a, b, mult)| Ok(mult * cell_pair(a, b, &gl, cfg)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&values))
}

// A radial band times an angular interval, carrying |f|² as a function of ρ.
#[derive(Clone)]
struct Cell {
    rho: (f64, f64),
    theta: (f64, f64),
    weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

fn cs_cells(f: &TrialFunction) -> Result<Vec<Cell>> {
    let scale2 = f.scale().norm_sqr();
    if f.is_radial() {
        let g = f.clone();
        let weight: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |rho: f64| {
            HPoint2::new(rho.sinh(), 0.0)
                .and_then(|q| g.value(&HPoint::Two(q)))
                .map_or(0.0, |v| v.norm_sqr())
        });
        // split into generations so the radial rule sees comparable scales
        let segs = f.base_segments();
        let mut cells = Vec::new();
        for (lo, hi) in segs {
            let mut cuts = vec![lo, hi];
            let mut r = 2.0f64;
            while r.asinh() < hi {
                if r.asinh() > lo {
                    cuts.push(r.asinh());
                }
                r *= 2.0;
            }
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                cells.push(Cell {
                    rho: (w[0], w[1]),
                    theta: (0.0, TAU),
                    weight: weight.clone(),
                });
            }
        }
        return Ok(cells);
    }
    match (f.density(), f.isometry().is_identity() && f.modulation().x0 == [0.0, 0.0]) {
        (Density::CapSteps { weights }, true) => {
            // merge a generation into one ring when all its caps share the weight
            let mut cells = Vec::new();
            let mut i = 0;
            while i < weights.len() {
                let (cap, w) = weights[i];
                let CapId::Two { n, .. } = cap else {
                    return Err(Error::Invalid("cap steps on H^1".into()));
                };
                let gen: Vec<_> = weights[i..]
                    .iter()
                    .take_while(|(c, _)| matches!(c, CapId::Two { n: m, .. } if *m == n))
                    .collect();
                let full = gen.len() as u64 == (1u64 << n) && gen.iter().all(|(_, v)| (v.norm() - w.norm()).abs() <= 1e-14 * w.norm());
                let (r0, r1, _, _) = cap.polar_bounds().unwrap_or_default();
                if full {
                    let m2 = w.norm_sqr() * scale2;
                    cells.push(Cell {
                        rho: (r0.asinh(), r1.asinh()),
                        theta: (0.0, TAU),
                        weight: Arc::new(move |_| m2),
                    });
                } else {
                    for (c, v) in &gen {
                        let (r0, r1, t0, t1) = c.polar_bounds().unwrap_or_default();
                        let m2 = v.norm_sqr() * scale2;
                        cells.push(Cell {
                            rho: (r0.asinh(), r1.asinh()),
                            theta: (t0, t1),
                            weight: Arc::new(move |_| m2),
                        });
                    }
                }
                i += gen.len();
            }
            Ok(cells)
        }
        _ => Err(Error::Unsupported(
            "the Cauchy–Schwarz functional needs a radial density or unmoved cap steps".into(),
        )),
    }
}

// ∫_{cell a} ∫_{cell b} |f|² |f|² 2π/s dσ dσ
fn cell_pair(a: &Cell, b: &Cell, gl: &GaussLegendre, cfg: &QuadConfig) -> Result<f64> {
    let full = |c: &Cell| c.theta.1 - c.theta.0 >= TAU;
    let panels = |r: (f64, f64)| ((r.1 - r.0) / 0.35).ceil().max(1.0) as usize;
    let mut failure = None;
    let value = gl.composite(
        |rho1: f64| {
            let w1 = (a.weight)(rho1);
            if w1 == 0.0 {
                return 0.0;
            }
            let (r1, j1) = (rho1.sinh(), rho1.cosh());
            gl.composite(
                |rho2: f64| {
                    let w2 = (b.weight)(rho2);
                    if w2 == 0.0 {
                        return 0.0;
                    }
                    let (r2, j2) = (rho2.sinh(), rho2.cosh());
                    let ang = if full(a) || full(b) {
                        // one full ring: the other interval contributes its length
                        let frac = (a.theta.1 - a.theta.0).min(TAU) * (b.theta.1 - b.theta.0).min(TAU) / (TAU * TAU);
                        frac * ring_kernel(r1, j1, r2, j2)
                    } else {
                        match arc_kernel(a.theta, b.theta, r1, j1, r2, j2, cfg) {
                            Ok(v) => v,
                            Err(e) => {
                                failure.get_or_insert(e);
                                0.0
                            }
                        }
                    };
                    w1 * w2 * r1 * r2 * ang
                },
                b.rho.0,
                b.rho.1,
                panels(b.rho),
            )
        },
        a.rho.0,
        a.rho.1,
        panels(a.rho),
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

// <r><r'> - r r', without cancellation
fn hyperbolic_gap(r1: f64, j1: f64, r2: f64, j2: f64) -> f64 {
    (1.0 + r1 * r1 + r2 * r2) / (j1 * j2 + r1 * r2)
}

/// `∫_0^{2π} ∫_0^{2π} 2π / s dθ dθ'` for two full rings of radii `r1`, `r2`
/// (`j = <r>`), i.e. `2π · 2π · ∫_0^{2π} dφ / s`.
fn ring_kernel(r1: f64, j1: f64, r2: f64, j2: f64) -> f64 {
    let minus = 2.0 * (1.0 + hyperbolic_gap(r1, j1, r2, j2));
    let plus = minus + 4.0 * r1 * r2;
    TAU * TAU * TAU / agm(minus.sqrt(), plus.sqrt())
}

pub(crate) fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let m = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = m;
    }
    0.5 * (a + b)
}

/// `∫_{I1} ∫_{I2} 2π / s(θ1 - θ2) dθ1 dθ2`, written as `∫ overlap(φ) 2π/s(φ) dφ`.
fn arc_kernel(i1: (f64, f64), i2: (f64, f64), r1: f64, j1: f64, r2: f64, j2: f64, cfg: &QuadConfig) -> Result<f64> {
    let (l1, l2) = (i1.1 - i1.0, i2.1 - i2.0);
    // φ = θ1 - θ2 ranges over [i1.0 - i2.1, i1.1 - i2.0]; overlap is a trapezoid
    let lo = i1.0 - i2.1;
    let hi = i1.1 - i2.0;
    let k1 = lo + l1.min(l2);
    let k2 = hi - l1.min(l2);
    let overlap = |phi: f64| (phi - lo).min(hi - phi).min(l1.min(l2)).max(0.0);
    let minus = 2.0 * (1.0 + hyperbolic_gap(r1, j1, r2, j2));
    let kernel = |phi: f64| {
        let sn = (0.5 * phi).sin();
        TAU / (minus + 4.0 * r1 * r2 * sn * sn).sqrt()
    };
    // breakpoints at the trapezoid corners and at the peaks φ ≡ 0 mod 2π
    let mut cuts = vec![lo, hi, k1.min(k2), k1.max(k2)];
    let mut m = (lo / TAU).ceil();
    while m * TAU < hi {
        cuts.push(m * TAU);
        m += 1.0;
    }
    cuts.retain(|c| *c >= lo && *c <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += integrate(|phi: f64| overlap(phi) * kernel(phi), w[0], w[1], cfg)?.value;
        }
    }
    Ok(total)
}

/// The spread density on `H^2` with equal `L²` mass `ε_N² = 1/(2^{N+1}-1)`
/// on every cap of generation at most `N`, so `||f_N||₂ = 1`.
pub fn spread_family(n_max: u32) -> Result<(TrialFunction, f64)> {
    if n_max > 16 {
        return Err(Error::domain("spread family generation", format!("N = {n_max}, expected N ≤ 16")));
    }
    let count = (1u64 << (n_max + 1)) - 1;
    let eps = 1.0 / (count as f64).sqrt();
    let mut weights = Vec::with_capacity(count as usize);
    for n in 0..=n_max {
        for j in 0..1u64 << n {
            let cap = CapId::Two { n, j };
            weights.push((cap, Complex64::new(eps / cap_measure(&cap).sqrt(), 0.0)));
        }
    }
    Ok((TrialFunction::cap_steps(weights)?, eps))
}

/// Outcome of [`special_cap_recenter`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recentering {
    pub cap: CapId,
    pub isometry: Isometry,
    pub recentered: TrialFunction,
    /// Mass of the heaviest cap before recentering.
    pub cap_mass: f64,
    /// `L²` mass of the recentered density in `C_0` (`H^1`) or in the disc
    /// `|ξ| ≤ 2√2 π` (`H^2`).
    pub achieved_mass: f64,
    pub meets_threshold: bool,
    /// The input was rescaled to unit norm.
    pub normalized: bool,
}

/// Finds the heaviest cap of `f` and the isometry that recenters it; the
/// transported density is the pushforward `f ∘ iso^{-1}`.
pub fn special_cap_recenter(f: &TrialFunction, threshold: f64, cfg: &QuadConfig) -> Result<Recentering> {
    let norm_sq = f.l2_norm_sq(cfg)?;
    if !(norm_sq > 0.0) {
        return Err(Error::Invalid("cannot recenter the zero density".into()));
    }
    let normalized = (norm_sq - 1.0).abs() > 1e-10;
    let f = if normalized {
        f.scaled(Complex64::new(1.0 / norm_sq.sqrt(), 0.0))
    } else {
        f.clone()
    };
    let dec = decompose(&f, &[], cfg)?;
    let (cap, cap_mass) = cap_sup_mass(&dec)?;
    let isometry = recenter_cap(&cap);
    let recentered = f.transported(&isometry)?;
    let achieved_mass = match f.dim() {
        Dim::One => cap_integral(&recentered, &CapId::One(0), 2.0)?.sqrt(),
        Dim::Two => disc_mass(&f, &isometry, &dec)?.sqrt(),
    };
    Ok(Recentering {
        cap,
        isometry,
        recentered,
        cap_mass,
        achieved_mass,
        meets_threshold: achieved_mass >= threshold,
        normalized,
    })
}

// ∫_{iso^{-1}(D)} |f|² dσ, i.e. the mass of f ∘ iso^{-1} in the disc D,
// integrated cap by cap in the original coordinates.
fn disc_mass(f: &TrialFunction, iso: &Isometry, dec: &CapDecomposition) -> Result<f64> {
    let gl = GaussLegendre::new(12);
    let inside = |r: f64, th: f64| -> Result<bool> {
        let p = HPoint::Two(HPoint2::new(r, th)?);
        let (xi, _) = iso.apply(&p)?.embed();
        Ok(xi[0].hypot(xi[1]) <= RECENTER_RADIUS)
    };
    let parts = dec
        .pieces
        .iter()
        .filter(|p| p.mass_sq > 0.0)
        .map(|piece| {
            let (r0, r1, t0, t1) = piece.cap.polar_bounds().unwrap_or_default();
            let mut err = None;
            let v = gl.composite(
                |rho: f64| {
                    let r = rho.sinh();
                    gl.composite(
                        |th: f64| {
                            let val = HPoint2::new(r, th).and_then(|q| f.value(&HPoint::Two(q)));
                            match (val, inside(r, th)) {
                                (Ok(v), Ok(true)) => v.norm_sqr() * r,
                                (Ok(_), Ok(false)) => 0.0,
                                (Err(e), _) | (_, Err(e)) => {
                                    err.get_or_insert(e);
                                    0.0
                                }
                            }
                        },
                        t0,
                        t1,
                        8,
                    )
                },
                r0.asinh(),
                r1.asinh(),
                8,
            );
            match err {
                Some(e) => Err(e),
                None => Ok(v),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&parts))
}
