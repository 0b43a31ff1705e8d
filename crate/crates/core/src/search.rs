//! Derivative-free ascent of the Strichartz quotient over symmetric trial
//! families, with recentering of the heaviest cap after every accepted step.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capanalysis::{cap_integral, cap_sup_mass, decompose};
use crate::convolution::MeasureProfile;
use crate::error::{Error, Result};
use crate::geometry::{CapId, Dim, Isometry};
use crate::quad::{integrate, integrate_with_breaks, QuadConfig};
use crate::strichartz::{exp_family_quotient_p6, st_norm, SpaceTimeGrid};
use crate::trial::{Modulation, TrialFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `f = e^{-a<y>}`, one parameter.
    Exp,
    /// `f(u) = exp(-Σ c_i u^{2i})` in rapidity, `m` parameters.
    ExpEvenPoly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub m: usize,
    /// `[lo, hi]` per parameter. Positive boxes are searched in log scale.
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub iters: usize,
    /// Stop once the simplex values agree to this relative spread.
    pub tol: f64,
    pub restarts: usize,
    /// Initial simplex edge in the unit box.
    #[serde(default = "default_simplex_scale")]
    pub simplex_scale: f64,
}

fn default_simplex_scale() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub d: u32,
    pub p: f64,
    pub family: FamilySpec,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
    /// Grid for the direct route; defaults to [`SearchSpec::default_grid`].
    #[serde(default)]
    pub grid: Option<SpaceTimeGrid>,
}

impl SearchSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SearchSpec = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("search spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// A coarser window than the default grid; quotients of the families in
    /// the search boxes lose less than 1e-4 to it.
    pub fn default_grid() -> SpaceTimeGrid {
        SpaceTimeGrid {
            x_extent: 120.0,
            dx: 0.1,
            t_extent: 100.0,
            dt: 0.1,
            p: 6.0,
        }
    }

    pub fn grid(&self) -> SpaceTimeGrid {
        self.grid.unwrap_or_else(Self::default_grid).with_p(self.p)
    }

    pub fn validate(&self) -> Result<()> {
        let fam = &self.family;
        let m_ok = match fam.kind {
            FamilyKind::Exp => fam.m == 1,
            FamilyKind::ExpEvenPoly => fam.m >= 1,
        };
        if !m_ok || fam.bounds.len() != fam.m {
            return Err(Error::Invalid(format!(
                "family {:?} with m = {} and {} bounds",
                fam.kind,
                fam.m,
                fam.bounds.len()
            )));
        }
        for (i, [lo, hi]) in fam.bounds.iter().enumerate() {
            let last = i + 1 == fam.m;
            let positive = fam.kind == FamilyKind::Exp || last;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) || *lo < 0.0 || (positive && *lo <= 0.0) {
                return Err(Error::Invalid(format!("parameter {i} bounds [{lo}, {hi}]")));
            }
        }
        let opt = &self.optimizer;
        if opt.iters == 0 || opt.restarts == 0 || !(opt.tol >= 0.0) || !(opt.simplex_scale > 0.0 && opt.simplex_scale <= 1.0) {
            return Err(Error::Invalid(format!("optimizer settings {opt:?}")));
        }
        match self.d {
            1 => {
                if !(self.p >= 6.0) || !self.p.is_finite() {
                    return Err(Error::domain(
                        "Lebesgue exponent",
                        format!("p = {} on H^1, expected 6 ≤ p < ∞", self.p),
                    ));
                }
                self.grid().validate()
            }
            2 => {
                if fam.kind != FamilyKind::Exp || !(self.p == 4.0 || self.p == 6.0) {
                    return Err(Error::Unsupported(format!(
                        "searches on H^2 run on the exponential family at p = 4 or p = 6 only (got p = {})",
                        self.p
                    )));
                }
                Ok(())
            }
            d => Err(Error::Unsupported(format!("dimension {d}"))),
        }
    }

    fn params_of(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.family.bounds)
            .map(|(&t, &[lo, hi])| {
                let t = t.clamp(0.0, 1.0);
                if lo > 0.0 {
                    lo * (hi / lo).powf(t)
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect()
    }

    pub fn density(&self, params: &[f64]) -> Result<TrialFunction> {
        let dim = Dim::from_int(self.d)?;
        match self.family.kind {
            FamilyKind::Exp => TrialFunction::exp_family(dim, params[0]),
            FamilyKind::ExpEvenPoly => TrialFunction::exp_even_poly(params.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Direct space-time quadrature.
    Grid,
    /// `||Tf||_{2n}^{2n} = (2π)^{d+1} ||(fσ)^{*n}||²` with the convolution in closed form.
    Convolution,
}

/// A quotient `||Tf||_p / ||f||₂` with its error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub value: f64,
    pub error: f64,
    /// The space-time tail could not be bounded; `value` is then a lower bound.
    pub inconclusive: bool,
    pub route: Route,
}

/// `Q_p(f) = ||Tf||_{L^p} / ||f||_{L²}` on `H^1` by grid quadrature. The
/// error is the truncation bound of the space-time window.
pub fn quotient_objective(f: &TrialFunction, grid: &SpaceTimeGrid, cfg: &QuadConfig) -> Result<Objective> {
    let s = st_norm(f, grid, cfg)?;
    let n = f.l2_norm_sq(cfg)?.sqrt();
    if !(n > 0.0) {
        return Err(Error::Invalid("zero density".into()));
    }
    Ok(Objective {
        value: s.norm / n,
        error: s.tail_bound / n,
        inconclusive: s.inconclusive,
        route: Route::Grid,
    })
}

/// The quotient of `e^{-a<ξ>}` on `H^2` at `p = 4` or `p = 6`.
///
/// With `(ξ, τ) = s(y, <y>)`, `dξ dτ = s² ds dσ(y)`, and the Lorentz
/// invariance of `σ*σ = 2π/s` and `σ*σ*σ = (2π)²(1 - 3/s)`:
/// `Q_4^4 = (2π)^4 · 2a · e^{4a} E_1(4a)` and
/// `Q_6^6 = (2π)^8 a² / (2π³) · ∫_0^∞ v²/(v+3) e^{-2av} dv`.
pub fn exp_quotient_h2(a: f64, p: f64, cfg: &QuadConfig) -> Result<Objective> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain("exponential family parameter", format!("a = {a}, expected a > 0")));
    }
    let (value, error) = if p == 4.0 {
        // e^x E_1(x) = ∫_0^∞ e^{-x v}/(1+v) dv, with v = e^s - 1
        let x = 4.0 * a;
        let s_max = (1.0 + 50.0 / x).ln();
        let e = integrate(|s: f64| (-x * s.exp_m1()).exp(), 0.0, s_max, cfg)?;
        let q4 = TAU.powi(4) * 2.0 * a * e.value;
        (q4.powf(0.25), 0.25 * q4.powf(0.25) * (e.error / e.value + (-50.0f64).exp()))
    } else if p == 6.0 {
        let v_max = 50.0 / (2.0 * a);
        let mut breaks = vec![0.0];
        let mut b = v_max.min(1.0) / 64.0;
        while b < v_max {
            breaks.push(b);
            b *= 4.0;
        }
        breaks.push(v_max);
        let mut g = |v: f64| v * v / (v + 3.0) * (-2.0 * a * v).exp();
        let j = integrate_with_breaks(&mut g, &breaks, cfg)?;
        let q6 = TAU.powi(8) * a * a / (2.0 * PI.powi(3)) * j.value;
        (
            q6.powf(1.0 / 6.0),
            q6.powf(1.0 / 6.0) * (j.error / j.value + (-50.0f64).exp()) / 6.0,
        )
    } else {
        return Err(Error::Unsupported(format!(
            "closed-form quotients on H^2 exist at p = 4, 6 (got p = {p})"
        )));
    };
    Ok(Objective {
        value,
        error,
        inconclusive: false,
        route: Route::Convolution,
    })
}

/// One row per optimizer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub restart: usize,
    pub iteration: usize,
    pub evaluations: usize,
    /// Best quotient over all restarts so far.
    pub best_quotient: f64,
    pub best_error: f64,
    pub params: Vec<f64>,
    /// Boost parameter applied when recentering the best density.
    pub boost: f64,
    pub modulation: Modulation,
    pub cap: CapId,
    pub cap_mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TrialFunction,
    pub best_params: Vec<f64>,
    pub best_quotient: Objective,
    pub trace: Vec<TraceRow>,
    /// Every restart met the tolerance within the iteration budget.
    pub converged: bool,
}

struct Evaluator<'a> {
    spec: &'a SearchSpec,
    grid: SpaceTimeGrid,
    profile: Option<MeasureProfile>,
    cfg: &'a QuadConfig,
}

impl Evaluator<'_> {
    fn eval(&self, z: &[f64]) -> Result<Objective> {
        let params = self.spec.params_of(z);
        match (self.spec.d, self.spec.family.kind, &self.profile) {
            (1, FamilyKind::Exp, Some(profile)) => {
                let q = exp_family_quotient_p6(params[0], profile, self.cfg)?;
                Ok(Objective {
                    value: q.value,
                    error: q.error,
                    inconclusive: false,
                    route: Route::Convolution,
                })
            }
            (1, _, _) => quotient_objective(&self.spec.density(&params)?, &self.grid, self.cfg),
            _ => exp_quotient_h2(params[0], self.spec.p, self.cfg),
        }
    }

    fn eval_many(&self, zs: &[Vec<f64>]) -> Result<Vec<Objective>> {
        zs.par_iter().map(|z| self.eval(z)).collect()
    }
}

/// Maximizes the quotient with a Nelder–Mead simplex in the unit box of the
/// family parameters, from `restarts` seeded simplices. The best density is
/// recentered after every accepted step; the families are real and even, so
/// the modulation stays zero.
pub fn run_search(spec: &SearchSpec, cfg: &QuadConfig) -> Result<SearchOutcome> {
    spec.validate()?;
    let profile = if spec.d == 1 && spec.p == 6.0 && spec.family.kind == FamilyKind::Exp {
        let a_min = spec.family.bounds[0][0];
        let tau_max = (3.0 + (1e18f64).ln() / (2.0 * a_min)) * 1.1;
        Some(MeasureProfile::conv3_1d(*cfg).cached(1500, tau_max.max(50.0))?)
    } else {
        None
    };
    let ev = Evaluator {
        spec,
        grid: spec.grid(),
        profile,
        cfg,
    };
    let m = spec.family.m;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trace = Vec::new();
    let mut best: Option<(Vec<f64>, Objective)> = None;
    let mut converged = true;
    let mut evaluations = 0usize;

    for restart in 0..spec.optimizer.restarts {
        let h = spec.optimizer.simplex_scale;
        let centre: Vec<f64> = (0..m).map(|_| rng.gen_range(h..=1.0 - h).clamp(0.0, 1.0)).collect();
        let mut simplex = vec![centre.clone()];
        for i in 0..m {
            let mut v = centre.clone();
            v[i] = if v[i] + h <= 1.0 { v[i] + h } else { v[i] - h };
            simplex.push(v);
        }
        let mut values = ev.eval_many(&simplex)?;
        evaluations += simplex.len();
        let mut done = false;
        for iteration in 0..=spec.optimizer.iters {
            sort_simplex(&mut simplex, &mut values);
            if best.as_ref().is_none_or(|b| values[0].value > b.1.value) {
                best = Some((simplex[0].clone(), values[0]));
            }
            let (bz, bq) = best.clone().expect("best is set after the first evaluation");
            let row = trace_row(spec, restart, iteration, evaluations, &bz, &bq, cfg)?;
            trace.push(row);
            let spread = values[0].value - values[m].value;
            if spread <= spec.optimizer.tol * values[0].value.abs() {
                done = true;
                break;
            }
            if iteration == spec.optimizer.iters {
                break;
            }
            evaluations += nelder_mead_step(&ev, &mut simplex, &mut values)?;
        }
        converged &= done;
    }
    let (bz, bq) = best.expect("at least one restart runs");
    let best_params = spec.params_of(&bz);
    let f = spec.density(&best_params)?;
    let last = trace.last().expect("trace has a row per iteration");
    let best_density = if last.boost != 0.0 {
        f.transported(&Isometry::boost(f.dim(), last.boost)?)?
    } else {
        f
    };
    Ok(SearchOutcome {
        best: best_density,
        best_params,
        best_quotient: bq,
        trace,
        converged,
    })
}

// descending by quotient; ties keep vertex order
fn sort_simplex(simplex: &mut Vec<Vec<f64>>, values: &mut Vec<Objective>) {
    let mut idx: Vec<usize> = (0..simplex.len()).collect();
    idx.sort_by(|&a, &b| values[b].value.total_cmp(&values[a].value));
    *simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
    *values = idx.iter().map(|&i| values[i]).collect();
}

fn clamp_unit(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

// Reflect, expand, contract or shrink on a simplex sorted best first.
// Returns the number of objective evaluations.
fn nelder_mead_step(ev: &Evaluator, simplex: &mut [Vec<f64>], values: &mut [Objective]) -> Result<usize> {
    let n = simplex.len() - 1;
    let m = simplex[0].len();
    let centroid: Vec<f64> = (0..m).map(|i| simplex[..n].iter().map(|v| v[i]).sum::<f64>() / n as f64).collect();
    let along = |s: f64| -> Vec<f64> { clamp_unit((0..m).map(|i| centroid[i] + s * (simplex[n][i] - centroid[i])).collect()) };
    let reflected = along(-1.0);
    let qr = ev.eval(&reflected)?;
    if qr.value > values[0].value {
        let expanded = along(-2.0);
        let qe = ev.eval(&expanded)?;
        if qe.value > qr.value {
            simplex[n] = expanded;
            values[n] = qe;
        } else {
            simplex[n] = reflected;
            values[n] = qr;
        }
        return Ok(2);
    }
    if qr.value > values[n - 1].value {
        simplex[n] = reflected;
        values[n] = qr;
        return Ok(1);
    }
    let (contracted, target) = if qr.value > values[n].value {
        (along(-0.5), qr.value)
    } else {
        (along(0.5), values[n].value)
    };
    let qc = ev.eval(&contracted)?;
    if qc.value > target {
        simplex[n] = contracted;
        values[n] = qc;
        return Ok(2);
    }
    // shrink towards the best vertex
    let shrunk: Vec<Vec<f64>> = simplex[1..]
        .iter()
        .map(|v| clamp_unit((0..m).map(|i| simplex[0][i] + 0.5 * (v[i] - simplex[0][i])).collect()))
        .collect();
    let qs = ev.eval_many(&shrunk)?;
    for (k, (v, q)) in shrunk.into_iter().zip(qs).enumerate() {
        simplex[k + 1] = v;
        values[k + 1] = q;
    }
    Ok(2 + n)
}

fn trace_row(
    spec: &SearchSpec,
    restart: usize,
    iteration: usize,
    evaluations: usize,
    z: &[f64],
    q: &Objective,
    cfg: &QuadConfig,
) -> Result<TraceRow> {
    let params = spec.params_of(z);
    let f = spec.density(&params)?;
    let norm = f.l2_norm_sq(cfg)?.sqrt();
    let (cap, cap_mass, boost) = match f.dim() {
        Dim::One => {
            let dec = decompose(&f, &[], cfg)?;
            let (cap, mass) = cap_sup_mass(&dec)?;
            let k = match cap {
                CapId::One(k) => k,
                CapId::Two { .. } => 0,
            };
            (cap, mass / norm, -(k as f64).tanh())
        }
        Dim::Two => {
            // a radial nonincreasing density is heaviest on the central disc,
            // the largest cap
            let cap = CapId::Two { n: 0, j: 0 };
            (cap, cap_integral(&f, &cap, 2.0)?.sqrt() / norm, 0.0)
        }
    };
    Ok(TraceRow {
        restart,
        iteration,
        evaluations,
        best_quotient: q.value,
        best_error: q.error,
        params,
        boost,
        modulation: Modulation::default(),
        cap,
        cap_mass,
    })
}

/// Quotients of `e^{-a<y>}` on `H^1` towards both degenerate ends of the
/// family, `a → 0` and `a → ∞`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegenerateEnds {
    /// `(a, Q_p)` with `a` decreasing.
    pub small: Vec<(f64, Objective)>,
    /// `(a, Q_p)` with `a` increasing.
    pub large: Vec<(f64, Objective)>,
}

impl DegenerateEnds {
    /// Both ends decrease monotonically towards their limits.
    pub fn monotone(&self) -> bool {
        let dec = |v: &[(f64, Objective)]| v.windows(2).all(|w| w[1].1.value < w[0].1.value);
        dec(&self.small) && dec(&self.large)
    }

    /// The largest end quotient plus its error bound; by monotonicity an
    /// upper bound for both limits.
    pub fn ceiling(&self) -> f64 {
        let last = |v: &[(f64, Objective)]| v.last().map_or(f64::NEG_INFINITY, |(_, q)| q.value + q.error);
        last(&self.small).max(last(&self.large))
    }
}

pub fn degenerate_ends(small: &[f64], large: &[f64], grid: &SpaceTimeGrid, cfg: &QuadConfig) -> Result<DegenerateEnds> {
    let eval =
        |a: &f64| -> Result<(f64, Objective)> { Ok((*a, quotient_objective(&TrialFunction::exp_family(Dim::One, *a)?, grid, cfg)?)) };
    Ok(DegenerateEnds {
        small: small.iter().map(eval).collect::<Result<_>>()?,
        large: large.iter().map(eval).collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strichartz::optimal_constant;
    use num_complex::Complex64;

    fn spec_json(d: u32, p: f64, kind: &str, bounds: &str, iters: usize) -> String {
        let m = bounds.matches('[').count() - 1;
        format!(
            r#"{{"d": {d}, "p": {p}, "family": {{"kind": "{kind}", "m": {m}, "bounds": {bounds}}},
                "optimizer": {{"iters": {iters}, "tol": 1e-9, "restarts": 2}}, "seed": 7}}"#
        )
    }

    #[test]
    fn spec_parsing_and_validation() {
        let s = SearchSpec::from_json(&spec_json(1, 8.0, "exp_even_poly", "[[0.0, 2.0], [0.1, 4.0]]", 5)).unwrap();
        assert_eq!(s.family.kind, FamilyKind::ExpEvenPoly);
        assert_eq!(s.optimizer.simplex_scale, 0.25);
        assert_eq!(s.grid().p, 8.0);
        let p = s.params_of(&[0.5, 0.5]);
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 0.4f64.sqrt() * 1.0).abs() < 1e-12);
        for bad in [
            spec_json(1, 5.0, "exp", "[[0.5, 2.0]]", 5),
            spec_json(1, 8.0, "exp", "[[0.0, 2.0]]", 5),
            spec_json(1, 8.0, "exp_even_poly", "[[0.1, 2.0], [0.0, 4.0]]", 5),
            spec_json(2, 5.0, "exp", "[[0.5, 2.0]]", 5),
            spec_json(2, 4.0, "exp_even_poly", "[[0.5, 2.0]]", 5),
            spec_json(1, 8.0, "exp", "[[0.5, 2.0]]", 0),
        ] {
            assert!(SearchSpec::from_json(&bad).is_err(), "{bad}");
        }
        assert!(SearchSpec::from_json("{\"d\": 1}").is_err());
    }

    #[test]
    fn h2_quotients_approach_constants_from_below() {
        let c = QuadConfig::default();
        let h24 = optimal_constant(2, 4, &c).unwrap().value;
        let h26 = optimal_constant(2, 6, &c).unwrap().value;
        let q4: Vec<f64> = [0.1, 1.0, 10.0, 1000.0]
            .iter()
            .map(|a| exp_quotient_h2(*a, 4.0, &c).unwrap().value)
            .collect();
        assert!(q4.windows(2).all(|w| w[0] < w[1]) && q4[3] < h24);
        assert!((h24 - q4[3]) / h24 < 1e-3);
        let q6: Vec<f64> = [10.0, 1.0, 0.1, 1e-4]
            .iter()
            .map(|a| exp_quotient_h2(*a, 6.0, &c).unwrap().value)
            .collect();
        assert!(q6.windows(2).all(|w| w[0] < w[1]) && q6[3] < h26);
        assert!((h26 - q6[3]) / h26 < 1e-3);
    }

    #[test]
    fn h2_quotient_p4_matches_exponential_integral_series() {
        // E_1(x) = -γ - ln x - Σ (-x)^k / (k k!)
        let c = QuadConfig::default();
        let a: f64 = 0.3;
        let x = 4.0 * a;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        let e1 = -0.577_215_664_901_532_9 - x.ln() - sum;
        let want = (TAU.powi(4) * 2.0 * a * x.exp() * e1).powf(0.25);
        assert!((exp_quotient_h2(a, 4.0, &c).unwrap().value - want).abs() < 1e-10 * want);
    }

    #[test]
    fn objective_scaling_and_boost_invariance() {
        let c = QuadConfig::default();
        let grid = SearchSpec::default_grid().with_p(8.0);
        let f = TrialFunction::exp_even_poly(vec![0.5, 1.0]).unwrap();
        let q = quotient_objective(&f, &grid, &c).unwrap();
        let q2 = quotient_objective(&f.scaled(Complex64::new(-3.0, 2.0)), &grid, &c).unwrap();
        assert!((q.value - q2.value).abs() < 1e-12 * q.value);
        let boosted = f.transported(&Isometry::boost(Dim::One, 0.3).unwrap()).unwrap();
        let qb = quotient_objective(&boosted, &grid, &c).unwrap();
        assert!((q.value - qb.value).abs() < 1e-4 * q.value, "{} vs {}", q.value, qb.value);
    }

    #[test]
    fn p6_exp_search_climbs_towards_h16() {
        let c = QuadConfig::default();
        let spec = SearchSpec::from_json(&spec_json(1, 6.0, "exp", "[[0.5, 200.0]]", 30)).unwrap();
        let out = run_search(&spec, &c).unwrap();
        let h = crate::strichartz::h16();
        assert!(out.trace.windows(2).all(|w| w[1].best_quotient >= w[0].best_quotient));
        assert!(out.trace.iter().all(|r| r.best_quotient <= h + r.best_error));
        assert!(out.best_params[0] > 100.0, "{:?}", out.best_params);
        assert!(h - out.best_quotient.value < 2e-3 * h);
        assert!(out.trace.iter().all(|r| r.cap == CapId::One(0) && r.boost == 0.0));
        // deterministic
        let again = run_search(&spec, &c).unwrap();
        assert_eq!(
            serde_json::to_string(&out.trace).unwrap(),
            serde_json::to_string(&again.trace).unwrap()
        );
    }

    #[test]
    fn h2_search_goes_to_the_right_end() {
        let c = QuadConfig::default();
        let s4 = SearchSpec::from_json(&spec_json(2, 4.0, "exp", "[[0.1, 100.0]]", 40)).unwrap();
        let s6 = SearchSpec::from_json(&spec_json(2, 6.0, "exp", "[[0.01, 10.0]]", 40)).unwrap();
        let o4 = run_search(&s4, &c).unwrap();
        let o6 = run_search(&s6, &c).unwrap();
        assert!(o4.best_params[0] > 50.0);
        assert!(o6.best_params[0] < 0.02);
    }
}
