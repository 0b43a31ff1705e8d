//! Quadrature primitives: an adaptive Gauss–Kronrod (10/21) integrator with a
//! global error heap, and Gauss–Legendre rules for fixed-order panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and budget for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Truncation point for semi-infinite integrals. `None` lets each routine
    /// choose the cut from the decay (underflow) of its integrand.
    pub tail_cut: Option<f64>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
            tail_cut: None,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Invalid(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(Error::Invalid(format!("abs_tol must be >= 0, got {}", self.abs_tol)));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Invalid("max_subdivisions must be >= 1".into()));
        }
        if let Some(cut) = self.tail_cut {
            if !(cut > 0.0) {
                return Err(Error::Invalid(format!("tail_cut must be > 0, got {cut}")));
            }
        }
        Ok(())
    }
}

/// A quadrature result with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T = f64> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

/// Values an integrand may return.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Weights of the embedded 10-point Gauss rule, on XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Result<(T, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = T::zero();
    let mut res_k = fc * WGK[10];
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for i in 0..10 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[i] = f1;
        fv2[i] = f2;
        res_k = res_k + (f1 + f2) * WGK[i];
        if i % 2 == 1 {
            res_g = res_g + (f1 + f2) * WG[i / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).magnitude();
    for i in 0..10 {
        res_asc += WGK[i] * ((fv1[i] - mean).magnitude() + (fv2[i] - mean).magnitude());
    }
    let res_asc = res_asc * half.abs();
    let value = res_k * half;
    let mut err = ((res_k - res_g) * half).magnitude();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let mag = value.magnitude();
    if !mag.is_finite() || !err.is_finite() {
        return Err(Error::Invalid(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok((value, err.max(50.0 * f64::EPSILON * mag)))
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_with_breaks(&mut f, &[a, b], cfg)
}

/// Adaptive integration over consecutive intervals of `breaks`, which must be
/// nondecreasing. Breakpoints are honoured as initial subdivision points.
pub fn integrate_with_breaks<T, F>(f: &mut F, breaks: &[f64], cfg: &QuadConfig) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    cfg.validate()?;
    if breaks.len() < 2 {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total = T::zero();
    let mut total_err = 0.0;
    // Segments too narrow to split further.
    let mut frozen = T::zero();
    let mut frozen_err = 0.0;

    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (value, error) = kronrod21(f, a, b)?;
        evaluations += 21;
        total = total + value;
        total_err += error;
        heap.push(Segment { a, b, value, error });
    }

    let mut count = heap.len();
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.magnitude());
        if total_err <= tol {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) || (seg.b - seg.a) < 1e3 * f64::EPSILON * seg.a.abs().max(seg.b.abs()) {
            frozen = frozen + seg.value;
            frozen_err += seg.error;
            total_err -= seg.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if count >= cfg.max_subdivisions {
            let value = heap.iter().fold(frozen + seg.value, |acc, s| acc + s.value);
            return Err(Error::Accuracy {
                estimate: value.magnitude(),
                error: total_err + frozen_err,
            });
        }
        let (v1, e1) = kronrod21(f, seg.a, mid)?;
        let (v2, e2) = kronrod21(f, mid, seg.b)?;
        evaluations += 42;
        count += 1;
        total = total - seg.value + v1 + v2;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
    }

    // Resum from the segments to avoid drift from the running updates.
    let value = heap.iter().fold(frozen, |acc, s| acc + s.value);
    let error = heap.iter().map(|s| s.error).sum::<f64>() + frozen_err;
    Ok(Estimate { value, error, evaluations })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Applies the rule on `[a, b]`.
    pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(&self, mut f: F, a: f64, b: f64) -> T {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + f(c + h * x) * (w * h))
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn composite<T: QuadValue, F: FnMut(f64) -> T>(&self, mut f: F, a: f64, b: f64, panels: usize) -> T {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels).fold(T::zero(), |acc, i| {
            let lo = a + h * i as f64;
            acc + self.integrate(&mut f, lo, lo + h)
        })
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Pairwise summation; keeps reductions independent of thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}
