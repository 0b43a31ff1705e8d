//! Acceptance run: one PASS/FAIL line per criterion with its runtime budget.
//! Exits nonzero if any criterion fails or overruns.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hyperlab::capanalysis::{bilinear_cap_norm, bilinear_cs_functional, spread_family, LightConeGrid};
use hyperlab::convolution::{conv3_1d, conv_recursive, sandwich_rows, MeasureProfile, SIGMA3_BOUNDARY};
use hyperlab::geometry::{cap_measure, recenter_cap, sample_in_cap, CapId, Dim, RECENTER_RADIUS};
use hyperlab::search::{degenerate_ends, run_search, SearchSpec};
use hyperlab::specfun::bessel_k0_scaled;
use hyperlab::strichartz::{conv_route_cubed_norm, h16, quotient_conv_route, st_norm, TrialFunction};
use hyperlab::QuadConfig;
use hyperlab_cli::{read_csv, Schema};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fitted(key: &str) -> f64 {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/fitted_constants.json");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v[key].as_f64().unwrap()
}

fn hyperlab(args: &[&str]) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_hyperlab"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr).trim()));
    }
    String::from_utf8(o.stdout).map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn constant_case(case: &str) -> Result<(f64, f64, f64), String> {
    let v: Value = serde_json::from_str(&hyperlab(&["constants", "--case", case])?).map_err(|e| e.to_string())?;
    let c = &v["report"]["constants"][0];
    Ok((
        c["value"].as_f64().unwrap(),
        c["sup_convolution"].as_f64().unwrap_or(f64::NAN),
        c["tolerance"].as_f64().unwrap(),
    ))
}

fn c1() -> Outcome {
    let (value, sup, _) = constant_case("d1p6")?;
    let expected = 3f64.powf(-1.0 / 12.0) * TAU.sqrt();
    let e = rel(value, expected);
    check(
        e <= 1e-3 && rel(sup, TAU / 3f64.sqrt()) <= 1e-3,
        format!("H_1,6 = {value:.8}, rel err {e:.2e}"),
    )
}

fn c2() -> Outcome {
    let (h24, _, _) = constant_case("d2p4")?;
    let (h26, _, _) = constant_case("d2p6")?;
    let (e4, e6) = (rel(h24, 2f64.powf(0.75) * PI), rel(h26, TAU.powf(5.0 / 6.0)));
    check(
        e4 <= 1e-12 && e6 <= 1e-12,
        format!("H_2,4 rel err {e4:.1e}, H_2,6 rel err {e6:.1e}"),
    )
}

fn c3() -> Outcome {
    let s = conv3_1d(3.0001, &QuadConfig::default()).map_err(|e| e.to_string())?;
    let e = rel(s.value, TAU / 3f64.sqrt());
    check(e < 0.01, format!("σ3(3.0001) = {:.6}, rel err {e:.2e}", s.value))
}

fn c4() -> Outcome {
    // 500 evenly spaced points of (3, 100], through the CLI table
    let text = hyperlab(&["conv", "--d", "1", "--n", "3", "--tau", "3.194:100:500"])?;
    let schema = Schema::new("hyperlab.conv.d1n3", &["tau", "value", "lower_L", "upper_U", "error_estimate"]);
    let t = read_csv(&text, &schema).map_err(|e| e.to_string())?;
    let col = |c: &str| t.floats(c).map_err(|e| e.to_string());
    let (v, l, u, err) = (col("value")?, col("lower_L")?, col("upper_U")?, col("error_estimate")?);
    let bad = (0..v.len())
        .filter(|&i| !(l[i] <= v[i] + err[i] && v[i] <= u[i] + err[i] && u[i] < SIGMA3_BOUNDARY))
        .count();
    // the library rows must agree with the table
    let taus = col("tau")?;
    let rows = sandwich_rows(&taus[..5], &QuadConfig::default()).map_err(|e| e.to_string())?;
    let same = rows.iter().zip(&v).all(|(r, x)| r.sigma3 == *x && r.holds());
    check(
        v.len() == 500 && bad == 0 && same,
        format!(
            "{} rows, {bad} violations, max U = {:.6}",
            v.len(),
            u.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn c5() -> Outcome {
    let cfg = QuadConfig::default();
    let sigma2 = MeasureProfile::conv2_1d();
    let mut worst = 0.0f64;
    for i in 0..50 {
        let tau = 3.1 + (50.0 - 3.1) * i as f64 / 49.0;
        let a = conv_recursive(2, &sigma2, tau, &cfg).map_err(|e| e.to_string())?;
        let b = conv3_1d(tau, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max(rel(a.value, b.value));
    }
    check(worst <= 1e-6, format!("max rel diff {worst:.2e} on 50 points"))
}

fn c6() -> Outcome {
    let a = 200.0f64;
    let v = a.sqrt() * bessel_k0_scaled(2.0 * a, &QuadConfig::default()).map_err(|e| e.to_string())?;
    let e = rel(v, PI.sqrt() / 2.0);
    check(e < 0.002, format!("√a e^(2a) K0(2a) = {v:.8}, rel err {e:.2e}"))
}

fn c7() -> Outcome {
    let cfg = QuadConfig::default();
    let tau_max = (3.0 + (1e18f64).ln() / 2.0) * 1.1;
    let profile = MeasureProfile::conv3_1d(cfg)
        .cached(2000, tau_max.max(50.0))
        .map_err(|e| e.to_string())?;
    let q: Vec<f64> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&a| quotient_conv_route(a, &profile, &cfg).map(|q| q.value))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let limit = TAU / 3f64.sqrt();
    let gap = (limit - q[2]) / limit;
    check(
        q[0] < q[1] && q[1] < q[2] && q[2] < limit && gap < 0.02,
        format!("Q = {:.5}, {:.5}, {:.5}; gap {:.3}%", q[0], q[1], q[2], 100.0 * gap),
    )
}

fn c8() -> Outcome {
    let cfg = QuadConfig::default();
    let f = TrialFunction::exp_family(Dim::One, 1.0).map_err(|e| e.to_string())?;
    let s = st_norm(&f, &SearchSpec::default_grid().with_p(6.0), &cfg).map_err(|e| e.to_string())?;
    let profile = MeasureProfile::conv3_1d(cfg).cached(1500, 60.0).map_err(|e| e.to_string())?;
    let c = conv_route_cubed_norm(1.0, &profile, &cfg).map_err(|e| e.to_string())?;
    let e = rel(s.norm.powi(3), c);
    check(
        e < 0.01 && !s.inconclusive,
        format!("grid {:.6} vs convolution {c:.6}, rel diff {e:.2e}", s.norm.powi(3)),
    )
}

fn c9() -> Outcome {
    let mut failures = Vec::new();
    for k in -50..=50 {
        let c = CapId::One(k);
        let (lo, hi) = c.rapidity_bounds().unwrap();
        if cap_measure(&c) != 1.0 || hi - lo != 1.0 {
            failures.push(format!("C_{k}"));
        }
    }
    for n in 0..=20u32 {
        for j in [0, (1u64 << n) / 2, (1u64 << n) - 1] {
            let c = CapId::two(n, j).map_err(|e| e.to_string())?;
            // σ of a polar sector is Δθ (√(1+r_hi²) - √(1+r_lo²)), rationalized
            let (r0, r1, t0, _) = c.polar_bounds().unwrap();
            let width = TAU / (1u64 << n) as f64;
            if (t0 - width * j as f64).abs() > 1e-12 {
                failures.push(format!("C_{n},{j}: start angle {t0}"));
            }
            let direct = width * (r1 - r0) * (r1 + r0) / ((1.0 + r1 * r1).sqrt() + (1.0 + r0 * r0).sqrt());
            let m = cap_measure(&c);
            let ratio = m / TAU;
            if rel(m, direct) > 1e-12 || (n >= 1 && !(0.9..=1.0).contains(&ratio)) {
                failures.push(format!("C_{n},{j}: ratio {ratio}"));
            }
        }
    }
    let c00 = cap_measure(&CapId::Two { n: 0, j: 0 });
    if rel(c00, TAU * (5f64.sqrt() - 1.0)) > 1e-15 {
        failures.push(format!("C_0,0 = {c00}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for n in 0..=10u32 {
        let last = (1u64 << n) - 1;
        for j in [0, last / 2, last] {
            let c = CapId::two(n, j).map_err(|e| e.to_string())?;
            let iso = recenter_cap(&c);
            for _ in 0..1000 {
                let p = iso.apply(&sample_in_cap(&c, &mut rng)).map_err(|e| e.to_string())?;
                let (xi, _) = p.embed();
                worst = worst.max(xi[0].hypot(xi[1]));
            }
        }
    }
    if worst > RECENTER_RADIUS {
        failures.push(format!("recentered |ξ| = {worst}"));
    }
    check(
        failures.is_empty(),
        format!("max recentered |ξ| = {worst:.4} ≤ {RECENTER_RADIUS:.4}; failures {failures:?}"),
    )
}

fn c10() -> Outcome {
    let bound = fitted("bilinear_q4");
    let g = LightConeGrid::default();
    let mut worst = 0.0f64;
    for k in 0..=8i64 {
        let b = bilinear_cap_norm(0, k, 4.0, &g).map_err(|e| e.to_string())?;
        if !(b > 0.0 && b.is_finite()) {
            return Err(format!("k = {k}: norm {b}"));
        }
        worst = worst.max(b * (k as f64 / 8.0).exp());
    }
    check(worst <= bound, format!("max norm·e^(k/8) = {worst:.4} ≤ {bound}"))
}

fn c11() -> Outcome {
    let bound = fitted("smallness");
    let cfg = QuadConfig::default();
    let mut worst = 0.0f64;
    for n in 3..=8 {
        let (f, eps) = spread_family(n).map_err(|e| e.to_string())?;
        let b = bilinear_cs_functional(&f, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max(b / (eps * (1.0 / eps).log2()));
    }
    check(worst <= bound, format!("max B/(ε log2 1/ε) = {worst:.4} ≤ {bound}"))
}

fn c12() -> Outcome {
    let cfg = QuadConfig::default();
    let monotone = |t: &[hyperlab::search::TraceRow]| t.windows(2).all(|w| w[1].best_quotient >= w[0].best_quotient);
    let p6 = SearchSpec::from_json(
        r#"{"d": 1, "p": 6, "family": {"kind": "exp", "m": 1, "bounds": [[0.05, 200.0]]},
            "optimizer": {"iters": 40, "tol": 1e-9, "restarts": 3}, "seed": 42}"#,
    )
    .map_err(|e| e.to_string())?;
    let out6 = run_search(&p6, &cfg).map_err(|e| e.to_string())?;
    let over = out6.trace.iter().filter(|r| r.best_quotient > h16() + r.best_error).count();
    let p8 = SearchSpec::from_json(
        r#"{"d": 1, "p": 8, "family": {"kind": "exp_even_poly", "m": 2, "bounds": [[0.01, 2.0], [0.1, 2.0]]},
            "optimizer": {"iters": 20, "tol": 1e-6, "restarts": 3}, "seed": 42}"#,
    )
    .map_err(|e| e.to_string())?;
    let out8 = run_search(&p8, &cfg).map_err(|e| e.to_string())?;
    let ends = degenerate_ends(&[1.0 / 8.0, 1.0 / 16.0], &[16.0, 32.0], &p8.grid(), &cfg).map_err(|e| e.to_string())?;
    let best = out8.best_quotient.value - out8.best_quotient.error;
    check(
        monotone(&out6.trace) && over == 0 && monotone(&out8.trace) && ends.monotone() && best > ends.ceiling(),
        format!(
            "p=6 best {:.6} ≤ H_1,6 {:.6}; p=8 best {:.5} > ends ceiling {:.5}",
            out6.best_quotient.value,
            h16(),
            out8.best_quotient.value,
            ends.ceiling()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("constant H_1,6", 10, c1),
        ("constants H_2,4 and H_2,6", 1, c2),
        ("boundary value of σ3", 5, c3),
        ("sandwich and strict maximum", 60, c4),
        ("recursion consistency", 120, c5),
        ("Bessel asymptotics", 1, c6),
        ("extremizing-sequence limit", 60, c7),
        ("two-route norm agreement", 600, c8),
        ("geometry suite", 30, c9),
        ("bilinear decay", 600, c10),
        ("smallness functional", 600, c11),
        ("search sanity", 1800, c12),
    ];
    let mut failed = 0;
    let mut err = std::io::stderr();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        let _ = writeln!(
            err,
            "{} {:>2} {name}: {detail} [{:.3} s of {budget} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    let _ = writeln!(err, "acceptance: {} of 12 passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
