//! Acceptance criteria 1–10. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use retrial_tails::asymptotics::analyze;
use retrial_tails::cli::{regime_map, GridSpec};
use retrial_tails::oracle::{coeffs_closed_noqueue, coeffs_contour, contour_tables, ratio_report, OracleConfig, Target};
use retrial_tails::sim::{simulate, SimConfig};
use retrial_tails::validate::validate_suite;
use retrial_tails::{CaseTag, ModelParams, RetrialRate, ServiceKind, ServiceModel};
use rug::Float;
use statrs::function::erf::erfc;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exp_model(l1: f64, l2: f64, nu: RetrialRate) -> (ModelParams, ServiceModel) {
    let m = ServiceModel::exponential(1.0).unwrap();
    let p = ModelParams::new(l1, l2, nu, &m).unwrap();
    (p, m)
}

fn fin(nu: f64) -> RetrialRate {
    RetrialRate::Finite(nu)
}

/// 1. λ1 = 0: contour Q vs the negative-binomial closed form, n ≤ 100, 50 digits.
fn criterion_1() -> Outcome {
    let (p, m) = exp_model(0.0, 0.5, fin(1.0));
    let t0 = Instant::now();
    let contour = coeffs_contour(&p, &m, Target::Q, 100, 50).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let closed = coeffs_closed_noqueue(&p, &m, Target::Q, 100).map_err(|e| e.to_string())?;
    let worst = (0..=100)
        .map(|n| {
            let d = Float::with_val(contour.coeffs[n].prec(), &contour.coeffs[n] - &closed.coeffs[n]);
            (d / &closed.coeffs[n]).abs().to_f64()
        })
        .fold(0.0, f64::max);
    check(
        worst < 1e-10 && elapsed < Duration::from_secs(30),
        format!("max rel err {worst:.3e} (< 1e-10), runtime {elapsed:.2?} (< 30 s)"),
    )
}

/// 2. Case 1 law for q(n): within 1% at n = 400 and a shrinking deviation.
fn criterion_2() -> Outcome {
    let (p, m) = exp_model(0.0, 0.5, fin(1.0));
    let a = analyze(&p, &m).map_err(|e| e.to_string())?;
    let law = a.laws.q.ok_or("no q law")?;
    let tabs = contour_tables(&p, &m, OracleConfig::new(400, 400)).map_err(|e| e.to_string())?;
    let rep = ratio_report(&tabs.q, &law);
    let mut devs = Vec::new();
    for n in [50, 100, 200, 400] {
        devs.push((rep.ratio_at(n).ok_or(format!("q({n}) not usable"))? - 1.0).abs());
    }
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    check(
        devs[3] < 0.01 && monotone && a.profile.case_tag == CaseTag::Case1RetrialRegime,
        format!("|ratio-1| at n=50,100,200,400: {:.2e} {:.2e} {:.2e} {:.2e} (last < 1e-2, decreasing)", devs[0], devs[1], devs[2], devs[3]),
    )
}

/// 3. Case 3 boundary.
fn criterion_3() -> Outcome {
    let (p, m) = exp_model(0.25, 0.25, fin(1.0));
    let a = analyze(&p, &m).map_err(|e| e.to_string())?;
    let rs = a.profile.r_star.ok_or("no r_star")?;
    let rh = a.profile.r_h.ok_or("no r_h")?;
    let tabs = contour_tables(&p, &m, OracleConfig::new(300, 300)).map_err(|e| e.to_string())?;
    let ratio = ratio_report(&tabs.p2, &a.laws.p2).ratio_at(300).ok_or("p2(300) not usable")?;
    let ok = (rs - 2.0).abs() < 1e-8
        && (rh - 2.0).abs() < 1e-8
        && a.laws.p2.power_exponent == -0.5
        && a.profile.case_tag == CaseTag::Case3Boundary
        && (ratio - 1.0).abs() < 0.05;
    check(
        ok,
        format!(
            "r_star-2 = {:.1e}, r_h-2 = {:.1e}, exponent {}, ratio(300) = {ratio:.5}",
            rs - 2.0,
            rh - 2.0,
            a.laws.p2.power_exponent
        ),
    )
}

/// 4. Case 2 priority regime.
fn criterion_4() -> Outcome {
    let (p, m) = exp_model(0.4, 0.05, fin(1.0));
    let a = analyze(&p, &m).map_err(|e| e.to_string())?;
    let tabs = contour_tables(&p, &m, OracleConfig::new(200, 250)).map_err(|e| e.to_string())?;
    let ratio = ratio_report(&tabs.p2, &a.laws.p2).ratio_at(200).ok_or("p2(200) not usable")?;
    let decay = a.laws.p2.decay_rate;
    // the quoted 3.70049 is an arithmetic slip; the closed form it comes from
    // is 1 + (1 − √0.4)²/0.05 = 3.7017787 (see the decisions ledger)
    let closed = 1.0 + (1.0 - 0.4f64.sqrt()).powi(2) / 0.05;
    let ok = a.laws.p2.power_exponent == -1.5 && (decay - closed).abs() <= 1e-4 && (ratio - 1.0).abs() < 0.05;
    check(
        ok,
        format!(
            "exponent {}, decay {decay:.7} vs closed form {closed:.7} (printed value 3.70049 differs by {:.1e}), ratio(200) = {ratio:.5}",
            a.laws.p2.power_exponent,
            decay - 3.70049
        ),
    )
}

/// 5. Regime map: sign(D) against the profile on a 50×50 grid, 8 workers.
fn criterion_5() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let (rows, meta) = pool.install(|| regime_map(&GridSpec::default())).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let disagree = rows.iter().filter(|r| r.agreement == "disagree").count();
    check(
        disagree == 0 && meta.scored > 0 && elapsed < Duration::from_secs(120),
        format!("{}/{} scored points agree ({} stable points), runtime {elapsed:.2?} (< 120 s)", meta.agree, meta.scored, meta.points),
    )
}

/// 6. Decay rate independent of ν; ν = ∞ prefactor against the closed form.
fn criterion_6() -> Outcome {
    let (l1, l2, mu) = (0.1, 0.3, 1.0);
    let mut decays = Vec::new();
    let mut inf_prefactor = f64::NAN;
    for nu in [fin(0.1), fin(1.0), fin(10.0), RetrialRate::Infinite] {
        let (p, m) = exp_model(l1, l2, nu);
        let a = analyze(&p, &m).map_err(|e| e.to_string())?;
        decays.push(a.laws.p2.decay_rate);
        if nu.is_infinite() {
            inf_prefactor = a.laws.p2.prefactor;
        }
    }
    let spread = decays.iter().map(|d| (d - decays[0]).abs()).fold(0.0, f64::max);
    // exponential service: the pole is R = μ/λ and h'(R) = λ2R²/μ / (1 − λ1R²/μ);
    // P2 = (1 − ρ)(1 + (λ/λ2)f1) with f1 ≈ (1 − R)/((1 − h'(R))(R − z))
    let lam = l1 + l2;
    let r = mu / lam;
    let hp = l2 * r * r / mu / (1.0 - l1 * r * r / mu);
    let symbolic = (1.0 - lam / mu) * (lam / l2) * (1.0 - r) / ((1.0 - hp) * r);
    let rel = (inf_prefactor / symbolic - 1.0).abs();
    check(
        spread <= 1e-12 && rel < 1e-6,
        format!("decay spread {spread:.1e} (<= 1e-12), nu=inf prefactor {inf_prefactor:.12} vs {symbolic:.12} (rel {rel:.1e})"),
    )
}

/// 7. Pareto: exponent −1.5, ratio within 10% at 200, q slope −2.5 ± 0.1.
fn criterion_7() -> Outcome {
    let m = ServiceModel::new(ServiceKind::Pareto { p: 1.5, x0: 1.0 }).unwrap();
    let p = ModelParams::new(0.1, 0.1, fin(1.0), &m).unwrap();
    let a = analyze(&p, &m).map_err(|e| e.to_string())?;
    let tabs = contour_tables(&p, &m, OracleConfig::new(200, 50)).map_err(|e| e.to_string())?;
    let ratio = ratio_report(&tabs.p2, &a.laws.p2).ratio_at(200).ok_or("p2(200) not usable")?;
    // least-squares slope of ln q(n) against ln n over [50, 200]
    let pts: Vec<(f64, f64)> = (50..=200)
        .map(|n| (n as f64).ln())
        .zip((50..=200).map(|n| tabs.q.ln_coeff(n)))
        .filter_map(|(x, y)| y.map(|y| (x, y)))
        .collect();
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |acc, (x, y)| (acc.0 + x, acc.1 + y));
    let (mx, my) = (sx / k, sy / k);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let ok = a.laws.p2.power_exponent == -1.5
        && (ratio - 1.0).abs() < 0.10
        && (slope + 2.5).abs() <= 0.1
        && pts.len() == 151
        && tabs.p2.points >= 8 * 200;
    check(
        ok,
        format!(
            "exponent {}, ratio(200) = {ratio:.5}, q log-log slope {slope:.4}, M = {}",
            a.laws.p2.power_exponent, tabs.p2.points
        ),
    )
}

/// 8. Simulation vs oracle for λ1 = 0: total variation over n ≤ 15 and utilization.
fn criterion_8() -> Outcome {
    let (p, m) = exp_model(0.0, 0.5, fin(1.0));
    let cfg = SimConfig::new(p, m.clone(), 1);
    let d = simulate(&cfg).map_err(|e| e.to_string())?;
    let tabs = contour_tables(&p, &m, OracleConfig::new(150, 50)).map_err(|e| e.to_string())?;
    let tv = 0.5 * (0..=15).map(|n| (d.p2_emp[n] - tabs.p2.coeff_f64(n)).abs()).sum::<f64>();
    let rho = p.rho();
    let ok = tv < 0.01 && (d.utilization - rho).abs() <= d.utilization_hw && cfg.measure_events >= 10_000_000;
    check(
        ok,
        format!(
            "TV = {tv:.3e} (< 1e-2), utilization {:.5} ± {:.5} vs rho {rho}, {} events measured",
            d.utilization, d.utilization_hw, d.measured_events
        ),
    )
}

/// 9. Normalization and h at 1 over the validate suite.
fn criterion_9() -> Outcome {
    let rep = validate_suite(&[]).map_err(|e| e.to_string())?;
    let wanted = ["sum_q", "sum_p2", "h_at_1", "h_prime_at_1"];
    let mut failed = Vec::new();
    let mut checked = 0;
    for s in &rep.scenarios {
        for c in s.checks.iter().filter(|c| wanted.contains(&c.name.as_str())) {
            checked += 1;
            if !c.pass {
                failed.push(format!("{}:{} ({:.2e} > {:.2e})", s.name, c.name, c.value, c.bound));
            }
        }
    }
    check(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{checked} checks over {} scenarios within bounds", rep.scenarios.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

/// Upper incomplete gamma Γ(−3/2, 1) by downward recurrence from Γ(1/2, 1) = √π·erfc(1).
fn upper_gamma_m1_5_at_1() -> f64 {
    let g_half = PI.sqrt() * erfc(1.0);
    let e = (-1.0f64).exp();
    let g_mhalf = (g_half - e) / -0.5;
    (g_mhalf - e) / -1.5
}

/// 10. Type-2 regime for the power law with exponential cut-off.
fn criterion_10() -> Outcome {
    let (pw, rc, x0) = (2.5, 1.0, 1.0);
    let m = ServiceModel::new(ServiceKind::PowerLawCutoff { p: pw, r_c: rc, x0 }).unwrap();
    // B*(−R_c) = K·x0^{1−p}/(p − 1), K = 1/(R_c^{p−1} Γ(1−p, R_c x0))
    let k = 1.0 / upper_gamma_m1_5_at_1();
    let b_edge = k / (pw - 1.0);
    let b1_edge = m.lst_real(-rc, 1).map_err(|e| e.to_string())?[1];
    // pre-check: the branch edge must dominate with margin (no pole, 1 − G_w ≥ 0.1)
    let mut chosen = None;
    for (l1, l2) in [(0.03, 0.05), (0.02, 0.05), (0.01, 0.05)] {
        let p = ModelParams::new(l1, l2, fin(1.0), &m).unwrap();
        let prof = analyze(&p, &m).map_err(|e| e.to_string())?.profile;
        let gw = -l1 * b1_edge;
        if prof.case_tag == CaseTag::Type2Dominant && prof.r_star.is_none() && prof.boundary_gap.is_some_and(|g| g < -0.1) && gw < 0.9 {
            chosen = Some(p);
            break;
        }
    }
    let p = chosen.ok_or("no candidate passed the type-2 pre-check")?;
    let a = analyze(&p, &m).map_err(|e| e.to_string())?;
    let rhs_expected = 1.0 + (p.lambda1 * (1.0 - b_edge) + rc) / p.lambda2;
    let rhs = a.profile.r_hstar.ok_or("no r_hstar")?;
    let tabs = contour_tables(&p, &m, OracleConfig::new(200, 400)).map_err(|e| e.to_string())?;
    let rep = ratio_report(&tabs.p2, &a.laws.p2);
    let reach = rep.reach.ok_or("no usable coefficients")?;
    let ratio = rep.ratio_at(reach).ok_or("ratio at reach missing")?;
    let ok = a.laws.p2.power_exponent == -2.5
        && (rhs / rhs_expected - 1.0).abs() < 1e-9
        && a.laws.p2.decay_rate == rhs
        && (ratio - 1.0).abs() < 0.10;
    check(
        ok,
        format!(
            "lambda1={} lambda2={}: exponent {}, R_h* = {rhs:.10} (independent {rhs_expected:.10}), ratio({reach}) = {ratio:.5}",
            p.lambda1, p.lambda2, a.laws.p2.power_exponent
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("dual-oracle exactness", criterion_1),
        ("case 1 law convergence", criterion_2),
        ("case 3 boundary", criterion_3),
        ("case 2 priority regime", criterion_4),
        ("regime map", criterion_5),
        ("nu-invariance of decay", criterion_6),
        ("type 3 power law", criterion_7),
        ("simulation cross-check", criterion_8),
        ("normalization", criterion_9),
        ("type 2 regime", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
