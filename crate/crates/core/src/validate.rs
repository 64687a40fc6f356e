//! Built-in scenario suite cross-checking the contour oracle against the
//! asymptotic laws, the closed form, and the normalization identities.

use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::asymptotics::{analyze, AsymptoticLaw};
use crate::error::{Error, Result};
use crate::implicit::ImplicitMap;
use crate::oracle::{coeffs_closed_noqueue_with, contour_tables, ratio_report, CoefficientTable, OracleConfig, Target};
use crate::params::{ModelParams, RetrialRate};
use crate::service::{ServiceKind, ServiceModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub service: ServiceKind,
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: RetrialRate,
    pub n_max: usize,
    pub digits: u32,
    /// P2 oracle/law ratio must lie within this of 1 at n_max.
    pub ratio_tol: f64,
}

impl Scenario {
    pub fn model(&self) -> Result<ServiceModel> {
        ServiceModel::new(self.service.clone())
    }

    pub fn params(&self, model: &ServiceModel) -> Result<ModelParams> {
        ModelParams::new(self.lambda1, self.lambda2, self.nu, model)
    }
}

/// The named scenario list run by `validate`.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let exp = ServiceKind::Exponential { mu: 1.0 };
    let fin = RetrialRate::Finite(1.0);
    vec![
        Scenario { name: "noqueue", service: exp.clone(), lambda1: 0.0, lambda2: 0.5, nu: fin, n_max: 100, digits: 50, ratio_tol: 0.05 },
        Scenario { name: "case1", service: exp.clone(), lambda1: 0.1, lambda2: 0.3, nu: fin, n_max: 200, digits: 100, ratio_tol: 0.05 },
        Scenario {
            name: "case1_nonretrial",
            service: exp.clone(),
            lambda1: 0.1,
            lambda2: 0.3,
            nu: RetrialRate::Infinite,
            n_max: 200,
            digits: 100,
            ratio_tol: 0.05,
        },
        Scenario { name: "case2", service: exp.clone(), lambda1: 0.4, lambda2: 0.05, nu: fin, n_max: 200, digits: 250, ratio_tol: 0.05 },
        Scenario { name: "case3", service: exp, lambda1: 0.25, lambda2: 0.25, nu: fin, n_max: 300, digits: 300, ratio_tol: 0.05 },
        Scenario {
            name: "type3_pareto",
            service: ServiceKind::Pareto { p: 1.5, x0: 1.0 },
            lambda1: 0.1,
            lambda2: 0.1,
            nu: fin,
            n_max: 200,
            digits: 50,
            ratio_tol: 0.10,
        },
        Scenario {
            name: "type2_plc",
            service: ServiceKind::PowerLawCutoff { p: 2.5, r_c: 1.0, x0: 1.0 },
            lambda1: 0.02,
            lambda2: 0.05,
            nu: fin,
            n_max: 200,
            digits: 400,
            ratio_tol: 0.10,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    fn le(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: value <= bound,
            value,
            bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub case_tag: String,
    pub n_max: usize,
    pub digits: u32,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub command: &'static str,
    pub scenarios: Vec<ScenarioReport>,
    pub pass: bool,
}

/// Σ_{n > n_max} L(n): summed directly, with an integral remainder for
/// power laws without geometric decay.
pub fn law_tail(law: &AsymptoticLaw, n_max: usize) -> f64 {
    let mut acc = 0.0;
    let mut n = n_max + 1;
    let stop = n_max + 100_000;
    while n <= stop {
        let t = law.eval(n as f64);
        acc += t;
        if t <= 1e-40 * acc || t == 0.0 {
            return acc;
        }
        n += 1;
    }
    if law.decay_rate == 1.0 && law.power_exponent < -1.0 {
        let x = stop as f64 + 0.5;
        acc += law.prefactor * x.powf(law.power_exponent + 1.0) / (-law.power_exponent - 1.0);
    }
    acc
}

/// Truncated normalization check: target − Σ_{n≤N} c_n should equal the law
/// tail up to the oracle error bound and the law's relative deviation δ
/// near n_max.
pub fn normalization_check(name: &str, table: &CoefficientTable, law: Option<&AsymptoticLaw>, target: f64) -> Check {
    let (sum, err) = table.sum();
    let resid = Float::with_val(sum.prec(), target - &sum).to_f64();
    let (tail, delta) = match law {
        Some(l) => {
            let rep = ratio_report(table, l);
            let lo = table.n_max / 2;
            let delta = rep
                .rows
                .iter()
                .filter(|r| r.n > lo && r.usable && r.ratio.is_finite())
                .map(|r| (r.ratio - 1.0).abs())
                .fold(0.0, f64::max);
            (law_tail(l, table.n_max), delta)
        }
        None => (0.0, 0.0),
    };
    let bound = err.to_f64() + delta * tail + 4.0 * f64::EPSILON * target.abs();
    Check::le(name, (resid - tail).abs(), bound)
}

/// max_n |p2 − q − r| against the summed error bounds.
fn identity_check(q: &CoefficientTable, r: &CoefficientTable, p2: &CoefficientTable) -> Check {
    let mut worst = f64::NEG_INFINITY;
    let mut value = 0.0;
    let mut bound = 0.0;
    for n in 0..=p2.n_max {
        let prec = p2.coeffs[n].prec();
        let d = Float::with_val(prec, &p2.coeffs[n] - &q.coeffs[n]) - &r.coeffs[n];
        let d = d.abs().to_f64();
        let b = (Float::with_val(64, &p2.errors[n] + &q.errors[n]) + &r.errors[n]).to_f64();
        let excess = if b > 0.0 { d / b } else { d };
        if excess > worst {
            worst = excess;
            value = d;
            bound = b;
        }
    }
    Check::le("p2_equals_q_plus_r", value, bound)
}

/// max_n |contour − closed|/|closed| over n ≤ n_max.
pub fn dual_oracle_max_rel(contour: &CoefficientTable, closed: &CoefficientTable) -> f64 {
    (0..=contour.n_max.min(closed.n_max))
        .map(|n| {
            let d = Float::with_val(contour.coeffs[n].prec(), &contour.coeffs[n] - &closed.coeffs[n]);
            (d / &closed.coeffs[n]).abs().to_f64()
        })
        .fold(0.0, f64::max)
}

pub fn run_scenario(sc: &Scenario) -> Result<ScenarioReport> {
    let model = sc.model()?;
    let params = sc.params(&model)?;
    let analysis = analyze(&params, &model)?;
    let map = ImplicitMap::new(&params, &model)?;
    let mut checks = Vec::new();

    checks.push(Check::le("h_at_1", (map.h_real(1.0)? - 1.0).abs(), 1e-12));
    let hp = params.rho2() / (1.0 - params.rho1());
    checks.push(Check::le("h_prime_at_1", (map.h_prime_real(1.0)? - hp).abs(), 1e-6));

    let tables = contour_tables(&params, &model, OracleConfig::new(sc.n_max, sc.digits))?;
    let rho = params.rho();
    if !params.nu.is_infinite() {
        checks.push(normalization_check("sum_q", &tables.q, analysis.laws.q.as_ref(), 1.0 - rho));
    }
    checks.push(normalization_check("sum_p2", &tables.p2, Some(&analysis.laws.p2), 1.0));
    checks.push(identity_check(&tables.q, &tables.r, &tables.p2));

    let rep = ratio_report(&tables.p2, &analysis.laws.p2);
    let dev = match rep.ratio_at(sc.n_max) {
        Some(r) => (r - 1.0).abs(),
        None => f64::INFINITY,
    };
    checks.push(Check::le("p2_ratio_at_n_max", dev, sc.ratio_tol));

    if params.lambda1 == 0.0 && matches!(sc.service, ServiceKind::Exponential { .. }) {
        let closed = coeffs_closed_noqueue_with(&params, &model, Target::Q, sc.n_max, sc.digits)?;
        checks.push(Check::le("dual_oracle_q", dual_oracle_max_rel(&tables.q, &closed), 1e-10));
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(ScenarioReport {
        name: sc.name.to_string(),
        case_tag: analysis.profile.case_tag.to_string(),
        n_max: sc.n_max,
        digits: sc.digits,
        checks,
        pass,
    })
}

/// Runs the named scenarios (all when `names` is empty) concurrently;
/// the report keeps the suite order.
pub fn validate_suite(names: &[String]) -> Result<ValidateReport> {
    let all = builtin_scenarios();
    for n in names {
        if !all.iter().any(|s| s.name == n) {
            let known: Vec<_> = all.iter().map(|s| s.name).collect();
            return Err(Error::InvalidParameter(format!("unknown scenario {n:?}; known: {}", known.join(", "))));
        }
    }
    let chosen: Vec<Scenario> = all.into_iter().filter(|s| names.is_empty() || names.iter().any(|n| n == s.name)).collect();
    let scenarios = chosen.par_iter().map(run_scenario).collect::<Result<Vec<_>>>()?;
    let pass = scenarios.iter().all(|s| s.pass);
    Ok(ValidateReport {
        command: "validate",
        scenarios,
        pass,
    })
}
