//! Singular expansions at the dominant singularity and the resulting
//! coefficient laws f(n) ~ c·n^β·R^(−n) for q, r and p2.

use serde::{Serialize, Serializer};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::implicit::{CaseTag, ImplicitMap, SingularityProfile};
use crate::params::ModelParams;
use crate::quadrature::{gauss_legendre, gauss_legendre_fixed, integrate_real, QuadOptions};
use crate::service::{LstSingularData, ServiceModel};
use crate::special::gamma;

/// f(n) ~ prefactor · n^power_exponent · decay_rate^(−n).
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticLaw {
    pub prefactor: f64,
    pub power_exponent: f64,
    pub decay_rate: f64,
    pub regime_note: String,
}

impl Serialize for AsymptoticLaw {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            prefactor: f64,
            power_exponent: f64,
            decay_rate: f64,
            regime: &'a str,
        }
        Wire {
            prefactor: self.prefactor,
            power_exponent: self.power_exponent,
            decay_rate: self.decay_rate,
            regime: &self.regime_note,
        }
        .serialize(s)
    }
}

impl AsymptoticLaw {
    fn new(prefactor: f64, power_exponent: f64, decay_rate: f64, tag: CaseTag) -> Self {
        Self {
            prefactor,
            power_exponent,
            decay_rate,
            regime_note: tag.as_str().to_string(),
        }
    }

    /// ln L(n).
    pub fn ln_eval(&self, n: f64) -> f64 {
        self.prefactor.ln() + self.power_exponent * n.ln() - n * self.decay_rate.ln()
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.ln_eval(n).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawSet {
    /// Absent for ν = ∞ (the idle-server orbit mass vanishes).
    pub q: Option<AsymptoticLaw>,
    pub r: AsymptoticLaw,
    pub p2: AsymptoticLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1Expansion {
    pub case_tag: CaseTag,
    pub r_f1: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub f1_at_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QExpansionData {
    pub r_q: f64,
    pub q_at_r: Option<f64>,
    pub f2_at_r: Option<f64>,
    pub c_q1: Option<f64>,
    pub c_q2: Option<f64>,
    pub c_q3: Option<f64>,
}

/// Everything `analyze` reports for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailAnalysis {
    pub params: ModelParams,
    pub lst: LstSingularData,
    pub profile: SingularityProfile,
    pub f1: Option<F1Expansion>,
    pub q_data: Option<QExpansionData>,
    pub laws: LawSet,
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_subdivisions: 100_000,
    }
}

/// Lemma-2 constants of f1 at the dominant singularity (type-1 cases).
pub fn f1_expand(map: &ImplicitMap, profile: &SingularityProfile) -> Result<F1Expansion> {
    let p = map.params();
    let (l1, lam) = (p.lambda1, p.lambda());
    let mut out = F1Expansion {
        case_tag: profile.case_tag,
        r_f1: profile.r_dominant,
        c1: None,
        c2: None,
        c3: None,
        f1_at_r: None,
    };
    match profile.case_tag {
        CaseTag::Case1RetrialRegime => {
            let r = profile.r_dominant;
            let b1 = map.b(lam * (1.0 - r), 1)?[1];
            let c1 = (1.0 - r) * (1.0 + l1 * b1) / (1.0 + lam * b1);
            if !(c1 > 0.0) {
                return Err(Error::NoConvergence(format!("pole residue c1 = {c1} is not positive")));
            }
            out.c1 = Some(c1);
        }
        CaseTag::Case2PriorityRegime => {
            let (rh, hr, ch) = branch_data(profile)?;
            out.c2 = Some((rh - 1.0) * ch / (hr - rh).powi(2));
            out.f1_at_r = Some((1.0 - hr) / (hr - rh));
        }
        CaseTag::Case3Boundary => {
            let (rh, _, ch) = branch_data(profile)?;
            out.c3 = Some((rh - 1.0) / ch);
        }
        other => {
            return Err(Error::CaseMismatch(format!("f1 expansion is defined for type-1 cases, got {other}")));
        }
    }
    Ok(out)
}

fn branch_data(profile: &SingularityProfile) -> Result<(f64, f64, f64)> {
    match (profile.r_h, profile.h_at_rh, profile.c_h) {
        (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
        _ => Err(Error::CaseMismatch("profile has no square-root branch point".into())),
    }
}

/// ∫_1^{x(s_end)} F(x) dx computed in the branch parameter s, where
/// `F(x, f1(x))` is evaluated along the principal branch.
fn branch_integral<F>(map: &ImplicitMap, s_end: f64, integrand: F) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let g = |s: f64| -> Result<f64> {
        let (x, f1, dx) = map.f1_at_s(s)?;
        Ok(integrand(x, f1) * dx)
    };
    Ok(integrate_real(g, 0.0, s_end, quad_opts())?.value)
}

/// f2(z) = −(λ/ν)∫_z^1 f1(x) dx for real z up to the dominant singularity.
pub fn f2_eval(map: &ImplicitMap, profile: &SingularityProfile, z: f64) -> Result<f64> {
    let lnu = map.params().lambda_over_nu();
    if z == 1.0 || lnu == 0.0 {
        return Ok(0.0);
    }
    if profile.case_tag == CaseTag::Case3Boundary || profile.case_tag == CaseTag::Type3Dominant {
        // fall through: endpoint singularities are integrable
    }
    let r = profile.r_dominant;
    if profile.case_tag == CaseTag::Case1RetrialRegime && z >= r {
        return Err(Error::DivergentIntegral(format!(
            "f1 has a pole at R* = {r}; the plain integral to z = {z} diverges"
        )));
    }
    if z > r * (1.0 + 1e-14) {
        return Err(Error::Domain(format!("z = {z} lies beyond the dominant singularity {r}")));
    }
    let s_end = if (z - map.z_limit()).abs() <= 1e-14 * z.abs().max(1.0) {
        map.s_limit()
    } else {
        let h = map.h_real(z)?;
        map.s_of(z, h)
    };
    if !map.params().lambda2.is_finite() || map.params().lambda2 <= 0.0 {
        return Err(Error::InvalidParameter("lambda2 must be > 0".into()));
    }
    Ok(lnu * branch_integral(map, s_end, |_, f1| f1)?)
}

/// Regularised integral ∫_1^R [f1(x) − c1/(R − x)] dx for a simple pole at R.
fn regularized_pole_integral(map: &ImplicitMap, r: f64, c1: f64) -> Result<f64> {
    let lam = map.params().lambda();
    let s_star = lam * (1.0 - r);
    // the pole removal cancels two O(1/(R−x)) terms; the last panel is handled
    // by a fixed Gauss rule whose nodes stay clear of the endpoint
    let delta = 1e-3 * s_star.abs();
    let f = |s: f64| -> Result<f64> {
        let (x, f1, dx) = map.f1_at_s(s)?;
        Ok((f1 - c1 / (r - x)) * dx)
    };
    let main = integrate_real(f, 0.0, s_star + delta, quad_opts())?.value;
    let rule = gauss_legendre(8);
    let tail = gauss_legendre_fixed(f, s_star + delta, s_star, &rule)?;
    Ok(main + tail)
}

fn rgamma(x: f64) -> f64 {
    crate::special::recip_gamma(x)
}

/// Q-expansion data and the q law (type-1 profiles). The law is `None` for ν = ∞.
pub fn q_law(
    map: &ImplicitMap,
    profile: &SingularityProfile,
    f1: &F1Expansion,
) -> Result<(QExpansionData, Option<AsymptoticLaw>)> {
    let p = map.params();
    let lnu = p.lambda_over_nu();
    let rho = p.rho();
    let r = profile.r_dominant;
    let tag = profile.case_tag;
    let mut data = QExpansionData {
        r_q: r,
        q_at_r: None,
        f2_at_r: None,
        c_q1: None,
        c_q2: None,
        c_q3: None,
    };
    let sqpi = PI.sqrt();
    let law = match tag {
        CaseTag::Case1RetrialRegime => {
            let c1 = f1.c1.ok_or_else(|| Error::CaseMismatch("missing c1".into()))?;
            let kappa = lnu * c1;
            let integral = if kappa == 0.0 { 0.0 } else { regularized_pole_integral(map, r, c1)? };
            let c_q1 = (1.0 - rho) * (r - 1.0).powf(kappa) * (lnu * integral).exp();
            data.c_q1 = Some(c_q1);
            if kappa == 0.0 {
                None
            } else {
                Some(AsymptoticLaw::new(c_q1 * rgamma(kappa) * r.powf(-kappa), kappa - 1.0, r, tag))
            }
        }
        CaseTag::Case2PriorityRegime => {
            let f2 = f2_eval(map, profile, r)?;
            let q_r = (1.0 - rho) * f2.exp();
            let c2 = f1.c2.ok_or_else(|| Error::CaseMismatch("missing c2".into()))?;
            let c_q2 = q_r * (2.0 * lnu / 3.0) * c2;
            data.f2_at_r = Some(f2);
            data.q_at_r = Some(q_r);
            data.c_q2 = Some(c_q2);
            (lnu > 0.0).then(|| AsymptoticLaw::new(3.0 * c_q2 / (4.0 * sqpi) * r.powf(1.5), -2.5, r, tag))
        }
        CaseTag::Case3Boundary => {
            let f2 = f2_eval(map, profile, r)?;
            let q_r = (1.0 - rho) * f2.exp();
            let c3 = f1.c3.ok_or_else(|| Error::CaseMismatch("missing c3".into()))?;
            let c_q3 = q_r * 2.0 * lnu * c3;
            data.f2_at_r = Some(f2);
            data.q_at_r = Some(q_r);
            data.c_q3 = Some(c_q3);
            (lnu > 0.0).then(|| AsymptoticLaw::new(c_q3 / (2.0 * sqpi) * r.sqrt(), -1.5, r, tag))
        }
        other => return Err(Error::CaseMismatch(format!("q_law expects a type-1 case, got {other}"))),
    };
    Ok((data, law))
}

/// r law (type-1 profiles).
pub fn r_law(
    map: &ImplicitMap,
    profile: &SingularityProfile,
    f1: &F1Expansion,
    q: &QExpansionData,
) -> Result<AsymptoticLaw> {
    let p = map.params();
    let ll2 = p.lambda() / p.lambda2;
    let lnu = p.lambda_over_nu();
    let r = profile.r_dominant;
    let tag = profile.case_tag;
    let sqpi = PI.sqrt();
    Ok(match tag {
        CaseTag::Case1RetrialRegime => {
            let c1 = f1.c1.unwrap();
            let kappa = lnu * c1;
            let c_q1 = q.c_q1.unwrap();
            AsymptoticLaw::new(ll2 * c_q1 * c1 * rgamma(1.0 + kappa) * r.powf(-1.0 - kappa), kappa, r, tag)
        }
        CaseTag::Case2PriorityRegime => {
            let c2 = f1.c2.unwrap();
            AsymptoticLaw::new(ll2 * c2 * q.q_at_r.unwrap() / (2.0 * sqpi) * r.sqrt(), -1.5, r, tag)
        }
        CaseTag::Case3Boundary => {
            let c3 = f1.c3.unwrap();
            AsymptoticLaw::new(ll2 * c3 * q.q_at_r.unwrap() / sqpi / r.sqrt(), -0.5, r, tag)
        }
        other => return Err(Error::CaseMismatch(format!("r_law expects a type-1 case, got {other}"))),
    })
}

/// p2 shares the r law in every regime: Q's singular part is one order weaker.
pub fn p2_law(r: &AsymptoticLaw) -> AsymptoticLaw {
    r.clone()
}

/// p2 law of the ordinary two-class priority queue (ν = ∞).
pub fn special_nonretrial(map: &ImplicitMap, profile: &SingularityProfile, f1: &F1Expansion) -> Result<AsymptoticLaw> {
    let p = map.params();
    if !p.nu.is_infinite() {
        return Err(Error::InvalidParameter("special_nonretrial requires nu = inf".into()));
    }
    let ll2 = p.lambda() / p.lambda2;
    let one_m_rho = 1.0 - p.rho();
    let r = profile.r_dominant;
    let tag = profile.case_tag;
    let sqpi = PI.sqrt();
    Ok(match tag {
        CaseTag::Case1RetrialRegime => AsymptoticLaw::new(ll2 * one_m_rho * f1.c1.unwrap() / r, 0.0, r, tag),
        CaseTag::Case2PriorityRegime => {
            AsymptoticLaw::new(ll2 * one_m_rho * f1.c2.unwrap() / (2.0 * sqpi) * r.sqrt(), -1.5, r, tag)
        }
        CaseTag::Case3Boundary => AsymptoticLaw::new(ll2 * one_m_rho * f1.c3.unwrap() / sqpi / r.sqrt(), -0.5, r, tag),
        other => return Err(Error::CaseMismatch(format!("special_nonretrial expects a type-1 case, got {other}"))),
    })
}

/// D = λ2μ − (λ + μ − 2√(λ1μ))√(λ1μ): sign separates Case1 (D > 0) from Case2 (D < 0)
/// for exponential service with rate μ.
pub fn regime_d(params: &ModelParams, mu: f64) -> f64 {
    let (l1, l2) = (params.lambda1, params.lambda2);
    let lam = l1 + l2;
    let r = (l1 * mu).sqrt();
    l2 * mu - (lam + mu - 2.0 * r) * r
}

/// Case predicted by the sign of D with a boundary band |D| < `band`.
pub fn case_from_d(d: f64, band: f64) -> CaseTag {
    if d.abs() < band {
        CaseTag::Case3Boundary
    } else if d > 0.0 {
        CaseTag::Case1RetrialRegime
    } else {
        CaseTag::Case2PriorityRegime
    }
}

/// h'(R) on the principal branch at the LST singularity, −λ2B*'/(1 + λ1B*').
fn h_prime_at_edge(map: &ImplicitMap, s_edge: f64) -> Result<(f64, f64)> {
    let p = map.params();
    let b1 = map.b(s_edge, 1)?[1];
    let one_m_gw = 1.0 + p.lambda1 * b1;
    Ok((-p.lambda2 * b1 / one_m_gw, one_m_gw))
}

/// Laws when the LST singularity induces the dominant singularity R_h* > 1.
///
/// The singular part of B* enters h divided by 1 − G_w = 1 + λ1B*'(−R_B*)
/// (linearising h = B*(λ1(1−h) + λ2(1−z)) around its regular part).
pub fn type2_laws(map: &ImplicitMap, profile: &SingularityProfile, lst: &LstSingularData) -> Result<(QExpansionData, LawSet)> {
    if profile.case_tag != CaseTag::Type2Dominant {
        return Err(Error::CaseMismatch(format!("type2_laws expects Type2Dominant, got {}", profile.case_tag)));
    }
    let p = map.params();
    let (alpha, c) = lst.expansion()?;
    let r = profile.r_dominant;
    let s_edge = -lst.r_bstar;
    let h_r = lst.regular_derivs[0];
    let (hp, one_m_gw) = h_prime_at_edge(map, s_edge)?;
    let f2 = f2_eval(map, profile, r)?;
    let q_r = (1.0 - p.rho()) * f2.exp();
    let k = c * (p.lambda1 * hp + p.lambda2).powf(-alpha) * (r - 1.0) / ((h_r - r).powi(2) * one_m_gw);
    let rg = rgamma(alpha);
    let lnu = p.lambda_over_nu();
    let ll2 = p.lambda() / p.lambda2;
    let tag = profile.case_tag;
    let q = (lnu > 0.0).then(|| AsymptoticLaw::new(lnu * q_r * k * rg * r.powf(1.0 - alpha), alpha - 2.0, r, tag));
    let rl = AsymptoticLaw::new(ll2 * k * q_r * rg * r.powf(-alpha), alpha - 1.0, r, tag);
    let data = QExpansionData {
        r_q: r,
        q_at_r: Some(q_r),
        f2_at_r: Some(f2),
        c_q1: None,
        c_q2: None,
        c_q3: None,
    };
    Ok((data, LawSet { q, p2: p2_law(&rl), r: rl }))
}

/// Pure power laws for service times with R_B* = 0.
///
/// Near z = 1 the singular part of f1 is −c·(λ1h'(1)+λ2)^(−α)/((1−ρ1)(1−h'(1))²)·(1−z)^(−α−1),
/// and R = (λ/λ2)·f1·Q with Q(1) = 1 − ρ.
pub fn type3_laws(map: &ImplicitMap, profile: &SingularityProfile, lst: &LstSingularData) -> Result<(QExpansionData, LawSet)> {
    if profile.case_tag != CaseTag::Type3Dominant {
        return Err(Error::CaseMismatch(format!("type3_laws expects Type3Dominant, got {}", profile.case_tag)));
    }
    let p = map.params();
    let (alpha, c) = lst.expansion()?;
    let hp = p.rho2() / (1.0 - p.rho1());
    let k3 = c * (p.lambda1 * hp + p.lambda2).powf(-alpha) / ((1.0 - hp).powi(2) * (1.0 - p.rho1()));
    let denom = -alpha * gamma(alpha);
    let one_m_rho = 1.0 - p.rho();
    let lnu = p.lambda_over_nu();
    let ll2 = p.lambda() / p.lambda2;
    let tag = profile.case_tag;
    let q = (lnu > 0.0).then(|| AsymptoticLaw::new(lnu * one_m_rho * k3 / denom, alpha - 1.0, 1.0, tag));
    let rl = AsymptoticLaw::new(ll2 * one_m_rho * k3 / denom, alpha, 1.0, tag);
    let data = QExpansionData {
        r_q: 1.0,
        q_at_r: Some(one_m_rho),
        f2_at_r: Some(0.0),
        c_q1: None,
        c_q2: None,
        c_q3: None,
    };
    Ok((data, LawSet { q, p2: p2_law(&rl), r: rl }))
}

/// Full pipeline: classify the LST, build the profile, expand and emit laws.
pub fn analyze(params: &ModelParams, model: &ServiceModel) -> Result<TailAnalysis> {
    params.require_orbit()?;
    let lst = model.classify_lst()?;
    let map = ImplicitMap::new(params, model)?;
    let profile = map.build_profile()?;
    analyze_with(&map, lst, profile)
}

/// As [`analyze`] for an already constructed map and profile.
pub fn analyze_with(map: &ImplicitMap, lst: LstSingularData, profile: SingularityProfile) -> Result<TailAnalysis> {
    let params = *map.params();
    let (f1, q_data, laws) = match profile.case_tag {
        CaseTag::Type2Dominant => {
            let (qd, laws) = type2_laws(map, &profile, &lst)?;
            (None, Some(qd), laws)
        }
        CaseTag::Type3Dominant => {
            let (qd, laws) = type3_laws(map, &profile, &lst)?;
            (None, Some(qd), laws)
        }
        _ => {
            let f1 = f1_expand(map, &profile)?;
            let (qd, q) = q_law(map, &profile, &f1)?;
            let r = if params.nu.is_infinite() {
                special_nonretrial(map, &profile, &f1)?
            } else {
                r_law(map, &profile, &f1, &qd)?
            };
            let laws = LawSet { q, p2: p2_law(&r), r };
            (Some(f1), Some(qd), laws)
        }
    };
    Ok(TailAnalysis {
        params,
        lst,
        profile,
        f1,
        q_data,
        laws,
    })
}
