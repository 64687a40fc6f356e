//! Service-time distributions: LST evaluation, singularity classification and
//! the incomplete-gamma series used for analytic continuation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_real, QuadOptions};
use crate::special::gamma;

pub const MAX_ORDER: usize = 4;

/// Distribution family and its parameters, as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceKind {
    Exponential { mu: f64 },
    Erlang { k: u32, mu: f64 },
    #[serde(rename = "hyperexponential", alias = "hyper_exponential")]
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    Deterministic { d: f64 },
    #[serde(rename = "gamma", alias = "gamma_shape")]
    GammaShape { k: f64, mu: f64 },
    #[serde(rename = "power_law_cutoff")]
    PowerLawCutoff { p: f64, r_c: f64, x0: f64 },
    Pareto { p: f64, x0: f64 },
}

/// A validated service-time distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ServiceKind", into = "ServiceKind")]
pub struct ServiceModel {
    kind: ServiceKind,
    mean_b: f64,
    // PowerLawCutoff: 1 / ∫_0^1 e^{-R_c x(u)} du in the u-parametrisation
    plc_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServiceType {
    Type1,
    Type2,
    Type3,
}

/// Location and local expansion of the dominant singularity −R_B* of B*(s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LstSingularData {
    /// `f64::INFINITY` when B* is entire.
    pub r_bstar: f64,
    pub type_tag: ServiceType,
    pub alpha_bstar: Option<f64>,
    pub c_bstar: Option<f64>,
    /// B*^(j)(−R_B*) for j = 0..=floor(−α); empty for type 1.
    pub regular_derivs: Vec<f64>,
}

impl LstSingularData {
    /// (α, c) of the singular expansion, or `UnsupportedKind` if there is none.
    pub fn expansion(&self) -> Result<(f64, f64)> {
        match (self.alpha_bstar, self.c_bstar) {
            (Some(a), Some(c)) => Ok((a, c)),
            _ => Err(Error::UnsupportedKind(format!(
                "no singular expansion for this service model (R_B* = {})",
                self.r_bstar
            ))),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

impl TryFrom<ServiceKind> for ServiceModel {
    type Error = Error;
    fn try_from(kind: ServiceKind) -> Result<Self> {
        ServiceModel::new(kind)
    }
}

impl From<ServiceModel> for ServiceKind {
    fn from(m: ServiceModel) -> Self {
        m.kind
    }
}

impl ServiceModel {
    pub fn new(kind: ServiceKind) -> Result<Self> {
        let mut plc_k = 0.0;
        let mean_b = match &kind {
            ServiceKind::Exponential { mu } => {
                positive("mu", *mu)?;
                1.0 / mu
            }
            ServiceKind::Erlang { k, mu } => {
                positive("mu", *mu)?;
                if *k == 0 {
                    return Err(Error::InvalidParameter("Erlang shape k must be >= 1".into()));
                }
                *k as f64 / mu
            }
            ServiceKind::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::InvalidParameter(
                        "hyperexponential needs equally many weights and rates".into(),
                    ));
                }
                for (&w, &r) in weights.iter().zip(rates) {
                    positive("rate", r)?;
                    if !(w.is_finite() && w >= 0.0) {
                        return Err(Error::InvalidParameter(format!("weight {w} is negative")));
                    }
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
                }
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
            ServiceKind::Deterministic { d } => {
                positive("d", *d)?;
                *d
            }
            ServiceKind::GammaShape { k, mu } => {
                positive("k", *k)?;
                positive("mu", *mu)?;
                if is_integer(*k) {
                    return Err(Error::InvalidParameter(format!(
                        "gamma shape k = {k} is an integer; use the erlang kind"
                    )));
                }
                k / mu
            }
            ServiceKind::Pareto { p, x0 } => {
                positive("x0", *x0)?;
                if !(p.is_finite() && *p > 1.0 && *p < 3.0) {
                    return Err(Error::InvalidParameter(format!("Pareto exponent p = {p} outside (1, 3)")));
                }
                if is_integer(*p) {
                    return Err(Error::UnsupportedKind(format!(
                        "Pareto exponent p = {p} is an integer"
                    )));
                }
                p * x0 / (p - 1.0)
            }
            ServiceKind::PowerLawCutoff { p, r_c, x0 } => {
                positive("r_c", *r_c)?;
                positive("x0", *x0)?;
                if !(p.is_finite() && *p > 1.0) {
                    return Err(Error::InvalidParameter(format!("power-law exponent p = {p} must exceed 1")));
                }
                let (p, r_c, x0) = (*p, *r_c, *x0);
                let xu = |u: f64| x0 * u.powf(-1.0 / (p - 1.0));
                let opts = QuadOptions::default();
                let lo = plc_truncation(p, x0, r_c, 0);
                let z = integrate_real(|u| Ok((-r_c * xu(u)).exp()), lo, 1.0, opts)?.value;
                plc_k = 1.0 / z;
                let lo1 = plc_truncation(p, x0, r_c, 1);
                let m = integrate_real(|u| Ok(xu(u) * (-r_c * xu(u)).exp()), lo1, 1.0, opts)?.value;
                plc_k * m
            }
        };
        Ok(Self { kind, mean_b, plc_k })
    }

    pub fn exponential(mu: f64) -> Result<Self> {
        Self::new(ServiceKind::Exponential { mu })
    }

    pub fn kind(&self) -> &ServiceKind {
        &self.kind
    }

    /// Mean service time b.
    pub fn mean_b(&self) -> f64 {
        self.mean_b
    }

    /// Density normalisation constant C of the power-law-with-cutoff kind.
    pub fn plc_density_constant(&self) -> Option<f64> {
        match self.kind {
            ServiceKind::PowerLawCutoff { p, x0, .. } => Some(self.plc_k * (p - 1.0) * x0.powf(p - 1.0)),
            _ => None,
        }
    }

    /// R_B*: distance from 0 to the dominant singularity of B*.
    pub fn r_bstar(&self) -> f64 {
        match &self.kind {
            ServiceKind::Exponential { mu } | ServiceKind::Erlang { mu, .. } | ServiceKind::GammaShape { mu, .. } => *mu,
            ServiceKind::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, r)| *r)
                .fold(f64::INFINITY, f64::min),
            ServiceKind::Deterministic { .. } => f64::INFINITY,
            ServiceKind::PowerLawCutoff { r_c, .. } => *r_c,
            ServiceKind::Pareto { .. } => 0.0,
        }
    }

    pub fn service_type(&self) -> ServiceType {
        match self.kind {
            ServiceKind::PowerLawCutoff { .. } => ServiceType::Type2,
            ServiceKind::Pareto { .. } => ServiceType::Type3,
            _ => ServiceType::Type1,
        }
    }

    pub fn is_integral_kind(&self) -> bool {
        matches!(self.kind, ServiceKind::PowerLawCutoff { .. } | ServiceKind::Pareto { .. })
    }

    /// Largest derivative order finite at s = −R_B* (integral kinds only).
    fn finite_order_at_edge(&self, order: usize) -> bool {
        match self.kind {
            ServiceKind::Pareto { p, .. } => (order as f64) < p,
            ServiceKind::PowerLawCutoff { p, .. } => (order as f64) < p - 1.0,
            _ => false,
        }
    }

    /// [B*(s), B*'(s), …, B*^(order)(s)].
    pub fn lst_eval(&self, s: Complex64, order: usize) -> Result<Vec<Complex64>> {
        self.lst_eval_with(s, order, QuadOptions::default())
    }

    /// As [`lst_eval`](Self::lst_eval) with explicit quadrature tolerances.
    pub fn lst_eval_with(&self, s: Complex64, order: usize, opts: QuadOptions) -> Result<Vec<Complex64>> {
        if order > MAX_ORDER {
            return Err(Error::Domain(format!("derivative order {order} > {MAX_ORDER}")));
        }
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite argument {s}")));
        }
        let rb = self.r_bstar();
        let on_edge = s.im == 0.0 && s.re == -rb;
        if s.im == 0.0 && s.re < -rb {
            return Err(Error::Domain(format!("s = {} lies left of the LST singularity at {}", s.re, -rb)));
        }
        if on_edge && !(self.is_integral_kind() && self.finite_order_at_edge(order)) {
            return Err(Error::Domain(format!("s = {} is the LST singularity", s.re)));
        }
        if self.is_integral_kind() && s.re < -rb {
            return Err(Error::Domain(format!(
                "integral representation needs Re(s) >= {}, got {}",
                -rb, s.re
            )));
        }
        let mut out = Vec::with_capacity(order + 1);
        match &self.kind {
            ServiceKind::Exponential { mu } => gamma_family(1.0, *mu, s, order, &mut out),
            ServiceKind::Erlang { k, mu } => gamma_family(*k as f64, *mu, s, order, &mut out),
            ServiceKind::GammaShape { k, mu } => gamma_family(*k, *mu, s, order, &mut out),
            ServiceKind::HyperExponential { weights, rates } => {
                out.resize(order + 1, Complex64::new(0.0, 0.0));
                let mut tmp = Vec::with_capacity(order + 1);
                for (&w, &r) in weights.iter().zip(rates) {
                    tmp.clear();
                    gamma_family(1.0, r, s, order, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += w * t;
                    }
                }
            }
            ServiceKind::Deterministic { d } => {
                let e = (-s * d).exp();
                let mut f = 1.0;
                for _ in 0..=order {
                    out.push(e * f);
                    f *= -d;
                }
            }
            ServiceKind::Pareto { p, x0 } => {
                let (p, x0) = (*p, *x0);
                for j in 0..=order {
                    if on_edge {
                        out.push(Complex64::new(pareto_moment_deriv(p, x0, j), 0.0));
                        continue;
                    }
                    let lo = truncation_point(s.re, j, |t| (x0 / t).powf(p));
                    let xu = |u: f64| x0 * u.powf(-1.0 / p);
                    let v = integrate(
                        |u| {
                            let x = xu(u);
                            Ok((-s * x).exp() * (-x).powi(j as i32))
                        },
                        lo,
                        1.0,
                        opts,
                    )?;
                    out.push(v.value);
                }
            }
            ServiceKind::PowerLawCutoff { p, r_c, x0 } => {
                let (p, r_c, x0) = (*p, *r_c, *x0);
                let v = s + r_c;
                for j in 0..=order {
                    if on_edge {
                        out.push(Complex64::new(self.plc_edge_deriv(j), 0.0));
                        continue;
                    }
                    let lo = truncation_point(v.re, j, |t| (x0 / t).powf(p - 1.0));
                    let xu = |u: f64| x0 * u.powf(-1.0 / (p - 1.0));
                    let val = integrate(
                        |u| {
                            let x = xu(u);
                            Ok((-v * x).exp() * (-x).powi(j as i32))
                        },
                        lo,
                        1.0,
                        opts,
                    )?;
                    out.push(val.value * self.plc_k);
                }
            }
        }
        Ok(out)
    }

    /// Real-axis convenience wrapper around [`lst_eval`](Self::lst_eval).
    pub fn lst_real(&self, s: f64, order: usize) -> Result<Vec<f64>> {
        Ok(self
            .lst_eval(Complex64::new(s, 0.0), order)?
            .into_iter()
            .map(|c| c.re)
            .collect())
    }

    fn plc_edge_deriv(&self, j: usize) -> f64 {
        let ServiceKind::PowerLawCutoff { p, x0, .. } = self.kind else {
            unreachable!()
        };
        self.plc_k * (-x0).powi(j as i32) * (p - 1.0) / (p - 1.0 - j as f64)
    }

    /// Radius, type and singular expansion of B*.
    pub fn classify_lst(&self) -> Result<LstSingularData> {
        let r_bstar = self.r_bstar();
        let data = match &self.kind {
            ServiceKind::Exponential { .. }
            | ServiceKind::Erlang { .. }
            | ServiceKind::HyperExponential { .. }
            | ServiceKind::Deterministic { .. } => LstSingularData {
                r_bstar,
                type_tag: ServiceType::Type1,
                alpha_bstar: None,
                c_bstar: None,
                regular_derivs: vec![],
            },
            ServiceKind::GammaShape { k, mu } => LstSingularData {
                r_bstar,
                type_tag: ServiceType::Type1,
                alpha_bstar: Some(*k),
                c_bstar: Some(mu.powf(*k)),
                regular_derivs: vec![],
            },
            ServiceKind::PowerLawCutoff { p, .. } => {
                if is_integer(*p) {
                    return Err(Error::UnsupportedKind(format!(
                        "power-law exponent p = {p} gives an integer expansion exponent"
                    )));
                }
                let alpha = 1.0 - p;
                let c = self.plc_density_constant().unwrap() * gamma(alpha);
                let jmax = (-alpha).floor() as usize;
                LstSingularData {
                    r_bstar,
                    type_tag: ServiceType::Type2,
                    alpha_bstar: Some(alpha),
                    c_bstar: Some(c),
                    regular_derivs: (0..=jmax).map(|j| self.plc_edge_deriv(j)).collect(),
                }
            }
            ServiceKind::Pareto { p, x0 } => {
                let jmax = p.floor() as usize;
                LstSingularData {
                    r_bstar,
                    type_tag: ServiceType::Type3,
                    alpha_bstar: Some(-p),
                    c_bstar: Some(p * gamma(-p) * x0.powf(*p)),
                    regular_derivs: (0..=jmax).map(|j| pareto_moment_deriv(*p, *x0, j)).collect(),
                }
            }
        };
        Ok(data)
    }

    /// B* and its derivatives through the incomplete-gamma series, which
    /// continues the integral kinds analytically across Re(s) = −R_B*.
    /// Closed-form kinds defer to [`lst_eval`](Self::lst_eval).
    ///
    /// The alternating series loses accuracy once |s|·x0 grows beyond ~20.
    pub fn lst_series(&self, s: Complex64, order: usize) -> Result<Vec<Complex64>> {
        match self.kind {
            ServiceKind::Pareto { p, x0 } => {
                if s.norm() == 0.0 {
                    return self.lst_eval(s, order);
                }
                let u = s * x0;
                let g = gamma(-p);
                let mut out = Vec::with_capacity(order + 1);
                let mut ff = 1.0; // p (p-1) … (p-j+1)
                for j in 0..=order {
                    let sum = series_sum(u, j, |k| k as f64 - p);
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let val = -p * sign * sum + p * g * ff * u.powf(p - j as f64);
                    out.push(val * x0.powi(j as i32));
                    ff *= p - j as f64;
                }
                Ok(out)
            }
            ServiceKind::PowerLawCutoff { p, r_c, x0 } => {
                let v = s + r_c;
                if v.norm() == 0.0 {
                    return self.lst_eval(s, order);
                }
                let a = 1.0 - p;
                let c = self.plc_density_constant().unwrap();
                let g = gamma(a);
                let y = v * x0;
                let mut out = Vec::with_capacity(order + 1);
                let mut ff = 1.0; // (-a)(-a-1)…(-a-j+1)
                for j in 0..=order {
                    let sum = series_sum(y, j, |k| a + k as f64);
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let val = g * ff * v.powf(-a - j as f64) - x0.powf(a + j as f64) * sign * sum;
                    out.push(val * c);
                    ff *= -a - j as f64;
                }
                Ok(out)
            }
            _ => self.lst_eval(s, order),
        }
    }
}

/// Σ_{k≥j} t_{k−j}(y)/den(k) with t_m(y) = (−y)^m/m!.
fn series_sum(y: Complex64, j: usize, den: impl Fn(usize) -> f64) -> Complex64 {
    let mut t = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut m = 0usize;
    loop {
        let term = t / den(m + j);
        sum += term;
        m += 1;
        t *= -y / m as f64;
        if m > 8 && term.norm() <= 1e-18 * sum.norm().max(1e-300) && t.norm() <= 1e-18 * sum.norm().max(1e-300) {
            break;
        }
        if m > 2000 {
            break;
        }
    }
    sum
}

/// B*^(j)(0) for Pareto: (−1)^j E[X^j] = (−1)^j p x0^j / (p − j).
fn pareto_moment_deriv(p: f64, x0: f64, j: usize) -> f64 {
    (-x0).powi(j as i32) * p / (p - j as f64)
}

/// Lower limit in u below which e^{−re·x(u)} x(u)^j is negligible.
/// `u_of_x` maps x back to u.
fn truncation_point(re: f64, j: usize, u_of_x: impl Fn(f64) -> f64) -> f64 {
    if re <= 0.0 {
        return 0.0;
    }
    // e^{-t} t^j < 1e-20 · (peak) once t ≳ 50 + j ln t
    let mut t: f64 = 50.0;
    for _ in 0..4 {
        t = 50.0 + j as f64 * (t.max(1.0)).ln();
    }
    u_of_x(t / re).clamp(0.0, 1.0)
}

fn plc_truncation(p: f64, x0: f64, r_c: f64, j: usize) -> f64 {
    truncation_point(r_c, j, |x| (x0 / x).powf(p - 1.0))
}

/// (μ/(μ+s))^k and its derivatives; integer k uses repeated multiplication so
/// Erlang(1, μ) reproduces Exponential(μ) exactly.
fn gamma_family(k: f64, mu: f64, s: Complex64, order: usize, out: &mut Vec<Complex64>) {
    let ratio = mu / (s + mu);
    let base = if is_integer(k) && k <= 64.0 {
        ratio.powi(k.round() as i32)
    } else {
        // principal branch; cut along s ∈ (−∞, −μ]
        (s + mu).powf(-k) * mu.powf(k)
    };
    let inv = 1.0 / (s + mu);
    let mut cur = base;
    out.push(cur);
    for j in 0..order {
        cur = -cur * (k + j as f64) * inv;
        out.push(cur);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn all_kinds() -> Vec<ServiceModel> {
        [
            ServiceKind::Exponential { mu: 1.3 },
            ServiceKind::Erlang { k: 3, mu: 2.0 },
            ServiceKind::HyperExponential { weights: vec![0.3, 0.7], rates: vec![0.5, 3.0] },
            ServiceKind::Deterministic { d: 0.8 },
            ServiceKind::GammaShape { k: 1.7, mu: 2.2 },
            ServiceKind::PowerLawCutoff { p: 2.5, r_c: 1.0, x0: 1.0 },
            ServiceKind::Pareto { p: 1.5, x0: 1.0 },
        ]
        .into_iter()
        .map(|k| ServiceModel::new(k).unwrap())
        .collect()
    }

    /// Direct quadrature of ∫ e^{-sx} dB(x) in x, independent of the
    /// u-substitution used by lst_eval.
    fn direct_lst(m: &ServiceModel, s: f64) -> f64 {
        let opts = QuadOptions::default();
        let q = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| integrate_real(|x| Ok(f(x)), a, b, opts).unwrap().value;
        match m.kind().clone() {
            ServiceKind::Exponential { mu } => q(&|x| mu * (-mu * x).exp() * (-s * x).exp(), 0.0, 80.0 / (mu + s)),
            ServiceKind::Erlang { k, mu } => {
                let f = move |x: f64| {
                    mu.powi(k as i32) * x.powi(k as i32 - 1) * (-mu * x).exp() / gamma(k as f64) * (-s * x).exp()
                };
                q(&f, 0.0, 120.0 / (mu + s))
            }
            ServiceKind::HyperExponential { weights, rates } => weights
                .iter()
                .zip(&rates)
                .map(|(w, r)| w * q(&|x| r * (-(r + s) * x).exp(), 0.0, 80.0 / (r + s)))
                .sum(),
            ServiceKind::Deterministic { d } => (-s * d).exp(),
            ServiceKind::GammaShape { k, mu } => {
                let f = move |x: f64| mu.powf(k) * x.powf(k - 1.0) * (-(mu + s) * x).exp() / gamma(k);
                q(&f, 0.0, 120.0 / (mu + s))
            }
            ServiceKind::PowerLawCutoff { p, r_c, x0 } => {
                let cc = m.plc_density_constant().unwrap();
                let f = move |x: f64| cc * x.powf(-p) * (-(r_c + s) * x).exp();
                q(&f, x0, x0 + 80.0 / (r_c + s))
            }
            ServiceKind::Pareto { p, x0 } => {
                // split so the slowly decaying part is handled on a log scale
                let f = move |t: f64| {
                    let x = x0 * t.exp();
                    p * x0.powf(p) * x.powf(-p - 1.0) * (-s * x).exp() * x
                };
                q(&f, 0.0, (60.0 / (s * x0)).ln().max(1.0))
            }
        }
    }

    #[test]
    fn exponential_examples() {
        let m = ServiceModel::exponential(1.0).unwrap();
        let v = m.lst_eval(c(0.0), 1).unwrap();
        assert_eq!(v[0], c(1.0));
        assert_eq!(v[1], c(-1.0));
        assert_eq!(m.lst_eval(c(1.0), 0).unwrap()[0], c(0.5));
    }

    #[test]
    fn erlang_example_against_density_quadrature() {
        let m = ServiceModel::new(ServiceKind::Erlang { k: 2, mu: 2.0 }).unwrap();
        let v = m.lst_real(2.0, 0).unwrap()[0];
        assert_relative_eq!(v, 0.25, max_relative = 1e-15);
        assert_relative_eq!(direct_lst(&m, 2.0), 0.25, max_relative = 1e-10);
    }

    #[test]
    fn erlang_one_is_exponential_bitwise() {
        let e = ServiceModel::exponential(1.7).unwrap();
        let k = ServiceModel::new(ServiceKind::Erlang { k: 1, mu: 1.7 }).unwrap();
        for s in [c(0.0), c(0.3), Complex64::new(-0.5, 0.9), c(12.0)] {
            assert_eq!(e.lst_eval(s, 4).unwrap(), k.lst_eval(s, 4).unwrap());
        }
    }

    #[test]
    fn mean_and_normalisation() {
        for m in all_kinds() {
            let v = m.lst_real(0.0, 1).unwrap();
            let tol = if m.is_integral_kind() { 1e-6 } else { 1e-10 };
            assert_relative_eq!(v[0], 1.0, max_relative = 1e-10);
            assert_relative_eq!(-v[1], m.mean_b(), max_relative = tol);
        }
    }

    #[test]
    fn matches_direct_quadrature() {
        for m in all_kinds() {
            for s in [0.05, 0.4, 2.0] {
                let v = m.lst_real(s, 0).unwrap()[0];
                let d = direct_lst(&m, s);
                assert_relative_eq!(v, d, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn completely_monotone_on_grid() {
        for m in all_kinds() {
            for i in 0..12 {
                let s = 0.05 + 0.4 * i as f64;
                let v = m.lst_real(s, 3).unwrap();
                assert!(v[0] > 0.0 && v[0] <= 1.0);
                for (j, d) in v.iter().enumerate() {
                    let signed = if j % 2 == 0 { *d } else { -*d };
                    assert!(signed >= 0.0, "{:?} j={j} s={s}", m.kind());
                }
            }
        }
    }

    #[test]
    fn series_agrees_with_quadrature() {
        for m in all_kinds().into_iter().filter(|m| m.is_integral_kind()) {
            for s in [Complex64::new(0.3, 0.0), Complex64::new(0.2, 0.7), Complex64::new(1.1, -0.4)] {
                let a = m.lst_eval(s, 2).unwrap();
                let b = m.lst_series(s, 2).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).norm() < 1e-9 * (1.0 + x.norm()), "{:?} {s}: {x} vs {y}", m.kind());
                }
            }
        }
    }

    #[test]
    fn classify_examples() {
        let e = ServiceModel::exponential(1.0).unwrap().classify_lst().unwrap();
        assert_eq!(e.r_bstar, 1.0);
        assert_eq!(e.type_tag, ServiceType::Type1);

        let p = ServiceModel::new(ServiceKind::Pareto { p: 1.5, x0: 1.0 }).unwrap().classify_lst().unwrap();
        assert_eq!(p.r_bstar, 0.0);
        assert_eq!(p.type_tag, ServiceType::Type3);
        assert_eq!(p.alpha_bstar, Some(-1.5));

        let d = ServiceModel::new(ServiceKind::Deterministic { d: 1.0 }).unwrap().classify_lst().unwrap();
        assert!(d.r_bstar.is_infinite());
        assert!(matches!(d.expansion(), Err(Error::UnsupportedKind(_))));
    }

    #[test]
    fn pareto_expansion_coefficient_by_quadrature() {
        // c = lim (B(s) − 1 + b s) / s^p, independently via ∫(e^{-sx} − 1 + sx) dB(x)
        let (p, x0) = (1.5, 1.0);
        let m = ServiceModel::new(ServiceKind::Pareto { p, x0 }).unwrap();
        let (_, c_b) = m.classify_lst().unwrap().expansion().unwrap();
        let s: f64 = 1e-6;
        let f = |t: f64| {
            let x = x0 * t.exp();
            let sx = s * x;
            // e^{-sx} − 1 + sx, cancellation-free for small sx
            let g = if sx < 1e-3 { sx * sx / 2.0 - sx.powi(3) / 6.0 + sx.powi(4) / 24.0 } else { (-sx).exp_m1() + sx };
            p * x0.powf(p) * x.powf(-p) * g
        };
        let big_x = 80.0 / s;
        let v = integrate_real(|t| Ok(f(t)), 0.0, (big_x / x0).ln(), QuadOptions::default()).unwrap().value;
        // beyond X, e^{-sx} is negligible: ∫_X^∞ (sx − 1) p x0^p x^{-p-1} dx
        let tail = s * p * x0.powf(p) * big_x.powf(1.0 - p) / (p - 1.0) - (x0 / big_x).powf(p);
        let est = (v + tail) / s.powf(p);
        // next term is O(s^{2-p}) = O(1e-3) relative
        assert_relative_eq!(est, c_b, max_relative = 5e-3);
    }

    #[test]
    fn plc_type2_exponent_by_regression() {
        let m = ServiceModel::new(ServiceKind::PowerLawCutoff { p: 2.5, r_c: 1.0, x0: 1.0 }).unwrap();
        let data = m.classify_lst().unwrap();
        assert_eq!(data.type_tag, ServiceType::Type2);
        assert_eq!(data.alpha_bstar, Some(-1.5));
        assert!(data.regular_derivs[0] > 1.0);
        let b0 = data.regular_derivs[0];
        let b1 = data.regular_derivs[1];
        let pts: Vec<(f64, f64)> = (0..9)
            .map(|i| {
                let u = 1e-4 * 10f64.powf(i as f64 / 4.0);
                let v = m.lst_real(-1.0 + u, 0).unwrap()[0];
                (u.ln(), (v - b0 - b1 * u).abs().ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 1.5).abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn gamma_shape_blows_up_at_edge() {
        let m = ServiceModel::new(ServiceKind::GammaShape { k: 0.6, mu: 2.0 }).unwrap();
        assert_eq!(m.classify_lst().unwrap().r_bstar, 2.0);
        let mut last = 0.0;
        for j in 1..12 {
            let s = -2.0 + 10f64.powi(-j);
            let v = m.lst_real(s, 0).unwrap()[0];
            assert!(v > last);
            last = v;
        }
        assert!(last > 1e6);
    }

    #[test]
    fn domain_and_kind_errors() {
        let m = ServiceModel::exponential(1.0).unwrap();
        assert!(matches!(m.lst_eval(c(-1.0), 0), Err(Error::Domain(_))));
        assert!(matches!(m.lst_eval(c(0.0), 5), Err(Error::Domain(_))));
        assert!(matches!(
            ServiceModel::new(ServiceKind::Pareto { p: 2.0, x0: 1.0 }),
            Err(Error::UnsupportedKind(_))
        ));
        let plc = ServiceModel::new(ServiceKind::PowerLawCutoff { p: 3.0, r_c: 1.0, x0: 1.0 }).unwrap();
        assert!(matches!(plc.classify_lst(), Err(Error::UnsupportedKind(_))));
    }

    #[test]
    fn serde_roundtrip_and_unknown_keys() {
        let m: ServiceModel = serde_json::from_str(r#"{"kind":"pareto","p":1.5,"x0":1.0}"#).unwrap();
        assert_eq!(m.mean_b(), 3.0);
        let back = serde_json::to_string(&m).unwrap();
        assert_eq!(back, r#"{"kind":"pareto","p":1.5,"x0":1.0}"#);
        assert!(serde_json::from_str::<ServiceModel>(r#"{"kind":"exponential","mu":1.0,"extra":2}"#).is_err());
        assert!(serde_json::from_str::<ServiceModel>(r#"{"kind":"exponential","mu":-1.0}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gamma_family_monotone(k in 0.3f64..6.0, mu in 0.2f64..5.0, s in 0.0f64..10.0) {
            let kind = if is_integer(k) { ServiceKind::Erlang { k: k.round() as u32, mu } } else { ServiceKind::GammaShape { k, mu } };
            let m = ServiceModel::new(kind).unwrap();
            let v = m.lst_real(s, 4).unwrap();
            prop_assert!(v[0] > 0.0 && v[0] <= 1.0);
            for (j, d) in v.iter().enumerate() {
                let ok = if j % 2 == 0 { *d >= 0.0 } else { *d <= 0.0 };
                prop_assert!(ok);
            }
        }

        #[test]
        fn mean_matches_derivative(mu in 0.2f64..5.0, k in 1u32..6) {
            let m = ServiceModel::new(ServiceKind::Erlang { k, mu }).unwrap();
            let v = m.lst_real(0.0, 1).unwrap();
            prop_assert!((-v[1] - m.mean_b()).abs() <= 1e-10 * m.mean_b());
            prop_assert_eq!(v[0], 1.0);
        }
    }
}
