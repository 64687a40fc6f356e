//! Reference coefficients of Q, R and P2 by Cauchy-integral inversion in
//! multiple precision, plus closed forms for the queue without class-1 traffic.
//!
//! f1 = (1 − h)/(h − z) is sampled on a circle inside its disk of
//! analyticity and inverted by FFT. Q = C·exp((λ/ν)∫_0^z f1) follows from the
//! power-series exponential n·q_n = (λ/ν)·Σ_k f1_{k−1} q_{n−k}, and
//! R = (λ/λ2)·f1·Q by convolution. f1 = u/(1 − u) with u = (1 − h)/(1 − z)
//! has nonnegative coefficients, so |f1(z)| ≤ f1(|z|) and aliasing is bounded
//! by real-axis probes.

mod closed;
mod fft;
mod mplst;

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticLaw;
use crate::error::{Error, Result};
use crate::implicit::{follow_path, ImplicitMap};
use crate::params::ModelParams;
use crate::service::{ServiceModel, ServiceType};

pub use closed::{coeffs_closed_noqueue, coeffs_closed_noqueue_with};
pub use fft::{fft, tanh_sinh, MpQuad};
pub use mplst::{polish_h, MpLst};

/// Default working precision in decimal digits.
pub const DEFAULT_DIGITS: u32 = 50;
/// A coefficient is usable when it exceeds this multiple of its error bound.
pub const USABLE_FACTOR: f64 = 1e3;

/// Bits of working precision for `digits` decimal digits, with guard bits.
pub fn prec_bits(digits: u32) -> u32 {
    (std::f64::consts::LOG2_10 * digits as f64).ceil() as u32 + 64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Q,
    R,
    P2,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Q => "Q",
            Target::R => "R",
            Target::P2 => "P2",
        })
    }
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "Q" => Ok(Target::Q),
            "R" => Ok(Target::R),
            "P2" => Ok(Target::P2),
            _ => Err(Error::InvalidParameter(format!("unknown target {s:?} (expected Q, R or P2)"))),
        }
    }
}

/// Coefficients f(0..=n_max) with per-coefficient absolute error bounds.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub target: Target,
    pub n_max: usize,
    /// Contour radius; 0 for closed-form tables.
    pub radius: f64,
    pub digits: u32,
    /// Number of contour points (0 for closed-form tables).
    pub points: usize,
    pub coeffs: Vec<Float>,
    pub errors: Vec<Float>,
}

impl CoefficientTable {
    pub fn usable(&self, n: usize) -> bool {
        let c = Float::with_val(64, self.coeffs[n].abs_ref());
        c > Float::with_val(64, &self.errors[n] * USABLE_FACTOR)
    }

    /// Largest n such that every coefficient in 1..=n is usable.
    pub fn reach(&self) -> Option<usize> {
        let mut last = None;
        for n in 1..=self.n_max {
            if !self.usable(n) {
                break;
            }
            last = Some(n);
        }
        last
    }

    /// First n whose coefficient is not usable.
    pub fn first_unusable(&self) -> Option<usize> {
        (0..=self.n_max).find(|&n| !self.usable(n))
    }

    /// Largest per-coefficient error bound.
    pub fn est_abs_error(&self) -> f64 {
        self.errors.iter().map(|e| e.to_f64()).fold(0.0, f64::max)
    }

    pub fn coeff_f64(&self, n: usize) -> f64 {
        self.coeffs[n].to_f64()
    }

    /// ln f(n), `None` for non-positive coefficients.
    pub fn ln_coeff(&self, n: usize) -> Option<f64> {
        let c = &self.coeffs[n];
        (*c > 0).then(|| Float::with_val(64, c.ln_ref()).to_f64())
    }

    /// Σ f(n) with its accumulated error bound.
    pub fn sum(&self) -> (Float, Float) {
        let prec = self.coeffs.first().map_or(64, |c| c.prec());
        let mut s = Float::with_val(prec, 0);
        let mut e = Float::with_val(64, 0);
        for (c, err) in self.coeffs.iter().zip(&self.errors) {
            s += c;
            e += err;
        }
        (s, e)
    }

    /// Decimal string of f(n) with `digits` significant digits.
    pub fn coeff_string(&self, n: usize) -> String {
        sci_string(&self.coeffs[n], self.digits as usize)
    }

    /// CSV with columns n, coeff, usable, est_abs_error.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::InvalidParameter(format!("CSV write failed: {e}"));
        wr.write_record(["n", "coeff", "usable", "est_abs_error"]).map_err(io)?;
        for n in 0..=self.n_max {
            wr.write_record([
                n.to_string(),
                self.coeff_string(n),
                self.usable(n).to_string(),
                sci_string(&self.errors[n], 3),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| Error::InvalidParameter(format!("CSV write failed: {e}")))?;
        Ok(())
    }
}

/// Scientific notation d.ddd…e±x with `digits` significant digits.
pub fn sci_string(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string_radix(10, None);
    }
    let (neg, s, exp) = x.to_sign_string_exp(10, Some(digits.max(1)));
    let exp = exp.unwrap_or(0) - 1;
    let (head, tail) = s.split_at(1);
    let sign = if neg { "-" } else { "" };
    if tail.is_empty() {
        format!("{sign}{head}e{exp}")
    } else {
        format!("{sign}{head}.{tail}e{exp}")
    }
}

/// Q, R and P2 tables from one contour run.
#[derive(Debug, Clone)]
pub struct OracleTables {
    pub q: CoefficientTable,
    pub r: CoefficientTable,
    pub p2: CoefficientTable,
    /// Coefficients of f1 with error bounds (diagnostic).
    pub f1: CoefficientTable,
}

impl OracleTables {
    pub fn get(&self, target: Target) -> &CoefficientTable {
        match target {
            Target::Q => &self.q,
            Target::R => &self.r,
            Target::P2 => &self.p2,
        }
    }
}

/// Contour-run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub n_max: usize,
    pub digits: u32,
    /// Contour radius as a fraction of the dominant singularity.
    pub radius_factor: f64,
    /// Number of contour points; defaults to the smallest power of two
    /// ≥ max(4·n_max, 256) (8·n_max for pure power-law service).
    pub points: Option<usize>,
}

impl OracleConfig {
    pub fn new(n_max: usize, digits: u32) -> Self {
        Self {
            n_max,
            digits,
            radius_factor: 0.95,
            points: None,
        }
    }
}

fn abs64(c: &Complex) -> Float {
    Float::with_val(64, c.abs_ref())
}

fn eps_bits(prec: u32) -> Float {
    Float::with_val(64, Float::i_exp(1, -(prec as i32)))
}

/// Coefficient table of one target; fails with `PrecisionExhausted` when the
/// error bound at n_max exceeds the coefficient itself.
pub fn coeffs_contour(
    params: &ModelParams,
    model: &ServiceModel,
    target: Target,
    n_max: usize,
    digits: u32,
) -> Result<CoefficientTable> {
    coeffs_contour_with(params, model, target, OracleConfig::new(n_max, digits))
}

/// [`coeffs_contour`] with explicit radius and point settings.
pub fn coeffs_contour_with(params: &ModelParams, model: &ServiceModel, target: Target, cfg: OracleConfig) -> Result<CoefficientTable> {
    let tables = contour_tables(params, model, cfg)?;
    let t = tables.get(target).clone();
    let (n_max, digits) = (cfg.n_max, cfg.digits);
    let trivially_zero = target == Target::Q && params.nu.is_infinite();
    let c = Float::with_val(64, t.coeffs[n_max].abs_ref());
    if !trivially_zero && t.errors[n_max] > c {
        return Err(Error::PrecisionExhausted {
            first_unusable: t.first_unusable().unwrap_or(n_max),
            n_max,
            digits,
        });
    }
    Ok(t)
}

/// Contour inversion for all targets at once.
pub fn contour_tables(params: &ModelParams, model: &ServiceModel, cfg: OracleConfig) -> Result<OracleTables> {
    params.require_orbit()?;
    if cfg.digits < 30 {
        return Err(Error::InvalidParameter(format!("oracle digits must be >= 30, got {}", cfg.digits)));
    }
    if cfg.n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be positive".into()));
    }
    if !(cfg.radius_factor > 0.0 && cfg.radius_factor < 1.0) {
        return Err(Error::InvalidParameter(format!("radius factor must lie in (0, 1), got {}", cfg.radius_factor)));
    }
    let map = ImplicitMap::new(params, model)?;
    let profile = map.build_profile()?;
    let r_dom = profile.r_dominant;
    let prec = prec_bits(cfg.digits);
    let n_max = cfg.n_max;

    let mut radius = cfg.radius_factor * r_dom;
    // f1 = (1 − h)/(h − z) is 0/0 at z = 1
    if (radius - 1.0).abs() < 0.01 {
        radius = 0.99;
    }
    let mult = if model.service_type() == ServiceType::Type3 { 8 } else { 4 };
    let m = match cfg.points {
        Some(p) if p.is_power_of_two() && p >= 2 * (n_max + 1) => p,
        Some(p) => {
            return Err(Error::InvalidParameter(format!(
                "contour points must be a power of two >= 2(n_max + 1), got {p}"
            )))
        }
        None => (mult * n_max).max(256).next_power_of_two(),
    };

    // double-precision start values along the upper half circle
    let (l1, l2) = (params.lambda1, params.lambda2);
    let half = m / 2;
    let mut guesses = Vec::with_capacity(half + 1);
    let mut w = Complex64::new(map.h_real(radius)?, 0.0);
    guesses.push(w);
    let lst64 = |s: Complex64| -> Result<(Complex64, Complex64)> {
        let v = model.lst_series(s, 1)?;
        Ok((v[0], v[1]))
    };
    for k in 0..half {
        let a0 = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        let a1 = 2.0 * std::f64::consts::PI * (k + 1) as f64 / m as f64;
        let path = |t: f64| Complex64::from_polar(radius, a0 + (a1 - a0) * t);
        w = follow_path(l1, l2, lst64, path, w)?;
        guesses.push(w);
    }

    // polish in multiple precision and sample f1
    let lst = MpLst::new(model, prec)?;
    let l1m = Float::with_val(prec, l1);
    let l2m = Float::with_val(prec, l2);
    let rm = Float::with_val(prec, radius);
    let two_pi = Float::with_val(prec, mplst::pi(prec) * 2u32);
    let eps = eps_bits(prec);
    let samples: Vec<(Complex, Float)> = guesses
        .par_iter()
        .enumerate()
        .map(|(k, g)| -> Result<(Complex, Float)> {
            let z = if k == 0 {
                Complex::with_val(prec, &rm)
            } else if 2 * k == m {
                Complex::with_val(prec, -&rm)
            } else {
                let ang = Float::with_val(prec, &two_pi * k as u64) / m as u64;
                let (s, c) = ang.sin_cos(Float::new(prec));
                Complex::with_val(prec, (Float::with_val(prec, &c * &rm), Float::with_val(prec, &s * &rm)))
            };
            let w0 = Complex::with_val(prec, (g.re, if k == 0 || 2 * k == m { 0.0 } else { g.im }));
            let (h, dh) = polish_h(&lst, &l1m, &l2m, &z, &w0)?;
            let hz = Complex::with_val(prec, &h - &z);
            let num = Complex::with_val(prec, 1u32 - &h);
            let f1 = Complex::with_val(prec, &num / &hz);
            // |∂f1/∂h| = |z − 1|/|h − z|²
            let zm1 = abs64(&Complex::with_val(prec, &z - 1u32));
            let hz2 = Float::with_val(64, abs64(&hz).square());
            let sens = Float::with_val(64, &zm1 / &hz2);
            let e = Float::with_val(64, &sens * &dh) + Float::with_val(64, abs64(&f1) * &eps) * 16u32;
            Ok((f1, e))
        })
        .collect::<Result<_>>()?;

    let mut data: Vec<Complex> = Vec::with_capacity(m);
    let mut point_err = Float::with_val(64, 0);
    for (f, e) in &samples {
        data.push(f.clone());
        point_err.max_mut(e);
    }
    for k in 1..half {
        data.push(Complex::with_val(prec, samples[half - k].0.conj_ref()));
    }
    debug_assert_eq!(data.len(), m);
    let f1_at_r = samples[0].0.real().clone();
    fft(&mut data, prec);

    // f1_n = X_n / (M r^n)
    let mut f1c = Vec::with_capacity(n_max + 1);
    let mut scale = Float::with_val(prec, m as u64);
    let mut inv_rn64 = Float::with_val(64, 1);
    let inv_r64 = Float::with_val(64, 1.0 / radius);
    let logm = (m as f64).log2();
    let fft_round = Float::with_val(64, Float::with_val(64, f1_at_r.abs_ref()) * &eps) * (logm + 4.0);
    let probes = probe_values(&map, radius, r_dom)?;
    let mut f1e = Vec::with_capacity(n_max + 1);
    for (n, x) in data.iter().take(n_max + 1).enumerate() {
        let c = Float::with_val(prec, x.real() / &scale);
        f1c.push(c);
        let round = Float::with_val(64, &point_err + &fft_round) * &inv_rn64;
        let alias = alias_bound(&probes, radius, m, n);
        f1e.push(round + alias);
        scale *= &rm;
        inv_rn64 *= &inv_r64;
    }

    // normalising constant C = q_0 = (1 − ρ)·exp(−(λ/ν)∫_0^1 f1)
    let lam = Float::with_val(prec, &l1m + &l2m);
    let mean = lst.mean()?;
    let rho = Float::with_val(prec, &lam * &mean);
    let one_m_rho = Float::with_val(prec, 1u32 - &rho);
    let lnu = match params.nu {
        crate::params::RetrialRate::Infinite => Float::with_val(prec, 0),
        crate::params::RetrialRate::Finite(v) => Float::with_val(prec, &lam / v),
    };
    let (q0, q0_err) = if lnu.is_zero() {
        (one_m_rho.clone(), Float::with_val(64, &eps * 4u32))
    } else {
        let i0 = f1_unit_integral(model, &map, params, prec)?;
        let expo = Float::with_val(prec, &lnu * &i0.value);
        let c = Float::with_val(prec, &one_m_rho * Float::with_val(prec, (-expo).exp_ref()));
        let rel = Float::with_val(64, Float::with_val(64, &lnu) * &i0.error) + Float::with_val(64, &eps * 8u32);
        let err = Float::with_val(64, &rel * Float::with_val(64, &c));
        (c, err)
    };

    // series exponential and convolution
    let lam_l2 = Float::with_val(prec, &lam / &l2m);
    let lnu64 = Float::with_val(64, &lnu);
    let ll2_64 = Float::with_val(64, &lam_l2);
    let f1a: Vec<Float> = f1c.iter().map(|c| Float::with_val(64, c.abs_ref())).collect();
    let mut q: Vec<Float> = Vec::with_capacity(n_max + 1);
    let mut qa: Vec<Float> = Vec::with_capacity(n_max + 1);
    let mut qe: Vec<Float> = Vec::with_capacity(n_max + 1);
    q.push(q0.clone());
    qa.push(Float::with_val(64, q0.abs_ref()));
    qe.push(q0_err);
    for n in 1..=n_max {
        if lnu.is_zero() {
            q.push(Float::with_val(prec, 0));
            qa.push(Float::with_val(64, 0));
            qe.push(Float::with_val(64, 0));
            continue;
        }
        let mut acc = Float::with_val(prec, 0);
        let mut mag = Float::with_val(64, 0);
        let mut err = Float::with_val(64, 0);
        for k in 1..=n {
            acc += Float::with_val(prec, &f1c[k - 1] * &q[n - k]);
            mag += Float::with_val(64, &f1a[k - 1] * &qa[n - k]);
            err += Float::with_val(64, &f1a[k - 1] * &qe[n - k]);
            err += Float::with_val(64, &f1e[k - 1] * Float::with_val(64, &qa[n - k] + &qe[n - k]));
        }
        let factor = Float::with_val(prec, &lnu / n as u64);
        let val = Float::with_val(prec, &acc * &factor);
        let f64f = Float::with_val(64, &lnu64 / n as u64);
        let round = Float::with_val(64, &mag * &eps) * ((n + 4) as u64);
        let e = Float::with_val(64, &err + &round) * &f64f;
        qa.push(Float::with_val(64, val.abs_ref()));
        q.push(val);
        qe.push(e);
    }
    let mut r = Vec::with_capacity(n_max + 1);
    let mut re = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = Float::with_val(prec, 0);
        let mut mag = Float::with_val(64, 0);
        let mut err = Float::with_val(64, 0);
        for k in 0..=n {
            acc += Float::with_val(prec, &f1c[k] * &q[n - k]);
            mag += Float::with_val(64, &f1a[k] * &qa[n - k]);
            err += Float::with_val(64, &f1a[k] * &qe[n - k]);
            err += Float::with_val(64, &f1e[k] * Float::with_val(64, &qa[n - k] + &qe[n - k]));
        }
        let round = Float::with_val(64, &mag * &eps) * ((n + 4) as u64);
        r.push(Float::with_val(prec, &acc * &lam_l2));
        re.push(Float::with_val(64, &err + &round) * &ll2_64);
    }
    let p2: Vec<Float> = q.iter().zip(&r).map(|(a, b)| Float::with_val(prec, a + b)).collect();
    let p2e: Vec<Float> = qe
        .iter()
        .zip(&re)
        .zip(&p2)
        .map(|((a, b), p)| Float::with_val(64, a + b) + Float::with_val(64, Float::with_val(64, p.abs_ref()) * &eps))
        .collect();

    let mk = |target, coeffs, errors| CoefficientTable {
        target,
        n_max,
        radius,
        digits: cfg.digits,
        points: m,
        coeffs,
        errors,
    };
    Ok(OracleTables {
        q: mk(Target::Q, q, qe),
        r: mk(Target::R, r, re),
        p2: mk(Target::P2, p2, p2e),
        f1: mk(Target::R, f1c, f1e),
    })
}

/// (r', f1(r')) for probe radii between the contour and the singularity.
fn probe_values(map: &ImplicitMap, radius: f64, r_dom: f64) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for tau in [0.5, 0.75, 0.9, 0.97] {
        let rp = radius + (r_dom - radius) * tau;
        if !(rp > radius && rp < r_dom) {
            continue;
        }
        let v = map.f1_real(rp)?;
        if v.is_finite() && v > 0.0 {
            // slack for the double-precision evaluation
            out.push((rp, v * 1.001));
        }
    }
    if out.is_empty() {
        return Err(Error::Domain("no admissible probe radius for the aliasing bound".into()));
    }
    Ok(out)
}

/// min over probes of f1(r')·r'^{−n}·ρ^M/(1 − ρ^M), ρ = r/r'.
fn alias_bound(probes: &[(f64, f64)], radius: f64, m: usize, n: usize) -> Float {
    let mut best: Option<Float> = None;
    for &(rp, v) in probes {
        let ln_rho = (radius / rp).ln();
        let ln_rm = ln_rho * m as f64;
        let ln_b = v.ln() - n as f64 * rp.ln() + ln_rm - (-ln_rm.exp()).ln_1p();
        let b = Float::with_val(64, ln_b).exp();
        best = Some(match best {
            Some(cur) if cur <= b => cur,
            _ => b,
        });
    }
    best.unwrap()
}

/// ∫_0^1 f1(x) dx on the principal branch, as ∫_0^{s0} f1(s)·(−x'(s)) ds with
/// x(s) = 1 + (λ1(1 − B*(s)) − s)/λ2, evaluated with extra precision because
/// 1 − B*(s) and B*(s) − x(s) both vanish at s = 0.
fn f1_unit_integral(model: &ServiceModel, map: &ImplicitMap, params: &ModelParams, prec: u32) -> Result<MpQuad> {
    let xprec = prec + prec / 2 + 64;
    let lst = MpLst::new(model, xprec)?;
    let l1 = Float::with_val(xprec, params.lambda1);
    let l2 = Float::with_val(xprec, params.lambda2);
    let lam = Float::with_val(xprec, &l1 + &l2);
    let h0g = map.h_real(0.0)?;
    let (h0, _) = polish_h(&lst, &l1, &l2, &Complex::with_val(xprec, 0), &Complex::with_val(xprec, h0g))?;
    let s0 = Float::with_val(xprec, Float::with_val(xprec, 1u32 - h0.real()) * &l1) + &l2;
    let mean = lst.mean()?;
    let rho = Float::with_val(xprec, &lam * &mean);
    let f1_zero = Float::with_val(xprec, &l2 * &mean) / Float::with_val(xprec, 1u32 - &rho);
    let cutoff = Float::with_val(64, Float::i_exp(1, -((xprec - prec) as i32 - 16)));
    let integrand = |s: &Float, _: &Float| -> Result<Float> {
        let (b0, b1) = lst.eval(&Complex::with_val(xprec, s))?;
        let b = b0.real();
        let db = b1.real();
        // −x'(s) = (1 + λ1 B*'(s))/λ2
        let mdx = Float::with_val(xprec, Float::with_val(xprec, &l1 * db) + 1u32) / &l2;
        if *s < cutoff {
            return Ok(Float::with_val(prec, &f1_zero * &mdx));
        }
        let one_m_b = Float::with_val(xprec, 1u32 - b);
        let x = Float::with_val(xprec, Float::with_val(xprec, &one_m_b * &l1) - s) / &l2 + 1u32;
        let den = Float::with_val(xprec, b - &x);
        Ok(Float::with_val(prec, Float::with_val(xprec, &one_m_b / &den) * &mdx))
    };
    let zero = Float::with_val(xprec, 0);
    let q = tanh_sinh(integrand, &zero, &s0, xprec)?;
    let err = q.error.clone() + Float::with_val(64, Float::with_val(64, q.value.abs_ref()) * eps_bits(prec));
    Ok(MpQuad {
        value: Float::with_val(prec, &q.value),
        error: err,
    })
}

/// One row of a ratio report.
#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub n: usize,
    pub coeff: String,
    pub law: String,
    pub ratio: f64,
    pub usable: bool,
}

/// f(n)/L(n) over a table together with the tail-window summary.
#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub target: Target,
    pub rows: Vec<RatioRow>,
    /// Largest n below which every coefficient is usable.
    pub reach: Option<usize>,
    /// max |ratio − 1| over n in (reach/10, reach].
    pub tail_max_deviation: Option<f64>,
}

impl RatioReport {
    pub fn ratio_at(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n && r.usable).map(|r| r.ratio)
    }
}

/// Ratio diagnostics of a table against an asymptotic law.
pub fn ratio_report(table: &CoefficientTable, law: &AsymptoticLaw) -> RatioReport {
    let mut rows = Vec::with_capacity(table.n_max);
    for n in 1..=table.n_max {
        let ln_l = law.ln_eval(n as f64);
        let ratio = match table.ln_coeff(n) {
            Some(lc) => (lc - ln_l).exp(),
            None => f64::NAN,
        };
        rows.push(RatioRow {
            n,
            coeff: sci_string(&table.coeffs[n], 17),
            law: sci_string(&Float::with_val(64, ln_l).exp(), 17),
            ratio,
            usable: table.usable(n),
        });
    }
    let reach = table.reach();
    let tail_max_deviation = reach.map(|nr| {
        let lo = nr / 10;
        rows.iter()
            .filter(|r| r.n > lo && r.n <= nr)
            .map(|r| (r.ratio - 1.0).abs())
            .fold(0.0, f64::max)
    });
    RatioReport {
        target: table.target,
        rows,
        reach,
        tail_max_deviation,
    }
}
