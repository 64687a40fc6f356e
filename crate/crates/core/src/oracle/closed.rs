//! Closed-form coefficients without class-1 traffic and exponential service:
//! Q(z) = (1 − ρ)((1 − ρ)/(1 − ρz))^{λ/ν}, f1(z) = λ/(μ − λz).

use rug::Float;

use super::{prec_bits, CoefficientTable, Target, DEFAULT_DIGITS};
use crate::error::{Error, Result};
use crate::params::{ModelParams, RetrialRate};
use crate::service::{ServiceKind, ServiceModel};

pub fn coeffs_closed_noqueue(params: &ModelParams, model: &ServiceModel, target: Target, n_max: usize) -> Result<CoefficientTable> {
    coeffs_closed_noqueue_with(params, model, target, n_max, DEFAULT_DIGITS)
}

/// Negative-binomial q(n) = (1−ρ)^{1+a} ρ^n Γ(n+a)/(Γ(a) n!), a = λ/ν, and
/// r = (λ/λ2)·f1∗q with f1_n = ρ^{n+1}.
pub fn coeffs_closed_noqueue_with(
    params: &ModelParams,
    model: &ServiceModel,
    target: Target,
    n_max: usize,
    digits: u32,
) -> Result<CoefficientTable> {
    let ServiceKind::Exponential { mu } = *model.kind() else {
        return Err(Error::UnsupportedKind("closed-form coefficients need exponential service".into()));
    };
    if params.lambda1 != 0.0 {
        return Err(Error::InvalidParameter("closed-form coefficients need lambda1 = 0".into()));
    }
    params.require_orbit()?;
    let prec = prec_bits(digits);
    let l2 = Float::with_val(prec, params.lambda2);
    let rho = Float::with_val(prec, &l2 / mu);
    let one_m_rho = Float::with_val(prec, 1u32 - &rho);
    let a = match params.nu {
        RetrialRate::Infinite => Float::with_val(prec, 0),
        RetrialRate::Finite(v) => Float::with_val(prec, &l2 / v),
    };
    let eps = Float::with_val(64, Float::i_exp(1, -(prec as i32)));

    let mut q = Vec::with_capacity(n_max + 1);
    let lnq0 = Float::with_val(prec, one_m_rho.ln_ref()) * Float::with_val(prec, &a + 1u32);
    q.push(lnq0.exp());
    for n in 1..=n_max {
        let f = Float::with_val(prec, &a + (n - 1) as u64) * &rho / n as u64;
        let next = Float::with_val(prec, &q[n - 1] * &f);
        q.push(next);
    }
    // S_n = Σ_k ρ^k q_{n−k} = q_n + ρ S_{n−1};  r_n = (λ/λ2)·ρ·S_n with λ = λ2
    let mut r = Vec::with_capacity(n_max + 1);
    let mut s = Float::with_val(prec, 0);
    for qn in &q {
        s = Float::with_val(prec, &s * &rho) + qn;
        r.push(Float::with_val(prec, &s * &rho));
    }
    let coeffs: Vec<Float> = match target {
        Target::Q => q,
        Target::R => r,
        Target::P2 => q.iter().zip(&r).map(|(x, y)| Float::with_val(prec, x + y)).collect(),
    };
    let errors = coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| Float::with_val(64, Float::with_val(64, c.abs_ref()) * &eps) * (4 * n as u64 + 8))
        .collect();
    Ok(CoefficientTable {
        target,
        n_max,
        radius: 0.0,
        digits,
        points: 0,
        coeffs,
        errors,
    })
}
