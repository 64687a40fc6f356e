//! Radix-2 FFT and tanh-sinh quadrature in multiple precision.

use rug::{Complex, Float};

use super::mplst::pi;
use crate::error::{Error, Result};

/// In-place forward DFT X_k = Σ_j x_j e^{−2πijk/n}; `n` must be a power of two.
pub fn fft(data: &mut [Complex], prec: u32) {
    let n = data.len();
    assert!(n.is_power_of_two());
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    // twiddles for the largest stage; smaller stages stride through them
    let two_pi = Float::with_val(prec, pi(prec) * 2u32);
    let tw: Vec<Complex> = (0..n / 2)
        .map(|k| {
            let ang = Float::with_val(prec, &two_pi * k as u64) / n as u64;
            let (sin, cos) = ang.sin_cos(Float::new(prec));
            Complex::with_val(prec, (cos, -sin))
        })
        .collect();
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let t = Complex::with_val(prec, &data[start + k + len / 2] * &tw[k * stride]);
                let u = data[start + k].clone();
                data[start + k] = Complex::with_val(prec, &u + &t);
                data[start + k + len / 2] = u - t;
            }
        }
        len <<= 1;
    }
}

/// Result of a tanh-sinh integration.
#[derive(Debug, Clone)]
pub struct MpQuad {
    pub value: Float,
    pub error: Float,
}

/// ∫_a^b f(x) dx by the tanh-sinh rule, refining the step until two levels
/// agree to the working precision. `f` receives the abscissa and its
/// distance to the nearer endpoint, which stays accurate near the ends.
pub fn tanh_sinh<F>(f: F, a: &Float, b: &Float, prec: u32) -> Result<MpQuad>
where
    F: Fn(&Float, &Float) -> Result<Float>,
{
    let half = Float::with_val(prec, b - a) / 2u32;
    let mid = Float::with_val(prec, a + b) / 2u32;
    let pi_2 = Float::with_val(prec, pi(prec) / 2u32);
    let eps = Float::with_val(64, Float::i_exp(1, -(prec as i32)));
    // abscissae with 1 − |t| below the representable range contribute nothing
    let t_max = {
        let l = (prec as f64) * std::f64::consts::LN_2;
        ((2.0 * (l + 10.0) / std::f64::consts::PI).ln() + 1.0).max(3.0)
    };
    let node = |t: f64| -> (Float, Float, Float) {
        // x = tanh(π/2 sinh t), w = π/2 cosh t / cosh²(π/2 sinh t), 1 − |x| = 2/(e^{2u}+1)
        let tf = Float::with_val(prec, t);
        let sh = Float::with_val(prec, tf.sinh_ref());
        let ch = Float::with_val(prec, tf.cosh_ref());
        let u = Float::with_val(prec, &pi_2 * &sh);
        let x = Float::with_val(prec, u.tanh_ref());
        let cu = Float::with_val(prec, u.cosh_ref());
        let w = Float::with_val(prec, &pi_2 * &ch) / Float::with_val(prec, &cu * &cu);
        let e2u = Float::with_val(prec, u.clone().abs() * 2u32).exp();
        let comp = Float::with_val(prec, 2u32) / (e2u + 1u32);
        (x, w, comp)
    };
    let eval_at = |t: f64| -> Result<Float> {
        let (_, w, comp) = node(t);
        let mut total = Float::with_val(prec, 0);
        for sign in [1i32, -1] {
            if t == 0.0 && sign == -1 {
                break;
            }
            let dist = Float::with_val(prec, &half * &comp).abs();
            let pt = if t == 0.0 {
                mid.clone()
            } else if sign == 1 {
                Float::with_val(prec, b - &Float::with_val(prec, &half * &comp))
            } else {
                Float::with_val(prec, a + &Float::with_val(prec, &half * &comp))
            };
            if dist.is_zero() {
                continue;
            }
            let v = f(&pt, &dist)?;
            total += Float::with_val(prec, &v * &w);
        }
        Ok(total)
    };
    let mut h = 0.5f64;
    let mut sum = Float::with_val(prec, 0);
    let mut k = 0i64;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        sum += eval_at(t)?;
        k += 1;
    }
    let mut prev = Float::with_val(prec, &sum * h) * &half;
    for _level in 0..16 {
        h /= 2.0;
        let mut k = 1i64;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            sum += eval_at(t)?;
            k += 2;
        }
        let cur = Float::with_val(prec, &sum * h) * &half;
        let diff = Float::with_val(64, &cur - &prev).abs();
        let scale = Float::with_val(64, cur.abs_ref()).max(&Float::with_val(64, 1e-300));
        // the rule doubles its correct digits per level, so diff² bounds the
        // error of the finer level once convergence has set in
        let tol = Float::with_val(64, &eps * &scale);
        let sqrt_tol = Float::with_val(64, tol.sqrt_ref());
        if diff <= sqrt_tol {
            let est = Float::with_val(64, &diff * &diff) / &scale;
            let err = est.max(&Float::with_val(64, &tol * 16u32));
            return Ok(MpQuad { value: cur, error: err });
        }
        prev = cur;
    }
    Err(Error::QuadratureFailure("tanh-sinh did not converge within 16 levels".into()))
}
