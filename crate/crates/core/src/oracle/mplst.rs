//! Multiple-precision Laplace–Stieltjes transforms and the kernel equation.

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::service::{ServiceKind, ServiceModel};

/// B* and B*' of a service model evaluated in `prec`-bit arithmetic.
#[derive(Debug, Clone)]
pub struct MpLst {
    kind: ServiceKind,
    prec: u32,
    /// Density constant for the power-law-with-cutoff kind, normalised in MP.
    plc_c: Option<Float>,
    /// Γ(−p) (Pareto) or Γ(1−p) (power law with cutoff).
    gamma_const: Option<Float>,
}

impl MpLst {
    pub fn new(model: &ServiceModel, prec: u32) -> Result<Self> {
        let kind = model.kind().clone();
        let mut out = Self {
            kind: kind.clone(),
            prec,
            plc_c: None,
            gamma_const: None,
        };
        match kind {
            ServiceKind::Pareto { p, .. } => {
                out.gamma_const = Some(Float::with_val(prec, -p).gamma());
            }
            ServiceKind::PowerLawCutoff { p, .. } => {
                out.gamma_const = Some(Float::with_val(prec, 1.0 - p).gamma());
                out.plc_c = Some(Float::with_val(prec, 1));
                // normalise so that B*(0) = 1 holds to working precision
                let zero = Complex::with_val(prec, 0);
                let (b0, _) = out.eval(&zero)?;
                out.plc_c = Some(Float::with_val(prec, 1) / Float::with_val(prec, b0.real()));
            }
            _ => {}
        }
        Ok(out)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Mean service time −B*'(0).
    pub fn mean(&self) -> Result<Float> {
        let (_, b1) = self.eval(&Complex::with_val(self.prec, 0))?;
        Ok(-Float::with_val(self.prec, b1.real()))
    }

    /// (B*(s), B*'(s)).
    pub fn eval(&self, s: &Complex) -> Result<(Complex, Complex)> {
        let prec = self.prec;
        let c = |v: f64| Complex::with_val(prec, v);
        match &self.kind {
            ServiceKind::Exponential { mu } => {
                let d = Complex::with_val(prec, s + *mu);
                let b = Complex::with_val(prec, *mu / &d);
                let b1 = -Complex::with_val(prec, &b / &d);
                Ok((b, b1))
            }
            ServiceKind::Erlang { k, mu } => {
                let d = Complex::with_val(prec, s + *mu);
                let base = Complex::with_val(prec, *mu / &d);
                let b = base.pow(*k);
                let b1 = -Complex::with_val(prec, &b * f64::from(*k)) / &d;
                Ok((b, b1))
            }
            ServiceKind::GammaShape { k, mu } => {
                let d = Complex::with_val(prec, s + *mu);
                let base = Complex::with_val(prec, *mu / &d);
                let b = (base.ln() * *k).exp();
                let b1 = -Complex::with_val(prec, &b * *k) / &d;
                Ok((b, b1))
            }
            ServiceKind::HyperExponential { weights, rates } => {
                let mut b = c(0.0);
                let mut b1 = c(0.0);
                for (w, mu) in weights.iter().zip(rates) {
                    let d = Complex::with_val(prec, s + *mu);
                    let t = Complex::with_val(prec, (*w * *mu) / &d);
                    b1 -= Complex::with_val(prec, &t / &d);
                    b += t;
                }
                Ok((b, b1))
            }
            ServiceKind::Deterministic { d } => {
                let b = (-Complex::with_val(prec, s * *d)).exp();
                let b1 = -Complex::with_val(prec, &b * *d);
                Ok((b, b1))
            }
            ServiceKind::Pareto { p, x0 } => self.pareto(*p, *x0, s),
            ServiceKind::PowerLawCutoff { p, r_c, x0 } => self.plc(*p, *r_c, *x0, s),
        }
    }

    /// B*^(j)(s) x0^{−j} = −p(−1)^j Σ_m (−u)^m/(m!(m+j−p)) + pΓ(−p)·p^(j)·u^{p−j}, u = s·x0.
    fn pareto(&self, p: f64, x0: f64, s: &Complex) -> Result<(Complex, Complex)> {
        let prec = self.prec;
        if s.real().is_sign_negative() && s.imag().is_zero() && !s.real().is_zero() {
            return Err(Error::Domain("Pareto LST is not defined on the negative real axis".into()));
        }
        let u = Complex::with_val(prec, s * x0);
        let gp = Float::with_val(prec, self.gamma_const.as_ref().unwrap() * p);
        let guard = guard_bits(&u);
        let [s0, s1] = alt_series(&u, prec + guard, |m, j| m as f64 + j as f64 - p);
        let mut b = Complex::with_val(prec, &s0 * -p);
        let mut b1 = Complex::with_val(prec, &s1 * p);
        if !u.is_zero() {
            let lnu = Complex::with_val(prec, u.ln_ref());
            let up = Complex::with_val(prec, &lnu * p).exp();
            let up1 = Complex::with_val(prec, &lnu * (p - 1.0)).exp();
            b += Complex::with_val(prec, &up * &gp);
            b1 += Complex::with_val(prec, &up1 * &gp) * p;
        }
        Ok((b, b1 * x0))
    }

    /// B*^(j)(s)/C = Γ(a)·(−a)_j·v^{−a−j} − x0^{a+j}(−1)^j Σ_m (−y)^m/(m!(a+m+j)),
    /// a = 1 − p, v = s + R_c, y = v·x0.
    fn plc(&self, p: f64, r_c: f64, x0: f64, s: &Complex) -> Result<(Complex, Complex)> {
        let prec = self.prec;
        let a = 1.0 - p;
        let v = Complex::with_val(prec, s + r_c);
        if v.imag().is_zero() && !v.real().is_sign_positive() {
            return Err(Error::Domain("power-law-with-cutoff LST is not defined at or left of -R_c".into()));
        }
        let y = Complex::with_val(prec, &v * x0);
        let guard = guard_bits(&y);
        let [s0, s1] = alt_series(&y, prec + guard, |m, j| a + m as f64 + j as f64);
        let g = self.gamma_const.as_ref().unwrap();
        let lnv = Complex::with_val(prec, v.ln_ref());
        let v0 = Complex::with_val(prec, &lnv * -a).exp();
        let v1 = Complex::with_val(prec, &lnv * (-a - 1.0)).exp();
        let x0f = Float::with_val(prec, x0);
        let xa = Float::with_val(prec, x0f.clone().pow(a));
        let xa1 = Float::with_val(prec, &xa * x0);
        let cst = self.plc_c.as_ref().unwrap();
        let b = (Complex::with_val(prec, &v0 * g) - Complex::with_val(prec, &s0 * &xa)) * cst;
        let b1 = (Complex::with_val(prec, &v1 * g) * -a + Complex::with_val(prec, &s1 * &xa1)) * cst;
        Ok((b, b1))
    }
}

/// Extra bits lost to cancellation in an alternating series with argument y.
fn guard_bits(y: &Complex) -> u32 {
    let n = Float::with_val(53, y.abs_ref()).to_f64();
    (n * std::f64::consts::LOG2_E).ceil() as u32 + 16
}

/// [Σ_m t_m/den(m,0), Σ_m t_m/den(m,1)] with t_m = (−y)^m/m!, evaluated at `prec` bits.
fn alt_series(y: &Complex, prec: u32, den: impl Fn(usize, usize) -> f64) -> [Complex; 2] {
    let yy = Complex::with_val(prec, y);
    let ny = Float::with_val(53, yy.abs_ref()).to_f64();
    let mut t = Complex::with_val(prec, 1);
    let mut s0 = Complex::with_val(prec, 0);
    let mut s1 = Complex::with_val(prec, 0);
    let eps = Float::with_val(53, Float::i_exp(1, -(prec as i32)));
    let mut m = 0usize;
    loop {
        s0 += Complex::with_val(prec, &t / den(m, 0));
        s1 += Complex::with_val(prec, &t / den(m, 1));
        m += 1;
        t *= -Complex::with_val(prec, &yy / m as u32);
        if (m as f64) > ny {
            let tn = Float::with_val(53, t.abs_ref());
            let sn = Float::with_val(53, s0.abs_ref());
            if tn <= Float::with_val(53, &eps * &sn) || tn.is_zero() {
                break;
            }
        }
    }
    [s0, s1]
}

/// Kernel root w = B*(λ1(1 − w) + λ2(1 − z)) polished by Newton from `w0`.
/// Returns (w, bound on |w − w_exact|).
pub fn polish_h(lst: &MpLst, l1: &Float, l2: &Float, z: &Complex, w0: &Complex) -> Result<(Complex, Float)> {
    let prec = lst.prec();
    let one = Float::with_val(prec, 1);
    let s_of = |w: &Complex| -> Complex {
        let a = Complex::with_val(prec, &one - w) * l1;
        let b = Complex::with_val(prec, &one - z) * l2;
        a + b
    };
    let mut w = Complex::with_val(prec, w0);
    let tol = Float::with_val(64, Float::i_exp(1, 16 - prec as i32));
    // rounding floor: steps that stop shrinking below this are noise
    let floor = Float::with_val(64, Float::i_exp(1, 40 - prec as i32));
    let mut last_step = Float::with_val(64, f64::INFINITY);
    for _ in 0..200 {
        let (b0, b1) = lst.eval(&s_of(&w))?;
        let f = Complex::with_val(prec, &b0 - &w);
        let df = Complex::with_val(prec, &b1 * l1) * -1 - 1u32;
        let step = Complex::with_val(prec, &f / &df);
        w -= &step;
        let st = Float::with_val(64, step.abs_ref());
        let wn = Float::with_val(64, w.abs_ref()).max(&Float::with_val(64, 1e-30));
        let scaled_tol = Float::with_val(64, &tol * &wn);
        let stalled = st > Float::with_val(64, &last_step / 4u32) && st <= Float::with_val(64, &floor * &wn);
        if st <= scaled_tol || stalled {
            // quadratic convergence: the remaining error is below the last step
            let bound = Float::with_val(64, &st * 2u32).max(&scaled_tol);
            return Ok((w, bound));
        }
        if st > last_step && last_step.is_finite() && st > Float::with_val(64, 1e-10) {
            return Err(Error::NoConvergence(format!("MP Newton for h diverged at z = {}", z.to_string_radix(10, Some(8)))));
        }
        last_step = st;
    }
    Err(Error::NoConvergence(format!(
        "MP Newton for h did not converge in 200 iterations at z = ({}, {}), last step {}",
        z.real().to_f64(),
        z.imag().to_f64(),
        last_step.to_string_radix(10, Some(4))
    )))
}

/// π at `prec` bits.
pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}
