//! Scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on a bracketing interval `[a, b]`.
///
/// Stops when the bracket is narrower than `xtol·(1 + |x|)` or f hits zero.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoConvergence(format!(
            "root not bracketed: f({a}) = {fa:e}, f({b}) = {fb:e}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol * (1.0 + b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence(format!("Brent did not converge in {max_iter} iterations")))
}

/// Newton's method safeguarded by a bracket `[lo, hi]` with `f(lo)` and
/// `f(hi)` of opposite sign. `fdf` returns (f, f'). Converged once
/// `|f| <= ftol(x)`.
pub fn rtsafe<F, T>(mut fdf: F, lo: f64, hi: f64, x0: f64, ftol: T, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
    T: Fn(f64) -> f64,
{
    let (flo, _) = fdf(lo)?;
    let (fhi, _) = fdf(hi)?;
    if flo.abs() <= ftol(lo) {
        return Ok(lo);
    }
    if fhi.abs() <= ftol(hi) {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence(format!(
            "root not bracketed: f({lo}) = {flo:e}, f({hi}) = {fhi:e}"
        )));
    }
    // orient so f(xl) < 0
    let (mut xl, mut xh) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = x0.clamp(lo.min(hi), lo.max(hi));
    let mut dx_old = (hi - lo).abs();
    let mut dx = dx_old;
    let (mut fx, mut dfx) = fdf(x)?;
    for _ in 0..max_iter {
        if fx.abs() <= ftol(x) {
            return Ok(x);
        }
        let newton_ok = dfx != 0.0
            && ((x - xh) * dfx - fx) * ((x - xl) * dfx - fx) < 0.0
            && (2.0 * fx).abs() <= (dx_old * dfx).abs();
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            dx = 0.5 * (xh - xl);
            x = xl + dx;
        }
        if (xh - xl).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            return Ok(x);
        }
        let (f_new, df_new) = fdf(x)?;
        fx = f_new;
        dfx = df_new;
        if fx < 0.0 {
            xl = x;
        } else {
            xh = x;
        }
    }
    Err(Error::NoConvergence(format!(
        "safeguarded Newton did not converge in {max_iter} iterations (last x = {x}, f = {fx:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| Ok(x * x * x - 2.0), 0.0, 3.0, 1e-15, 200).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), max_relative = 1e-14);
    }

    #[test]
    fn brent_requires_bracket() {
        assert!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn rtsafe_on_convex_decreasing() {
        let r = rtsafe(|x| Ok(((-x).exp() - x, -(-x).exp() - 1.0)), 0.0, 1.0, 0.0, |_| 1e-15, 200).unwrap();
        assert_relative_eq!(r, 0.567_143_290_409_783_8, max_relative = 1e-14);
    }
}
