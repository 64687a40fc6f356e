//! Adaptive Gauss–Kronrod (21-point) integration and fixed Gauss–Legendre rules.
//!
//! The adaptive driver keeps a max-heap of subintervals keyed by their error
//! estimate and bisects the worst one until the summed estimate meets the
//! tolerance or the subdivision budget runs out. Integrands are complex-valued
//! over a real variable; real integrands use [`integrate_real`].

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_626_368_696,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 100_000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<(Complex64, f64)>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for j in 0..5 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let s = f(center - dx)? + f(center + dx)?;
        gauss += s * WG[j];
        kronrod += s * WGK[jtw];
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let s = f(center - dx)? + f(center + dx)?;
        kronrod += s * WGK[jtwm1];
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).norm();
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok((value, err))
}

/// Adaptive integration of a complex-valued integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Estimate<Complex64>>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    if a == b {
        return Ok(Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    if a > b {
        let est = integrate(f, b, a, opts)?;
        return Ok(Estimate { value: -est.value, ..est });
    }
    let (value, error) = gk21(&mut f, a, b)?;
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    // panels too narrow to split any further
    let mut frozen_value = Complex64::new(0.0, 0.0);
    let mut frozen_err = 0.0;
    let mut subdivisions = 1usize;

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a).abs() < 1e-15 * mid.abs().max(1e-300) {
            frozen_value += worst.value;
            frozen_err += worst.error;
            continue;
        }
        if subdivisions >= opts.max_subdivisions {
            if total_err <= 100.0 * tol {
                heap.push(worst);
                break;
            }
            return Err(Error::QuadratureFailure(format!(
                "subdivision budget {} exhausted on [{a}, {b}] with error {total_err:e} > {tol:e}",
                opts.max_subdivisions
            )));
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid)?;
        let (v2, e2) = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        subdivisions += 1;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }

    // re-sum to shed accumulated cancellation in the running totals
    let mut value = frozen_value;
    let mut error = frozen_err;
    for p in heap.iter() {
        value += p.value;
        error += p.error;
    }
    let tol = opts.abs_tol.max(opts.rel_tol * value.norm());
    if error > 100.0 * tol {
        return Err(Error::QuadratureFailure(format!(
            "roundoff-limited: error {error:e} exceeds tolerance {tol:e} on [{a}, {b}]"
        )));
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// Adaptive integration of a real integrand.
pub fn integrate_real<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Estimate<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let est = integrate(|x| f(x).map(|v| Complex64::new(v, 0.0)), a, b, opts)?;
    Ok(Estimate {
        value: est.value.re,
        error: est.error,
        evaluations: est.evaluations,
    })
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Fixed-order Gauss–Legendre quadrature of a real integrand on `[a, b]`.
pub fn gauss_legendre_fixed<F>(mut f: F, a: f64, b: f64, rule: &[(f64, f64)]) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for &(x, w) in rule {
        sum += w * f(c + h * x)?;
    }
    Ok(sum * h)
}
