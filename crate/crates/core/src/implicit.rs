//! The kernel root h(z) and the singularities it induces.
//!
//! h(z) solves w = B*(λ1(1−w) + λ2(1−z)). On the real axis the principal
//! branch is parametrised by s = λ1(1−w) + λ2(1−z): each s ≥ s_lim gives the
//! point (z(s), w(s)) = (1 + (λ1(1−B*(s)) − s)/λ2, B*(s)), and z(s) is
//! decreasing there. s_lim is the critical point −λ1B*'(s_c) = 1 (the square-root
//! branch point R_h), or the LST singularity −R_B* when no critical point exists.
//! Working in s avoids solving for h on the real axis altogether and keeps
//! every search on the principal branch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::roots::{brent, rtsafe};
use crate::service::{ServiceModel, ServiceType};

/// Relative tolerance for coinciding singularities (boundary case, excluded ties).
pub const BOUNDARY_TOL: f64 = 1e-8;

const NEWTON_FTOL: f64 = 1e-13;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "Case1_RetrialRegime")]
    Case1RetrialRegime,
    #[serde(rename = "Case2_PriorityRegime")]
    Case2PriorityRegime,
    #[serde(rename = "Case3_Boundary")]
    Case3Boundary,
    Type2Dominant,
    Type3Dominant,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::Case1RetrialRegime => "Case1_RetrialRegime",
            CaseTag::Case2PriorityRegime => "Case2_PriorityRegime",
            CaseTag::Case3Boundary => "Case3_Boundary",
            CaseTag::Type2Dominant => "Type2Dominant",
            CaseTag::Type3Dominant => "Type3Dominant",
        }
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The square-root branch point of h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub r_h: f64,
    pub h_at_rh: f64,
    pub c_h: f64,
    /// kernel argument s at the branch point
    pub s_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Limit {
    /// Square-root branch point.
    Critical(BranchPoint),
    /// The principal branch runs into the LST singularity at s = −R_B*.
    /// `w` is B*(−R_B*) (infinite for type 1), `gw` is G_w there.
    Edge { s: f64, w: f64, gw: f64 },
    /// R_B* = ∞ and no branch point (λ1 = 0 with an entire LST).
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityProfile {
    pub service_type: ServiceType,
    pub r_h: Option<f64>,
    pub h_at_rh: Option<f64>,
    pub c_h: Option<f64>,
    pub r_star: Option<f64>,
    pub r_hstar: Option<f64>,
    pub case_tag: CaseTag,
    pub r_dominant: f64,
    /// (h(L) − L)/L at the branch limit L (R_h or R_h*); its sign separates
    /// the pole-dominated case from the branch-dominated one.
    pub boundary_gap: Option<f64>,
}

/// Kernel of one (params, model) pair with its branch limit cached.
#[derive(Debug, Clone)]
pub struct ImplicitMap {
    params: ModelParams,
    model: ServiceModel,
    limit: Limit,
    ambiguous: Option<String>,
    /// B*(0), B*'(0), B*''(0), B*'''(0) when the first three moments exist.
    moments: Option<[f64; 4]>,
}

impl ImplicitMap {
    pub fn new(params: &ModelParams, model: &ServiceModel) -> Result<Self> {
        let mut map = Self {
            params: *params,
            model: model.clone(),
            limit: Limit::Unbounded,
            ambiguous: None,
            moments: model.lst_real(0.0, 3).ok().and_then(|v| {
                let m = [v[0], v[1], v[2], v[3]];
                m.iter().all(|x| x.is_finite()).then_some(m)
            }),
        };
        let (limit, ambiguous) = map.locate_limit()?;
        map.limit = limit;
        map.ambiguous = ambiguous;
        Ok(map)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn model(&self) -> &ServiceModel {
        &self.model
    }

    /// B* and derivatives on the real axis.
    pub fn b(&self, s: f64, order: usize) -> Result<Vec<f64>> {
        self.model.lst_real(s, order)
    }

    /// Kernel argument λ1(1−w) + λ2(1−z).
    pub fn s_of(&self, z: f64, w: f64) -> f64 {
        self.params.lambda1 * (1.0 - w) + self.params.lambda2 * (1.0 - z)
    }

    /// z on the principal real branch with kernel argument s, and dz/ds.
    pub fn z_of_s(&self, s: f64) -> Result<(f64, f64)> {
        let (l1, l2) = (self.params.lambda1, self.params.lambda2);
        if l2 <= 0.0 {
            return Err(Error::InvalidParameter("lambda2 must be > 0 to parametrise the branch".into()));
        }
        let b = self.b(s, 1)?;
        let z = 1.0 + (l1 * (1.0 - b[0]) - s) / l2;
        Ok((z, (-l1 * b[1] - 1.0) / l2))
    }

    /// Smallest kernel argument reachable on the principal real branch.
    pub fn s_limit(&self) -> f64 {
        match self.limit {
            Limit::Critical(bp) => bp.s_c,
            Limit::Edge { s, .. } => s,
            Limit::Unbounded => f64::NEG_INFINITY,
        }
    }

    /// Right end of the real interval on which h is defined (may be infinite).
    pub fn z_limit(&self) -> f64 {
        match self.limit {
            Limit::Critical(bp) => bp.r_h,
            Limit::Edge { s, w, .. } => {
                let (l1, l2) = (self.params.lambda1, self.params.lambda2);
                if l2 <= 0.0 {
                    return 1.0;
                }
                if w.is_infinite() {
                    1.0 + (-s) / l2
                } else {
                    1.0 + (l1 * (1.0 - w) - s) / l2
                }
            }
            Limit::Unbounded => f64::INFINITY,
        }
    }

    fn locate_limit(&self) -> Result<(Limit, Option<String>)> {
        let mut ambiguous = None;
        let limit = self.locate_limit_inner(&mut ambiguous)?;
        Ok((limit, ambiguous))
    }

    fn locate_limit_inner(&self, ambiguous: &mut Option<String>) -> Result<Limit> {
        let l1 = self.params.lambda1;
        let rb = self.model.r_bstar();
        let ty = self.model.service_type();
        if ty == ServiceType::Type3 {
            return Ok(Limit::Edge { s: 0.0, w: 1.0, gw: self.params.rho1() });
        }
        if l1 == 0.0 {
            if rb.is_infinite() {
                return Ok(Limit::Unbounded);
            }
            let w = match ty {
                ServiceType::Type2 => self.b(-rb, 0)?[0],
                _ => f64::INFINITY,
            };
            return Ok(Limit::Edge { s: -rb, w, gw: 0.0 });
        }
        let phi = |s: f64| -> Result<f64> { Ok(-l1 * self.b(s, 1)?[1] - 1.0) };

        // find s_lo with φ(s_lo) > 0, or conclude that G_w < 1 up to the edge
        let s_lo = if ty == ServiceType::Type2 {
            let p = plc_exponent(&self.model);
            let w_edge = self.b(-rb, 0)?[0];
            let gw_edge = if p > 2.0 { -l1 * self.b(-rb, 1)?[1] } else { f64::INFINITY };
            if (gw_edge - 1.0).abs() <= BOUNDARY_TOL {
                *ambiguous = Some(format!(
                    "G_w = {gw_edge} at the LST singularity: R_h and R_h* coincide"
                ));
            }
            if gw_edge <= 1.0 {
                return Ok(Limit::Edge { s: -rb, w: w_edge, gw: gw_edge });
            }
            if gw_edge.is_finite() {
                -rb
            } else {
                self.scan_left(rb, &phi)?
            }
        } else {
            self.scan_left(rb, &phi)?
        };

        let s_c = brent(phi, s_lo, 0.0, 1e-15, MAX_ITER)?;
        let b = self.b(s_c, 2)?;
        let l2 = self.params.lambda2;
        let w_c = b[0];
        let r_h = if l2 > 0.0 { 1.0 + (l1 * (1.0 - w_c) - s_c) / l2 } else { f64::INFINITY };
        let c_h = (2.0 * l2 / (l1.powi(3) * b[2])).sqrt();
        Ok(Limit::Critical(BranchPoint { r_h, h_at_rh: w_c, c_h, s_c }))
    }

    /// Walk left from 0 until −λ1B*'(s) exceeds 1.
    fn scan_left(&self, rb: f64, phi: &impl Fn(f64) -> Result<f64>) -> Result<f64> {
        for k in 0..1100 {
            let s = if rb.is_infinite() {
                -(2f64.powi(k))
            } else {
                -rb + rb * 0.5f64.powi(k + 1)
            };
            if s <= -rb {
                break;
            }
            if phi(s)? > 0.0 {
                return Ok(s);
            }
        }
        Err(Error::NoConvergence(
            "no critical point of the kernel found left of 0".into(),
        ))
    }

    /// The square-root branch point (R_h, h(R_h), c_h), if it exists.
    pub fn find_r_h(&self) -> Option<BranchPoint> {
        match self.limit {
            Limit::Critical(bp) if bp.r_h.is_finite() => Some(bp),
            _ => None,
        }
    }

    /// Singularity induced by −R_B* on the principal branch (types 2 and 3).
    pub fn find_r_hstar(&self) -> Option<f64> {
        match (self.model.service_type(), self.limit) {
            (ServiceType::Type3, _) => Some(1.0),
            (ServiceType::Type2, Limit::Edge { .. }) => Some(self.z_limit()),
            _ => None,
        }
    }

    /// ψ(s) = B*(s) − 1 + s/λ; along the branch h(z) − z = (λ/λ2)·ψ(s).
    fn psi(&self, s: f64) -> Result<f64> {
        Ok(self.b(s, 0)?[0] - 1.0 + s / self.params.lambda())
    }

    /// h(L) − L at the branch limit L.
    pub fn gap_at_limit(&self) -> Result<Option<f64>> {
        let lam = self.params.lambda();
        let l2 = self.params.lambda2;
        Ok(match self.limit {
            Limit::Critical(bp) => Some((lam / l2) * (bp.h_at_rh - 1.0 + bp.s_c / lam)),
            Limit::Edge { w, .. } if w.is_finite() && self.model.service_type() == ServiceType::Type2 => {
                Some(w - self.z_limit())
            }
            _ => None,
        })
    }

    /// Smallest zero R* > 1 of h(z) − z on the principal branch.
    ///
    /// Along the branch, h(z) − z = (λ/λ2)ψ(s) with z = 1 − s/λ at a zero, so
    /// the search runs over s ∈ [s_lim, 0) where ψ is convex with ψ(0) = 0 and
    /// ψ'(0) = 1/λ − b > 0; ψ(s)/s is then increasing and has at most one zero.
    /// A limit gap within the boundary tolerance returns the limit itself.
    pub fn find_r_star(&self) -> Result<Option<f64>> {
        self.params.require_orbit()?;
        let lam = self.params.lambda();
        let b = self.params.mean_b();
        if self.model.service_type() == ServiceType::Type3 {
            return Ok(None);
        }
        if let Some(gap) = self.gap_at_limit()? {
            let zl = self.z_limit();
            if gap.abs() <= BOUNDARY_TOL * zl {
                return Ok(Some(zl));
            }
            if gap < 0.0 {
                return Ok(None);
            }
        }
        let k = |s: f64| -> Result<f64> {
            if s == 0.0 {
                Ok(1.0 / lam - b)
            } else {
                Ok(self.psi(s)? / s)
            }
        };
        let s_lo = match self.limit {
            Limit::Critical(bp) => bp.s_c,
            Limit::Edge { s, w, .. } if w.is_finite() => s,
            Limit::Edge { s, .. } => {
                // B* → ∞ at the edge, so ψ > 0 close to it
                let mut t = 0.5;
                loop {
                    let cand = s * (1.0 - t);
                    if self.psi(cand)? > 0.0 {
                        break cand;
                    }
                    t *= 0.5;
                    if t < 1e-300 {
                        return Err(Error::NoConvergence("no sign change of h(z) - z before the LST singularity".into()));
                    }
                }
            }
            Limit::Unbounded => {
                let mut cand = -1.0;
                while self.psi(cand)? <= 0.0 {
                    cand *= 2.0;
                    if cand < -1e300 {
                        return Err(Error::NoConvergence("no zero of h(z) - z found".into()));
                    }
                }
                cand
            }
        };
        if k(s_lo)? > 0.0 {
            return Ok(None);
        }
        let s_star = brent(k, s_lo, 0.0, 1e-16, MAX_ITER)?;
        Ok(Some(1.0 - s_star / lam))
    }

    /// Locate all candidate singularities and tag the asymptotic regime.
    pub fn build_profile(&self) -> Result<SingularityProfile> {
        self.params.require_orbit()?;
        if let Some(msg) = &self.ambiguous {
            return Err(Error::AmbiguousProfile(msg.clone()));
        }
        let service_type = self.model.service_type();
        let bp = self.find_r_h();
        let r_hstar = self.find_r_hstar();
        let gap = self.gap_at_limit()?;
        let zl = self.z_limit();
        let boundary_gap = gap.map(|g| g / zl);

        let mut profile = SingularityProfile {
            service_type,
            r_h: bp.map(|b| b.r_h),
            h_at_rh: bp.map(|b| b.h_at_rh),
            c_h: bp.map(|b| b.c_h),
            r_star: None,
            r_hstar,
            case_tag: CaseTag::Type3Dominant,
            r_dominant: 1.0,
            boundary_gap,
        };
        if service_type == ServiceType::Type3 {
            return Ok(profile);
        }
        let r_star = self.find_r_star()?;
        profile.r_star = r_star;
        let on_boundary = boundary_gap.is_some_and(|g| g.abs() <= BOUNDARY_TOL);

        if let Some(b) = bp {
            if on_boundary {
                profile.case_tag = CaseTag::Case3Boundary;
                profile.r_star = Some(b.r_h);
                profile.r_dominant = b.r_h;
            } else if let Some(rs) = r_star {
                profile.case_tag = CaseTag::Case1RetrialRegime;
                profile.r_dominant = rs;
            } else {
                profile.case_tag = CaseTag::Case2PriorityRegime;
                profile.r_dominant = b.r_h;
            }
        } else if let Some(rhs) = r_hstar {
            if on_boundary {
                return Err(Error::AmbiguousProfile(format!(
                    "R* and R_h* coincide at {rhs} (relative gap {:e})",
                    boundary_gap.unwrap_or(0.0)
                )));
            }
            if let Some(rs) = r_star {
                profile.case_tag = CaseTag::Case1RetrialRegime;
                profile.r_dominant = rs;
            } else {
                profile.case_tag = CaseTag::Type2Dominant;
                profile.r_dominant = rhs;
            }
        } else {
            // λ1 = 0 with a type-1 LST: the pole always exists
            let rs = r_star.ok_or_else(|| Error::NoConvergence("expected a zero of h(z) - z".into()))?;
            profile.case_tag = CaseTag::Case1RetrialRegime;
            profile.r_dominant = rs;
        }
        Ok(profile)
    }

    /// Real h(z) on the principal branch, for z up to the branch limit.
    pub fn h_real(&self, z: f64) -> Result<f64> {
        self.h_real_from(z, None)
    }

    /// As [`h_real`](Self::h_real) with an initial guess for the Newton iteration.
    pub fn h_real_from(&self, z: f64, guess: Option<f64>) -> Result<f64> {
        let (l1, l2) = (self.params.lambda1, self.params.lambda2);
        if !z.is_finite() {
            return Err(Error::Domain(format!("z = {z}")));
        }
        if l1 == 0.0 {
            return Ok(self.b(l2 * (1.0 - z), 0)?[0]);
        }
        let s_lim = self.s_limit();
        let zl = self.z_limit();
        if z > zl * (1.0 + 1e-14) {
            return Err(Error::Domain(format!("z = {z} lies beyond the branch limit {zl}")));
        }
        let w_hi = if s_lim.is_finite() {
            1.0 + (l2 * (1.0 - z) - s_lim) / l1
        } else {
            return Err(Error::Domain("unbounded kernel branch with lambda1 > 0".into()));
        };
        let f = |w: f64| -> Result<(f64, f64)> {
            let s = self.s_of(z, w).max(s_lim);
            let b = self.b(s, 1)?;
            Ok((b[0] - w, -l1 * b[1] - 1.0))
        };
        let tol = |w: f64| NEWTON_FTOL * (1.0 + w.abs());
        let (f_hi, _) = f(w_hi)?;
        if f_hi > 0.0 {
            if f_hi <= 1e-10 * (1.0 + w_hi) {
                return Ok(w_hi);
            }
            return Err(Error::Domain(format!("z = {z} lies beyond the branch limit {zl}")));
        }
        let x0 = guess.unwrap_or(0.0).clamp(0.0, w_hi);
        let mut w = rtsafe(f, 0.0, w_hi, x0, tol, MAX_ITER)?;
        // a few more Newton steps: near the branch point |F| is a poor proxy for |w − h|
        for _ in 0..3 {
            let (fw, dfw) = f(w)?;
            if dfw == 0.0 || fw == 0.0 {
                break;
            }
            let next = w - fw / dfw;
            if !(0.0..=w_hi).contains(&next) || (next - w).abs() <= 1e-16 * w.abs() {
                break;
            }
            w = next;
        }
        Ok(w)
    }

    /// h'(z) = −λ2B*'(s)/(1 + λ1B*'(s)) on the real branch.
    pub fn h_prime_real(&self, z: f64) -> Result<f64> {
        let w = self.h_real(z)?;
        let b1 = self.b(self.s_of(z, w), 1)?[1];
        Ok(-self.params.lambda2 * b1 / (1.0 + self.params.lambda1 * b1))
    }

    /// f1(z) = (1 − h(z))/(h(z) − z) on the real axis.
    pub fn f1_real(&self, z: f64) -> Result<f64> {
        if (z - 1.0).abs() < 1e-9 {
            return Ok(self.params.rho2() / (1.0 - self.params.rho()));
        }
        let h = self.h_real(z)?;
        Ok((1.0 - h) / (h - z))
    }

    /// (z, f1(z), dz/ds) at kernel argument s on the principal branch.
    pub fn f1_at_s(&self, s: f64) -> Result<(f64, f64, f64)> {
        let (z, dz) = self.z_of_s(s)?;
        let ll2 = self.params.lambda() / self.params.lambda2;
        // f1 = (1 − B)/((λ/λ2)ψ); both factors vanish at s = 0, so use the
        // moment expansion of the ratio there
        if let Some(m) = self.moments.filter(|_| s.abs() < 1e-4) {
            let num = -m[1] - m[2] * s / 2.0 - m[3] * s * s / 6.0;
            let den = 1.0 / self.params.lambda() + m[1] + m[2] * s / 2.0 + m[3] * s * s / 6.0;
            return Ok((z, num / (ll2 * den), dz));
        }
        if s.abs() < 1e-12 {
            return Ok((z, self.params.rho2() / (1.0 - self.params.rho()), dz));
        }
        let w = self.b(s, 0)?[0];
        Ok((z, (1.0 - w) / (ll2 * self.psi(s)?), dz))
    }

    /// h at complex z by continuation along the ray from 0.
    pub fn h_eval(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 {
            return Ok(Complex64::new(self.h_real(z.re)?, 0.0));
        }
        let zl = self.z_limit();
        if z.norm() >= zl {
            return Err(Error::Domain(format!("|z| = {} is not inside the disk of radius {zl}", z.norm())));
        }
        let w0 = Complex64::new(self.h_real(0.0)?, 0.0);
        let model = &self.model;
        follow_path(
            self.params.lambda1,
            self.params.lambda2,
            |s| {
                let v = model.lst_eval(s, 1)?;
                Ok((v[0], v[1]))
            },
            |t| z * t,
            w0,
        )
    }
}

fn plc_exponent(model: &ServiceModel) -> f64 {
    match model.kind() {
        crate::service::ServiceKind::PowerLawCutoff { p, .. } => *p,
        _ => f64::INFINITY,
    }
}

/// Continue the root of w = B*(λ1(1−w) + λ2(1−z)) along `path(t)`, t ∈ [0, 1],
/// starting from `w0` at `path(0)`. `lst` returns (B*(s), B*'(s)).
///
/// Tangent predictor h' = G_z/(1 − G_w), Newton corrector; the step is halved
/// whenever the corrector fails or lands more than ten step bounds away.
pub fn follow_path<L, P>(l1: f64, l2: f64, lst: L, path: P, w0: Complex64) -> Result<Complex64>
where
    L: Fn(Complex64) -> Result<(Complex64, Complex64)>,
    P: Fn(f64) -> Complex64,
{
    let s_of = |z: Complex64, w: Complex64| (1.0 - w) * l1 + (1.0 - z) * l2;
    let mut t = 0.0;
    let mut w = w0;
    let mut dt: f64 = 1.0 / 16.0;
    let mut failures = 0usize;
    while t < 1.0 {
        dt = dt.min(1.0 - t);
        let z0 = path(t);
        let z1 = path(t + dt);
        let dz = z1 - z0;
        let (_, b1) = lst(s_of(z0, w))?;
        let hp = (-l2 * b1) / (1.0 + l1 * b1);
        let bound = hp.norm() * dz.norm() + 1e-14 * (1.0 + w.norm());
        let mut wn = w + hp * dz;
        let mut converged = false;
        let mut iters = 0;
        for _ in 0..12 {
            iters += 1;
            let s = s_of(z1, wn);
            let Ok((b0, b1)) = lst(s) else { break };
            let f = b0 - wn;
            if f.norm() < NEWTON_FTOL * (1.0 + wn.norm()) {
                converged = true;
                break;
            }
            let df = -l1 * b1 - 1.0;
            if df.norm() == 0.0 {
                break;
            }
            wn -= f / df;
            if !(wn.re.is_finite() && wn.im.is_finite()) {
                break;
            }
        }
        if converged && (wn - w).norm() <= 10.0 * bound {
            t += dt;
            w = wn;
            if iters <= 3 {
                dt = (dt * 2.0).min(0.25);
            }
        } else {
            dt *= 0.5;
            failures += 1;
            if dt < 1e-10 {
                return Err(Error::BranchLoss(format!(
                    "continuation step fell below 1e-10 at t = {t}, z = {z0}"
                )));
            }
            if failures > MAX_ITER * 10 {
                return Err(Error::NoConvergence(format!("path continuation stalled at z = {z0}")));
            }
        }
    }
    Ok(w)
}

// Free-function surface mirroring the methods.

pub fn h_eval(params: &ModelParams, model: &ServiceModel, z: Complex64) -> Result<Complex64> {
    ImplicitMap::new(params, model)?.h_eval(z)
}

pub fn find_r_h(params: &ModelParams, model: &ServiceModel) -> Result<Option<BranchPoint>> {
    Ok(ImplicitMap::new(params, model)?.find_r_h())
}

pub fn find_r_star(params: &ModelParams, model: &ServiceModel) -> Result<Option<f64>> {
    ImplicitMap::new(params, model)?.find_r_star()
}

pub fn find_r_hstar(params: &ModelParams, model: &ServiceModel) -> Result<Option<f64>> {
    Ok(ImplicitMap::new(params, model)?.find_r_hstar())
}

pub fn build_profile(params: &ModelParams, model: &ServiceModel) -> Result<SingularityProfile> {
    ImplicitMap::new(params, model)?.build_profile()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RetrialRate;
    use crate::service::ServiceKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn expo(l1: f64, l2: f64) -> ImplicitMap {
        let m = ServiceModel::exponential(1.0).unwrap();
        let p = ModelParams::new(l1, l2, RetrialRate::Finite(1.0), &m).unwrap();
        ImplicitMap::new(&p, &m).unwrap()
    }

    /// Smaller root of λ1w² − (μ + λ1 + λ2(1−z))w + μ = 0.
    fn quad_root(l1: f64, l2: f64, mu: f64, z: f64) -> f64 {
        let bq = mu + l1 + l2 * (1.0 - z);
        let disc = (bq * bq - 4.0 * l1 * mu).max(0.0);
        2.0 * mu / (bq + disc.sqrt())
    }

    #[test]
    fn h_at_one_and_examples() {
        let m = expo(0.25, 0.25);
        assert_relative_eq!(m.h_real(1.0).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(m.h_real(2.0).unwrap(), 2.0, max_relative = 1e-7);
        let m0 = expo(0.0, 0.5);
        assert_relative_eq!(m0.h_real(0.5).unwrap(), 0.8, max_relative = 1e-15);
    }

    #[test]
    fn r_h_closed_form() {
        let bp = expo(0.25, 0.25).find_r_h().unwrap();
        assert_relative_eq!(bp.r_h, 2.0, max_relative = 1e-10);
        assert_relative_eq!(bp.h_at_rh, 2.0, max_relative = 1e-7);
        assert_relative_eq!(bp.c_h, 0.5 / 0.25f64.powf(0.75), max_relative = 1e-7);
        let bp = expo(0.4, 0.05).find_r_h().unwrap();
        assert_relative_eq!(bp.r_h, 1.0 + (1.0 - 0.4f64.sqrt()).powi(2) / 0.05, max_relative = 1e-10);
    }

    #[test]
    fn characteristic_residuals() {
        let m = expo(0.4, 0.05);
        let bp = m.find_r_h().unwrap();
        let s = m.s_of(bp.r_h, bp.h_at_rh);
        let b = m.b(s, 1).unwrap();
        assert!((b[0] - bp.h_at_rh).abs() < 1e-10);
        assert!((-0.4 * b[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn r_star_examples() {
        assert_relative_eq!(expo(0.1, 0.3).find_r_star().unwrap().unwrap(), 2.5, max_relative = 1e-12);
        assert_eq!(expo(0.4, 0.05).find_r_star().unwrap(), None);
        assert_relative_eq!(expo(0.25, 0.25).find_r_star().unwrap().unwrap(), 2.0, max_relative = 1e-8);
    }

    #[test]
    fn r_star_agrees_with_path_followed_g() {
        // independent check: sign of h(z) − z from the Newton solver around R*
        let m = expo(0.1, 0.3);
        let rs = m.find_r_star().unwrap().unwrap();
        for (z, sign) in [(rs - 1e-3, -1.0), (rs + 1e-3, 1.0)] {
            let g = m.h_real(z).unwrap() - z;
            assert_eq!(g.signum(), sign);
        }
        // Case 2: g stays negative up to R_h
        let m = expo(0.4, 0.05);
        let rh = m.find_r_h().unwrap().r_h;
        for i in 1..=64 {
            let z = 1.0 + (rh - 1.0) * i as f64 / 64.0;
            assert!(m.h_real(z).unwrap() - z < 0.0);
        }
    }

    #[test]
    fn profiles() {
        let p = expo(0.1, 0.3).build_profile().unwrap();
        assert_eq!(p.case_tag, CaseTag::Case1RetrialRegime);
        assert_relative_eq!(p.r_dominant, 2.5, max_relative = 1e-12);
        let p = expo(0.4, 0.05).build_profile().unwrap();
        assert_eq!(p.case_tag, CaseTag::Case2PriorityRegime);
        assert!((p.r_dominant - (1.0 + (1.0 - 0.4f64.sqrt()).powi(2) / 0.05)).abs() < 1e-10);
        let p = expo(0.25, 0.25).build_profile().unwrap();
        assert_eq!(p.case_tag, CaseTag::Case3Boundary);
        assert!((p.r_star.unwrap() - p.r_h.unwrap()).abs() < 1e-8);

        let par = ServiceModel::new(ServiceKind::Pareto { p: 1.5, x0: 1.0 }).unwrap();
        let pp = ModelParams::new(0.1, 0.1, RetrialRate::Finite(1.0), &par).unwrap();
        let prof = build_profile(&pp, &par).unwrap();
        assert_eq!(prof.case_tag, CaseTag::Type3Dominant);
        assert_eq!(prof.r_dominant, 1.0);
        assert_eq!(prof.r_h, None);
        assert_eq!(prof.r_hstar, Some(1.0));
    }

    #[test]
    fn r_hstar_system_check() {
        let plc = ServiceModel::new(ServiceKind::PowerLawCutoff { p: 2.5, r_c: 1.0, x0: 1.0 }).unwrap();
        let p = ModelParams::new(0.05, 0.05, RetrialRate::Finite(1.0), &plc).unwrap();
        let map = ImplicitMap::new(&p, &plc).unwrap();
        let b_edge = plc.lst_real(-1.0, 0).unwrap()[0];
        let gw = -0.05 * plc.lst_real(-1.0, 1).unwrap()[1];
        if gw < 1.0 {
            let r = map.find_r_hstar().unwrap();
            assert_relative_eq!(r, 1.0 + (1.0 + 0.05 * (1.0 - b_edge)) / 0.05, max_relative = 1e-14);
            // the Newton-solved branch reaches s = −R_B* at z = R_h*
            let w = map.h_real(r).unwrap();
            assert!((map.s_of(r, w) + 1.0).abs() < 1e-8);
        } else {
            assert!(map.find_r_hstar().is_none());
            assert!(map.find_r_h().is_some());
        }
    }

    #[test]
    fn type2_dominant_and_exponential_absent() {
        let plc = ServiceModel::new(ServiceKind::PowerLawCutoff { p: 2.5, r_c: 1.0, x0: 1.0 }).unwrap();
        let p = ModelParams::new(0.02, 0.05, RetrialRate::Finite(1.0), &plc).unwrap();
        let prof = build_profile(&p, &plc).unwrap();
        assert_eq!(prof.case_tag, CaseTag::Type2Dominant);
        assert_eq!(prof.r_dominant, prof.r_hstar.unwrap());
        assert!(expo(0.1, 0.3).find_r_hstar().is_none());
    }

    #[test]
    fn h_prime_at_one() {
        for (l1, l2) in [(0.1, 0.3), (0.4, 0.05), (0.25, 0.25)] {
            let m = expo(l1, l2);
            let d = 1e-6;
            let fd = (m.h_real(1.0 + d).unwrap() - m.h_real(1.0 - d).unwrap()) / (2.0 * d);
            let exact = l2 / (1.0 - l1);
            assert!((fd - exact).abs() < 1e-6);
            assert_relative_eq!(m.h_prime_real(1.0).unwrap(), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn complex_h_matches_quadratic() {
        let (l1, l2) = (0.25, 0.25);
        let m = expo(l1, l2);
        for &z in &[Complex64::new(0.5, 0.8), Complex64::new(-1.2, 0.3), Complex64::new(1.7, -0.6)] {
            let w = m.h_eval(z).unwrap();
            let bq = 1.0 + l1 + l2 * (1.0 - z);
            let disc = (bq * bq - 4.0 * l1).sqrt();
            let cands = [(bq - disc) / (2.0 * l1), (bq + disc) / (2.0 * l1)];
            let best = cands.iter().map(|c| (c - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10 * w.norm(), "z={z}: {w} vs {cands:?}");
            // principal root is the one continuing |w| < 1 from z = 0
            assert!((cands[0] - w).norm() < 1e-10 || (z.norm() > 1.0));
        }
    }

    #[test]
    fn non_exponential_complex_path_residual() {
        let m = ServiceModel::new(ServiceKind::GammaShape { k: 2.5, mu: 3.0 }).unwrap();
        let p = ModelParams::new(0.3, 0.2, RetrialRate::Finite(1.0), &m).unwrap();
        let map = ImplicitMap::new(&p, &m).unwrap();
        let z = Complex64::new(0.9, 1.1);
        let w = map.h_eval(z).unwrap();
        let s = (1.0 - w) * 0.3 + (1.0 - z) * 0.2;
        let b = m.lst_eval(s, 0).unwrap()[0];
        assert!((b - w).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exponential_h_matches_closed_form(l1 in 0.01f64..0.6, frac in 0.05f64..0.95, t in 0.0f64..1.0) {
            let l2 = (0.98 - l1) * frac;
            let m = expo(l1, l2);
            let zl = m.z_limit();
            let z = t * zl;
            let w = m.h_real(z).unwrap();
            let exact = quad_root(l1, l2, 1.0, z);
            // within 1e-3 of R_h the double root limits attainable accuracy
            let tol = if zl - z > 1e-3 * zl { 1e-10 } else { 1e-6 };
            prop_assert!((w - exact).abs() <= tol * exact, "{} vs {}", w, exact);
            prop_assert!(w > 0.0 && w <= m.find_r_h().unwrap().h_at_rh * (1.0 + 1e-12));
        }

        #[test]
        fn h_increasing_and_convex(l1 in 0.02f64..0.5, frac in 0.1f64..0.9, mu in 0.5f64..3.0) {
            let m = ServiceModel::new(ServiceKind::Erlang { k: 2, mu }).unwrap();
            let l2 = (0.95 * mu / 2.0 - l1).max(0.01) * frac;
            prop_assume!((l1 + l2) * 2.0 / mu < 0.97);
            let p = ModelParams::new(l1, l2, RetrialRate::Finite(1.0), &m).unwrap();
            let map = ImplicitMap::new(&p, &m).unwrap();
            let zl = map.z_limit();
            let n = 100;
            let step = 0.99 * zl / n as f64;
            let hs: Vec<f64> = (0..=n).map(|i| map.h_real(i as f64 * step).unwrap()).collect();
            for i in 1..n {
                prop_assert!(hs[i + 1] > hs[i]);
                let d2 = (hs[i + 1] - 2.0 * hs[i] + hs[i - 1]) / (step * step);
                prop_assert!(d2 >= -1e-8, "d2 = {}", d2);
            }
        }
    }
}
