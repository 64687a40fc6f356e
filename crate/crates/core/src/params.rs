//! Arrival/retrial rates and derived loads.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::service::ServiceModel;

/// Retrial rate ν; `Infinite` is the ordinary priority queue (λ/ν = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RetrialRate {
    Finite(f64),
    Infinite,
}

impl RetrialRate {
    pub fn is_infinite(&self) -> bool {
        matches!(self, RetrialRate::Infinite)
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            RetrialRate::Finite(v) => *v,
            RetrialRate::Infinite => f64::INFINITY,
        }
    }

    /// x/ν, exactly zero when ν is infinite.
    pub fn ratio(&self, x: f64) -> f64 {
        match self {
            RetrialRate::Finite(v) => x / v,
            RetrialRate::Infinite => 0.0,
        }
    }
}

impl Serialize for RetrialRate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RetrialRate::Finite(v) => s.serialize_f64(*v),
            RetrialRate::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for RetrialRate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_infinite() && v > 0.0 => Ok(RetrialRate::Infinite),
            Raw::Num(v) if v > 0.0 && v.is_finite() => Ok(RetrialRate::Finite(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("retrial rate must be positive, got {v}"))),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(RetrialRate::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("retrial rate must be a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Rates of the two-class priority retrial queue together with the mean
/// service time of the model they were validated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: RetrialRate,
    mean_b: f64,
}

#[derive(Serialize)]
struct ParamsEcho {
    lambda1: f64,
    lambda2: f64,
    nu: RetrialRate,
    lambda: f64,
    rho1: f64,
    rho2: f64,
    rho: f64,
}

impl Serialize for ModelParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsEcho {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            nu: self.nu,
            lambda: self.lambda(),
            rho1: self.rho1(),
            rho2: self.rho2(),
            rho: self.rho(),
        }
        .serialize(s)
    }
}

impl ModelParams {
    /// Validates rates and the stability condition ρ < 1.
    pub fn new(lambda1: f64, lambda2: f64, nu: RetrialRate, model: &ServiceModel) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if let RetrialRate::Finite(v) = nu {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("nu must be positive, got {v}")));
            }
        }
        let p = Self {
            lambda1,
            lambda2,
            nu,
            mean_b: model.mean_b(),
        };
        if !(p.rho() < 1.0) {
            return Err(Error::Unstable { rho: p.rho() });
        }
        Ok(p)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda1 + self.lambda2
    }
    pub fn mean_b(&self) -> f64 {
        self.mean_b
    }
    pub fn rho1(&self) -> f64 {
        self.lambda1 * self.mean_b
    }
    pub fn rho2(&self) -> f64 {
        self.lambda2 * self.mean_b
    }
    pub fn rho(&self) -> f64 {
        self.lambda() * self.mean_b
    }
    /// λ/ν (zero for ν = ∞).
    pub fn lambda_over_nu(&self) -> f64 {
        self.nu.ratio(self.lambda())
    }

    /// Orbit asymptotics need class-2 traffic.
    pub fn require_orbit(&self) -> Result<()> {
        if self.lambda2 > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("lambda2 must be > 0 for orbit asymptotics (the orbit is empty)".into()))
        }
    }
}
