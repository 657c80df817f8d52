//! Core domain types for beta-Laguerre tail problems: ensemble parameters,
//! ordered spectra, tail queries, and the regime validity rules.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The triple (n, p, beta) defining a beta-Laguerre ensemble with p >= n >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsembleParams")]
pub struct EnsembleParams {
    n: u32,
    p: u32,
    beta: f64,
}

#[derive(Deserialize)]
struct RawEnsembleParams {
    n: u32,
    p: u32,
    beta: f64,
}

impl TryFrom<RawEnsembleParams> for EnsembleParams {
    type Error = String;
    fn try_from(raw: RawEnsembleParams) -> std::result::Result<Self, String> {
        EnsembleParams::new(raw.n, raw.p, raw.beta).map_err(|e| e.to_string())
    }
}

impl EnsembleParams {
    pub fn new(n: u32, p: u32, beta: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Validation("n must be at least 1".into()));
        }
        if p < n {
            return Err(Error::Validation(format!("p >= n is required, got n={n}, p={p}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Validation(format!("beta must be a positive real, got {beta}")));
        }
        Ok(Self { n, p, beta })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Aspect ratio p/n as a real, at least 1.
    pub fn gamma(&self) -> f64 {
        f64::from(self.p) / f64::from(self.n)
    }
}

/// Strictly decreasing positive eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Build from an unsorted list: sorts descending, rejects nonpositive,
    /// non-finite, or duplicated values (ties have probability zero; equality
    /// surfaces eigensolver bugs rather than being perturbed away).
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("a spectrum needs at least one eigenvalue".into()));
        }
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite eigenvalue {v}")));
            }
            if v <= 0.0 {
                return Err(Error::Numerical(format!("nonpositive eigenvalue {v}")));
            }
        }
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for w in values.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Numerical(format!("duplicated eigenvalue {}", w[0])));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest eigenvalue.
    pub fn max(&self) -> f64 {
        self.values[0]
    }

    /// Smallest eigenvalue.
    pub fn min(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Which extreme eigenvalue a query targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    /// P(largest eigenvalue > p * threshold)
    Max,
    /// P(smallest eigenvalue < p * threshold)
    Min,
}

/// A tail-probability query: the side and the threshold x (max side,
/// P(lambda_(1) > p x)) or y (min side, P(lambda_(n) < p y)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTailQuery")]
pub struct TailQuery {
    pub side: TailSide,
    pub threshold: f64,
}

#[derive(Deserialize)]
struct RawTailQuery {
    side: TailSide,
    threshold: f64,
}

impl TryFrom<RawTailQuery> for TailQuery {
    type Error = String;
    fn try_from(raw: RawTailQuery) -> std::result::Result<Self, String> {
        TailQuery::new(raw.side, raw.threshold).map_err(|e| e.to_string())
    }
}

impl TailQuery {
    pub fn new(side: TailSide, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(Error::Validation(format!("threshold must be a positive real, got {threshold}")));
        }
        Ok(Self { side, threshold })
    }

    pub fn max(threshold: f64) -> Result<Self> {
        Self::new(TailSide::Max, threshold)
    }

    pub fn min(threshold: f64) -> Result<Self> {
        Self::new(TailSide::Min, threshold)
    }
}

/// Asymptotic regime declared by the caller. The regimes cannot be inferred
/// from a single (n, p), so explicitness beats heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// p/n large: max-side queries need x > beta; min-side 0 < y < beta.
    POverNInfty,
    /// p/n near a finite gamma >= 1: max-side queries need x > x_upper/gamma,
    /// where x_upper = beta (1 + sqrt(1/gamma))^2 is the bulk upper edge.
    GammaFinite,
}

/// Deterministic, total validity check of a query threshold against the
/// declared regime. Returns a structured diagnostic naming the violated
/// bound; never errors.
pub fn validate(params: &EnsembleParams, query: &TailQuery, regime: Regime) -> std::result::Result<(), String> {
    let beta = params.beta();
    match (query.side, regime) {
        (TailSide::Max, Regime::POverNInfty) => {
            if query.threshold > beta {
                Ok(())
            } else {
                Err(format!(
                    "max-side threshold x = {} must exceed beta = {beta} in the p/n -> infinity regime",
                    query.threshold
                ))
            }
        }
        (TailSide::Max, Regime::GammaFinite) => {
            let gamma = params.gamma();
            let x_upper = beta * (1.0 + (1.0 / gamma).sqrt()).powi(2);
            let bound = x_upper / gamma;
            if query.threshold > bound {
                Ok(())
            } else {
                Err(format!(
                    "max-side threshold x = {} must exceed x_upper/gamma = {bound} (x_upper = {x_upper}, gamma = {gamma})",
                    query.threshold
                ))
            }
        }
        (TailSide::Min, Regime::POverNInfty) => {
            if query.threshold < beta {
                Ok(())
            } else {
                Err(format!(
                    "min-side threshold y = {} must lie strictly below beta = {beta}",
                    query.threshold
                ))
            }
        }
        (TailSide::Min, Regime::GammaFinite) => Err(
            "min-side queries are supported only in the p/n -> infinity regime".into(),
        ),
    }
}
