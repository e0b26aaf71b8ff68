//! Named `K_s(z)` evaluators selectable at run time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::k_oracle;
use crate::quadrature::QuadratureSpec;
use crate::series::{
    k_mcdonald, k_series_m10_regularized, k_series_m9, SeriesApproximation, TruncationPolicy,
    ORDER_POLE_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RAW_M9")]
    RawM9,
    #[serde(rename = "REARRANGED")]
    Rearranged,
    #[serde(rename = "M10_REG")]
    M10Reg,
    #[serde(rename = "ORACLE")]
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::RawM9 => "RAW_M9",
            Method::Rearranged => "REARRANGED",
            Method::M10Reg => "M10_REG",
            Method::Oracle => "ORACLE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of one evaluator call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub terms: usize,
    pub converged: bool,
    pub diverging: bool,
}

impl From<SeriesApproximation> for Evaluation {
    fn from(a: SeriesApproximation) -> Self {
        Self {
            value: a.value,
            terms: a.terms_used,
            converged: a.converged,
            diverging: a.diverging,
        }
    }
}

pub trait KEvaluator: Send + Sync {
    /// Name used on the command line.
    fn name(&self) -> &'static str;
    fn method(&self) -> Method;
    fn evaluate(&self, s: f64, z: f64, policy: TruncationPolicy) -> Result<Evaluation>;
}

/// Series evaluators take `K_{-s} = K_s` before dispatching.
fn reduced_order(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::domain(format!("order must be finite, got {s}")));
    }
    if s.abs() < ORDER_POLE_THRESHOLD {
        return Err(Error::domain(
            "order s = 0 hits the pole of Γ(s); K_0 is not representable by this series",
        ));
    }
    Ok(s.abs())
}

struct Rearranged;

impl KEvaluator for Rearranged {
    fn name(&self) -> &'static str {
        "rearranged"
    }
    fn method(&self) -> Method {
        Method::Rearranged
    }
    fn evaluate(&self, s: f64, z: f64, policy: TruncationPolicy) -> Result<Evaluation> {
        k_mcdonald(s, z, policy).map(Evaluation::from)
    }
}

struct RawM9;

impl KEvaluator for RawM9 {
    fn name(&self) -> &'static str {
        "m9"
    }
    fn method(&self) -> Method {
        Method::RawM9
    }
    fn evaluate(&self, s: f64, z: f64, policy: TruncationPolicy) -> Result<Evaluation> {
        k_series_m9(reduced_order(s)?, z, policy).map(Evaluation::from)
    }
}

struct M10Regularized;

impl KEvaluator for M10Regularized {
    fn name(&self) -> &'static str {
        "m10"
    }
    fn method(&self) -> Method {
        Method::M10Reg
    }
    fn evaluate(&self, s: f64, z: f64, policy: TruncationPolicy) -> Result<Evaluation> {
        k_series_m10_regularized(reduced_order(s)?, z, policy).map(Evaluation::from)
    }
}

struct Oracle {
    spec: QuadratureSpec,
}

impl KEvaluator for Oracle {
    fn name(&self) -> &'static str {
        "oracle"
    }
    fn method(&self) -> Method {
        Method::Oracle
    }
    fn evaluate(&self, s: f64, z: f64, _policy: TruncationPolicy) -> Result<Evaluation> {
        Ok(Evaluation {
            value: k_oracle(s, z, &self.spec)?,
            terms: 0,
            converged: true,
            diverging: false,
        })
    }
}

/// All evaluators, canonical one first.
pub fn evaluator_registry() -> Vec<Box<dyn KEvaluator>> {
    vec![
        Box::new(Rearranged),
        Box::new(RawM9),
        Box::new(M10Regularized),
        Box::new(Oracle {
            spec: QuadratureSpec::default(),
        }),
    ]
}

pub fn find_evaluator(name: &str) -> Option<Box<dyn KEvaluator>> {
    evaluator_registry().into_iter().find(|e| e.name() == name)
}

/// Command-line names of all registered evaluators.
pub fn evaluator_names() -> Vec<&'static str> {
    evaluator_registry().iter().map(|e| e.name()).collect()
}
