use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::refine::RefineReport;
use crate::signal::PathSet;

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "periodogram")]
    Periodogram,
    #[serde(rename = "cnn")]
    Cnn,
    #[serde(rename = "cnn+gn")]
    CnnGn,
    #[serde(rename = "gn-oracle-init")]
    GnOracleInit,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Periodogram,
        Method::Cnn,
        Method::CnnGn,
        Method::GnOracleInit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Periodogram => "periodogram",
            Method::Cnn => "cnn",
            Method::CnnGn => "cnn+gn",
            Method::GnOracleInit => "gn-oracle-init",
        }
    }

    pub fn needs_weights(&self) -> bool {
        matches!(self, Method::Cnn | Method::CnnGn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub refine: Option<RefineReport>,
    /// The estimator found fewer components than requested.
    pub shortfall: bool,
}

/// Estimated model order and path parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub paths: PathSet,
    pub method: Method,
    /// Seconds spent producing this estimate.
    pub wall_time: f64,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub fn new(paths: PathSet, method: Method) -> Self {
        Self {
            paths,
            method,
            wall_time: 0.0,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn p_hat(&self) -> usize {
        self.paths.len()
    }
}
