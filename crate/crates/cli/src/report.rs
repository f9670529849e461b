//! The JSON report written by `check`.

use serde::{Deserialize, Serialize};
use viabilitykit_core::simulate::EmpiricalReport;
use viabilitykit_core::verify::{
    Assumption3Report, Check, CriticalSetEstimate, FinalVerdict, FphiCheck, NagumoReport, PrReport,
    StandingReport, StarConsistency,
};

use crate::scenario::{BoxSpec, CheckName, Tolerances};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    pub checks: Vec<CheckName>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a3: Option<Assumption3Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pr_heuristic: Option<PrReport>,
}

/// RK4 against a closed-form solution at step `h` and `h/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticComparison {
    pub x0: Vec<f64>,
    pub selection: String,
    pub phi: Vec<String>,
    pub h: f64,
    pub deviation_h: f64,
    pub deviation_half_h: f64,
    /// `deviation_h / deviation_half_h`; absent when both are at rounding level.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    /// Seconds since the Unix epoch. The only field that varies between
    /// identical runs.
    pub timestamp: u64,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standing: Option<StandingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nagumo: Option<NagumoReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_set: Option<CriticalSetEstimate>,
    pub assumptions: Assumptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub star_consistency: Option<StarConsistency>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fphi: Vec<FphiCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub analytic: Vec<AnalyticComparison>,
    pub verdict: FinalVerdict,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// The report with the timestamp zeroed, for comparisons.
    pub fn without_timestamp(&self) -> Report {
        Report {
            timestamp: 0,
            ..self.clone()
        }
    }
}

pub fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
