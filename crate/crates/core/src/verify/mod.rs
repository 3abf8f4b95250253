//! Exhaustive checkers for strong security, possibilistic and
//! probabilistic fault-tolerant noninterference, plus the cross-checks
//! relating them.

mod balance;
mod pni;
mod poni;
mod space;
mod ss;
mod theorems;

use std::collections::BTreeMap;

use serde::Serialize;

pub use balance::{check_timing_balance, region_path_lengths, BalanceReport};
pub use pni::{check_pni, pni_system, PniWitness};
pub use poni::{check_poni, poni_system, PoniWitness};
pub use space::{probe_scope, InitialSpace};
pub use ss::{check_strong_security, strong_security, SsFailure, SsWitness};
pub use theorems::{
    adversary_from_witness, check_agreement, check_ss_implies_poni, environment_family, AgreementReport,
    ImplicationReport,
};

pub const DEFAULT_BUDGET: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("resource budget exceeded: {needed} > {budget} ({what})")]
    Budget { what: String, needed: u64, budget: u64 },
    #[error("{0}")]
    Config(String),
}

/// Bounds for a check. The word width comes from the machine configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckConfig {
    /// Names of the faulty locations an attacker may flip; `None` means all.
    pub scope: Option<Vec<String>>,
    pub depth: usize,
    /// Ceiling on explored states times enumerated fault sets.
    pub budget: u64,
    /// When set, initial words range over `0..bound` instead of the full word.
    pub value_bound: Option<u64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { scope: None, depth: 4, budget: DEFAULT_BUDGET, value_bound: None }
    }
}

impl CheckConfig {
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_scope(mut self, scope: Vec<String>) -> Self {
        self.scope = Some(scope);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "secure-up-to-bound")]
    Secure,
    #[serde(rename = "violation")]
    Violation,
}

/// Printable counterexample: two low-equal initial states and what tells
/// them apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub initial_low: BTreeMap<String, u64>,
    pub initial_high_a: BTreeMap<String, u64>,
    pub initial_high_b: BTreeMap<String, u64>,
    pub trace: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub checker: String,
    pub status: Status,
    pub bound: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn secure(checker: &str, bound: usize) -> Self {
        Verdict { checker: checker.into(), status: Status::Secure, bound, witness: None }
    }

    pub fn is_secure(&self) -> bool {
        self.status == Status::Secure
    }

    /// JSON with sorted keys.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("verdict serializes");
        serde_json::to_string_pretty(&v).expect("value prints")
    }
}

fn budget_check(what: &str, needed: u64, budget: u64) -> Result<(), VerifyError> {
    if needed > budget {
        Err(VerifyError::Budget { what: what.into(), needed, budget })
    } else {
        Ok(())
    }
}
