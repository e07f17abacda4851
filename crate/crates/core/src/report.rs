//! Pass/fail records shared by the verification suites.

use serde::{Deserialize, Serialize};

use crate::complex::MapChain;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    pub fn pass(name: impl Into<String>) -> Check {
        Check { name: name.into(), passed: true, witness: None }
    }
    pub fn fail(name: impl Into<String>, witness: impl Into<String>) -> Check {
        Check { name: name.into(), passed: false, witness: Some(witness.into()) }
    }
    pub fn from_bool(name: impl Into<String>, ok: bool, witness: impl FnOnce() -> String) -> Check {
        if ok {
            Check::pass(name)
        } else {
            Check::fail(name, witness())
        }
    }
    /// Passes iff the chain is zero; the witness is its first nonzero entry.
    pub fn zero_chain(name: impl Into<String>, c: &MapChain) -> Check {
        match c.first_nonzero() {
            None => Check::pass(name),
            Some((m, i, j, v)) => Check::fail(name, format!("component {m} entry ({i},{j}) = {v}")),
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
