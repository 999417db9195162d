use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How much feedback the model receives and whether the loop iterates.
///
/// | # | name         | tests | SBFL | iterative |
/// |---|--------------|-------|------|-----------|
/// | 1 | `standalone` |       |      |           |
/// | 2 | `tests`      | yes   |      |           |
/// | 3 | `tests-sbfl` | yes   | yes  |           |
/// | 4 | `cot-tests`  | yes   |      | yes       |
/// | 5 | `cot-sbfl`   | yes   | yes  | yes       |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Scenario {
    Standalone,
    Tests,
    TestsSbfl,
    CotTests,
    #[default]
    CotSbfl,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::Standalone, Scenario::Tests, Scenario::TestsSbfl, Scenario::CotTests, Scenario::CotSbfl];

    pub fn number(self) -> u8 {
        match self {
            Scenario::Standalone => 1,
            Scenario::Tests => 2,
            Scenario::TestsSbfl => 3,
            Scenario::CotTests => 4,
            Scenario::CotSbfl => 5,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|s| s.number() == n)
            .ok_or_else(|| Error::InvalidInput(format!("scenario must be 1..=5, got {n}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Standalone => "standalone",
            Scenario::Tests => "tests",
            Scenario::TestsSbfl => "tests-sbfl",
            Scenario::CotTests => "cot-tests",
            Scenario::CotSbfl => "cot-sbfl",
        }
    }

    pub fn uses_tests(self) -> bool {
        self != Scenario::Standalone
    }

    pub fn uses_sbfl(self) -> bool {
        matches!(self, Scenario::TestsSbfl | Scenario::CotSbfl)
    }

    /// Scenarios 4 and 5 loop with memory; the others make one call.
    pub fn iterative(self) -> bool {
        matches!(self, Scenario::CotTests | Scenario::CotSbfl)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<u8>() {
            return Scenario::from_number(n);
        }
        let lower = s.to_ascii_lowercase();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == lower)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario `{s}`")))
    }
}

impl TryFrom<u8> for Scenario {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        Scenario::from_number(n)
    }
}

impl From<Scenario> for u8 {
    fn from(s: Scenario) -> u8 {
        s.number()
    }
}
