use std::fmt;
use std::path::Path;
use std::str::FromStr;

use imlca_core::{MechanismConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::domain::SyntheticDomainSpec;
use crate::error::{ExperimentError, Result};

/// Inclusive range of instance seeds, written `A..B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeedRange {
    pub first: u64,
    pub last: u64,
}

impl SeedRange {
    pub fn new(first: u64, last: u64) -> Result<Self> {
        if first > last {
            return Err(ExperimentError::Config(format!("empty seed range {first}..{last}")));
        }
        Ok(Self { first, last })
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.first..=self.last
    }

    pub fn len(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl FromStr for SeedRange {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ExperimentError::Config(format!("seed range {s:?} is not of the form A..B"));
        match s.split_once("..") {
            Some((a, b)) => {
                let a = a.trim().parse().map_err(|_| bad())?;
                let b = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
                SeedRange::new(a, b)
            }
            None => {
                let a = s.trim().parse().map_err(|_| bad())?;
                SeedRange::new(a, a)
            }
        }
    }
}

impl TryFrom<String> for SeedRange {
    type Error = ExperimentError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SeedRange> for String {
    fn from(r: SeedRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    #[default]
    None,
    Json,
}

impl FromStr for TraceMode {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TraceMode::None),
            "json" => Ok(TraceMode::Json),
            _ => Err(ExperimentError::Config(format!("unknown trace mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mu: f64,
    pub seeds: SeedRange,
    pub variants: Vec<Variant>,
    /// Mixed into every bidder's random stream.
    pub master_seed: u64,
    pub trace: TraceMode,
    pub domain: SyntheticDomainSpec,
    pub mechanism: MechanismConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mu: 0.5,
            seeds: SeedRange { first: 101, last: 150 },
            variants: vec![Variant::Imlca],
            master_seed: 0,
            trace: TraceMode::None,
            domain: SyntheticDomainSpec::default(),
            mechanism: MechanismConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(ExperimentError::Config(format!("mu {} must be nonnegative", self.mu)));
        }
        if self.variants.is_empty() {
            return Err(ExperimentError::Config("no variants selected".into()));
        }
        self.domain.validate()?;
        self.mechanism.validate()?;
        Ok(())
    }
}
