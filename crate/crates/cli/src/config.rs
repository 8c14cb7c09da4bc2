//! Job configuration: every subcommand lowers its flags into a [`JobConfig`],
//! which serializes to and from JSON (`bjdm run --config job.json` replays
//! one) and is embedded in output manifests.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Sample,
    Convergence,
    Significance,
    Mine,
    Gen,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Trans,
    Seq,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "trans" => Ok(Format::Trans),
            "seq" => Ok(Format::Seq),
            other => Err(format!("unknown format '{other}' (expected trans|seq)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samplers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_swaps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_multiplier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub check_invariants: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_transactions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_items: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_avg_length: Option<f64>,
}
