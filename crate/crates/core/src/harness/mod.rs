//! Named, seeded experiments with CSV tables and a JSON summary.

mod config;
mod experiments;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::ExperimentConfig;
pub use experiments::run;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PlancherelCheck,
    DecompVerify,
    AtomsumOracle,
    #[serde(rename = "scaling-N")]
    ScalingN,
    ScalingLambda,
    Levelset,
    WaveletRecon,
    CoeffDecay,
    RoughDecay,
    HormanderDecay,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::PlancherelCheck,
        Experiment::DecompVerify,
        Experiment::AtomsumOracle,
        Experiment::ScalingN,
        Experiment::ScalingLambda,
        Experiment::Levelset,
        Experiment::WaveletRecon,
        Experiment::CoeffDecay,
        Experiment::RoughDecay,
        Experiment::HormanderDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PlancherelCheck => "plancherel-check",
            Experiment::DecompVerify => "decomp-verify",
            Experiment::AtomsumOracle => "atomsum-oracle",
            Experiment::ScalingN => "scaling-N",
            Experiment::ScalingLambda => "scaling-lambda",
            Experiment::Levelset => "levelset",
            Experiment::WaveletRecon => "wavelet-recon",
            Experiment::CoeffDecay => "coeff-decay",
            Experiment::RoughDecay => "rough-decay",
            Experiment::HormanderDecay => "hormander-decay",
        }
    }

    /// What the experiment exercises, recorded in the JSON summary.
    pub fn traceability(self) -> &'static str {
        match self {
            Experiment::PlancherelCheck => "linear multiplier baseline: the L2 operator norm equals the sup of the symbol",
            Experiment::DecompVerify => {
                "lattice projections, columns and the m-part column split with its projection and column-size bounds"
            }
            Experiment::AtomsumOracle => "atom-sum evaluation of a finite multiplier against dense symbol evaluation",
            Experiment::ScalingN => "growth of the operator norm of an N-term atom sum against the N^((m-1)/2m) envelope",
            Experiment::ScalingLambda => "growth of the operator norm with atom level against the 2^(lambda m n/2) factor",
            Experiment::Levelset => "dyadic level-set partitions of coefficients and their cardinality bounds",
            Experiment::WaveletRecon => "vanishing moments, orthonormality and reconstruction of product wavelets",
            Experiment::CoeffDecay => "wavelet coefficient decay of a smooth symbol across levels",
            Experiment::RoughDecay => {
                "dyadic pieces of a rough homogeneous kernel: annulus support, coefficient shells, decay in mu, band counting"
            }
            Experiment::HormanderDecay => "Littlewood-Paley slices of a Hormander-type symbol and their coefficient decay",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(name: &str, measured: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
        };
        Self { name: name.to_string(), measured, threshold, relation, pass }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub pass: bool,
    pub seed: u64,
    pub wall_clock_s: f64,
    pub traceability: &'static str,
    pub checks: Vec<CheckRecord>,
    /// Fit summaries and other headline numbers (slope, residual, ratio).
    pub metrics: BTreeMap<String, f64>,
    /// File name and CSV contents.
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

impl ExperimentResult {
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Writes every table plus `<experiment>.json` into `dir`.
pub fn emit(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, csv) in &result.tables {
        let p = dir.join(name);
        std::fs::write(&p, csv)?;
        written.push(p);
    }
    let p = dir.join(format!("{}.json", result.experiment));
    std::fs::write(&p, result.summary_json() + "\n")?;
    written.push(p);
    Ok(written)
}
