use std::fs;
use std::path::PathBuf;

use anharmonic_cs::ModelKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::output::CliError;

#[derive(Debug, Parser)]
#[command(name = "ahcs", version, about = "Coherent states of anharmonic oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy levels of the model.
    Spectrum(Flags),
    /// Coefficients of the coherent state at (ρ, Θ).
    State(Flags),
    /// Evolve a state for `--time` and compare with the relabeled state.
    Evolve(Flags),
    /// Run a verification suite and report pass/fail per check.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        flags: Flags,
    },
    /// Reconstruct a symmetric well from its period function.
    Invert(Flags),
    /// Sample the classical orbit through (ρ, Θ).
    Trajectory(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identity,
    Uncertainty,
    Evolution,
    Bohr,
    Recurrence,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identity => "identity",
            Suite::Uncertainty => "uncertainty",
            Suite::Evolution => "evolution",
            Suite::Bohr => "bohr",
            Suite::Recurrence => "recurrence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Args)]
pub struct Flags {
    /// JSON file holding any of the options; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

/// Every option of every command. Unset fields fall back to per-command
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// diagonal or quartic.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub hbar: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Number of energy levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Basis size for `spectrum`, truncation size for states.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Pass/fail threshold, or the convergence tolerance for `spectrum`.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Cesàro lengths in periods, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cesaro: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub time: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Top of the energy range for `invert`.
    #[arg(long, allow_negative_numbers = true)]
    pub h_max: Option<f64>,
    /// Nominal periods scanned by the recurrence suite.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Spectrum JSON written by `spectrum`, used instead of solving.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
}

impl Flags {
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let merged = base.overlay(self.run)?;
        merged.validate()?;
        Ok(merged)
    }
}

impl RunConfig {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: RunConfig) -> Result<RunConfig, CliError> {
        let internal = |e: serde_json::Error| CliError::Validation(e.to_string());
        let mut base = serde_json::to_value(self).map_err(internal)?;
        let Value::Object(top) = serde_json::to_value(top).map_err(internal)? else {
            unreachable!("config serializes to an object")
        };
        let fields = base.as_object_mut().expect("config serializes to an object");
        fields.extend(top.into_iter().filter(|(_, v)| !v.is_null()));
        serde_json::from_value(base).map_err(internal)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        for (name, v) in [("rho", self.rho), ("t-end", self.t_end)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("--{name} must be finite and ≥ 0, got {v}"));
                }
            }
        }
        for (name, v) in [("theta", self.theta), ("time", self.time)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return bad(format!("--{name} must be finite, got {v}"));
                }
            }
        }
        for (name, v) in [("tol", self.tol), ("h-max", self.h_max)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("--{name} must be positive, got {v}"));
                }
            }
        }
        for (name, v) in [("levels", self.levels), ("dim", self.dim), ("steps", self.steps), ("periods", self.periods)] {
            if v == Some(0) {
                return bad(format!("--{name} must be ≥ 1"));
            }
        }
        if let Some(lengths) = &self.cesaro {
            if lengths.is_empty() || lengths.contains(&0) {
                return bad("--cesaro needs one or more lengths ≥ 1".into());
            }
        }
        Ok(())
    }
}
