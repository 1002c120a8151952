//! Run settings from a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use varcast::{Error, Result};

/// Every field is optional; flags override file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub window: Option<usize>,
    pub windows: Option<Vec<usize>>,
    pub lag: Option<usize>,
    pub ar_lag: Option<usize>,
    pub lambda: Option<String>,
    pub models: Option<Vec<String>>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub seed: Option<u64>,
    pub refit_policy: Option<String>,
    pub score_target: Option<String>,
    pub clamp_nonneg: Option<bool>,
    pub intervals: Option<bool>,
    pub freeze_lambda: Option<bool>,
    pub target: Option<String>,
    pub top: Option<usize>,
    pub date_col: Option<String>,
    pub id_col: Option<String>,
    pub value_col: Option<String>,
    pub csv: Option<bool>,
    pub json: Option<bool>,
    pub svg: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => {
                RunConfig { $($f: flags.$f.or(self.$f)),* }
            };
        }
        pick!(
            input, out, window, windows, lag, ar_lag, lambda, models, from, to, seed, refit_policy, score_target,
            clamp_nonneg, intervals, freeze_lambda, target, top, date_col, id_col, value_col, csv, json, svg
        )
    }

    pub fn require_input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--input is required".into()))
    }

    pub fn require_out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--out is required".into()))
    }
}
