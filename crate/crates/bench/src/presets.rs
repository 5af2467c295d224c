//! Built-in experiment sets for the tables and figures.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::output;
use crate::runner::{run_batch, RunReport};
use crate::studies::{run_rratio_sweep, run_table2, RRatioConfig, RRatioPoint, Table2Config, Table2Row};

pub const PRESET_NAMES: [&str; 10] = [
    "table1", "table2", "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8",
];

pub fn preset_source(name: &str) -> Result<&'static str> {
    Ok(match name {
        "table1" => include_str!("../presets/table1.toml"),
        "table2" => include_str!("../presets/table2.toml"),
        "fig1" => include_str!("../presets/fig1.toml"),
        "fig2" => include_str!("../presets/fig2.toml"),
        "fig3" => include_str!("../presets/fig3.toml"),
        "fig4" => include_str!("../presets/fig4.toml"),
        "fig5" => include_str!("../presets/fig5.toml"),
        "fig6" => include_str!("../presets/fig6.toml"),
        "fig7" => include_str!("../presets/fig7.toml"),
        "fig8" => include_str!("../presets/fig8.toml"),
        other => return Err(BenchError::UnknownPreset(other.to_string())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetFile {
    pub description: String,
    #[serde(default)]
    pub experiment: Vec<ExperimentConfig>,
    #[serde(default)]
    pub table2: Option<Table2Config>,
    #[serde(default)]
    pub rratio: Option<RRatioConfig>,
}

/// Command-line overrides applied to every run of a preset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub scale: Option<f64>,
    pub seed: Option<u64>,
}

impl PresetFile {
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let p: PresetFile = toml::from_str(text).map_err(|e| BenchError::Parse {
            path: PathBuf::from(format!("{name}.toml")),
            message: e.to_string(),
        })?;
        for e in &p.experiment {
            e.validate()?;
        }
        Ok(p)
    }

    pub fn load(name: &str) -> Result<Self> {
        Self::parse(name, preset_source(name)?)
    }

    pub fn apply(mut self, o: Overrides) -> Result<Self> {
        if let Some(s) = o.scale {
            self.experiment = self
                .experiment
                .iter()
                .map(|e| e.scaled(s))
                .collect::<Result<_>>()?;
            if let Some(t) = &mut self.table2 {
                t.sesop_n = crate::config::scale_size(t.sesop_n, s, "table2.sesop_n")?;
            }
        }
        if let Some(seed) = o.seed {
            for e in &mut self.experiment {
                e.seed = seed;
            }
            if let Some(t) = &mut self.table2 {
                t.seed = seed;
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Default)]
pub struct PresetOutcome {
    pub reports: Vec<RunReport>,
    pub table2: Vec<Table2Row>,
    pub rratio: Vec<RRatioPoint>,
    pub files: Vec<PathBuf>,
}

/// Runs every part of a preset and writes its files under `out/<name>`.
pub fn run_preset(name: &str, o: Overrides, out: &Path, workers: usize) -> Result<PresetOutcome> {
    let preset = PresetFile::load(name)?.apply(o)?;
    let dir = out.join(name);
    let mut outcome = PresetOutcome::default();
    if !preset.experiment.is_empty() {
        outcome.reports = run_batch(&preset.experiment, workers)
            .into_iter()
            .collect::<Result<_>>()?;
        outcome.files = output::emit_plotdata(&dir, &outcome.reports)?;
    }
    if let Some(t) = &preset.table2 {
        outcome.table2 = run_table2(t, workers)?;
        outcome.files.push(output::write_table2(&dir, &outcome.table2)?);
    }
    if let Some(r) = &preset.rratio {
        outcome.rratio = run_rratio_sweep(r)?;
        outcome.files.push(output::write_rratio(&dir, &outcome.rratio)?);
    }
    Ok(outcome)
}
