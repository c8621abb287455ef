//! Experiment configuration file (JSON). Unknown keys are rejected at every
//! level so typos fail loudly instead of silently falling back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dtwa_core::analysis::{default_fit_start, DEFAULT_THRESHOLD};
use dtwa_core::dtwa::IntegratorControl;
use dtwa_core::observables::uniform_times;
use dtwa_core::oracle_ed::KrylovControl;
use dtwa_core::{Axis, Component, CorrelationRequest, Lattice, Model, ObservableRequest};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-text label; not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub model: Model,
    pub lattice: LatticeSpec,
    /// Single exponent; required by every subcommand except `crossover`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Explicit exponent list for `crossover`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(rename = "J", default = "unit_coupling")]
    pub coupling: f64,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: u64,
    #[serde(default)]
    pub master_seed: u64,
    pub sample_times: SampleTimes,
    #[serde(default)]
    pub observables: ObservablesSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub integrator: IntegratorControl,
    #[serde(default)]
    pub krylov: KrylovControl,
    /// Result source for `analyze-lightcone` and `crossover`.
    #[serde(default)]
    pub source: Source,
    /// Exact reference for `compare`; defaults to the oracle matching `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn unit_coupling() -> f64 {
    1.0
}

fn default_trajectories() -> u64 {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
}

/// Every run starts from the `+x` product state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    PlusXQuench,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    #[default]
    Dtwa,
    OracleIsing,
    OracleEd,
}

/// Either a uniform grid `{t_max, count}` or explicit `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleTimes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSpec {
    #[serde(default = "yes")]
    pub collective_x: bool,
    #[serde(default = "center_correlation")]
    pub correlations: Vec<CorrelationSpec>,
}

fn yes() -> bool {
    true
}

fn center_correlation() -> Vec<CorrelationSpec> {
    vec![CorrelationSpec::default()]
}

impl Default for ObservablesSpec {
    fn default() -> Self {
        ObservablesSpec {
            collective_x: true,
            correlations: center_correlation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    /// 1-based `[x, y]`; the lattice center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<[usize; 2]>,
    #[serde(default = "y_axis")]
    pub axis: Axis,
    #[serde(default = "yy")]
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
}

fn y_axis() -> Axis {
    Axis::Y
}

fn yy() -> Vec<Component> {
    vec![Component::Yy]
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        CorrelationSpec {
            reference: None,
            axis: Axis::Y,
            components: yy(),
            j_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Smallest separation in the fit; 1 in 1D and 2 in 2D when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_min: Option<usize>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_thresholds() -> Vec<f64> {
    vec![DEFAULT_THRESHOLD]
}

fn default_resamples() -> usize {
    200
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            thresholds: default_thresholds(),
            j_min: None,
            bootstrap_resamples: default_resamples(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: String| Err(CliError::Config(format!("`{key}`: {why}")));
        if self.n_trajectories == 0 {
            return bad("n_trajectories", "must be at least 1".into());
        }
        if !self.coupling.is_finite() {
            return bad("J", "must be finite".into());
        }
        if self.analysis.thresholds.is_empty()
            || self
                .analysis
                .thresholds
                .iter()
                .any(|t| !(t.is_finite() && *t > 0.0))
        {
            return bad(
                "analysis.thresholds",
                "need at least one positive threshold".into(),
            );
        }
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() {
                return bad("alphas", "list is empty".into());
            }
        }
        self.integrator
            .validate()
            .map_err(|e| CliError::Config(format!("`integrator`: {e}")))?;
        self.times()?;
        let lattice = self.lattice()?;
        self.observable_request(&lattice)?;
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice, CliError> {
        Lattice::new(self.lattice.nx, self.lattice.ny)
            .map_err(|e| CliError::Config(format!("`lattice`: {e}")))
    }

    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.sample_times;
        let times = match (&s.values, s.t_max, s.count) {
            (Some(values), None, None) => values.clone(),
            (None, Some(t_max), Some(count)) if t_max.is_finite() && t_max > 0.0 && count >= 2 => {
                uniform_times(t_max, count)
            }
            _ => {
                return Err(CliError::Config(
                    "`sample_times`: give either `values` or a positive `t_max` with `count` >= 2"
                        .into(),
                ))
            }
        };
        dtwa_core::observables::validate_times(&times)
            .map_err(|e| CliError::Config(format!("`sample_times`: {e}")))?;
        Ok(times)
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        self.alpha
            .ok_or_else(|| CliError::Config("`alpha`: required by this subcommand".into()))
    }

    pub fn alphas(&self) -> Result<Vec<f64>, CliError> {
        self.alphas
            .clone()
            .ok_or_else(|| CliError::Config("`alphas`: required by crossover".into()))
    }

    pub fn observable_request(&self, lattice: &Lattice) -> Result<ObservableRequest, CliError> {
        let correlations = self
            .observables
            .correlations
            .iter()
            .map(|c| {
                let reference = match c.reference {
                    None => lattice.center(),
                    Some([x, y]) => lattice.site(x, y).ok_or_else(|| {
                        CliError::Config(format!(
                            "`observables.correlations.reference`: [{x}, {y}] is outside the {lattice} lattice"
                        ))
                    })?,
                };
                Ok(CorrelationRequest {
                    reference,
                    axis: c.axis,
                    components: c.components.clone(),
                    j_max: c.j_max,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let request = ObservableRequest {
            collective_x: self.observables.collective_x,
            correlations,
        };
        request
            .validate(lattice)
            .map_err(|e| CliError::Config(format!("`observables`: {e}")))?;
        Ok(request)
    }

    pub fn fit_start(&self, lattice: &Lattice) -> usize {
        self.analysis
            .j_min
            .unwrap_or_else(|| default_fit_start(lattice.dimension()))
    }
}
