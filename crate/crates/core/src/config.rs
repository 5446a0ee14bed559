//! Run configuration: one TOML file holding the model, grid, payoff, study settings and output
//! options. Unknown keys are rejected and every section is re-validated after loading.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{ConvergenceOptions, Dynamics, Estimator, LemmaOptions, McOptions};
use crate::gaussfunc::VolFunction;
use crate::kernel::Hurst;
use crate::model::ModelParams;
use crate::pricing::{Payoff, Regime, TermStructureParams};
use crate::simulate::{Scheme, SimGrid};

/// Simulation grid expressed relative to ε, so that it rescales across an ε sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_steps_per_eps")]
    pub steps_per_eps: f64,
    #[serde(default = "default_warmup_eps")]
    pub warmup_eps: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

fn default_steps_per_eps() -> f64 {
    16.0
}
fn default_warmup_eps() -> f64 {
    20.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            steps_per_eps: default_steps_per_eps(),
            warmup_eps: default_warmup_eps(),
            scheme: Scheme::default(),
        }
    }
}

impl GridConfig {
    pub fn grid(&self, mp: &ModelParams) -> SimGrid {
        SimGrid::resolving(mp, self.steps_per_eps, self.warmup_eps).with_scheme(self.scheme)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_paths")]
    pub n_paths: u64,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub dynamics: Dynamics,
    #[serde(default = "yes")]
    pub antithetic: bool,
}

fn default_paths() -> u64 {
    200_000
}
fn yes() -> bool {
    true
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: default_paths(),
            estimator: Estimator::default(),
            dynamics: Dynamics::default(),
            antithetic: true,
        }
    }
}

impl McConfig {
    pub fn options(&self) -> McOptions {
        McOptions {
            estimator: self.estimator,
            dynamics: self.dynamics,
            antithetic: self.antithetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Dyadic, strictly decreasing ε values for the sweeps.
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    /// Pricing time t.
    #[serde(default)]
    pub t: f64,
    /// Estimator used by the convergence study.
    #[serde(default = "default_study_estimator")]
    pub estimator: Estimator,
    /// Also measure the error at T/2 in the convergence study.
    #[serde(default = "yes")]
    pub interior: bool,
    /// Samples for the vartheta, phi and kappa checks.
    #[serde(default = "default_lemma_paths")]
    pub lemma_paths: u64,
    /// Maturity used by the lemma checks instead of the model maturity.
    #[serde(default)]
    pub lemma_maturity: Option<f64>,
    #[serde(default)]
    pub lemma: LemmaOptions,
    /// Strikes of the smile study; defaults to 90..110 around a spot of 100.
    #[serde(default = "default_strikes")]
    pub strikes: Vec<f64>,
    /// Maturities of the term-structure sweep.
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_term_structure")]
    pub term_structure: TermStructureParams,
}

fn default_eps_grid() -> Vec<f64> {
    vec![0.1, 0.05, 0.025, 0.0125]
}
fn default_study_estimator() -> Estimator {
    Estimator::ConditionalOnW
}
fn default_lemma_paths() -> u64 {
    20_000
}
fn default_strikes() -> Vec<f64> {
    (0..=8).map(|i| 90.0 + 2.5 * i as f64).collect()
}
fn default_taus() -> Vec<f64> {
    (0..=48).map(|i| 1e-5 * 10f64.powf(i as f64 / 6.0)).collect()
}
fn default_term_structure() -> TermStructureParams {
    TermStructureParams {
        regime: Regime::SmallAmplitude,
        tau_mr: 0.1,
        delta_sigma: 0.01,
        tau_bar: 50.0,
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            eps_grid: default_eps_grid(),
            t: 0.0,
            estimator: default_study_estimator(),
            interior: true,
            lemma_paths: default_lemma_paths(),
            lemma_maturity: None,
            lemma: LemmaOptions::default(),
            strikes: default_strikes(),
            taus: default_taus(),
            term_structure: default_term_structure(),
        }
    }
}

impl StudyConfig {
    pub fn convergence_options(&self, grid: &GridConfig, mc: &McConfig) -> ConvergenceOptions {
        ConvergenceOptions {
            steps_per_eps: grid.steps_per_eps,
            warmup_eps: grid.warmup_eps,
            estimator: self.estimator,
            dynamics: mc.dynamics,
            interior: self.interior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Txt,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "txt" => Ok(Format::Txt),
            other => Err(Error::validation(
                "output.formats",
                format!("unknown format `{other}` (csv, json, txt)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Txt]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelParams,
    #[serde(default)]
    pub grid: GridConfig,
    pub payoff: Payoff,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    20_260_101
}

impl Default for RunConfig {
    /// Bounded sigmoid volatility, H = 0.3, ε = 0.05, ρ = -0.5, at-the-money smoothed call.
    fn default() -> Self {
        RunConfig {
            seed: default_seed(),
            model: ModelParams {
                hurst: Hurst::new(0.3).expect("valid"),
                eps: 0.05,
                rho: -0.5,
                vol_fn: VolFunction::BoundedSigmoid {
                    sigma_min: 0.1,
                    sigma_max: 0.3,
                    slope: 1.0,
                },
                x0: 100.0,
                maturity: 1.0,
                allow_unbounded: false,
            },
            grid: GridConfig::default(),
            payoff: Payoff::SmoothCall {
                strike: 100.0,
                smoothing: 0.05,
            },
            mc: McConfig::default(),
            study: StudyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.payoff.validate()?;
        if !(self.grid.steps_per_eps >= 4.0) {
            return Err(Error::validation("grid.steps_per_eps", "must be at least 4"));
        }
        if !(self.grid.warmup_eps >= 20.0) {
            return Err(Error::validation("grid.warmup_eps", "must be at least 20"));
        }
        self.grid.grid(&self.model).validate(&self.model)?;
        if self.mc.n_paths < 4 || (self.mc.antithetic && !self.mc.n_paths.is_multiple_of(2)) {
            return Err(Error::validation(
                "mc.n_paths",
                "must be at least 4 and even when antithetic",
            ));
        }
        let st = &self.study;
        if st.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::validation("study.eps_grid", "entries must be positive"));
        }
        if !(st.t >= 0.0 && st.t <= self.model.maturity) {
            return Err(Error::validation("study.t", "must lie in [0, maturity]"));
        }
        if st.lemma_paths < 2 {
            return Err(Error::validation("study.lemma_paths", "must be at least 2"));
        }
        if let Some(m) = st.lemma_maturity {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::validation("study.lemma_maturity", "must be positive"));
            }
        }
        if st.lemma.nodes_per_decade == 0 || !(st.lemma.first_node > 0.0) || st.lemma.gh_order < 2 {
            return Err(Error::validation(
                "study.lemma",
                "nodes_per_decade >= 1, first_node > 0 and gh_order >= 2 are required",
            ));
        }
        if st.strikes.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::validation("study.strikes", "entries must be positive"));
        }
        if st.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::validation("study.taus", "entries must be positive"));
        }
        st.term_structure.validate()?;
        if self.output.formats.is_empty() {
            return Err(Error::validation("output.formats", "at least one format is required"));
        }
        Ok(())
    }

    /// Model used by the lemma checks.
    pub fn lemma_model(&self) -> Result<ModelParams> {
        match self.study.lemma_maturity {
            Some(m) => self.model.clone().with_maturity(m),
            None => Ok(self.model.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml_and_json() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let json: RunConfig = serde_json::from_str(&cfg.to_json_string().unwrap()).unwrap();
        assert_eq!(json, cfg);
        assert_eq!(json.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut s = RunConfig::default().to_toml_string().unwrap();
        s = s.replacen("[model]", "[model]\nvolatility = 3.0", 1);
        assert!(matches!(RunConfig::from_toml_str(&s), Err(Error::Serde(_))));
    }

    #[test]
    fn invalid_values_name_the_key() {
        let mut cfg = RunConfig::default();
        cfg.model.rho = 1.5;
        let s = cfg.to_toml_string().unwrap();
        match RunConfig::from_toml_str(&s) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "rho"),
            other => panic!("{other:?}"),
        }
    }
}
