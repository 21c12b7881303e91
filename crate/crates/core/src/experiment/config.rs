//! Experiment configuration: one TOML document per run.
//!
//! ```toml
//! seed = 7
//! workers = 4            # optional; never affects results
//!
//! [chain]                # or: file = "chain.toml" (same keys, path relative to this file)
//! states = ["a", "b"]
//! matrix = [[0.7, 0.3], [0.3, 0.7]]
//! start = "a"
//!
//! [environment]          # or: preset = "gaussian(1.0)" / "poisson(0.5)"
//! drift = 0.0
//! gauss_var = 0.5
//! jumps = [[1.5, 0.4], [-0.8, 0.7]]
//! center = true
//!
//! [free_energy]
//! betas = [0.0, 0.5, 1.0]
//! n = 100
//! replicas = 200
//! ```
//!
//! Each command reads its own section (`free_energy`, `lyapunov`,
//! `ibp_check`, `disorder_scan`, `decay_fit`, `oracle_compare`); missing
//! sections take the documented defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Command, ExperimentError};
use crate::chain::ChainSpec;
use crate::levy::LevyTriple;
use crate::lyapunov::Potential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; excluded from the config hash since results do not
    /// depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    pub chain: ChainConfig,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub free_energy: FreeEnergyParams,
    #[serde(default)]
    pub lyapunov: LyapunovParams,
    #[serde(default)]
    pub ibp_check: IbpParams,
    #[serde(default)]
    pub disorder_scan: ScanParams,
    #[serde(default)]
    pub decay_fit: DecayParams,
    #[serde(default)]
    pub oracle_compare: OracleParams,
}

/// Inline chain, or a reference to a TOML file holding the same keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Defaults to `"0"`, `"1"`, ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    /// Dense row-major transition matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Start label; defaults to the first state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
}

/// A Lévy triple `{drift, gauss_var, jumps = [[u, m], ...]}` or a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// `"gaussian(σ²)"` or `"poisson(ρ)"` (compensated unit jumps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauss_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<[f64; 2]>>,
    /// Shift the drift so the law has mean zero.
    #[serde(default)]
    pub center: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeEnergyParams {
    pub betas: Vec<f64>,
    pub n: usize,
    pub replicas: usize,
}

impl Default for FreeEnergyParams {
    fn default() -> Self {
        Self {
            betas: vec![0.0, 0.5, 1.0, 2.0],
            n: 100,
            replicas: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovParams {
    /// One value per state; required by the `lyapunov` command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<f64>>,
    /// Horizon of the exact Varadhan integral.
    pub n: usize,
    /// Step of the central difference for `c'(0)`.
    pub h: f64,
    /// Disorder strength of the quenched exponent `c(β, f)`.
    pub beta: f64,
    /// Horizon and replicas of the quenched exponent.
    pub quenched_n: usize,
    pub replicas: usize,
    /// Grid size of the `φ(c)` plot.
    pub phi_points: usize,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        Self {
            potential: None,
            n: 1024,
            h: 1e-4,
            beta: 0.0,
            quenched_n: 200,
            replicas: 100,
            phi_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IbpParams {
    /// Subset of `sin`, `cos`, `logistic`, `gaussian_bump`.
    pub functions: Vec<String>,
}

impl Default for IbpParams {
    fn default() -> Self {
        Self {
            functions: ["sin", "cos", "logistic", "gaussian_bump"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanParams {
    /// Increasing, starting at 0.
    pub betas: Vec<f64>,
    pub n: usize,
    pub replicas: usize,
    /// β of the small-disorder free-energy bound reported alongside the scan.
    pub small_beta: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            betas: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            n: 200,
            replicas: 500,
            small_beta: crate::disorder::DEFAULT_SMALL_BETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayParams {
    pub beta: f64,
    pub horizons: Vec<usize>,
    pub replicas: usize,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            beta: 1.5,
            horizons: vec![50, 100, 200, 400],
            replicas: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    /// Explicit potentials; when absent, `random` potentials with entries
    /// uniform in `[-scale, scale]` are drawn from the master seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potentials: Option<Vec<Vec<f64>>>,
    pub random: usize,
    pub scale: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            potentials: None,
            random: 10,
            scale: 0.5,
        }
    }
}

fn config_error(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ExperimentConfig {
    /// Parses a TOML document; a chain `file` is resolved against `base`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self, ExperimentError> {
        let mut config: Self = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        if let Some(file) = config.chain.file.take() {
            if config.chain.states.is_some() || config.chain.matrix.is_some() || config.chain.start.is_some() {
                return Err(config_error("chain: give either `file` or inline keys, not both"));
            }
            let path = match base {
                Some(dir) if file.is_relative() => dir.join(&file),
                _ => file,
            };
            let inline: ChainConfig = toml::from_str(&read(&path)?)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            if inline.file.is_some() {
                return Err(config_error("chain file may not reference another file"));
            }
            config.chain = inline;
        }
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml_str(&read(path)?, path.parent())
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration
    /// (chain file inlined, worker count omitted).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn chain_spec(&self) -> Result<ChainSpec, ExperimentError> {
        let matrix = self
            .chain
            .matrix
            .clone()
            .ok_or_else(|| config_error("chain: `matrix` is required"))?;
        let states = self
            .chain
            .states
            .clone()
            .unwrap_or_else(|| (0..matrix.len()).map(|i| i.to_string()).collect());
        let start = match &self.chain.start {
            Some(label) => label.clone(),
            None => states.first().cloned().unwrap_or_default(),
        };
        Ok(ChainSpec::with_labels(states, matrix, &start)?)
    }

    pub fn triple(&self) -> Result<LevyTriple, ExperimentError> {
        let env = &self.environment;
        let explicit = env.drift.is_some() || env.gauss_var.is_some() || env.jumps.is_some();
        let triple = match (&env.preset, explicit) {
            (Some(_), true) => {
                return Err(config_error("environment: give either `preset` or explicit fields, not both"))
            }
            (Some(preset), false) => parse_preset(preset)?,
            (None, true) => {
                let jumps: Vec<(f64, f64)> = env.jumps.iter().flatten().map(|j| (j[0], j[1])).collect();
                LevyTriple::new(env.drift.unwrap_or(0.0), env.gauss_var.unwrap_or(0.0), &jumps)?
            }
            (None, false) => LevyTriple::gaussian(1.0)?,
        };
        Ok(if env.center { triple.center() } else { triple })
    }

    /// Checks every parameter `command` will use, before any computation.
    pub fn validate(&self, command: Command) -> Result<(), ExperimentError> {
        if self.workers == Some(0) {
            return Err(config_error("workers must be at least 1"));
        }
        let chain = self.chain_spec()?;
        let triple = self.triple()?;
        match command {
            Command::FreeEnergy => {
                let p = &self.free_energy;
                check_betas("free_energy.betas", &p.betas)?;
                check_plan("free_energy", p.n, p.replicas)?;
                for &beta in &p.betas {
                    check_cumulant(&triple, beta)?;
                }
            }
            Command::Lyapunov => {
                let p = &self.lyapunov;
                self.potential(&chain)?;
                positive("lyapunov.n", p.n)?;
                if !(p.h > 0.0 && p.h.is_finite()) {
                    return Err(config_error("lyapunov.h must be positive"));
                }
                check_betas("lyapunov.beta", &[p.beta])?;
                check_cumulant(&triple, p.beta)?;
                check_plan("lyapunov", p.quenched_n, p.replicas)?;
                if p.phi_points < 2 {
                    return Err(config_error("lyapunov.phi_points must be at least 2"));
                }
            }
            Command::IbpCheck => {
                self.ibp_functions()?;
            }
            Command::DisorderScan => {
                let p = &self.disorder_scan;
                check_betas("disorder_scan.betas", &p.betas)?;
                if p.betas.first() != Some(&0.0) || p.betas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(config_error("disorder_scan.betas must increase strictly from 0"));
                }
                check_betas("disorder_scan.small_beta", &[p.small_beta])?;
                check_plan("disorder_scan", p.n, p.replicas)?;
                for &beta in p.betas.iter().chain([p.small_beta, 2.0 * p.betas.last().unwrap()].iter()) {
                    check_cumulant(&triple, beta)?;
                }
            }
            Command::DecayFit => {
                let p = &self.decay_fit;
                check_betas("decay_fit.beta", &[p.beta])?;
                check_cumulant(&triple, p.beta)?;
                let mut h = p.horizons.clone();
                h.sort_unstable();
                h.dedup();
                if h.len() < 4 || h[0] == 0 {
                    return Err(config_error("decay_fit.horizons needs at least 4 distinct positive horizons"));
                }
                check_plan("decay_fit", 1, p.replicas)?;
            }
            Command::OracleCompare => {
                let p = &self.oracle_compare;
                match &p.potentials {
                    Some(list) => {
                        if list.is_empty() {
                            return Err(config_error("oracle_compare.potentials is empty"));
                        }
                        for values in list {
                            check_potential(&chain, values)?;
                        }
                    }
                    None => {
                        positive("oracle_compare.random", p.random)?;
                        if !(p.scale >= 0.0 && p.scale.is_finite()) {
                            return Err(config_error("oracle_compare.scale must be finite and nonnegative"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn potential(&self, chain: &ChainSpec) -> Result<Potential, ExperimentError> {
        let values = self
            .lyapunov
            .potential
            .as_ref()
            .ok_or_else(|| config_error("lyapunov.potential is required"))?;
        check_potential(chain, values)
    }

    pub(crate) fn ibp_functions(&self) -> Result<Vec<crate::levy::TestFunction>, ExperimentError> {
        let all = crate::levy::standard_test_functions();
        if self.ibp_check.functions.is_empty() {
            return Err(config_error("ibp_check.functions is empty"));
        }
        self.ibp_check
            .functions
            .iter()
            .map(|name| {
                all.iter()
                    .find(|t| t.name == name)
                    .copied()
                    .ok_or_else(|| config_error(format!("ibp_check: unknown test function `{name}`")))
            })
            .collect()
    }
}

fn check_potential(chain: &ChainSpec, values: &[f64]) -> Result<Potential, ExperimentError> {
    if values.len() != chain.len() {
        return Err(config_error(format!(
            "potential has {} values for {} states",
            values.len(),
            chain.len()
        )));
    }
    Ok(Potential::new(values.to_vec())?)
}

fn check_betas(name: &str, betas: &[f64]) -> Result<(), ExperimentError> {
    if betas.is_empty() {
        return Err(config_error(format!("{name} is empty")));
    }
    if betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(config_error(format!("{name}: every β must be finite and nonnegative")));
    }
    Ok(())
}

fn check_cumulant(triple: &LevyTriple, beta: f64) -> Result<(), ExperimentError> {
    use crate::levy::EnvironmentLaw;
    triple.cumulant(beta)?;
    triple.cumulant_derivative(beta)?;
    Ok(())
}

fn positive(name: &str, value: usize) -> Result<(), ExperimentError> {
    if value == 0 {
        return Err(config_error(format!("{name} must be positive")));
    }
    Ok(())
}

fn check_plan(section: &str, n: usize, replicas: usize) -> Result<(), ExperimentError> {
    positive(&format!("{section}.n"), n)?;
    if replicas < 2 {
        return Err(config_error(format!("{section}.replicas must be at least 2")));
    }
    Ok(())
}

/// `gaussian(σ²)` or `poisson(ρ)`.
pub fn parse_preset(text: &str) -> Result<LevyTriple, ExperimentError> {
    let text = text.trim();
    let bad = || config_error(format!("unknown environment preset `{text}`"));
    let (name, rest) = text.split_once('(').ok_or_else(bad)?;
    let arg: f64 = rest
        .strip_suffix(')')
        .ok_or_else(bad)?
        .trim()
        .parse()
        .map_err(|_| bad())?;
    match name.trim() {
        "gaussian" => Ok(LevyTriple::gaussian(arg)?),
        "poisson" => Ok(LevyTriple::compensated_poisson(arg)?),
        _ => Err(bad()),
    }
}
