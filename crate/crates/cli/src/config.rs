//! Run configuration: one TOML file drives every subcommand.

use std::sync::Arc;

use apids::apsymbol::{APSymbol, BaseSymbol, CoefficientFn};
use apids::freqgeom::{Decay, FrequencyModule, Thresholds};
use apids::gauge::GaugeSettings;
use apids::oracle::OracleSettings;
use apids::spectra::{FiberSettings, PipelineOptions, SpectralProblem};
use apids::zones::ZoneParams;
use apids::{Error, Execution};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub base: BaseConfig,
    pub module: ModuleConfig,
    #[serde(default)]
    pub perturbation: Vec<TermConfig>,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub zones: ZoneOverrides,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub conditions: ConditionsConfig,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub propagate: Option<PropagateConfig>,
    #[serde(default)]
    pub spectral: Option<SpectralConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum BaseConfig {
    Quadratic { coeffs: Vec<f64> },
    Quartic { beta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleConfig {
    /// Generator vectors (each of length `dimension`).
    pub generators: Vec<Vec<f64>>,
    /// Integer coordinates of the frequencies; defaults to the perturbation support.
    #[serde(default)]
    pub frequencies: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub rate: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub frequency: Vec<i64>,
    pub coefficient: CoefConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum CoefConfig {
    Constant {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Polynomial {
        terms: Vec<MonomialConfig>,
    },
    Gaussian {
        re: f64,
        #[serde(default)]
        im: f64,
        a: f64,
    },
    Reciprocal {
        re: f64,
        #[serde(default)]
        im: f64,
        s: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub powers: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub eps: f64,
    pub h: f64,
    pub tau: Vec<f64>,
    #[serde(default = "default_true")]
    pub hermitian: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    /// Number of gauge steps `K`.
    pub steps: usize,
    /// Target order `M`.
    pub m: u32,
    /// Sumset order; defaults to the highest kept power of `eps`.
    #[serde(default)]
    pub sumset_k: Option<usize>,
    #[serde(default)]
    pub require_target: bool,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self {
            steps: 2,
            m: 1,
            sumset_k: None,
            require_target: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneOverrides {
    pub vartheta: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub varsigma: Option<f64>,
    pub sigma: Option<f64>,
    pub c: Option<f64>,
    pub c0: Option<f64>,
    pub diameter_factor: Option<f64>,
    pub grid_step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub k_points: usize,
    #[serde(default)]
    pub radius: Option<f64>,
    pub truncation_checks: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let d = OracleSettings::default();
        Self {
            k_points: d.k_points,
            radius: d.radius,
            truncation_checks: d.truncation_checks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsConfig {
    pub checks: Vec<ConditionCheck>,
    pub angle: f64,
    pub norm: f64,
    pub covolume: f64,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self {
            checks: vec![ConditionCheck {
                omega: 2.0,
                l: 2,
                k: 1,
            }],
            angle: 1.0,
            norm: 1.0,
            covolume: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionCheck {
    pub omega: f64,
    pub l: u32,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub h: Vec<f64>,
    pub steps: Vec<usize>,
    /// `eps = eps_scale * h^eps_power` for every row.
    pub eps_scale: f64,
    pub eps_power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    pub t_max: f64,
    pub k_samples: usize,
    pub radius: f64,
    pub pairs: Vec<CutoffPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffPair {
    pub q1_lo: Vec<f64>,
    pub q1_hi: Vec<f64>,
    pub q2_lo: Vec<f64>,
    pub q2_hi: Vec<f64>,
    pub ell: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    /// Positions at which the leading spectral function is reported (`d = 1`).
    pub x: Vec<f64>,
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Config(msg.into()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_table(table: toml::Table) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` and applies `key=value` overrides on dotted paths.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Self::parse(text);
        }
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        let d = self.dimension;
        if d == 0 {
            return Err(cfg_err("dimension must be positive"));
        }
        if let BaseConfig::Quadratic { coeffs } = &self.base {
            if coeffs.len() != d {
                return Err(cfg_err(format!(
                    "base.coeffs has {} entries but dimension = {d}",
                    coeffs.len()
                )));
            }
        }
        if self.module.generators.iter().any(|g| g.len() != d) {
            return Err(cfg_err(format!(
                "every module.generators entry must have length {d}"
            )));
        }
        let r = self.module.generators.len();
        for (i, t) in self.perturbation.iter().enumerate() {
            if t.frequency.len() != r {
                return Err(cfg_err(format!(
                    "perturbation[{i}].frequency has {} coordinates, expected {r} (one per generator)",
                    t.frequency.len()
                )));
            }
        }
        if self.operator.tau.is_empty() {
            return Err(cfg_err("operator.tau must list at least one energy"));
        }
        if !(self.operator.h > 0.0 && self.operator.h < 1.0) {
            return Err(cfg_err(format!(
                "operator.h must lie in (0, 1), got {}",
                self.operator.h
            )));
        }
        if let Some(s) = &self.study {
            if s.h.len() < 3 {
                return Err(cfg_err("study.h needs at least three values"));
            }
        }
        Ok(())
    }

    pub fn base_symbol(&self) -> BaseSymbol {
        match &self.base {
            BaseConfig::Quadratic { coeffs } => BaseSymbol::diagonal(coeffs.clone()),
            BaseConfig::Quartic { beta } => BaseSymbol::quartic(self.dimension, *beta),
        }
    }

    pub fn module(&self) -> Result<Arc<FrequencyModule>, CliError> {
        let freqs = match &self.module.frequencies {
            Some(f) => f.clone(),
            None => {
                let mut f: Vec<Vec<i64>> = self
                    .perturbation
                    .iter()
                    .map(|t| t.frequency.clone())
                    .collect();
                f.sort();
                f.dedup();
                f
            }
        };
        let decay = self.module.decay.map(|d| Decay {
            rate: d.rate,
            constant: d.constant,
        });
        Ok(Arc::new(FrequencyModule::new(
            self.dimension,
            self.module.generators.clone(),
            freqs,
            decay,
        )?))
    }

    pub fn perturbation(&self) -> Result<APSymbol, CliError> {
        let m = self.module()?;
        let terms = self
            .perturbation
            .iter()
            .map(|t| (t.frequency.clone(), t.coefficient.build()))
            .collect();
        Ok(APSymbol::new(m, terms, self.operator.hermitian)?)
    }

    pub fn problem(&self, eps: f64, h: f64) -> Result<SpectralProblem, CliError> {
        let perturbation = self.perturbation()?;
        let sumset_k = match self.gauge.sumset_k {
            Some(k) => k,
            None => {
                let vartheta = self.zones.vartheta.unwrap_or(1.0);
                apids::gauge::max_order(self.gauge.m, vartheta)
            }
        };
        Ok(SpectralProblem {
            base: self.base_symbol(),
            perturbation,
            eps,
            h,
            sumset_k,
        })
    }

    /// Default zone parameters with the configured overrides, validated.
    pub fn zone_params(&self, problem: &SpectralProblem, tau: f64) -> Result<ZoneParams, CliError> {
        self.zone_params_for(problem, tau, self.gauge.steps)
    }

    /// As [`RunConfig::zone_params`] with `steps` gauge steps.
    pub fn zone_params_for(
        &self,
        problem: &SpectralProblem,
        tau: f64,
        steps: usize,
    ) -> Result<ZoneParams, CliError> {
        let mut p = ZoneParams::defaults(
            problem.eps,
            problem.h,
            problem.dim(),
            steps,
            problem.sup_perturbation_near(tau),
        );
        let z = &self.zones;
        if let Some(v) = z.vartheta {
            p.vartheta = v;
            let k = steps.max(1) as f64;
            p.deltas = (1..=p.deltas.len())
                .map(|j| v / (6.0 * k) * j as f64)
                .collect();
            p.varsigma = p.deltas[0] / 2.0;
            p.sigma = p.deltas[0] / 4.0;
        }
        if let Some(d) = &z.deltas {
            p.deltas = d.clone();
        }
        if let Some(v) = z.varsigma {
            p.varsigma = v;
        }
        if let Some(v) = z.sigma {
            p.sigma = v;
        }
        if let Some(v) = z.c {
            p.c = v;
        }
        if let Some(v) = z.c0 {
            p.c0 = v;
        }
        if let Some(v) = z.diameter_factor {
            p.diameter_factor = v;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn pipeline_options(&self, exec: Execution) -> PipelineOptions {
        PipelineOptions {
            gauge: GaugeSettings {
                m: self.gauge.m,
                max_steps: self.gauge.steps,
                require_target: self.gauge.require_target,
                stop_at_target: false,
            },
            grid_step: self.zones.grid_step,
            fiber: FiberSettings::default(),
            rays: PipelineOptions::default().rays,
            exec,
        }
    }

    pub fn oracle_settings(&self, exec: Execution) -> OracleSettings {
        OracleSettings {
            k_points: self.oracle.k_points,
            radius: self.oracle.radius,
            truncation_checks: self.oracle.truncation_checks,
            exec,
            ..OracleSettings::default()
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            angle: self.conditions.angle,
            norm: self.conditions.norm,
            covolume: self.conditions.covolume,
        }
    }
}

impl CoefConfig {
    pub fn build(&self) -> CoefficientFn {
        match self {
            CoefConfig::Constant { re, im } => CoefficientFn::constant(Complex64::new(*re, *im)),
            CoefConfig::Polynomial { terms } => CoefficientFn::polynomial(
                terms
                    .iter()
                    .map(|t| (t.powers.clone(), Complex64::new(t.re, t.im)))
                    .collect(),
            ),
            CoefConfig::Gaussian { re, im, a } => {
                CoefficientFn::gaussian(Complex64::new(*re, *im), *a)
            }
            CoefConfig::Reciprocal { re, im, s } => {
                CoefficientFn::reciprocal_power(Complex64::new(*re, *im), *s)
            }
        }
    }
}

/// Sets `a.b.c = value`, parsing `value` as a TOML value (bare words become strings).
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        CliError::Parse(format!("override `{spec}` is not of the form key=value"))
    })?;
    let value = parse_value(raw.trim());
    let path: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Parse(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
