//! Run configuration: TOML on disk, JSON when replaying a sidecar.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::TruncationParams;
use crate::measures::MeasureSpec;
use crate::scalar::Precision;
use crate::subset::SubsetSpec;
use crate::symbolic::{BallKind, ShiftSpec, Transitions, Word};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub subset: SubsetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureConfig>,
    #[serde(default)]
    pub compute: ComputeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Full,
    Sft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub alphabet: usize,
    pub kind: SystemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<Vec<u8>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetKind {
    Empty,
    #[default]
    WholeSpace,
    CylinderUnion,
    SftSubsystem,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetConfig {
    #[serde(default)]
    pub kind: SubsetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cylinders: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<Vec<u8>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Uniform,
    Bernoulli,
    Markov,
    Parry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub kind: MeasureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BkModeConfig {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeConfig {
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
    pub tol: f64,
    pub ball: BallKind,
    pub precision: Precision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub samples: usize,
    pub confidence: f64,
    pub bk_mode: BkModeConfig,
    /// Orders for pointwise and spanning quantities; geometric in `[n_min, n_max]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    /// Extra `n_min` values whose critical exponents are traced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min_schedule: Option<Vec<usize>>,
    /// Exponent for `frostman`; the lower bracket of the critical exponent when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Relative duality gap beyond which a Katok result counts as an invariant breach.
    pub max_duality_gap: f64,
    /// Inequality tolerance for `sandwich`.
    pub check_tol: f64,
    /// Rescales entropy-valued outputs to logarithms in this base.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub display_base: Option<f64>,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        ComputeConfig {
            epsilon: vec![0.4, 0.2, 0.1],
            delta: vec![0.1, 0.01, 0.001],
            n_min: 50,
            n_max: 400,
            tol: 1e-3,
            ball: BallKind::Open,
            precision: Precision::Double,
            seed: None,
            samples: 64,
            confidence: 0.95,
            bk_mode: BkModeConfig::Exact,
            orders: None,
            n_min_schedule: None,
            s: None,
            max_duality_gap: 0.5,
            check_tol: 0.05,
            display_base: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepQuantity {
    Entropy,
    Katok,
    BrinKatok,
    Spanning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub quantity: SweepQuantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    pub csv: bool,
    pub json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: ".".into(), stem: None, csv: true, json: true }
    }
}

/// Command-line values that replace configuration entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub epsilon: Option<Vec<f64>>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub precision: Option<Precision>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub display_base: Option<f64>,
}

fn matrix(rows: &[Vec<u8>], what: &str) -> Result<Transitions> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|&v| match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(Error::Config(format!("{what} entries must be 0 or 1, got {other}"))),
                })
                .collect()
        })
        .collect()
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Accepts a config object or a sidecar whose `config` field holds one.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let inner = v.get("config").cloned().unwrap_or(v);
        let cfg: RunConfig = serde_json::from_value(inner).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(e) = &o.epsilon {
            self.compute.epsilon = e.clone();
        }
        if let Some(n) = o.n_min {
            self.compute.n_min = n;
        }
        if let Some(n) = o.n_max {
            self.compute.n_max = n;
        }
        if let Some(p) = o.precision {
            self.compute.precision = p;
        }
        if let Some(s) = o.seed {
            self.compute.seed = Some(s);
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(b) = o.display_base {
            self.compute.display_base = Some(b);
        }
        self.validate()
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        let shift = self.shift()?;
        self.subset_spec()?.validate(&shift)?;
        if let Some(m) = self.measure_spec()? {
            m.check_support(&shift)?;
        }
        let c = &self.compute;
        self.params().validate()?;
        if c.epsilon.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::Config("epsilon values must be finite and > 0".into()));
        }
        if c.delta.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(Error::Config("delta values must lie in (0, 1)".into()));
        }
        if !(c.confidence > 0.0 && c.confidence < 1.0) {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        if let Some(b) = c.display_base {
            if !(b.is_finite() && b > 1.0) {
                return Err(Error::Config(format!("display_base must be > 1, got {b}")));
            }
        }
        if let Some(s) = c.s {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("s must be finite and >= 0, got {s}")));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.threads == Some(0) {
                return Err(Error::Config("sweep threads must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn shift(&self) -> Result<ShiftSpec> {
        match (&self.system.kind, &self.system.transitions) {
            (SystemKind::Full, None) => ShiftSpec::full(self.system.alphabet),
            (SystemKind::Full, Some(_)) => Err(Error::Config("a full shift takes no transitions".into())),
            (SystemKind::Sft, None) => Err(Error::Config("an SFT needs [system].transitions".into())),
            (SystemKind::Sft, Some(t)) => {
                if t.len() != self.system.alphabet {
                    return Err(Error::Config(format!(
                        "transitions have {} rows but the alphabet has {} symbols",
                        t.len(),
                        self.system.alphabet
                    )));
                }
                ShiftSpec::sft(matrix(t, "transition")?)
            }
        }
    }

    pub fn subset_spec(&self) -> Result<SubsetSpec> {
        let s = &self.subset;
        match s.kind {
            SubsetKind::Empty => Ok(SubsetSpec::Empty),
            SubsetKind::WholeSpace => Ok(SubsetSpec::WholeSpace),
            SubsetKind::CylinderUnion => {
                let words = s.cylinders.as_ref().ok_or_else(|| Error::Config("cylinder-union needs cylinders".into()))?;
                SubsetSpec::cylinders(words.iter().map(|w| Word::new(w.clone())).collect())
            }
            SubsetKind::SftSubsystem => {
                let t = s.transitions.as_ref().ok_or_else(|| Error::Config("sft-subsystem needs transitions".into()))?;
                Ok(SubsetSpec::subsystem(matrix(t, "subsystem")?))
            }
        }
    }

    pub fn measure_spec(&self) -> Result<Option<MeasureSpec>> {
        let Some(m) = &self.measure else { return Ok(None) };
        let spec = match m.kind {
            MeasureKind::Uniform => MeasureSpec::uniform(self.system.alphabet)?,
            MeasureKind::Bernoulli => {
                MeasureSpec::bernoulli(m.probs.clone().ok_or_else(|| Error::Config("bernoulli needs probs".into()))?)?
            }
            MeasureKind::Markov => MeasureSpec::markov(
                m.stationary.clone().ok_or_else(|| Error::Config("markov needs stationary".into()))?,
                m.matrix.clone().ok_or_else(|| Error::Config("markov needs matrix".into()))?,
            )?,
            MeasureKind::Parry => {
                let t = match self.subset_spec()? {
                    SubsetSpec::SftSubsystem { transitions } => transitions,
                    _ => match self.shift()?.transitions() {
                        Some(t) => t.clone(),
                        None => vec![vec![true; self.system.alphabet]; self.system.alphabet],
                    },
                };
                MeasureSpec::parry(&t)?
            }
        };
        Ok(Some(spec))
    }

    pub fn require_measure(&self) -> Result<MeasureSpec> {
        self.measure_spec()?.ok_or_else(|| Error::Config("this command needs a [measure] section".into()))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.compute.seed.ok_or_else(|| Error::Config("stochastic modes need compute.seed (or --seed)".into()))
    }

    pub fn params(&self) -> TruncationParams {
        let c = &self.compute;
        TruncationParams { n_min: c.n_min, n_max: c.n_max, tol: c.tol, kind: c.ball, precision: c.precision }
    }

    pub fn orders(&self) -> Vec<usize> {
        self.compute
            .orders
            .clone()
            .unwrap_or_else(|| crate::estimators::geometric_schedule(self.compute.n_min, self.compute.n_max, 16))
    }
}
