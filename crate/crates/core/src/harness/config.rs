//! Experiment configuration files (TOML).
//!
//! ```toml
//! design = "independent"     # or "common"
//! alpha = 1.0
//! r = 2.0
//! seed = 7
//! replications = 100
//!
//! [curve]                    # random-curve generator
//! p = 0.9
//! l_star = 15
//!
//! [privacy]
//! delta = "1/n^2"            # or a number; per-server `delta` overrides
//!
//! [estimator]
//! c = 3.0
//! l_max = 10
//! resolution = "rate"        # rate | tuned | a fixed level
//! kernel = "gaussian"        # common design: gaussian | epanechnikov | uniform
//!
//! [sweep]
//! variable = "n"             # n | m | epsilon
//! values = [50, 100, 200, 400, 800]
//! series = { variable = "epsilon", values = [0.5, 1, 2, inf] }
//!
//! [[server]]                 # one block per server
//! n = 200
//! m = 64
//! epsilon = 1.0              # inf for a non-private server
//! count = 1                  # identical copies of this block
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::common::{CommonOptions, Kernel};
use crate::datagen::{CurveSpec, Design, FederationConfig, ServerConfig};
use crate::error::{Error, Result};
use crate::independent::{IndependentOptions, Resolution};
use crate::wavelet::{WaveletFamily, DEFAULT_DEPTH};

use super::{DeltaRule, ExperimentSpec, Sweep, SweepVariable};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub design: Design,
    pub alpha: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub privacy: PrivacySection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    pub sweep: Option<SweepSection>,
    #[serde(rename = "server")]
    pub servers: Vec<ServerSection>,
}

fn default_r() -> f64 {
    2.0
}

fn default_reps() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_l_star")]
    pub l_star: u32,
    pub family: Option<String>,
}

fn default_p() -> f64 {
    0.9
}

fn default_l_star() -> u32 {
    15
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection {
            p: default_p(),
            l_star: default_l_star(),
            family: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DeltaValue {
    Number(f64),
    Rule(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub delta: Option<DeltaValue>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_l_max")]
    pub l_max: u32,
    pub level: Option<u32>,
    pub resolution: Option<String>,
    pub coarsest: Option<u32>,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    pub m0: Option<usize>,
    pub sup_bound: Option<f64>,
    #[serde(default = "default_depth")]
    pub depth: u32,
}

fn default_c() -> f64 {
    crate::privacy::DEFAULT_CONCENTRATION
}

fn default_l_max() -> u32 {
    10
}

fn default_kernel() -> String {
    "gaussian".into()
}

fn default_depth() -> u32 {
    DEFAULT_DEPTH
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            c: default_c(),
            l_max: default_l_max(),
            level: None,
            resolution: None,
            coarsest: None,
            kernel: default_kernel(),
            m0: None,
            sup_bound: None,
            depth: default_depth(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    pub variable: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: String,
    pub values: Vec<f64>,
    pub series: Option<SeriesSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub delta: Option<f64>,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_epsilon() -> f64 {
    f64::INFINITY
}

fn default_count() -> usize {
    1
}

/// A labelled sweep (one per series value).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSpec {
    pub label: String,
    pub spec: ExperimentSpec,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: path.into(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn delta_rule(&self, path: &Path) -> Result<DeltaRule> {
        match &self.privacy.delta {
            None => Ok(DeltaRule::OneOverNSquared),
            Some(DeltaValue::Number(d)) => Ok(DeltaRule::Fixed(*d)),
            Some(DeltaValue::Rule(s)) => {
                let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
                match compact.as_str() {
                    "1/n^2" | "1/n²" | "1/n2" => Ok(DeltaRule::OneOverNSquared),
                    _ => Err(Error::Config {
                        path: path.into(),
                        message: format!("privacy.delta: expected a number or \"1/n^2\", found \"{s}\""),
                    }),
                }
            }
        }
    }

    fn servers(&self) -> (Vec<ServerConfig>, Vec<bool>) {
        let mut servers = Vec::new();
        let mut explicit = Vec::new();
        for s in &self.servers {
            for _ in 0..s.count {
                servers.push(ServerConfig::new(s.n, s.m, s.epsilon, s.delta.unwrap_or(0.0)));
                explicit.push(s.delta.is_some());
            }
        }
        (servers, explicit)
    }

    /// Experiment specs, one per series value (a single unlabelled spec if
    /// the sweep has no series).
    pub fn specs(&self, path: &Path) -> Result<Vec<LabelledSpec>> {
        let cfg_err = |message: String| Error::Config {
            path: path.into(),
            message,
        };
        if self.servers.is_empty() {
            return Err(cfg_err("at least one [[server]] block is required".into()));
        }
        let family = match &self.curve.family {
            Some(f) => f.parse::<WaveletFamily>().map_err(|e| cfg_err(format!("curve.family: {e}")))?,
            None => WaveletFamily::for_smoothness(self.alpha).map_err(|e| cfg_err(format!("alpha: {e}")))?,
        };
        let kernel: Kernel = self
            .estimator
            .kernel
            .parse()
            .map_err(|e| cfg_err(format!("estimator.kernel: {e}")))?;
        let (servers, explicit_delta) = self.servers();
        let sweep = match &self.sweep {
            None => Sweep::fixed(),
            Some(s) => Sweep {
                variable: s.variable.parse().map_err(|e| cfg_err(format!("sweep.variable: {e}")))?,
                values: s.values.clone(),
            },
        };
        let base = ExperimentSpec {
            design: self.design,
            curve: CurveSpec {
                r: self.r,
                l_star: self.curve.l_star,
                p: self.curve.p,
                alpha: self.alpha,
                family,
            },
            servers,
            alpha: self.alpha,
            r: self.r,
            sweep,
            replications: self.replications,
            base_seed: self.seed,
            delta_rule: self.delta_rule(path)?,
            explicit_delta,
            independent: IndependentOptions {
                c: self.estimator.c,
                l_max: self.estimator.l_max,
                coarsest: self.estimator.coarsest,
                resolution: self.resolution(path)?,
            },
            common: CommonOptions {
                kernel,
                sup_bound: self.estimator.sup_bound,
                l_star: self.curve.l_star,
                m0: self.estimator.m0,
            },
            noiseless: self.noiseless,
            depth: self.estimator.depth,
        };
        let specs = match self.sweep.as_ref().and_then(|s| s.series.as_ref()) {
            None => vec![LabelledSpec {
                label: "all".into(),
                spec: base,
            }],
            Some(series) => {
                let variable: SweepVariable = series
                    .variable
                    .parse()
                    .map_err(|e| cfg_err(format!("sweep.series.variable: {e}")))?;
                if variable == base.sweep.variable {
                    return Err(cfg_err("sweep.series must vary a different variable than the sweep".into()));
                }
                series
                    .values
                    .iter()
                    .map(|&v| {
                        let mut spec = base.clone();
                        spec.servers = super::apply_sweep(&spec.servers, variable, v)
                            .map_err(|e| cfg_err(format!("sweep.series: {e}")))?;
                        Ok(LabelledSpec {
                            label: format!("{variable}={v}"),
                            spec,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        for s in &specs {
            s.spec.validate().map_err(|e| cfg_err(e.to_string()))?;
            for &v in &s.spec.sweep.values {
                s.spec.federation_at(v).map_err(|e| cfg_err(e.to_string()))?;
            }
        }
        Ok(specs)
    }

    /// The federation as configured (no sweep override, δ rule applied).
    fn resolution(&self, path: &Path) -> Result<Resolution> {
        match (self.estimator.level, &self.estimator.resolution) {
            (Some(_), Some(_)) => Err(Error::Config {
                path: path.into(),
                message: "estimator: give `level` or `resolution`, not both".into(),
            }),
            (Some(l), None) => Ok(Resolution::Fixed(l)),
            (None, Some(r)) => r.parse().map_err(|e: Error| Error::Config {
                path: path.into(),
                message: format!("estimator.resolution: {e}"),
            }),
            (None, None) => Ok(Resolution::Rate),
        }
    }

    pub fn federation(&self, path: &Path) -> Result<FederationConfig> {
        let specs = self.specs(path)?;
        let spec = &specs[0].spec;
        let mut plain = spec.clone();
        plain.sweep = Sweep::fixed();
        plain.federation_at(0.0).map_err(|e| Error::Config {
            path: path.into(),
            message: e.to_string(),
        })
    }
}
