//! Monte Carlo experiments: replications, paired-seed sweeps, risk tables.
//!
//! Replication `r` uses seed `base_seed ^ r` for every sweep value, so the
//! curves, designs and noise of individual `i` on server `s` are shared
//! across the sweep and trends are compared on common randomness.

pub mod cli;
pub mod config;
pub mod output;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::common::{self, CommonOptions};
use crate::datagen::{self, CurveSpec, Design, FederationConfig, ServerConfig};
use crate::error::{Error, Result};
use crate::independent::{self, IndependentOptions};
use crate::privacy;
use crate::rates;
use crate::seeds;
use crate::wavelet::{WaveletTable, DEFAULT_DEPTH};

pub use output::RiskRow;

/// Number of quadrature points for the integrated squared error.
pub const IMSE_POINTS: usize = 4096;

/// Equispaced quadrature nodes on [0, 1], endpoints included.
pub fn imse_grid() -> Vec<f64> {
    (0..IMSE_POINTS).map(|i| i as f64 / (IMSE_POINTS - 1) as f64).collect()
}

/// Composite trapezoid of `(f̂ − f)²` on [`imse_grid`].
pub fn imse_on_grid(fhat: &[f64], f: &[f64]) -> f64 {
    assert_eq!(fhat.len(), f.len(), "grid length mismatch");
    let n = f.len();
    let h = 1.0 / (n - 1) as f64;
    let sq = |i: usize| (fhat[i] - f[i]).powi(2);
    let inner: f64 = (1..n - 1).map(sq).sum();
    h * (inner + 0.5 * (sq(0) + sq(n - 1)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    Fixed(f64),
    /// `δ_s = 1 / n_s²`.
    OneOverNSquared,
}

impl DeltaRule {
    pub fn delta(self, n: usize) -> f64 {
        match self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::OneOverNSquared => 1.0 / (n as f64 * n as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    N,
    M,
    Epsilon,
    /// No override; a single row with sweep value 0.
    Fixed,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::N => "n",
            SweepVariable::M => "m",
            SweepVariable::Epsilon => "epsilon",
            SweepVariable::Fixed => "fixed",
        })
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" => Ok(SweepVariable::N),
            "m" => Ok(SweepVariable::M),
            "epsilon" | "eps" => Ok(SweepVariable::Epsilon),
            "fixed" | "none" => Ok(SweepVariable::Fixed),
            other => Err(Error::invalid("sweep", format!("unknown sweep variable `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn fixed() -> Self {
        Sweep {
            variable: SweepVariable::Fixed,
            values: vec![0.0],
        }
    }
}

/// Applies `value` of `variable` to every server.
pub fn apply_sweep(servers: &[ServerConfig], variable: SweepVariable, value: f64) -> Result<Vec<ServerConfig>> {
    let as_count = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
            Ok(v as usize)
        } else {
            Err(Error::invalid("sweep", format!("{v} is not a positive integer")))
        }
    };
    servers
        .iter()
        .map(|c| {
            let mut c = *c;
            match variable {
                SweepVariable::N => c.n = as_count(value)?,
                SweepVariable::M => c.m = as_count(value)?,
                SweepVariable::Epsilon => c.epsilon = value,
                SweepVariable::Fixed => {}
            }
            Ok(c)
        })
        .collect()
}

/// Complete description of one Monte Carlo sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub design: Design,
    pub curve: CurveSpec,
    pub servers: Vec<ServerConfig>,
    pub alpha: f64,
    pub r: f64,
    pub sweep: Sweep,
    pub replications: usize,
    pub base_seed: u64,
    /// Applied to servers without an explicit `delta`.
    pub delta_rule: DeltaRule,
    /// Servers whose `delta` was given explicitly.
    pub explicit_delta: Vec<bool>,
    pub independent: IndependentOptions,
    pub common: CommonOptions,
    pub noiseless: bool,
    pub depth: u32,
}

impl ExperimentSpec {
    /// Simulation-study defaults for one design: R = 2, L* = 15, p = 0.9,
    /// α = 1, one server with `n = 200`, `m = 64`, `δ = 1/n²`.
    pub fn simulation(design: Design, epsilon: f64) -> Result<Self> {
        let alpha = 1.0;
        Ok(ExperimentSpec {
            design,
            curve: CurveSpec::simulation(alpha)?,
            servers: vec![ServerConfig::new(200, 64, epsilon, 0.0)],
            alpha,
            r: 2.0,
            sweep: Sweep::fixed(),
            replications: 100,
            base_seed: 0,
            delta_rule: DeltaRule::OneOverNSquared,
            explicit_delta: vec![false],
            independent: IndependentOptions::default(),
            common: CommonOptions::default(),
            noiseless: false,
            depth: DEFAULT_DEPTH,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications", "need at least one"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::invalid("sweep", "no sweep values"));
        }
        if self.sweep.values.iter().any(|v| v.is_nan() || (*v <= 0.0 && self.sweep.variable != SweepVariable::Fixed)) {
            return Err(Error::invalid("sweep", "sweep values must be positive"));
        }
        if self.explicit_delta.len() != self.servers.len() {
            return Err(Error::DimensionMismatch("explicit_delta does not match servers".into()));
        }
        self.curve.validate()
    }

    /// Federation at one sweep value, with the δ rule applied.
    pub fn federation_at(&self, value: f64) -> Result<FederationConfig> {
        let mut servers = apply_sweep(&self.servers, self.sweep.variable, value)?;
        for (c, &explicit) in servers.iter_mut().zip(&self.explicit_delta) {
            if !explicit {
                c.delta = if c.is_private() { self.delta_rule.delta(c.n) } else { 0.0 };
            }
        }
        let fed = FederationConfig {
            servers,
            alpha: self.alpha,
            r: self.r,
            design: self.design,
        };
        fed.validate()?;
        Ok(fed)
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub imse: f64,
    pub d_star: f64,
}

/// Shared, read-only state of a sweep: basis tables and the true mean on the grid.
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub curve_table: WaveletTable,
    pub table: WaveletTable,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub sup_bound: f64,
}

impl Experiment {
    pub fn new(spec: ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let curve_table = WaveletTable::build(spec.curve.family, spec.depth)?;
        let family = crate::wavelet::WaveletFamily::for_smoothness(spec.alpha)?;
        let table = if family == spec.curve.family {
            curve_table.clone()
        } else {
            WaveletTable::build(family, spec.depth)?
        };
        let grid = imse_grid();
        let mean = datagen::true_mean(&spec.curve);
        let truth = grid.iter().map(|&x| curve_table.reconstruct(&mean, x)).collect();
        let sup_bound = match spec.common.sup_bound {
            Some(c) => c,
            None => privacy::holder_sup_bound(&curve_table, spec.curve.alpha, spec.curve.r, spec.curve.l_star),
        };
        Ok(Experiment {
            spec,
            curve_table,
            table,
            grid,
            truth,
            sup_bound,
        })
    }

    /// Estimate on the IMSE grid for sweep value `value`, replication `rep`.
    pub fn estimate_on_grid(&self, value: f64, rep: u64) -> Result<(Vec<f64>, f64)> {
        let fed = self.spec.federation_at(value)?;
        let seed = seeds::replication_seed(self.spec.base_seed, rep);
        let data = datagen::simulate_federation(&fed, &self.spec.curve, &self.curve_table, seed, self.spec.noiseless)?;
        match fed.design {
            Design::Independent => {
                let est = independent::estimate(&data, &fed, &self.table, &self.spec.independent, seed)?;
                let fhat = self.grid.iter().map(|&x| est.eval(&self.table, x)).collect();
                Ok((fhat, est.d_star))
            }
            Design::Common => {
                let opts = CommonOptions {
                    sup_bound: Some(self.sup_bound),
                    ..self.spec.common
                };
                let est = common::estimate(&data, &fed, &opts, seed)?;
                Ok((est.eval_grid(&self.grid)?, est.d_star))
            }
        }
    }

    pub fn replication(&self, value: f64, rep: u64) -> Result<Replication> {
        let (fhat, d_star) = self.estimate_on_grid(value, rep)?;
        Ok(Replication {
            imse: imse_on_grid(&fhat, &self.truth),
            d_star,
        })
    }

    pub fn d_star(&self, value: f64) -> Result<f64> {
        let fed = self.spec.federation_at(value)?;
        Ok(rates::solve(fed.design, &fed.servers, fed.alpha)?.d_star)
    }
}

/// IMSE of replication `rep` at sweep value `value`.
pub fn run_replication(spec: &ExperimentSpec, value: f64, rep: u64) -> Result<f64> {
    Ok(Experiment::new(spec.clone())?.replication(value, rep)?.imse)
}

/// Risk rows plus the raw per-replication IMSE values (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<RiskRow>,
    pub samples: Vec<Vec<f64>>,
}

impl SweepResult {
    pub fn medians(&self) -> Vec<f64> {
        self.samples.iter().map(|s| median(s)).collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every (sweep value, replication) pair on the worker pool and reduces
/// by replication index. `timing` records wall seconds per row; otherwise the
/// column is 0 so outputs stay byte-reproducible.
pub fn run_sweep(spec: &ExperimentSpec, timing: bool) -> Result<SweepResult> {
    let exp = Experiment::new(spec.clone())?;
    let mut values = spec.sweep.values.clone();
    values.sort_by(f64::total_cmp);
    let reps = spec.replications;
    let mut rows = Vec::with_capacity(values.len());
    let mut samples = Vec::with_capacity(values.len());
    for &value in &values {
        let start = Instant::now();
        let d_star = exp.d_star(value)?;
        let imse = with_pool(|| map_reps(reps, |r| exp.replication(value, r as u64).map(|o| o.imse)))?;
        let n = imse.len() as f64;
        let mean = imse.iter().sum::<f64>() / n;
        let stderr = if imse.len() > 1 {
            let var = imse.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        rows.push(RiskRow {
            sweep: value,
            mean_imse: mean,
            stderr,
            reps,
            d_star,
            seconds: if timing { start.elapsed().as_secs_f64() } else { 0.0 },
        });
        samples.push(imse);
    }
    Ok(SweepResult { rows, samples })
}

#[cfg(not(target_arch = "wasm32"))]
fn map_reps<T: Send>(reps: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

#[cfg(target_arch = "wasm32")]
fn map_reps<T: Send>(reps: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..reps).map(f).collect()
}

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "FEDMEAN_WORKERS";

#[cfg(not(target_arch = "wasm32"))]
fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let workers = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    match workers.filter(|&w| w > 0) {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[cfg(target_arch = "wasm32")]
fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    f()
}
