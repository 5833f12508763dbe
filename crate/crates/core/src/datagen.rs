//! Synthetic federated functional data.
//!
//! Each individual's curve is a random wavelet series
//! `X(t) = R Σ_{l ≤ L*} Σ_k s_lk 2^{-l(α+1/2)} ψ_lk(t)` with i.i.d. signs
//! `P(s_lk = 1) = p`, so the mean curve has coefficients
//! `R (2p − 1) 2^{-l(α+1/2)}`. Observations add standard normal noise.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{self, tag};
use crate::wavelet::{WaveletCoeffs, WaveletFamily, WaveletTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Common,
    Independent,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Common => "common",
            Design::Independent => "independent",
        })
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "common" => Ok(Design::Common),
            "independent" => Ok(Design::Independent),
            other => Err(Error::invalid("design", format!("unknown design `{other}`"))),
        }
    }
}

/// One server's sample sizes and privacy budget. `epsilon = ∞` means no privacy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
}

impl ServerConfig {
    pub fn new(n: usize, m: usize, epsilon: f64, delta: f64) -> Self {
        ServerConfig { n, m, epsilon, delta }
    }

    /// Non-private server.
    pub fn public(n: usize, m: usize) -> Self {
        ServerConfig::new(n, m, f64::INFINITY, 0.0)
    }

    pub fn is_private(&self) -> bool {
        self.epsilon.is_finite()
    }

    pub fn validate(&self, server: usize) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", format!("server {server}: need at least one individual")));
        }
        if self.m == 0 {
            return Err(Error::invalid("m", format!("server {server}: need at least one measurement")));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(
                "epsilon",
                format!("server {server}: must be positive or inf, got {}", self.epsilon),
            ));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::invalid(
                "delta",
                format!("server {server}: must lie in [0, 1), got {}", self.delta),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub servers: Vec<ServerConfig>,
    pub alpha: f64,
    pub r: f64,
    pub design: Design,
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.5) {
            return Err(Error::invalid("alpha", format!("must exceed 1/2, got {}", self.alpha)));
        }
        if !(self.r > 0.0) {
            return Err(Error::invalid("r", format!("must be positive, got {}", self.r)));
        }
        if self.servers.is_empty() {
            return Err(Error::invalid("servers", "at least one server is required"));
        }
        for (s, cfg) in self.servers.iter().enumerate() {
            cfg.validate(s)?;
        }
        if self.design == Design::Common {
            let m = self.servers[0].m;
            if self.servers.iter().any(|c| c.m != m) {
                return Err(Error::DesignMismatch(
                    "common design needs the same m on every server".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn total_n(&self) -> usize {
        self.servers.iter().map(|s| s.n).sum()
    }
}

/// Random-curve generator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSpec {
    pub r: f64,
    pub l_star: u32,
    pub p: f64,
    pub alpha: f64,
    pub family: WaveletFamily,
}

impl CurveSpec {
    /// Generator used in the simulation study: R = 2, L* = 15, p = 0.9.
    pub fn simulation(alpha: f64) -> Result<Self> {
        Ok(CurveSpec {
            r: 2.0,
            l_star: 15,
            p: 0.9,
            alpha,
            family: WaveletFamily::for_smoothness(alpha)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid("p", format!("must lie in [0, 1], got {}", self.p)));
        }
        if !(self.alpha > 0.0) || !(self.r >= 0.0) {
            return Err(Error::invalid("alpha", "alpha and R must be positive"));
        }
        if self.l_star > 20 {
            return Err(Error::invalid("l_star", format!("{} exceeds 20", self.l_star)));
        }
        Ok(())
    }

    /// `R 2^{-l(α+1/2)}`, the magnitude of every level-`l` coefficient.
    pub fn magnitude(&self, level: u32) -> f64 {
        self.r * (2f64).powf(-(level as f64) * (self.alpha + 0.5))
    }
}

/// Coefficients of the mean curve, levels `0..=L*`, no father block.
pub fn true_mean(spec: &CurveSpec) -> WaveletCoeffs {
    let mut c = WaveletCoeffs::zeros(0, spec.l_star, false);
    for l in 0..=spec.l_star {
        let v = (2.0 * spec.p - 1.0) * spec.magnitude(l);
        c.level_mut(l).fill(v);
    }
    c
}

/// One individual's curve, with signs hashed from a key on demand.
#[derive(Debug, Clone, Copy)]
pub struct RandomCurve {
    spec: CurveSpec,
    key: u64,
}

impl RandomCurve {
    pub fn new(spec: CurveSpec, key: u64) -> Self {
        RandomCurve { spec, key }
    }

    #[inline]
    pub fn sign(&self, level: u32, k: usize) -> f64 {
        let key = seeds::mix64(self.key ^ seeds::mix64(((level as u64) << 40) ^ k as u64));
        seeds::rademacher(key, self.spec.p)
    }

    pub fn coefficient(&self, level: u32, k: usize) -> f64 {
        self.spec.magnitude(level) * self.sign(level, k)
    }

    pub fn eval(&self, table: &WaveletTable, x: f64) -> f64 {
        let mut acc = 0.0;
        for l in 0..=self.spec.l_star {
            let mag = self.spec.magnitude(l);
            table.for_each_psi(l, x, |k, v| acc += mag * self.sign(l, k) * v);
        }
        acc
    }

    /// All coefficients, materialised.
    pub fn coefficients(&self) -> WaveletCoeffs {
        let mut c = WaveletCoeffs::zeros(0, self.spec.l_star, false);
        for l in 0..=self.spec.l_star {
            for (k, v) in c.level_mut(l).iter_mut().enumerate() {
                *v = self.coefficient(l, k);
            }
        }
        c
    }
}

/// Curve of individual `individual` on the server addressed by `server_seed`.
pub fn individual_curve(spec: &CurveSpec, server_seed: u64, individual: usize) -> RandomCurve {
    RandomCurve::new(*spec, seeds::derive(server_seed, &[tag::CURVE, individual as u64]))
}

/// Materialised random curve for `rng_seed`.
pub fn sample_curve(spec: &CurveSpec, rng_seed: u64) -> WaveletCoeffs {
    RandomCurve::new(*spec, rng_seed).coefficients()
}

/// `n × m` design points. Common: `j/m` for `j = 1..=m` on every row.
/// Independent: i.i.d. uniform, individual `i` drawing from its own stream.
pub fn make_design(config: &ServerConfig, design: Design, rng_seed: u64) -> Array2<f64> {
    let (n, m) = (config.n, config.m);
    match design {
        Design::Common => Array2::from_shape_fn((n, m), |(_, j)| (j + 1) as f64 / m as f64),
        Design::Independent => {
            let mut out = Array2::zeros((n, m));
            for (i, mut row) in out.rows_mut().into_iter().enumerate() {
                let mut rng = seeds::stream(rng_seed, &[tag::DESIGN, i as u64]);
                row.iter_mut().for_each(|v| *v = rng.random::<f64>());
            }
            out
        }
    }
}

/// Points and observations held by one server.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerDataset {
    pub server: usize,
    pub design: Design,
    pub config: ServerConfig,
    pub points: Array2<f64>,
    pub y: Array2<f64>,
}

impl ServerDataset {
    pub fn new(
        server: usize,
        design: Design,
        config: ServerConfig,
        points: Array2<f64>,
        y: Array2<f64>,
    ) -> Result<Self> {
        let want = (config.n, config.m);
        if points.dim() != want || y.dim() != want {
            return Err(Error::DimensionMismatch(format!(
                "server {server}: expected {}x{}, got points {:?} and y {:?}",
                want.0,
                want.1,
                points.dim(),
                y.dim()
            )));
        }
        if points.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return Err(Error::invalid("zeta", format!("server {server}: design points must lie in [0, 1]")));
        }
        Ok(ServerDataset {
            server,
            design,
            config,
            points,
            y,
        })
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn m(&self) -> usize {
        self.config.m
    }
}

/// `y_ij = X_i(ζ_ij) + ξ_ij` with standard normal `ξ` (omitted if `noiseless`).
/// `curve(i, x)` evaluates individual `i`'s curve.
pub fn observe(
    server: usize,
    design: Design,
    config: ServerConfig,
    curve: impl Fn(usize, f64) -> f64,
    points: Array2<f64>,
    rng_seed: u64,
    noiseless: bool,
) -> Result<ServerDataset> {
    let mut y = Array2::zeros(points.dim());
    for (i, (mut yrow, prow)) in y.rows_mut().into_iter().zip(points.rows()).enumerate() {
        let mut rng = seeds::stream(rng_seed, &[tag::NOISE, i as u64]);
        for (yv, &z) in yrow.iter_mut().zip(prow.iter()) {
            let noise: f64 = if noiseless { 0.0 } else { StandardNormal.sample(&mut rng) };
            *yv = curve(i, z) + noise;
        }
    }
    ServerDataset::new(server, design, config, points, y)
}

/// Seed of server `s` within a replication.
pub fn server_seed(rep_seed: u64, server: usize) -> u64 {
    seeds::derive(rep_seed, &[server as u64])
}

/// Full simulated federation for one replication.
pub fn simulate_federation(
    fed: &FederationConfig,
    spec: &CurveSpec,
    table: &WaveletTable,
    rep_seed: u64,
    noiseless: bool,
) -> Result<Vec<ServerDataset>> {
    fed.validate()?;
    spec.validate()?;
    fed.servers
        .iter()
        .enumerate()
        .map(|(s, cfg)| {
            let seed = server_seed(rep_seed, s);
            let points = make_design(cfg, fed.design, seed);
            observe(
                s,
                fed.design,
                *cfg,
                |i, x| individual_curve(spec, seed, i).eval(table, x),
                points,
                seed,
                noiseless,
            )
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    server: usize,
    individual: usize,
    j: usize,
    zeta: f64,
    y: f64,
}

pub const DATASET_HEADER: &str = "server,individual,j,zeta,y";

/// Writes `server,individual,j,zeta,y` rows (0-based indices, 17 significant digits).
pub fn write_datasets_csv(path: &Path, datasets: &[ServerDataset]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{DATASET_HEADER}").map_err(io)?;
    for ds in datasets {
        for ((i, j), z) in ds.points.indexed_iter() {
            writeln!(w, "{},{},{},{:.16e},{:.16e}", ds.server, i, j, z, ds.y[(i, j)]).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads a dataset dump and checks it against `fed` (one block per server,
/// every `(individual, j)` cell present exactly once).
pub fn read_datasets_csv(path: &Path, fed: &FederationConfig) -> Result<Vec<ServerDataset>> {
    fed.validate()?;
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.into(),
        source,
    })?;
    let mut points: Vec<Array2<f64>> = fed.servers.iter().map(|c| Array2::from_elem((c.n, c.m), f64::NAN)).collect();
    let mut y = points.clone();
    for (line, row) in reader.deserialize::<DatasetRow>().enumerate() {
        let line = line + 2;
        let row = row.map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
        let bad = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let cfg = fed
            .servers
            .get(row.server)
            .ok_or_else(|| bad(format!("server {} not in config", row.server)))?;
        if row.individual >= cfg.n || row.j >= cfg.m {
            return Err(bad(format!(
                "cell ({}, {}) outside the configured {}x{} block of server {}",
                row.individual, row.j, cfg.n, cfg.m, row.server
            )));
        }
        let cell = (row.individual, row.j);
        if !points[row.server][cell].is_nan() {
            return Err(bad(format!("duplicate cell ({}, {})", row.individual, row.j)));
        }
        points[row.server][cell] = row.zeta;
        y[row.server][cell] = row.y;
    }
    let mut out = Vec::with_capacity(fed.servers.len());
    for (s, (p, yv)) in points.into_iter().zip(y).enumerate() {
        if p.iter().any(|v| v.is_nan()) {
            return Err(Error::DimensionMismatch(format!(
                "{}: server {s} is missing cells",
                path.display()
            )));
        }
        out.push(ServerDataset::new(s, fed.design, fed.servers[s], p, yv)?);
    }
    Ok(out)
}
