//! Common-design protocol: servers release clipped, noisy per-point means on
//! the shared grid; the centre pools them with inverse-variance weights,
//! splits the grid into interleaved groups, smooths each group with a local
//! polynomial and averages the group estimates.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use crate::datagen::{Design, FederationConfig, ServerConfig, ServerDataset};
use crate::error::{Error, Result};
use crate::privacy;
use crate::rates;
use crate::seeds::{self, tag};
use crate::wavelet::{WaveletFamily, WaveletTable};

/// Mass of the standard normal on `[−1, 1]`.
const GAUSS_MASS: f64 = 0.682_689_492_137_085_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// Standard normal density restricted to `[−1, 1]` and renormalised.
    #[default]
    GaussianTruncated,
    Epanechnikov,
    Uniform,
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        if !(u.abs() <= 1.0) {
            return 0.0;
        }
        match self {
            Kernel::GaussianTruncated => {
                (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt() / GAUSS_MASS
            }
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
            Kernel::Uniform => 0.5,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::GaussianTruncated => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Uniform => "uniform",
        })
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "gaussian-truncated" => Ok(Kernel::GaussianTruncated),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(Error::invalid("kernel", format!("unknown kernel `{other}`"))),
        }
    }
}

/// Smallest eigenvalue accepted after the ridge.
pub const LP1_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPolyConfig {
    pub degree: usize,
    pub bandwidth: f64,
    pub kernel: Kernel,
    /// Ridge as a fraction of the design-matrix trace.
    pub ridge: f64,
}

impl LocalPolyConfig {
    pub fn new(degree: usize, bandwidth: f64, kernel: Kernel) -> Self {
        LocalPolyConfig {
            degree,
            bandwidth,
            kernel,
            ridge: 1e-10,
        }
    }
}

/// `V(u) = (1, u, u²/2!, …, u^p/p!)`.
fn basis_vector(u: f64, degree: usize) -> DVector<f64> {
    let mut v = DVector::zeros(degree + 1);
    let mut term = 1.0;
    for i in 0..=degree {
        v[i] = term;
        term *= u / (i + 1) as f64;
    }
    v
}

/// `B = (1/(|G| h)) Σ_j V(u_j) V(u_j)ᵀ K(u_j)` with `u_j = (ζ_j − x)/h`.
pub fn lp_design_matrix(points: &[f64], x: f64, cfg: &LocalPolyConfig) -> DMatrix<f64> {
    let d = cfg.degree + 1;
    let mut b = DMatrix::zeros(d, d);
    if points.is_empty() {
        return b;
    }
    for &z in points {
        let u = (z - x) / cfg.bandwidth;
        let k = cfg.kernel.eval(u);
        if k == 0.0 {
            continue;
        }
        let v = basis_vector(u, cfg.degree);
        b.ger(k, &v, &v, 1.0);
    }
    b / (points.len() as f64 * cfg.bandwidth)
}

pub fn min_eigenvalue(b: &DMatrix<f64>) -> f64 {
    b.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Local polynomial weights `W_j(x) = (1/(|G| h)) e₁ᵀ B⁻¹ V(u_j) K(u_j)`.
pub fn lp_weights(points: &[f64], x: f64, cfg: &LocalPolyConfig) -> Result<Vec<f64>> {
    let b = lp_design_matrix(points, x, cfg);
    let d = b.nrows();
    let ridge = cfg.ridge * b.trace();
    let mut guarded = b.clone();
    for i in 0..d {
        guarded[(i, i)] += ridge;
    }
    let lambda_min = min_eigenvalue(&guarded);
    if !(lambda_min >= LP1_THRESHOLD) {
        return Err(Error::LocalDesignSingular {
            x,
            lambda_min,
            threshold: LP1_THRESHOLD,
        });
    }
    let chol = guarded.cholesky().ok_or(Error::LocalDesignSingular {
        x,
        lambda_min,
        threshold: LP1_THRESHOLD,
    })?;
    let mut e1 = DVector::zeros(d);
    e1[0] = 1.0;
    // one refinement step against the unridged matrix removes the ridge bias
    let mut a = chol.solve(&e1);
    let resid = &e1 - &b * &a;
    a += chol.solve(&resid);

    let scale = 1.0 / (points.len() as f64 * cfg.bandwidth);
    Ok(points
        .iter()
        .map(|&z| {
            let u = (z - x) / cfg.bandwidth;
            let k = cfg.kernel.eval(u);
            if k == 0.0 {
                0.0
            } else {
                scale * a.dot(&basis_vector(u, cfg.degree)) * k
            }
        })
        .collect())
}

/// Interleaved partition of `0..m`: group `b` holds `b, b + B, b + 2B, …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaggingPlan {
    pub m0: usize,
    pub groups: Vec<Vec<usize>>,
}

impl BaggingPlan {
    pub fn count(&self) -> usize {
        self.groups.len()
    }
}

/// `B = ⌈m / m0⌉` strided groups.
pub fn make_groups(m: usize, m0: usize) -> Result<BaggingPlan> {
    if m0 == 0 || m0 > m {
        return Err(Error::invalid("m0", format!("need 1 <= m0 <= m = {m}, got {m0}")));
    }
    let b = m.div_ceil(m0);
    let groups = (0..b).map(|g| (g..m).step_by(b).collect()).collect();
    Ok(BaggingPlan { m0, groups })
}

/// One server's released per-point means.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerMeans {
    pub server: usize,
    pub values: Vec<f64>,
    pub sigma: f64,
}

/// Clip each observation at `tau`, average over individuals per design
/// point, add `N(0, σ²)` per point.
pub fn privatized_server_means(ds: &ServerDataset, tau: f64, seed: u64) -> Result<ServerMeans> {
    let cfg = ds.config;
    privacy::check_budget(ds.server, cfg.epsilon, cfg.delta)?;
    if ds.n() == 0 || ds.m() == 0 {
        return Err(Error::EmptyDataset(ds.server));
    }
    let sigma = privacy::sigma_common(tau, cfg.m, cfg.n, cfg.epsilon, cfg.delta)?;
    let mut values: Vec<f64> = ds
        .y
        .columns()
        .into_iter()
        .map(|col| col.iter().map(|&v| privacy::clip(v, tau)).sum::<f64>() / cfg.n as f64)
        .collect();
    if sigma > 0.0 {
        let mut rng = seeds::stream(seed, &[tag::PRIVACY, ds.server as u64]);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
        values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok(ServerMeans {
        server: ds.server,
        values,
        sigma,
    })
}

/// Pooled per-point means.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivatizedMeans {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub servers: Vec<ServerMeans>,
}

/// `u_s = min(n_s² ε_s² / m0, n_s)`.
pub fn server_weights(servers: &[ServerConfig], m0: usize) -> Result<Vec<f64>> {
    let u: Vec<f64> = servers
        .iter()
        .map(|c| {
            let n = c.n as f64;
            (n * n * c.epsilon * c.epsilon / m0 as f64).min(n)
        })
        .collect();
    let total: f64 = u.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights { level: 0 });
    }
    Ok(u.into_iter().map(|v| v / total).collect())
}

pub fn aggregate_means(per_server: Vec<ServerMeans>, servers: &[ServerConfig], m0: usize) -> Result<PrivatizedMeans> {
    if per_server.len() != servers.len() || per_server.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} server means for {} servers",
            per_server.len(),
            servers.len()
        )));
    }
    let m = per_server[0].values.len();
    if per_server.iter().any(|s| s.values.len() != m) {
        return Err(Error::DimensionMismatch("servers released different numbers of points".into()));
    }
    let weights = server_weights(servers, m0)?;
    let values = (0..m)
        .map(|j| per_server.iter().zip(&weights).map(|(s, w)| w * s.values[j]).sum())
        .collect();
    Ok(PrivatizedMeans {
        values,
        weights,
        servers: per_server,
    })
}

/// `f̂_b(x) = Σ_{j ∈ G_b} Ȳ_j W_j(x)`.
pub fn estimate_group(
    group: &[usize],
    zeta: &[f64],
    means: &[f64],
    x: f64,
    cfg: &LocalPolyConfig,
) -> Result<f64> {
    let pts: Vec<f64> = group.iter().map(|&j| zeta[j]).collect();
    let w = lp_weights(&pts, x, cfg)?;
    Ok(group.iter().zip(&w).map(|(&j, wj)| means[j] * wj).sum())
}

/// Knobs of the common-design estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonOptions {
    pub kernel: Kernel,
    /// Overrides the sup-norm constant in the clipping threshold.
    pub sup_bound: Option<f64>,
    /// Number of generator levels the sup-norm constant sums over.
    pub l_star: u32,
    /// Fixed group size instead of the rate-based choice.
    pub m0: Option<usize>,
}

impl Default for CommonOptions {
    fn default() -> Self {
        CommonOptions {
            kernel: Kernel::GaussianTruncated,
            sup_bound: None,
            l_star: 15,
            m0: None,
        }
    }
}

/// Sup-norm constant for smoothness `alpha` and radius `r`, measured on the
/// default wavelet family.
pub fn default_sup_bound(alpha: f64, r: f64, l_star: u32) -> Result<f64> {
    let table = WaveletTable::build(WaveletFamily::for_smoothness(alpha)?, 12)?;
    Ok(privacy::holder_sup_bound(&table, alpha, r, l_star))
}

/// Bandwidth for group size `m0` and `B` groups: `max(1/m0, (p + 3/2) B / m)`.
/// Group points are `B/m` apart, so even a one-sided window at 0 or 1 holds
/// at least `p + 1` of them strictly inside the kernel support.
pub fn bandwidth(m: usize, m0: usize, groups: usize, degree: usize) -> f64 {
    (1.0 / m0 as f64).max((degree as f64 + 1.5) * groups as f64 / m as f64)
}

#[derive(Debug, Clone)]
pub struct CommonEstimate {
    pub zeta: Vec<f64>,
    pub means: PrivatizedMeans,
    pub plan: BaggingPlan,
    pub config: LocalPolyConfig,
    pub tau: f64,
    pub d_star: f64,
}

impl CommonEstimate {
    /// `(1/B) Σ_b f̂_b(x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for g in &self.plan.groups {
            acc += estimate_group(g, &self.zeta, &self.means.values, x, &self.config)?;
        }
        Ok(acc / self.plan.count() as f64)
    }

    pub fn eval_grid(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Group size from the rate solver, bandwidth, threshold, privatisation,
/// pooling and bagged smoothing.
pub fn estimate(
    datasets: &[ServerDataset],
    fed: &FederationConfig,
    options: &CommonOptions,
    seed: u64,
) -> Result<CommonEstimate> {
    fed.validate()?;
    if datasets.len() != fed.servers.len() || datasets.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} datasets for {} configured servers",
            datasets.len(),
            fed.servers.len()
        )));
    }
    if datasets.iter().any(|d| d.design != Design::Common) {
        return Err(Error::DesignMismatch("common estimator needs common-design data".into()));
    }
    let zeta: Vec<f64> = datasets[0].points.row(0).to_vec();
    for ds in datasets {
        if ds.points.rows().into_iter().any(|r| r.iter().ne(zeta.iter())) {
            return Err(Error::DesignMismatch(format!(
                "server {} does not share the common grid",
                ds.server
            )));
        }
    }
    let m = zeta.len();
    let sol = rates::solve_common(&fed.servers, m, fed.alpha)?;
    let m0 = options
        .m0
        .unwrap_or_else(|| sol.d_star.round() as usize)
        .clamp(1, m);
    let plan = make_groups(m, m0)?;
    let degree = fed.alpha.floor() as usize;
    let h = bandwidth(m, m0, plan.count(), degree);
    let config = LocalPolyConfig::new(degree, h, options.kernel);

    let sup = match options.sup_bound {
        Some(c) => c,
        None => default_sup_bound(fed.alpha, fed.r, options.l_star)?,
    };
    let tau = privacy::tau_common((fed.total_n() as f64).max(2.0), sup);
    let per_server = datasets
        .iter()
        .map(|ds| privatized_server_means(ds, tau, seed))
        .collect::<Result<Vec<_>>>()?;
    let means = aggregate_means(per_server, &fed.servers, m0)?;
    Ok(CommonEstimate {
        zeta,
        means,
        plan,
        config,
        tau,
        d_star: sol.d_star,
    })
}

/// Worst cases of the local design conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpReport {
    pub min_eigenvalue: f64,
    pub worst_x: f64,
    pub worst_group: usize,
    /// `max_A (1/|G|) #{ζ_j ∈ A} / max(Leb(A), 1/m0)` over scanned intervals.
    pub spread: f64,
}

/// Scans `λ_min(B_{b,x})` over 256 query points and every group, and the
/// point-spread ratio over dyadic-width intervals.
pub fn check_lp_assumptions(plan: &BaggingPlan, zeta: &[f64], cfg: &LocalPolyConfig) -> LpReport {
    let mut report = LpReport {
        min_eigenvalue: f64::INFINITY,
        worst_x: 0.0,
        worst_group: 0,
        spread: 0.0,
    };
    let m0 = plan.m0 as f64;
    for (b, g) in plan.groups.iter().enumerate() {
        let pts: Vec<f64> = g.iter().map(|&j| zeta[j]).collect();
        for i in 0..256 {
            let x = i as f64 / 255.0;
            let lam = min_eigenvalue(&lp_design_matrix(&pts, x, cfg));
            if lam < report.min_eigenvalue {
                report.min_eigenvalue = lam;
                report.worst_x = x;
                report.worst_group = b;
            }
        }
        let mut width = 1.0;
        while width >= 1.0 / (4.0 * zeta.len() as f64) {
            let mut start = 0.0;
            while start + width <= 1.0 + 1e-12 {
                let count = pts.iter().filter(|&&z| z >= start && z <= start + width).count();
                let ratio = count as f64 / pts.len() as f64 / width.max(1.0 / m0);
                report.spread = report.spread.max(ratio);
                start += width / 2.0;
            }
            width /= 2.0;
        }
    }
    report
}

pub const MEANS_HEADER: &str = "server,j,zeta,value";
pub const EVALUATIONS_HEADER: &str = "x,fhat";

/// Per-server released means, then the pooled means with `server = -1`.
pub fn write_means_csv(path: &Path, zeta: &[f64], means: &PrivatizedMeans) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{MEANS_HEADER}").map_err(io)?;
    let rows = means
        .servers
        .iter()
        .map(|s| (s.server as i64, &s.values))
        .chain(std::iter::once((-1i64, &means.values)));
    for (server, values) in rows {
        for (j, (z, v)) in zeta.iter().zip(values).enumerate() {
            writeln!(w, "{server},{j},{z:.16e},{v:.16e}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_evaluations_csv(path: &Path, xs: &[f64], fhat: &[f64]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{EVALUATIONS_HEADER}").map_err(io)?;
    for (x, f) in xs.iter().zip(fhat) {
        writeln!(w, "{x:.16e},{f:.16e}").map_err(io)?;
    }
    w.flush().map_err(io)
}
