//! Independent-design protocol: each server clips per-individual wavelet
//! coefficient estimates, averages them, adds level-dependent Gaussian noise
//! and releases the noisy coefficients; the centre combines them level by
//! level with inverse-variance weights.

use std::path::Path;

use rand_distr::{Distribution, Normal};

use crate::datagen::{Design, FederationConfig, ServerConfig, ServerDataset};
use crate::error::{Error, Result};
use crate::privacy::{self, ClipThresholdParams};
use crate::rates::{self, RateSolution};
use crate::seeds::{self, tag};
use crate::wavelet::{BasisIndex, WaveletCoeffs, WaveletTable};

/// Knobs of the independent-design estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentOptions {
    /// Concentration exponent of the clipping threshold.
    pub c: f64,
    /// Upper cap on the resolution level.
    pub l_max: u32,
    /// Coarsest level; defaults to the family's smallest non-wrapping level.
    pub coarsest: Option<u32>,
    pub resolution: Resolution,
}

/// How the finest level `L` is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resolution {
    /// `round(log₂ D*)` from the rate equation.
    #[default]
    Rate,
    /// Minimiser of [`predicted_risk`] over `coarsest..=l_max`.
    Tuned,
    Fixed(u32),
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rate" => Ok(Resolution::Rate),
            "tuned" => Ok(Resolution::Tuned),
            other => other
                .parse()
                .map(Resolution::Fixed)
                .map_err(|_| Error::invalid("resolution", format!("expected rate, tuned or a level, got `{s}`"))),
        }
    }
}

impl Default for IndependentOptions {
    fn default() -> Self {
        IndependentOptions {
            c: privacy::DEFAULT_CONCENTRATION,
            l_max: 10,
            coarsest: None,
            resolution: Resolution::Rate,
        }
    }
}

/// Everything a server needs to know to build its transcript.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionPlan {
    pub coarsest: u32,
    pub finest: u32,
    pub clip: ClipThresholdParams,
    pub overlap: usize,
}

impl ProjectionPlan {
    pub fn new(table: &WaveletTable, fed: &FederationConfig, coarsest: u32, finest: u32, c: f64) -> Result<Self> {
        if finest < coarsest {
            return Err(Error::invalid("L", format!("finest level {finest} below coarsest {coarsest}")));
        }
        let clip = ClipThresholdParams {
            c,
            n_total: (fed.total_n() as f64).max(2.0),
            psi_sup: table.sup_norm(),
            alpha: fed.alpha,
            r: fed.r,
        };
        clip.validate()?;
        Ok(ProjectionPlan {
            coarsest,
            finest,
            clip,
            overlap: table.family().overlap_constant(),
        })
    }

    /// Level count entering the noise scale and the sensitivity bound.
    /// The father block counts as one more level, and the count never drops
    /// below the finest level index.
    pub fn levels(&self) -> usize {
        let blocks = (self.finest - self.coarsest + 2) as usize;
        blocks.max(self.finest as usize)
    }

    pub fn tau(&self, level: u32, m: usize) -> f64 {
        privacy::tau_independent(level, m, &self.clip)
    }
}

/// `U_{i,lk} = (1/m) Σ_j Y_ij ψ_lk(ζ_ij)`.
pub fn individual_statistic(points: &[f64], y: &[f64], table: &WaveletTable, idx: BasisIndex) -> f64 {
    let m = points.len() as f64;
    points.iter().zip(y).map(|(&z, &v)| v * table.psi(idx, z)).sum::<f64>() / m
}

/// Clipped averages of `U_i` for every coefficient, plus clipping counts.
struct ClippedMeans {
    coeffs: WaveletCoeffs,
    tau: Vec<f64>,
    clipped: usize,
    nonzero: usize,
}

fn clipped_means(ds: &ServerDataset, table: &WaveletTable, plan: &ProjectionPlan) -> Result<ClippedMeans> {
    if ds.n() == 0 || ds.m() == 0 {
        return Err(Error::EmptyDataset(ds.server));
    }
    let m = ds.m();
    let tau: Vec<f64> = (plan.coarsest..=plan.finest).map(|l| plan.tau(l, m)).collect();
    let mut sum = WaveletCoeffs::zeros(plan.coarsest, plan.finest, true);
    let mut scratch = WaveletCoeffs::zeros(plan.coarsest, plan.finest, true);
    let block_count = scratch.block_count();
    let mut touched: Vec<Vec<usize>> = vec![Vec::new(); block_count];
    let inv_m = 1.0 / m as f64;
    let (mut clipped, mut nonzero) = (0usize, 0usize);

    for (prow, yrow) in ds.points.rows().into_iter().zip(ds.y.rows()) {
        for (&z, &v) in prow.iter().zip(yrow.iter()) {
            let w = v * inv_m;
            let father = scratch.father_mut().expect("father block");
            table.for_each_phi(plan.coarsest, z, |k, p| {
                father[k] += w * p;
                touched[0].push(k);
            });
            for l in plan.coarsest..=plan.finest {
                let row = scratch.level_mut(l);
                let t = &mut touched[(l - plan.coarsest) as usize + 1];
                table.for_each_psi(l, z, |k, p| {
                    row[k] += w * p;
                    t.push(k);
                });
            }
        }
        // move this individual's clipped values into the running sum
        for (b, (acc, cur)) in sum.blocks_mut().zip(scratch.blocks_mut()).enumerate() {
            let t = tau[b.saturating_sub(1)];
            for &k in &touched[b] {
                let u = cur[k];
                if u != 0.0 {
                    nonzero += 1;
                    if u.abs() > t {
                        clipped += 1;
                    }
                    acc[k] += privacy::clip(u, t);
                    cur[k] = 0.0;
                }
            }
            touched[b].clear();
        }
    }
    let inv_n = 1.0 / ds.n() as f64;
    for block in sum.blocks_mut() {
        block.iter_mut().for_each(|v| *v *= inv_n);
    }
    Ok(ClippedMeans {
        coeffs: sum,
        tau,
        clipped,
        nonzero,
    })
}

/// Rescaled pre-noise statistic `f̂^τ_lk / (τ_l √(2^l ∧ m))`, father block
/// first. Its ℓ₂ sensitivity is what the noise is calibrated to.
pub fn rescaled_statistic(ds: &ServerDataset, table: &WaveletTable, plan: &ProjectionPlan) -> Result<Vec<f64>> {
    let means = clipped_means(ds, table, plan)?;
    let m = ds.m() as f64;
    let mut out = Vec::with_capacity(means.coeffs.len());
    for (block, level) in means.coeffs.blocks().zip(means.coeffs.block_levels()) {
        let tau = means.tau[(level - plan.coarsest) as usize];
        let scale = tau * ((1u64 << level) as f64).min(m).sqrt();
        out.extend(block.iter().map(|v| v / scale));
    }
    Ok(out)
}

/// One server's released message.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTranscript {
    pub server: usize,
    pub coeffs: WaveletCoeffs,
    /// Threshold per level `coarsest..=finest`; the father block uses the first.
    pub tau: Vec<f64>,
    /// Noise scale per level, same layout as `tau`.
    pub sigma: Vec<f64>,
    /// Clipped and nonzero per-individual statistics (diagnostics, not released).
    pub clipped: usize,
    pub nonzero: usize,
}

impl CoeffTranscript {
    pub fn coarsest(&self) -> u32 {
        self.coeffs.coarsest()
    }

    pub fn finest(&self) -> u32 {
        self.coeffs.finest()
    }
}

/// Clip, average and privatise one server's coefficients.
pub fn server_transcript(
    ds: &ServerDataset,
    table: &WaveletTable,
    plan: &ProjectionPlan,
    seed: u64,
) -> Result<CoeffTranscript> {
    let cfg = ds.config;
    privacy::check_budget(ds.server, cfg.epsilon, cfg.delta)?;
    let means = clipped_means(ds, table, plan)?;
    let levels = plan.levels();
    let sigma = (plan.coarsest..=plan.finest)
        .zip(&means.tau)
        .map(|(l, &t)| privacy::sigma_independent(levels, l, cfg.m, t, cfg.n, cfg.epsilon, cfg.delta, plan.overlap))
        .collect::<Result<Vec<_>>>()?;
    let mut coeffs = means.coeffs;
    if cfg.is_private() {
        let mut rng = seeds::stream(seed, &[tag::PRIVACY, ds.server as u64]);
        let levels: Vec<u32> = coeffs.block_levels().collect();
        for (block, level) in coeffs.blocks_mut().zip(levels) {
            let s = sigma[(level - plan.coarsest) as usize];
            let normal = Normal::new(0.0, s).map_err(|e| Error::invalid("sigma", e.to_string()))?;
            block.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
    }
    Ok(CoeffTranscript {
        server: ds.server,
        coeffs,
        tau: means.tau,
        sigma,
        clipped: means.clipped,
        nonzero: means.nonzero,
    })
}

/// Per-level server weights, levels `coarsest..=finest`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelWeights {
    pub coarsest: u32,
    pub weights: Vec<Vec<f64>>,
}

impl LevelWeights {
    pub fn at(&self, level: u32) -> &[f64] {
        &self.weights[(level - self.coarsest) as usize]
    }
}

/// `u_l = min(nm, m 2^{l(2α+1)}, 2^{-l} m n² ε², 2^{2lα} n² ε²)`, normalised over servers.
pub fn aggregation_weights(level: u32, servers: &[ServerConfig], alpha: f64) -> Result<Vec<f64>> {
    let l = level as f64;
    let u: Vec<f64> = servers
        .iter()
        .map(|c| {
            let (n, m) = (c.n as f64, c.m as f64);
            let mut u = (n * m).min(m * (2f64).powf(l * (2.0 * alpha + 1.0)));
            if c.epsilon.is_finite() {
                let pm = n * n * c.epsilon * c.epsilon;
                u = u.min((2f64).powf(-l) * m * pm).min((2f64).powf(2.0 * l * alpha) * pm);
            }
            u
        })
        .collect();
    let total: f64 = u.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights { level });
    }
    Ok(u.into_iter().map(|v| v / total).collect())
}

pub fn level_weights(coarsest: u32, finest: u32, servers: &[ServerConfig], alpha: f64) -> Result<LevelWeights> {
    let weights = (coarsest..=finest)
        .map(|l| aggregation_weights(l, servers, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelWeights { coarsest, weights })
}

/// Level-wise convex combination of the transcripts.
pub fn aggregate(transcripts: &[CoeffTranscript], weights: &LevelWeights) -> Result<WaveletCoeffs> {
    let first = transcripts
        .first()
        .ok_or_else(|| Error::invalid("transcripts", "nothing to aggregate"))?;
    for t in transcripts {
        if !t.coeffs.same_shape(&first.coeffs) {
            return Err(Error::MismatchedLevels(format!(
                "server {} covers {}..={}, server {} covers {}..={}",
                first.server,
                first.coarsest(),
                first.finest(),
                t.server,
                t.coarsest(),
                t.finest()
            )));
        }
    }
    if weights.coarsest != first.coarsest() || weights.weights.len() != (first.finest() - first.coarsest() + 1) as usize {
        return Err(Error::MismatchedLevels("weights do not cover the transcript levels".into()));
    }
    let sources: Vec<Vec<&[f64]>> = transcripts.iter().map(|t| t.coeffs.blocks().collect()).collect();
    let mut out = first.coeffs.clone();
    let levels: Vec<u32> = out.block_levels().collect();
    for (b, (block, &level)) in out.blocks_mut().zip(&levels).enumerate() {
        let w = weights.at(level);
        if w.len() != transcripts.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} transcripts",
                w.len(),
                transcripts.len()
            )));
        }
        for (k, v) in block.iter_mut().enumerate() {
            *v = sources.iter().zip(w).map(|(src, wt)| wt * src[b][k]).sum();
        }
    }
    Ok(out)
}

/// `L = round(log₂ D*)`, clamped to `[coarsest, l_max]`.
pub fn choose_resolution(
    servers: &[ServerConfig],
    alpha: f64,
    coarsest: u32,
    l_max: u32,
) -> Result<(u32, RateSolution)> {
    let sol = rates::solve_independent(servers, alpha)?;
    Ok((level_for(sol.d_star, coarsest, l_max), sol))
}

pub fn level_for(d_star: f64, coarsest: u32, l_max: u32) -> u32 {
    let l = d_star.log2().round().max(0.0) as u32;
    l.clamp(coarsest, l_max.max(coarsest))
}

/// Predicted integrated risk when truncating at `plan.finest`: a Hölder tail
/// bound plus the sampling and privacy variance of the aggregated
/// coefficients. The second moment of an observation is proxied by the
/// squared Hölder-ball energy plus unit noise.
pub fn predicted_risk(plan: &ProjectionPlan, fed: &FederationConfig) -> Result<f64> {
    let alpha = fed.alpha;
    let weights = level_weights(plan.coarsest, plan.finest, &fed.servers, alpha)?;
    let levels = plan.levels();
    let energy = fed.r * fed.r / (1.0 - (2f64).powf(-2.0 * alpha));
    let mut risk = energy * (2f64).powf(-2.0 * alpha * (plan.finest + 1) as f64);
    for l in plan.coarsest..=plan.finest {
        let mut var = 0.0;
        for (c, w) in fed.servers.iter().zip(weights.at(l)) {
            let sampling = ((energy + 1.0) / c.m as f64 + fed.r * fed.r * (2f64).powf(-(l as f64) * (2.0 * alpha + 1.0))) / c.n as f64;
            let sigma = privacy::sigma_independent(levels, l, c.m, plan.tau(l, c.m), c.n, c.epsilon, c.delta, plan.overlap)?;
            var += w * w * (sampling + sigma * sigma);
        }
        let count = (1u64 << l) as f64 * if l == plan.coarsest { 2.0 } else { 1.0 };
        risk += count * var;
    }
    Ok(risk)
}

/// Coarsest and finest level for `options`, plus the rate solution.
pub fn select_levels(
    fed: &FederationConfig,
    table: &WaveletTable,
    options: &IndependentOptions,
) -> Result<(u32, u32, RateSolution)> {
    let coarsest = options
        .coarsest
        .unwrap_or_else(|| table.family().default_coarsest_level());
    let sol = rates::solve_independent(&fed.servers, fed.alpha)?;
    let top = options.l_max.max(coarsest);
    let level = match options.resolution {
        Resolution::Fixed(l) => l.max(coarsest),
        Resolution::Rate => level_for(sol.d_star, coarsest, options.l_max),
        Resolution::Tuned => {
            let mut best = (coarsest, f64::INFINITY);
            for l in coarsest..=top {
                let plan = ProjectionPlan::new(table, fed, coarsest, l, options.c)?;
                let risk = predicted_risk(&plan, fed)?;
                if risk < best.1 {
                    best = (l, risk);
                }
            }
            best.0
        }
    };
    Ok((coarsest, level, sol))
}

/// Output of the full independent-design pipeline.
#[derive(Debug, Clone)]
pub struct IndependentEstimate {
    pub coeffs: WaveletCoeffs,
    pub level: u32,
    pub d_star: f64,
    pub transcripts: Vec<CoeffTranscript>,
    pub weights: LevelWeights,
}

impl IndependentEstimate {
    pub fn eval(&self, table: &WaveletTable, x: f64) -> f64 {
        table.reconstruct(&self.coeffs, x)
    }
}

/// Resolution choice, transcripts, weights and aggregation.
pub fn estimate(
    datasets: &[ServerDataset],
    fed: &FederationConfig,
    table: &WaveletTable,
    options: &IndependentOptions,
    seed: u64,
) -> Result<IndependentEstimate> {
    fed.validate()?;
    if datasets.len() != fed.servers.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} datasets for {} configured servers",
            datasets.len(),
            fed.servers.len()
        )));
    }
    if datasets.iter().any(|d| d.design != Design::Independent) {
        return Err(Error::DesignMismatch("independent estimator needs independent-design data".into()));
    }
    let (coarsest, level, sol) = select_levels(fed, table, options)?;
    let plan = ProjectionPlan::new(table, fed, coarsest, level, options.c)?;
    let transcripts = par_map(datasets, |ds| server_transcript(ds, table, &plan, seed))?;
    let weights = level_weights(coarsest, level, &fed.servers, fed.alpha)?;
    let coeffs = aggregate(&transcripts, &weights)?;
    Ok(IndependentEstimate {
        coeffs,
        level,
        d_star: sol.d_star,
        transcripts,
        weights,
    })
}

#[cfg(not(target_arch = "wasm32"))]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(target_arch = "wasm32")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    items.iter().map(f).collect()
}

pub const TRANSCRIPT_HEADER: &str = "server,l,k,value,tau,sigma";

/// Transcript rows; father coefficients are written with `l = -1`.
pub fn write_transcripts_csv(path: &Path, transcripts: &[CoeffTranscript]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{TRANSCRIPT_HEADER}").map_err(io)?;
    for t in transcripts {
        let father = t.coeffs.father().map(|f| (-1i64, f));
        let levels = (t.coarsest()..=t.finest()).map(|l| (l as i64, t.coeffs.level(l)));
        for (l, block) in father.into_iter().chain(levels) {
            let i = if l < 0 { 0 } else { (l as u32 - t.coarsest()) as usize };
            for (k, v) in block.iter().enumerate() {
                writeln!(w, "{},{},{},{:.16e},{:.16e},{:.16e}", t.server, l, k, v, t.tau[i], t.sigma[i]).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{make_design, observe};
    use crate::wavelet::WaveletFamily;

    fn fed(servers: Vec<ServerConfig>) -> FederationConfig {
        FederationConfig {
            servers,
            alpha: 1.0,
            r: 2.0,
            design: Design::Independent,
        }
    }

    #[test]
    fn single_term_statistic() {
        let t = WaveletTable::build(WaveletFamily::Haar, 10).unwrap();
        let idx = BasisIndex::new(1, 0).unwrap();
        // ψ_10(0.1) = √2
        let u = individual_statistic(&[0.1], &[2.0], &t, idx);
        assert!((u - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(individual_statistic(&[0.1, 0.7], &[0.0, 0.0], &t, idx), 0.0);
    }

    #[test]
    fn weight_examples() {
        let a = ServerConfig::public(100, 10);
        let b = ServerConfig::new(1, 1, 0.01, 0.1);
        let w = aggregation_weights(0, &[a, b], 1.0).unwrap();
        assert!((w[0] - 10.0 / 10.0001).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let same = aggregation_weights(3, &[a, a], 1.0).unwrap();
        assert_eq!(same, vec![0.5, 0.5]);
        assert_eq!(aggregation_weights(2, &[b], 1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn resolution_rounding() {
        assert_eq!(level_for(8.0, 2, 10), 3);
        assert_eq!(level_for(1.0, 2, 10), 2);
        assert_eq!(level_for(5000.0, 2, 10), 10);
    }

    #[test]
    fn public_transcript_is_plain_mean() {
        let table = WaveletTable::build(WaveletFamily::Daubechies(2), 12).unwrap();
        let cfg = ServerConfig::public(30, 8);
        let f = fed(vec![cfg]);
        let pts = make_design(&cfg, Design::Independent, 4);
        let ds = observe(0, Design::Independent, cfg, |i, x| (i as f64 + x).sin(), pts, 4, false).unwrap();
        let mut plan = ProjectionPlan::new(&table, &f, 2, 4, 3.0).unwrap();
        plan.clip.r = 1e9;
        let tr = server_transcript(&ds, &table, &plan, 1).unwrap();
        assert_eq!(tr.clipped, 0);
        assert!(tr.sigma.iter().all(|&s| s == 0.0));
        let idx = BasisIndex::new(3, 5).unwrap();
        let direct: f64 = (0..30)
            .map(|i| {
                let p = ds.points.row(i).to_vec();
                let y = ds.y.row(i).to_vec();
                individual_statistic(&p, &y, &table, idx)
            })
            .sum::<f64>()
            / 30.0;
        assert!((tr.coeffs.get(idx) - direct).abs() < 1e-12);
        assert_eq!(tr, server_transcript(&ds, &table, &plan, 1).unwrap());
    }

    #[test]
    fn aggregate_checks() {
        let table = WaveletTable::build(WaveletFamily::Daubechies(2), 10).unwrap();
        let mk = |v: f64, fin: u32| {
            let mut c = WaveletCoeffs::zeros(2, fin, true);
            c.blocks_mut().for_each(|b| b.fill(v));
            CoeffTranscript {
                server: 0,
                coeffs: c,
                tau: vec![1.0; (fin - 1) as usize],
                sigma: vec![0.0; (fin - 1) as usize],
                clipped: 0,
                nonzero: 0,
            }
        };
        let w = LevelWeights {
            coarsest: 2,
            weights: vec![vec![0.9, 0.1]; 2],
        };
        let out = aggregate(&[mk(10.0, 3), mk(0.0, 3)], &w).unwrap();
        assert!(out.values().iter().all(|&v| (v - 9.0).abs() < 1e-12));
        assert!(matches!(aggregate(&[mk(1.0, 3), mk(1.0, 4)], &w), Err(Error::MismatchedLevels(_))));
        let _ = table;
    }
}
