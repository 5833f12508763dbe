//! Browser bindings: a wavelet viewer, a rate explorer and a one-shot
//! estimator run. The plain functions are usable (and tested) natively; the
//! `#[wasm_bindgen]` wrappers only translate errors.

use fedmean::datagen::{Design, ServerConfig};
use fedmean::harness::{imse_on_grid, Experiment, ExperimentSpec};
use fedmean::independent::Resolution;
use fedmean::rates;
use fedmean::wavelet::{BasisIndex, WaveletFamily, WaveletTable};
use wasm_bindgen::prelude::*;

/// Periodized `ψ_{level,k}` of Daubechies order `a` at `points` equispaced x in [0, 1).
pub fn wavelet_samples(a: usize, level: u32, k: usize, points: usize) -> Result<Vec<f64>, String> {
    let family = WaveletFamily::daubechies(a).map_err(|e| e.to_string())?;
    let table = WaveletTable::build(family, 12).map_err(|e| e.to_string())?;
    let idx = BasisIndex::new(level, k).map_err(|e| e.to_string())?;
    Ok((0..points).map(|i| table.psi(idx, i as f64 / points as f64)).collect())
}

#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    pub d_star: f64,
    pub risk: f64,
    pub regime: String,
}

/// Rate equation for `servers` identical servers.
pub fn rate_summary(
    design: &str,
    servers: usize,
    n: usize,
    m: usize,
    epsilon: f64,
    alpha: f64,
) -> Result<RateSummary, String> {
    let design: Design = design.parse().map_err(|e: fedmean::Error| e.to_string())?;
    let cfg = vec![ServerConfig::new(n, m, epsilon, 1e-6); servers.max(1)];
    let sol = rates::solve(design, &cfg, alpha).map_err(|e| e.to_string())?;
    Ok(RateSummary {
        d_star: sol.d_star,
        risk: sol.risk,
        regime: sol.regimes[0].to_string(),
    })
}

#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct EstimateRun {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    pub imse: f64,
}

/// One simulated federation with a single server, estimated on the IMSE grid
/// (thinned by `stride` for plotting).
pub fn estimate_run(design: &str, n: usize, m: usize, epsilon: f64, seed: u64, stride: usize) -> Result<EstimateRun, String> {
    let design: Design = design.parse().map_err(|e: fedmean::Error| e.to_string())?;
    let mut spec = ExperimentSpec::simulation(design, epsilon).map_err(|e| e.to_string())?;
    spec.servers = vec![ServerConfig::new(n, m, epsilon, 0.0)];
    spec.base_seed = seed;
    spec.independent.resolution = Resolution::Tuned;
    let exp = Experiment::new(spec).map_err(|e| e.to_string())?;
    let (fhat, _) = exp.estimate_on_grid(0.0, 0).map_err(|e| e.to_string())?;
    let imse = imse_on_grid(&fhat, &exp.truth);
    let step = stride.max(1);
    let thin = |v: &[f64]| v.iter().step_by(step).copied().collect::<Vec<f64>>();
    Ok(EstimateRun {
        grid: thin(&exp.grid),
        truth: thin(&exp.truth),
        estimate: thin(&fhat),
        imse,
    })
}

#[wasm_bindgen(js_name = waveletSamples)]
pub fn wavelet_samples_js(a: usize, level: u32, k: usize, points: usize) -> Result<Vec<f64>, JsError> {
    wavelet_samples(a, level, k, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rateSummary)]
pub fn rate_summary_js(
    design: &str,
    servers: usize,
    n: usize,
    m: usize,
    epsilon: f64,
    alpha: f64,
) -> Result<RateSummary, JsError> {
    rate_summary(design, servers, n, m, epsilon, alpha).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = estimateRun)]
pub fn estimate_run_js(design: &str, n: usize, m: usize, epsilon: f64, seed: u64, stride: usize) -> Result<EstimateRun, JsError> {
    estimate_run(design, n, m, epsilon, seed, stride).map_err(|e| JsError::new(&e))
}
