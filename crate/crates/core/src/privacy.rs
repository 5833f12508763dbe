//! Clipping thresholds and Gaussian-mechanism noise scales.
//!
//! All logarithms are natural. Noise variances are `4 Δ² ln(2/δ) / ε²` for
//! an ℓ₂ sensitivity `Δ`, which is larger than the classical
//! `2 ln(1.25/δ) Δ² / ε²` calibration for every `δ < 1`.

use crate::datagen::ServerDataset;
use crate::error::{Error, Result};
use crate::wavelet::WaveletTable;

/// Default concentration exponent in the per-level clipping threshold.
pub const DEFAULT_CONCENTRATION: f64 = 3.0;

#[inline]
pub fn clip(v: f64, tau: f64) -> f64 {
    v.clamp(-tau, tau)
}

/// Inputs of the independent-design clipping threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipThresholdParams {
    /// Concentration exponent `c`: all statistics stay below the threshold
    /// with probability at least `1 − N^{-c}`.
    pub c: f64,
    /// Total number of individuals across servers.
    pub n_total: f64,
    pub psi_sup: f64,
    pub alpha: f64,
    pub r: f64,
}

impl ClipThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::invalid("c", format!("must be positive, got {}", self.c)));
        }
        if !(self.n_total >= 2.0) {
            return Err(Error::invalid("N", format!("need at least 2 individuals, got {}", self.n_total)));
        }
        Ok(())
    }
}

/// `2 (2c ln N)^{3/2} (m^{-1/2} + ‖ψ‖_∞ 2^{l/2} / (3m)) + R 2^{-l(α+1/2)}`.
pub fn tau_independent(level: u32, m: usize, params: &ClipThresholdParams) -> f64 {
    let m = m as f64;
    let l = level as f64;
    let conc = (2.0 * params.c * params.n_total.ln()).powf(1.5);
    let spread = m.powf(-0.5) + params.psi_sup * (2f64).powf(l / 2.0) / (3.0 * m);
    2.0 * conc * spread + params.r * (2f64).powf(-l * (params.alpha + 0.5))
}

/// `√(2 ln N) + C`, where `C` bounds the sup-norm of the mean class.
pub fn tau_common(n_total: f64, sup_bound: f64) -> f64 {
    (2.0 * n_total.ln()).sqrt() + sup_bound
}

/// Errors if a finite budget comes without a usable `δ`.
pub fn check_budget(server: usize, epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(
            "epsilon",
            format!("server {server}: must be positive or inf, got {epsilon}"),
        ));
    }
    if epsilon.is_finite() && !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ZeroDelta { server, delta });
    }
    Ok(())
}

/// Per-coefficient noise scale at level `l` for the independent design:
/// `sqrt(4 c_A² L (2^l ∧ m) τ_l² ln(2/δ)) / (n ε)`, zero if `ε = ∞`.
#[allow(clippy::too_many_arguments)]
pub fn sigma_independent(
    levels: usize,
    level: u32,
    m: usize,
    tau: f64,
    n: usize,
    epsilon: f64,
    delta: f64,
    overlap: usize,
) -> Result<f64> {
    check_budget(0, epsilon, delta)?;
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    let width = ((1u64 << level.min(62)) as f64).min(m as f64);
    let c_a = overlap as f64;
    let var = 4.0 * c_a * c_a * levels as f64 * width * tau * tau * (2.0 / delta).ln();
    Ok(var.sqrt() / (n as f64 * epsilon))
}

/// Per-point noise scale for the common design: `sqrt(4 τ² m ln(2/δ)) / (n ε)`.
pub fn sigma_common(tau: f64, m: usize, n: usize, epsilon: f64, delta: f64) -> Result<f64> {
    check_budget(0, epsilon, delta)?;
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    let var = 4.0 * tau * tau * m as f64 * (2.0 / delta).ln();
    Ok(var.sqrt() / (n as f64 * epsilon))
}

/// `c_A √L / n`.
pub fn sensitivity_bound_independent(levels: usize, n: usize, overlap: usize) -> f64 {
    overlap as f64 * (levels as f64).sqrt() / n as f64
}

/// Upper bound on `sup_t |f(t)|` over the generator's class:
/// `R · sup_y Σ_k |ψ(y − k)| · Σ_{l ≤ L*} 2^{-lα}`.
///
/// Each level contributes at most `R 2^{-l(α+1/2)} 2^{l/2} sup_y Σ_k |ψ(y−k)|`
/// whatever the signs, so the bound holds for every sampled curve and for
/// the mean.
pub fn holder_sup_bound(table: &WaveletTable, alpha: f64, r: f64, l_star: u32) -> f64 {
    let translate_sum = periodic_abs_sup(table);
    let levels: f64 = (0..=l_star).map(|l| (2f64).powf(-(l as f64) * alpha)).sum();
    r * translate_sum * levels
}

/// `sup_y Σ_k |ψ(y − k)|`, scanned at the table resolution.
fn periodic_abs_sup(table: &WaveletTable) -> f64 {
    let a = table.family().vanishing_moments() as i64;
    let steps = 1usize << table.depth();
    (0..steps)
        .map(|i| {
            let y = i as f64 / steps as f64;
            (1 - a..=a).map(|k| table.mother(y - k as f64).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Replacement record for one individual: `(index, points row, y row)`.
pub type Replacement = (usize, Vec<f64>, Vec<f64>);

/// Largest ℓ₂ change of `statistic` over `trials` single-individual replacements.
///
/// `replacement(t)` supplies the record swapped in at trial `t`.
pub fn audit_sensitivity<F, R>(
    statistic: F,
    dataset: &ServerDataset,
    trials: usize,
    mut replacement: R,
) -> Result<f64>
where
    F: Fn(&ServerDataset) -> Result<Vec<f64>>,
    R: FnMut(usize) -> Result<Replacement>,
{
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let base = statistic(dataset)?;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let (i, points, y) = replacement(t)?;
        if i >= dataset.n() || points.len() != dataset.m() || y.len() != dataset.m() {
            return Err(Error::DimensionMismatch(format!(
                "replacement record for individual {i} does not fit a {}x{} dataset",
                dataset.n(),
                dataset.m()
            )));
        }
        let mut neighbor = dataset.clone();
        neighbor.points.row_mut(i).iter_mut().zip(&points).for_each(|(d, s)| *d = *s);
        neighbor.y.row_mut(i).iter_mut().zip(&y).for_each(|(d, s)| *d = *s);
        let other = statistic(&neighbor)?;
        if other.len() != base.len() {
            return Err(Error::DimensionMismatch("statistic length changed between neighbors".into()));
        }
        let dist = base
            .iter()
            .zip(&other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dist);
    }
    Ok(worst)
}
