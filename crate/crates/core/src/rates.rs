//! Effective-dimension equations and minimax rates (up to polylog factors).
//!
//! Common design: `D^{2α} = min(m^{2α}, Σ_s min(n_s, n_s² ε_s² / D))`.
//!
//! Independent design: `D*` is the largest `D ≥ 1` such that
//! `D^{2α} ≤ inf_{1 ≤ D' ≤ D} F(D')` with
//! `F(D) = Σ_s min(nm/D, m n² ε²/D², n D^{2α}, n² ε² D^{2α−1})`.
//! `ε = ∞` drops the privacy terms from every minimum.

use std::fmt;

use crate::datagen::{Design, ServerConfig};
use crate::error::{Error, Result};

/// Which term binds a server's contribution at `D*`. Ties go to the
/// earlier variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    SampleLimited,
    MeasurementLimited,
    PrivacySampleLimited,
    PrivacyMeasurementLimited,
    DiscretizationLimited,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SampleLimited => "sample",
            Regime::MeasurementLimited => "measurement",
            Regime::PrivacySampleLimited => "privacy-sample",
            Regime::PrivacyMeasurementLimited => "privacy-measurement",
            Regime::DiscretizationLimited => "discretization",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSolution {
    pub design: Design,
    pub d_star: f64,
    pub risk: f64,
    pub regimes: Vec<Regime>,
    /// `|LHS − RHS| / LHS` at the returned point (0 when `D*` is floored at 1
    /// or capped at `m`, where the equation holds as an inequality).
    pub residual: f64,
}

fn check_inputs(servers: &[ServerConfig], alpha: f64) -> Result<()> {
    if !(alpha > 0.5) {
        return Err(Error::invalid("alpha", format!("must exceed 1/2, got {alpha}")));
    }
    if servers.is_empty() {
        return Err(Error::invalid("servers", "at least one server is required"));
    }
    for (s, c) in servers.iter().enumerate() {
        if c.n == 0 || c.m == 0 || !(c.epsilon > 0.0) {
            return Err(Error::invalid(
                "servers",
                format!("server {s}: need n, m >= 1 and epsilon > 0"),
            ));
        }
    }
    Ok(())
}

#[inline]
fn privacy_mass(c: &ServerConfig) -> f64 {
    // n² ε², infinite for non-private servers
    let n = c.n as f64;
    n * n * c.epsilon * c.epsilon
}

/// `Σ_s min(n_s, n_s² ε_s² / D)`.
fn common_sum(servers: &[ServerConfig], d: f64) -> f64 {
    servers
        .iter()
        .map(|c| (c.n as f64).min(privacy_mass(c) / d))
        .sum()
}

/// Unique crossing of `D^{2α}` with `min(m^{2α}, Σ_s min(n_s, n_s² ε_s² / D))`.
pub fn solve_common(servers: &[ServerConfig], m: usize, alpha: f64) -> Result<RateSolution> {
    check_inputs(servers, alpha)?;
    if m == 0 {
        return Err(Error::invalid("m", "need at least one design point"));
    }
    let cap = (m as f64).powf(2.0 * alpha);
    let rhs = |d: f64| cap.min(common_sum(servers, d));
    let gap = |d: f64| d.powf(2.0 * alpha) - rhs(d);

    let total_n: f64 = servers.iter().map(|c| c.n as f64).sum();
    let mut lo = 1.0f64;
    let mut hi = (m as f64).max(total_n.powf(1.0 / (2.0 * alpha))) + 1.0;
    let d_star = if gap(lo) >= 0.0 {
        1.0
    } else {
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            let g = gap(mid);
            if g.abs() <= 1e-10 * mid.powf(2.0 * alpha) {
                lo = mid;
                hi = mid;
                break;
            }
            if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let lhs = d_star.powf(2.0 * alpha);
    let residual = if d_star == 1.0 { 0.0 } else { (lhs - rhs(d_star)).abs() / lhs };
    let regimes = classify_regimes(Design::Common, d_star, servers, m, alpha);
    Ok(RateSolution {
        design: Design::Common,
        d_star,
        risk: d_star.powf(-2.0 * alpha),
        regimes,
        residual,
    })
}

/// The four candidate terms of one server at `D`, in [`Regime`] order
/// (sample, measurement, privacy-sample, privacy-measurement).
pub fn independent_terms(c: &ServerConfig, d: f64, alpha: f64) -> [f64; 4] {
    let n = c.n as f64;
    let m = c.m as f64;
    let pm = privacy_mass(c);
    [
        d.powf(2.0 * alpha) * n,
        n * m / d,
        d.powf(2.0 * alpha - 1.0) * pm,
        m * pm / (d * d),
    ]
}

/// `F(D) = Σ_s min` of the four terms.
pub fn independent_sum(servers: &[ServerConfig], d: f64, alpha: f64) -> f64 {
    servers
        .iter()
        .map(|c| independent_terms(c, d, alpha).into_iter().fold(f64::INFINITY, f64::min))
        .sum()
}

const INNER_GRID: usize = 512;
const REFINE_ROUNDS: usize = 12;

/// `inf_{1 ≤ D ≤ upper} F(D)` and its argmin: 512-point geometric grid, then
/// repeated local grids around the incumbent, each 4× narrower in log scale.
pub fn independent_inner_inf(servers: &[ServerConfig], upper: f64, alpha: f64) -> (f64, f64) {
    let f = |d: f64| independent_sum(servers, d, alpha);
    if upper <= 1.0 {
        return (f(1.0), 1.0);
    }
    let log_hi = upper.ln();
    let mut best = (f(1.0), 1.0);
    let end = f(upper);
    if end < best.0 {
        best = (end, upper);
    }
    let step = log_hi / (INNER_GRID - 1) as f64;
    for i in 1..INNER_GRID - 1 {
        let d = (i as f64 * step).exp();
        let v = f(d);
        if v < best.0 {
            best = (v, d);
        }
    }
    let mut half = step;
    for _ in 0..REFINE_ROUNDS {
        let centre = best.1.ln();
        let lo = (centre - half).max(0.0);
        let hi = (centre + half).min(log_hi);
        const POINTS: usize = 9;
        for i in 0..POINTS {
            let d = (lo + (hi - lo) * i as f64 / (POINTS - 1) as f64).exp();
            let v = f(d);
            if v < best.0 {
                best = (v, d);
            }
        }
        half /= 4.0;
    }
    best
}

/// Largest `D* ≥ 1` with `D*^{2α} ≤ inf_{1 ≤ D ≤ D*} F(D)`.
pub fn solve_independent(servers: &[ServerConfig], alpha: f64) -> Result<RateSolution> {
    check_inputs(servers, alpha)?;
    let ok = |d: f64| d.powf(2.0 * alpha) <= independent_inner_inf(servers, d, alpha).0;
    let f1 = independent_sum(servers, 1.0, alpha);
    let d_star = if f1 <= 1.0 {
        1.0
    } else {
        // the infimum never exceeds F(1), so D* ≤ F(1)^{1/(2α)}
        let mut lo = 1.0f64;
        let mut hi = f1.powf(1.0 / (2.0 * alpha));
        if ok(hi) {
            lo = hi;
        }
        while hi / lo - 1.0 > 1e-12 {
            let mid = (lo * hi).sqrt();
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let lhs = d_star.powf(2.0 * alpha);
    let inf = independent_inner_inf(servers, d_star, alpha).0;
    let residual = if d_star == 1.0 { 0.0 } else { (lhs - inf).abs() / lhs };
    let regimes = classify_regimes(Design::Independent, d_star, servers, 0, alpha);
    Ok(RateSolution {
        design: Design::Independent,
        d_star,
        risk: d_star.powf(-2.0 * alpha),
        regimes,
        residual,
    })
}

/// Solver for the design of a federation.
pub fn solve(design: Design, servers: &[ServerConfig], alpha: f64) -> Result<RateSolution> {
    match design {
        Design::Independent => solve_independent(servers, alpha),
        Design::Common => {
            let m = servers.first().map_or(1, |c| c.m);
            solve_common(servers, m, alpha)
        }
    }
}

/// Binding term per server at `d_star`. For the common design `m` is the
/// shared number of design points; the cap `m^{2α}` binds when it is below
/// the whole sum.
pub fn classify_regimes(
    design: Design,
    d_star: f64,
    servers: &[ServerConfig],
    m: usize,
    alpha: f64,
) -> Vec<Regime> {
    match design {
        Design::Independent => servers
            .iter()
            .map(|c| {
                let terms = independent_terms(c, d_star, alpha);
                let order = [
                    Regime::SampleLimited,
                    Regime::MeasurementLimited,
                    Regime::PrivacySampleLimited,
                    Regime::PrivacyMeasurementLimited,
                ];
                let mut best = 0;
                for i in 1..4 {
                    if terms[i] < terms[best] {
                        best = i;
                    }
                }
                order[best]
            })
            .collect(),
        Design::Common => {
            let cap = (m as f64).powf(2.0 * alpha);
            let capped = cap < common_sum(servers, d_star);
            servers
                .iter()
                .map(|c| {
                    if capped {
                        Regime::DiscretizationLimited
                    } else if (c.n as f64) <= privacy_mass(c) / d_star {
                        Regime::SampleLimited
                    } else {
                        Regime::PrivacySampleLimited
                    }
                })
                .collect()
        }
    }
}

/// Homogeneous independent-design rate:
/// `(Sn)^{-1} + (Smn)^{-2α/(2α+1)} + (Smn²ε²)^{-α/(α+1)} + (Sn²ε²)^{-1}`.
pub fn homogeneous_rate_independent(s: usize, n: usize, m: usize, epsilon: f64, alpha: f64) -> f64 {
    let (s, n, m) = (s as f64, n as f64, m as f64);
    let mut r = 1.0 / (s * n) + (s * m * n).powf(-2.0 * alpha / (2.0 * alpha + 1.0));
    if epsilon.is_finite() {
        let pm = n * n * epsilon * epsilon;
        r += (s * m * pm).powf(-2.0 * alpha / (2.0 * alpha + 2.0)) + 1.0 / (s * pm);
    }
    r
}

/// Privacy terms of the homogeneous independent-design rate.
pub fn homogeneous_privacy_terms_independent(s: usize, n: usize, m: usize, epsilon: f64, alpha: f64) -> [f64; 2] {
    if epsilon.is_infinite() {
        return [0.0, 0.0];
    }
    let (s, n, m) = (s as f64, n as f64, m as f64);
    let pm = n * n * epsilon * epsilon;
    [(s * m * pm).powf(-2.0 * alpha / (2.0 * alpha + 2.0)), 1.0 / (s * pm)]
}

/// Homogeneous common-design rate: `(Sn)^{-1} + m^{-2α} + (Sn²ε²)^{-2α/(2α+1)}`.
pub fn homogeneous_rate_common(s: usize, n: usize, m: usize, epsilon: f64, alpha: f64) -> f64 {
    let [a, b, c] = homogeneous_terms_common(s, n, m, epsilon, alpha);
    a + b + c
}

/// `[(Sn)^{-1}, m^{-2α}, (Sn²ε²)^{-2α/(2α+1)}]`.
pub fn homogeneous_terms_common(s: usize, n: usize, m: usize, epsilon: f64, alpha: f64) -> [f64; 3] {
    let (s, n, m) = (s as f64, n as f64, m as f64);
    let privacy = if epsilon.is_finite() {
        (s * n * n * epsilon * epsilon).powf(-2.0 * alpha / (2.0 * alpha + 1.0))
    } else {
        0.0
    };
    [1.0 / (s * n), m.powf(-2.0 * alpha), privacy]
}

/// Largest `ε` (up to constants) for which the privacy term leads the
/// homogeneous common-design rate:
/// `min(S^{-1/2} n^{-1} m^{α+1/2}, S^{1/(4α)} n^{(1−2α)/(4α)})`.
pub fn common_privacy_threshold(s: usize, n: usize, m: usize, alpha: f64) -> f64 {
    let (s, n, m) = (s as f64, n as f64, m as f64);
    let vs_discretization = s.powf(-0.5) * m.powf(alpha + 0.5) / n;
    let vs_sampling = s.powf(1.0 / (4.0 * alpha)) * n.powf((1.0 - 2.0 * alpha) / (4.0 * alpha));
    vs_discretization.min(vs_sampling)
}

/// Direct comparison: the privacy term is the largest of the three.
pub fn privacy_dominates_common(s: usize, n: usize, m: usize, epsilon: f64, alpha: f64) -> bool {
    let [a, b, c] = homogeneous_terms_common(s, n, m, epsilon, alpha);
    c >= a && c >= b
}

/// `δ ln(1/δ) ≤ κ min(n/m, √(n/m)) ε² / N` per server; `δ = 0` or `ε = ∞` passes.
pub fn check_delta_condition(servers: &[ServerConfig], kappa: f64) -> Vec<bool> {
    let total: f64 = servers.iter().map(|c| c.n as f64).sum();
    servers
        .iter()
        .map(|c| {
            if c.delta == 0.0 || c.epsilon.is_infinite() {
                return true;
            }
            let ratio = c.n as f64 / c.m as f64;
            let lhs = c.delta * (1.0 / c.delta).ln();
            lhs <= kappa * ratio.min(ratio.sqrt()) * c.epsilon * c.epsilon / total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn server(n: usize, m: usize, eps: f64) -> ServerConfig {
        ServerConfig::new(n, m, eps, if eps.is_finite() { 1e-6 } else { 0.0 })
    }

    #[test]
    fn common_closed_forms() {
        let a = solve_common(&[server(100, 1000, f64::INFINITY)], 1000, 1.0).unwrap();
        assert!((a.d_star - 10.0).abs() / 10.0 < 1e-6, "{}", a.d_star);
        let b = solve_common(&[server(100, 1000, 0.1)], 1000, 1.0).unwrap();
        let want = 100f64.powf(1.0 / 3.0);
        assert!((b.d_star - want).abs() / want < 1e-6, "{}", b.d_star);
        assert_eq!(b.regimes, vec![Regime::PrivacySampleLimited]);
        let c = solve_common(&[server(1 << 40, 16, f64::INFINITY)], 16, 1.0).unwrap();
        assert!((c.d_star - 16.0).abs() < 1e-6);
        assert_eq!(c.regimes, vec![Regime::DiscretizationLimited]);
    }

    #[test]
    fn independent_examples() {
        let a = solve_independent(&[server(200, 64, f64::INFINITY)], 1.0).unwrap();
        let target = 12800f64.powf(1.0 / 3.0);
        assert!(a.d_star > target / 2.0 && a.d_star < target * 2.0, "{}", a.d_star);
        assert!(a.residual < 1e-6);
        let b = solve_independent(&[server(1, 1, f64::INFINITY)], 1.0).unwrap();
        assert_eq!(b.d_star, 1.0);
    }

    #[test]
    fn corollary_values() {
        assert!((homogeneous_rate_independent(1, 1, 1, 1.0, 1.0) - 4.0).abs() < 1e-12);
        assert!((homogeneous_rate_common(1, 1, 1, 1.0, 1.0) - 3.0).abs() < 1e-12);
        let r = homogeneous_rate_common(2, 50, 8, f64::INFINITY, 1.0);
        assert_eq!(r, 1.0 / 100.0 + 8f64.powi(-2));
    }

    #[test]
    fn delta_condition() {
        assert_eq!(check_delta_condition(&[ServerConfig::new(100, 4, 1.0, 0.0)], 1.0), vec![true]);
        assert_eq!(check_delta_condition(&[ServerConfig::new(100, 4, 1.0, 1e-6)], 1.0), vec![true]);
        assert_eq!(check_delta_condition(&[ServerConfig::new(100, 4, 1e-3, 0.3)], 1.0), vec![false]);
    }

    #[test]
    fn privacy_threshold_classifier() {
        for &n in &[10usize, 100, 1000] {
            for &m in &[4usize, 32, 256] {
                for &s in &[1usize, 5] {
                    let t = common_privacy_threshold(s, n, m, 1.5);
                    assert!(privacy_dominates_common(s, n, m, 0.1 * t, 1.5));
                    assert!(!privacy_dominates_common(s, n, m, 10.0 * t, 1.5));
                }
            }
        }
    }

    #[test]
    fn regimes_without_privacy() {
        let servers = [server(10, 1000, f64::INFINITY), server(1000, 2, f64::INFINITY)];
        let sol = solve_independent(&servers, 1.0).unwrap();
        for r in &sol.regimes {
            assert!(matches!(r, Regime::SampleLimited | Regime::MeasurementLimited));
        }
    }
}
