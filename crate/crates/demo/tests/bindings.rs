use fedmean::rates::solve_independent;
use fedmean::datagen::ServerConfig;
use fedmean_demo::{estimate_run, rate_summary, wavelet_samples};

#[test]
fn haar_samples() {
    let v = wavelet_samples(1, 0, 0, 4).unwrap();
    assert_eq!(v, vec![1.0, 1.0, -1.0, -1.0]);
    assert!(wavelet_samples(0, 0, 0, 4).is_err());
    assert!(wavelet_samples(2, 2, 9, 4).is_err());
}

#[test]
fn rates_match_the_solver() {
    let s = rate_summary("independent", 2, 100, 16, 1.0, 1.0).unwrap();
    let want = solve_independent(&[ServerConfig::new(100, 16, 1.0, 1e-6); 2], 1.0).unwrap();
    assert_eq!(s.d_star, want.d_star);
    assert_eq!(s.regime, want.regimes[0].to_string());
    assert!(rate_summary("mixed", 1, 1, 1, 1.0, 1.0).is_err());
}

#[test]
fn estimator_run_is_thinned_and_finite() {
    let r = estimate_run("common", 50, 32, 2.0, 3, 16).unwrap();
    assert_eq!(r.grid.len(), 256);
    assert_eq!(r.truth.len(), r.estimate.len());
    assert!(r.imse.is_finite() && r.imse > 0.0);
    let again = estimate_run("common", 50, 32, 2.0, 3, 16).unwrap();
    assert_eq!(r.estimate, again.estimate);
}
