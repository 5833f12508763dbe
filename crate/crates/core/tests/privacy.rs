use fedmean::common::privatized_server_means;
use fedmean::datagen::{make_design, observe, Design, FederationConfig, ServerConfig, ServerDataset};
use fedmean::independent::{rescaled_statistic, ProjectionPlan};
use fedmean::privacy::{
    audit_sensitivity, clip, holder_sup_bound, sensitivity_bound_independent, sigma_common, sigma_independent,
    tau_common, tau_independent, ClipThresholdParams,
};
use fedmean::wavelet::{WaveletFamily, WaveletTable};
use ndarray::array;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn clip_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let (v, w): (f64, f64) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let tau = rng.random_range(0.0..5.0);
        let c = clip(v, tau);
        assert!(c.abs() <= tau);
        assert_eq!(clip(c, tau), c);
        assert!((c - clip(w, tau)).abs() <= (v - w).abs() + 1e-15);
    }
}

#[test]
fn threshold_and_noise_formulas() {
    let p = ClipThresholdParams {
        c: 1.0,
        n_total: std::f64::consts::E,
        psi_sup: 1.0,
        alpha: 1.0,
        r: 0.0,
    };
    assert!((tau_independent(0, 1, &p) - 2.0 * 2f64.powf(1.5) * (4.0 / 3.0)).abs() < 1e-12);
    let r_only = ClipThresholdParams { c: 1e-300, r: 2.0, ..p };
    assert!((tau_independent(2, 1, &r_only) - 0.25).abs() < 1e-12);
    assert!(tau_independent(4, 64, &p) < tau_independent(4, 16, &p));

    let e2 = std::f64::consts::E.powi(2);
    assert!((tau_common(e2, 0.0) - 2.0).abs() < 1e-12);
    assert!((tau_common(e2, 1.5) - 3.5).abs() < 1e-12);
    assert!((tau_common(2.0, 10.0) - 11.177_410_022_515_474).abs() < 1e-9);

    let d = 2.0 / std::f64::consts::E;
    assert!((sigma_independent(1, 0, 1, 1.0, 10, 1.0, d, 1).unwrap() - 0.2).abs() < 1e-12);
    let s1 = sigma_independent(3, 4, 64, 2.0, 50, 0.5, 1e-4, 3).unwrap();
    let s2 = sigma_independent(3, 4, 64, 2.0, 100, 0.5, 1e-4, 3).unwrap();
    assert!((s1 / s2 - 2.0).abs() < 1e-12);
    assert_eq!(sigma_independent(3, 4, 64, 2.0, 50, f64::INFINITY, 0.0, 3).unwrap(), 0.0);
    assert!(sigma_independent(3, 4, 64, 2.0, 50, 1.0, 0.0, 3).is_err());

    assert!((sigma_common(1.0, 1, 2, 1.0, d).unwrap() - 1.0).abs() < 1e-12);
    let q = sigma_common(1.0, 4, 2, 1.0, d).unwrap();
    assert!((q - 2.0).abs() < 1e-12);
    assert_eq!(sigma_common(1.0, 4, 2, f64::INFINITY, 0.0).unwrap(), 0.0);

    assert!((sensitivity_bound_independent(4, 2, 1) - 1.0).abs() < 1e-15);
    assert!((sensitivity_bound_independent(1, 3, 3) - 1.0).abs() < 1e-15);
    assert!(sensitivity_bound_independent(6, 1_000_000_000, 3) < 1e-8);
}

#[test]
fn sup_bound_dominates_generated_curves() {
    use fedmean::datagen::{CurveSpec, RandomCurve};
    let table = WaveletTable::build(WaveletFamily::Daubechies(2), 12).unwrap();
    let spec = CurveSpec {
        r: 2.0,
        l_star: 10,
        p: 0.5,
        alpha: 1.0,
        family: WaveletFamily::Daubechies(2),
    };
    let bound = holder_sup_bound(&table, 1.0, 2.0, 10);
    for key in 0..20 {
        let curve = RandomCurve::new(spec, key);
        let sup = (0..2000)
            .map(|i| curve.eval(&table, i as f64 / 2000.0).abs())
            .fold(0.0, f64::max);
        assert!(sup <= bound, "{sup} > {bound}");
    }
}

fn haar_plan(n_total: usize) -> (WaveletTable, ProjectionPlan) {
    let table = WaveletTable::build(WaveletFamily::Haar, 10).unwrap();
    let fed = FederationConfig {
        servers: vec![ServerConfig::public(n_total, 2)],
        alpha: 1.0,
        r: 1.0,
        design: Design::Independent,
    };
    let plan = ProjectionPlan::new(&table, &fed, 0, 0, 3.0).unwrap();
    (table, plan)
}

#[test]
fn identical_replacement_moves_nothing() {
    let (table, plan) = haar_plan(3);
    let cfg = ServerConfig::public(3, 2);
    let points = make_design(&cfg, Design::Independent, 1);
    let ds = observe(0, Design::Independent, cfg, |_, x| x, points, 2, false).unwrap();
    let stat = |d: &ServerDataset| rescaled_statistic(d, &table, &plan);
    let dev = audit_sensitivity(stat, &ds, 5, |_| Ok((1, ds.points.row(1).to_vec(), ds.y.row(1).to_vec()))).unwrap();
    assert_eq!(dev, 0.0);
}

#[test]
fn hand_built_haar_pair() {
    // one individual, two points; the swap moves only the level-0 detail
    // coefficient, from 0 to 1
    let (table, plan) = haar_plan(1);
    let cfg = ServerConfig::public(1, 2);
    let ds = ServerDataset::new(0, Design::Independent, cfg, array![[0.25, 0.75]], array![[1.0, 1.0]]).unwrap();
    let stat = |d: &ServerDataset| rescaled_statistic(d, &table, &plan);
    let dev = audit_sensitivity(stat, &ds, 1, |_| Ok((0, vec![0.25, 0.25], vec![2.0, 0.0]))).unwrap();
    let tau = plan.tau(0, 2);
    assert!(tau > 1.0);
    assert!((dev - 1.0 / tau).abs() < 1e-12, "{dev} vs {}", 1.0 / tau);
}

#[test]
fn common_mean_sensitivity_within_two_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..50 {
        let n = rng.random_range(1..20);
        let m = rng.random_range(1..32);
        let cfg = ServerConfig::public(n, m);
        let ds = observe(0, Design::Common, cfg, |_, x| 3.0 * x, make_design(&cfg, Design::Common, 0), trial, false)
            .unwrap();
        let tau = 1.5;
        let stat = |d: &ServerDataset| Ok(privatized_server_means(d, tau, 0)?.values);
        let zeta = ds.points.row(0).to_vec();
        let dev = audit_sensitivity(stat, &ds, 20, |_| {
            let i = rng.random_range(0..n);
            let y = (0..m).map(|_| rng.random_range(-10.0..10.0)).collect();
            Ok((i, zeta.clone(), y))
        })
        .unwrap();
        assert!(dev <= 2.0 * tau * (m as f64).sqrt() / n as f64 + 1e-12);
    }
}
