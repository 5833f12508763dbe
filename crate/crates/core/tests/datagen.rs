use fedmean::datagen::{
    make_design, observe, read_datasets_csv, sample_curve, simulate_federation, true_mean, write_datasets_csv,
    CurveSpec, Design, FederationConfig, ServerConfig,
};
use fedmean::wavelet::{BasisIndex, WaveletFamily, WaveletTable};

fn spec(p: f64) -> CurveSpec {
    CurveSpec {
        r: 2.0,
        l_star: 8,
        p,
        alpha: 1.0,
        family: WaveletFamily::Daubechies(2),
    }
}

#[test]
fn degenerate_sign_probability_gives_the_mean() {
    let s = spec(1.0);
    assert_eq!(sample_curve(&s, 99), true_mean(&s));
}

#[test]
fn monte_carlo_mean_of_root_coefficient() {
    let s = spec(0.9);
    let idx = BasisIndex::new(0, 0).unwrap();
    let mean = (0..10_000u64).map(|seed| sample_curve(&s, seed).get(idx)).sum::<f64>() / 10_000.0;
    assert!((mean - 1.6).abs() <= 0.05, "{mean}");
}

#[test]
fn sampled_coefficients_sit_on_the_holder_boundary() {
    let s = spec(0.7);
    for seed in 0..20 {
        let c = sample_curve(&s, seed);
        for l in 0..=s.l_star {
            assert!(c.level(l).iter().all(|v| v.abs() == s.magnitude(l)));
        }
    }
}

#[test]
fn common_grid() {
    let d = make_design(&ServerConfig::public(3, 4), Design::Common, 0);
    for row in d.rows() {
        assert_eq!(row.to_vec(), vec![0.25, 0.5, 0.75, 1.0]);
    }
}

#[test]
fn independent_points_pass_kolmogorov_smirnov() {
    let d = make_design(&ServerConfig::public(1000, 100), Design::Independent, 17);
    let mut v: Vec<f64> = d.iter().copied().collect();
    assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let ks = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0f64, f64::max);
    // asymptotic 1% critical value
    assert!(ks < 1.628 / n.sqrt(), "D = {ks}");
}

#[test]
fn pure_noise_has_unit_variance() {
    let cfg = ServerConfig::public(1000, 100);
    let points = make_design(&cfg, Design::Independent, 3);
    let ds = observe(0, Design::Independent, cfg, |_, _| 0.0, points, 4, false).unwrap();
    let n = ds.y.len() as f64;
    let mean = ds.y.sum() / n;
    let var = ds.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 1.0).abs() <= 0.02, "{var}");
}

#[test]
fn noiseless_observations_are_curve_values() {
    let cfg = ServerConfig::public(5, 7);
    let points = make_design(&cfg, Design::Independent, 8);
    let ds = observe(0, Design::Independent, cfg, |i, x| i as f64 + x, points.clone(), 1, true).unwrap();
    for ((i, j), &y) in ds.y.indexed_iter() {
        assert_eq!(y, i as f64 + points[(i, j)]);
    }
    let flat = observe(0, Design::Common, cfg, |_, _| 3.0, make_design(&cfg, Design::Common, 0), 1, true).unwrap();
    assert!(flat.y.iter().all(|&v| v == 3.0));
}

fn federation(design: Design) -> FederationConfig {
    FederationConfig {
        servers: vec![ServerConfig::new(6, 5, 1.0, 1e-3), ServerConfig::public(4, 5)],
        alpha: 1.0,
        r: 2.0,
        design,
    }
}

#[test]
fn same_seed_same_data() {
    let table = WaveletTable::build(WaveletFamily::Daubechies(2), 12).unwrap();
    let fed = federation(Design::Independent);
    let a = simulate_federation(&fed, &spec(0.9), &table, 5, false).unwrap();
    let b = simulate_federation(&fed, &spec(0.9), &table, 5, false).unwrap();
    let c = simulate_federation(&fed, &spec(0.9), &table, 6, false).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn csv_round_trip_is_exact() {
    let table = WaveletTable::build(WaveletFamily::Daubechies(2), 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for design in [Design::Independent, Design::Common] {
        let fed = federation(design);
        let data = simulate_federation(&fed, &spec(0.9), &table, 21, false).unwrap();
        let path = dir.path().join(format!("{design}.csv"));
        write_datasets_csv(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("server,individual,j,zeta,y\n"));
        assert_eq!(read_datasets_csv(&path, &fed).unwrap(), data);
    }
}

#[test]
fn csv_with_missing_cells_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    std::fs::write(&path, "server,individual,j,zeta,y\n0,0,0,0.5,1.0\n").unwrap();
    assert!(read_datasets_csv(&path, &federation(Design::Independent)).is_err());
}
