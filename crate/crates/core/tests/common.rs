use fedmean::common::{
    aggregate_means, bandwidth, check_lp_assumptions, estimate, estimate_group, lp_design_matrix, lp_weights,
    make_groups, privatized_server_means, server_weights, CommonOptions, Kernel, LocalPolyConfig,
    ServerMeans,
};
use fedmean::datagen::{make_design, observe, Design, FederationConfig, ServerConfig};
use fedmean::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn strided_groups() {
    let p = make_groups(6, 3).unwrap();
    assert_eq!(p.groups, vec![vec![0, 2, 4], vec![1, 3, 5]]);
    assert_eq!(make_groups(5, 5).unwrap().groups, vec![vec![0, 1, 2, 3, 4]]);
    let p = make_groups(7, 3).unwrap();
    let sizes: Vec<usize> = p.groups.iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![3, 2, 2]);
    assert!(make_groups(4, 0).is_err());
    assert!(make_groups(4, 5).is_err());
}

#[test]
fn design_matrix_examples() {
    let cfg = LocalPolyConfig::new(1, 0.1, Kernel::Uniform);
    assert_eq!(lp_design_matrix(&[0.9], 0.2, &cfg).iter().copied().fold(0.0, f64::max), 0.0);
    let cfg0 = LocalPolyConfig::new(0, 0.1, Kernel::Uniform);
    let b = lp_design_matrix(&[0.3], 0.3, &cfg0);
    assert!((b[(0, 0)] - Kernel::Uniform.eval(0.0) / 0.1).abs() < 1e-12);
    let pair = lp_design_matrix(&[0.25, 0.35], 0.3, &cfg);
    assert!(pair[(0, 1)].abs() < 1e-12 && pair[(1, 0)].abs() < 1e-12);
}

fn random_points(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.random::<f64>()).collect()
}

#[test]
fn weights_reproduce_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for degree in 0..=2usize {
        for kernel in [Kernel::GaussianTruncated, Kernel::Epanechnikov, Kernel::Uniform] {
            let pts = random_points(&mut rng, 200);
            let cfg = LocalPolyConfig::new(degree, 0.2, kernel);
            let coef: Vec<f64> = (0..=degree).map(|_| rng.random_range(-3.0..3.0)).collect();
            let q = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
            for i in 0..64 {
                let x = (i as f64 + 0.5) / 64.0;
                let w = lp_weights(&pts, x, &cfg).unwrap();
                let sum: f64 = w.iter().sum();
                assert!((sum - 1.0).abs() < 1e-10);
                for k in 1..=degree {
                    let moment: f64 = pts.iter().zip(&w).map(|(z, wj)| (z - x).powi(k as i32) * wj).sum();
                    assert!(moment.abs() < 1e-10, "degree {degree} moment {k}: {moment}");
                }
                for (z, wj) in pts.iter().zip(&w) {
                    if (z - x).abs() > 0.2 {
                        assert_eq!(*wj, 0.0);
                    }
                }
                let fit: f64 = pts.iter().zip(&w).map(|(z, wj)| q(*z) * wj).sum();
                assert!((fit - q(x)).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn group_estimates() {
    let zeta: Vec<f64> = (1..=40).map(|j| j as f64 / 40.0).collect();
    let group: Vec<usize> = (0..40).step_by(2).collect();
    let cfg = LocalPolyConfig::new(1, 0.2, Kernel::GaussianTruncated);
    let constant = vec![2.5; 40];
    let line: Vec<f64> = zeta.iter().map(|z| 1.0 - 3.0 * z).collect();
    for x in [0.0, 0.33, 0.5, 1.0] {
        assert!((estimate_group(&group, &zeta, &constant, x, &cfg).unwrap() - 2.5).abs() < 1e-10);
        assert!((estimate_group(&group, &zeta, &line, x, &cfg).unwrap() - (1.0 - 3.0 * x)).abs() < 1e-8);
        assert_eq!(estimate_group(&group, &zeta, &[0.0; 40], x, &cfg).unwrap(), 0.0);
    }
}

#[test]
fn singular_design_names_the_condition() {
    let cfg = LocalPolyConfig::new(1, 0.1, Kernel::Uniform);
    let err = lp_weights(&[0.5, 0.5, 0.5], 0.5, &cfg).unwrap_err();
    assert!(matches!(err, Error::LocalDesignSingular { .. }));
    assert!(err.to_string().contains("LP1"));
}

#[test]
fn clipped_means_examples() {
    let cfg = ServerConfig::public(4, 3);
    let points = make_design(&cfg, Design::Common, 0);
    let ds = observe(0, Design::Common, cfg, |i, x| i as f64 * x, points.clone(), 0, false).unwrap();
    let plain = privatized_server_means(&ds, 1e9, 0).unwrap();
    for (j, v) in plain.values.iter().enumerate() {
        let col = ds.y.column(j).sum() / 4.0;
        assert!((v - col).abs() < 1e-14);
    }
    let fives = observe(0, Design::Common, cfg, |_, _| 5.0, points, 0, true).unwrap();
    assert!(privatized_server_means(&fives, 1.0, 0).unwrap().values.iter().all(|&v| v == 1.0));
    let bad = observe(0, Design::Common, ServerConfig::new(4, 3, 1.0, 0.0), |_, _| 0.0, make_design(&cfg, Design::Common, 0), 0, true)
        .unwrap();
    assert!(privatized_server_means(&bad, 1.0, 0).is_err());
}

#[test]
fn pooling_weights() {
    let a = ServerConfig::public(100, 8);
    let b = ServerConfig::new(100, 8, 0.01, 1e-4);
    let w = server_weights(&[a, b], 10).unwrap();
    assert!((w[0] - 100.0 / 100.1).abs() < 1e-12);
    assert_eq!(server_weights(&[b, b], 10).unwrap(), vec![0.5, 0.5]);
    let single = ServerMeans { server: 0, values: vec![1.0, 2.0], sigma: 0.0 };
    assert_eq!(aggregate_means(vec![single], &[a], 4).unwrap().values, vec![1.0, 2.0]);

    // without noise the pool lies between the servers
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let servers = vec![a, ServerConfig::public(30, 8), ServerConfig::new(60, 8, 0.5, 1e-4)];
    let per: Vec<ServerMeans> = (0..3)
        .map(|s| ServerMeans { server: s, values: random_points(&mut rng, 8), sigma: 0.0 })
        .collect();
    let pooled = aggregate_means(per.clone(), &servers, 4).unwrap();
    for j in 0..8 {
        let lo = per.iter().map(|p| p.values[j]).fold(f64::INFINITY, f64::min);
        let hi = per.iter().map(|p| p.values[j]).fold(f64::NEG_INFINITY, f64::max);
        assert!(pooled.values[j] >= lo - 1e-15 && pooled.values[j] <= hi + 1e-15);
    }
}

#[test]
fn local_design_diagnostics() {
    let zeta: Vec<f64> = (1..=64).map(|j| j as f64 / 64.0).collect();
    let plan = make_groups(64, 8).unwrap();
    let uniform = LocalPolyConfig::new(0, 1.0 / 8.0 + 1e-9, Kernel::Uniform);
    assert!(check_lp_assumptions(&plan, &zeta, &uniform).min_eigenvalue > 0.0);

    let same = make_groups(4, 4).unwrap();
    let lin = LocalPolyConfig::new(1, 0.2, Kernel::Uniform);
    assert!(check_lp_assumptions(&same, &[0.5; 4], &lin).min_eigenvalue.abs() < 1e-12);

    // closed-form 2x2 eigenvalues scanned on a much finer x grid
    let h = bandwidth(64, 8, plan.count(), 1);
    let cfg = LocalPolyConfig::new(1, h, Kernel::GaussianTruncated);
    let report = check_lp_assumptions(&plan, &zeta, &cfg);
    let kernel = |u: f64| {
        if u.abs() > 1.0 {
            0.0
        } else {
            (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt() / 0.682_689_492_137_085_9
        }
    };
    let mut oracle = f64::INFINITY;
    for g in &plan.groups {
        for i in 0..=20_000 {
            let x = i as f64 / 20_000.0;
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for &j in g {
                let u = (zeta[j] - x) / h;
                let k = kernel(u);
                a += k;
                b += u * k;
                c += u * u * k;
            }
            let scale = g.len() as f64 * h;
            let (a, b, c) = (a / scale, b / scale, c / scale);
            let lambda = 0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt();
            oracle = oracle.min(lambda);
        }
    }
    assert!(oracle > 0.0);
    assert!((report.min_eigenvalue - oracle).abs() <= 0.1 * oracle, "{} vs {oracle}", report.min_eigenvalue);
}

#[test]
fn linear_mean_recovered_without_noise() {
    let fed = FederationConfig {
        servers: vec![ServerConfig::public(5000, 50), ServerConfig::public(3000, 50)],
        alpha: 1.5,
        r: 1.0,
        design: Design::Common,
    };
    let data: Vec<_> = fed
        .servers
        .iter()
        .enumerate()
        .map(|(s, c)| observe(s, Design::Common, *c, |_, x| 0.4 + 0.7 * x, make_design(c, Design::Common, 0), 0, true).unwrap())
        .collect();
    let est = estimate(&data, &fed, &CommonOptions::default(), 1).unwrap();
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        assert!((est.eval(x).unwrap() - (0.4 + 0.7 * x)).abs() <= 1e-3);
    }
}

#[test]
fn noise_only_error_shrinks_with_n() {
    let risk = |n: usize| {
        let cfg = ServerConfig::public(n, 32);
        let fed = FederationConfig { servers: vec![cfg], alpha: 1.0, r: 1e-9, design: Design::Common };
        (0..10u64)
            .map(|seed| {
                let data = vec![observe(0, Design::Common, cfg, |_, _| 0.0, make_design(&cfg, Design::Common, 0), seed, false).unwrap()];
                let est = estimate(&data, &fed, &CommonOptions::default(), seed).unwrap();
                (0..=100).map(|i| est.eval(i as f64 / 100.0).unwrap().powi(2)).sum::<f64>() / 101.0
            })
            .sum::<f64>()
    };
    let (small, mid, large) = (risk(20), risk(200), risk(2000));
    assert!(small > mid && mid > large, "{small} {mid} {large}");
}

#[test]
fn mixed_designs_rejected() {
    let fed = FederationConfig {
        servers: vec![ServerConfig::public(5, 4)],
        alpha: 1.0,
        r: 1.0,
        design: Design::Common,
    };
    let c = fed.servers[0];
    let data = vec![observe(0, Design::Independent, c, |_, _| 0.0, make_design(&c, Design::Independent, 0), 0, true).unwrap()];
    assert!(matches!(estimate(&data, &fed, &CommonOptions::default(), 0), Err(Error::DesignMismatch(_))));
}
