use std::collections::HashMap;

use fedmean::wavelet::{BasisIndex, WaveletCoeffs, WaveletFamily, WaveletTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Exact values of the db2 scaling function at dyadic points, by the
/// two-scale relation started from the integer eigenvector.
struct Db2Oracle {
    h: [f64; 4],
    memo: HashMap<(i64, u32), f64>,
}

impl Db2Oracle {
    fn new() -> Self {
        let d = 4.0 * std::f64::consts::SQRT_2;
        Db2Oracle {
            h: [(1.0 + SQRT3) / d, (3.0 + SQRT3) / d, (3.0 - SQRT3) / d, (1.0 - SQRT3) / d],
            memo: HashMap::new(),
        }
    }

    /// φ(num / 2^j).
    fn phi(&mut self, num: i64, j: u32) -> f64 {
        if num <= 0 || num >= 3 << j {
            return 0.0;
        }
        if j == 0 {
            return match num {
                1 => (1.0 + SQRT3) / 2.0,
                2 => (1.0 - SQRT3) / 2.0,
                _ => 0.0,
            };
        }
        if num % 2 == 0 {
            return self.phi(num / 2, j - 1);
        }
        if let Some(&v) = self.memo.get(&(num, j)) {
            return v;
        }
        // φ(t) = √2 Σ h_k φ(2t − k), 2t = num / 2^{j−1}
        let mut acc = 0.0;
        for k in 0..4i64 {
            acc += self.h[k as usize] * self.phi(num - (k << (j - 1)), j - 1);
        }
        let v = std::f64::consts::SQRT_2 * acc;
        self.memo.insert((num, j), v);
        v
    }

    /// ψ(num / 2^j) with ψ(t) = √2 Σ_{k=-2}^{1} (−1)^k h_{1−k} φ(2t − k).
    fn psi(&mut self, num: i64, j: u32) -> f64 {
        let mut acc = 0.0;
        for k in -2..=1i64 {
            let g = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 } * self.h[(1 - k) as usize];
            acc += g * self.phi(2 * num - (k << j), j);
        }
        std::f64::consts::SQRT_2 * acc
    }

    /// Periodized ψ_lk(x) with linear interpolation between dyadic points at depth `j`.
    fn psi_lk(&mut self, l: u32, k: i64, x: f64, j: u32) -> f64 {
        let n = (1i64 << l) as f64;
        let mut acc = 0.0;
        for shift in -2..=2i64 {
            let t = n * (x + shift as f64) - k as f64;
            if !(-1.0..2.0).contains(&t) {
                continue;
            }
            let s = t * (1u64 << j) as f64;
            let lo = s.floor();
            let frac = s - lo;
            let a = self.psi(lo as i64, j);
            let b = self.psi(lo as i64 + 1, j);
            acc += a + frac * (b - a);
        }
        n.sqrt() * acc
    }
}

fn db(a: usize) -> WaveletFamily {
    WaveletFamily::daubechies(a).unwrap()
}

#[test]
fn haar_examples() {
    let t = WaveletTable::build(WaveletFamily::Haar, 12).unwrap();
    assert_eq!(t.psi(BasisIndex::new(0, 0).unwrap(), 0.25), 1.0);
    let v = t.psi(BasisIndex::new(1, 0).unwrap(), 0.1);
    assert!((v - std::f64::consts::SQRT_2).abs() < 1e-12);
    for (i, &v) in t.mother_values().iter().enumerate() {
        let x = i as f64 / 4096.0;
        if x < 0.5 {
            assert_eq!(v, 1.0, "at {x}");
        } else if x < 1.0 {
            assert_eq!(v, -1.0, "at {x}");
        }
    }
}

#[test]
fn db2_matches_dyadic_oracle() {
    let t = WaveletTable::build(db(2), 14).unwrap();
    let mut oracle = Db2Oracle::new();
    // off-grid points: compare against a finer oracle
    for &(l, k, x) in &[(3u32, 2usize, 0.9), (3, 2, 0.3), (3, 7, 0.05), (2, 1, 0.4137), (5, 30, 0.99)] {
        let got = t.psi(BasisIndex::new(l, k).unwrap(), x);
        let want = oracle.psi_lk(l, k as i64, x, 18);
        assert!((got - want).abs() < 5e-3, "psi({l},{k})({x}) = {got}, oracle {want}");
    }
    // on the table grid both are exact dyadic values
    for &(l, k, x) in &[(3u32, 2usize, 0.3125), (4, 3, 0.2001953125), (2, 3, 0.0625)] {
        let got = t.psi(BasisIndex::new(l, k).unwrap(), x);
        let want = oracle.psi_lk(l, k as i64, x, 14);
        assert!((got - want).abs() < 1e-10, "psi({l},{k})({x}) = {got}, oracle {want}");
    }
}

#[test]
fn overlap_constants() {
    assert_eq!(WaveletFamily::Haar.overlap_constant(), 1);
    assert_eq!(db(2).overlap_constant(), 3);
    assert_eq!(db(4).overlap_constant(), 7);
}

#[test]
fn sup_norm_is_stable_and_tabulated() {
    let a = WaveletTable::build(db(2), 14).unwrap();
    let b = WaveletTable::build(db(2), 16).unwrap();
    assert!((a.sup_norm() - b.sup_norm()).abs() < 1e-3);
    let max = a.mother_values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert_eq!(a.sup_norm(), max);
}

#[test]
fn unit_norm_by_trapezoid() {
    let t = WaveletTable::build(db(2), 12).unwrap();
    let step = 1.0 / 4096.0;
    let sq: Vec<f64> = t.mother_values().iter().map(|v| v * v).collect();
    let integral = step * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[sq.len() - 1]));
    assert!((integral - 1.0).abs() <= 1e-4, "{integral}");
}

fn samples(t: &WaveletTable, idx: BasisIndex, cells: usize) -> Vec<f64> {
    (0..cells).map(|i| t.psi(idx, i as f64 / cells as f64)).collect()
}

#[test]
fn orthonormal_up_to_level_four() {
    let t = WaveletTable::build(db(2), 14).unwrap();
    let cells = 1 << 14;
    let mut rows = Vec::new();
    for l in 0..=4u32 {
        for k in 0..1usize << l {
            rows.push(samples(&t, BasisIndex::new(l, k).unwrap(), cells));
        }
    }
    for (a, ra) in rows.iter().enumerate() {
        for (b, rb) in rows.iter().enumerate().skip(a) {
            let ip = ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>() / cells as f64;
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((ip - want).abs() <= 1e-4, "pair ({a},{b}): {ip}");
        }
    }
}

#[test]
fn projection_of_a_basis_function() {
    let t = WaveletTable::build(db(2), 14).unwrap();
    let target = BasisIndex::new(3, 1).unwrap();
    let c = t.project(|x| t.psi(target, x), 2, 5).unwrap();
    for (level, block) in c.block_levels().zip(c.blocks()).skip(1) {
        for (k, &v) in block.iter().enumerate() {
            if level == 3 && k == 1 {
                assert!((v - 1.0).abs() < 1e-4, "{v}");
            } else {
                assert!(v.abs() <= 1e-4, "({level},{k}) = {v}");
            }
        }
    }
    assert!(c.father().unwrap().iter().all(|v| v.abs() <= 1e-4));
    // round trip
    for i in 0..200 {
        let x = (i as f64 + 0.37) / 200.0;
        assert!((t.reconstruct(&c, x) - t.psi(target, x)).abs() <= 1e-3);
    }
}

#[test]
fn constants_have_no_detail() {
    let t = WaveletTable::build(db(3), 14).unwrap();
    let c = t.project(|_| 1.0, 3, 6).unwrap();
    for block in c.blocks().skip(1) {
        assert!(block.iter().all(|v| v.abs() <= 1e-4));
    }
}

#[test]
fn zero_coefficients_reconstruct_to_zero() {
    let t = WaveletTable::build(db(2), 12).unwrap();
    let c = WaveletCoeffs::zeros(2, 5, true);
    assert_eq!(t.reconstruct(&c, 0.42), 0.0);
    let z = t.project(|_| 0.0, 2, 5).unwrap();
    assert_eq!(z.norm(), 0.0);
}

#[test]
fn parseval_for_random_coefficients() {
    let t = WaveletTable::build(db(2), 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let mut c = WaveletCoeffs::zeros(2, 6, true);
        for block in c.blocks_mut() {
            block.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let cells = 1 << 14;
        let l2: f64 = (0..cells)
            .map(|i| t.reconstruct(&c, i as f64 / cells as f64).powi(2))
            .sum::<f64>()
            / cells as f64;
        let want = c.norm().powi(2);
        assert!(((l2 - want) / want).abs() <= 1e-3, "{l2} vs {want}");
    }
}

#[test]
fn few_translates_are_active() {
    for a in [2usize, 3, 5] {
        let t = WaveletTable::build(db(a), 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(a as u64);
        for _ in 0..200 {
            let x: f64 = rng.random();
            for l in 0..8 {
                let mut count = 0;
                t.for_each_psi(l, x, |k, v| {
                    count += 1;
                    let direct = t.psi(BasisIndex::new(l, k).unwrap(), x);
                    assert!((v - direct).abs() < 1e-12);
                });
                assert!(count <= t.family().overlap_constant());
            }
        }
    }
}

#[test]
fn tables_are_deterministic() {
    let a = WaveletTable::build(db(4), 13).unwrap();
    let b = WaveletTable::build(db(4), 13).unwrap();
    assert_eq!(a, b);
}

#[test]
fn depth_bounds() {
    assert!(WaveletTable::build(db(2), 7).is_err());
    assert!(WaveletTable::build(db(2), 21).is_err());
}
