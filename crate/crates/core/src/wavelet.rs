//! Periodized compactly supported orthonormal wavelets on [0, 1].
//!
//! Scaling (`φ`) and wavelet (`ψ`) functions have no closed form beyond
//! Haar, so they are tabulated once on a dyadic grid with the cascade
//! algorithm: exact values at the integers come from the eigenvector of the
//! refinement matrix, and each refinement pass fills in the midpoints via
//! `φ(x) = √2 Σ h_k φ(2x − k)`. Off-grid arguments are linearly interpolated.
//!
//! Conventions:
//! * father support `[0, 2A − 1]`, mother support `[1 − A, A]` with
//!   `g_k = (−1)^k h_{1−k}`;
//! * `ψ_lk(x) = 2^{l/2} Σ_n ψ(2^l (x + n) − k)` (periodized), likewise for `φ`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Extremal-phase Daubechies scaling filters, A = 2..=10 vanishing moments.
// digits as tabulated, beyond f64 precision
#[allow(clippy::excessive_precision)]
const DAUBECHIES_FILTERS: [&[f64]; 9] = [
    &[
        0.482_962_913_144_534_14,
        0.836_516_303_737_807_91,
        0.224_143_868_042_013_38,
        -0.129_409_522_551_260_38,
    ],
    &[
        0.332_670_552_950_082_62,
        0.806_891_509_311_092_58,
        0.459_877_502_118_491_57,
        -0.135_011_020_010_254_59,
        -0.085_441_273_882_026_662,
        0.035_226_291_885_709_537,
    ],
    &[
        0.230_377_813_308_896_50,
        0.714_846_570_552_915_65,
        0.630_880_767_929_858_91,
        -0.027_983_769_416_859_854,
        -0.187_034_811_719_093_08,
        0.030_841_381_835_560_764,
        0.032_883_011_666_885_200,
        -0.010_597_401_785_069_032,
    ],
    &[
        0.160_102_397_974_192_91,
        0.603_829_269_797_189_67,
        0.724_308_528_437_772_93,
        0.138_428_145_901_320_73,
        -0.242_294_887_066_382_03,
        -0.032_244_869_584_638_375,
        0.077_571_493_840_045_714,
        -0.006_241_490_212_798_274_3,
        -0.012_580_751_999_081_999,
        0.003_335_725_285_473_771_3,
    ],
    &[
        0.111_540_743_350_109_46,
        0.494_623_890_398_453_09,
        0.751_133_908_021_095_35,
        0.315_250_351_709_197_63,
        -0.226_264_693_965_439_82,
        -0.129_766_867_567_261_94,
        0.097_501_605_587_323_049,
        0.027_522_865_530_305_729,
        -0.031_582_039_317_486_030,
        0.000_553_842_201_161_496_14,
        0.004_777_257_510_945_510_6,
        -0.001_077_301_085_308_479_6,
    ],
    &[
        0.077_852_054_085_009_179,
        0.396_539_319_481_917_31,
        0.729_132_090_846_235_12,
        0.469_782_287_405_193_12,
        -0.143_906_003_928_564_98,
        -0.224_036_184_993_874_98,
        0.071_309_219_266_830_265,
        0.080_612_609_151_083_072,
        -0.038_029_936_935_014_414,
        -0.016_574_541_630_666_881,
        0.012_550_998_556_099_841,
        0.000_429_577_972_921_366_52,
        -0.001_801_640_704_047_490_9,
        0.000_353_713_799_974_520_25,
    ],
    &[
        0.054_415_842_243_104_010,
        0.312_871_590_914_299_97,
        0.675_630_736_297_289_81,
        0.585_354_683_654_206_71,
        -0.015_829_105_256_349_306,
        -0.284_015_542_961_546_93,
        0.000_472_484_573_913_282_77,
        0.128_747_426_620_478_46,
        -0.017_369_301_001_807_546,
        -0.044_088_253_930_794_752,
        0.013_981_027_917_398_282,
        0.008_746_094_047_405_776_7,
        -0.004_870_352_993_451_574_3,
        -0.000_391_740_373_376_947_05,
        0.000_675_449_406_450_569_37,
        -0.000_117_476_784_124_769_53,
    ],
    &[
        0.038_077_947_363_878_347,
        0.243_834_674_612_590_35,
        0.604_823_123_690_111_11,
        0.657_288_078_051_300_54,
        0.133_197_385_825_007_58,
        -0.293_273_783_279_174_91,
        -0.096_840_783_222_976_461,
        0.148_540_749_338_106_38,
        0.030_725_681_479_333_379,
        -0.067_632_829_061_329_974,
        0.000_250_947_114_831_451_96,
        0.022_361_662_123_679_097,
        -0.004_723_204_757_751_397_3,
        -0.004_281_503_682_463_429_8,
        0.001_847_646_883_056_226_5,
        0.000_230_385_763_523_195_97,
        -0.000_251_963_188_942_710_14,
        0.000_039_347_320_316_271_599,
    ],
    &[
        0.026_670_057_900_555_554,
        0.188_176_800_077_691_49,
        0.527_201_188_931_725_59,
        0.688_459_039_453_603_57,
        0.281_172_343_660_577_46,
        -0.249_846_424_327_315_38,
        -0.195_946_274_377_377_04,
        0.127_369_340_335_793_26,
        0.093_057_364_603_572_351,
        -0.071_394_147_166_397_087,
        -0.029_457_536_821_875_813,
        0.033_212_674_059_341_002,
        0.003_606_553_566_956_169_7,
        -0.010_733_175_483_330_575,
        0.001_395_351_747_052_901_2,
        0.001_992_405_295_185_056_1,
        -0.000_685_856_694_959_711_63,
        -0.000_116_466_855_129_285_45,
        0.000_093_588_670_320_069_591,
        -0.000_013_264_202_894_521_245,
    ],
];

const HAAR_FILTER: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];

pub const MIN_DEPTH: u32 = 8;
pub const MAX_DEPTH: u32 = 20;
pub const DEFAULT_DEPTH: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletFamily {
    Haar,
    /// Daubechies extremal phase with the given number of vanishing moments (2..=10).
    Daubechies(u8),
}

impl WaveletFamily {
    pub fn daubechies(vanishing_moments: usize) -> Result<Self> {
        match vanishing_moments {
            1 => Ok(WaveletFamily::Haar),
            2..=10 => Ok(WaveletFamily::Daubechies(vanishing_moments as u8)),
            a => Err(Error::UnsupportedFamily(format!("db{a}"))),
        }
    }

    /// Daubechies family with `⌈α⌉ + 1` vanishing moments, so that `A > α`.
    pub fn for_smoothness(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
        }
        let a = alpha.ceil() as usize + 1;
        match a {
            2..=10 => Ok(WaveletFamily::Daubechies(a as u8)),
            _ => Err(Error::UnsupportedFamily(format!(
                "db{a} (needed for alpha = {alpha})"
            ))),
        }
    }

    pub fn vanishing_moments(self) -> usize {
        match self {
            WaveletFamily::Haar => 1,
            WaveletFamily::Daubechies(a) => a as usize,
        }
    }

    pub fn filter(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR_FILTER,
            WaveletFamily::Daubechies(a) => DAUBECHIES_FILTERS[a as usize - 2],
        }
    }

    /// Length of the father support, `2A − 1`.
    pub fn support_width(self) -> usize {
        2 * self.vanishing_moments() - 1
    }

    /// Largest number of same-level translates whose periodized supports
    /// contain a common point.
    pub fn overlap_constant(self) -> usize {
        self.support_width()
    }

    /// Smallest level at which a periodized translate does not wrap onto
    /// itself: `⌈log₂(2A − 1)⌉`, and 0 for Haar.
    pub fn default_coarsest_level(self) -> u32 {
        let w = self.support_width();
        let mut l = 0;
        while (1usize << l) < w {
            l += 1;
        }
        l
    }

    fn validate(self) -> Result<()> {
        match self {
            WaveletFamily::Daubechies(a) if !(2..=10).contains(&a) => {
                Err(Error::UnsupportedFamily(format!("db{a}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveletFamily::Haar => f.write_str("haar"),
            WaveletFamily::Daubechies(a) => write!(f, "db{a}"),
        }
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "haar" || lower == "db1" {
            return Ok(WaveletFamily::Haar);
        }
        lower
            .strip_prefix("db")
            .and_then(|a| a.parse::<usize>().ok())
            .map_or_else(
                || Err(Error::UnsupportedFamily(s.to_string())),
                WaveletFamily::daubechies,
            )
    }
}

/// Position in the multiresolution tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex {
    pub level: u32,
    pub k: usize,
}

impl BasisIndex {
    pub fn new(level: u32, k: usize) -> Result<Self> {
        if level >= usize::BITS || k >= 1usize << level {
            return Err(Error::invalid(
                "k",
                format!("translate {k} outside 0..2^{level}"),
            ));
        }
        Ok(BasisIndex { level, k })
    }
}

/// Tabulated father and mother functions for one family.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletTable {
    family: WaveletFamily,
    depth: u32,
    scale: f64,
    father: Vec<f64>,
    mother: Vec<f64>,
    sup_norm: f64,
}

impl WaveletTable {
    /// Cascade tabulation at step `2^{-depth}`.
    pub fn build(family: WaveletFamily, depth: u32) -> Result<Self> {
        family.validate()?;
        if !(MIN_DEPTH..=MAX_DEPTH).contains(&depth) {
            return Err(Error::DepthOutOfRange(depth));
        }
        let h = family.filter();
        let a = family.vanishing_moments();
        let width = family.support_width();

        let mut father = integer_values(family)?;
        for j in 0..depth {
            father = refine(&father, h, 1usize << j);
        }

        // ψ(x) = √2 Σ_k g_k φ(2x − k), g_k = (−1)^k h_{1−k}, k = 2 − 2A ..= 1.
        let cells = 1usize << depth;
        let len = width * cells + 1;
        let last = (len - 1) as i64;
        let mut mother = vec![0.0; len];
        for (i, out) in mother.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in (2 - 2 * a as i64)..=1 {
                let hk = h[(1 - k) as usize];
                let g = if k.rem_euclid(2) == 0 { hk } else { -hk };
                // father index of 2x − k where x = (1 − A) + i / 2^depth
                let idx = (2 * (1 - a as i64) - k) * cells as i64 + 2 * i as i64;
                if (0..=last).contains(&idx) {
                    acc += g * father[idx as usize];
                }
            }
            *out = SQRT_2 * acc;
        }
        if family == WaveletFamily::Haar {
            // the cascade is exact up to rounding of 1/√2 · √2; use the closed form
            for v in father.iter_mut() {
                *v = v.round();
            }
            for v in mother.iter_mut() {
                *v = v.round();
            }
        }
        let sup_norm = mother.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        Ok(WaveletTable {
            family,
            depth,
            scale: cells as f64,
            father,
            mother,
            sup_norm,
        })
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `‖ψ‖_∞` over the tabulated values.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Father values on `[0, 2A − 1]` at step `2^{-depth}`.
    pub fn father_values(&self) -> &[f64] {
        &self.father
    }

    /// Mother values on `[1 − A, A]` at step `2^{-depth}`.
    pub fn mother_values(&self) -> &[f64] {
        &self.mother
    }

    fn mother_offset(&self) -> f64 {
        1.0 - self.family.vanishing_moments() as f64
    }

    fn width(&self) -> f64 {
        self.family.support_width() as f64
    }

    #[inline]
    fn sample(&self, values: &[f64], t: f64) -> f64 {
        let s = t * self.scale;
        if !(s >= 0.0) {
            return 0.0;
        }
        let last = values.len() - 1;
        let i = s.floor() as usize;
        if i >= last {
            return if i == last && s == last as f64 {
                values[last]
            } else {
                0.0
            };
        }
        let frac = s - i as f64;
        values[i] + frac * (values[i + 1] - values[i])
    }

    /// Unscaled, unperiodized mother function `ψ(t)`.
    #[inline]
    pub fn mother(&self, t: f64) -> f64 {
        self.sample(&self.mother, t - self.mother_offset())
    }

    /// Unscaled, unperiodized father function `φ(t)`.
    #[inline]
    pub fn father(&self, t: f64) -> f64 {
        self.sample(&self.father, t)
    }

    fn periodized(&self, mother: bool, level: u32, k: usize, x: f64) -> f64 {
        let n = (1u64 << level) as f64;
        let offset = if mother { self.mother_offset() } else { 0.0 };
        let end = offset + self.width();
        let t = n * x - k as f64;
        let mut u = (t - offset).rem_euclid(n) + offset;
        let mut acc = 0.0;
        while u < end {
            acc += if mother { self.mother(u) } else { self.father(u) };
            u += n;
        }
        level_scale(level) * acc
    }

    /// `ψ_lk(x)` for the periodized basis.
    pub fn psi(&self, idx: BasisIndex, x: f64) -> f64 {
        self.periodized(true, idx.level, idx.k, x)
    }

    /// `φ_lk(x)` for the periodized basis.
    pub fn phi(&self, idx: BasisIndex, x: f64) -> f64 {
        self.periodized(false, idx.level, idx.k, x)
    }

    /// Calls `f(k, ψ_lk(x))` for every translate at `level` that is nonzero at `x`.
    pub fn for_each_psi(&self, level: u32, x: f64, f: impl FnMut(usize, f64)) {
        self.for_each(true, level, x, f)
    }

    /// Calls `f(k, φ_lk(x))` for every translate at `level` that is nonzero at `x`.
    pub fn for_each_phi(&self, level: u32, x: f64, f: impl FnMut(usize, f64)) {
        self.for_each(false, level, x, f)
    }

    fn for_each(&self, mother: bool, level: u32, x: f64, mut f: impl FnMut(usize, f64)) {
        let n = 1usize << level;
        let width = self.family.support_width();
        if n < width {
            for k in 0..n {
                let v = self.periodized(mother, level, k, x);
                if v != 0.0 {
                    f(k, v);
                }
            }
            return;
        }
        let scale = level_scale(level);
        let t = n as f64 * x;
        let base = t.floor() as i64;
        // u = t − k must lie in [offset, offset + width)
        let (first, values, offset) = if mother {
            let a = self.family.vanishing_moments() as i64;
            (base - a + 1, &self.mother, self.mother_offset())
        } else {
            (base - width as i64 + 1, &self.father, 0.0)
        };
        for j in 0..width as i64 {
            let k = first + j;
            let v = self.sample(values, t - k as f64 - offset);
            if v != 0.0 {
                f(k.rem_euclid(n as i64) as usize, scale * v);
            }
        }
    }

    /// Trapezoid projection of `f` onto the father functions at `coarsest`
    /// and the mother functions at levels `coarsest..=finest`, on a grid of
    /// `2^{min(finest + depth, 22)}` cells so the finest level is sampled at
    /// the table resolution.
    pub fn project(&self, f: impl Fn(f64) -> f64, coarsest: u32, finest: u32) -> Result<WaveletCoeffs> {
        if finest < coarsest || finest > 12 {
            return Err(Error::invalid(
                "finest",
                format!("need coarsest <= finest <= 12, got {coarsest}..={finest}"),
            ));
        }
        let cells = 1usize << (finest + self.depth).clamp(14, 22);
        let dx = 1.0 / cells as f64;
        let mut out = WaveletCoeffs::zeros(coarsest, finest, true);
        for i in 0..=cells {
            let x = i as f64 * dx;
            let w = if i == 0 || i == cells { 0.5 * dx } else { dx };
            let fx = f(x) * w;
            if fx == 0.0 {
                continue;
            }
            let father = out.father_mut().expect("projection keeps father terms");
            self.for_each_phi(coarsest, x, |k, v| father[k] += fx * v);
            for level in coarsest..=finest {
                let row = out.level_mut(level);
                self.for_each_psi(level, x, |k, v| row[k] += fx * v);
            }
        }
        Ok(out)
    }

    /// Finite basis expansion at `x`, father terms included.
    pub fn reconstruct(&self, coeffs: &WaveletCoeffs, x: f64) -> f64 {
        let mut acc = 0.0;
        if let Some(father) = coeffs.father() {
            self.for_each_phi(coeffs.coarsest(), x, |k, v| acc += father[k] * v);
        }
        for level in coeffs.coarsest()..=coeffs.finest() {
            let row = coeffs.level(level);
            self.for_each_psi(level, x, |k, v| acc += row[k] * v);
        }
        acc
    }
}

#[inline]
fn level_scale(level: u32) -> f64 {
    (2f64).powf(level as f64 / 2.0)
}

/// φ at the integers `0..=2A−1`, normalised to sum to one.
fn integer_values(family: WaveletFamily) -> Result<Vec<f64>> {
    let width = family.support_width();
    if let WaveletFamily::Haar = family {
        // right-continuous indicator of [0, 1)
        return Ok(vec![1.0, 0.0]);
    }
    let h = family.filter();
    // unknowns φ(1..width−1); φ(0) = φ(width) = 0
    let dim = width - 1;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for row in 0..dim {
        let n = row as i64 + 1;
        for col in 0..dim {
            let j = col as i64 + 1;
            let k = 2 * n - j;
            if (0..h.len() as i64).contains(&k) {
                m[(row, col)] = SQRT_2 * h[k as usize];
            }
        }
        m[(row, row)] -= 1.0;
    }
    // the eigen-system is rank deficient by one; replace the last equation
    // by the partition-of-unity normalisation
    for col in 0..dim {
        m[(dim - 1, col)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(dim);
    rhs[dim - 1] = 1.0;
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::UnsupportedFamily(format!("{family}: singular refinement matrix")))?;
    let mut out = vec![0.0; width + 1];
    out[1..width].copy_from_slice(sol.as_slice());
    Ok(out)
}

/// One cascade pass: values at step `1/cells` to step `1/(2 cells)`.
fn refine(values: &[f64], h: &[f64], cells: usize) -> Vec<f64> {
    let last = values.len() as i64 - 1;
    let mut out = vec![0.0; 2 * (values.len() - 1) + 1];
    for (i, v) in values.iter().enumerate() {
        out[2 * i] = *v;
    }
    for i in 0..values.len() - 1 {
        let mut acc = 0.0;
        for (k, hk) in h.iter().enumerate() {
            let idx = (2 * i + 1) as i64 - (k * cells) as i64;
            if (0..=last).contains(&idx) {
                acc += hk * values[idx as usize];
            }
        }
        out[2 * i + 1] = SQRT_2 * acc;
    }
    out
}

/// Coefficients of a truncated periodized expansion: optional father block
/// at `coarsest`, then one mother block per level `coarsest..=finest`, with
/// `2^l` entries per level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    coarsest: u32,
    father: Option<Vec<f64>>,
    detail: Vec<Vec<f64>>,
}

impl WaveletCoeffs {
    pub fn zeros(coarsest: u32, finest: u32, with_father: bool) -> Self {
        assert!(finest >= coarsest, "finest level below coarsest");
        WaveletCoeffs {
            coarsest,
            father: with_father.then(|| vec![0.0; 1 << coarsest]),
            detail: (coarsest..=finest).map(|l| vec![0.0; 1 << l]).collect(),
        }
    }

    pub fn from_parts(coarsest: u32, father: Option<Vec<f64>>, detail: Vec<Vec<f64>>) -> Result<Self> {
        if detail.is_empty() {
            return Err(Error::DimensionMismatch("no detail levels".into()));
        }
        if let Some(f) = &father {
            if f.len() != 1 << coarsest {
                return Err(Error::DimensionMismatch(format!(
                    "father block has {} entries, expected {}",
                    f.len(),
                    1usize << coarsest
                )));
            }
        }
        for (i, row) in detail.iter().enumerate() {
            let l = coarsest as usize + i;
            if row.len() != 1 << l {
                return Err(Error::DimensionMismatch(format!(
                    "level {l} has {} entries, expected {}",
                    row.len(),
                    1usize << l
                )));
            }
        }
        Ok(WaveletCoeffs {
            coarsest,
            father,
            detail,
        })
    }

    pub fn coarsest(&self) -> u32 {
        self.coarsest
    }

    pub fn finest(&self) -> u32 {
        self.coarsest + self.detail.len() as u32 - 1
    }

    pub fn father(&self) -> Option<&[f64]> {
        self.father.as_deref()
    }

    pub fn father_mut(&mut self) -> Option<&mut [f64]> {
        self.father.as_deref_mut()
    }

    pub fn level(&self, level: u32) -> &[f64] {
        &self.detail[(level - self.coarsest) as usize]
    }

    pub fn level_mut(&mut self, level: u32) -> &mut [f64] {
        &mut self.detail[(level - self.coarsest) as usize]
    }

    pub fn get(&self, idx: BasisIndex) -> f64 {
        self.level(idx.level)[idx.k]
    }

    pub fn set(&mut self, idx: BasisIndex, value: f64) {
        self.level_mut(idx.level)[idx.k] = value;
    }

    /// Blocks in storage order: father (if any) first, then levels.
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.father
            .as_deref()
            .into_iter()
            .chain(self.detail.iter().map(Vec::as_slice))
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.father
            .as_deref_mut()
            .into_iter()
            .chain(self.detail.iter_mut().map(Vec::as_mut_slice))
    }

    /// Number of coefficient blocks (father counted as one).
    pub fn block_count(&self) -> usize {
        self.detail.len() + usize::from(self.father.is_some())
    }

    /// Level that each block lives on (the father block reports `coarsest`).
    pub fn block_levels(&self) -> impl Iterator<Item = u32> + '_ {
        let father = self.father.is_some().then_some(self.coarsest);
        father.into_iter().chain(self.coarsest..=self.finest())
    }

    pub fn len(&self) -> usize {
        self.blocks().map(<[f64]>::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        self.blocks().flatten().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.blocks().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same layout (levels and father presence).
    pub fn same_shape(&self, other: &WaveletCoeffs) -> bool {
        self.coarsest == other.coarsest
            && self.detail.len() == other.detail.len()
            && self.father.is_some() == other.father.is_some()
    }
}
