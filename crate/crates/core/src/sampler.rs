//! Deterministic random sampling for the posterior stage.
//!
//! All randomness flows through [`RngStream`], a counter-based generator
//! keyed by (seed, stream). Streams are independent, so each batch can own
//! one and draw identical sequences regardless of platform or thread count.
//! Normal deviates use the inverse CDF rather than rejection, keeping the
//! draw-index-to-deviate mapping fixed.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{CovError, Result};

/// A seeded, stream-separated random number generator.
pub struct RngStream {
    rng: ChaCha12Rng,
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { rng, seed, stream }
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    /// Standard normal deviate via the inverse CDF.
    pub fn normal(&mut self) -> f64 {
        standard_normal_quantile(self.uniform())
    }

    /// Chi-squared deviate with `nu` degrees of freedom, drawn as
    /// gamma(nu/2, scale 2) so the cost does not grow with nu.
    pub fn chi_squared(&mut self, nu: u32) -> f64 {
        debug_assert!(nu >= 1);
        let gamma = Gamma::new(0.5 * f64::from(nu), 2.0).expect("valid gamma parameters");
        gamma.sample(&mut self.rng)
    }
}

/// Inverse of the standard normal CDF (the AS241 rational approximation,
/// accurate to full double precision). `p` must lie strictly in (0, 1).
pub fn standard_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&CENTRAL_NUM, r) / poly(&CENTRAL_DEN, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&TAIL_NUM, r) / poly(&TAIL_DEN, r)
    } else {
        let r = r - 5.0;
        poly(&FAR_TAIL_NUM, r) / poly(&FAR_TAIL_DEN, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const CENTRAL_NUM: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const TAIL_NUM: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const TAIL_DEN: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const FAR_TAIL_NUM: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const FAR_TAIL_DEN: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Lower-triangular Cholesky factor of a symmetric positive definite
/// matrix. Reports the first failing pivot otherwise.
pub fn cholesky(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(CovError::DimensionMismatch {
            left: n,
            right: matrix.ncols(),
        });
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = matrix[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(CovError::NotPositiveDefinite { pivot: j });
        }
        l[(j, j)] = diag.sqrt();
        for i in j + 1..n {
            let mut sum = matrix[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = sum / l[(j, j)];
        }
    }
    Ok(l)
}

/// One multivariate-t draw, keeping the ingredients so callers can verify
/// or reuse them.
#[derive(Debug, Clone)]
pub struct MvtSample {
    /// The deviate: L z sqrt(nu / chi2).
    pub y: DVector<f64>,
    /// The underlying standard normal vector.
    pub z: DVector<f64>,
    /// The chi-squared divisor.
    pub chi2: f64,
}

/// Draws from the zero-centered multivariate t with `nu` degrees of
/// freedom and scale matrix L L^T. Consumes the normal components first,
/// then the chi-squared deviate, in a fixed order.
pub fn mvt_draw(chol: &DMatrix<f64>, nu: u32, rng: &mut RngStream) -> MvtSample {
    let n = chol.nrows();
    let z = DVector::from_fn(n, |_, _| rng.normal());
    let chi2 = rng.chi_squared(nu);
    let scale = (f64::from(nu) / chi2).sqrt();
    let y = chol * &z * scale;
    MvtSample { y, z, chi2 }
}

/// The antithetic pair (+y, -y) of a draw. The reflection is exact, so
/// estimators built on the pair cancel odd-order terms identically.
pub fn antithetic_pair(sample: &MvtSample) -> (DVector<f64>, DVector<f64>) {
    (sample.y.clone(), -sample.y.clone())
}
