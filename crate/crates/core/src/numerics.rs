//! Log-domain special functions.
//!
//! Every probability leaving this module is a [`ProbValue`], which carries the
//! natural log alongside the linear value. Combined p-values of order 1e-200
//! and below are routine in meta-analysis; comparisons are always made on the
//! log representation so they stay exact after the linear value underflows.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A probability in paired linear / natural-log form.
///
/// Equality and ordering are defined on the log representation.
#[derive(Clone, Copy, Debug)]
pub struct ProbValue {
    linear: f64,
    ln: f64,
}

impl ProbValue {
    pub const ZERO: ProbValue = ProbValue { linear: 0.0, ln: f64::NEG_INFINITY };
    pub const ONE: ProbValue = ProbValue { linear: 1.0, ln: 0.0 };

    /// Builds a probability from its linear value.
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(ProbValue { linear: p, ln: p.ln() })
    }

    /// Builds a probability from its natural log.
    pub fn from_ln(ln: f64) -> Result<Self> {
        if ln.is_nan() || ln > 0.0 {
            return Err(Error::domain(format!("log-probability {ln} outside [-inf, 0]")));
        }
        Ok(Self::from_ln_clamped(ln))
    }

    /// Log-domain constructor for internal arithmetic: rounding noise above
    /// zero is clamped to 1, and a finite log never maps to linear 0.
    pub(crate) fn from_ln_clamped(ln: f64) -> Self {
        debug_assert!(!ln.is_nan());
        let ln = ln.min(0.0);
        if ln == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        // smallest positive subnormal keeps `linear == 0 iff ln == -inf`
        let linear = ln.exp().max(f64::from_bits(1));
        ProbValue { linear, ln }
    }

    #[inline]
    pub fn linear(&self) -> f64 {
        self.linear
    }

    /// Natural log of the probability.
    #[inline]
    pub fn ln(&self) -> f64 {
        self.ln
    }

    pub fn is_zero(&self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    pub fn is_one(&self) -> bool {
        self.ln == 0.0
    }

    /// `min(1, factor * self)` computed in log space. `factor` must be positive.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        Self::from_ln_clamped(self.ln + factor.ln())
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.ln.total_cmp(&other.ln)
    }

    pub fn max(self, other: Self) -> Self {
        if other.ln > self.ln {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other.ln < self.ln {
            other
        } else {
            self
        }
    }
}

impl PartialEq for ProbValue {
    fn eq(&self, other: &Self) -> bool {
        self.ln == other.ln
    }
}

impl PartialOrd for ProbValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&other.ln)
    }
}

impl fmt::Display for ProbValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.linear == 0.0 || (self.linear < 1e-300 && self.ln.is_finite()) {
            write!(f, "exp({:.6})", self.ln)
        } else {
            write!(f, "{:.5e}", self.linear)
        }
    }
}

/// `ln(sum(exp(x_i)))` without overflow. Returns `-inf` for empty input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln(sum_{s < terms} h^s / s!)`, the log of a truncated exponential series.
///
/// Shared by the chi-square tail and the truncated product distribution, so
/// both reduce to the same arithmetic when they coincide.
pub(crate) fn ln_truncated_exp_series(ln_h: f64, terms: usize) -> f64 {
    let mut logs = Vec::with_capacity(terms);
    let mut current = 0.0;
    logs.push(current);
    for s in 1..terms {
        current += ln_h - (s as f64).ln();
        logs.push(current);
    }
    log_sum_exp(&logs)
}

/// `ln(phi(x))` for the standard normal density.
#[inline]
pub fn ln_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

// ln P(Z > x) for x >= 0
fn ln_upper_tail(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 35.0 {
        (0.5 * libm::erfc(x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills ratio by continued fraction, fast to converge this far out
        let mut t = x;
        for k in (1..=40).rev() {
            t = x + k as f64 / t;
        }
        ln_std_normal_pdf(x) - t.ln()
    }
}

/// Upper tail `1 - Phi(x)` of the standard normal.
pub fn std_normal_sf(x: f64) -> ProbValue {
    if x == f64::INFINITY {
        return ProbValue::ZERO;
    }
    if x == f64::NEG_INFINITY {
        return ProbValue::ONE;
    }
    if x >= 0.0 {
        ProbValue::from_ln_clamped(ln_upper_tail(x))
    } else {
        let q = ln_upper_tail(-x).exp();
        ProbValue { linear: 1.0 - q, ln: (-q).ln_1p() }
    }
}

/// Lower tail `Phi(x)` of the standard normal.
pub fn std_normal_cdf(x: f64) -> ProbValue {
    std_normal_sf(-x)
}

/// Two-sided p-value `2 * (1 - Phi(|z|))`.
pub fn two_sided_normal_p(z: f64) -> ProbValue {
    let tail = std_normal_sf(z.abs());
    ProbValue::from_ln_clamped(tail.ln() + std::f64::consts::LN_2)
}

// Wichura, AS241 (PPND16).
fn ppnd16_central(q: f64) -> f64 {
    let r = 0.180625 - q * q;
    let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
        + 6.726_577_092_700_87e4)
        * r
        + 4.592_195_393_154_987e4)
        * r
        + 1.373_169_376_550_946e4)
        * r
        + 1.971_590_950_306_551_3e3)
        * r
        + 1.331_416_678_917_843_8e2)
        * r
        + 3.387_132_872_796_366_5;
    let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
        + 3.930_789_580_009_271e4)
        * r
        + 2.121_379_430_158_659_7e4)
        * r
        + 5.394_196_021_424_751e3)
        * r
        + 6.871_870_074_920_579e2)
        * r
        + 4.231_333_070_160_091e1)
        * r
        + 1.0;
    q * num / den
}

// |quantile| for a tail probability with sqrt(-ln p) = r > sqrt(-ln 0.075)
fn ppnd16_tail(r: f64) -> f64 {
    if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_049e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    }
}

/// Lower-tail quantile `Phi^{-1}(p)`.
///
/// Tiny probabilities are read from their log, so `p = exp(-460.5)` maps to
/// roughly `-30.19` even though nothing about it is representable linearly
/// near 1.
pub fn std_normal_quantile(p: ProbValue) -> Result<f64> {
    if p.is_zero() || p.is_one() {
        return Err(Error::domain("normal quantile undefined at p = 0 or p = 1"));
    }
    let lower = p.linear() <= 0.5;
    // log of the smaller tail
    let ln_tail = if lower { p.ln() } else { (1.0 - p.linear()).ln() };

    let q = p.linear() - 0.5;
    let mut x = if q.abs() <= 0.425 {
        ppnd16_central(q).abs()
    } else {
        ppnd16_tail((-ln_tail).sqrt())
    };
    // x is |quantile|, the point where the upper tail equals exp(ln_tail)
    for _ in 0..50 {
        let ln_sf = if x >= 0.0 { ln_upper_tail(x) } else { std_normal_sf(x).ln() };
        let slope = -(ln_std_normal_pdf(x) - ln_sf).exp();
        let step = (ln_sf - ln_tail) / slope;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(if lower { -x } else { x })
}

/// Upper-tail quantile `Phi^{-1}(1 - p)`.
pub fn std_normal_isf(p: ProbValue) -> Result<f64> {
    std_normal_quantile(p).map(|x| -x)
}

/// Chi-square survival function for an even number of degrees of freedom.
///
/// Uses the finite Poisson sum `exp(-x/2) * sum_{j < dof/2} (x/2)^j / j!`,
/// which is exact for even `dof`.
pub fn chisq_sf(x: f64, dof: u32) -> Result<ProbValue> {
    if dof == 0 || !dof.is_multiple_of(2) {
        return Err(Error::domain(format!("chi-square dof must be a positive even integer, got {dof}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("chi-square statistic must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(ProbValue::ONE);
    }
    if x == f64::INFINITY {
        return Ok(ProbValue::ZERO);
    }
    let half = 0.5 * x;
    let series = ln_truncated_exp_series(half.ln(), (dof / 2) as usize);
    Ok(ProbValue::from_ln_clamped(series - half))
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Support `[lo, hi]` of the hypergeometric count for `draws` draws from a
/// population of `population` containing `successes` marked items.
pub fn hypergeom_support(successes: u64, draws: u64, population: u64) -> Result<(u64, u64)> {
    if successes > population || draws > population {
        return Err(Error::domain(format!(
            "hypergeometric parameters out of range: K={successes}, n={draws}, N={population}"
        )));
    }
    let lo = (draws + successes).saturating_sub(population);
    let hi = draws.min(successes);
    Ok((lo, hi))
}

/// Log-PMF of the hypergeometric distribution at `k`.
///
/// `successes` = K marked items in a population of `population` = N, with
/// `draws` = n items drawn.
pub fn hypergeom_log_pmf(k: u64, successes: u64, draws: u64, population: u64) -> Result<f64> {
    let (lo, hi) = hypergeom_support(successes, draws, population)?;
    if k < lo || k > hi {
        return Err(Error::domain(format!("k = {k} outside hypergeometric support [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(0.0);
    }
    Ok(ln_choose(successes, k) + ln_choose(population - successes, draws - k) - ln_choose(population, draws))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Mills-ratio asymptotic series, independent of the erfc / continued fraction paths.
    fn ln_sf_asymptotic(x: f64) -> f64 {
        // sum_k (-1)^k (2k-1)!! / x^(2k), truncated well past 1e-15 for x >= 20
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=8 {
            term *= -((2 * k - 1) as f64) / (x * x);
            sum += term;
        }
        ln_std_normal_pdf(x) - x.ln() + sum.ln()
    }

    fn bisect_quantile(ln_p: f64) -> f64 {
        // lower quantile: Phi(x) = exp(ln_p), Phi(x) = sf(-x)
        let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if std_normal_sf(-mid).ln() < ln_p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn prob_value_representations_agree() {
        let p = ProbValue::new(0.25).unwrap();
        assert_eq!(p.linear(), 0.25);
        assert!(rel(p.ln().exp(), 0.25) < 1e-15);
        assert!(ProbValue::new(0.0).unwrap().is_zero());
        assert!(ProbValue::new(1.0).unwrap().is_one());
        assert!(ProbValue::new(1.5).is_err());
        assert!(ProbValue::from_ln(0.1).is_err());
        let tiny = ProbValue::from_ln(-2000.0).unwrap();
        assert!(tiny.linear() > 0.0);
        assert_eq!(tiny.ln(), -2000.0);
    }

    #[test]
    fn prob_value_ordering_survives_underflow() {
        let a = ProbValue::from_ln(-2000.0).unwrap();
        let b = ProbValue::from_ln(-1000.0).unwrap();
        assert!(a < b);
        assert_eq!(a.min(b), a);
        assert_eq!(a.max(b), b);
    }

    #[test]
    fn sf_basic_values() {
        assert_eq!(std_normal_sf(0.0).linear(), 0.5);
        assert!(rel(std_normal_sf(1.959963984540054).linear(), 0.025) < 1e-13);
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.5, 9.0] {
            let s = std_normal_sf(x).linear() + std_normal_sf(-x).linear();
            assert!((s - 1.0).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn sf_extreme_tail_matches_asymptotic_series() {
        let l40 = std_normal_sf(40.0).ln();
        assert!((l40 - ln_sf_asymptotic(40.0)).abs() < 1e-10);
        assert!((l40 - (-804.608_442)).abs() < 1e-5, "{l40}");
        for &x in &[20.0, 30.0, 34.9, 35.1, 50.0, 200.0] {
            let got = std_normal_sf(x).ln();
            let want = ln_sf_asymptotic(x);
            assert!(rel(got, want) < 1e-12, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn sf_is_monotone() {
        let mut prev = f64::INFINITY;
        let mut x = -40.0;
        while x < 60.0 {
            let l = std_normal_sf(x).ln();
            assert!(l <= prev, "x = {x}");
            prev = l;
            x += 0.173;
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(std_normal_quantile(ProbValue::new(0.5).unwrap()).unwrap(), 0.0);
        let q975 = std_normal_quantile(ProbValue::new(0.975).unwrap()).unwrap();
        let oracle = bisect_quantile(0.975_f64.ln());
        assert!((q975 - oracle).abs() < 1e-9);
        assert!((q975 - 1.959964).abs() < 1e-6);
        let tiny = ProbValue::from_ln(-460.5).unwrap();
        let q = std_normal_quantile(tiny).unwrap();
        assert!((q - bisect_quantile(-460.5)).abs() < 1e-9);
        assert!((q + 30.205).abs() < 1e-3, "{q}");
        assert!(std_normal_quantile(ProbValue::ZERO).is_err());
        assert!(std_normal_quantile(ProbValue::ONE).is_err());
    }

    #[test]
    fn quantile_inverts_sf() {
        for &ln_p in &[-1e-9, -0.01, -0.3, -0.69, -0.8, -2.0, -10.0, -40.0, -300.0, -700.0, -2000.0, -1e5] {
            let p = ProbValue::from_ln(ln_p).unwrap();
            let x = std_normal_quantile(p).unwrap();
            let back = std_normal_sf(-x);
            assert!(rel(back.ln(), ln_p) < 1e-10 || (back.ln() - ln_p).abs() < 1e-14, "ln p = {ln_p}");
        }
        for &p in &[0.6, 0.9, 0.999, 1.0 - 1e-12] {
            let x = std_normal_quantile(ProbValue::new(p).unwrap()).unwrap();
            let upper = std_normal_sf(x).linear();
            assert!(rel(upper, 1.0 - p) < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn chisq_closed_forms() {
        assert!(chisq_sf(0.0, 6).unwrap().is_one());
        for &t in &[0.1, 1.0, 7.5, 100.0, 1500.0] {
            let q = chisq_sf(t, 2).unwrap();
            assert!((q.ln() + t / 2.0).abs() < 1e-12 * t.max(1.0));
        }
        // dof 4: exp(-x/2)(1 + x/2)
        let x = 10.23;
        let want = (-x / 2.0_f64).exp() * (1.0 + x / 2.0);
        assert!(rel(chisq_sf(x, 4).unwrap().linear(), want) < 1e-13);
        assert!(rel(chisq_sf(x, 4).unwrap().linear(), 3.68e-2) < 0.01);
        assert!(chisq_sf(-1.0, 2).is_err());
        assert!(chisq_sf(1.0, 3).is_err());
    }

    #[test]
    fn chisq_is_monotone_in_x() {
        for dof in [2u32, 4, 10, 36] {
            let mut prev = 0.0;
            for i in 0..400 {
                let l = chisq_sf(i as f64 * 0.5, dof).unwrap().ln();
                assert!(l <= prev + 1e-15, "dof {dof}, i {i}");
                prev = l;
            }
        }
    }

    fn exact_choose(n: u128, k: u128) -> u128 {
        (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn hypergeom_pmf_against_exact_rationals() {
        let want = (exact_choose(10, 5).pow(2)) as f64 / exact_choose(20, 10) as f64;
        let got = hypergeom_log_pmf(5, 10, 10, 20).unwrap();
        assert!(rel(got.exp(), want) < 1e-12);
        assert!(rel(want, 0.3437).abs() < 1e-3);
        // degenerate support
        assert_eq!(hypergeom_log_pmf(3, 3, 5, 5).unwrap(), 0.0);
        assert!(hypergeom_log_pmf(6, 10, 10, 20).is_ok());
        assert!(hypergeom_log_pmf(11, 10, 10, 20).is_err());
    }

    #[test]
    fn hypergeom_normalizes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let population: u64 = rng.random_range(1..400);
            let successes = rng.random_range(0..=population);
            let draws = rng.random_range(0..=population);
            let (lo, hi) = hypergeom_support(successes, draws, population).unwrap();
            let logs: Vec<f64> =
                (lo..=hi).map(|k| hypergeom_log_pmf(k, successes, draws, population).unwrap()).collect();
            let total = log_sum_exp(&logs).exp();
            assert!((total - 1.0).abs() < 1e-10, "N={population} K={successes} n={draws}: {total}");
        }
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
