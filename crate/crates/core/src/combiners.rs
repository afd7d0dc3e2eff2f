//! Meta-analysis p-value combiners and the 2x2 Fisher exact test.
//!
//! All combiners here are valid for the global null under independence and
//! non-decreasing in every argument. Fisher, Simes, Bonferroni and the
//! truncated product method are symmetric; weighted Stouffer binds its
//! weights to study positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    chisq_sf, hypergeom_log_pmf, hypergeom_support, ln_choose, ln_truncated_exp_series, log_sum_exp,
    std_normal_isf, std_normal_sf, ProbValue,
};

/// Declarative description of a combination rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CombinerSpec {
    Fisher,
    Simes,
    Bonferroni,
    /// Weights are `sqrt(n_i) / sigma_i`, indexed by study position.
    StoufferWeighted { weights: Vec<f64> },
    /// Truncated product with threshold `gamma` in (0, 1].
    Tpm { gamma: f64 },
}

impl CombinerSpec {
    pub fn stouffer(weights: Vec<f64>) -> Result<Self> {
        let spec = CombinerSpec::StoufferWeighted { weights };
        spec.validate()?;
        Ok(spec)
    }

    /// Weighted Stouffer with `w_i = sqrt(n_i) / sigma_i`.
    pub fn stouffer_from_samples(sample_sizes: &[f64], sigmas: &[f64]) -> Result<Self> {
        if sample_sizes.len() != sigmas.len() {
            return Err(Error::invalid("sample sizes and sigmas differ in length"));
        }
        Self::stouffer(sample_sizes.iter().zip(sigmas).map(|(n, s)| n.sqrt() / s).collect())
    }

    pub fn tpm(gamma: f64) -> Result<Self> {
        let spec = CombinerSpec::Tpm { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CombinerSpec::StoufferWeighted { weights } => {
                if weights.is_empty() {
                    return Err(Error::invalid("stouffer weights are empty"));
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                    return Err(Error::invalid(format!("stouffer weight {w} is not strictly positive")));
                }
                Ok(())
            }
            CombinerSpec::Tpm { gamma } => {
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(Error::invalid(format!("tpm gamma {gamma} outside (0, 1]")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// True when the rule ignores the order of its arguments.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, CombinerSpec::StoufferWeighted { .. })
    }

    pub fn name(&self) -> String {
        match self {
            CombinerSpec::Fisher => "fisher".into(),
            CombinerSpec::Simes => "simes".into(),
            CombinerSpec::Bonferroni => "bonferroni".into(),
            CombinerSpec::StoufferWeighted { .. } => "stouffer_weighted".into(),
            CombinerSpec::Tpm { gamma } => format!("tpm(gamma={gamma})"),
        }
    }

    /// Combines a full vector of study p-values.
    pub fn combine(&self, p: &[ProbValue]) -> Result<ProbValue> {
        match self {
            CombinerSpec::Fisher => combine_fisher(p),
            CombinerSpec::Simes => combine_simes(p),
            CombinerSpec::Bonferroni => combine_bonferroni(p),
            CombinerSpec::StoufferWeighted { weights } => combine_stouffer_weighted(p, weights),
            CombinerSpec::Tpm { gamma } => combine_tpm(p, *gamma),
        }
    }

    /// Combines a subset of studies. `indices[j]` is the original study index
    /// of `p_subset[j]`; index-bound parameters (Stouffer weights) are looked
    /// up through it, never through sort rank.
    pub fn combine_indexed(&self, indices: &[usize], p_subset: &[ProbValue]) -> Result<ProbValue> {
        if indices.len() != p_subset.len() {
            return Err(Error::invalid("index and p-value slices differ in length"));
        }
        match self {
            CombinerSpec::StoufferWeighted { weights } => {
                let w = indices
                    .iter()
                    .map(|&i| {
                        weights
                            .get(i)
                            .copied()
                            .ok_or_else(|| Error::invalid(format!("no stouffer weight for study {i}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                combine_stouffer_weighted(p_subset, &w)
            }
            _ => self.combine(p_subset),
        }
    }
}

fn non_empty(p: &[ProbValue]) -> Result<()> {
    if p.is_empty() {
        Err(Error::invalid("cannot combine an empty set of p-values"))
    } else {
        Ok(())
    }
}

/// Fisher's method: `P(chi2_{2k} >= -2 sum ln p_i)`.
pub fn combine_fisher(p: &[ProbValue]) -> Result<ProbValue> {
    non_empty(p)?;
    if p.iter().any(ProbValue::is_zero) {
        return Ok(ProbValue::ZERO);
    }
    let statistic = -2.0 * p.iter().map(ProbValue::ln).sum::<f64>();
    chisq_sf(statistic.max(0.0), 2 * p.len() as u32)
}

/// Simes: `min_i k p_(i) / i`, capped at 1.
pub fn combine_simes(p: &[ProbValue]) -> Result<ProbValue> {
    non_empty(p)?;
    let mut sorted = p.to_vec();
    sorted.sort_by(ProbValue::total_cmp);
    let k = sorted.len() as f64;
    let best = sorted
        .iter()
        .enumerate()
        .map(|(i, pi)| pi.ln() + (k / (i + 1) as f64).ln())
        .fold(f64::INFINITY, f64::min);
    Ok(ProbValue::from_ln_clamped(best))
}

/// Bonferroni: `min(1, k min_i p_i)`.
pub fn combine_bonferroni(p: &[ProbValue]) -> Result<ProbValue> {
    non_empty(p)?;
    let smallest = p.iter().copied().fold(ProbValue::ONE, ProbValue::min);
    Ok(smallest.scaled(p.len() as f64))
}

/// Weighted Stouffer: `1 - Phi(sum w_i Phi^{-1}(1 - p_i) / sqrt(sum w_i^2))`.
pub fn combine_stouffer_weighted(p: &[ProbValue], weights: &[f64]) -> Result<ProbValue> {
    non_empty(p)?;
    if weights.len() != p.len() {
        return Err(Error::invalid(format!("{} weights for {} p-values", weights.len(), p.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::invalid(format!("stouffer weight {w} is not strictly positive")));
    }
    let mut numerator = 0.0;
    let mut norm = 0.0;
    for (pi, &w) in p.iter().zip(weights) {
        numerator += w * std_normal_isf(*pi)?;
        norm += w * w;
    }
    Ok(std_normal_sf(numerator / norm.sqrt()))
}

/// Truncated product method under independent uniform nulls.
///
/// The statistic is `w = prod_{p_i <= gamma} p_i`; the returned value is
/// `P(W <= w)` from the closed form that conditions on how many of the `L`
/// p-values fall below `gamma`.
pub fn combine_tpm(p: &[ProbValue], gamma: f64) -> Result<ProbValue> {
    non_empty(p)?;
    check_gamma(gamma)?;
    let ln_gamma = gamma.ln();
    let ln_w: f64 = p.iter().map(ProbValue::ln).filter(|&l| l <= ln_gamma).sum();
    tpm_cdf(p.len(), gamma, ProbValue::from_ln_clamped(ln_w))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tpm gamma {gamma} outside (0, 1]")))
    }
}

/// `P(W <= w)` for the truncated product `W = prod_{p_i <= gamma} p_i` of
/// `l` independent uniforms (empty product is 1).
pub fn tpm_cdf(l: usize, gamma: f64, w: ProbValue) -> Result<ProbValue> {
    if l == 0 {
        return Err(Error::invalid("tpm needs at least one p-value"));
    }
    check_gamma(gamma)?;
    let ln_w = w.ln();
    if ln_w == f64::NEG_INFINITY {
        return Ok(ProbValue::ZERO);
    }
    if ln_w >= 0.0 {
        return Ok(ProbValue::ONE);
    }
    let ln_gamma = gamma.ln();
    let ln_one_minus_gamma = (-gamma).ln_1p();
    let mut terms = Vec::with_capacity(l);
    for k in 1..=l {
        let rest = (l - k) as f64;
        let lead = if rest == 0.0 { 0.0 } else { rest * ln_one_minus_gamma };
        if lead == f64::NEG_INFINITY {
            continue;
        }
        let kf = k as f64;
        // P(prod of k uniforms on (0, gamma) <= w), times gamma^k
        let conditional = if ln_w <= kf * ln_gamma {
            let depth = kf * ln_gamma - ln_w;
            ln_w + ln_truncated_exp_series(depth.ln(), k)
        } else {
            kf * ln_gamma
        };
        terms.push(ln_choose(l as u64, k as u64) + lead + conditional);
    }
    Ok(ProbValue::from_ln_clamped(log_sum_exp(&terms)))
}

/// Event counts for a two-arm comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable2x2 {
    pub events_a: u64,
    pub total_a: u64,
    pub events_b: u64,
    pub total_b: u64,
}

impl CountTable2x2 {
    pub fn new(events_a: u64, total_a: u64, events_b: u64, total_b: u64) -> Result<Self> {
        let t = CountTable2x2 { events_a, total_a, events_b, total_b };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_a == 0 || self.total_b == 0 {
            return Err(Error::invalid("2x2 table arm totals must be positive"));
        }
        if self.events_a > self.total_a || self.events_b > self.total_b {
            return Err(Error::invalid("2x2 table events exceed arm totals"));
        }
        Ok(())
    }

    /// Sample odds ratio of arm A against arm B. Zero denominators give
    /// `+inf`; `0/0` gives NaN.
    pub fn odds_ratio(&self) -> f64 {
        let num = self.events_a as f64 * (self.total_b - self.events_b) as f64;
        let den = (self.total_a - self.events_a) as f64 * self.events_b as f64;
        num / den
    }
}

/// How the two-sided Fisher exact p-value is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoSidedConvention {
    /// Sum of all tables no more probable than the observed one.
    #[default]
    MinLikelihood,
    /// Twice the smaller one-sided tail, capped at 1.
    DoubledTail,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherExactResult {
    pub odds_ratio: f64,
    pub p_two_sided: ProbValue,
}

/// Relative slack when deciding that a table is "no more probable" than the
/// observed one.
pub const FISHER_EXACT_TIE_SLACK: f64 = 1e-7;

/// Two-sided Fisher exact test, minimum-likelihood convention.
pub fn fisher_exact_2x2(t: &CountTable2x2) -> Result<FisherExactResult> {
    fisher_exact_2x2_with(t, TwoSidedConvention::MinLikelihood)
}

pub fn fisher_exact_2x2_with(t: &CountTable2x2, convention: TwoSidedConvention) -> Result<FisherExactResult> {
    t.validate()?;
    // margins: arm A is the draw, events are the marked items
    let population = t.total_a + t.total_b;
    let successes = t.events_a + t.events_b;
    let draws = t.total_a;
    let (lo, hi) = hypergeom_support(successes, draws, population)?;
    let log_pmf: Vec<f64> =
        (lo..=hi).map(|k| hypergeom_log_pmf(k, successes, draws, population)).collect::<Result<_>>()?;
    let observed = (t.events_a - lo) as usize;

    let ln_p = match convention {
        TwoSidedConvention::MinLikelihood => {
            let threshold = log_pmf[observed] + FISHER_EXACT_TIE_SLACK.ln_1p();
            let kept: Vec<f64> = log_pmf.iter().copied().filter(|&l| l <= threshold).collect();
            log_sum_exp(&kept)
        }
        TwoSidedConvention::DoubledTail => {
            let lower = log_sum_exp(&log_pmf[..=observed]);
            let upper = log_sum_exp(&log_pmf[observed..]);
            lower.min(upper) + std::f64::consts::LN_2
        }
    };
    Ok(FisherExactResult { odds_ratio: t.odds_ratio(), p_two_sided: ProbValue::from_ln_clamped(ln_p) })
}
