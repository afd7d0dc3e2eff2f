//! Monte Carlo checks for p-value rules.
//!
//! These run in the library rather than only in tests so that a custom rule
//! can be checked for validity the same way the built-in ones are.
//!
//! Replicates are split into fixed chunks of [`CHUNK`]; chunk `c` draws from
//! ChaCha8 stream `c` of the seed. Counts are integers summed per chunk, so
//! results do not depend on the thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{std_normal_sf, two_sided_normal_p, ProbValue};

pub const CHUNK: usize = 4096;
pub const MIN_VALIDITY_REPS: usize = 10_000;
pub const MIN_TPM_REPS: usize = 1_000_000;

/// Uniform on the open interval (0, 1), on a 2^-53 grid offset by half a step.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Distribution of one study's p-value under a simulated configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullStudy {
    Uniform,
    /// `2 (1 - Phi(|Z|))` with `Z ~ N(mean, 1)`.
    TwoSidedNormal { mean: f64 },
    /// `1 - Phi(Z)` with `Z ~ N(mean, 1)`.
    OneSidedNormal { mean: f64 },
}

impl NullStudy {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ProbValue {
        match *self {
            NullStudy::Uniform => ProbValue::from_ln_clamped(open_unit(rng).ln()),
            NullStudy::TwoSidedNormal { mean } => {
                let z: f64 = StandardNormal.sample(rng);
                two_sided_normal_p(z + mean)
            }
            NullStudy::OneSidedNormal { mean } => {
                let z: f64 = StandardNormal.sample(rng);
                std_normal_sf(z + mean)
            }
        }
    }
}

/// Independent per-study distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullConfig {
    pub studies: Vec<NullStudy>,
}

impl NullConfig {
    /// Global null: `n` uniform p-values.
    pub fn uniform(n: usize) -> Self {
        NullConfig { studies: vec![NullStudy::Uniform; n] }
    }

    /// Boundary of `H_0^{r/n}`: the first `r - 1` studies are non-null with
    /// two-sided normal p-values at `mean`, the rest uniform.
    pub fn boundary(n: usize, r: usize, mean: f64) -> Result<Self> {
        if r == 0 || r > n {
            return Err(Error::invalid(format!("order r = {r} outside 1..={n}")));
        }
        let mut studies = vec![NullStudy::TwoSidedNormal { mean }; r - 1];
        studies.resize(n, NullStudy::Uniform);
        Ok(NullConfig { studies })
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<ProbValue>) {
        out.clear();
        out.extend(self.studies.iter().map(|s| s.draw(rng)));
    }
}

/// Empirical rejection rate of a rule at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub alpha: f64,
    pub rate: f64,
    /// Standard error of `rate` itself.
    pub se: f64,
    pub rejections: u64,
    pub reps: u64,
    /// `alpha + 3 sqrt(alpha (1 - alpha) / reps)`.
    pub bound: f64,
    pub valid: bool,
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_sizes(reps: usize) -> Vec<(usize, usize)> {
    (0..reps.div_ceil(CHUNK)).map(|c| (c, CHUNK.min(reps - c * CHUNK))).collect()
}

/// Rejection rates `P(rule(P) <= alpha)` under `null` for each level.
pub fn mc_validity<F>(rule: F, null: &NullConfig, alphas: &[f64], reps: usize, seed: u64) -> Result<Vec<RejectionRate>>
where
    F: Fn(&[ProbValue]) -> Result<ProbValue> + Sync,
{
    if reps < MIN_VALIDITY_REPS {
        return Err(Error::invalid(format!("validity check needs at least {MIN_VALIDITY_REPS} replicates, got {reps}")));
    }
    if null.is_empty() {
        return Err(Error::invalid("null configuration has no studies"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::invalid(format!("alpha {a} outside (0, 1)")));
    }
    let per_chunk: Vec<Vec<u64>> = chunk_sizes(reps)
        .into_par_iter()
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            let mut counts = vec![0u64; alphas.len()];
            let mut p = Vec::with_capacity(null.len());
            for _ in 0..size {
                null.draw(&mut rng, &mut p);
                let value = rule(&p)?;
                for (count, &a) in counts.iter_mut().zip(alphas) {
                    *count += (value.linear() <= a) as u64;
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;

    Ok(alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let rejections: u64 = per_chunk.iter().map(|c| c[i]).sum();
            let n = reps as f64;
            let rate = rejections as f64 / n;
            let bound = alpha + 3.0 * (alpha * (1.0 - alpha) / n).sqrt();
            RejectionRate {
                alpha,
                rate,
                se: (rate * (1.0 - rate) / n).sqrt(),
                rejections,
                reps: reps as u64,
                bound,
                valid: rate <= bound,
            }
        })
        .collect())
}

/// A Monte Carlo probability estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    pub reps: u64,
}

impl McEstimate {
    fn from_hits(hits: u64, reps: usize) -> Self {
        let n = reps as f64;
        let estimate = hits as f64 / n;
        McEstimate { estimate, se: (estimate * (1.0 - estimate) / n).sqrt(), reps: reps as u64 }
    }

    /// `|estimate - value|` in standard errors; exact agreement at zero SE
    /// counts as 0, disagreement as infinity.
    pub fn z_distance(&self, value: f64) -> f64 {
        let diff = (self.estimate - value).abs();
        if self.se > 0.0 {
            diff / self.se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `P(W <= w)` for the truncated product of `l` independent uniforms,
/// estimated by simulation.
pub fn tpm_mc_cdf(l: usize, gamma: f64, w: f64, reps: usize, seed: u64) -> Result<McEstimate> {
    if reps < MIN_TPM_REPS {
        return Err(Error::invalid(format!("tpm oracle needs at least {MIN_TPM_REPS} replicates, got {reps}")));
    }
    if l == 0 {
        return Err(Error::invalid("tpm oracle needs l >= 1"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("tpm gamma {gamma} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::invalid(format!("tpm threshold w = {w} outside [0, 1]")));
    }
    let ln_gamma = gamma.ln();
    let ln_w = w.ln();
    let hits: u64 = chunk_sizes(reps)
        .into_par_iter()
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            let mut hits = 0u64;
            for _ in 0..size {
                let mut ln_prod = 0.0;
                for _ in 0..l {
                    let lu = open_unit(&mut rng).ln();
                    if lu <= ln_gamma {
                        ln_prod += lu;
                    }
                }
                hits += (ln_prod <= ln_w) as u64;
            }
            hits
        })
        .sum();
    Ok(McEstimate::from_hits(hits, reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combiners::{combine_fisher, tpm_cdf};

    #[test]
    fn fisher_is_exact_level_under_uniform_null() {
        let rates = mc_validity(combine_fisher, &NullConfig::uniform(3), &[0.05], 40_000, 5).unwrap();
        let r = &rates[0];
        assert!((r.rate - 0.05).abs() < 3.0 * (0.05f64 * 0.95 / 40_000.0).sqrt());
        assert!(r.valid);
    }

    #[test]
    fn halved_rule_is_flagged() {
        let broken = |p: &[ProbValue]| combine_fisher(p).map(|v| v.scaled(0.5));
        let rates = mc_validity(broken, &NullConfig::uniform(2), &[0.05], 20_000, 9).unwrap();
        assert!((rates[0].rate - 0.10).abs() < 0.01);
        assert!(!rates[0].valid);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = mc_validity(combine_fisher, &NullConfig::uniform(4), &[0.01, 0.05], 10_000, 3).unwrap();
        let b = mc_validity(combine_fisher, &NullConfig::uniform(4), &[0.01, 0.05], 10_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn open_unit_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100_000 {
            let u = open_unit(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn boundary_config_shape() {
        let c = NullConfig::boundary(8, 2, 6.0).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(c.studies[0], NullStudy::TwoSidedNormal { mean: 6.0 });
        assert!(c.studies[1..].iter().all(|s| *s == NullStudy::Uniform));
        assert!(NullConfig::boundary(8, 9, 1.0).is_err());
    }

    #[test]
    fn tpm_oracle_edges_and_cross_check() {
        assert_eq!(tpm_mc_cdf(3, 0.05, 1.0, MIN_TPM_REPS, 1).unwrap().estimate, 1.0);
        assert_eq!(tpm_mc_cdf(3, 0.05, 0.0, MIN_TPM_REPS, 1).unwrap().estimate, 0.0);
        let w = 1e-3;
        let mc = tpm_mc_cdf(3, 0.1, w, MIN_TPM_REPS, 2).unwrap();
        let exact = tpm_cdf(3, 0.1, ProbValue::new(w).unwrap()).unwrap().linear();
        assert!(mc.z_distance(exact) < 4.0, "{mc:?} vs {exact}");
        assert!(tpm_mc_cdf(3, 0.1, w, 1000, 2).is_err());
    }
}
