//! Power of PC tests when non-null effects are heterogeneous.
//!
//! Each replicate has `n` studies with sample sizes `N_i`. `r0` of them are
//! non-null with effect `mu_i ~ Gamma(mean mu0, sd sigma0)`, the rest have
//! `mu_i = 0`. Study `i` reports the two-sided p-value of
//! `Z_i ~ N(sqrt(N_i) mu_i, 1)`, and each method tests `H_0^{r/n}` at level
//! alpha.
//!
//! All methods see the same draws within a replicate. Each (cell, r0) job
//! owns one ChaCha8 stream, so the grid is identical for any thread count.

use itertools::Itertools;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiners::CombinerSpec;
use crate::error::{Error, Result};
use crate::numerics::{std_normal_isf, std_normal_sf, two_sided_normal_p, ProbValue};
use crate::partial_conjunction::{bhpc, subset_count};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    FisherBhpc,
    SimesBhpc,
    /// GBHPC with weighted Stouffer on every subset, weights `sqrt(N_i)`.
    StoufferGbhpc,
}

impl SimMethod {
    pub const ALL: [SimMethod; 3] = [SimMethod::FisherBhpc, SimMethod::SimesBhpc, SimMethod::StoufferGbhpc];

    pub fn name(&self) -> &'static str {
        match self {
            SimMethod::FisherBhpc => "fisher_bhpc",
            SimMethod::SimesBhpc => "simes_bhpc",
            SimMethod::StoufferGbhpc => "stouffer_gbhpc",
        }
    }
}

/// Which studies carry the `r0` effects.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonNullAssignment {
    /// A fresh uniformly random subset per replicate.
    #[default]
    Random,
    /// The first `r0` entries of `order`.
    Fixed { order: Vec<usize> },
}

fn default_sample_sizes() -> Vec<u64> {
    vec![100, 100, 100, 500, 500, 500, 1000, 1000]
}
fn default_r() -> usize {
    2
}
fn default_r0_values() -> Vec<usize> {
    vec![2, 4, 6]
}
fn default_alpha() -> f64 {
    0.05
}
fn default_reps() -> usize {
    20_000
}
fn default_seed() -> u64 {
    20_240_517
}
fn default_methods() -> Vec<SimMethod> {
    SimMethod::ALL.to_vec()
}
fn default_mu0_grid() -> Vec<f64> {
    linspace(0.02, 0.4, 10)
}
fn default_sigma0_grid() -> Vec<f64> {
    linspace(0.01, 0.4, 10)
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Simulation settings; every field has a default, so `{}` is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<u64>,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_r0_values")]
    pub r0_values: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<SimMethod>,
    #[serde(default = "default_mu0_grid")]
    pub mu0_grid: Vec<f64>,
    #[serde(default = "default_sigma0_grid")]
    pub sigma0_grid: Vec<f64>,
    #[serde(default)]
    pub assignment: NonNullAssignment,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sample_sizes: default_sample_sizes(),
            r: default_r(),
            r0_values: default_r0_values(),
            alpha: default_alpha(),
            reps: default_reps(),
            seed: default_seed(),
            methods: default_methods(),
            mu0_grid: default_mu0_grid(),
            sigma0_grid: default_sigma0_grid(),
            assignment: NonNullAssignment::Random,
        }
    }
}

pub const MIN_SIM_REPS: usize = 1_000;

impl SimConfig {
    pub fn n(&self) -> usize {
        self.sample_sizes.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.sample_sizes.contains(&0) {
            return Err(Error::invalid("sample_sizes must be nonempty and positive"));
        }
        if self.r == 0 || self.r > n {
            return Err(Error::invalid(format!("r = {} outside 1..={n}", self.r)));
        }
        if let Some(r0) = self.r0_values.iter().find(|&&r0| r0 > n) {
            return Err(Error::invalid(format!("r0 = {r0} exceeds n = {n}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.reps < MIN_SIM_REPS {
            return Err(Error::invalid(format!("reps must be at least {MIN_SIM_REPS}")));
        }
        if self.methods.is_empty() || self.r0_values.is_empty() {
            return Err(Error::invalid("methods and r0_values must be nonempty"));
        }
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        if self.mu0_grid.is_empty() || !self.mu0_grid.iter().all(positive) {
            return Err(Error::invalid("mu0_grid must be nonempty and positive"));
        }
        if self.sigma0_grid.is_empty() || !self.sigma0_grid.iter().all(positive) {
            return Err(Error::invalid("sigma0_grid must be nonempty and positive"));
        }
        if let NonNullAssignment::Fixed { order } = &self.assignment {
            let mut seen = vec![false; n];
            for &i in order {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid("fixed assignment order must list distinct study indices"));
                }
            }
            if let Some(r0) = self.r0_values.iter().find(|&&r0| r0 > order.len()) {
                return Err(Error::invalid(format!("fixed assignment lists fewer than r0 = {r0} studies")));
            }
        }
        if self.methods.contains(&SimMethod::StoufferGbhpc) && subset_count(n, self.r) > 1_000_000 {
            return Err(Error::invalid("stouffer_gbhpc subset count exceeds 10^6"));
        }
        Ok(())
    }
}

/// One point of the (mu0, sigma0, r0) design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub mu0: f64,
    pub sigma0: f64,
    pub r0: usize,
}

/// Gamma law with the given mean and standard deviation.
pub fn gamma_from_moments(mean: f64, sd: f64) -> Result<Gamma<f64>> {
    if !(mean > 0.0 && sd > 0.0 && mean.is_finite() && sd.is_finite()) {
        return Err(Error::invalid(format!("gamma mean {mean} and sd {sd} must be positive")));
    }
    let shape = (mean / sd).powi(2);
    let scale = sd * sd / mean;
    Gamma::new(shape, scale).map_err(|e| Error::invalid(format!("gamma parameters: {e}")))
}

/// Draws one replicate of study p-values.
pub fn draw_study_pvalues<R: Rng + ?Sized>(
    cfg: &SimConfig,
    scenario: &Scenario,
    effect: &Gamma<f64>,
    rng: &mut R,
) -> Vec<ProbValue> {
    let n = cfg.n();
    let mut means = vec![0.0; n];
    let chosen: Vec<usize> = match &cfg.assignment {
        NonNullAssignment::Random => index::sample(rng, n, scenario.r0).into_vec(),
        NonNullAssignment::Fixed { order } => order[..scenario.r0].to_vec(),
    };
    for i in chosen {
        means[i] = (cfg.sample_sizes[i] as f64).sqrt() * effect.sample(rng);
    }
    means
        .iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(rng);
            two_sided_normal_p(z + m)
        })
        .collect()
}

/// Weighted-Stouffer GBHPC with the z-scores computed once.
///
/// The largest subset p-value belongs to the subset with the smallest
/// standardized statistic. `p_i = 1` gives `z_i = -inf` and a p-value of 1.
pub fn stouffer_gbhpc(p: &[ProbValue], r: usize, weights: &[f64]) -> Result<ProbValue> {
    let n = p.len();
    if r == 0 || r > n || weights.len() != n {
        return Err(Error::invalid("stouffer_gbhpc: bad order or weight count"));
    }
    let z = p
        .iter()
        .map(|&pi| if pi.is_one() { Ok(f64::NEG_INFINITY) } else { std_normal_isf(pi) })
        .collect::<Result<Vec<f64>>>()?;
    let mut worst = f64::INFINITY;
    for u in (0..n).combinations(n - r + 1) {
        let (num, sq) = u.iter().fold((0.0, 0.0), |(a, b), &i| (a + weights[i] * z[i], b + weights[i] * weights[i]));
        worst = worst.min(num / sq.sqrt());
    }
    Ok(std_normal_sf(worst))
}

fn method_p(method: SimMethod, p: &[ProbValue], r: usize, weights: &[f64]) -> Result<ProbValue> {
    match method {
        SimMethod::FisherBhpc => bhpc(p, r, &CombinerSpec::Fisher),
        SimMethod::SimesBhpc => bhpc(p, r, &CombinerSpec::Simes),
        SimMethod::StoufferGbhpc => stouffer_gbhpc(p, r, weights),
    }
}

/// Power estimate for one method at one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub mu0: f64,
    pub sigma0: f64,
    pub method: SimMethod,
    pub r0: usize,
    pub power: f64,
    pub se: f64,
}

/// Power of every configured method at one scenario, using stream `stream`.
pub fn estimate_power(cfg: &SimConfig, scenario: &Scenario, stream: u64) -> Result<Vec<PowerRow>> {
    let effect = gamma_from_moments(scenario.mu0, scenario.sigma0)?;
    let weights: Vec<f64> = cfg.sample_sizes.iter().map(|&s| (s as f64).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut hits = vec![0u64; cfg.methods.len()];
    for _ in 0..cfg.reps {
        let p = draw_study_pvalues(cfg, scenario, &effect, &mut rng);
        for (h, &m) in hits.iter_mut().zip(&cfg.methods) {
            *h += (method_p(m, &p, cfg.r, &weights)?.linear() <= cfg.alpha) as u64;
        }
    }
    let reps = cfg.reps as f64;
    Ok(cfg
        .methods
        .iter()
        .zip(hits)
        .map(|(&method, h)| {
            let power = h as f64 / reps;
            PowerRow {
                mu0: scenario.mu0,
                sigma0: scenario.sigma0,
                method,
                r0: scenario.r0,
                power,
                se: (power * (1.0 - power) / reps).sqrt(),
            }
        })
        .collect())
}

/// Power over the full `mu0 × sigma0 × r0` design.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerGrid {
    pub mu0_values: Vec<f64>,
    pub sigma0_values: Vec<f64>,
    pub rows: Vec<PowerRow>,
}

impl PowerGrid {
    pub fn get(&self, mu0: f64, sigma0: f64, r0: usize, method: SimMethod) -> Option<&PowerRow> {
        self.rows.iter().find(|row| row.mu0 == mu0 && row.sigma0 == sigma0 && row.r0 == r0 && row.method == method)
    }
}

/// Stream id of a design point: cells in row-major `(mu0, sigma0)` order,
/// then `r0` in config order.
pub fn stream_id(cfg: &SimConfig, mu_idx: usize, sigma_idx: usize, r0_idx: usize) -> u64 {
    ((mu_idx * cfg.sigma0_grid.len() + sigma_idx) * cfg.r0_values.len() + r0_idx) as u64
}

pub fn run_power_map(cfg: &SimConfig) -> Result<PowerGrid> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.mu0_grid.len())
        .cartesian_product(0..cfg.sigma0_grid.len())
        .cartesian_product(0..cfg.r0_values.len())
        .map(|((a, b), c)| (a, b, c))
        .collect();
    let rows: Vec<Vec<PowerRow>> = jobs
        .par_iter()
        .map(|&(mi, si, ri)| {
            let scenario = Scenario { mu0: cfg.mu0_grid[mi], sigma0: cfg.sigma0_grid[si], r0: cfg.r0_values[ri] };
            estimate_power(cfg, &scenario, stream_id(cfg, mi, si, ri))
        })
        .collect::<Result<_>>()?;
    Ok(PowerGrid {
        mu0_values: cfg.mu0_grid.clone(),
        sigma0_values: cfg.sigma0_grid.clone(),
        rows: rows.into_iter().flatten().collect(),
    })
}
