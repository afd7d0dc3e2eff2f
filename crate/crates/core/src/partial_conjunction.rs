//! Partial-conjunction p-values for `H_0^{r/n}`: at most `r - 1` of `n`
//! component nulls are false.
//!
//! Two constructions are provided:
//!
//! * [`bhpc`] drops the `r - 1` smallest p-values and applies a symmetric
//!   combiner to the rest.
//! * [`gbhpc_enumerate`] takes the maximum, over every subset `u` of size
//!   `n - r + 1`, of a subset-specific combiner `g_u(p_u)`. Any valid,
//!   monotone `g_u` gives a valid p-value under arbitrary dependence.
//!
//! [`structured_gbhpc`] is the GBHPC whose `g_u` is a Bonferroni correction
//! across independence blocks of within-block Fisher combinations. It is
//! computed by optimizing over per-block counts instead of subsets and is
//! cross-checked against full enumeration in the tests.
//!
//! Validity of the BHPC construction assumes independent (or PRDS) studies;
//! nothing here checks that assumption.

use itertools::Itertools;

use crate::combiners::{combine_fisher, CombinerSpec};
use crate::error::{Error, Result};
use crate::numerics::ProbValue;

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1_000_000;

/// A partition of study indices `0..n` into independence blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupPartition {
    blocks: Vec<Vec<usize>>,
    labels: Vec<String>,
    membership: Vec<usize>,
}

impl GroupPartition {
    /// Builds a partition from explicit blocks. Blocks must be nonempty,
    /// disjoint, and cover `0..n`.
    pub fn new(blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let labels = (0..blocks.len()).map(|i| format!("block{}", i + 1)).collect();
        Self::with_labels(blocks, labels, n)
    }

    pub fn with_labels(blocks: Vec<Vec<usize>>, labels: Vec<String>, n: usize) -> Result<Self> {
        if labels.len() != blocks.len() {
            return Err(Error::invalid("one label per block required"));
        }
        let mut membership = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid(format!("block {} is empty", labels[b])));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::invalid(format!("study index {i} out of range for n = {n}")));
                }
                if membership[i] != usize::MAX {
                    return Err(Error::invalid(format!("study index {i} appears in more than one block")));
                }
                membership[i] = b;
            }
        }
        if let Some(i) = membership.iter().position(|&b| b == usize::MAX) {
            return Err(Error::invalid(format!("study index {i} is not covered by any block")));
        }
        let mut blocks = blocks;
        for block in &mut blocks {
            block.sort_unstable();
        }
        Ok(GroupPartition { blocks, labels, membership })
    }

    /// One block per distinct label, in order of first appearance.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            let label = label.as_ref();
            if label.is_empty() {
                return Err(Error::invalid(format!("study {i} has an empty group label")));
            }
            match names.iter().position(|n| n == label) {
                Some(b) => blocks[b].push(i),
                None => {
                    names.push(label.to_string());
                    blocks.push(vec![i]);
                }
            }
        }
        Self::with_labels(blocks, names, labels.len())
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of studies covered.
    pub fn n(&self) -> usize {
        self.membership.len()
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block index of study `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.membership[i]
    }
}

/// `C(n, k)` exactly, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn check_order(n: usize, r: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("no p-values supplied"));
    }
    if r == 0 || r > n {
        return Err(Error::invalid(format!("r = {r} outside 1..={n}")));
    }
    Ok(())
}

/// BHPC p-value: `spec` applied to the `n - r + 1` largest p-values.
pub fn bhpc(p: &[ProbValue], r: usize, spec: &CombinerSpec) -> Result<ProbValue> {
    check_order(p.len(), r)?;
    if !spec.is_symmetric() {
        return Err(Error::invalid(format!(
            "BHPC needs a symmetric combiner; {} depends on study order (use GBHPC enumeration)",
            spec.name()
        )));
    }
    spec.validate()?;
    let mut sorted = p.to_vec();
    // stable: ties keep study order
    sorted.sort_by(ProbValue::total_cmp);
    spec.combine(&sorted[r - 1..])
}

/// Number of subsets a GBHPC enumeration visits for `(n, r)`.
pub fn subset_count(n: usize, r: usize) -> u128 {
    binomial(n, r.saturating_sub(1))
}

/// GBHPC p-value by exhaustive enumeration of subsets of size `n - r + 1`.
///
/// `g` receives the sorted study indices `u` and the matching p-values.
pub fn gbhpc_enumerate<G>(p: &[ProbValue], r: usize, g: G, budget: u128) -> Result<ProbValue>
where
    G: FnMut(&[usize], &[ProbValue]) -> Result<ProbValue>,
{
    gbhpc_enumerate_argmax(p, r, g, budget).map(|(value, _)| value)
}

/// As [`gbhpc_enumerate`], also returning the first subset attaining the
/// maximum.
pub fn gbhpc_enumerate_argmax<G>(p: &[ProbValue], r: usize, mut g: G, budget: u128) -> Result<(ProbValue, Vec<usize>)>
where
    G: FnMut(&[usize], &[ProbValue]) -> Result<ProbValue>,
{
    let n = p.len();
    check_order(n, r)?;
    let needed = subset_count(n, r);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut best: Option<(ProbValue, Vec<usize>)> = None;
    let mut p_u = Vec::with_capacity(n - r + 1);
    for u in (0..n).combinations(n - r + 1) {
        p_u.clear();
        p_u.extend(u.iter().map(|&i| p[i]));
        let value = g(&u, &p_u)?;
        match &best {
            Some((b, _)) if value.ln() <= b.ln() => {}
            _ => best = Some((value, u)),
        }
    }
    Ok(best.expect("at least one subset"))
}

/// The structured subset combiner: Fisher within each block touched by `u`,
/// then Bonferroni across the touched blocks.
pub fn structured_component(groups: &GroupPartition, u: &[usize], p_u: &[ProbValue]) -> Result<ProbValue> {
    if u.len() != p_u.len() || u.is_empty() {
        return Err(Error::invalid("subset and p-values must be nonempty and aligned"));
    }
    let mut per_block: Vec<Vec<ProbValue>> = vec![Vec::new(); groups.len()];
    for (&i, &pi) in u.iter().zip(p_u) {
        if i >= groups.n() {
            return Err(Error::invalid(format!("study index {i} outside the partition")));
        }
        per_block[groups.block_of(i)].push(pi);
    }
    let mut touched = 0usize;
    let mut smallest = ProbValue::ONE;
    for block in per_block.iter().filter(|b| !b.is_empty()) {
        touched += 1;
        smallest = smallest.min(combine_fisher(block)?);
    }
    Ok(smallest.scaled(touched as f64))
}

/// Structured GBHPC p-value.
///
/// Because each within-block Fisher combination is symmetric and monotone,
/// only the count `c_i = |u ∩ I_i|` matters per block, and the worst subset
/// with those counts keeps the `c_i` largest p-values of each block. The
/// search therefore runs over count vectors summing to `n - r + 1`.
pub fn structured_gbhpc(p: &[ProbValue], r: usize, groups: &GroupPartition) -> Result<ProbValue> {
    let n = p.len();
    check_order(n, r)?;
    if groups.n() != n {
        return Err(Error::invalid(format!("partition covers {} studies, got {n} p-values", groups.n())));
    }
    // fisher_of_largest[b][c - 1]: Fisher on the c largest p-values of block b
    let fisher_of_largest: Vec<Vec<ProbValue>> = groups
        .blocks()
        .iter()
        .map(|block| {
            let mut values: Vec<ProbValue> = block.iter().map(|&i| p[i]).collect();
            values.sort_by(|a, b| b.total_cmp(a));
            (1..=values.len()).map(|c| combine_fisher(&values[..c])).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let sizes: Vec<usize> = groups.blocks().iter().map(Vec::len).collect();
    let mut capacity_after = vec![0usize; sizes.len() + 1];
    for b in (0..sizes.len()).rev() {
        capacity_after[b] = capacity_after[b + 1] + sizes[b];
    }

    struct Search<'a> {
        table: &'a [Vec<ProbValue>],
        sizes: &'a [usize],
        capacity_after: &'a [usize],
        best: ProbValue,
    }

    impl Search<'_> {
        fn visit(&mut self, block: usize, remaining: usize, touched: usize, smallest: ProbValue) {
            if remaining == 0 {
                let value = smallest.scaled(touched as f64);
                self.best = self.best.max(value);
                return;
            }
            if block == self.sizes.len() || self.capacity_after[block] < remaining {
                return;
            }
            let hi = self.sizes[block].min(remaining);
            for c in 0..=hi {
                if c == 0 {
                    self.visit(block + 1, remaining, touched, smallest);
                } else {
                    let v = self.table[block][c - 1];
                    self.visit(block + 1, remaining - c, touched + 1, smallest.min(v));
                }
            }
        }
    }

    let mut search =
        Search { table: &fisher_of_largest, sizes: &sizes, capacity_after: &capacity_after, best: ProbValue::ZERO };
    search.visit(0, n - r + 1, 0, ProbValue::ONE);
    Ok(search.best)
}

/// Probe points and tolerance for [`extract_component`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSchedule {
    /// Strictly decreasing values in (0, 1) substituted for the studies
    /// outside `u`.
    pub points: Vec<f64>,
    /// Absolute tolerance on successive linear values.
    pub tolerance: f64,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        ProbeSchedule { points: vec![1e-3, 1e-6, 1e-9, 1e-12], tolerance: 1e-10 }
    }
}

/// The subset combiner `g_u` recovered from a sensitive, monotone PC p-value
/// `f` by driving the studies outside `u` to zero.
pub struct ExtractedComponent<F> {
    f: F,
    n: usize,
    u: Vec<usize>,
    schedule: ProbeSchedule,
}

/// Recovers `g_u(p_u) = lim_{eps -> 0} f(p_u, eps * 1_{-u})`.
///
/// Monotonicity of `f` is the caller's responsibility; a limit that fails to
/// settle on the probe schedule is reported as non-convergence.
pub fn extract_component<F>(f: F, n: usize, u: &[usize], schedule: ProbeSchedule) -> Result<ExtractedComponent<F>>
where
    F: Fn(&[ProbValue]) -> Result<ProbValue>,
{
    let mut u = u.to_vec();
    u.sort_unstable();
    if u.is_empty() || u.windows(2).any(|w| w[0] == w[1]) || u.iter().any(|&i| i >= n) {
        return Err(Error::invalid("component subset must be nonempty, distinct, and inside 0..n"));
    }
    if schedule.points.len() < 2
        || schedule.points.iter().any(|&e| !(e > 0.0 && e < 1.0))
        || schedule.points.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::invalid("probe points must be at least two strictly decreasing values in (0, 1)"));
    }
    Ok(ExtractedComponent { f, n, u, schedule })
}

impl<F> ExtractedComponent<F>
where
    F: Fn(&[ProbValue]) -> Result<ProbValue>,
{
    pub fn subset(&self) -> &[usize] {
        &self.u
    }

    /// Evaluates `g_u` at `p_u`, aligned with [`subset`](Self::subset).
    pub fn eval(&self, p_u: &[ProbValue]) -> Result<ProbValue> {
        if p_u.len() != self.u.len() {
            return Err(Error::invalid(format!("expected {} p-values, got {}", self.u.len(), p_u.len())));
        }
        let mut full = vec![ProbValue::ONE; self.n];
        let mut inside = vec![false; self.n];
        for (&i, &pi) in self.u.iter().zip(p_u) {
            full[i] = pi;
            inside[i] = true;
        }
        let mut values = Vec::with_capacity(self.schedule.points.len());
        for &eps in &self.schedule.points {
            let probe = ProbValue::new(eps)?;
            for (slot, &is_in) in full.iter_mut().zip(&inside) {
                if !is_in {
                    *slot = probe;
                }
            }
            values.push((self.f)(&full)?);
        }
        let last = values[values.len() - 1];
        let prev = values[values.len() - 2];
        let gap = (last.linear() - prev.linear()).abs();
        if gap >= self.schedule.tolerance {
            return Err(Error::NonConvergence(format!(
                "component limit did not settle: successive probes differ by {gap:.3e}"
            )));
        }
        Ok(last)
    }
}

/// How the subset combiner `g_u` is formed in an enumerated GBHPC.
#[derive(Clone, Debug, PartialEq)]
pub enum SubsetRule {
    /// The same rule on every subset; index-bound weights follow study index.
    Combiner(CombinerSpec),
    /// The block-structured Bonferroni-of-Fisher rule.
    Structured(GroupPartition),
}

/// Method used to compute each `p_{r/n}` of a curve.
#[derive(Clone, Debug, PartialEq)]
pub enum PcMethod {
    Bhpc(CombinerSpec),
    StructuredGbhpc(GroupPartition),
    Enumerate { rule: SubsetRule, budget: u128 },
}

impl PcMethod {
    pub fn describe(&self) -> String {
        match self {
            PcMethod::Bhpc(spec) => format!("bhpc:{}", spec.name()),
            PcMethod::StructuredGbhpc(g) => format!("structured_gbhpc:{}_blocks", g.len()),
            PcMethod::Enumerate { rule: SubsetRule::Combiner(spec), .. } => format!("gbhpc_enumerate:{}", spec.name()),
            PcMethod::Enumerate { rule: SubsetRule::Structured(g), .. } => {
                format!("gbhpc_enumerate:structured_{}_blocks", g.len())
            }
        }
    }

    /// `p_{r/n}` for this method.
    pub fn p_value(&self, p: &[ProbValue], r: usize) -> Result<ProbValue> {
        match self {
            PcMethod::Bhpc(spec) => bhpc(p, r, spec),
            PcMethod::StructuredGbhpc(groups) => structured_gbhpc(p, r, groups),
            PcMethod::Enumerate { rule: SubsetRule::Combiner(spec), budget } => {
                spec.validate()?;
                gbhpc_enumerate(p, r, |u, p_u| spec.combine_indexed(u, p_u), *budget)
            }
            PcMethod::Enumerate { rule: SubsetRule::Structured(groups), budget } => {
                if groups.n() != p.len() {
                    return Err(Error::invalid(format!(
                        "partition covers {} studies, got {} p-values",
                        groups.n(),
                        p.len()
                    )));
                }
                gbhpc_enumerate(p, r, |u, p_u| structured_component(groups, u, p_u), *budget)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcEntry {
    pub r: usize,
    pub p: ProbValue,
}

/// `p_{r/n}` for every `r`, with the set of rejected orders at level `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct PcCurve {
    pub n: usize,
    pub method: String,
    pub alpha: f64,
    pub entries: Vec<PcEntry>,
    /// `{r : p_{r/n} <= alpha}`, ascending.
    pub confidence_set: Vec<usize>,
    /// Largest rejected `r`, or 0 when nothing is rejected.
    pub r_hat: usize,
    pub nondecreasing: bool,
    pub warnings: Vec<String>,
}

impl PcCurve {
    /// Assembles a curve from entries covering `r = 1..=n` exactly once.
    pub fn from_entries(method: String, alpha: f64, mut entries: Vec<PcEntry>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
        }
        entries.sort_by_key(|e| e.r);
        let n = entries.len();
        if n == 0 || entries.iter().enumerate().any(|(i, e)| e.r != i + 1) {
            return Err(Error::invalid("curve entries must cover r = 1..=n exactly once"));
        }
        let confidence_set: Vec<usize> = entries.iter().filter(|e| e.p.linear() <= alpha).map(|e| e.r).collect();
        let r_hat = confidence_set.last().copied().unwrap_or(0);

        let mut warnings = Vec::new();
        let mut nondecreasing = true;
        for w in entries.windows(2) {
            // rounding noise is not a dip
            let slack = 1e-12 * w[0].p.ln().abs().max(1.0);
            if w[1].p.ln() < w[0].p.ln() - slack {
                nondecreasing = false;
                warnings.push(format!(
                    "p_{{{}/{n}}} = {} is below p_{{{}/{n}}} = {}; curve is not monotone in r",
                    w[1].r, w[1].p, w[0].r, w[0].p
                ));
            }
        }
        if confidence_set.iter().enumerate().any(|(i, &r)| r != i + 1) {
            warnings.push("rejected orders do not form an initial segment 1..r_hat".to_string());
        }
        Ok(PcCurve { n, method, alpha, entries, confidence_set, r_hat, nondecreasing, warnings })
    }

    /// `p_{r/n}`; panics if `r` is outside `1..=n`.
    pub fn p(&self, r: usize) -> ProbValue {
        self.entries[r - 1].p
    }

    /// Plain-language reading of `r_hat`.
    pub fn interpretation(&self) -> String {
        let confidence = 100.0 * (1.0 - self.alpha);
        if self.r_hat == 0 {
            format!("no partial conjunction null rejected at level {}; no replicability claim", self.alpha)
        } else {
            format!(
                "with {confidence}% confidence at least {} of {} studies are non-null (proportion >= {:.4})",
                self.r_hat,
                self.n,
                self.r_hat as f64 / self.n as f64
            )
        }
    }
}

/// Computes the full PC curve `p_{r/n}`, `r = 1..=n`.
pub fn pc_curve(p: &[ProbValue], method: &PcMethod, alpha: f64) -> Result<PcCurve> {
    if p.is_empty() {
        return Err(Error::invalid("no p-values supplied"));
    }
    let entries = (1..=p.len())
        .map(|r| method.p_value(p, r).map(|pr| PcEntry { r, p: pr }))
        .collect::<Result<Vec<_>>>()?;
    PcCurve::from_entries(method.describe(), alpha, entries)
}
