//! Non-monotone level-alpha tests of `H_0^{2/2}`.
//!
//! The monotone test `phi = 1{max(p1, p2) <= alpha}` can be enlarged by
//! regions where both p-values are *large* without losing validity, because
//! the null `H_0^{2/2}` only requires one coordinate to be uniform. Validity
//! of such a region reduces to a slice condition: every line `p1 = const`
//! (and `p2 = const`) must meet the region in a set of measure at most alpha.
//!
//! * `phi_prime` adds a corner square `S` at the top right.
//! * `phi_tilde` additionally adds open squares `(k alpha, (k+1) alpha)^2`
//!   along the diagonal, as many as fit below `S`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::two_sided_normal_p;

/// A real interval with independently open or closed ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    /// Whether the two intervals share at least one point.
    pub fn intersects(&self, other: &Interval) -> bool {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        lo < hi || (lo == hi && lo_closed && hi_closed)
    }
}

/// Axis-aligned rectangle `x × y` in p-value space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x: Interval,
    pub y: Interval,
}

impl Rect {
    pub fn square(side: Interval) -> Self {
        Rect { x: side, y: side }
    }

    pub fn contains(&self, p1: f64, p2: f64) -> bool {
        self.x.contains(p1) && self.y.contains(p2)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x.intersects(&other.x) && self.y.intersects(&other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Test2D {
    Phi,
    PhiPrime,
    PhiTilde,
}

impl Test2D {
    pub const ALL: [Test2D; 3] = [Test2D::Phi, Test2D::PhiPrime, Test2D::PhiTilde];
}

/// Union of rectangles forming a rejection region in `[0, 1]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RejectionRegion2D {
    pub alpha: f64,
    /// `{max(p1, p2) <= alpha}`
    pub base: Rect,
    pub corner: Option<Rect>,
    pub diagonal_squares: Vec<Rect>,
    /// Additional user-supplied components.
    pub extra: Vec<Rect>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// The corner square `S`: `{min(p1, p2) >= 1 - alpha}` for `alpha < 1/2`,
/// else `{min(p1, p2) >= alpha}`.
pub fn corner_square(alpha: f64) -> Rect {
    let lo = if alpha < 0.5 { 1.0 - alpha } else { alpha };
    Rect::square(Interval::closed(lo, 1.0))
}

/// Number of diagonal squares: the largest `k` with `(k + 1) alpha <= 1 - alpha`.
pub fn diagonal_square_count(alpha: f64) -> usize {
    if alpha >= 0.5 {
        return 0;
    }
    // slack absorbs representation error when 1/alpha is an integer
    let k = ((1.0 - alpha) / alpha + 1e-9).floor() - 1.0;
    k.max(0.0) as usize
}

impl RejectionRegion2D {
    pub fn phi(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(RejectionRegion2D {
            alpha,
            base: Rect::square(Interval::closed(0.0, alpha)),
            corner: None,
            diagonal_squares: Vec::new(),
            extra: Vec::new(),
        })
    }

    pub fn phi_prime(alpha: f64) -> Result<Self> {
        let mut region = Self::phi(alpha)?;
        region.corner = Some(corner_square(alpha));
        Ok(region)
    }

    pub fn phi_tilde(alpha: f64) -> Result<Self> {
        let mut region = Self::phi_prime(alpha)?;
        // the last square ends exactly where S starts, even when (K + 1) alpha
        // rounds above 1 - alpha
        let top = corner_square(alpha).x.lo;
        region.diagonal_squares = (1..=diagonal_square_count(alpha))
            .map(|k| Rect::square(Interval::open(k as f64 * alpha, ((k + 1) as f64 * alpha).min(top))))
            .collect();
        Ok(region)
    }

    pub fn for_test(test: Test2D, alpha: f64) -> Result<Self> {
        match test {
            Test2D::Phi => Self::phi(alpha),
            Test2D::PhiPrime => Self::phi_prime(alpha),
            Test2D::PhiTilde => Self::phi_tilde(alpha),
        }
    }

    pub fn with_extra(mut self, rect: Rect) -> Self {
        self.extra.push(rect);
        self
    }

    pub fn components(&self) -> impl Iterator<Item = &Rect> {
        std::iter::once(&self.base).chain(self.corner.iter()).chain(self.diagonal_squares.iter()).chain(self.extra.iter())
    }

    pub fn contains(&self, p1: f64, p2: f64) -> bool {
        self.components().any(|r| r.contains(p1, p2))
    }

    /// True when no two components share a point.
    pub fn components_disjoint(&self) -> bool {
        let rects: Vec<&Rect> = self.components().collect();
        rects.iter().enumerate().all(|(i, a)| rects[i + 1..].iter().all(|b| !a.intersects(b)))
    }
}

fn indicator(region: Result<RejectionRegion2D>, p1: f64, p2: f64) -> u8 {
    match region {
        Ok(r) => r.contains(p1, p2) as u8,
        Err(_) => 0,
    }
}

/// `1{max(p1, p2) <= alpha}`.
pub fn phi(p1: f64, p2: f64, alpha: f64) -> u8 {
    (p1.max(p2) <= alpha) as u8
}

/// `phi` plus the corner square.
pub fn phi_prime(p1: f64, p2: f64, alpha: f64) -> u8 {
    indicator(RejectionRegion2D::phi_prime(alpha), p1, p2)
}

/// `phi_prime` plus the diagonal squares.
pub fn phi_tilde(p1: f64, p2: f64, alpha: f64) -> u8 {
    indicator(RejectionRegion2D::phi_tilde(alpha), p1, p2)
}

fn union_length(mut intervals: Vec<(f64, f64)>) -> f64 {
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        match current {
            Some((clo, chi)) if lo <= chi => current = Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                total += chi - clo;
                current = Some((lo, hi));
            }
            None => current = Some((lo, hi)),
        }
    }
    if let Some((clo, chi)) = current {
        total += chi - clo;
    }
    total
}

fn max_slice_measure(rects: &[(Interval, Interval)]) -> f64 {
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    for (fixed, _) in rects {
        cuts.push(fixed.lo.clamp(0.0, 1.0));
        cuts.push(fixed.hi.clamp(0.0, 1.0));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let pieces = rects
                .iter()
                .filter(|(fixed, _)| fixed.contains(mid))
                .map(|(_, free)| (free.lo.max(0.0), free.hi.min(1.0)))
                .filter(|(lo, hi)| hi > lo)
                .collect();
            union_length(pieces)
        })
        .fold(0.0, f64::max)
}

/// Largest measure of a one-dimensional slice of the region, over both
/// coordinates.
///
/// Slice measure is piecewise constant between rectangle edges, so it is
/// evaluated exactly once per elementary interval. Slices through single edge
/// coordinates form a null set and are excluded (essential supremum), which
/// is what conditional rejection probabilities see.
pub fn slice_validity(region: &RejectionRegion2D) -> f64 {
    let by_x: Vec<(Interval, Interval)> = region.components().map(|r| (r.x, r.y)).collect();
    let by_y: Vec<(Interval, Interval)> = region.components().map(|r| (r.y, r.x)).collect();
    max_slice_measure(&by_x).max(max_slice_measure(&by_y))
}

/// Monte Carlo power at one `(mu1, mu2)` for one test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint2D {
    pub mu1: f64,
    pub mu2: f64,
    pub test: Test2D,
    pub power: f64,
    pub se: f64,
}

pub const MIN_POWER_REPS: usize = 10_000;

/// Power of each test over the grid `mu_grid × mu_grid` with two-sided
/// p-values of `Z_i ~ N(mu_i, 1)`.
///
/// All tests at a grid point see the same draws, so pointwise orderings
/// between nested regions hold exactly. Cell `c` uses ChaCha8 stream `c`
/// from `seed`, independent of scheduling.
pub fn power_grid_2d(tests: &[Test2D], mu_grid: &[f64], alpha: f64, reps: usize, seed: u64) -> Result<Vec<PowerPoint2D>> {
    if reps < MIN_POWER_REPS {
        return Err(Error::invalid(format!("power grid needs at least {MIN_POWER_REPS} replicates, got {reps}")));
    }
    if tests.is_empty() || mu_grid.is_empty() {
        return Err(Error::invalid("power grid needs at least one test and one grid value"));
    }
    let regions = tests.iter().map(|&t| RejectionRegion2D::for_test(t, alpha)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, f64, f64)> = mu_grid
        .iter()
        .flat_map(|&m1| mu_grid.iter().map(move |&m2| (m1, m2)))
        .enumerate()
        .map(|(i, (m1, m2))| (i, m1, m2))
        .collect();

    let per_cell: Vec<Vec<PowerPoint2D>> = cells
        .par_iter()
        .map(|&(cell, mu1, mu2)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(cell as u64);
            let mut hits = vec![0usize; regions.len()];
            for _ in 0..reps {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let p1 = two_sided_normal_p(z1 + mu1).linear();
                let p2 = two_sided_normal_p(z2 + mu2).linear();
                for (h, region) in hits.iter_mut().zip(&regions) {
                    *h += region.contains(p1, p2) as usize;
                }
            }
            tests
                .iter()
                .zip(hits)
                .map(|(&test, h)| {
                    let power = h as f64 / reps as f64;
                    PowerPoint2D { mu1, mu2, test, power, se: (power * (1.0 - power) / reps as f64).sqrt() }
                })
                .collect()
        })
        .collect();
    Ok(per_cell.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.05, 0.05, 0.1), 1);
        assert_eq!(phi(0.05, 0.5, 0.1), 0);
        assert_eq!(phi(0.1, 0.1, 0.1), 1);
    }

    #[test]
    fn phi_prime_examples() {
        assert_eq!(phi_prime(0.95, 0.96, 0.1), 1);
        assert_eq!(phi_prime(0.95, 0.5, 0.1), 0);
        assert_eq!(phi_prime(0.65, 0.7, 0.6), 1);
        assert_eq!(phi_prime(0.05, 0.02, 0.1), 1);
    }

    #[test]
    fn phi_tilde_examples() {
        assert_eq!(phi_tilde(0.3, 0.35, 0.2), 1);
        assert_eq!(phi_tilde(0.3, 0.5, 0.2), 0);
        assert_eq!(phi_tilde(0.85, 0.9, 0.2), 1);
        assert_eq!(phi_tilde(0.7, 0.75, 0.2), 1);
    }

    #[test]
    fn diagonal_counts() {
        assert_eq!(diagonal_square_count(0.2), 3);
        assert_eq!(diagonal_square_count(0.1), 8);
        assert_eq!(diagonal_square_count(0.05), 18);
        assert_eq!(diagonal_square_count(0.3), 1);
        assert_eq!(diagonal_square_count(0.45), 0);
        assert_eq!(diagonal_square_count(0.6), 0);
    }

    #[test]
    fn regions_are_disjoint_below_one_half() {
        for alpha in [0.05, 0.1, 0.2, 0.3, 0.33, 0.45] {
            assert!(RejectionRegion2D::phi_tilde(alpha).unwrap().components_disjoint(), "alpha {alpha}");
        }
    }

    #[test]
    fn slice_measure_of_each_region() {
        for alpha in [0.05, 0.1, 0.2, 0.3, 0.6] {
            let phi = slice_validity(&RejectionRegion2D::phi(alpha).unwrap());
            assert!((phi - alpha).abs() < 1e-12);
            let prime = slice_validity(&RejectionRegion2D::phi_prime(alpha).unwrap());
            assert!(prime <= alpha + 1e-12);
            let tilde = slice_validity(&RejectionRegion2D::phi_tilde(alpha).unwrap());
            assert!(tilde <= alpha + 1e-12, "alpha {alpha}: {tilde}");
        }
        for alpha in [0.05, 0.1, 0.2] {
            let tilde = slice_validity(&RejectionRegion2D::phi_tilde(alpha).unwrap());
            assert!((tilde - alpha).abs() < 1e-12, "alpha {alpha}: {tilde}");
        }
    }

    #[test]
    fn overlapping_extra_square_is_detected() {
        let alpha = 0.1;
        let region = RejectionRegion2D::phi_tilde(alpha)
            .unwrap()
            .with_extra(Rect::square(Interval::closed(0.05, 0.15)));
        assert!(!region.components_disjoint());
        assert!(slice_validity(&region) > alpha + 1e-3);

        // off-diagonal square doubles up slices with the diagonal ones
        let region = RejectionRegion2D::phi_tilde(0.2)
            .unwrap()
            .with_extra(Rect { x: Interval::open(0.2, 0.4), y: Interval::open(0.6, 0.8) });
        assert!(region.components_disjoint());
        assert!((slice_validity(&region) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn nesting_on_a_fine_grid() {
        let alpha = 0.2;
        let steps = 1000;
        for i in 0..=steps {
            for j in 0..=steps {
                let (p1, p2) = (i as f64 / steps as f64, j as f64 / steps as f64);
                let a = phi(p1, p2, alpha);
                let b = phi_prime(p1, p2, alpha);
                let c = phi_tilde(p1, p2, alpha);
                assert!(a <= b && b <= c, "({p1}, {p2})");
            }
        }
    }

    #[test]
    fn interval_intersection_respects_open_ends() {
        let a = Interval::closed(0.0, 0.2);
        assert!(!a.intersects(&Interval::open(0.2, 0.4)));
        assert!(a.intersects(&Interval::closed(0.2, 0.4)));
        assert!(a.intersects(&Interval::open(0.1, 0.4)));
    }

    #[test]
    fn power_grid_rejects_small_reps() {
        assert!(power_grid_2d(&Test2D::ALL, &[0.0], 0.1, 100, 1).is_err());
    }
}
