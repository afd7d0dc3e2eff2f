use proptest::prelude::*;

use pcmeta::combiners::{combine_bonferroni, combine_fisher, combine_simes, combine_stouffer_weighted, combine_tpm};
use pcmeta::counterexample::{phi, phi_prime, phi_tilde};
use pcmeta::partial_conjunction::{bhpc, gbhpc_enumerate, structured_component, structured_gbhpc};
use pcmeta::{CombinerSpec, GroupPartition, ProbValue};

fn pv(x: f64) -> ProbValue {
    ProbValue::new(x).unwrap()
}

// log-uniform over (1e-12, 1) so tiny and moderate p-values both show up
fn p_strategy() -> impl Strategy<Value = f64> {
    (-12.0f64..-1e-6).prop_map(|e| 10f64.powf(e))
}

fn p_vec(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(p_strategy(), 1..=max)
}

fn specs() -> Vec<CombinerSpec> {
    vec![CombinerSpec::Fisher, CombinerSpec::Simes, CombinerSpec::Bonferroni, CombinerSpec::tpm(0.1).unwrap()]
}

fn close(a: ProbValue, b: ProbValue) -> bool {
    (a.ln() - b.ln()).abs() <= 1e-12 * a.ln().abs().max(1.0)
}

proptest! {
    #[test]
    fn combiners_are_nondecreasing(p in p_vec(8), i in 0usize..8, f in 1.0f64..1e3) {
        let i = i % p.len();
        let lo: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        let mut hi = lo.clone();
        hi[i] = pv((p[i] * f).min(0.999));
        let w = vec![1.0; p.len()];
        let slack = 1e-12;
        prop_assert!(combine_fisher(&lo)?.ln() <= combine_fisher(&hi)?.ln() + slack);
        prop_assert!(combine_simes(&lo)?.ln() <= combine_simes(&hi)?.ln() + slack);
        prop_assert!(combine_bonferroni(&lo)?.ln() <= combine_bonferroni(&hi)?.ln() + slack);
        prop_assert!(combine_stouffer_weighted(&lo, &w)?.ln() <= combine_stouffer_weighted(&hi, &w)?.ln() + slack);
        prop_assert!(combine_tpm(&lo, 0.05)?.ln() <= combine_tpm(&hi, 0.05)?.ln() + slack);
    }

    #[test]
    fn combiners_are_symmetric(p in p_vec(8), seed in any::<u64>()) {
        let a: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        let mut b = a.clone();
        b.rotate_left((seed as usize) % a.len());
        b.reverse();
        for spec in specs() {
            prop_assert!(close(spec.combine(&a)?, spec.combine(&b)?), "{}", spec.name());
        }
    }

    #[test]
    fn simes_never_exceeds_bonferroni(p in p_vec(10)) {
        let p: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        prop_assert!(combine_simes(&p)?.ln() <= combine_bonferroni(&p)?.ln() + 1e-12);
    }

    #[test]
    fn combined_value_is_a_probability(p in p_vec(10)) {
        let p: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        for spec in specs() {
            let v = spec.combine(&p)?;
            prop_assert!(v.ln() <= 0.0 && (0.0..=1.0).contains(&v.linear()));
        }
    }

    #[test]
    fn one_strong_study_drives_fisher_to_zero(p in p_vec(6)) {
        let mut p: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        let before = combine_fisher(&p)?;
        p[0] = ProbValue::from_ln(-5000.0)?;
        let after = combine_fisher(&p)?;
        prop_assert!(after.ln() < -4000.0 && after.ln() < before.ln());
    }

    #[test]
    fn bhpc_ignores_study_order(p in p_vec(8), r in 1usize..8, seed in any::<u64>()) {
        let r = 1 + (r - 1) % p.len();
        let a: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        let mut b = a.clone();
        b.rotate_right((seed as usize) % a.len());
        for spec in specs() {
            prop_assert!(close(bhpc(&a, r, &spec)?, bhpc(&b, r, &spec)?));
        }
    }

    #[test]
    fn bhpc_simes_is_nondecreasing_in_r(p in p_vec(8)) {
        let p: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        let curve: Vec<f64> = (1..=p.len()).map(|r| bhpc(&p, r, &CombinerSpec::Simes).unwrap().ln()).collect();
        for w in curve.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12, "{curve:?}");
        }
    }

    #[test]
    fn bhpc_at_r_n_is_the_largest_p(p in p_vec(8)) {
        let pv_: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        let max = p.iter().cloned().fold(0.0, f64::max);
        // truncation makes TPM return 1 when the last p exceeds gamma
        for spec in [CombinerSpec::Fisher, CombinerSpec::Simes, CombinerSpec::Bonferroni] {
            prop_assert!((bhpc(&pv_, p.len(), &spec)?.linear() - max).abs() <= 1e-12 * max);
        }
    }

    #[test]
    fn structured_fast_path_matches_enumeration(
        p in prop::collection::vec(p_strategy(), 2..=7),
        labels in prop::collection::vec(0usize..3, 7),
        r in 1usize..7,
    ) {
        let n = p.len();
        let r = 1 + (r - 1) % n;
        let names: Vec<String> = labels[..n].iter().map(|l| format!("g{l}")).collect();
        let groups = GroupPartition::from_labels(&names)?;
        let p: Vec<ProbValue> = p.iter().map(|&x| pv(x)).collect();
        let fast = structured_gbhpc(&p, r, &groups)?;
        let slow = gbhpc_enumerate(&p, r, |u, pu| structured_component(&groups, u, pu), 1_000_000)?;
        prop_assert!(close(fast, slow), "fast {fast} slow {slow}");
    }

    #[test]
    fn rejection_regions_nest(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, alpha in 0.01f64..0.6) {
        let (a, b, c) = (phi(p1, p2, alpha), phi_prime(p1, p2, alpha), phi_tilde(p1, p2, alpha));
        prop_assert!(a <= b && b <= c, "{a} {b} {c}");
    }
}
