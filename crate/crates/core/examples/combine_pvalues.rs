// Meta-analysis combiners on the four textbook cases.
//
// Case A has one overwhelming study, case B five moderately strong ones.
// Fisher and Stouffer call A more significant. Case C has three tiny
// p-values, case D four borderline ones, and at r = 4 only D shows any
// replication.

use pcmeta::combiners::{combine_fisher, combine_simes, combine_stouffer_weighted, combine_tpm};
use pcmeta::partial_conjunction::bhpc;
use pcmeta::{CombinerSpec, ProbValue};

pub struct CaseValues {
    pub fisher_a: ProbValue,
    pub fisher_b: ProbValue,
    pub stouffer_a: ProbValue,
    pub stouffer_b: ProbValue,
    pub bhpc4_c: ProbValue,
    pub bhpc4_d: ProbValue,
}

fn pvs(xs: &[f64]) -> pcmeta::Result<Vec<ProbValue>> {
    xs.iter().map(|&x| ProbValue::new(x)).collect()
}

pub fn run_example() -> pcmeta::Result<CaseValues> {
    let a = pvs(&[1e-200, 0.4, 0.5, 0.6, 0.7])?;
    let b = pvs(&[1e-10, 1e-9, 1e-8, 1e-7, 1e-6])?;
    let c = pvs(&[1e-100, 1e-100, 1e-100, 0.049, 0.8])?;
    let d = pvs(&[0.048, 0.048, 0.048, 0.048, 0.8])?;
    let equal = [1.0; 5];

    let values = CaseValues {
        fisher_a: combine_fisher(&a)?,
        fisher_b: combine_fisher(&b)?,
        stouffer_a: combine_stouffer_weighted(&a, &equal)?,
        stouffer_b: combine_stouffer_weighted(&b, &equal)?,
        bhpc4_c: bhpc(&c, 4, &CombinerSpec::Fisher)?,
        bhpc4_d: bhpc(&d, 4, &CombinerSpec::Fisher)?,
    };

    // log form, since case A underflows nothing but is unreadable linearly
    println!("case A  fisher ln p = {:.4}  stouffer ln p = {:.4}", values.fisher_a.ln(), values.stouffer_a.ln());
    println!("case B  fisher ln p = {:.4}  stouffer ln p = {:.4}", values.fisher_b.ln(), values.stouffer_b.ln());
    println!("case A  simes {}  tpm(0.05) {}", combine_simes(&a)?, combine_tpm(&a, 0.05)?);
    println!("r = 4   case C {}  case D {}", values.bhpc4_c, values.bhpc4_d);
    Ok(values)
}

#[allow(dead_code)]
fn main() -> pcmeta::Result<()> {
    run_example().map(|_| ())
}
