// Replicability across the 18 bundled subgroups.
//
// Subgroups from different grouping factors share patients, so a plain BHPC
// combiner is not valid here. The structured GBHPC combines Fisher within
// each independent block and Bonferroni across blocks.

use pcmeta::combiners::CombinerSpec;
use pcmeta::dataset;
use pcmeta::partial_conjunction::{pc_curve, PcCurve, PcMethod};

pub struct SubgroupCurves {
    pub bonferroni: PcCurve,
    pub structured: PcCurve,
}

pub fn run_example() -> pcmeta::Result<SubgroupCurves> {
    let p = dataset::reported_pvalues()?;
    let groups = dataset::grouping_factors()?;

    let bonferroni = pc_curve(&p, &PcMethod::Bhpc(CombinerSpec::Bonferroni), 0.05)?;
    let structured = pc_curve(&p, &PcMethod::StructuredGbhpc(groups), 0.05)?;

    println!("{:>3}  {:>12}  {:>12}", "r", "bonferroni", "structured");
    for r in 1..=p.len() {
        println!("{r:>3}  {:>12}  {:>12}", bonferroni.p(r), structured.p(r));
    }
    println!("{}", structured.interpretation());
    for w in &bonferroni.warnings {
        println!("bonferroni: {w}");
    }
    Ok(SubgroupCurves { bonferroni, structured })
}

#[allow(dead_code)]
fn main() -> pcmeta::Result<()> {
    run_example().map(|_| ())
}
