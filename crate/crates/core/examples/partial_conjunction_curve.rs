// Full PC curve for a handful of studies and the resulting confidence
// statement about how many of them carry an effect.

use pcmeta::partial_conjunction::{pc_curve, PcCurve, PcMethod};
use pcmeta::{CombinerSpec, ProbValue};

pub fn run_example() -> pcmeta::Result<Vec<PcCurve>> {
    let p: Vec<ProbValue> =
        [0.0004, 0.003, 0.012, 0.021, 0.2, 0.64].iter().map(|&x| ProbValue::new(x)).collect::<pcmeta::Result<_>>()?;

    let mut curves = Vec::new();
    for spec in [CombinerSpec::Simes, CombinerSpec::Fisher, CombinerSpec::Bonferroni] {
        let curve = pc_curve(&p, &PcMethod::Bhpc(spec), 0.05)?;
        let row: Vec<String> = curve.entries.iter().map(|e| format!("{}", e.p)).collect();
        println!("{:<18} {}", curve.method, row.join("  "));
        println!("{:<18} {}", "", curve.interpretation());
        curves.push(curve);
    }
    Ok(curves)
}

#[allow(dead_code)]
fn main() -> pcmeta::Result<()> {
    run_example().map(|_| ())
}
