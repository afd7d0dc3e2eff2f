// Checking a p-value rule by simulation before trusting it.
//
// A rule that halves Fisher's p-value looks attractive and rejects twice as
// often as it should; the oracle flags it.

use pcmeta::combiners::combine_fisher;
use pcmeta::oracle::{mc_validity, NullConfig, RejectionRate};
use pcmeta::partial_conjunction::bhpc;
use pcmeta::{CombinerSpec, ProbValue};

pub fn run_example() -> pcmeta::Result<Vec<(String, Vec<RejectionRate>)>> {
    let alphas = [0.01, 0.05];
    let reps = 20_000;
    let mut report = Vec::new();

    let fisher = mc_validity(combine_fisher, &NullConfig::uniform(5), &alphas, reps, 1)?;
    report.push(("fisher, global null".to_string(), fisher));

    let halved = |p: &[ProbValue]| combine_fisher(p).map(|v| v.scaled(0.5));
    report.push(("halved fisher".to_string(), mc_validity(halved, &NullConfig::uniform(5), &alphas, reps, 2)?));

    // one strong study: the boundary of H_0^{2/8}
    let boundary = NullConfig::boundary(8, 2, 6.0)?;
    let pc = |p: &[ProbValue]| bhpc(p, 2, &CombinerSpec::Fisher);
    report.push(("fisher bhpc r = 2".to_string(), mc_validity(pc, &boundary, &alphas, reps, 3)?));

    for (name, rates) in &report {
        for r in rates {
            println!(
                "{name:<20} alpha {:<5} rate {:.4} (bound {:.4}) {}",
                r.alpha,
                r.rate,
                r.bound,
                if r.valid { "ok" } else { "INVALID" }
            );
        }
    }
    Ok(report)
}

#[allow(dead_code)]
fn main() -> pcmeta::Result<()> {
    run_example().map(|_| ())
}
