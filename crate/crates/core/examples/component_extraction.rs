// Recovering the subset combiner behind a PC p-value.
//
// Sending every study outside `u` to zero leaves only `g_u(p_u)`. For a
// Fisher BHPC that is plain Fisher on `p_u`.

use pcmeta::combiners::combine_fisher;
use pcmeta::partial_conjunction::{bhpc, extract_component, ProbeSchedule};
use pcmeta::{CombinerSpec, ProbValue};

pub fn run_example() -> pcmeta::Result<(ProbValue, ProbValue)> {
    let n = 5;
    let r = 3;
    let f = |p: &[ProbValue]| bhpc(p, r, &CombinerSpec::Fisher);

    // |u| = n - r + 1
    let u = [1, 3, 4];
    let component = extract_component(f, n, &u, ProbeSchedule::default())?;
    let p_u = [ProbValue::new(0.04)?, ProbValue::new(0.3)?, ProbValue::new(0.7)?];

    let recovered = component.eval(&p_u)?;
    let direct = combine_fisher(&p_u)?;
    println!("subset {:?}: recovered {recovered}, fisher {direct}", component.subset());
    Ok((recovered, direct))
}

#[allow(dead_code)]
fn main() -> pcmeta::Result<()> {
    run_example().map(|_| ())
}
