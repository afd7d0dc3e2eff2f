// Two studies, `H_0^{2/2}`: the usual test `max(p1, p2) <= alpha` versus
// enlarged non-monotone regions that stay level alpha.

use pcmeta::counterexample::{power_grid_2d, slice_validity, PowerPoint2D, RejectionRegion2D, Test2D};

pub fn run_example() -> pcmeta::Result<Vec<PowerPoint2D>> {
    let alpha = 0.2;
    for test in Test2D::ALL {
        let region = RejectionRegion2D::for_test(test, alpha)?;
        println!(
            "{test:?}: {} components, largest slice measure {:.6}",
            region.components().count(),
            slice_validity(&region)
        );
    }

    let mu = [0.0, 0.5, 1.0, 2.0];
    let rows = power_grid_2d(&Test2D::ALL, &mu, alpha, 10_000, 7)?;
    for chunk in rows.chunks(Test2D::ALL.len()) {
        let powers: Vec<String> = chunk.iter().map(|r| format!("{:?} {:.4}", r.test, r.power)).collect();
        println!("mu = ({}, {})  {}", chunk[0].mu1, chunk[0].mu2, powers.join("  "));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> pcmeta::Result<()> {
    run_example().map(|_| ())
}
