// A small power map for r = 2 of 8 studies with Gamma-distributed effects.
//
// `pcmeta simulate` runs the same thing from a JSON config over the full
// default grid.

use pcmeta::simulation::{run_power_map, PowerGrid, SimConfig};

pub fn run_example() -> pcmeta::Result<PowerGrid> {
    let cfg = SimConfig {
        reps: 2_000,
        mu0_grid: vec![0.1, 0.25, 0.4],
        sigma0_grid: vec![0.05, 0.4],
        r0_values: vec![2, 6],
        ..SimConfig::default()
    };
    let grid = run_power_map(&cfg)?;
    println!("{:>5} {:>6} {:>3} {:>15} {:>7}", "mu0", "sigma0", "r0", "method", "power");
    for row in &grid.rows {
        println!("{:>5} {:>6} {:>3} {:>15} {:>7.4}", row.mu0, row.sigma0, row.r0, row.method.name(), row.power);
    }
    Ok(grid)
}

#[allow(dead_code)]
fn main() -> pcmeta::Result<()> {
    run_example().map(|_| ())
}
