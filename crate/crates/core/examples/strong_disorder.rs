// Monotonicity of p_n, the derivative sandwich and the decay of Z_n.

use polymer_lab::chain::ChainSpec;
use polymer_lab::disorder::{decay_fit, monotonicity_scan, sandwich_check};
use polymer_lab::levy::LevyTriple;
use polymer_lab::transfer::ReplicaPlan;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let chain = ChainSpec::symmetric_two_state(0.3)?;
    let law = LevyTriple::new(0.0, 0.0, &[(1.5, 0.4), (-0.8, 0.7)])?.center();
    let plan = ReplicaPlan::new(60, 200, 0);

    let scan = monotonicity_scan(&chain, &law, &[0.0, 0.5, 1.0, 1.5], plan)?;
    for (beta, pn) in scan.beta_grid.iter().zip(&scan.pn) {
        println!("p_n({beta}) = {:.5} +- {:.5}", pn.mean, pn.stderr);
    }
    println!("monotone: {}", scan.is_monotone());

    let s = sandwich_check(&chain, &law, 1.0, plan)?;
    println!(
        "sandwich at beta 1: c1 = {:.4}, c2 = {:.4}, p'_n = {:.4}, holds: {}",
        s.constants.c1,
        s.constants.c2,
        s.pprime.mean,
        s.holds()
    );

    let fit = decay_fit(&chain, &law, 1.5, &[25, 50, 100, 200], 200, 0)?;
    println!("E log Z_n slope = {:.4}, CI ({:.4}, {:.4}), verdict {:?}", fit.slope.mean, fit.ci.0, fit.ci.1, fit.verdict);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
