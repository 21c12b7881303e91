// Exact quenched partition function, Gibbs marginals and replica overlap
// for one environment, then Monte Carlo over environments.

use polymer_lab::chain::ChainSpec;
use polymer_lab::levy::{EnvironmentLaw, LevyTriple};
use polymer_lab::transfer::{
    gibbs_marginals, log_partition, martingale_mean_check, pn_estimate, ReplicaPlan,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let chain = ChainSpec::symmetric_two_state(0.3)?;
    let law = LevyTriple::gaussian(1.0)?;
    let beta = 1.0;

    let field = law.sample_field(50, chain.len(), &mut ChaCha8Rng::seed_from_u64(5));
    let log_z = log_partition(&chain, &field, &law, beta)?;
    let q = gibbs_marginals(&chain, &field, &law, beta)?;
    println!("log Z_50 = {log_z:.6}");
    println!("marginal at time 50: {:?}", q.row(50));
    println!("overlap = {:.4}, energy = {:.4}", q.overlap(), q.energy(&field));

    let plan = ReplicaPlan::new(100, 400, 0);
    let pn = pn_estimate(&chain, &law, beta, plan)?;
    println!("p_100(1) = {:.5} +- {:.5}", pn.mean, pn.stderr);
    let z = martingale_mean_check(&chain, &law, 0.5, plan.with_horizon(20))?;
    println!("E Z_20(0.5) = {:.4} +- {:.4}", z.mean, z.stderr);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
