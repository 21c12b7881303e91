// Invariant measure, return-time exponent and sampling for a small chain.

use polymer_lab::chain::ChainSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let chain = ChainSpec::with_labels(
        vec!["a".into(), "b".into()],
        vec![vec![0.3, 0.7], vec![0.5, 0.5]],
        "a",
    )?;
    let mu = chain.invariant_measure()?;
    println!("invariant measure: {:?}", mu.as_slice());

    // return-time exponential moments exist up to kappa = -log rho(taboo)
    let kappa = chain.kappa(0)?;
    println!("kappa(a) = {kappa:.6} (ln 2 = {:.6})", 2f64.ln());
    for alpha in [0.0, 0.3, 0.6] {
        println!("E_a exp({alpha} tau) = {:.6}", chain.return_time_mgf(0, alpha)?);
    }
    assert!(chain.return_time_mgf(0, kappa + 0.01)?.is_infinite());

    let path = chain.sample_path(10, &mut ChaCha8Rng::seed_from_u64(1));
    let labels: Vec<&str> = path.iter().map(|&x| chain.states()[x].as_str()).collect();
    println!("sample path: {}", labels.join(" "));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
