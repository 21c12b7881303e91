// Lévy triples: cumulants, sampling and the integration-by-parts identity.

use polymer_lab::levy::{ibp_residual, standard_test_functions, EnvironmentLaw, LevyTriple};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mixed = LevyTriple::new(0.0, 0.5, &[(1.5, 0.4), (-0.8, 0.7)])?.center();
    println!("centred drift = {:.4}, variance = {:.4}", mixed.drift(), mixed.variance());
    for beta in [0.5, 1.0, 2.0] {
        println!("lambda({beta}) = {:.6}", mixed.cumulant(beta)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let field = mixed.sample_field(4, 2, &mut rng);
    println!("field g(i, x), 4 x 2: {:?}", field.values());

    for triple in [LevyTriple::gaussian(1.0)?, LevyTriple::compensated_poisson(1.0)?, mixed] {
        for tf in standard_test_functions() {
            let check = ibp_residual(&triple, tf.f, tf.df)?;
            println!("{:>14}: residual {:.2e}", tf.name, check.residual);
            assert!(check.residual <= 1e-7);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
