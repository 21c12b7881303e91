// c(f) three ways: cycle-equation root, Perron root, Varadhan integral.

use polymer_lab::chain::ChainSpec;
use polymer_lab::lyapunov::{c_derivative_at_zero, c_of_f, perron_log_root, varadhan_direct, Potential};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let chain = ChainSpec::from_matrix(vec![
        vec![0.2, 0.5, 0.3],
        vec![0.6, 0.0, 0.4],
        vec![0.1, 0.1, 0.8],
    ])?;
    let f = Potential::new(vec![0.3, -0.2, 0.1])?;

    let report = c_of_f(&chain, 0, &f)?;
    let perron = perron_log_root(&chain, &f)?;
    println!("c(f) by cycle root  = {:.12} ({} bisections)", report.c, report.iterations);
    println!("c(f) by Perron root = {perron:.12}");
    for n in [16, 256, 4096] {
        println!("Varadhan n = {n:>4}: {:.12}", varadhan_direct(&chain, 0, &f, n)?);
    }
    assert!((report.c - perron).abs() <= 1e-9);

    let d = c_derivative_at_zero(&chain, 0, &f, 1e-4)?;
    println!("c'(0): finite difference {:.9}, <mu, f> {:.9}", d.finite_difference, d.analytic);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
