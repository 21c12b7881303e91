// Running an experiment from a TOML configuration and writing its outputs.

use polymer_lab::experiment::{run, write_outputs, Command, ExperimentConfig};

const CONFIG: &str = r#"
seed = 42

[chain]
states = ["a", "b", "c"]
matrix = [[0.2, 0.5, 0.3], [0.6, 0.0, 0.4], [0.1, 0.1, 0.8]]

[environment]
preset = "poisson(0.5)"

[free_energy]
betas = [0.0, 0.5, 1.0]
n = 50
replicas = 100
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_toml_str(CONFIG, None)?;
    let output = run(Command::FreeEnergy, &config)?;
    print!("{}", output.table.to_tsv());

    let dir = std::env::temp_dir().join(format!("polymer-lab-example-{}", std::process::id()));
    let written = write_outputs(&output, &dir, true)?;
    println!("wrote {} and {} plot(s)", written.table.display(), written.plots.len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
