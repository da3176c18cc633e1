//! Drives the batch interface programmatically with an inline configuration.
//! The same TOML works with the `spmhd` binary via `--config`.

use spmhd::cli::{run_from_args, RunConfig};

const CONFIG: &str = r#"
[mesh]
n = 2

[physics]
re = 100.0
rm = inf

[time]
t_final = 0.05
dt = 0.01

[problem]
case = "helical"

[output]
cadence = 5
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::parse(CONFIG)?;
    println!("{:?}", cfg.physics.params()?);

    let dir = std::env::temp_dir().join("spmhd-cli-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("run.toml");
    std::fs::write(&path, CONFIG)?;
    let args = ["spmhd", "simulate", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    let code = run_from_args(args);
    println!("exit code {code}, outputs in {}", dir.display());
    Ok(())
}
