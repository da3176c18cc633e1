//! Full-scheme convergence study on the `decay-trig` manufactured solution.
//!
//! ```text
//! cargo run --release --example convergence -- 2 4 8
//! ```

use std::time::Instant;

use spmhd::solver::{NonlinearScheme, SolverOptions};
use spmhd::verification::{build_case, default_params, run_level, DtRule, EocTable, CONVERGENCE_COLUMNS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut levels: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    if levels.is_empty() {
        levels = vec![2, 4];
    }
    let case = build_case("decay-trig", default_params("decay-trig"))?;
    let mut table = EocTable::new(&CONVERGENCE_COLUMNS);
    for &n in &levels {
        let start = Instant::now();
        let run = run_level(&case, n, 0, 0.1, DtRule::default(), SolverOptions {
            scheme: NonlinearScheme::Chord,
            ..SolverOptions::default()
        })?;
        eprintln!(
            "n = {n}: {} steps, at most {} iterations per step, max |div B| = {:.1e}, {:.1?}",
            run.level.steps,
            run.max_iterations,
            run.max_div_b,
            start.elapsed()
        );
        table.levels.push(run.level);
    }
    table.write_text(&mut std::io::stdout())?;
    Ok(())
}
