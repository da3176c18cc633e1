//! Approximation rates of the interpolants and projections on smooth fields.

use spmhd::verification::{projector_defects, run_operator_rates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = run_operator_rates(0, &[2, 4, 8])?;
    table.write_text(&mut std::io::stdout())?;
    let (idem, discrete) = projector_defects(3)?;
    println!("idempotence defect {idem:.1e}, Π^N on a discrete field {discrete:.1e}");
    Ok(())
}
