//! Ideal MHD (Re = Rm = ∞) without forcing: the midpoint scheme keeps the
//! energy, the magnetic helicity and the cross helicity to round-off.
//!
//! ```text
//! cargo run --release --example ideal_conservation -- 100
//! ```

use std::sync::Arc;

use spmhd::derham::OperatorContext;
use spmhd::diagnostics::ConservationReport;
use spmhd::mesh::{build_box_mesh, BoxDomain};
use spmhd::solver::{MhdSolver, PhysParams, SolverOptions, SourceTerms};
use spmhd::verification::helical_initial_data;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(20);
    let ctx = Arc::new(OperatorContext::new(Arc::new(build_box_mesh(3, BoxDomain::unit())?), 0, 4)?);
    let solver = MhdSolver::new(ctx, PhysParams::ideal(1.0, 1.0)?, SourceTerms::none(), SolverOptions::default())?;
    let (u0, b0) = helical_initial_data();
    let mut s = solver.init_state(&u0, &b0, 0.0)?;
    let first = ConservationReport::of_state(&solver, &s)?;
    println!("{:>6} {:>22} {:>22} {:>22} {:>6}", "t", "energy", "magnetic helicity", "cross helicity", "iters");
    println!("{:>6.3} {:>22.15e} {:>22.15e} {:>22.15e}", s.t, first.energy, first.magnetic_helicity, first.cross_helicity);
    for k in 1..=steps {
        let (next, rep) = solver.step(&s, 0.01)?;
        let r = ConservationReport::of_step(&solver, &s, &next)?;
        if k % 5 == 0 || k == steps {
            println!("{:>6.3} {:>22.15e} {:>22.15e} {:>22.15e} {:>6}", r.t, r.energy, r.magnetic_helicity, r.cross_helicity, rep.iterations);
        }
        s = next;
    }
    Ok(())
}
