//! Fluid at rest in a steady magnetic field (Rm = ∞) with the forcing that
//! balances the Lorentz force. The discrete velocity is a pure discretisation
//! error and shrinks under refinement.

use std::sync::Arc;

use spmhd::derham::OperatorContext;
use spmhd::mesh::{build_box_mesh, BoxDomain};
use spmhd::solver::{MhdSolver, SolverOptions};
use spmhd::verification::{build_case, default_params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = build_case("static-B", default_params("static-B"))?;
    for n in [2, 4] {
        let ctx = Arc::new(OperatorContext::new(Arc::new(build_box_mesh(n, BoxDomain::unit())?), 0, 4)?);
        let solver = MhdSolver::new(ctx.clone(), case.params, case.sources(), SolverOptions::default())?;
        let mut s = solver.init_state(&case.u, &case.b, 0.0)?;
        let b0 = s.b.clone();
        for _ in 0..5 {
            s = solver.step(&s, 0.02)?.0;
        }
        println!(
            "n = {n}: ‖u_h‖ = {:.3e}, ‖B_h − B_h⁰‖ = {:.3e} after t = {:.2}",
            ctx.ned_norm(&s.u),
            ctx.rt_norm(&s.b.lin_comb(1.0, &b0, -1.0)),
            s.t
        );
    }
    Ok(())
}
