//! Forced resistive run on a manufactured case: per step the discrete energy
//! and helicity balance laws hold to round-off, and div B stays zero.

use std::sync::Arc;

use spmhd::derham::OperatorContext;
use spmhd::diagnostics::step_balances;
use spmhd::mesh::{build_box_mesh, BoxDomain};
use spmhd::solver::{MhdSolver, SolverOptions};
use spmhd::verification::{build_case, default_params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = build_case("helical-trig", default_params("helical-trig"))?;
    let ctx = Arc::new(OperatorContext::new(Arc::new(build_box_mesh(3, BoxDomain::unit())?), 0, 4)?);
    let solver = MhdSolver::new(ctx.clone(), case.params, case.sources(), SolverOptions::default())?;
    let mut s = solver.init_state(&case.u, &case.b, 0.0)?;
    println!("{:>5} {:>12} {:>12} {:>10} {:>10} {:>10} {:>9}", "t", "dE/dt", "work", "energy", "mag hel", "cross hel", "|D2 B|");
    for _ in 0..10 {
        let (next, _) = solver.step(&s, 0.01)?;
        let b = step_balances(&solver, &s, &next)?;
        let div = ctx.complex().div_integrals(&next.b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!(
            "{:>5.2} {:>12.5e} {:>12.5e} {:>10.1e} {:>10.1e} {:>10.1e} {:>9.1e}",
            next.t,
            b.energy.rate,
            b.energy.predicted,
            b.energy.relative(),
            b.magnetic_helicity.relative(),
            b.cross_helicity.relative(),
            div
        );
        s = next;
    }
    Ok(())
}
