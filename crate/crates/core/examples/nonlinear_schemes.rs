//! Residual histories of one midpoint step with Picard, Newton, the default
//! Picard→Newton switch and the frozen-Jacobian chord iteration.

use std::sync::Arc;

use spmhd::derham::OperatorContext;
use spmhd::mesh::{build_box_mesh, BoxDomain};
use spmhd::solver::{MhdSolver, NonlinearScheme, SolverOptions};
use spmhd::verification::{build_case, default_params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = build_case("helical-trig", default_params("helical-trig"))?;
    let ctx = Arc::new(OperatorContext::new(Arc::new(build_box_mesh(3, BoxDomain::unit())?), 0, 4)?);
    let schemes = [
        NonlinearScheme::Picard,
        NonlinearScheme::Newton,
        NonlinearScheme::default(),
        NonlinearScheme::Chord,
    ];
    for scheme in schemes {
        let options = SolverOptions { scheme, ..SolverOptions::default() };
        let solver = MhdSolver::new(ctx.clone(), case.params, case.sources(), options)?;
        let s = solver.init_state(&case.u, &case.b, 0.0)?;
        let (_, rep) = solver.step(&s, 0.05)?;
        let hist: Vec<String> = rep.residuals.iter().map(|r| format!("{r:.1e}")).collect();
        println!("{scheme:?}: {} iterations ({} Newton)\n  {}", rep.iterations, rep.newton_steps, hist.join(" "));
    }
    Ok(())
}
