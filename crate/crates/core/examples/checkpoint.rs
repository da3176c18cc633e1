//! Writes a state to a checkpoint, reads it back and continues the run; the
//! continuation is bitwise identical to the uninterrupted one.

use std::sync::Arc;

use spmhd::derham::OperatorContext;
use spmhd::mesh::{build_box_mesh, BoxDomain};
use spmhd::solver::{load_checkpoint, save_checkpoint, MhdSolver, SolverOptions};
use spmhd::verification::{build_case, default_params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = build_case("decay-trig", default_params("decay-trig"))?;
    let ctx = Arc::new(OperatorContext::new(Arc::new(build_box_mesh(2, BoxDomain::unit())?), 0, 4)?);
    let solver = MhdSolver::new(ctx, case.params, case.sources(), SolverOptions::default())?;
    let s0 = solver.init_state(&case.u, &case.b, 0.0)?;
    let (s1, _) = solver.step(&s0, 0.02)?;

    let mut buf = Vec::new();
    save_checkpoint(&mut buf, &s1, &solver.params)?;
    println!("checkpoint at t = {}: {} bytes", s1.t, buf.len());
    let (restored, params) = load_checkpoint(buf.as_slice())?;
    assert_eq!(params, solver.params);

    let (a, _) = solver.step(&s1, 0.02)?;
    let (b, _) = solver.step(&restored, 0.02)?;
    let same = a.fields().iter().zip(b.fields()).all(|((_, x), (_, y))| x.coeffs == y.coeffs);
    println!("restart reproduces the next step exactly: {same}");
    Ok(())
}
