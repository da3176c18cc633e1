//! Discrete vector potentials of a divergence-free field in two gauges and
//! the gauge independence of the magnetic helicity.

use std::sync::Arc;

use spmhd::derham::{Gauge, OperatorContext};
use spmhd::diagnostics::{magnetic_helicity, DIV_TOL};
use spmhd::mesh::{build_box_mesh, BoxDomain};
use spmhd::verification::helical_initial_data;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ctx = OperatorContext::new(Arc::new(build_box_mesh(3, BoxDomain::unit())?), 0, 4)?;
    let (_, b) = helical_initial_data();
    let mut bh = ctx.complex().interpolate_rt(&b, 0.0);
    ctx.complex().rt.constrain(&mut bh);
    println!("max |D2 B| = {:.1e}", ctx.complex().div_integrals(&bh).iter().fold(0.0f64, |m, v| m.max(v.abs())));

    for gauge in [Gauge::Coulomb, Gauge::Combinatorial] {
        let a = ctx.vector_potential(&bh, gauge, DIV_TOL)?;
        let defect = ctx.complex().curl(&a).lin_comb(1.0, &bh, -1.0).max_abs();
        println!(
            "{gauge:?}: ‖A‖ = {:.6}, max |curl A − B| = {defect:.1e}, helicity = {:.15}",
            ctx.ned_norm(&a),
            magnetic_helicity(&ctx, &bh, gauge)?
        );
    }
    Ok(())
}
