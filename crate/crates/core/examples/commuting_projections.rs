//! The projections Π^N (onto H₀(curl)) and Π̃ (onto divergence-free RT)
//! commute with the curl: Π̃ curl E = curl Π^N E.

use std::sync::Arc;

use spmhd::derham::{OperatorContext, Source};
use spmhd::mesh::{build_box_mesh, BoxDomain};
use spmhd::verification::commuting_battery;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in 1..=3 {
        let ctx = OperatorContext::new(Arc::new(build_box_mesh(n, BoxDomain::unit())?), 0, 4)?;
        for (name, e) in commuting_battery() {
            let pin = ctx.pi_n(Source::Analytic(&e, 0.0))?;
            let defect = ctx.commuting_check(&e, 0.0)?;
            println!(
                "n = {n} {name:<12} ‖Π̃ curl E − curl Π^N E‖ = {defect:.2e}, |multiplier| = {:.1e}",
                pin.multiplier.max_abs()
            );
        }
    }
    Ok(())
}
