//! The four lowest-order spaces of the discrete de Rham complex: dimensions,
//! boundary constraints, basis evaluation and the canonical interpolants.

use std::sync::Arc;

use spmhd::fem_spaces::{DiscreteComplex, SpaceKind};
use spmhd::fields::{ScalarField, VectorField};
use spmhd::mesh::{build_box_mesh, BoxDomain, Vec3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Arc::new(build_box_mesh(2, BoxDomain::unit())?);
    let c = DiscreteComplex::new(mesh, 0)?;
    for kind in [SpaceKind::Lagrange, SpaceKind::Nedelec, SpaceKind::RaviartThomas, SpaceKind::Dg] {
        let s = c.space(kind);
        println!("{:<16} {:>4} dofs, {:>4} free", kind.name(), s.ndofs, s.num_free());
    }

    // values of the six edge functions at the reference centroid of cell 0
    let vals = c.eval_basis(SpaceKind::Nedelec, 0, [0.25, 0.25, 0.25])?;
    println!("{vals:?}");

    // interpolants commute with the derivatives: curl I_N E = I_RT curl E
    let e = VectorField::new(|x, _| Vec3::new(x.y * x.z, x.x * x.x, -x.y)).with_curl(|x, _| Vec3::new(-1.0, x.y, 2.0 * x.x - x.z));
    let curl_e = e.curl_field().unwrap();
    let lhs = c.curl(&c.interpolate_nedelec(&e, 0.0));
    let rhs = c.interpolate_rt(&curl_e, 0.0);
    println!("max |curl I_N E − I_RT curl E| = {:.2e}", lhs.lin_comb(1.0, &rhs, -1.0).max_abs());

    let p = ScalarField::new(|x, _| x.x * x.y + x.z).with_grad(|x, _| Vec3::new(x.y, x.x, 1.0));
    let gp = c.grad(&c.interpolate_lagrange(&p, 0.0));
    let ig = c.interpolate_nedelec(&p.gradient_field().unwrap(), 0.0);
    println!("max |grad I_L p − I_N grad p| = {:.2e}", gp.lin_comb(1.0, &ig, -1.0).max_abs());
    Ok(())
}
