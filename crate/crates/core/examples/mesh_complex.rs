//! Builds the Kuhn tetrahedral mesh of the unit cube and checks that the
//! signed incidence matrices form a complex.
//!
//! ```text
//! cargo run --example mesh_complex -- 3 mesh.vtk
//! ```

use spmhd::mesh::{build_box_mesh, BoxDomain};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(3);
    let mesh = build_box_mesh(n, BoxDomain::unit())?;

    println!("n = {n}: {} vertices, {} edges, {} faces, {} cells", mesh.num_vertices(), mesh.num_edges(), mesh.num_faces(), mesh.num_cells());
    println!("Euler characteristic {}", mesh.euler_characteristic());
    let stats = mesh.statistics();
    println!("h = {:.4}, h_min = {:.4}, shape regularity {:.3}", stats.h, stats.h_min, stats.shape_regularity);

    let boundary = |flags: &[bool]| flags.iter().filter(|b| **b).count();
    println!(
        "boundary: {} vertices, {} edges, {} faces (12 n² = {})",
        boundary(&mesh.boundary_vertex),
        boundary(&mesh.boundary_edge),
        boundary(&mesh.boundary_face),
        12 * n * n
    );
    println!("D1·D0 = 0: {}", mesh.d1.composes_to_zero(&mesh.d0));
    println!("D2·D1 = 0: {}", mesh.d2.composes_to_zero(&mesh.d1));

    if let Some(path) = args.next() {
        mesh.write_vtk(std::fs::File::create(&path)?, &[], &[], &[])?;
        println!("wrote {path}");
    }
    Ok(())
}
