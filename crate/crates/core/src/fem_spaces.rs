//! Lowest-order finite element spaces of the discrete de Rham complex:
//! continuous P1 Lagrange, first-kind Nédélec (Whitney edge functions),
//! Raviart-Thomas (Whitney face functions) and piecewise constants.
//!
//! Degrees of freedom are vertex values, edge circulations `∫_e v·dl`, face
//! fluxes `∫_f B·n dA` and cell values. With this scaling the gradient, curl
//! and divergence act on coefficients exactly as the incidence matrices
//! `D0`, `D1`, `D2` (the last one up to the cell volume for the divergence
//! value, since DG functions are cell indicators).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::mesh::{TetMesh, Vec3, LOCAL_EDGES, LOCAL_FACES};
use crate::quadrature::{gauss_legendre, triangle_rule, QuadratureRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Lagrange,
    Nedelec,
    RaviartThomas,
    Dg,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Lagrange => "Lagrange",
            SpaceKind::Nedelec => "Nedelec",
            SpaceKind::RaviartThomas => "Raviart-Thomas",
            SpaceKind::Dg => "DG",
        }
    }

    fn local_dofs(self) -> usize {
        match self {
            SpaceKind::Lagrange => 4,
            SpaceKind::Nedelec => 6,
            SpaceKind::RaviartThomas => 4,
            SpaceKind::Dg => 1,
        }
    }
}

/// DOF numbering of one space on a mesh.
#[derive(Clone, Debug)]
pub struct FeSpace {
    pub kind: SpaceKind,
    /// Scheme order `k`; Lagrange has degree `k + 1`.
    pub order: usize,
    pub ndofs: usize,
    local: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
    /// DOFs carrying the homogeneous trace of the `H_0` subspace.
    pub boundary: Vec<bool>,
    /// Complement of the boundary set, ascending.
    pub free: Vec<usize>,
}

fn parity3(v: [usize; 3]) -> f64 {
    let inv = (v[0] > v[1]) as u8 + (v[0] > v[2]) as u8 + (v[1] > v[2]) as u8;
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl FeSpace {
    pub fn new(mesh: &TetMesh, kind: SpaceKind, order: usize) -> Result<Self> {
        if order != 0 {
            return Err(Error::UnsupportedOrder(order));
        }
        let local = kind.local_dofs();
        let nc = mesh.num_cells();
        let mut cell_dofs = Vec::with_capacity(nc * local);
        let mut cell_signs = Vec::with_capacity(nc * local);
        for c in 0..nc {
            let cell = mesh.cells[c];
            match kind {
                SpaceKind::Lagrange => {
                    cell_dofs.extend_from_slice(&cell);
                    cell_signs.extend_from_slice(&[1.0; 4]);
                }
                SpaceKind::Nedelec => {
                    for (l, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                        cell_dofs.push(mesh.cell_edges[c][l]);
                        cell_signs.push(if cell[a] < cell[b] { 1.0 } else { -1.0 });
                    }
                }
                SpaceKind::RaviartThomas => {
                    for (m, f) in LOCAL_FACES.iter().enumerate() {
                        cell_dofs.push(mesh.cell_faces[c][m]);
                        cell_signs.push(parity3(f.map(|l| cell[l])));
                    }
                }
                SpaceKind::Dg => {
                    cell_dofs.push(c);
                    cell_signs.push(1.0);
                }
            }
        }
        let boundary = match kind {
            SpaceKind::Lagrange => mesh.boundary_vertex.clone(),
            SpaceKind::Nedelec => mesh.boundary_edge.clone(),
            SpaceKind::RaviartThomas => mesh.boundary_face.clone(),
            SpaceKind::Dg => vec![false; nc],
        };
        let free = (0..boundary.len()).filter(|&i| !boundary[i]).collect();
        Ok(Self {
            kind,
            order,
            ndofs: boundary.len(),
            local,
            cell_dofs,
            cell_signs,
            boundary,
            free,
        })
    }

    pub fn dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.local..(cell + 1) * self.local]
    }

    pub fn signs(&self, cell: usize) -> &[f64] {
        &self.cell_signs[cell * self.local..(cell + 1) * self.local]
    }

    pub fn local_dofs(&self) -> usize {
        self.local
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Zeroes the boundary DOFs, i.e. maps into the `H_0` subspace.
    pub fn constrain(&self, v: &mut FieldVector) {
        for (x, &b) in v.coeffs.iter_mut().zip(&self.boundary) {
            if b {
                *x = 0.0;
            }
        }
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    pub fn extend(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.ndofs];
        for (&i, &x) in self.free.iter().zip(reduced) {
            full[i] = x;
        }
        full
    }
}

/// Coefficients of a discrete field in a named space.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldVector {
    pub kind: SpaceKind,
    pub coeffs: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(space: &FeSpace) -> Self {
        Self {
            kind: space.kind,
            coeffs: vec![0.0; space.ndofs],
        }
    }

    pub fn new(space: &FeSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndofs {
            return Err(Error::DimensionMismatch {
                space: space.kind.name(),
                expected: space.ndofs,
                found: coeffs.len(),
            });
        }
        Ok(Self {
            kind: space.kind,
            coeffs,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            kind: self.kind,
            coeffs: self.coeffs.iter().map(|x| a * x).collect(),
        }
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &FieldVector, b: f64) -> Self {
        assert_eq!(self.kind, other.kind);
        Self {
            kind: self.kind,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        crate::sparse::max_abs(&self.coeffs)
    }
}

/// Affine data of one physical cell in its positively oriented vertex order.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub points: [Vec3; 4],
    /// Gradients of the barycentric coordinates.
    pub grads: [Vec3; 4],
    pub volume: f64,
}

impl CellGeometry {
    pub fn new(points: [Vec3; 4]) -> Self {
        let e1 = points[1] - points[0];
        let e2 = points[2] - points[0];
        let e3 = points[3] - points[0];
        let det = e1.cross(&e2).dot(&e3);
        let g1 = e2.cross(&e3) / det;
        let g2 = e3.cross(&e1) / det;
        let g3 = e1.cross(&e2) / det;
        let g0 = -(g1 + g2 + g3);
        Self {
            points,
            grads: [g0, g1, g2, g3],
            volume: det / 6.0,
        }
    }

    pub fn map(&self, bary: &[f64; 4]) -> Vec3 {
        self.points
            .iter()
            .zip(bary)
            .map(|(p, l)| p * *l)
            .sum()
    }
}

/// Local basis values at one point, global signs already applied.
#[derive(Clone, Debug, Default)]
pub struct BasisValues {
    /// Scalar values (Lagrange, DG).
    pub scalars: Vec<f64>,
    /// Gradients (Lagrange).
    pub grads: Vec<Vec3>,
    /// Vector values (Nédélec, RT).
    pub vectors: Vec<Vec3>,
    /// Curls (Nédélec).
    pub curls: Vec<Vec3>,
    /// Divergences (RT).
    pub divs: Vec<f64>,
}

/// Whitney edge functions `λa∇λb − λb∇λa` and their curls `2∇λa×∇λb`.
#[inline]
pub fn nedelec_local(g: &CellGeometry, bary: &[f64; 4], signs: &[f64]) -> ([Vec3; 6], [Vec3; 6]) {
    let mut v = [Vec3::zeros(); 6];
    let mut c = [Vec3::zeros(); 6];
    for (l, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
        let s = signs[l];
        v[l] = (g.grads[b] * bary[a] - g.grads[a] * bary[b]) * s;
        c[l] = g.grads[a].cross(&g.grads[b]) * (2.0 * s);
    }
    (v, c)
}

/// Whitney face functions `2(λa∇λb×∇λc + λb∇λc×∇λa + λc∇λa×∇λb)`, with
/// divergence `6 ∇λa·(∇λb×∇λc)`.
#[inline]
pub fn rt_local(g: &CellGeometry, bary: &[f64; 4], signs: &[f64]) -> ([Vec3; 4], [f64; 4]) {
    let mut v = [Vec3::zeros(); 4];
    let mut d = [0.0; 4];
    for (m, &[a, b, c]) in LOCAL_FACES.iter().enumerate() {
        let s = signs[m];
        let gbc = g.grads[b].cross(&g.grads[c]);
        let gca = g.grads[c].cross(&g.grads[a]);
        let gab = g.grads[a].cross(&g.grads[b]);
        v[m] = (gbc * bary[a] + gca * bary[b] + gab * bary[c]) * (2.0 * s);
        d[m] = 6.0 * g.grads[a].dot(&gbc) * s;
    }
    (v, d)
}

/// The mesh together with the four spaces of the lowest-order complex.
#[derive(Clone, Debug)]
pub struct DiscreteComplex {
    pub mesh: Arc<TetMesh>,
    pub order: usize,
    pub lagrange: FeSpace,
    pub nedelec: FeSpace,
    pub rt: FeSpace,
    pub dg: FeSpace,
    pub geometry: Vec<CellGeometry>,
    /// Gauss points used along edges for circulation DOFs.
    pub edge_points: usize,
    /// Exactness degree of the triangle rule used for flux DOFs.
    pub face_degree: usize,
}

impl DiscreteComplex {
    pub fn new(mesh: Arc<TetMesh>, order: usize) -> Result<Self> {
        let lagrange = FeSpace::new(&mesh, SpaceKind::Lagrange, order)?;
        let nedelec = FeSpace::new(&mesh, SpaceKind::Nedelec, order)?;
        let rt = FeSpace::new(&mesh, SpaceKind::RaviartThomas, order)?;
        let dg = FeSpace::new(&mesh, SpaceKind::Dg, order)?;
        let geometry = (0..mesh.num_cells())
            .map(|c| CellGeometry::new(mesh.cell_points(c)))
            .collect();
        Ok(Self {
            mesh,
            order,
            lagrange,
            nedelec,
            rt,
            dg,
            geometry,
            edge_points: 12,
            face_degree: 22,
        })
    }

    pub fn space(&self, kind: SpaceKind) -> &FeSpace {
        match kind {
            SpaceKind::Lagrange => &self.lagrange,
            SpaceKind::Nedelec => &self.nedelec,
            SpaceKind::RaviartThomas => &self.rt,
            SpaceKind::Dg => &self.dg,
        }
    }

    /// Basis functions of `kind` on `cell` at a point of the reference
    /// tetrahedron `{x̂, ŷ, ẑ >= 0, x̂ + ŷ + ẑ <= 1}`, mapped to the physical cell.
    pub fn eval_basis(&self, kind: SpaceKind, cell: usize, reference: [f64; 3]) -> Result<BasisValues> {
        let [x, y, z] = reference;
        let tol = 1e-14;
        if x < -tol || y < -tol || z < -tol || x + y + z > 1.0 + tol {
            return Err(Error::OutsideReferenceCell(reference));
        }
        let bary = [1.0 - x - y - z, x, y, z];
        let g = &self.geometry[cell];
        let space = self.space(kind);
        let signs = space.signs(cell);
        let mut out = BasisValues::default();
        match kind {
            SpaceKind::Lagrange => {
                out.scalars = bary.to_vec();
                out.grads = g.grads.to_vec();
            }
            SpaceKind::Nedelec => {
                let (v, c) = nedelec_local(g, &bary, signs);
                out.vectors = v.to_vec();
                out.curls = c.to_vec();
            }
            SpaceKind::RaviartThomas => {
                let (v, d) = rt_local(g, &bary, signs);
                out.vectors = v.to_vec();
                out.divs = d.to_vec();
            }
            SpaceKind::Dg => out.scalars = vec![1.0],
        }
        Ok(out)
    }

    fn check(&self, v: &FieldVector, kind: SpaceKind) {
        assert_eq!(v.kind, kind, "expected a {} field", kind.name());
        assert_eq!(v.len(), self.space(kind).ndofs);
    }

    /// Value of a Nédélec or RT field at barycentric coordinates in `cell`.
    pub fn eval_vector(&self, v: &FieldVector, cell: usize, bary: &[f64; 4]) -> Vec3 {
        let g = &self.geometry[cell];
        let space = self.space(v.kind);
        let dofs = space.dofs(cell);
        match v.kind {
            SpaceKind::Nedelec => {
                let (phi, _) = nedelec_local(g, bary, space.signs(cell));
                phi.iter().zip(dofs).map(|(p, &d)| p * v.coeffs[d]).sum()
            }
            SpaceKind::RaviartThomas => {
                let (psi, _) = rt_local(g, bary, space.signs(cell));
                psi.iter().zip(dofs).map(|(p, &d)| p * v.coeffs[d]).sum()
            }
            SpaceKind::Lagrange => {
                // gradient of a scalar field
                g.grads.iter().zip(dofs).map(|(gr, &d)| gr * v.coeffs[d]).sum()
            }
            SpaceKind::Dg => panic!("DG fields are scalar"),
        }
    }

    /// Curl of a Nédélec field on `cell` (constant at lowest order).
    pub fn eval_curl(&self, v: &FieldVector, cell: usize) -> Vec3 {
        self.check(v, SpaceKind::Nedelec);
        let space = &self.nedelec;
        let (_, c) = nedelec_local(&self.geometry[cell], &[0.25; 4], space.signs(cell));
        c.iter().zip(space.dofs(cell)).map(|(c, &d)| c * v.coeffs[d]).sum()
    }

    /// Divergence of an RT field on `cell`.
    pub fn eval_div(&self, v: &FieldVector, cell: usize) -> f64 {
        self.check(v, SpaceKind::RaviartThomas);
        let space = &self.rt;
        let (_, d) = rt_local(&self.geometry[cell], &[0.25; 4], space.signs(cell));
        d.iter().zip(space.dofs(cell)).map(|(d, &i)| d * v.coeffs[i]).sum()
    }

    pub fn eval_scalar(&self, v: &FieldVector, cell: usize, bary: &[f64; 4]) -> f64 {
        match v.kind {
            SpaceKind::Lagrange => self
                .lagrange
                .dofs(cell)
                .iter()
                .zip(bary)
                .map(|(&d, l)| v.coeffs[d] * l)
                .sum(),
            SpaceKind::Dg => v.coeffs[cell],
            _ => panic!("not a scalar space"),
        }
    }

    /// Lagrange interpolant: nodal values at the vertices.
    pub fn interpolate_lagrange(&self, f: &ScalarField, t: f64) -> FieldVector {
        FieldVector {
            kind: SpaceKind::Lagrange,
            coeffs: self.mesh.vertices.iter().map(|x| f.eval(x, t)).collect(),
        }
    }

    /// Nédélec interpolant: circulations along every (oriented) edge.
    pub fn interpolate_nedelec(&self, v: &VectorField, t: f64) -> FieldVector {
        let (s, w) = gauss_legendre(self.edge_points);
        let mesh = &self.mesh;
        let coeffs = mesh
            .edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let tangent = pb - pa;
                s.iter()
                    .zip(&w)
                    .map(|(s, w)| w * v.eval(&(pa + tangent * *s), t).dot(&tangent))
                    .sum()
            })
            .collect();
        FieldVector {
            kind: SpaceKind::Nedelec,
            coeffs,
        }
    }

    /// Raviart-Thomas interpolant: fluxes through every (oriented) face.
    pub fn interpolate_rt(&self, b: &VectorField, t: f64) -> FieldVector {
        let (pts, wts) = triangle_rule(self.face_degree);
        let mesh = &self.mesh;
        let coeffs = mesh
            .faces
            .iter()
            .map(|&[i, j, k]| {
                let (p0, p1, p2) = (mesh.vertices[i], mesh.vertices[j], mesh.vertices[k]);
                let normal = (p1 - p0).cross(&(p2 - p0));
                pts.iter()
                    .zip(&wts)
                    .map(|(l, w)| w * b.eval(&(p0 * l[0] + p1 * l[1] + p2 * l[2]), t).dot(&normal))
                    .sum()
            })
            .collect();
        FieldVector {
            kind: SpaceKind::RaviartThomas,
            coeffs,
        }
    }

    /// Piecewise-constant interpolant: cell averages.
    pub fn interpolate_dg(&self, f: &ScalarField, t: f64, rule: &QuadratureRule) -> FieldVector {
        let coeffs = self
            .geometry
            .iter()
            .map(|g| {
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(q, w)| 6.0 * w * f.eval(&g.map(q), t))
                    .sum()
            })
            .collect();
        FieldVector {
            kind: SpaceKind::Dg,
            coeffs,
        }
    }

    /// Discrete gradient `D0 p` of a Lagrange field as a Nédélec field.
    pub fn grad(&self, p: &FieldVector) -> FieldVector {
        self.check(p, SpaceKind::Lagrange);
        FieldVector {
            kind: SpaceKind::Nedelec,
            coeffs: apply_incidence(&self.mesh.d0, &p.coeffs),
        }
    }

    /// Exact curl `D1 v` of a Nédélec field as an RT field.
    pub fn curl(&self, v: &FieldVector) -> FieldVector {
        self.check(v, SpaceKind::Nedelec);
        FieldVector {
            kind: SpaceKind::RaviartThomas,
            coeffs: apply_incidence(&self.mesh.d1, &v.coeffs),
        }
    }

    /// `D2 B`: cell integrals of the divergence (DG coefficients times volume).
    pub fn div_integrals(&self, b: &FieldVector) -> Vec<f64> {
        self.check(b, SpaceKind::RaviartThomas);
        apply_incidence(&self.mesh.d2, &b.coeffs)
    }

    /// `max |D2 B|`, the discrete magnetic Gauss-law defect.
    pub fn div_norm(&self, b: &FieldVector) -> f64 {
        crate::sparse::max_abs(&self.div_integrals(b))
    }
}

pub fn apply_incidence(d: &crate::mesh::Incidence, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), d.ncols());
    (0..d.nrows())
        .map(|r| d.row(r).iter().map(|&(c, s)| s as f64 * x[c]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain};
    use nalgebra::Matrix3;

    fn complex(n: usize) -> DiscreteComplex {
        DiscreteComplex::new(Arc::new(build_box_mesh(n, BoxDomain::unit()).unwrap()), 0).unwrap()
    }

    fn reference_tet() -> DiscreteComplex {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let mesh = TetMesh::from_cells(v, vec![[0, 1, 2, 3]], BoxDomain::unit()).unwrap();
        DiscreteComplex::new(Arc::new(mesh), 0).unwrap()
    }

    #[test]
    fn whitney_edge_function_at_barycenter() {
        let c = reference_tet();
        let b = c.eval_basis(SpaceKind::Nedelec, 0, [0.25; 3]).unwrap();
        // local edge 0 is (0, 1)
        assert!((b.vectors[0] - Vec3::new(0.5, 0.25, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn rt_divergence_on_reference_tet() {
        let c = reference_tet();
        let b = c.eval_basis(SpaceKind::RaviartThomas, 0, [0.1, 0.2, 0.3]).unwrap();
        // unit flux through a face of a cell of volume 1/6
        for (m, d) in b.divs.iter().enumerate() {
            let (_, s) = c.mesh.d2.row(0).iter().copied().find(|&(f, _)| f == c.rt.dofs(0)[m]).unwrap();
            assert!((d - 6.0 * s as f64).abs() < 1e-13, "face {m}: {d}");
        }
    }

    #[test]
    fn point_outside_reference_rejected() {
        let c = reference_tet();
        assert!(matches!(
            c.eval_basis(SpaceKind::Nedelec, 0, [0.6, 0.6, 0.0]),
            Err(Error::OutsideReferenceCell(_))
        ));
    }

    #[test]
    fn piola_maps_agree_with_barycentric_formulas() {
        let c = complex(1);
        let rc = reference_tet();
        let p = [0.15, 0.3, 0.2];
        for cell in 0..c.mesh.num_cells() {
            let g = &c.geometry[cell];
            let jac = Matrix3::from_columns(&[
                g.points[1] - g.points[0],
                g.points[2] - g.points[0],
                g.points[3] - g.points[0],
            ]);
            let det = jac.determinant();
            let jit = jac.try_inverse().unwrap().transpose();
            let ned = c.eval_basis(SpaceKind::Nedelec, cell, p).unwrap();
            let rt = c.eval_basis(SpaceKind::RaviartThomas, cell, p).unwrap();
            let ref_ned = rc.eval_basis(SpaceKind::Nedelec, 0, p).unwrap();
            let ref_rt = rc.eval_basis(SpaceKind::RaviartThomas, 0, p).unwrap();
            for l in 0..6 {
                let s = c.nedelec.signs(cell)[l];
                assert!((ned.vectors[l] - jit * ref_ned.vectors[l] * s).norm() < 1e-13);
                assert!((ned.curls[l] - jac * ref_ned.curls[l] * (s / det)).norm() < 1e-12);
            }
            for m in 0..4 {
                let s = c.rt.signs(cell)[m];
                assert!((rt.vectors[m] - jac * ref_rt.vectors[m] * (s / det)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn edge_and_face_moments_are_dual_to_the_basis() {
        // circulation of each Whitney function is 1 on its own edge, 0 elsewhere
        let c = complex(1);
        let (s, w) = gauss_legendre(4);
        for cell in 0..c.mesh.num_cells() {
            let cv = c.mesh.cells[cell];
            let g = &c.geometry[cell];
            for (l, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
                let global = c.mesh.edges[c.nedelec.dofs(cell)[l]];
                for (k, &[p, q]) in LOCAL_EDGES.iter().enumerate() {
                    let ge = c.mesh.edges[c.nedelec.dofs(cell)[k]];
                    let (pa, pb) = (c.mesh.vertices[ge[0]], c.mesh.vertices[ge[1]]);
                    let lp = cv.iter().position(|&v| v == ge[0]).unwrap();
                    let lq = cv.iter().position(|&v| v == ge[1]).unwrap();
                    let _ = (p, q);
                    let circ: f64 = s
                        .iter()
                        .zip(&w)
                        .map(|(t, wt)| {
                            let mut bary = [0.0; 4];
                            bary[lp] = 1.0 - t;
                            bary[lq] = *t;
                            let (phi, _) = nedelec_local(g, &bary, c.nedelec.signs(cell));
                            wt * phi[l].dot(&(pb - pa))
                        })
                        .sum();
                    let expect = if l == k { 1.0 } else { 0.0 };
                    assert!((circ - expect).abs() < 1e-13, "{global:?} {a}{b} vs {k}: {circ}");
                }
            }
        }
        // flux of each face function is 1 on its own face (global orientation)
        let (tp, tw) = triangle_rule(4);
        for cell in 0..c.mesh.num_cells() {
            let cv = c.mesh.cells[cell];
            let g = &c.geometry[cell];
            for m in 0..4 {
                for k in 0..4 {
                    let gf = c.mesh.faces[c.rt.dofs(cell)[k]];
                    let loc = gf.map(|v| cv.iter().position(|&x| x == v).unwrap());
                    let p = gf.map(|v| c.mesh.vertices[v]);
                    let normal = (p[1] - p[0]).cross(&(p[2] - p[0]));
                    let flux: f64 = tp
                        .iter()
                        .zip(&tw)
                        .map(|(l, wt)| {
                            let mut bary = [0.0; 4];
                            for i in 0..3 {
                                bary[loc[i]] = l[i];
                            }
                            let (psi, _) = rt_local(g, &bary, c.rt.signs(cell));
                            wt * psi[m].dot(&normal)
                        })
                        .sum();
                    let expect = if m == k { 1.0 } else { 0.0 };
                    assert!((flux - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn dimension_counts_single_cube() {
        let c = complex(1);
        let dims = [&c.lagrange, &c.nedelec, &c.rt, &c.dg].map(|s| s.ndofs);
        let free = [&c.lagrange, &c.nedelec, &c.rt, &c.dg].map(|s| s.num_free());
        assert_eq!(dims, [8, 19, 18, 6]);
        assert_eq!(free, [0, 1, 6, 6]);
    }

    #[test]
    fn unsupported_order_rejected() {
        let mesh = build_box_mesh(1, BoxDomain::unit()).unwrap();
        assert!(matches!(
            FeSpace::new(&mesh, SpaceKind::Nedelec, 1),
            Err(Error::UnsupportedOrder(1))
        ));
    }

    #[test]
    fn gradient_of_hat_function_has_zero_curl() {
        let c = complex(2);
        for v in 0..c.lagrange.ndofs {
            let mut p = FieldVector::zeros(&c.lagrange);
            p.coeffs[v] = 1.0;
            let g = c.grad(&p);
            for cell in 0..c.mesh.num_cells() {
                assert!(c.eval_curl(&g, cell).norm() < 1e-12);
                // the Nédélec field D0 p equals the pointwise gradient of the hat
                let q = [0.1, 0.2, 0.3, 0.4];
                let pointwise = c.eval_vector(&p, cell, &q);
                assert!((c.eval_vector(&g, cell, &q) - pointwise).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constants_are_reproduced() {
        let c = complex(2);
        let k = Vec3::new(0.3, -1.2, 2.0);
        let f = VectorField::constant(k);
        let ned = c.interpolate_nedelec(&f, 0.0);
        let rt = c.interpolate_rt(&f, 0.0);
        for cell in 0..c.mesh.num_cells() {
            for q in [[0.25; 4], [0.7, 0.1, 0.1, 0.1]] {
                assert!((c.eval_vector(&ned, cell, &q) - k).norm() < 1e-13);
                assert!((c.eval_vector(&rt, cell, &q) - k).norm() < 1e-13);
            }
        }
        let affine = ScalarField::new(|x, _| 1.0 + 2.0 * x.x - x.y + 0.5 * x.z);
        let lag = c.interpolate_lagrange(&affine, 0.0);
        for cell in 0..c.mesh.num_cells() {
            let q = [0.1, 0.2, 0.3, 0.4];
            let x = c.geometry[cell].map(&q);
            assert!((c.eval_scalar(&lag, cell, &q) - affine.eval(&x, 0.0)).abs() < 1e-13);
        }
        let zero = c.interpolate_lagrange(&ScalarField::zero(), 0.0);
        assert!(zero.coeffs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn interpolants_commute_with_grad_and_curl() {
        use std::f64::consts::PI;
        let c = complex(3);
        let phi = ScalarField::new(|x, _| (PI * x.x).sin() * (2.0 * x.y).cos() + x.z * x.z)
            .with_grad(|x, _| {
                Vec3::new(
                    PI * (PI * x.x).cos() * (2.0 * x.y).cos(),
                    -2.0 * (PI * x.x).sin() * (2.0 * x.y).sin(),
                    2.0 * x.z,
                )
            });
        let grad = phi.gradient_field().unwrap();
        let gi = c.interpolate_nedelec(&grad, 0.0);
        let dp = c.grad(&c.interpolate_lagrange(&phi, 0.0));
        for (a, b) in gi.coeffs.iter().zip(&dp.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(c.curl(&gi).max_abs() < 1e-12);

        let a = VectorField::new(|x, _| Vec3::new((x.y * x.z).sin(), x.x * x.x * x.z, (x.x + x.y).cos()))
            .with_curl(|x, _| {
                Vec3::new(
                    -(x.x + x.y).sin() - x.x * x.x,
                    x.y * (x.y * x.z).cos() + (x.x + x.y).sin(),
                    2.0 * x.x * x.z - x.z * (x.y * x.z).cos(),
                )
            });
        let curl_a = a.curl_field().unwrap();
        let lhs = c.curl(&c.interpolate_nedelec(&a, 0.0));
        let rhs = c.interpolate_rt(&curl_a, 0.0);
        for (x, y) in lhs.coeffs.iter().zip(&rhs.coeffs) {
            assert!((x - y).abs() < 1e-12);
        }
        // divergence of an interpolated curl vanishes up to round-off
        assert!(c.div_norm(&rhs) < 1e-12);
    }

    #[test]
    fn complex_property_on_coefficients() {
        let c = complex(2);
        let p = FieldVector::new(&c.lagrange, (0..c.lagrange.ndofs).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        assert!(c.curl(&c.grad(&p)).max_abs() < 1e-14);
        let v = FieldVector::new(&c.nedelec, (0..c.nedelec.ndofs).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap();
        assert!(c.div_norm(&c.curl(&v)) < 1e-14);
    }

    #[test]
    fn wrong_length_rejected() {
        let c = complex(1);
        assert!(matches!(
            FieldVector::new(&c.nedelec, vec![0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
