//! Structured tetrahedral meshes of an axis-aligned box and the signed
//! incidence matrices of the resulting simplicial complex.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub type Vec3 = Vector3<f64>;

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoxDomain {
    pub fn unit() -> Self {
        Self {
            lo: [0.0; 3],
            hi: [1.0; 3],
        }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.hi[a] - self.lo[a]).product()
    }
}

impl Default for BoxDomain {
    fn default() -> Self {
        Self::unit()
    }
}

/// Signed integer incidence matrix stored row-wise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incidence {
    ncols: usize,
    rows: Vec<Vec<(usize, i8)>>,
}

impl Incidence {
    fn new(ncols: usize, rows: Vec<Vec<(usize, i8)>>) -> Self {
        Self { ncols, rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, r: usize) -> &[(usize, i8)] {
        &self.rows[r]
    }

    /// Integer product `self * rhs`, zero entries dropped.
    pub fn compose(&self, rhs: &Incidence) -> Vec<Vec<(usize, i64)>> {
        assert_eq!(self.ncols, rhs.nrows());
        self.rows
            .iter()
            .map(|row| {
                let mut acc: HashMap<usize, i64> = HashMap::new();
                for &(k, a) in row {
                    for &(c, b) in rhs.row(k) {
                        *acc.entry(c).or_default() += a as i64 * b as i64;
                    }
                }
                let mut v: Vec<_> = acc.into_iter().filter(|&(_, x)| x != 0).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }

    /// True when `self * rhs` vanishes identically in integer arithmetic.
    pub fn composes_to_zero(&self, rhs: &Incidence) -> bool {
        self.compose(rhs).iter().all(|r| r.is_empty())
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let mut t = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            t.extend(row.iter().map(|&(c, s)| (r, c, s as f64)));
        }
        SparseMatrix::from_triplets(self.rows.len(), self.ncols, &t)
    }

    /// Flips the sign of the `k`-th stored entry of row `r`. Used to build
    /// deliberately broken complexes for mutation checks.
    pub fn flip_entry(&mut self, r: usize, k: usize) {
        self.rows[r][k].1 = -self.rows[r][k].1;
    }
}

/// Conforming tetrahedral mesh with globally oriented edges and faces.
///
/// Edges are oriented from the lower to the higher global vertex index and
/// faces by their ascending vertex triple. Cells keep a positively oriented
/// vertex order.
#[derive(Clone, Debug)]
pub struct TetMesh {
    pub vertices: Vec<Vec3>,
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<[usize; 3]>,
    pub cells: Vec<[usize; 4]>,
    /// Global edge of each local edge `(i, j)`, in [`LOCAL_EDGES`] order.
    pub cell_edges: Vec<[usize; 6]>,
    /// Global face opposite each local vertex.
    pub cell_faces: Vec<[usize; 4]>,
    pub d0: Incidence,
    pub d1: Incidence,
    pub d2: Incidence,
    pub boundary_vertex: Vec<bool>,
    pub boundary_edge: Vec<bool>,
    pub boundary_face: Vec<bool>,
    pub h: f64,
    pub n: usize,
    pub domain: BoxDomain,
}

/// Local edges of a tetrahedron as pairs of local vertex indices.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local faces; face `m` is opposite local vertex `m`, vertices ascending.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshStatistics {
    pub h: f64,
    pub h_min: f64,
    /// max over cells of diameter / inradius
    pub shape_regularity: f64,
}

fn signed_volume(p: &[Vec3; 4]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
}

fn permutation_parity(v: &[usize]) -> i8 {
    let mut inv = 0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Kuhn (Freudenthal) subdivision of an `n x n x n` grid of boxes, six
/// tetrahedra per sub-box sharing its main diagonal.
pub fn build_box_mesh(n: usize, domain: BoxDomain) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("n must be at least 1".into()));
    }
    if (0..3).any(|a| !(domain.hi[a] > domain.lo[a])) {
        return Err(Error::InvalidMesh(format!(
            "box extents must be positive, got {:?} .. {:?}",
            domain.lo, domain.hi
        )));
    }
    let np = n + 1;
    let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                let t = [i, j, k];
                vertices.push(Vec3::from_fn(|a, _| {
                    domain.lo[a] + (domain.hi[a] - domain.lo[a]) * t[a] as f64 / n as f64
                }));
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    let mut mesh = TetMesh::from_cells(vertices, cells, domain)?;
    mesh.n = n;
    Ok(mesh)
}

impl TetMesh {
    /// Builds the complex from vertex coordinates and cell connectivity.
    /// Cells are reoriented to positive volume; boundary entities are those
    /// lying on a face owned by a single cell.
    pub fn from_cells(vertices: Vec<Vec3>, mut cells: Vec<[usize; 4]>, domain: BoxDomain) -> Result<Self> {
        for c in cells.iter_mut() {
            let p = c.map(|v| vertices[v]);
            let vol = signed_volume(&p);
            if vol.abs() <= f64::EPSILON * 1e-3 {
                return Err(Error::InvalidMesh(format!("degenerate cell {c:?}")));
            }
            if vol < 0.0 {
                c.swap(2, 3);
            }
        }

        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(cells.len() * 6);
        let mut faces: Vec<[usize; 3]> = Vec::with_capacity(cells.len() * 4);
        for c in &cells {
            for [a, b] in LOCAL_EDGES {
                let mut e = [c[a], c[b]];
                e.sort_unstable();
                edges.push(e);
            }
            for f in LOCAL_FACES {
                let mut t = f.map(|l| c[l]);
                t.sort_unstable();
                faces.push(t);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        faces.sort_unstable();
        faces.dedup();
        let edge_id: HashMap<[usize; 2], usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let face_id: HashMap<[usize; 3], usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();

        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_faces = Vec::with_capacity(cells.len());
        let mut d2_rows = Vec::with_capacity(cells.len());
        let mut face_owners = vec![0u8; faces.len()];
        for c in &cells {
            let ce = LOCAL_EDGES.map(|[a, b]| {
                let mut e = [c[a], c[b]];
                e.sort_unstable();
                edge_id[&e]
            });
            let mut row = Vec::with_capacity(4);
            let mut cf = [0; 4];
            for (m, f) in LOCAL_FACES.iter().enumerate() {
                let local = f.map(|l| c[l]);
                let mut t = local;
                t.sort_unstable();
                let id = face_id[&t];
                cf[m] = id;
                face_owners[id] += 1;
                let alt = if m % 2 == 0 { 1 } else { -1 };
                row.push((id, alt * permutation_parity(&local)));
            }
            row.sort_unstable();
            cell_edges.push(ce);
            cell_faces.push(cf);
            d2_rows.push(row);
        }

        let d0_rows = edges
            .iter()
            .map(|&[a, b]| vec![(a, -1i8), (b, 1i8)])
            .collect();
        let d1_rows = faces
            .iter()
            .map(|&[a, b, c]| {
                let mut r = vec![
                    (edge_id[&[a, b]], 1i8),
                    (edge_id[&[b, c]], 1i8),
                    (edge_id[&[a, c]], -1i8),
                ];
                r.sort_unstable();
                r
            })
            .collect();

        let boundary_face: Vec<bool> = face_owners.iter().map(|&o| o == 1).collect();
        let mut boundary_edge = vec![false; edges.len()];
        let mut boundary_vertex = vec![false; vertices.len()];
        for (fi, &[a, b, c]) in faces.iter().enumerate() {
            if boundary_face[fi] {
                for e in [[a, b], [b, c], [a, c]] {
                    boundary_edge[edge_id[&e]] = true;
                }
                for v in [a, b, c] {
                    boundary_vertex[v] = true;
                }
            }
        }

        let nv = vertices.len();
        let ne = edges.len();
        let nf = faces.len();
        let mut mesh = Self {
            vertices,
            edges,
            faces,
            cells,
            cell_edges,
            cell_faces,
            d0: Incidence::new(nv, d0_rows),
            d1: Incidence::new(ne, d1_rows),
            d2: Incidence::new(nf, d2_rows),
            boundary_vertex,
            boundary_edge,
            boundary_face,
            h: 0.0,
            n: 0,
            domain,
        };
        mesh.h = mesh.statistics().h;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
            - self.num_cells() as i64
    }

    /// Signed incidence matrix `d_k`: 0 = edges x vertices, 1 = faces x edges,
    /// 2 = cells x faces.
    pub fn incidence(&self, k: usize) -> &Incidence {
        match k {
            0 => &self.d0,
            1 => &self.d1,
            2 => &self.d2,
            _ => panic!("incidence degree must be 0, 1 or 2, got {k}"),
        }
    }

    pub fn cell_points(&self, c: usize) -> [Vec3; 4] {
        self.cells[c].map(|v| self.vertices[v])
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_volume(&self.cell_points(c))
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        LOCAL_EDGES
            .iter()
            .map(|&[a, b]| (p[a] - p[b]).norm())
            .fold(0.0, f64::max)
    }

    pub fn statistics(&self) -> MeshStatistics {
        let mut h: f64 = 0.0;
        let mut h_min = f64::INFINITY;
        let mut sigma: f64 = 0.0;
        for c in 0..self.num_cells() {
            let p = self.cell_points(c);
            let d = self.cell_diameter(c);
            let area: f64 = LOCAL_FACES
                .iter()
                .map(|f| 0.5 * (p[f[1]] - p[f[0]]).cross(&(p[f[2]] - p[f[0]])).norm())
                .sum();
            let inradius = 3.0 * self.cell_volume(c) / area;
            h = h.max(d);
            h_min = h_min.min(d);
            sigma = sigma.max(d / inradius);
        }
        MeshStatistics {
            h,
            h_min,
            shape_regularity: sigma,
        }
    }

    /// Same complex with vertex `v` renamed to `perm[v]`. Edge and face
    /// orientations follow the new numbering.
    pub fn relabel_vertices(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.num_vertices());
        let mut vertices = vec![Vec3::zeros(); self.num_vertices()];
        for (old, &new) in perm.iter().enumerate() {
            vertices[new] = self.vertices[old];
        }
        let cells = self.cells.iter().map(|c| c.map(|v| perm[v])).collect();
        let mut m = Self::from_cells(vertices, cells, self.domain)?;
        m.n = self.n;
        Ok(m)
    }

    /// Legacy ASCII VTK unstructured grid, with optional point and cell vector data.
    pub fn write_vtk<W: Write>(
        &self,
        mut w: W,
        point_scalars: &[(&str, &[f64])],
        point_vectors: &[(&str, &[Vec3])],
        cell_vectors: &[(&str, &[Vec3])],
    ) -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "spmhd tetrahedral mesh")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.num_vertices())?;
        for p in &self.vertices {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        writeln!(w, "CELLS {} {}", self.num_cells(), 5 * self.num_cells())?;
        for c in &self.cells {
            writeln!(w, "4 {} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        writeln!(w, "CELL_TYPES {}", self.num_cells())?;
        for _ in &self.cells {
            writeln!(w, "10")?;
        }
        if !point_scalars.is_empty() || !point_vectors.is_empty() {
            writeln!(w, "POINT_DATA {}", self.num_vertices())?;
            for (name, data) in point_scalars {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in data.iter() {
                    writeln!(w, "{v}")?;
                }
            }
            for (name, data) in point_vectors {
                writeln!(w, "VECTORS {name} double")?;
                for v in data.iter() {
                    writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
                }
            }
        }
        if !cell_vectors.is_empty() {
            writeln!(w, "CELL_DATA {}", self.num_cells())?;
            for (name, data) in cell_vectors {
                writeln!(w, "VECTORS {name} double")?;
                for v in data.iter() {
                    writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> TetMesh {
        build_box_mesh(n, BoxDomain::unit()).unwrap()
    }

    #[test]
    fn single_cube_counts() {
        let m = unit(1);
        assert_eq!(
            (m.num_vertices(), m.num_edges(), m.num_faces(), m.num_cells()),
            (8, 19, 18, 6)
        );
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.boundary_edge.iter().filter(|b| !**b).count(), 1);
        assert_eq!(m.boundary_face.iter().filter(|b| !**b).count(), 6);
        assert!(m.boundary_vertex.iter().all(|b| *b));
    }

    #[test]
    fn n_zero_rejected() {
        assert!(matches!(build_box_mesh(0, BoxDomain::unit()), Err(Error::InvalidMesh(_))));
        let flat = BoxDomain {
            lo: [0.0; 3],
            hi: [1.0, 0.0, 1.0],
        };
        assert!(build_box_mesh(2, flat).is_err());
    }

    #[test]
    fn complex_properties_small_n() {
        for n in 1..=4 {
            let m = unit(n);
            assert!(m.d1.composes_to_zero(&m.d0), "d1 d0 != 0 at n={n}");
            assert!(m.d2.composes_to_zero(&m.d1), "d2 d1 != 0 at n={n}");
            assert_eq!(m.euler_characteristic(), 1);
            assert_eq!(m.num_cells(), 6 * n * n * n);
            let expected = 1.0 / 6.0 / (n * n * n) as f64;
            for c in 0..m.num_cells() {
                assert!((m.cell_volume(c) - expected).abs() < 1e-15);
            }
            assert_eq!(m.boundary_face.iter().filter(|b| **b).count(), 12 * n * n);
        }
    }

    #[test]
    fn main_diagonal_is_interior() {
        let m = unit(1);
        let diag = m.edges.iter().position(|&e| e == [0, 7]).unwrap();
        assert!(!m.boundary_edge[diag]);
        // face diagonal of the z = 0 face
        let fd = m.edges.iter().position(|&e| e == [0, 3]).unwrap();
        assert!(m.boundary_edge[fd]);
    }

    #[test]
    fn single_tet_d0_rows() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let m = TetMesh::from_cells(v, vec![[0, 1, 2, 3]], BoxDomain::unit()).unwrap();
        assert_eq!(m.d0.nrows(), 6);
        assert_eq!(m.d0.ncols(), 4);
        for (r, &[a, b]) in m.edges.iter().enumerate() {
            assert_eq!(m.d0.row(r), &[(a, -1), (b, 1)]);
        }
        // outward orientation: every face of a lone tet is boundary and D2 sums
        // the outward-oriented fluxes
        let normal_sum: Vec3 = (0..4)
            .map(|k| {
                let (f, s) = m.d2.row(0)[k];
                let [a, b, c] = m.faces[f];
                let p = &m.vertices;
                (p[b] - p[a]).cross(&(p[c] - p[a])) * s as f64
            })
            .sum();
        assert!(normal_sum.norm() < 1e-14);
    }

    #[test]
    fn d2_signs_point_outward() {
        let m = unit(2);
        for c in 0..m.num_cells() {
            let centroid: Vec3 = m.cell_points(c).iter().sum::<Vec3>() / 4.0;
            for &(f, s) in m.d2.row(c) {
                let [a, b, cc] = m.faces[f];
                let p = &m.vertices;
                let normal = (p[b] - p[a]).cross(&(p[cc] - p[a]));
                let fc = (p[a] + p[b] + p[cc]) / 3.0;
                assert!(s as f64 * normal.dot(&(fc - centroid)) > 0.0);
            }
        }
    }

    #[test]
    fn mesh_size_and_shape_regularity() {
        let s1 = unit(1).statistics();
        let s2 = unit(2).statistics();
        let s4 = unit(4).statistics();
        assert!((s1.h - 3f64.sqrt()).abs() < 1e-14);
        assert!((s2.h - 3f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((s1.shape_regularity - s2.shape_regularity).abs() < 1e-12);
        assert!((s1.shape_regularity - s4.shape_regularity).abs() < 1e-12);
        assert!(s1.shape_regularity.is_finite() && s1.shape_regularity > 0.0);
    }

    #[test]
    fn relabel_preserves_complex() {
        let m = unit(2);
        let nv = m.num_vertices();
        let perm: Vec<usize> = (0..nv).map(|v| (v * 7 + 3) % nv).collect();
        let r = m.relabel_vertices(&perm).unwrap();
        assert_eq!(r.num_edges(), m.num_edges());
        assert_eq!(r.num_faces(), m.num_faces());
        assert!(r.d2.composes_to_zero(&r.d1));
        assert!(r.d1.composes_to_zero(&r.d0));
    }

    #[test]
    fn vtk_export_writes_header() {
        let m = unit(1);
        let mut buf = Vec::new();
        m.write_vtk(&mut buf, &[], &[], &[]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0"));
        assert!(s.contains("CELLS 6 30"));
    }
}
