//! Mass, stiffness and coupling matrices, load vectors, the trilinear
//! cross-product form and error norms.
//!
//! Everything is assembled over all DOFs; the homogeneous boundary conditions
//! of the `H_0` spaces are imposed later by restricting to free DOFs.

use crate::fem_spaces::{nedelec_local, rt_local, DiscreteComplex, FieldVector, SpaceKind};
use crate::fields::{ScalarField, VectorField};
use crate::mesh::Vec3;
use crate::quadrature::QuadratureRule;
use crate::sparse::SparseMatrix;

/// Basis values of the vector spaces tabulated at every quadrature point.
#[derive(Clone, Debug)]
pub struct Assembler {
    pub complex: DiscreteComplex,
    pub rule: QuadratureRule,
    nq: usize,
    /// Quadrature weight times Jacobian, per (cell, point).
    jxw: Vec<f64>,
    points: Vec<Vec3>,
    ned: Vec<[Vec3; 6]>,
    ned_curl: Vec<[Vec3; 6]>,
    rt: Vec<[Vec3; 4]>,
}

impl Assembler {
    pub fn new(complex: DiscreteComplex, rule: QuadratureRule) -> Self {
        let nc = complex.mesh.num_cells();
        let nq = rule.len();
        let mut jxw = Vec::with_capacity(nc * nq);
        let mut points = Vec::with_capacity(nc * nq);
        let mut ned = Vec::with_capacity(nc * nq);
        let mut ned_curl = Vec::with_capacity(nc);
        let mut rt = Vec::with_capacity(nc * nq);
        for c in 0..nc {
            let g = &complex.geometry[c];
            let ns = complex.nedelec.signs(c);
            let rs = complex.rt.signs(c);
            ned_curl.push(nedelec_local(g, &[0.25; 4], ns).1);
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                // reference weights sum to 1/6
                jxw.push(w * 6.0 * g.volume);
                points.push(g.map(q));
                ned.push(nedelec_local(g, q, ns).0);
                rt.push(rt_local(g, q, rs).0);
            }
        }
        Self {
            complex,
            rule,
            nq,
            jxw,
            points,
            ned,
            ned_curl,
            rt,
        }
    }

    fn ncells(&self) -> usize {
        self.complex.mesh.num_cells()
    }

    fn assemble<const R: usize, const C: usize>(
        &self,
        nrows: usize,
        ncols: usize,
        row_dofs: impl Fn(usize) -> [usize; R],
        col_dofs: impl Fn(usize) -> [usize; C],
        local: impl Fn(usize, &mut [[f64; C]; R]),
    ) -> SparseMatrix {
        let mut trip = Vec::with_capacity(self.ncells() * R * C);
        let mut k = [[0.0; C]; R];
        for c in 0..self.ncells() {
            k.iter_mut().for_each(|r| r.fill(0.0));
            local(c, &mut k);
            let (rd, cd) = (row_dofs(c), col_dofs(c));
            for i in 0..R {
                for j in 0..C {
                    trip.push((rd[i], cd[j], k[i][j]));
                }
            }
        }
        SparseMatrix::from_triplets(nrows, ncols, &trip)
    }

    fn ned_dofs(&self, c: usize) -> [usize; 6] {
        self.complex.nedelec.dofs(c).try_into().unwrap()
    }

    fn rt_dofs(&self, c: usize) -> [usize; 4] {
        self.complex.rt.dofs(c).try_into().unwrap()
    }

    fn lag_dofs(&self, c: usize) -> [usize; 4] {
        self.complex.lagrange.dofs(c).try_into().unwrap()
    }

    fn qrange(&self, c: usize) -> std::ops::Range<usize> {
        c * self.nq..(c + 1) * self.nq
    }

    /// `M_L`, the P1 mass matrix.
    pub fn mass_lagrange(&self) -> SparseMatrix {
        let n = self.complex.lagrange.ndofs;
        self.assemble(n, n, |c| self.lag_dofs(c), |c| self.lag_dofs(c), |c, k| {
            for (qi, q) in self.qrange(c).zip(&self.rule.points) {
                let w = self.jxw[qi];
                for i in 0..4 {
                    for j in 0..4 {
                        k[i][j] += w * q[i] * q[j];
                    }
                }
            }
        })
    }

    /// `M_N`, the Nédélec mass matrix.
    pub fn mass_nedelec(&self) -> SparseMatrix {
        let n = self.complex.nedelec.ndofs;
        self.assemble(n, n, |c| self.ned_dofs(c), |c| self.ned_dofs(c), |c, k| {
            for qi in self.qrange(c) {
                let (w, phi) = (self.jxw[qi], &self.ned[qi]);
                for i in 0..6 {
                    for j in 0..6 {
                        k[i][j] += w * phi[i].dot(&phi[j]);
                    }
                }
            }
        })
    }

    /// `M_R`, the Raviart-Thomas mass matrix.
    pub fn mass_rt(&self) -> SparseMatrix {
        let n = self.complex.rt.ndofs;
        self.assemble(n, n, |c| self.rt_dofs(c), |c| self.rt_dofs(c), |c, k| {
            for qi in self.qrange(c) {
                let (w, psi) = (self.jxw[qi], &self.rt[qi]);
                for i in 0..4 {
                    for j in 0..4 {
                        k[i][j] += w * psi[i].dot(&psi[j]);
                    }
                }
            }
        })
    }

    /// Diagonal DG mass matrix (cell volumes).
    pub fn mass_dg(&self) -> SparseMatrix {
        let n = self.ncells();
        let t: Vec<_> = (0..n).map(|c| (c, c, self.complex.geometry[c].volume)).collect();
        SparseMatrix::from_triplets(n, n, &t)
    }

    /// `A_ij = (curl φ_j, curl φ_i)` on the Nédélec space.
    pub fn curl_curl(&self) -> SparseMatrix {
        let n = self.complex.nedelec.ndofs;
        self.assemble(n, n, |c| self.ned_dofs(c), |c| self.ned_dofs(c), |c, k| {
            let vol = self.complex.geometry[c].volume;
            let cu = &self.ned_curl[c];
            for i in 0..6 {
                for j in 0..6 {
                    k[i][j] = vol * cu[i].dot(&cu[j]);
                }
            }
        })
    }

    /// `G_ij = (∇ψ_j, φ_i)` with `ψ` Lagrange and `φ` Nédélec, equal to `M_N D0`.
    pub fn grad_coupling(&self) -> SparseMatrix {
        let (nn, nl) = (self.complex.nedelec.ndofs, self.complex.lagrange.ndofs);
        self.assemble(nn, nl, |c| self.ned_dofs(c), |c| self.lag_dofs(c), |c, k| {
            let g = &self.complex.geometry[c];
            for qi in self.qrange(c) {
                let (w, phi) = (self.jxw[qi], &self.ned[qi]);
                for i in 0..6 {
                    for j in 0..4 {
                        k[i][j] += w * phi[i].dot(&g.grads[j]);
                    }
                }
            }
        })
    }

    /// `C_ij = (ψ_j, φ_i)` with `ψ` Raviart-Thomas and `φ` Nédélec.
    pub fn ned_rt_coupling(&self) -> SparseMatrix {
        let (nn, nr) = (self.complex.nedelec.ndofs, self.complex.rt.ndofs);
        self.assemble(nn, nr, |c| self.ned_dofs(c), |c| self.rt_dofs(c), |c, k| {
            for qi in self.qrange(c) {
                let (w, phi, psi) = (self.jxw[qi], &self.ned[qi], &self.rt[qi]);
                for i in 0..6 {
                    for j in 0..4 {
                        k[i][j] += w * phi[i].dot(&psi[j]);
                    }
                }
            }
        })
    }

    fn ned_value(&self, coeffs: &[f64], c: usize, qi: usize) -> Vec3 {
        let d = self.ned_dofs(c);
        let phi = &self.ned[qi];
        (0..6).map(|l| phi[l] * coeffs[d[l]]).sum()
    }

    /// Value of a Nédélec field at every quadrature point of `cell`.
    pub fn nedelec_at_points(&self, coeffs: &[f64], cell: usize) -> Vec<Vec3> {
        self.qrange(cell).map(|qi| self.ned_value(coeffs, cell, qi)).collect()
    }

    /// `X(a, b)_i = ∫ (a × b)·φ_i` for Nédélec fields `a`, `b`.
    pub fn cross_form(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.complex.nedelec.ndofs];
        for c in 0..self.ncells() {
            let d = self.ned_dofs(c);
            for qi in self.qrange(c) {
                let v = self.ned_value(a, c, qi).cross(&self.ned_value(b, c, qi)) * self.jxw[qi];
                for l in 0..6 {
                    out[d[l]] += v.dot(&self.ned[qi][l]);
                }
            }
        }
        out
    }

    /// Trilinear form `∫ (a × b)·c`.
    pub fn cross_trilinear(&self, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        crate::sparse::dot(&self.cross_form(a, b), c)
    }

    /// `∂X(a, b)/∂a`, i.e. `K_ij = ∫ (φ_j × b)·φ_i`.
    pub fn cross_jacobian_first(&self, b: &[f64]) -> SparseMatrix {
        let n = self.complex.nedelec.ndofs;
        self.assemble(n, n, |c| self.ned_dofs(c), |c| self.ned_dofs(c), |c, k| {
            for qi in self.qrange(c) {
                let bv = self.ned_value(b, c, qi) * self.jxw[qi];
                let phi = &self.ned[qi];
                for j in 0..6 {
                    let v = phi[j].cross(&bv);
                    for i in 0..6 {
                        k[i][j] += v.dot(&phi[i]);
                    }
                }
            }
        })
    }

    /// `∂X(a, b)/∂b`, i.e. `K_ij = ∫ (a × φ_j)·φ_i`.
    pub fn cross_jacobian_second(&self, a: &[f64]) -> SparseMatrix {
        self.cross_jacobian_first(a).scaled(-1.0)
    }

    /// `(f, φ_i)` over the Nédélec basis.
    pub fn load_nedelec(&self, f: &VectorField, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.complex.nedelec.ndofs];
        for c in 0..self.ncells() {
            let d = self.ned_dofs(c);
            for qi in self.qrange(c) {
                let v = f.eval(&self.points[qi], t) * self.jxw[qi];
                for l in 0..6 {
                    out[d[l]] += v.dot(&self.ned[qi][l]);
                }
            }
        }
        out
    }

    /// `(f, ψ_i)` over the Raviart-Thomas basis.
    pub fn load_rt(&self, f: &VectorField, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.complex.rt.ndofs];
        for c in 0..self.ncells() {
            let d = self.rt_dofs(c);
            for qi in self.qrange(c) {
                let v = f.eval(&self.points[qi], t) * self.jxw[qi];
                for l in 0..4 {
                    out[d[l]] += v.dot(&self.rt[qi][l]);
                }
            }
        }
        out
    }

    /// `(p, λ_i)` over the Lagrange basis.
    pub fn load_lagrange(&self, p: &ScalarField, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.complex.lagrange.ndofs];
        for c in 0..self.ncells() {
            let d = self.lag_dofs(c);
            for (qi, q) in self.qrange(c).zip(&self.rule.points) {
                let v = p.eval(&self.points[qi], t) * self.jxw[qi];
                for l in 0..4 {
                    out[d[l]] += v * q[l];
                }
            }
        }
        out
    }

    /// `(p, 1_K)` over the DG basis.
    pub fn load_dg(&self, p: &ScalarField, t: f64) -> Vec<f64> {
        (0..self.ncells())
            .map(|c| self.qrange(c).map(|qi| p.eval(&self.points[qi], t) * self.jxw[qi]).sum())
            .collect()
    }

    /// `‖v_h − v‖_{L²}` for a Nédélec, RT or (via its gradient) Lagrange field.
    pub fn l2_error_vector(&self, v: &FieldVector, exact: &VectorField, t: f64) -> f64 {
        let c = &self.complex;
        let mut acc = 0.0;
        for cell in 0..self.ncells() {
            for (qi, q) in self.qrange(cell).zip(&self.rule.points) {
                let vh = match v.kind {
                    SpaceKind::Nedelec => self.ned_value(&v.coeffs, cell, qi),
                    SpaceKind::RaviartThomas => {
                        let d = self.rt_dofs(cell);
                        (0..4).map(|l| self.rt[qi][l] * v.coeffs[d[l]]).sum()
                    }
                    _ => c.eval_vector(v, cell, q),
                };
                acc += self.jxw[qi] * (vh - exact.eval(&self.points[qi], t)).norm_squared();
            }
        }
        acc.sqrt()
    }

    /// `‖curl v_h − curl v‖_{L²}` for a Nédélec field.
    pub fn curl_error(&self, v: &FieldVector, exact_curl: &VectorField, t: f64) -> f64 {
        let mut acc = 0.0;
        for cell in 0..self.ncells() {
            let ch = self.complex.eval_curl(v, cell);
            for qi in self.qrange(cell) {
                acc += self.jxw[qi] * (ch - exact_curl.eval(&self.points[qi], t)).norm_squared();
            }
        }
        acc.sqrt()
    }

    /// `‖div B_h − div B‖_{L²}` for an RT field.
    pub fn div_error(&self, b: &FieldVector, exact_div: &ScalarField, t: f64) -> f64 {
        let mut acc = 0.0;
        for cell in 0..self.ncells() {
            let dh = self.complex.eval_div(b, cell);
            for qi in self.qrange(cell) {
                acc += self.jxw[qi] * (dh - exact_div.eval(&self.points[qi], t)).powi(2);
            }
        }
        acc.sqrt()
    }

    /// `‖p_h − p‖_{L²}` for a Lagrange or DG field.
    pub fn l2_error_scalar(&self, p: &FieldVector, exact: &ScalarField, t: f64) -> f64 {
        let mut acc = 0.0;
        for cell in 0..self.ncells() {
            for (qi, q) in self.qrange(cell).zip(&self.rule.points) {
                let ph = self.complex.eval_scalar(p, cell, q);
                acc += self.jxw[qi] * (ph - exact.eval(&self.points[qi], t)).powi(2);
            }
        }
        acc.sqrt()
    }

    /// `‖v‖_{L²}` of an analytic field.
    pub fn l2_norm_exact(&self, exact: &VectorField, t: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.jxw)
            .map(|(x, w)| w * exact.eval(x, t).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain};
    use std::sync::Arc;

    fn assembler(n: usize) -> Assembler {
        let mesh = Arc::new(build_box_mesh(n, BoxDomain::unit()).unwrap());
        Assembler::new(DiscreteComplex::new(mesh, 0).unwrap(), QuadratureRule::tet(4))
    }

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn lagrange_mass_sums_to_volume() {
        let a = assembler(2);
        let m = a.mass_lagrange();
        let o = ones(m.nrows());
        assert!((m.bilinear(&o, &o) - 1.0).abs() < 1e-13);
        assert!(m.asymmetry() < 1e-15);
        assert!((a.mass_dg().bilinear(&ones(48), &ones(48)) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mass_matrices_reproduce_constant_field_norm() {
        let a = assembler(2);
        let k = Vec3::new(1.0, -2.0, 0.5);
        let f = VectorField::constant(k);
        let ned = a.complex.interpolate_nedelec(&f, 0.0);
        let rt = a.complex.interpolate_rt(&f, 0.0);
        let expect = k.norm_squared();
        assert!((a.mass_nedelec().bilinear(&ned.coeffs, &ned.coeffs) - expect).abs() < 1e-12);
        assert!((a.mass_rt().bilinear(&rt.coeffs, &rt.coeffs) - expect).abs() < 1e-12);
        // (k, k) through the mixed coupling
        assert!((a.ned_rt_coupling().bilinear(&ned.coeffs, &rt.coeffs) - expect).abs() < 1e-12);
    }

    #[test]
    fn gradient_coupling_equals_mass_times_d0() {
        let a = assembler(2);
        let g = a.grad_coupling();
        let mg = a.mass_nedelec().matmul(&a.complex.mesh.d0.to_sparse());
        let diff = g.add(&mg.scaled(-1.0));
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn curl_curl_equals_d1t_mr_d1() {
        let a = assembler(2);
        let d1 = a.complex.mesh.d1.to_sparse();
        let b = d1.transpose().matmul(&a.mass_rt()).matmul(&d1);
        assert!(a.curl_curl().add(&b.scaled(-1.0)).max_abs() < 1e-12);
    }

    #[test]
    fn cross_form_is_alternating_and_matches_jacobians() {
        let a = assembler(2);
        let n = a.complex.nedelec.ndofs;
        let x: Vec<f64> = (0..n).map(|i| (0.7 * i as f64).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| (1.1 * i as f64 + 0.3).cos()).collect();
        let z: Vec<f64> = (0..n).map(|i| (0.2 * i as f64).sin() - 0.1).collect();
        // (x × x)·z = 0 and (x × y)·x = 0
        assert!(crate::sparse::max_abs(&a.cross_form(&x, &x)) < 1e-14);
        assert!(a.cross_trilinear(&x, &y, &x).abs() < 1e-14);
        assert!((a.cross_trilinear(&x, &y, &z) + a.cross_trilinear(&y, &x, &z)).abs() < 1e-14);
        let j1 = a.cross_jacobian_first(&y).mul_vec(&x);
        let j2 = a.cross_jacobian_second(&x).mul_vec(&y);
        let f = a.cross_form(&x, &y);
        for i in 0..n {
            assert!((j1[i] - f[i]).abs() < 1e-14);
            assert!((j2[i] - f[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cross_of_constants_matches_pointwise_product() {
        let a = assembler(1);
        let (p, q) = (Vec3::new(1.0, 0.0, 2.0), Vec3::new(0.0, 3.0, -1.0));
        let x = a.complex.interpolate_nedelec(&VectorField::constant(p), 0.0);
        let y = a.complex.interpolate_nedelec(&VectorField::constant(q), 0.0);
        let load = a.load_nedelec(&VectorField::constant(p.cross(&q)), 0.0);
        let cf = a.cross_form(&x.coeffs, &y.coeffs);
        for (u, v) in cf.iter().zip(&load) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn error_norms_vanish_on_reproduced_fields() {
        let a = assembler(2);
        let f = VectorField::constant(Vec3::new(0.2, 0.4, -1.0));
        let ned = a.complex.interpolate_nedelec(&f, 0.0);
        assert!(a.l2_error_vector(&ned, &f, 0.0) < 1e-13);
        assert!(a.curl_error(&ned, &VectorField::zero(), 0.0) < 1e-13);
        let rt = a.complex.interpolate_rt(&f, 0.0);
        assert!(a.l2_error_vector(&rt, &f, 0.0) < 1e-13);
        assert!(a.div_error(&rt, &ScalarField::zero(), 0.0) < 1e-13);
        assert!((a.l2_norm_exact(&f, 0.0) - 1.2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn nedelec_interpolation_error_is_first_order() {
        use std::f64::consts::PI;
        let f = VectorField::new(|x, _| {
            Vec3::new((PI * x.y).sin(), (PI * x.z).cos() * x.x, (PI * x.x).sin() * x.y)
        });
        let e: Vec<f64> = [2, 4]
            .iter()
            .map(|&n| {
                let a = assembler(n);
                a.l2_error_vector(&a.complex.interpolate_nedelec(&f, 0.0), &f, 0.0)
            })
            .collect();
        let rate = (e[0] / e[1]).log2();
        assert!(rate > 0.85 && rate < 1.3, "rate {rate}");
    }
}
