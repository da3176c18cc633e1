//! Global operators of the discrete complex: the L² projection `Q_h`, the
//! discrete curl `curl_h`, the curl-preserving projection `Π^N`, the
//! divergence-free projection `Π̃`, and vector-potential recovery.
//!
//! All of them are linear solves against matrices assembled once per mesh.
//! Factorisations are computed lazily and cached, so an [`OperatorContext`]
//! can be shared between threads once built.

use std::sync::{Arc, OnceLock};

use crate::assembly::Assembler;
use crate::error::{Error, Result};
use crate::fem_spaces::{DiscreteComplex, FieldVector, SpaceKind};
use crate::fields::VectorField;
use crate::mesh::TetMesh;
use crate::quadrature::QuadratureRule;
use crate::sparse::{SparseLu, SparseMatrix};

/// Input of a projection: an analytic field at time `t`, or a discrete one.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Analytic(&'a VectorField, f64),
    Discrete(&'a FieldVector),
}

/// Gauge used to pick one vector potential among all `A_h` with `curl A_h = B_h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// `(A_h, ∇q_h) = 0` for all Lagrange `q_h`; the minimum-norm potential.
    Coulomb,
    /// `D0ᵀ A = 0` on coefficients.
    Combinatorial,
}

/// Result of `Π^N`: the projected field and the Lagrange multiplier.
#[derive(Clone, Debug)]
pub struct PiNResult {
    pub field: FieldVector,
    pub multiplier: FieldVector,
}

/// Assembled matrices over all DOFs.
#[derive(Clone, Debug)]
pub struct Matrices {
    pub mass_lagrange: SparseMatrix,
    pub mass_nedelec: SparseMatrix,
    pub mass_rt: SparseMatrix,
    pub mass_dg: SparseMatrix,
    pub curl_curl: SparseMatrix,
    /// `M_N D0`
    pub grad: SparseMatrix,
    /// Nédélec rows, RT columns.
    pub ned_rt: SparseMatrix,
    pub d0: SparseMatrix,
    pub d1: SparseMatrix,
    pub d2: SparseMatrix,
}

pub struct OperatorContext {
    pub asm: Assembler,
    pub mat: Matrices,
    /// Matrices restricted to free DOFs.
    pub red: Matrices,
    mass_ned_lu: OnceLock<SparseLu>,
    mass_rt_lu: OnceLock<SparseLu>,
    mass_lag_lu: OnceLock<SparseLu>,
    coulomb_lu: OnceLock<SparseLu>,
    combinatorial_lu: OnceLock<SparseLu>,
    div_free_lu: OnceLock<SparseLu>,
    poisson_lu: OnceLock<SparseLu>,
}

impl std::fmt::Debug for OperatorContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorContext")
            .field("cells", &self.mesh().num_cells())
            .finish_non_exhaustive()
    }
}

fn block2(a: &SparseMatrix, b: &SparseMatrix, c: &SparseMatrix) -> SparseMatrix {
    // [a b; c 0]
    let (n, m) = (a.nrows(), b.ncols());
    let mut t = a.triplets();
    t.extend(b.triplets().into_iter().map(|(i, j, v)| (i, n + j, v)));
    t.extend(c.triplets().into_iter().map(|(i, j, v)| (n + i, j, v)));
    SparseMatrix::from_triplets(n + m, n + m, &t)
}

fn factor(cell: &OnceLock<SparseLu>, build: impl FnOnce() -> SparseMatrix) -> Result<&SparseLu> {
    if let Some(lu) = cell.get() {
        return Ok(lu);
    }
    let lu = SparseLu::new(&build())?;
    Ok(cell.get_or_init(|| lu))
}

impl OperatorContext {
    pub fn new(mesh: Arc<TetMesh>, order: usize, quad_degree: usize) -> Result<Self> {
        let complex = DiscreteComplex::new(mesh, order)?;
        let asm = Assembler::new(complex, QuadratureRule::tet(quad_degree));
        let m = &asm.complex.mesh;
        let mat = Matrices {
            mass_lagrange: asm.mass_lagrange(),
            mass_nedelec: asm.mass_nedelec(),
            mass_rt: asm.mass_rt(),
            mass_dg: asm.mass_dg(),
            curl_curl: asm.curl_curl(),
            grad: asm.grad_coupling(),
            ned_rt: asm.ned_rt_coupling(),
            d0: m.d0.to_sparse(),
            d1: m.d1.to_sparse(),
            d2: m.d2.to_sparse(),
        };
        let c = &asm.complex;
        let (fl, fn_, fr, fd) = (&c.lagrange.free, &c.nedelec.free, &c.rt.free, &c.dg.free);
        let red = Matrices {
            mass_lagrange: mat.mass_lagrange.restrict(fl, fl),
            mass_nedelec: mat.mass_nedelec.restrict(fn_, fn_),
            mass_rt: mat.mass_rt.restrict(fr, fr),
            mass_dg: mat.mass_dg.clone(),
            curl_curl: mat.curl_curl.restrict(fn_, fn_),
            grad: mat.grad.restrict(fn_, fl),
            ned_rt: mat.ned_rt.restrict(fn_, fr),
            d0: mat.d0.restrict(fn_, fl),
            d1: mat.d1.restrict(fr, fn_),
            d2: mat.d2.restrict(fd, fr),
        };
        Ok(Self {
            asm,
            mat,
            red,
            mass_ned_lu: OnceLock::new(),
            mass_rt_lu: OnceLock::new(),
            mass_lag_lu: OnceLock::new(),
            coulomb_lu: OnceLock::new(),
            combinatorial_lu: OnceLock::new(),
            div_free_lu: OnceLock::new(),
            poisson_lu: OnceLock::new(),
        })
    }

    pub fn complex(&self) -> &DiscreteComplex {
        &self.asm.complex
    }

    pub fn mesh(&self) -> &TetMesh {
        &self.asm.complex.mesh
    }

    /// Factorised free-DOF Nédélec mass matrix.
    pub fn mass_nedelec_lu(&self) -> Result<&SparseLu> {
        factor(&self.mass_ned_lu, || self.red.mass_nedelec.clone())
    }

    /// Factorised free-DOF RT mass matrix.
    pub fn mass_rt_lu(&self) -> Result<&SparseLu> {
        factor(&self.mass_rt_lu, || self.red.mass_rt.clone())
    }

    /// Factorised free-DOF Lagrange mass matrix.
    pub fn mass_lagrange_lu(&self) -> Result<&SparseLu> {
        factor(&self.mass_lag_lu, || self.red.mass_lagrange.clone())
    }

    fn coulomb(&self) -> Result<&SparseLu> {
        factor(&self.coulomb_lu, || {
            block2(&self.red.curl_curl, &self.red.grad, &self.red.grad.transpose())
        })
    }

    fn combinatorial(&self) -> Result<&SparseLu> {
        factor(&self.combinatorial_lu, || {
            block2(&self.red.curl_curl, &self.red.d0, &self.red.d0.transpose())
        })
    }

    fn div_free(&self) -> Result<&SparseLu> {
        factor(&self.div_free_lu, || {
            // the DG multiplier is defined up to a constant; drop the last cell
            let nd = self.red.d2.nrows() - 1;
            let keep: Vec<usize> = (0..nd).collect();
            let all: Vec<usize> = (0..self.red.d2.ncols()).collect();
            let d2 = self.red.d2.restrict(&keep, &all);
            block2(&self.red.mass_rt, &d2.transpose(), &d2)
        })
    }

    /// Factorised `D0ᵀ M_N D0` on free vertices, the discrete Laplacian.
    pub fn poisson_lu(&self) -> Result<&SparseLu> {
        factor(&self.poisson_lu, || self.red.d0.transpose().matmul(&self.red.grad))
    }

    /// `(v, φ_i)` for the Nédélec basis, over all DOFs.
    fn nedelec_moments(&self, v: Source) -> Vec<f64> {
        match v {
            Source::Analytic(f, t) => self.asm.load_nedelec(f, t),
            Source::Discrete(x) => match x.kind {
                SpaceKind::Nedelec => self.mat.mass_nedelec.mul_vec(&x.coeffs),
                SpaceKind::RaviartThomas => self.mat.ned_rt.mul_vec(&x.coeffs),
                SpaceKind::Lagrange => self.mat.grad.mul_vec(&x.coeffs),
                SpaceKind::Dg => panic!("cannot test a DG field against Nédélec functions"),
            },
        }
    }

    /// `(v, ψ_i)` for the RT basis, over all DOFs.
    fn rt_moments(&self, v: Source) -> Vec<f64> {
        match v {
            Source::Analytic(f, t) => self.asm.load_rt(f, t),
            Source::Discrete(x) => match x.kind {
                SpaceKind::RaviartThomas => self.mat.mass_rt.mul_vec(&x.coeffs),
                SpaceKind::Nedelec => self.mat.ned_rt.transpose().mul_vec(&x.coeffs),
                _ => panic!("cannot test a scalar field against RT functions"),
            },
        }
    }

    fn ned_field(&self, reduced: &[f64]) -> FieldVector {
        FieldVector {
            kind: SpaceKind::Nedelec,
            coeffs: self.complex().nedelec.extend(reduced),
        }
    }

    /// Solves `M_N x = b` on free Nédélec DOFs; `b` over all DOFs.
    pub fn solve_mass_nedelec(&self, b: &[f64]) -> Result<FieldVector> {
        let rhs = self.complex().nedelec.restrict(b);
        Ok(self.ned_field(&self.mass_nedelec_lu()?.solve(&rhs)))
    }

    /// `Q_h v`: L² projection onto `H_0(curl)` Nédélec fields.
    pub fn q_h_project(&self, v: Source) -> Result<FieldVector> {
        self.solve_mass_nedelec(&self.nedelec_moments(v))
    }

    /// `curl_h B`: the Nédélec field with `(curl_h B, v) = (B, curl v)` for all
    /// `v` in `H_0(curl)`.
    pub fn curl_h(&self, b: &FieldVector) -> Result<FieldVector> {
        assert_eq!(b.kind, SpaceKind::RaviartThomas);
        let mb = self.mat.mass_rt.mul_vec(&b.coeffs);
        self.solve_mass_nedelec(&self.mat.d1.transpose().mul_vec(&mb))
    }

    /// `Π^N E` via the mixed problem
    /// `a(ΠE, F) + (∇P, F) = a(E, F)`, `(ΠE, ∇Q) = (E, ∇Q)`.
    pub fn pi_n(&self, e: Source) -> Result<PiNResult> {
        let c = self.complex();
        let curl_moments = match e {
            Source::Analytic(f, t) => {
                let curl = f.curl_field().ok_or_else(|| {
                    Error::InvalidParams("Π^N needs a field with a closed-form curl".into())
                })?;
                self.asm.load_rt(&curl, t)
            }
            Source::Discrete(x) => {
                assert_eq!(x.kind, SpaceKind::Nedelec);
                self.mat.mass_rt.mul_vec(&self.mat.d1.mul_vec(&x.coeffs))
            }
        };
        let top = c.nedelec.restrict(&self.mat.d1.transpose().mul_vec(&curl_moments));
        let bottom = c.lagrange.restrict(&self.mat.d0.transpose().mul_vec(&self.nedelec_moments(e)));
        let nn = top.len();
        let rhs: Vec<f64> = top.into_iter().chain(bottom).collect();
        let sol = self.coulomb()?.solve(&rhs);
        Ok(PiNResult {
            field: self.ned_field(&sol[..nn]),
            multiplier: FieldVector {
                kind: SpaceKind::Lagrange,
                coeffs: c.lagrange.extend(&sol[nn..]),
            },
        })
    }

    /// `Π̃ B`: L² projection onto divergence-free RT fields with `B·n = 0`.
    pub fn pi_tilde_rt(&self, b: Source) -> Result<FieldVector> {
        let c = self.complex();
        let top = c.rt.restrict(&self.rt_moments(b));
        let nr = top.len();
        let nd = self.red.d2.nrows() - 1;
        let rhs: Vec<f64> = top.into_iter().chain(std::iter::repeat(0.0).take(nd)).collect();
        let sol = self.div_free()?.solve(&rhs);
        Ok(FieldVector {
            kind: SpaceKind::RaviartThomas,
            coeffs: c.rt.extend(&sol[..nr]),
        })
    }

    /// A potential `A_h` in `H_0(curl)` with `curl A_h = B_h`.
    ///
    /// Fails with [`Error::NotDivergenceFree`] when `max |D2 B| > div_tol`.
    pub fn vector_potential(&self, b: &FieldVector, gauge: Gauge, div_tol: f64) -> Result<FieldVector> {
        assert_eq!(b.kind, SpaceKind::RaviartThomas);
        let div = self.complex().div_norm(b);
        if div > div_tol {
            return Err(Error::NotDivergenceFree(div));
        }
        let c = self.complex();
        let top = c.nedelec.restrict(&self.mat.d1.transpose().mul_vec(&self.mat.mass_rt.mul_vec(&b.coeffs)));
        let nn = top.len();
        let rhs: Vec<f64> = top.into_iter().chain(std::iter::repeat(0.0).take(c.lagrange.num_free())).collect();
        let lu = match gauge {
            Gauge::Coulomb => self.coulomb()?,
            Gauge::Combinatorial => self.combinatorial()?,
        };
        Ok(self.ned_field(&lu.solve(&rhs)[..nn]))
    }

    /// `‖Π̃(curl E) − curl Π^N E‖_{L²}`.
    pub fn commuting_check(&self, e: &VectorField, t: f64) -> Result<f64> {
        let curl = e
            .curl_field()
            .ok_or_else(|| Error::InvalidParams("commuting check needs a closed-form curl".into()))?;
        let lhs = self.pi_tilde_rt(Source::Analytic(&curl, t))?;
        let rhs = self.complex().curl(&self.pi_n(Source::Analytic(e, t))?.field);
        let d = lhs.lin_comb(1.0, &rhs, -1.0);
        Ok(self.rt_norm(&d))
    }

    pub fn ned_norm(&self, v: &FieldVector) -> f64 {
        self.mat.mass_nedelec.bilinear(&v.coeffs, &v.coeffs).max(0.0).sqrt()
    }

    pub fn rt_norm(&self, v: &FieldVector) -> f64 {
        self.mat.mass_rt.bilinear(&v.coeffs, &v.coeffs).max(0.0).sqrt()
    }

    /// `(a, b)` for two Nédélec fields.
    pub fn ned_inner(&self, a: &FieldVector, b: &FieldVector) -> f64 {
        self.mat.mass_nedelec.bilinear(&a.coeffs, &b.coeffs)
    }

    /// `(a, b)` for an RT field `a` and a Nédélec field `b`.
    pub fn rt_ned_inner(&self, a: &FieldVector, b: &FieldVector) -> f64 {
        self.mat.ned_rt.bilinear(&b.coeffs, &a.coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ctx(n: usize) -> OperatorContext {
        OperatorContext::new(Arc::new(build_box_mesh(n, BoxDomain::unit()).unwrap()), 0, 4).unwrap()
    }

    fn random_ned(c: &OperatorContext, rng: &mut ChaCha8Rng) -> FieldVector {
        let mut v = FieldVector::zeros(&c.complex().nedelec);
        for &i in &c.complex().nedelec.free {
            v.coeffs[i] = rng.gen_range(-1.0..1.0);
        }
        v
    }

    /// Tangentially vanishing field with closed-form curl:
    /// `E = s(x) (sin πy sin πz, 0, 0)`-type products built from `sin πx_i`.
    fn bubble_field() -> VectorField {
        let s = |t: f64| (PI * t).sin();
        let c = |t: f64| PI * (PI * t).cos();
        VectorField::new(move |x, _| Vec3::new(s(x.y) * s(x.z), 0.0, s(x.x) * s(x.y)))
            .with_curl(move |x, _| {
                Vec3::new(
                    s(x.x) * c(x.y),
                    s(x.y) * c(x.z) - c(x.x) * s(x.y),
                    -c(x.y) * s(x.z),
                )
            })
    }

    #[test]
    fn q_h_is_identity_on_discrete_fields_and_idempotent() {
        let c = ctx(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_ned(&c, &mut rng);
        let q = c.q_h_project(Source::Discrete(&v)).unwrap();
        assert!(q.lin_comb(1.0, &v, -1.0).max_abs() < 1e-12);
        let f = bubble_field();
        let q1 = c.q_h_project(Source::Analytic(&f, 0.0)).unwrap();
        let q2 = c.q_h_project(Source::Discrete(&q1)).unwrap();
        assert!(q1.lin_comb(1.0, &q2, -1.0).max_abs() < 1e-12);
        let z = c.q_h_project(Source::Analytic(&VectorField::zero(), 0.0)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn curl_h_is_adjoint_of_curl() {
        let c = ctx(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut b = FieldVector::zeros(&c.complex().rt);
            for x in b.coeffs.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            let v = random_ned(&c, &mut rng);
            let lhs = c.ned_inner(&c.curl_h(&b).unwrap(), &v);
            let cv = c.complex().curl(&v);
            let rhs = c.mat.mass_rt.bilinear(&b.coeffs, &cv.coeffs);
            assert!((lhs - rhs).abs() <= 1e-12 * c.rt_norm(&b) * c.ned_norm(&v) + 1e-14);
        }
    }

    #[test]
    fn pi_n_is_identity_on_discrete_fields() {
        let c = ctx(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_ned(&c, &mut rng);
        let r = c.pi_n(Source::Discrete(&v)).unwrap();
        assert!(r.field.lin_comb(1.0, &v, -1.0).max_abs() < 1e-11);
        assert!(r.multiplier.max_abs() < 1e-10);
    }

    #[test]
    fn pi_n_of_gradient_is_curl_free() {
        let c = ctx(3);
        let phi_grad = VectorField::new(|x, _| {
            let s = |t: f64| (PI * t).sin();
            let d = |t: f64| PI * (PI * t).cos();
            Vec3::new(d(x.x) * s(x.y) * s(x.z), s(x.x) * d(x.y) * s(x.z), s(x.x) * s(x.y) * d(x.z))
        })
        .with_curl(|_, _| Vec3::zeros());
        let r = c.pi_n(Source::Analytic(&phi_grad, 0.0)).unwrap();
        assert!(c.complex().curl(&r.field).max_abs() < 1e-12);
        assert!(r.multiplier.max_abs() < 1e-10);
    }

    #[test]
    fn commuting_diagram_holds() {
        for n in 1..=3 {
            let c = ctx(n);
            let r = c.commuting_check(&bubble_field(), 0.0).unwrap();
            assert!(r < 1e-10, "n = {n}: {r}");
        }
    }

    #[test]
    fn pi_tilde_is_div_free_and_reproduces_discrete_curls() {
        let c = ctx(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = c.complex().curl(&random_ned(&c, &mut rng));
        let p = c.pi_tilde_rt(Source::Discrete(&b)).unwrap();
        assert!(p.lin_comb(1.0, &b, -1.0).max_abs() < 1e-11);
        let f = bubble_field();
        let q = c.pi_tilde_rt(Source::Analytic(&f, 0.0)).unwrap();
        assert!(c.complex().div_norm(&q) < 1e-13);
    }

    #[test]
    fn vector_potential_inverts_curl_in_both_gauges() {
        let c = ctx(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_ned(&c, &mut rng);
        let b = c.complex().curl(&v);
        for gauge in [Gauge::Coulomb, Gauge::Combinatorial] {
            let a = c.vector_potential(&b, gauge, 1e-12).unwrap();
            let resid = c.complex().curl(&a).lin_comb(1.0, &b, -1.0);
            assert!(resid.max_abs() < 1e-10, "{gauge:?}");
            // helicity does not depend on the gauge
            let h1 = c.rt_ned_inner(&b, &a);
            let h2 = c.rt_ned_inner(&b, &v);
            assert!((h1 - h2).abs() < 1e-10);
        }
        let zero = FieldVector::zeros(&c.complex().rt);
        assert_eq!(c.vector_potential(&zero, Gauge::Coulomb, 1e-12).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn vector_potential_rejects_divergent_fields() {
        let c = ctx(2);
        let mut b = FieldVector::zeros(&c.complex().rt);
        b.coeffs[c.complex().rt.free[0]] = 1.0;
        assert!(matches!(
            c.vector_potential(&b, Gauge::Coulomb, 1e-12),
            Err(Error::NotDivergenceFree(_))
        ));
    }
}
