//! Implicit midpoint time stepping of the seven-field MHD system.
//!
//! Per step the unknowns are the end-of-step velocity `u¹` and the midpoint
//! values of `ω, j, E, H, P` on free DOFs. The magnetic field is eliminated
//! with the discrete Faraday law, `B¹ = B⁰ + dt (g − D1 E)`, so `div B` never
//! leaves the kernel of `D2`. After convergence the end-of-step auxiliaries are
//! recomputed from the strong identities and the pressure from a Poisson solve.

use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, OnceLock};

use crate::derham::{OperatorContext, Source};
use crate::error::{Error, Result};
use crate::fem_spaces::{FieldVector, SpaceKind};
use crate::fields::VectorField;
use crate::sparse::{self, LuSymbolic, SparseLu, SparseMatrix};

const CHECKPOINT_MAGIC: &str = "spmhd-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;
const CHORD_CONTRACTION: f64 = 0.25;

/// Physical parameters, stored through the inverse Reynolds numbers so the
/// ideal limit is exactly zero dissipation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysParams {
    pub inv_re: f64,
    pub inv_rm: f64,
    pub sc: f64,
    pub mu: f64,
}

impl PhysParams {
    /// `re` and `rm` may be `f64::INFINITY`.
    pub fn new(re: f64, rm: f64, sc: f64, mu: f64) -> Result<Self> {
        Self::from_inverse(1.0 / re, 1.0 / rm, sc, mu)
    }

    pub fn from_inverse(inv_re: f64, inv_rm: f64, sc: f64, mu: f64) -> Result<Self> {
        let p = Self { inv_re, inv_rm, sc, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn ideal(sc: f64, mu: f64) -> Result<Self> {
        Self::from_inverse(0.0, 0.0, sc, mu)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.inv_re >= 0.0 && self.inv_re.is_finite()) {
            return bad("Re must lie in (0, inf]");
        }
        if !(self.inv_rm >= 0.0 && self.inv_rm.is_finite()) {
            return bad("Rm must lie in (0, inf]");
        }
        if !(self.sc > 0.0 && self.sc.is_finite()) {
            return bad("coupling number must be positive");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("permeability must be positive");
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.inv_re == 0.0 && self.inv_rm == 0.0
    }
}

/// Discrete solution at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct MhdState {
    pub t: f64,
    pub u: FieldVector,
    pub omega: FieldVector,
    pub j: FieldVector,
    pub e: FieldVector,
    pub h: FieldVector,
    pub b: FieldVector,
    pub p: FieldVector,
}

impl MhdState {
    pub fn zero(ctx: &OperatorContext, t: f64) -> Self {
        let c = ctx.complex();
        let ned = FieldVector::zeros(&c.nedelec);
        Self {
            t,
            u: ned.clone(),
            omega: ned.clone(),
            j: ned.clone(),
            e: ned.clone(),
            h: ned,
            b: FieldVector::zeros(&c.rt),
            p: FieldVector::zeros(&c.lagrange),
        }
    }

    pub fn fields(&self) -> [(&'static str, &FieldVector); 7] {
        [
            ("u", &self.u),
            ("omega", &self.omega),
            ("j", &self.j),
            ("E", &self.e),
            ("H", &self.h),
            ("B", &self.b),
            ("P", &self.p),
        ]
    }

    /// Largest coefficient over all fields.
    pub fn max_abs(&self) -> f64 {
        self.fields().iter().map(|(_, f)| f.max_abs()).fold(0.0, f64::max)
    }
}

/// Right-hand sides: momentum forcing and an optional Faraday source given
/// through a potential `W` (tangentially zero on the boundary), `g = curl W`.
#[derive(Clone, Debug)]
pub struct SourceTerms {
    pub f: VectorField,
    pub g_potential: Option<VectorField>,
}

impl SourceTerms {
    pub fn none() -> Self {
        Self {
            f: VectorField::zero(),
            g_potential: None,
        }
    }

    pub fn forcing(f: VectorField) -> Self {
        Self { f, g_potential: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NonlinearScheme {
    Picard,
    Newton,
    /// Picard until the residual drops below `switch`, Newton afterwards.
    PicardNewton { switch: f64 },
    /// Frozen Newton Jacobian, kept across iterations and steps of equal
    /// `dt` and refactored only when the contraction slows.
    Chord,
}

impl Default for NonlinearScheme {
    fn default() -> Self {
        NonlinearScheme::PicardNewton { switch: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub scheme: NonlinearScheme,
    /// Consecutive residual increases that count as divergence.
    pub divergence_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 50,
            scheme: NonlinearScheme::default(),
            divergence_window: 5,
        }
    }
}

/// Midpoint values produced by one step, in full DOF numbering.
#[derive(Clone, Debug)]
pub struct MidpointFields {
    pub u: FieldVector,
    pub omega: FieldVector,
    pub j: FieldVector,
    pub e: FieldVector,
    pub h: FieldVector,
    pub b: FieldVector,
    pub p: FieldVector,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub iterations: usize,
    /// Residual norm before each iteration and after the last one.
    pub residuals: Vec<f64>,
    pub newton_steps: usize,
    pub mid: MidpointFields,
}

/// Residual norms of the strong identities on one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// `‖Rm⁻¹ j − E − Q_h(u × Q_h B)‖`
    pub ohm: f64,
    /// `‖ω − Q_h curl u‖`
    pub vorticity: f64,
    /// `‖μ j − curl_h B‖`
    pub current: f64,
    /// `‖μ H − Q_h B‖`
    pub magnetic: f64,
    /// `max |D2 B|`
    pub divergence: f64,
}

impl ConsistencyReport {
    pub fn max(&self) -> f64 {
        [self.ohm, self.vorticity, self.current, self.magnetic, self.divergence]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Constant operators in full numbering, shared by all steps.
struct Operators {
    m: SparseMatrix,
    a: SparseMatrix,
    g: SparseMatrix,
    gt: SparseMatrix,
    /// `D1ᵀ C_NRᵀ`: `(u, curl φ_i)`
    vort: SparseMatrix,
    /// `D1ᵀ M_R`: `(B, curl φ_i)`
    curl_t: SparseMatrix,
    /// `C_NR`: `(B, φ_i)`
    cnr: SparseMatrix,
    /// `C_NR D1`
    cnr_d1: SparseMatrix,
    d1: SparseMatrix,
}

/// Time stepper for one mesh, parameter set and source.
pub struct MhdSolver {
    pub ctx: Arc<OperatorContext>,
    pub params: PhysParams,
    pub sources: SourceTerms,
    pub options: SolverOptions,
    ops: Operators,
    ned_pos: Vec<usize>,
    lag_pos: Vec<usize>,
    // the Jacobian pattern does not depend on the iterate
    symbolic: OnceLock<LuSymbolic>,
    chord: Mutex<Option<(f64, Arc<SparseLu>)>>,
}

impl std::fmt::Debug for MhdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MhdSolver")
            .field("params", &self.params)
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

fn positions(free: &[usize], n: usize) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        pos[i] = k;
    }
    pos
}

fn avg(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn ned(coeffs: Vec<f64>) -> FieldVector {
    FieldVector {
        kind: SpaceKind::Nedelec,
        coeffs,
    }
}

impl MhdSolver {
    pub fn new(ctx: Arc<OperatorContext>, params: PhysParams, sources: SourceTerms, options: SolverOptions) -> Result<Self> {
        params.validate()?;
        if !(options.tol > 0.0) {
            return Err(Error::InvalidParams("nonlinear tolerance must be positive".into()));
        }
        let mat = &ctx.mat;
        let cnr = mat.ned_rt.clone();
        let ops = Operators {
            m: mat.mass_nedelec.clone(),
            a: mat.curl_curl.clone(),
            g: mat.grad.clone(),
            gt: mat.grad.transpose(),
            vort: mat.d1.transpose().matmul(&cnr.transpose()),
            curl_t: mat.d1.transpose().matmul(&mat.mass_rt),
            cnr_d1: cnr.matmul(&mat.d1),
            cnr,
            d1: mat.d1.clone(),
        };
        let c = ctx.complex();
        let ned_pos = positions(&c.nedelec.free, c.nedelec.ndofs);
        let lag_pos = positions(&c.lagrange.free, c.lagrange.ndofs);
        Ok(Self {
            ctx,
            params,
            sources,
            options,
            ops,
            ned_pos,
            lag_pos,
            symbolic: OnceLock::new(),
            chord: Mutex::new(None),
        })
    }

    fn nn(&self) -> usize {
        self.ctx.complex().nedelec.num_free()
    }

    fn nl(&self) -> usize {
        self.ctx.complex().lagrange.num_free()
    }

    /// Size of the monolithic system.
    pub fn system_size(&self) -> usize {
        5 * self.nn() + self.nl()
    }

    /// Discrete Faraday source `D1 W_I` at time `t` (zero if absent).
    pub fn faraday_source(&self, t: f64) -> FieldVector {
        let c = self.ctx.complex();
        match &self.sources.g_potential {
            Some(w) => {
                let mut wi = c.interpolate_nedelec(w, t);
                c.nedelec.constrain(&mut wi);
                c.curl(&wi)
            }
            None => FieldVector::zeros(&c.rt),
        }
    }

    /// Momentum load `(f(t), φ_i)`.
    pub fn forcing_load(&self, t: f64) -> Vec<f64> {
        self.ctx.asm.load_nedelec(&self.sources.f, t)
    }

    /// Discrete initial data: Nédélec interpolant of `u0` made discretely
    /// divergence free, `Π̃ B0`, and the auxiliaries from the strong identities.
    pub fn init_state(&self, u0: &VectorField, b0: &VectorField, t0: f64) -> Result<MhdState> {
        let c = self.ctx.complex();
        let mut b_int = c.interpolate_rt(b0, t0);
        c.rt.constrain(&mut b_int);
        let div = c.div_norm(&b_int);
        if div > 1e-10 {
            return Err(Error::NotDivergenceFree(div));
        }
        let b = self.ctx.pi_tilde_rt(Source::Analytic(b0, t0))?;
        let mut u = c.interpolate_nedelec(u0, t0);
        c.nedelec.constrain(&mut u);
        let u = self.leray(&u)?;
        self.complete_state(t0, u, b)
    }

    /// Removes the discrete gradient part: `u − D0 φ` with `Gᵀ(u − D0 φ) = 0`.
    pub fn leray(&self, u: &FieldVector) -> Result<FieldVector> {
        let c = self.ctx.complex();
        let rhs = c.lagrange.restrict(&self.ops.gt.mul_vec(&u.coeffs));
        let phi = c.lagrange.extend(&self.ctx.poisson_lu()?.solve(&rhs));
        let grad = self.ctx.mat.d0.mul_vec(&phi);
        Ok(ned(u.coeffs.iter().zip(&grad).map(|(a, b)| a - b).collect()))
    }

    /// State with the given `u`, `B` and everything else from the strong identities.
    pub fn complete_state(&self, t: f64, u: FieldVector, b: FieldVector) -> Result<MhdState> {
        let ctx = &self.ctx;
        let PhysParams { inv_rm, sc, mu, .. } = self.params;
        let omega = ctx.q_h_project(Source::Discrete(&ctx.complex().curl(&u)))?;
        let j = ctx.curl_h(&b)?.scaled(1.0 / mu);
        let h = ctx.q_h_project(Source::Discrete(&b))?.scaled(1.0 / mu);
        let uxh = ctx.solve_mass_nedelec(&ctx.asm.cross_form(&u.coeffs, &h.coeffs))?;
        let e = j.lin_comb(inv_rm, &uxh, -mu);
        let p = self.pressure(t, &u, &omega, &j, &h, sc * mu)?;
        Ok(MhdState { t, u, omega, j, e, h, b, p })
    }

    /// Pressure from the momentum equation tested with discrete gradients.
    fn pressure(&self, t: f64, u: &FieldVector, omega: &FieldVector, j: &FieldVector, h: &FieldVector, lorentz: f64) -> Result<FieldVector> {
        let asm = &self.ctx.asm;
        let mut rhs = self.forcing_load(t);
        sparse::axpy(1.0, &asm.cross_form(&u.coeffs, &omega.coeffs), &mut rhs);
        sparse::axpy(lorentz, &asm.cross_form(&j.coeffs, &h.coeffs), &mut rhs);
        let c = self.ctx.complex();
        let r = c.lagrange.restrict(&self.ctx.mat.d0.transpose().mul_vec(&rhs));
        Ok(FieldVector {
            kind: SpaceKind::Lagrange,
            coeffs: c.lagrange.extend(&self.ctx.poisson_lu()?.solve(&r)),
        })
    }

    fn pack(&self, s: &MhdState) -> Vec<f64> {
        let c = self.ctx.complex();
        let mut x = Vec::with_capacity(self.system_size());
        for f in [&s.u, &s.omega, &s.j, &s.e, &s.h] {
            x.extend(c.nedelec.restrict(&f.coeffs));
        }
        x.extend(c.lagrange.restrict(&s.p.coeffs));
        x
    }

    /// Full-numbering fields `[u1, ω, j, E, H]` and `P` from the packed unknowns.
    fn unpack(&self, x: &[f64]) -> ([Vec<f64>; 5], Vec<f64>) {
        let c = self.ctx.complex();
        let nn = self.nn();
        let f = std::array::from_fn(|k| c.nedelec.extend(&x[k * nn..(k + 1) * nn]));
        (f, c.lagrange.extend(&x[5 * nn..]))
    }

    fn b_mid(&self, b0: &[f64], e: &[f64], g: &[f64], dt: f64) -> Vec<f64> {
        let de = self.ops.d1.mul_vec(e);
        b0.iter()
            .zip(g)
            .zip(&de)
            .map(|((b, g), d)| b + 0.5 * dt * (g - d))
            .collect()
    }

    fn residual(&self, x: &[f64], prev: &MhdState, dt: f64, load: &[f64], g: &[f64]) -> Vec<f64> {
        let PhysParams { inv_re, inv_rm, sc, mu } = self.params;
        let ([u1, w, j, e, h], p) = self.unpack(x);
        let asm = &self.ctx.asm;
        let o = &self.ops;
        let um = avg(&prev.u.coeffs, &u1);
        let bm = self.b_mid(&prev.b.coeffs, &e, g, dt);
        let du: Vec<f64> = u1.iter().zip(&prev.u.coeffs).map(|(a, b)| (a - b) / dt).collect();

        let mut ru = o.m.mul_vec(&du);
        sparse::axpy(-1.0, &asm.cross_form(&um, &w), &mut ru);
        o.a.mul_vec_acc(inv_re, &um, &mut ru);
        sparse::axpy(-sc * mu, &asm.cross_form(&j, &h), &mut ru);
        o.g.mul_vec_acc(1.0, &p, &mut ru);
        sparse::axpy(-1.0, load, &mut ru);

        let mut rw = o.m.mul_vec(&w);
        o.vort.mul_vec_acc(-1.0, &um, &mut rw);

        let mut rj = o.m.mul_vec(&j);
        rj.iter_mut().for_each(|x| *x *= mu);
        o.curl_t.mul_vec_acc(-1.0, &bm, &mut rj);

        let mut re = o.m.mul_vec(&j);
        re.iter_mut().for_each(|x| *x *= inv_rm);
        o.m.mul_vec_acc(-1.0, &e, &mut re);
        sparse::axpy(-mu, &asm.cross_form(&um, &h), &mut re);

        let mut rh = o.cnr.mul_vec(&bm);
        o.m.mul_vec_acc(-mu, &h, &mut rh);

        let rp = o.gt.mul_vec(&u1);

        let c = self.ctx.complex();
        let mut r = Vec::with_capacity(x.len());
        for v in [ru, rw, rj, re, rh] {
            r.extend(c.nedelec.restrict(&v));
        }
        r.extend(c.lagrange.restrict(&rp));
        r
    }

    fn jacobian(&self, x: &[f64], prev: &MhdState, dt: f64, newton: bool) -> SparseMatrix {
        let PhysParams { inv_re, inv_rm, sc, mu } = self.params;
        let ([u1, w, j, _e, h], _) = self.unpack(x);
        let asm = &self.ctx.asm;
        let o = &self.ops;
        let um = avg(&prev.u.coeffs, &u1);
        let nn = self.nn();
        let size = self.system_size();
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        let (np, lp) = (&self.ned_pos, &self.lag_pos);
        let mut push = |bi: usize, bj: usize, m: &SparseMatrix, s: f64, rows: &[usize], cols: &[usize]| {
            for r in 0..m.nrows() {
                let rr = rows[r];
                if rr == usize::MAX {
                    continue;
                }
                for (c, v) in m.row(r) {
                    let cc = cols[c];
                    if cc != usize::MAX {
                        trip.push((bi * nn + rr, bj * nn + cc, s * v));
                    }
                }
            }
        };
        // a cross-product block that Picard drops is kept as explicit zeros
        let lin = if newton { 1.0 } else { 0.0 };
        let k1_w = asm.cross_jacobian_first(&w);
        let k2_um = asm.cross_jacobian_second(&um);
        let k1_h = asm.cross_jacobian_first(&h);
        let k2_j = asm.cross_jacobian_second(&j);

        // momentum
        push(0, 0, &o.m, 1.0 / dt, np, np);
        push(0, 0, &o.a, 0.5 * inv_re, np, np);
        push(0, 0, &k1_w, -0.5 * lin, np, np);
        push(0, 1, &k2_um, -1.0, np, np);
        push(0, 2, &k1_h, -sc * mu, np, np);
        push(0, 4, &k2_j, -sc * mu * lin, np, np);
        push(0, 5, &o.g, 1.0, np, lp);
        // vorticity
        push(1, 0, &o.vort, -0.5, np, np);
        push(1, 1, &o.m, 1.0, np, np);
        // current
        push(2, 2, &o.m, mu, np, np);
        push(2, 3, &o.a, 0.5 * dt, np, np);
        // Ohm's law
        push(3, 0, &k1_h, -0.5 * mu, np, np);
        push(3, 2, &o.m, inv_rm, np, np);
        push(3, 3, &o.m, -1.0, np, np);
        push(3, 4, &k2_um, -mu * lin, np, np);
        // magnetic field
        push(4, 3, &o.cnr_d1, -0.5 * dt, np, np);
        push(4, 4, &o.m, -mu, np, np);
        // incompressibility
        push(5, 0, &o.gt, 1.0, lp, np);
        SparseMatrix::from_triplets(size, size, &trip)
    }

    /// One implicit midpoint step with the configured options.
    pub fn step(&self, state: &MhdState, dt: f64) -> Result<(MhdState, StepReport)> {
        self.solve_nonlinear(state, dt, self.options.tol, self.options.scheme)
    }

    /// Solves the midpoint system to `tol` (Euclidean norm of the residual).
    pub fn solve_nonlinear(&self, prev: &MhdState, dt: f64, tol: f64, scheme: NonlinearScheme) -> Result<(MhdState, StepReport)> {
        if !(dt > 0.0) || !(tol > 0.0) {
            return Err(Error::InvalidParams(format!("need dt > 0 and tol > 0 (dt = {dt}, tol = {tol})")));
        }
        let t_mid = prev.t + 0.5 * dt;
        let load = self.forcing_load(t_mid);
        let g = self.faraday_source(t_mid).coeffs;
        let mut x = self.pack(prev);
        let mut r = self.residual(&x, prev, dt, &load, &g);
        let mut norm = sparse::dot(&r, &r).sqrt();
        let mut history = vec![norm];
        let mut newton_steps = 0;
        let mut increases = 0;
        let mut it = 0;
        let chord = scheme == NonlinearScheme::Chord;
        let mut frozen: Option<Arc<SparseLu>> = None;
        if chord {
            let cache = self.chord.lock().unwrap_or_else(|e| e.into_inner());
            frozen = cache.as_ref().filter(|(d, _)| *d == dt).map(|(_, lu)| lu.clone());
        }
        let mut fresh = false;
        while norm > tol {
            if it == self.options.max_iterations {
                return Err(Error::NonConvergence { iterations: it, residual: norm });
            }
            let newton = match scheme {
                NonlinearScheme::Picard => false,
                NonlinearScheme::Newton | NonlinearScheme::Chord => true,
                NonlinearScheme::PicardNewton { switch } => norm < switch,
            };
            newton_steps += newton as usize;
            if frozen.is_none() || !chord {
                let lu = Arc::new(self.factor_jacobian(&x, prev, dt, newton)?);
                if chord {
                    *self.chord.lock().unwrap_or_else(|e| e.into_inner()) = Some((dt, lu.clone()));
                }
                frozen = Some(lu);
                fresh = true;
            }
            let lu = frozen.as_ref().expect("factorised above");
            let delta = lu.solve(&r);
            let x_old = chord.then(|| x.clone());
            sparse::axpy(-1.0, &delta, &mut x);
            r = self.residual(&x, prev, dt, &load, &g);
            let next = sparse::dot(&r, &r).sqrt();
            it += 1;
            if chord && !fresh && !(next < CHORD_CONTRACTION * norm) {
                // stale Jacobian: undo the update and refactor at the current iterate
                x = x_old.expect("kept for chord steps");
                r = self.residual(&x, prev, dt, &load, &g);
                frozen = None;
                history.push(norm);
                continue;
            }
            if !next.is_finite() {
                return Err(Error::Divergence { iterations: it, residual: next });
            }
            increases = if next > norm { increases + 1 } else { 0 };
            if increases >= self.options.divergence_window {
                return Err(Error::Divergence { iterations: it, residual: next });
            }
            norm = next;
            history.push(norm);
        }

        let ([u1, w, j, e, h], p) = self.unpack(&x);
        let c = self.ctx.complex();
        let de = self.ops.d1.mul_vec(&e);
        let b1: Vec<f64> = prev.b.coeffs.iter().zip(&g).zip(&de).map(|((b, g), d)| b + dt * (g - d)).collect();
        let b1 = FieldVector {
            kind: SpaceKind::RaviartThomas,
            coeffs: b1,
        };
        let mid = MidpointFields {
            u: ned(avg(&prev.u.coeffs, &u1)),
            omega: ned(w),
            j: ned(j),
            e: ned(e),
            h: ned(h),
            b: prev.b.lin_comb(0.5, &b1, 0.5),
            p: FieldVector {
                kind: SpaceKind::Lagrange,
                coeffs: p,
            },
        };
        debug_assert_eq!(mid.b.len(), c.rt.ndofs);
        let next = self.complete_state(prev.t + dt, ned(u1), b1)?;
        Ok((
            next,
            StepReport {
                iterations: it,
                residuals: history,
                newton_steps,
                mid,
            },
        ))
    }

    fn factor_jacobian(&self, x: &[f64], prev: &MhdState, dt: f64, newton: bool) -> Result<SparseLu> {
        let jac = self.jacobian(x, prev, dt, newton);
        let sym = match self.symbolic.get() {
            Some(s) => s,
            None => {
                let s = LuSymbolic::new(&jac)?;
                self.symbolic.get_or_init(|| s)
            }
        };
        SparseLu::with_symbolic(sym, &jac)
    }

    /// Residuals of the strong identities (and the explicit Ohm's law) on `state`.
    pub fn reduced_consistency_check(&self, s: &MhdState) -> Result<ConsistencyReport> {
        let ctx = &self.ctx;
        let PhysParams { inv_rm, mu, .. } = self.params;
        let qb = ctx.q_h_project(Source::Discrete(&s.b))?;
        let uxqb = ctx.solve_mass_nedelec(&ctx.asm.cross_form(&s.u.coeffs, &qb.coeffs))?;
        let ohm = s.j.scaled(inv_rm).lin_comb(1.0, &s.e, -1.0).lin_comb(1.0, &uxqb, -1.0);
        let w = ctx.q_h_project(Source::Discrete(&ctx.complex().curl(&s.u)))?;
        let curl_h = ctx.curl_h(&s.b)?;
        Ok(ConsistencyReport {
            ohm: ctx.ned_norm(&ohm),
            vorticity: ctx.ned_norm(&s.omega.lin_comb(1.0, &w, -1.0)),
            current: ctx.ned_norm(&s.j.lin_comb(mu, &curl_h, -1.0)),
            magnetic: ctx.ned_norm(&s.h.lin_comb(mu, &qb, -1.0)),
            divergence: ctx.complex().div_norm(&s.b),
        })
    }
}

/// Writes `state` and `params` as a versioned text record.
pub fn save_checkpoint<W: Write>(w: &mut W, state: &MhdState, params: &PhysParams) -> Result<()> {
    writeln!(w, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(w, "t {}", state.t)?;
    writeln!(w, "params {} {} {} {}", params.inv_re, params.inv_rm, params.sc, params.mu)?;
    for (name, f) in state.fields() {
        writeln!(w, "field {name} {} {}", kind_tag(f.kind), f.len())?;
        for x in &f.coeffs {
            writeln!(w, "{x}")?;
        }
    }
    Ok(())
}

fn kind_tag(k: SpaceKind) -> &'static str {
    match k {
        SpaceKind::Lagrange => "lagrange",
        SpaceKind::Nedelec => "nedelec",
        SpaceKind::RaviartThomas => "rt",
        SpaceKind::Dg => "dg",
    }
}

fn parse_kind(s: &str) -> Option<SpaceKind> {
    Some(match s {
        "lagrange" => SpaceKind::Lagrange,
        "nedelec" => SpaceKind::Nedelec,
        "rt" => SpaceKind::RaviartThomas,
        "dg" => SpaceKind::Dg,
        _ => return None,
    })
}

/// Reads a record written by [`save_checkpoint`].
pub fn load_checkpoint<R: BufRead>(r: R) -> Result<(MhdState, PhysParams)> {
    let bad = |m: String| Error::Checkpoint(m);
    let mut lines = r.lines();
    let mut next = move || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?
            .map_err(Error::from)
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Checkpoint(format!("bad number `{s}`: {e}")));
    let head = next()?;
    let version = head
        .strip_prefix(CHECKPOINT_MAGIC)
        .map(str::trim)
        .ok_or_else(|| bad(format!("not a checkpoint (header `{head}`)")))?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(bad(format!("unsupported version {version}")));
    }
    let tl = next()?;
    let t = num(tl.strip_prefix("t ").ok_or_else(|| bad("missing time".into()))?)?;
    let pl = next()?;
    let pv: Vec<f64> = pl
        .strip_prefix("params ")
        .ok_or_else(|| bad("missing params".into()))?
        .split_whitespace()
        .map(num)
        .collect::<Result<_>>()?;
    if pv.len() != 4 {
        return Err(bad("params needs four values".into()));
    }
    let params = PhysParams::from_inverse(pv[0], pv[1], pv[2], pv[3])?;
    let mut fields = Vec::with_capacity(7);
    for expect in ["u", "omega", "j", "E", "H", "B", "P"] {
        let hl = next()?;
        let parts: Vec<&str> = hl.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "field" || parts[1] != expect {
            return Err(bad(format!("expected field `{expect}`, found `{hl}`")));
        }
        let kind = parse_kind(parts[2]).ok_or_else(|| bad(format!("unknown space `{}`", parts[2])))?;
        let len: usize = parts[3].parse().map_err(|_| bad(format!("bad length `{}`", parts[3])))?;
        let coeffs = (0..len).map(|_| num(next()?.trim())).collect::<Result<Vec<_>>>()?;
        fields.push(FieldVector { kind, coeffs });
    }
    let mut it = fields.into_iter();
    let mut take = || it.next().unwrap();
    let state = MhdState {
        t,
        u: take(),
        omega: take(),
        j: take(),
        e: take(),
        h: take(),
        b: take(),
        p: take(),
    };
    Ok((state, params))
}
