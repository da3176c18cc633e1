//! Conserved and dissipated functionals of discrete states, and the
//! midpoint-discretised energy and helicity balance laws between two
//! consecutive states.

use std::io::Write;

use crate::derham::{Gauge, OperatorContext, Source};
use crate::error::Result;
use crate::fem_spaces::FieldVector;
use crate::solver::{MhdSolver, MhdState, PhysParams};

/// Tolerance on `max |D2 B|` below which a field counts as divergence free.
pub const DIV_TOL: f64 = 1e-10;

/// `½‖u‖² + (sc/2μ)‖B‖²`
pub fn energy(ctx: &OperatorContext, s: &MhdState, p: &PhysParams) -> f64 {
    kinetic_energy(ctx, s) + magnetic_energy(ctx, s, p)
}

pub fn kinetic_energy(ctx: &OperatorContext, s: &MhdState) -> f64 {
    0.5 * ctx.ned_norm(&s.u).powi(2)
}

pub fn magnetic_energy(ctx: &OperatorContext, s: &MhdState, p: &PhysParams) -> f64 {
    0.5 * p.sc / p.mu * ctx.rt_norm(&s.b).powi(2)
}

/// `(B, A)` with `curl A = B`; refuses fields that are not divergence free.
pub fn magnetic_helicity(ctx: &OperatorContext, b: &FieldVector, gauge: Gauge) -> Result<f64> {
    let a = ctx.vector_potential(b, gauge, DIV_TOL)?;
    Ok(ctx.rt_ned_inner(b, &a))
}

/// `(u, B)`
pub fn cross_helicity(ctx: &OperatorContext, s: &MhdState) -> f64 {
    ctx.rt_ned_inner(&s.b, &s.u)
}

/// `Re⁻¹‖curl u‖²`
pub fn viscous_dissipation(ctx: &OperatorContext, u: &FieldVector, p: &PhysParams) -> f64 {
    p.inv_re * ctx.mat.curl_curl.bilinear(&u.coeffs, &u.coeffs)
}

/// `sc Rm⁻¹‖j‖²`
pub fn ohmic_dissipation(ctx: &OperatorContext, j: &FieldVector, p: &PhysParams) -> f64 {
    p.sc * p.inv_rm * ctx.ned_norm(j).powi(2)
}

/// Left side, right side and residual of one discrete balance law.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Balance {
    /// Finite-difference rate `(X¹ − X⁰)/dt`.
    pub rate: f64,
    /// Midpoint-evaluated right side.
    pub predicted: f64,
    /// Largest magnitude among the terms and the mean of the balanced
    /// quantity (per unit time), used for relative residuals. The quantity
    /// keeps laws whose terms all vanish, such as helicity in the ideal
    /// limit, from dividing round-off by round-off.
    pub scale: f64,
}

impl Balance {
    pub fn residual(&self) -> f64 {
        (self.rate - self.predicted).abs()
    }

    /// Residual relative to `scale` (absolute when it vanishes).
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual() / self.scale
        } else {
            self.residual()
        }
    }
}

fn scale_of(terms: &[f64]) -> f64 {
    terms.iter().fold(0.0, |m, t| m.max(t.abs()))
}

/// Balances of energy, magnetic helicity and cross helicity over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepBalances {
    pub energy: Balance,
    pub magnetic_helicity: Balance,
    pub cross_helicity: Balance,
    /// Midpoint dissipation and work terms entering the energy law.
    pub viscous: f64,
    pub ohmic: f64,
    pub work: f64,
}

/// Evaluates the discrete balance laws between `s0` and `s1 = step(s0, dt)`.
///
/// Every midpoint auxiliary is recovered from `B^{n+½} = (B⁰ + B¹)/2` and
/// `u^{n+½}` through the strong identities, so only the two stored states,
/// the parameters and the sources are needed.
pub fn step_balances(solver: &MhdSolver, s0: &MhdState, s1: &MhdState) -> Result<StepBalances> {
    let ctx = &solver.ctx;
    let p = &solver.params;
    let dt = s1.t - s0.t;
    let tm = s0.t + 0.5 * dt;
    let um = s0.u.lin_comb(0.5, &s1.u, 0.5);
    let bm = s0.b.lin_comb(0.5, &s1.b, 0.5);
    let qb = ctx.q_h_project(Source::Discrete(&bm))?; // μ H½
    let cb = ctx.curl_h(&bm)?; // μ j½
    let load = solver.forcing_load(tm);
    let g = solver.faraday_source(tm);
    let curl_u = ctx.complex().curl(&um);

    let viscous = viscous_dissipation(ctx, &um, p);
    let ohmic = p.sc * p.inv_rm / (p.mu * p.mu) * ctx.ned_norm(&cb).powi(2);
    let work_f = crate::sparse::dot(&load, &um.coeffs);
    let work_g = p.sc / p.mu * ctx.mat.mass_rt.bilinear(&bm.coeffs, &g.coeffs);
    let work = work_f + work_g;
    let (e0, e1) = (energy(ctx, s0, p), energy(ctx, s1, p));
    let de = (e1 - e0) / dt;
    let energy_bal = Balance {
        rate: de + viscous + ohmic,
        predicted: work,
        scale: scale_of(&[de, viscous, ohmic, work_f, work_g, 0.5 * (e0 + e1)]),
    };

    let a0 = ctx.vector_potential(&s0.b, Gauge::Coulomb, DIV_TOL)?;
    let a1 = ctx.vector_potential(&s1.b, Gauge::Coulomb, DIV_TOL)?;
    let am = a0.lin_comb(0.5, &a1, 0.5);
    let (h0, h1) = (ctx.rt_ned_inner(&s0.b, &a0), ctx.rt_ned_inner(&s1.b, &a1));
    let dhm = (h1 - h0) / dt;
    let resist = -2.0 * p.inv_rm / p.mu * ctx.ned_inner(&qb, &cb);
    let g_term = 2.0 * ctx.rt_ned_inner(&g, &am);
    let hm = Balance {
        rate: dhm,
        predicted: resist + g_term,
        scale: scale_of(&[dhm, resist, g_term, 0.5 * (h0 + h1)]),
    };

    let (c0, c1) = (cross_helicity(ctx, s0), cross_helicity(ctx, s1));
    let dhc = (c1 - c0) / dt;
    let visc = -p.inv_re * ctx.mat.curl_curl.bilinear(&um.coeffs, &qb.coeffs);
    let ohm = -p.inv_rm / p.mu * ctx.rt_ned_inner(&curl_u, &cb);
    let force = crate::sparse::dot(&load, &qb.coeffs);
    let g_c = ctx.rt_ned_inner(&g, &um);
    let hc = Balance {
        rate: dhc,
        predicted: visc + ohm + force + g_c,
        scale: scale_of(&[dhc, visc, ohm, force, g_c, 0.5 * (c0 + c1)]),
    };
    Ok(StepBalances {
        energy: energy_bal,
        magnetic_helicity: hm,
        cross_helicity: hc,
        viscous,
        ohmic,
        work,
    })
}

/// `‖curl((A¹ − A⁰)/dt + E^{n+½})‖`, the discrete statement that the
/// potential evolves by the electric field up to a gradient (ideal, `g = 0`).
pub fn potential_evolution_defect(ctx: &OperatorContext, s0: &MhdState, s1: &MhdState, e_mid: &FieldVector) -> Result<f64> {
    let dt = s1.t - s0.t;
    let a0 = ctx.vector_potential(&s0.b, Gauge::Coulomb, DIV_TOL)?;
    let a1 = ctx.vector_potential(&s1.b, Gauge::Coulomb, DIV_TOL)?;
    let v = a1.lin_comb(1.0 / dt, &a0, -1.0 / dt).lin_comb(1.0, e_mid, 1.0);
    Ok(ctx.rt_norm(&ctx.complex().curl(&v)))
}

/// One row of the per-step time series.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConservationReport {
    pub t: f64,
    pub energy: f64,
    pub viscous_dissipation: f64,
    pub ohmic_dissipation: f64,
    pub work: f64,
    pub magnetic_helicity: f64,
    pub cross_helicity: f64,
    pub div_b: f64,
    /// Relative residuals of the three balance laws over the step ending at `t`.
    pub energy_residual: f64,
    pub magnetic_helicity_residual: f64,
    pub cross_helicity_residual: f64,
}

pub const CSV_HEADER: &str = "t,energy,viscous_dissipation,ohmic_dissipation,work,magnetic_helicity,cross_helicity,div_b,energy_residual,magnetic_helicity_residual,cross_helicity_residual";

impl ConservationReport {
    /// Report on a single state; dissipation and work evaluated at that state,
    /// residual columns zero.
    pub fn of_state(solver: &MhdSolver, s: &MhdState) -> Result<Self> {
        let ctx = &solver.ctx;
        let p = &solver.params;
        Ok(Self {
            t: s.t,
            energy: energy(ctx, s, p),
            viscous_dissipation: viscous_dissipation(ctx, &s.u, p),
            ohmic_dissipation: ohmic_dissipation(ctx, &s.j, p),
            work: crate::sparse::dot(&solver.forcing_load(s.t), &s.u.coeffs),
            magnetic_helicity: magnetic_helicity(ctx, &s.b, Gauge::Coulomb)?,
            cross_helicity: cross_helicity(ctx, s),
            div_b: ctx.complex().div_norm(&s.b),
            ..Self::default()
        })
    }

    /// Report on `s1` with the balances of the step `s0 → s1`; dissipation
    /// and work columns hold the midpoint values used in the energy law.
    pub fn of_step(solver: &MhdSolver, s0: &MhdState, s1: &MhdState) -> Result<Self> {
        let bal = step_balances(solver, s0, s1)?;
        let mut r = Self::of_state(solver, s1)?;
        r.viscous_dissipation = bal.viscous;
        r.ohmic_dissipation = bal.ohmic;
        r.work = bal.work;
        r.energy_residual = bal.energy.relative();
        r.magnetic_helicity_residual = bal.magnetic_helicity.relative();
        r.cross_helicity_residual = bal.cross_helicity.relative();
        Ok(r)
    }

    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.energy,
            self.viscous_dissipation,
            self.ohmic_dissipation,
            self.work,
            self.magnetic_helicity,
            self.cross_helicity,
            self.div_b,
            self.energy_residual,
            self.magnetic_helicity_residual,
            self.cross_helicity_residual,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn write_csv_row<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let cells: Vec<String> = self.values().iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{SepFn, SepVec, TimeProfile, VectorField};
    use crate::mesh::{build_box_mesh, BoxDomain, Vec3};
    use crate::solver::{SolverOptions, SourceTerms};
    use std::sync::Arc;

    fn ctx(n: usize) -> Arc<OperatorContext> {
        Arc::new(OperatorContext::new(Arc::new(build_box_mesh(n, BoxDomain::unit()).unwrap()), 0, 4).unwrap())
    }

    fn bubble_curl(a: [f64; 3]) -> VectorField {
        VectorField::from_separable(SepVec::along(&SepFn::sin_cubed_bubble(), a).curl(), TimeProfile::Constant)
    }

    #[test]
    fn constant_field_energy_is_one_half() {
        let c = ctx(2);
        let p = PhysParams::ideal(1.0, 1.0).unwrap();
        let mut s = MhdState::zero(&c, 0.0);
        s.b = c.complex().interpolate_rt(&VectorField::constant(Vec3::new(1.0, 0.0, 0.0)), 0.0);
        assert!((energy(&c, &s, &p) - 0.5).abs() < 1e-13);
        assert_eq!(energy(&c, &MhdState::zero(&c, 0.0), &p), 0.0);
    }

    #[test]
    fn kinetic_part_scales_quadratically() {
        let c = ctx(2);
        let mut s = MhdState::zero(&c, 0.0);
        s.u = c.complex().interpolate_nedelec(&bubble_curl([1.0, 2.0, 0.0]), 0.0);
        let k1 = kinetic_energy(&c, &s);
        s.u = s.u.scaled(2.0);
        assert!((kinetic_energy(&c, &s) - 4.0 * k1).abs() < 1e-14 * k1.max(1.0));
    }

    #[test]
    fn perpendicular_fields_have_no_cross_helicity() {
        let c = ctx(2);
        let mut s = MhdState::zero(&c, 0.0);
        s.u = c.complex().interpolate_nedelec(&VectorField::constant(Vec3::new(1.0, 0.0, 0.0)), 0.0);
        s.b = c.complex().interpolate_rt(&VectorField::constant(Vec3::new(0.0, 2.0, 0.0)), 0.0);
        assert!(cross_helicity(&c, &s).abs() < 1e-14);
    }

    #[test]
    fn helicity_of_discrete_curl_and_gauge_independence() {
        let c = ctx(2);
        let v = {
            let mut v = c.complex().interpolate_nedelec(&bubble_curl([0.0, 1.0, 1.0]), 0.0);
            c.complex().nedelec.constrain(&mut v);
            v
        };
        let b = c.complex().curl(&v);
        let h1 = magnetic_helicity(&c, &b, Gauge::Coulomb).unwrap();
        let h2 = magnetic_helicity(&c, &b, Gauge::Combinatorial).unwrap();
        assert!((h1 - h2).abs() < 1e-10);
        assert!((h1 - c.rt_ned_inner(&b, &v)).abs() < 1e-10);
        assert_eq!(magnetic_helicity(&c, &FieldVector::zeros(&c.complex().rt), Gauge::Coulomb).unwrap(), 0.0);
    }

    #[test]
    fn balances_close_on_a_resistive_forced_step() {
        let c = ctx(2);
        let f = bubble_curl([1.0, 0.0, 0.5]);
        let solver = MhdSolver::new(c, PhysParams::new(1.0, 1.0, 1.0, 1.0).unwrap(), SourceTerms::forcing(f), SolverOptions::default()).unwrap();
        let s0 = solver.init_state(&bubble_curl([0.0, 1.0, 0.0]), &bubble_curl([1.0, 0.0, 1.0]), 0.0).unwrap();
        let (s1, _) = solver.step(&s0, 0.02).unwrap();
        let b = step_balances(&solver, &s0, &s1).unwrap();
        assert!(b.energy.relative() < 1e-9, "{:?}", b.energy);
        assert!(b.magnetic_helicity.relative() < 1e-9, "{:?}", b.magnetic_helicity);
        assert!(b.cross_helicity.relative() < 1e-9, "{:?}", b.cross_helicity);
        assert!(b.viscous > 0.0 && b.ohmic > 0.0);
    }

    #[test]
    fn potential_follows_electric_field_in_ideal_runs() {
        let c = ctx(2);
        let solver = MhdSolver::new(c.clone(), PhysParams::ideal(1.0, 1.0).unwrap(), SourceTerms::none(), SolverOptions::default()).unwrap();
        let s0 = solver.init_state(&bubble_curl([0.0, 1.0, 1.0]), &bubble_curl([1.0, 0.0, 1.0]), 0.0).unwrap();
        let (s1, rep) = solver.step(&s0, 0.02).unwrap();
        assert!(potential_evolution_defect(&c, &s0, &s1, &rep.mid.e).unwrap() < 1e-10);
    }

    #[test]
    fn csv_row_has_header_arity() {
        let r = ConservationReport::default();
        let mut buf = Vec::new();
        r.write_csv_row(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(line.trim().split(',').count(), CSV_HEADER.split(',').count());
        assert!(r.is_finite());
    }
}
