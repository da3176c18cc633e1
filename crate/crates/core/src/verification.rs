//! Manufactured solutions and convergence studies.
//!
//! Every built-in case stores the seven fields in closed form together with
//! the momentum forcing `f` and a Faraday source `g = ∂t B + curl E`. The
//! source is also given through a potential `W` with `curl W = g` and
//! `W × n = 0` on the boundary, which is what the solver consumes.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::Assembler;
use crate::derham::{OperatorContext, Source};
use crate::error::{Error, Result};
use crate::fem_spaces::FieldVector;
use crate::fields::{vec_at, CompiledSep, Factor, ScalarField, SepFn, SepVec, TimeProfile, VectorField};
use crate::mesh::{build_box_mesh, BoxDomain, TetMesh, Vec3};
use crate::quadrature::QuadratureRule;
use crate::solver::{MhdSolver, MhdState, PhysParams, SolverOptions, SourceTerms};

/// Names of the built-in cases.
pub const CASES: [&str; 4] = ["decay-trig", "helical-trig", "static-B", "zero"];

/// Quadrature degree of the error norms (two above the assembly default).
pub const ERROR_QUAD_DEGREE: usize = 6;
pub const ASSEMBLY_QUAD_DEGREE: usize = 4;

#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub name: String,
    pub params: PhysParams,
    pub u: VectorField,
    pub omega: VectorField,
    pub j: VectorField,
    pub e: VectorField,
    pub h: VectorField,
    pub b: VectorField,
    pub p: ScalarField,
    pub f: VectorField,
    pub g: VectorField,
    pub g_potential: Option<VectorField>,
}

/// Largest defects found by [`ManufacturedCase::self_check`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SelfCheckReport {
    /// Closed-form identities `j = curl H`, Ohm's law, `div u = 0`,
    /// `ω = curl u`, `B = μH`, `div B = 0`.
    pub identities: f64,
    /// Momentum forcing against finite differences.
    pub momentum: f64,
    /// Faraday source against finite differences, including `curl W = g`.
    pub faraday: f64,
    /// `u × n`, `B·n`, `P` and `W × n` on the boundary.
    pub boundary: f64,
}

impl SelfCheckReport {
    pub fn max(&self) -> f64 {
        self.identities.max(self.momentum).max(self.faraday).max(self.boundary)
    }
}

/// Tolerance of the self-check, relative to `max(1, |terms|)`.
pub const SELF_CHECK_TOL: f64 = 1e-10;
const FD_STEP: f64 = 2e-3;
const FD8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// Eighth-order central difference of `f` at `s`.
fn fd(f: impl Fn(f64) -> Vec3, s: f64) -> Vec3 {
    let mut acc = Vec3::zeros();
    for (k, c) in FD8.iter().enumerate() {
        let d = (k + 1) as f64 * FD_STEP;
        acc += (f(s + d) - f(s - d)) * *c;
    }
    acc / FD_STEP
}

fn fd_partial(v: &VectorField, x: &Vec3, t: f64, axis: usize) -> Vec3 {
    fd(
        |s| {
            let mut y = *x;
            y[axis] = s;
            v.eval(&y, t)
        },
        x[axis],
    )
}

fn fd_curl(v: &VectorField, x: &Vec3, t: f64) -> Vec3 {
    let d: [Vec3; 3] = std::array::from_fn(|k| fd_partial(v, x, t, k));
    Vec3::new(d[1].z - d[2].y, d[2].x - d[0].z, d[0].y - d[1].x)
}

fn fd_dt(v: &VectorField, x: &Vec3, t: f64) -> Vec3 {
    fd(|s| v.eval(x, s), t)
}

fn fd_grad(p: &ScalarField, x: &Vec3, t: f64) -> Vec3 {
    let w = VectorField::new({
        let p = p.clone();
        move |x, t| Vec3::new(p.eval(x, t), 0.0, 0.0)
    });
    Vec3::new(fd_partial(&w, x, t, 0).x, fd_partial(&w, x, t, 1).x, fd_partial(&w, x, t, 2).x)
}

fn rel(defect: Vec3, terms: &[Vec3]) -> f64 {
    let scale = terms.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    defect.norm() / scale
}

impl ManufacturedCase {
    pub fn sources(&self) -> SourceTerms {
        SourceTerms {
            f: self.f.clone(),
            g_potential: self.g_potential.clone(),
        }
    }

    /// Checks the stored closed forms at `points` random space-time points in
    /// `[0,1]³ × [0, 1]` plus as many boundary points.
    pub fn self_check(&self, seed: u64, points: usize) -> SelfCheckReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let PhysParams { inv_re, inv_rm, sc, mu } = self.params;
        let mut r = SelfCheckReport::default();
        for _ in 0..points {
            let x = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let t: f64 = rng.gen();
            let (u, w, j, e, h, b) = (
                self.u.eval(&x, t),
                self.omega.eval(&x, t),
                self.j.eval(&x, t),
                self.e.eval(&x, t),
                self.h.eval(&x, t),
                self.b.eval(&x, t),
            );
            let curl_h = self.h.curl(&x, t).unwrap_or_else(|| fd_curl(&self.h, &x, t));
            let curl_u = self.u.curl(&x, t).unwrap_or_else(|| fd_curl(&self.u, &x, t));
            let div_u = self.u.div(&x, t).unwrap_or(0.0);
            let div_b = self.b.div(&x, t).unwrap_or(0.0);
            let ids = [
                rel(j - curl_h, &[j, curl_h]),
                rel(j * inv_rm - e - u.cross(&b), &[j * inv_rm, e, u.cross(&b)]),
                div_u.abs(),
                rel(w - curl_u, &[w, curl_u]),
                rel(b - h * mu, &[b]),
                div_b.abs(),
            ];
            r.identities = ids.into_iter().fold(r.identities, f64::max);

            let dtu = fd_dt(&self.u, &x, t);
            let curl_w = fd_curl(&self.omega, &x, t);
            let grad_p = fd_grad(&self.p, &x, t);
            let f = self.f.eval(&x, t);
            let terms = [dtu, u.cross(&w), curl_w * inv_re, j.cross(&b) * sc, grad_p, f];
            let lhs = dtu - u.cross(&w) + curl_w * inv_re - j.cross(&b) * sc + grad_p;
            r.momentum = r.momentum.max(rel(lhs - f, &terms));

            let g = self.g.eval(&x, t);
            let dtb = fd_dt(&self.b, &x, t);
            let curl_e = fd_curl(&self.e, &x, t);
            r.faraday = r.faraday.max(rel(dtb + curl_e - g, &[dtb, curl_e, g]));
            if let Some(wp) = &self.g_potential {
                let cw = fd_curl(wp, &x, t);
                r.faraday = r.faraday.max(rel(cw - g, &[cw, g]));
            }

            // a point on a random face of the cube
            let axis = rng.gen_range(0..3);
            let side = if rng.gen::<bool>() { 1.0 } else { 0.0 };
            let mut y = x;
            y[axis] = side;
            let mut n = Vec3::zeros();
            n[axis] = 1.0;
            let mut bd = [
                self.u.eval(&y, t).cross(&n).norm(),
                self.b.eval(&y, t).dot(&n).abs(),
                self.p.eval(&y, t).abs(),
                0.0,
            ];
            if let Some(wp) = &self.g_potential {
                bd[3] = wp.eval(&y, t).cross(&n).norm();
            }
            r.boundary = bd.into_iter().fold(r.boundary, f64::max);
        }
        r
    }
}

/// Built-in case `name` with parameters `params`, after a passing self-check.
pub fn build_case(name: &str, params: PhysParams) -> Result<ManufacturedCase> {
    params.validate()?;
    let case = match name {
        "decay-trig" => decay_trig(params),
        "helical-trig" => helical_trig(params),
        "static-B" => static_b(params)?,
        "zero" => zero_case(params),
        _ => return Err(Error::UnknownCase(name.to_string())),
    };
    let rep = case.self_check(0x5eed, 100);
    if rep.max() > SELF_CHECK_TOL {
        return Err(Error::SelfCheck {
            case: name.to_string(),
            detail: format!("{rep:?}"),
        });
    }
    Ok(case)
}

fn zero_case(params: PhysParams) -> ManufacturedCase {
    let z = VectorField::zero();
    ManufacturedCase {
        name: "zero".into(),
        params,
        u: z.clone(),
        omega: z.clone(),
        j: z.clone(),
        e: z.clone(),
        h: z.clone(),
        b: z.clone(),
        p: ScalarField::zero().with_grad(|_, _| Vec3::zeros()),
        f: z.clone(),
        g: z,
        g_potential: None,
    }
}

/// `curl(Φ a)` for the `sin³` bubble `Φ`: divergence free, and every
/// component and first derivative vanishes on the boundary of the unit cube.
fn bubble_curl(a: [f64; 3]) -> SepVec {
    SepVec::along(&SepFn::sin_cubed_bubble(), a).curl()
}

fn sin_product() -> SepFn {
    SepFn::term(1.0, [Factor::sin(PI), Factor::sin(PI), Factor::sin(PI)])
}

/// Shared closed forms of a case with `u = a(t) U(x)`, `B = b(t) B̂(x)`.
struct Separated {
    u: SepVec,
    bs: SepVec,
    tu: TimeProfile,
    tb: TimeProfile,
}

fn assemble_case(name: &str, params: PhysParams, s: Separated, p: ScalarField, b_potential: Option<SepVec>) -> ManufacturedCase {
    let PhysParams { inv_re, inv_rm, sc, mu } = params;
    let Separated { u: us, bs, tu, tb } = s;
    let w_s = us.curl();
    let j_s = bs.curl().scale(1.0 / mu);
    let u = VectorField::from_separable(us.clone(), tu);
    let omega = VectorField::from_separable(w_s.clone(), tu);
    let b = VectorField::from_separable(bs.clone(), tb);
    let h = VectorField::from_separable(bs.scale(1.0 / mu), tb);
    let j = VectorField::from_separable(j_s.clone(), tb);

    // every spatial profile in one bundle, offsets in multiples of three:
    // u, ω, curl ω, B, j, curl j, Ψ, then the Jacobians of u and B
    let psi = b_potential.clone().unwrap_or_default();
    let ju = us.jacobian();
    let jb = bs.jacobian();
    let mut parts: Vec<&SepFn> = Vec::new();
    let (cw, cj) = (w_s.curl(), j_s.curl());
    for v in [&us, &w_s, &cw, &bs, &j_s, &cj, &psi] {
        parts.extend(v.0.iter());
    }
    parts.extend(ju.iter().flatten());
    parts.extend(jb.iter().flatten());
    let bundle = Arc::new(CompiledSep::new(parts));
    let mat = |v: &[f64], off: usize| nalgebra::Matrix3::from_row_slice(&v[off..off + 9]);

    let bd = bundle.clone();
    let e = VectorField::new(move |x, t| {
        let v = bd.eval(x);
        vec_at(&v, 12) * (inv_rm * tb.value(t)) - vec_at(&v, 0).cross(&vec_at(&v, 9)) * (tu.value(t) * tb.value(t))
    });

    let (bd, p2) = (bundle.clone(), p.clone());
    let f = VectorField::new(move |x, t| {
        let v = bd.eval(x);
        let (a, bt) = (tu.value(t), tb.value(t));
        let uv = vec_at(&v, 0);
        uv * tu.derivative(t) - (uv * a).cross(&(vec_at(&v, 3) * a)) + vec_at(&v, 6) * (inv_re * a)
            - (vec_at(&v, 12) * bt).cross(&(vec_at(&v, 9) * bt)) * sc
            + p2.grad(x, t).expect("pressure needs a gradient")
    });

    // g = ∂t B + Rm⁻¹ curl j − curl(u × B), with
    // curl(u × B) = (B·∇)u − (u·∇)B for divergence-free u and B
    let bd = bundle.clone();
    let g = VectorField::new(move |x, t| {
        let v = bd.eval(x);
        let (a, bt) = (tu.value(t), tb.value(t));
        let (uv, bv) = (vec_at(&v, 0), vec_at(&v, 9));
        let adv = (mat(&v, 21) * bv - mat(&v, 30) * uv) * (a * bt);
        bv * tb.derivative(t) + vec_at(&v, 15) * (inv_rm * bt) - adv
    });

    // W = (d/dt of the B profile) Ψ + E, where curl Ψ = B̂
    let g_potential = b_potential.map(|_| {
        let bd = bundle.clone();
        VectorField::new(move |x, t| {
            let v = bd.eval(x);
            let e = vec_at(&v, 12) * (inv_rm * tb.value(t)) - vec_at(&v, 0).cross(&vec_at(&v, 9)) * (tu.value(t) * tb.value(t));
            vec_at(&v, 18) * tb.derivative(t) + e
        })
    });

    ManufacturedCase {
        name: name.into(),
        params,
        u,
        omega,
        j,
        e,
        h,
        b,
        p,
        f,
        g,
        g_potential,
    }
}

/// `sin πx sin πy sin² πz e_z`: its curl has zero normal trace and its curl
/// curl zero tangential trace on the unit cube.
fn low_frequency_potential() -> SepVec {
    let sxy = |fz: Factor, c: f64| SepFn::term(c, [Factor::sin(PI), Factor::sin(PI), fz]);
    SepVec::along(&sxy(Factor::One, 0.5).add(&sxy(Factor::cos(2.0 * PI), -0.5)), [0.0, 0.0, 1.0])
}

/// Decaying vertical jet `u = e^{-t} (0, 0, sin πx sin πy)` and an oscillating
/// horizontal field `B = cos t curl(sin πx sin πy sin² πz e_z)`.
///
/// `u·n` is nonzero only on the lids, where `B` vanishes, so `E × n = 0`; the
/// current has zero tangential trace. Low frequencies keep n = 2 out of the
/// preasymptotic range.
fn decay_trig(params: PhysParams) -> ManufacturedCase {
    let u = SepVec([SepFn::zero(), SepFn::zero(), SepFn::term(1.0, [Factor::sin(PI), Factor::sin(PI), Factor::One])]);
    let psi = low_frequency_potential();
    let p = ScalarField::from_separable(sin_product(), TimeProfile::Exp(-1.0));
    let s = Separated {
        u,
        bs: psi.curl(),
        tu: TimeProfile::Exp(-1.0),
        tb: TimeProfile::Cos(1.0),
    };
    assemble_case("decay-trig", params, s, p, Some(psi))
}

/// Fluid at rest, steady magnetic field, forcing balancing the Lorentz force.
fn static_b(params: PhysParams) -> Result<ManufacturedCase> {
    if params.inv_rm != 0.0 {
        return Err(Error::InvalidParams("the static-B case needs Rm = inf".into()));
    }
    let psi = SepVec::along(&SepFn::sin_cubed_bubble(), [1.0, 1.0, 0.0]);
    let s = Separated {
        u: SepVec::default(),
        bs: psi.curl(),
        tu: TimeProfile::Constant,
        tb: TimeProfile::Constant,
    };
    let p = ScalarField::zero().with_grad(|_, _| Vec3::zeros());
    Ok(assemble_case("static-B", params, s, p, Some(psi)))
}

/// Names of initial-data sets that carry no sources.
pub const INITIAL_DATA: [&str; 1] = ["helical"];

/// Potential `A = Φ e_y + Φ cos(πx) e_z` and velocity profile
/// `curl(Φ(0,1,1)) + curl(A)/2`, `Φ` the `sin³` bubble. The two components
/// of `A` have different shapes, which makes `(A, curl A)` nonzero.
fn helical_profiles() -> (SepVec, SepVec) {
    let phi = SepFn::sin_cubed_bubble();
    // sin³(πx) cos(πx) = sin(2πx)/4 − sin(4πx)/8
    let cube = [(0.75, Factor::sin(PI)), (-0.25, Factor::sin(3.0 * PI))];
    let x_part = [(0.25, Factor::sin(2.0 * PI)), (-0.125, Factor::sin(4.0 * PI))];
    let mut twisted = SepFn::zero();
    for (cx, fx) in &x_part {
        for (cy, fy) in &cube {
            for (cz, fz) in &cube {
                twisted = twisted.add(&SepFn::term(cx * cy * cz, [fx.clone(), fy.clone(), fz.clone()]));
            }
        }
    }
    let a = SepVec::along(&phi, [0.0, 1.0, 0.0]).add(&SepVec::along(&twisted, [0.0, 0.0, 1.0]));
    let u = bubble_curl([0.0, 1.0, 1.0]).add(&a.curl().scale(0.5));
    (a, u)
}

/// Unforced initial data of the `helical` set.
pub fn helical_initial_data() -> (VectorField, VectorField) {
    let (a, u) = helical_profiles();
    (
        VectorField::from_separable(u, TimeProfile::Constant),
        VectorField::from_separable(a.curl(), TimeProfile::Constant),
    )
}

/// The helical profiles with decaying velocity and oscillating field; used
/// where balance laws need nonzero helicities.
fn helical_trig(params: PhysParams) -> ManufacturedCase {
    let (psi, u) = helical_profiles();
    let p = ScalarField::from_separable(sin_product(), TimeProfile::Exp(-1.0));
    let s = Separated {
        u,
        bs: psi.curl(),
        tu: TimeProfile::Exp(-1.0),
        tb: TimeProfile::Cos(1.0),
    };
    assemble_case("helical-trig", params, s, p, Some(psi))
}

/// Initial `(u⁰, B⁰)` and sources of a named case or initial-data set.
pub fn initial_problem(name: &str, params: PhysParams, forced: bool) -> Result<(VectorField, VectorField, SourceTerms)> {
    if name == "helical" {
        params.validate()?;
        let (u, b) = helical_initial_data();
        return Ok((u, b, SourceTerms::none()));
    }
    let case = build_case(name, params)?;
    let src = if forced { case.sources() } else { SourceTerms::none() };
    Ok((case.u, case.b, src))
}

/// Five smooth fields with vanishing tangential trace and closed-form curl.
pub fn commuting_battery() -> Vec<(&'static str, VectorField)> {
    let phi = SepFn::sin_cubed_bubble();
    let grad = sin_product().grad();
    let mixed = SepVec([
        SepFn::term(1.0, [Factor::cos(PI), Factor::sin(PI), Factor::sin(2.0 * PI)]),
        SepFn::term(0.5, [Factor::sin(PI), Factor::cos(2.0 * PI), Factor::sin(PI)]),
        SepFn::term(-1.0, [Factor::sin(2.0 * PI), Factor::sin(PI), Factor::cos(PI)]),
    ]);
    let fields = [
        ("bubble_x", SepVec::along(&phi, [1.0, 0.0, 0.0])),
        ("bubble_diag", SepVec::along(&phi, [1.0, -2.0, 0.5])),
        ("bubble_curl", bubble_curl([0.0, 1.0, 1.0])),
        ("gradient", grad),
        ("mixed_trig", mixed),
    ];
    fields
        .into_iter()
        .map(|(n, v)| (n, VectorField::from_separable(v, TimeProfile::Constant)))
        .collect()
}

/// Default parameters of a case.
pub fn default_params(name: &str) -> PhysParams {
    match name {
        "static-B" => PhysParams::from_inverse(1.0, 0.0, 1.0, 1.0).unwrap(),
        _ => PhysParams::new(1.0, 1.0, 1.0, 1.0).unwrap(),
    }
}

/// Time step rule `dt = factor · h²`, shrunk so that it divides `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtRule {
    pub factor: f64,
    pub power: i32,
}

impl Default for DtRule {
    fn default() -> Self {
        Self { factor: 0.1, power: 2 }
    }
}

impl DtRule {
    /// `(dt, steps)` for mesh size `h` and final time `t_final`.
    pub fn steps(&self, h: f64, t_final: f64) -> (f64, usize) {
        let target = self.factor * h.powi(self.power);
        let steps = (t_final / target - 1e-9).ceil().max(1.0) as usize;
        (t_final / steps as f64, steps)
    }
}

/// One refinement level of an EOC study.
#[derive(Clone, Debug, PartialEq)]
pub struct EocLevel {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub errors: Vec<f64>,
}

/// Errors per level and observed orders between consecutive levels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EocTable {
    pub columns: Vec<String>,
    pub levels: Vec<EocLevel>,
}

impl EocTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            levels: Vec::new(),
        }
    }

    /// `log(e_{l-1}/e_l) / log(h_{l-1}/h_l)` for level `l ≥ 1` and column `c`.
    pub fn rate(&self, l: usize, c: usize) -> f64 {
        let (a, b) = (&self.levels[l - 1], &self.levels[l]);
        (a.errors[c] / b.errors[c]).ln() / (a.h / b.h).ln()
    }

    /// Rates of column `c` between all consecutive levels.
    pub fn rates(&self, c: usize) -> Vec<f64> {
        (1..self.levels.len()).map(|l| self.rate(l, c)).collect()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Smallest rate over all columns and level pairs.
    pub fn min_rate(&self) -> f64 {
        (0..self.columns.len())
            .flat_map(|c| self.rates(c))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest rate over level pairs where at least one error exceeds `floor`;
    /// `None` when every pair sits at round-off.
    pub fn min_resolved_rate(&self, floor: f64) -> Option<f64> {
        let mut m: Option<f64> = None;
        for c in 0..self.columns.len() {
            for l in 1..self.levels.len() {
                // NaN errors count as resolved so that they fail the threshold
                if !(self.levels[l - 1].errors[c] <= floor && self.levels[l].errors[c] <= floor) {
                    let r = self.rate(l, c);
                    m = Some(m.map_or(r, |m| m.min(r)));
                }
            }
        }
        m
    }

    pub fn max_error(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.errors.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut head = vec!["n".to_string(), "h".into(), "dt".into(), "steps".into()];
        for c in &self.columns {
            head.push(c.clone());
            head.push(format!("rate_{c}"));
        }
        writeln!(w, "{}", head.join(","))?;
        for (l, lev) in self.levels.iter().enumerate() {
            let mut row = vec![lev.n.to_string(), format!("{:e}", lev.h), format!("{:e}", lev.dt), lev.steps.to_string()];
            for (c, e) in lev.errors.iter().enumerate() {
                row.push(format!("{e:e}"));
                row.push(if l == 0 { String::new() } else { format!("{:.4}", self.rate(l, c)) });
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "{:>4} {:>10} {:>10} {:>6}", "n", "h", "dt", "steps")?;
        for c in &self.columns {
            write!(w, " {:>14} {:>6}", c, "rate")?;
        }
        writeln!(w)?;
        for (l, lev) in self.levels.iter().enumerate() {
            write!(w, "{:>4} {:>10.4e} {:>10.4e} {:>6}", lev.n, lev.h, lev.dt, lev.steps)?;
            for (c, e) in lev.errors.iter().enumerate() {
                let r = if l == 0 { "-".to_string() } else { format!("{:.3}", self.rate(l, c)) };
                write!(w, " {:>14.6e} {:>6}", e, r)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn context(n: usize, order: usize) -> Result<Arc<OperatorContext>> {
    let mesh = Arc::new(build_box_mesh(n, BoxDomain::unit())?);
    Ok(Arc::new(OperatorContext::new(mesh, order, ASSEMBLY_QUAD_DEGREE)?))
}

fn error_assembler(ctx: &OperatorContext) -> Assembler {
    Assembler::new(ctx.complex().clone(), QuadratureRule::tet(ERROR_QUAD_DEGREE))
}

/// Column names of [`run_convergence`].
pub const CONVERGENCE_COLUMNS: [&str; 4] = ["u_L2", "B_L2", "curl_u_L2L2", "j_L2L2"];

/// Result of one level of the full-scheme study.
#[derive(Clone, Debug)]
pub struct LevelRun {
    pub level: EocLevel,
    pub final_state: MhdState,
    pub max_iterations: usize,
    pub max_div_b: f64,
}

/// Runs the scheme on one mesh and measures the errors of the study.
pub fn run_level(case: &ManufacturedCase, n: usize, order: usize, t_final: f64, rule: DtRule, options: SolverOptions) -> Result<LevelRun> {
    let ctx = context(n, order)?;
    let h = ctx.mesh().h;
    let (dt, steps) = rule.steps(h, t_final);
    let solver = MhdSolver::new(ctx.clone(), case.params, case.sources(), options)?;
    let err = error_assembler(&ctx);
    let curl_u = case.u.curl_field().expect("manufactured velocity has a curl");
    let mut state = solver.init_state(&case.u, &case.b, 0.0)?;
    let (mut acc_curl, mut acc_j) = (0.0, 0.0);
    let mut max_iterations = 0;
    let mut max_div_b = ctx.complex().div_norm(&state.b);
    for _ in 0..steps {
        let tm = state.t + 0.5 * dt;
        let (next, rep) = solver.step(&state, dt)?;
        acc_curl += dt * err.curl_error(&rep.mid.u, &curl_u, tm).powi(2);
        acc_j += dt * err.l2_error_vector(&rep.mid.j, &case.j, tm).powi(2);
        max_iterations = max_iterations.max(rep.iterations);
        max_div_b = max_div_b.max(ctx.complex().div_norm(&next.b));
        state = next;
    }
    let errors = vec![
        err.l2_error_vector(&state.u, &case.u, state.t),
        err.l2_error_vector(&state.b, &case.b, state.t),
        acc_curl.sqrt(),
        acc_j.sqrt(),
    ];
    Ok(LevelRun {
        level: EocLevel { n, h, dt, steps, errors },
        final_state: state,
        max_iterations,
        max_div_b,
    })
}

/// Full-scheme convergence study over mesh levels `levels`.
pub fn run_convergence(case: &ManufacturedCase, order: usize, levels: &[usize], t_final: f64, rule: DtRule, options: SolverOptions) -> Result<EocTable> {
    let mut table = EocTable::new(&CONVERGENCE_COLUMNS);
    for &n in levels {
        table.levels.push(run_level(case, n, order, t_final, rule, options)?.level);
    }
    Ok(table)
}

/// `‖u⁰ − u_h⁰‖` and `‖B⁰ − B_h⁰‖` on an `n³` mesh.
pub fn initial_data_error(case: &ManufacturedCase, n: usize) -> Result<(f64, f64)> {
    let ctx = context(n, 0)?;
    let solver = MhdSolver::new(ctx.clone(), case.params, case.sources(), SolverOptions::default())?;
    let s = solver.init_state(&case.u, &case.b, 0.0)?;
    let err = error_assembler(&ctx);
    Ok((err.l2_error_vector(&s.u, &case.u, 0.0), err.l2_error_vector(&s.b, &case.b, 0.0)))
}

/// Column names of [`run_operator_rates`].
pub const OPERATOR_COLUMNS: [&str; 9] = [
    "lagrange_L2",
    "nedelec_L2",
    "nedelec_curl",
    "rt_L2",
    "pi_n_L2",
    "pi_n_curl",
    "pi_tilde_L2",
    "q_h_L2",
    "curl_h_L2",
];

/// Smooth fields of the operator battery.
pub struct OperatorBattery {
    /// Scalar vanishing on the boundary.
    pub scalar: ScalarField,
    /// Tangentially vanishing field with closed-form curl.
    pub edge_field: VectorField,
    /// `curl` of `potential`: divergence free, vanishing normal trace, curl
    /// with vanishing tangential trace.
    pub face_field: VectorField,
    /// Field whose curl curl is known; `A × n = 0` on the boundary.
    pub potential: VectorField,
    pub curl_curl_potential: VectorField,
}

impl Default for OperatorBattery {
    fn default() -> Self {
        let s = sin_product();
        let scalar = ScalarField::from_separable(s.clone(), TimeProfile::Constant);
        let edge = SepVec([
            SepFn::term(1.0, [Factor::cos(PI), Factor::sin(PI), Factor::sin(2.0 * PI)]),
            SepFn::term(0.5, [Factor::sin(PI), Factor::cos(2.0 * PI), Factor::sin(PI)]),
            SepFn::term(-1.0, [Factor::sin(2.0 * PI), Factor::sin(PI), Factor::cos(PI)]),
        ]);
        let pot = low_frequency_potential();
        let face = pot.curl();
        Self {
            scalar,
            edge_field: VectorField::from_separable(edge, TimeProfile::Constant),
            face_field: VectorField::from_separable(face, TimeProfile::Constant),
            curl_curl_potential: VectorField::from_separable(pot.curl().curl(), TimeProfile::Constant),
            potential: VectorField::from_separable(pot, TimeProfile::Constant),
        }
    }
}

/// Approximation errors of every interpolant and projection on an `n³` mesh.
pub fn operator_errors(n: usize, battery: &OperatorBattery) -> Result<Vec<f64>> {
    let ctx = context(n, 0)?;
    let c = ctx.complex();
    let err = error_assembler(&ctx);
    let ef = &battery.edge_field;
    let curl_ef = ef.curl_field().expect("edge field has a curl");
    let mut lag = c.interpolate_lagrange(&battery.scalar, 0.0);
    c.lagrange.constrain(&mut lag);
    let mut ned = c.interpolate_nedelec(ef, 0.0);
    c.nedelec.constrain(&mut ned);
    let mut rt = c.interpolate_rt(&battery.face_field, 0.0);
    c.rt.constrain(&mut rt);
    let pin = ctx.pi_n(Source::Analytic(ef, 0.0))?.field;
    let pit = ctx.pi_tilde_rt(Source::Analytic(&battery.face_field, 0.0))?;
    let q = ctx.q_h_project(Source::Analytic(ef, 0.0))?;
    // the weak curl of Π̃ B is the L² projection of curl B; applied to the
    // plain RT interpolant it would not converge
    let ch = ctx.curl_h(&pit)?;
    Ok(vec![
        err.l2_error_scalar(&lag, &battery.scalar, 0.0),
        err.l2_error_vector(&ned, ef, 0.0),
        err.curl_error(&ned, &curl_ef, 0.0),
        err.l2_error_vector(&rt, &battery.face_field, 0.0),
        err.l2_error_vector(&pin, ef, 0.0),
        err.curl_error(&pin, &curl_ef, 0.0),
        err.l2_error_vector(&pit, &battery.face_field, 0.0),
        err.l2_error_vector(&q, ef, 0.0),
        err.l2_error_vector(&ch, &battery.curl_curl_potential, 0.0),
    ])
}

/// Operator rate study over mesh levels.
pub fn run_operator_rates(order: usize, levels: &[usize]) -> Result<EocTable> {
    if order != 0 {
        return Err(Error::UnsupportedOrder(order));
    }
    let battery = OperatorBattery::default();
    let mut table = EocTable::new(&OPERATOR_COLUMNS);
    for &n in levels {
        let h = build_box_mesh(n, BoxDomain::unit())?.h;
        table.levels.push(EocLevel {
            n,
            h,
            dt: 0.0,
            steps: 0,
            errors: operator_errors(n, &battery)?,
        });
    }
    Ok(table)
}

/// Largest `‖P(P x) − P x‖` over the projections `Q_h`, `Π^N`, `Π̃` applied to
/// the battery, and the largest `‖Π^N x_h − x_h‖` for a discrete `x_h`.
pub fn projector_defects(n: usize) -> Result<(f64, f64)> {
    let ctx = context(n, 0)?;
    let b = OperatorBattery::default();
    let ef = &b.edge_field;
    let diff_n = |a: &FieldVector, b: &FieldVector| ctx.ned_norm(&a.lin_comb(1.0, b, -1.0));
    let q1 = ctx.q_h_project(Source::Analytic(ef, 0.0))?;
    let q2 = ctx.q_h_project(Source::Discrete(&q1))?;
    let p1 = ctx.pi_n(Source::Analytic(ef, 0.0))?.field;
    let p2 = ctx.pi_n(Source::Discrete(&p1))?.field;
    let t1 = ctx.pi_tilde_rt(Source::Analytic(&b.face_field, 0.0))?;
    let t2 = ctx.pi_tilde_rt(Source::Discrete(&t1))?;
    let idem = diff_n(&q1, &q2)
        .max(diff_n(&p1, &p2))
        .max(ctx.rt_norm(&t1.lin_comb(1.0, &t2, -1.0)));
    // a discrete field that is not itself a projection of the battery
    let mut d = ctx.complex().interpolate_nedelec(&b.potential, 0.0);
    ctx.complex().nedelec.constrain(&mut d);
    let pd = ctx.pi_n(Source::Discrete(&d))?.field;
    Ok((idem, diff_n(&pd, &d)))
}

/// Reference mesh of the unit cube at level `n` (convenience re-export).
pub fn unit_mesh(n: usize) -> Result<TetMesh> {
    build_box_mesh(n, BoxDomain::unit())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_cases_pass_self_check() {
        for name in CASES {
            let case = build_case(name, default_params(name)).unwrap();
            let rep = case.self_check(7, 100);
            assert!(rep.max() < SELF_CHECK_TOL, "{name}: {rep:?}");
        }
        let ideal = PhysParams::ideal(2.0, 0.5).unwrap();
        assert!(build_case("decay-trig", ideal).is_ok());
        assert!(build_case("static-B", PhysParams::new(1.0, 1.0, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn transcription_errors_are_caught() {
        let mut case = build_case("decay-trig", default_params("decay-trig")).unwrap();
        let f = case.f.clone();
        case.f = VectorField::new(move |x, t| f.eval(x, t) * (1.0 + 1e-6));
        assert!(case.self_check(1, 20).momentum > SELF_CHECK_TOL);
        let mut case = build_case("decay-trig", default_params("decay-trig")).unwrap();
        let g = case.g.clone();
        case.g = VectorField::new(move |x, t| g.eval(x, t) + Vec3::new(1e-6, 0.0, 0.0));
        assert!(case.self_check(1, 20).faraday > SELF_CHECK_TOL);
    }

    #[test]
    fn unknown_case_is_an_error() {
        assert!(matches!(build_case("nope", default_params("zero")), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn dt_rule_divides_final_time() {
        let r = DtRule::default();
        let counts: Vec<usize> = [2, 4, 8].iter().map(|&n| r.steps(3f64.sqrt() / n as f64, 0.1).1).collect();
        assert_eq!(counts, vec![2, 6, 22]);
        let (dt, k) = r.steps(3f64.sqrt() / 4.0, 0.1);
        assert!((dt * k as f64 - 0.1).abs() < 1e-15);
        assert!(dt <= 0.1 * 3.0 / 16.0);
    }

    #[test]
    fn eoc_table_rates_and_output() {
        let mut t = EocTable::new(&["e"]);
        for (n, e) in [(2, 0.4), (4, 0.2), (8, 0.1)] {
            t.levels.push(EocLevel { n, h: 1.0 / n as f64, dt: 0.0, steps: 0, errors: vec![e] });
        }
        assert!((t.min_rate() - 1.0).abs() < 1e-12);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().next().unwrap().ends_with("e,rate_e"));
        let mut txt = Vec::new();
        t.write_text(&mut txt).unwrap();
        assert!(String::from_utf8(txt).unwrap().contains("1.000"));
    }

    #[test]
    fn zero_case_stays_zero() {
        let case = build_case("zero", default_params("zero")).unwrap();
        let run = run_level(&case, 2, 0, 0.1, DtRule::default(), SolverOptions::default()).unwrap();
        assert!(run.level.errors.iter().all(|&e| e <= 1e-12));
        assert_eq!(run.final_state.max_abs(), 0.0);
    }

    #[test]
    fn projectors_are_idempotent() {
        let (idem, disc) = projector_defects(2).unwrap();
        assert!(idem < 1e-12 && disc < 1e-12, "{idem} {disc}");
    }
}
