//! Analytic scalar and vector fields of `(x, t)`, plus a small algebra of
//! separable trigonometric/polynomial terms that is closed under partial
//! differentiation. The algebra supplies exact derivatives for manufactured
//! solutions and test batteries.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::mesh::Vec3;

type VecFn = Arc<dyn Fn(&Vec3, f64) -> Vec3 + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&Vec3, f64) -> f64 + Send + Sync>;

/// Vector-valued function of space and time with optional derived quantities.
#[derive(Clone)]
pub struct VectorField {
    value: VecFn,
    curl: Option<VecFn>,
    div: Option<ScalarFn>,
    dt: Option<VecFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("curl", &self.curl.is_some())
            .field("div", &self.div.is_some())
            .field("dt", &self.dt.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(value: impl Fn(&Vec3, f64) -> Vec3 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            curl: None,
            div: None,
            dt: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| Vec3::zeros())
            .with_curl(|_, _| Vec3::zeros())
            .with_div(|_, _| 0.0)
            .with_dt(|_, _| Vec3::zeros())
    }

    pub fn constant(c: Vec3) -> Self {
        Self::new(move |_, _| c)
            .with_curl(|_, _| Vec3::zeros())
            .with_div(|_, _| 0.0)
            .with_dt(|_, _| Vec3::zeros())
    }

    pub fn with_curl(mut self, curl: impl Fn(&Vec3, f64) -> Vec3 + Send + Sync + 'static) -> Self {
        self.curl = Some(Arc::new(curl));
        self
    }

    pub fn with_div(mut self, div: impl Fn(&Vec3, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.div = Some(Arc::new(div));
        self
    }

    pub fn with_dt(mut self, dt: impl Fn(&Vec3, f64) -> Vec3 + Send + Sync + 'static) -> Self {
        self.dt = Some(Arc::new(dt));
        self
    }

    pub fn eval(&self, x: &Vec3, t: f64) -> Vec3 {
        (self.value)(x, t)
    }

    pub fn curl(&self, x: &Vec3, t: f64) -> Option<Vec3> {
        self.curl.as_ref().map(|c| c(x, t))
    }

    pub fn div(&self, x: &Vec3, t: f64) -> Option<f64> {
        self.div.as_ref().map(|d| d(x, t))
    }

    pub fn dt(&self, x: &Vec3, t: f64) -> Option<Vec3> {
        self.dt.as_ref().map(|d| d(x, t))
    }

    pub fn has_curl(&self) -> bool {
        self.curl.is_some()
    }

    /// The curl as a field in its own right (no further derivatives attached).
    pub fn curl_field(&self) -> Option<VectorField> {
        self.curl.clone().map(|c| Self {
            value: c,
            curl: None,
            div: Some(Arc::new(|_, _| 0.0)),
            dt: None,
        })
    }

    /// Separable field times a time profile, with all derivatives attached.
    pub fn from_separable(v: SepVec, profile: TimeProfile) -> Self {
        let val = Arc::new(CompiledSep::from_vecs([&v]));
        let curl = CompiledSep::from_vecs([&v.curl()]);
        let div = CompiledSep::new([&v.div()]);
        let v2 = val.clone();
        Self::new(move |x, t| vec_at(&val.eval(x), 0) * profile.value(t))
            .with_curl(move |x, t| vec_at(&curl.eval(x), 0) * profile.value(t))
            .with_div(move |x, t| div.eval(x)[0] * profile.value(t))
            .with_dt(move |x, t| vec_at(&v2.eval(x), 0) * profile.derivative(t))
    }
}

/// Scalar function of space and time with an optional gradient.
#[derive(Clone)]
pub struct ScalarField {
    value: ScalarFn,
    grad: Option<VecFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("grad", &self.grad.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(value: impl Fn(&Vec3, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            grad: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0).with_grad(|_, _| Vec3::zeros())
    }

    pub fn with_grad(mut self, grad: impl Fn(&Vec3, f64) -> Vec3 + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn eval(&self, x: &Vec3, t: f64) -> f64 {
        (self.value)(x, t)
    }

    pub fn grad(&self, x: &Vec3, t: f64) -> Option<Vec3> {
        self.grad.as_ref().map(|g| g(x, t))
    }

    pub fn from_separable(s: SepFn, profile: TimeProfile) -> Self {
        let val = CompiledSep::new([&s]);
        let g = CompiledSep::from_vecs([&s.grad()]);
        Self::new(move |x, t| val.eval(x)[0] * profile.value(t))
            .with_grad(move |x, t| vec_at(&g.eval(x), 0) * profile.value(t))
    }

    /// The gradient as a vector field; its curl is identically zero.
    pub fn gradient_field(&self) -> Option<VectorField> {
        self.grad.clone().map(|g| VectorField {
            value: g,
            curl: Some(Arc::new(|_, _| Vec3::zeros())),
            div: None,
            dt: None,
        })
    }
}

/// Scalar time profile multiplying a separable spatial field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `exp(rate * t)`
    Exp(f64),
    /// `cos(omega * t)`
    Cos(f64),
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Exp(r) => (r * t).exp(),
            TimeProfile::Cos(w) => (w * t).cos(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 0.0,
            TimeProfile::Exp(r) => r * (r * t).exp(),
            TimeProfile::Cos(w) => -w * (w * t).sin(),
        }
    }
}

/// One-dimensional factor of a separable term.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    One,
    /// `sin(freq * x + phase)`
    Trig { freq: f64, phase: f64 },
    /// `sum c_k x^k`
    Poly(Vec<f64>),
}

impl Factor {
    pub fn sin(freq: f64) -> Self {
        Factor::Trig { freq, phase: 0.0 }
    }

    pub fn cos(freq: f64) -> Self {
        Factor::Trig {
            freq,
            phase: FRAC_PI_2,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Trig { freq, phase } => (freq * x + phase).sin(),
            Factor::Poly(c) => c.iter().rev().fold(0.0, |acc, ck| acc * x + ck),
        }
    }

    /// Derivative as `scale * factor`.
    fn derivative(&self) -> (f64, Factor) {
        match self {
            Factor::One => (0.0, Factor::One),
            Factor::Trig { freq, phase } => {
                // keep phases in [0, pi) so that equal factors compare equal
                let p = phase + FRAC_PI_2;
                if p >= 2.0 * FRAC_PI_2 {
                    (-freq, Factor::Trig { freq: *freq, phase: p - 2.0 * FRAC_PI_2 })
                } else {
                    (*freq, Factor::Trig { freq: *freq, phase: p })
                }
            }
            Factor::Poly(c) => {
                if c.len() <= 1 {
                    return (0.0, Factor::One);
                }
                let d = c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect();
                (1.0, Factor::Poly(d))
            }
        }
    }
}

/// `coef * f0(x) f1(y) f2(z)`
#[derive(Clone, Debug, PartialEq)]
pub struct SepTerm {
    pub coef: f64,
    pub factors: [Factor; 3],
}

/// Sum of separable terms; closed under partial differentiation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SepFn {
    pub terms: Vec<SepTerm>,
}

impl SepFn {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn term(coef: f64, factors: [Factor; 3]) -> Self {
        Self {
            terms: vec![SepTerm { coef, factors }],
        }
    }

    /// `sin^3(pi x) sin^3(pi y) sin^3(pi z)` on the unit cube, expanded with
    /// `sin^3 a = (3 sin a - sin 3a) / 4`.
    pub fn sin_cubed_bubble() -> Self {
        use std::f64::consts::PI;
        let one_d = [(0.75, Factor::sin(PI)), (-0.25, Factor::sin(3.0 * PI))];
        let mut terms = Vec::with_capacity(8);
        for (cx, fx) in &one_d {
            for (cy, fy) in &one_d {
                for (cz, fz) in &one_d {
                    terms.push(SepTerm {
                        coef: cx * cy * cz,
                        factors: [fx.clone(), fy.clone(), fz.clone()],
                    });
                }
            }
        }
        Self { terms }
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.factors[0].eval(x.x) * t.factors[1].eval(x.y) * t.factors[2].eval(x.z))
            .sum()
    }

    pub fn partial(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|t| {
                let (s, f) = t.factors[axis].derivative();
                if s == 0.0 {
                    return None;
                }
                let mut factors = t.factors.clone();
                factors[axis] = f;
                Some(SepTerm {
                    coef: t.coef * s,
                    factors,
                })
            })
            .collect();
        Self { terms }.simplify()
    }

    /// Merges terms with identical factors and drops zero terms.
    pub fn simplify(mut self) -> Self {
        let mut out: Vec<SepTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.iter_mut().find(|o| o.factors == t.factors) {
                Some(o) => o.coef += t.coef,
                None => out.push(t),
            }
        }
        out.retain(|t| t.coef != 0.0);
        Self { terms: out }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| SepTerm {
                    coef: t.coef * a,
                    factors: t.factors.clone(),
                })
                .filter(|t| t.coef != 0.0)
                .collect(),
        }
    }

    pub fn add(&self, other: &SepFn) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }.simplify()
    }

    pub fn sub(&self, other: &SepFn) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn grad(&self) -> SepVec {
        SepVec([self.partial(0), self.partial(1), self.partial(2)])
    }
}

/// Vector of separable functions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SepVec(pub [SepFn; 3]);

impl SepVec {
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        Vec3::new(self.0[0].eval(x), self.0[1].eval(x), self.0[2].eval(x))
    }

    pub fn curl(&self) -> SepVec {
        let [a, b, c] = &self.0;
        SepVec([
            c.partial(1).sub(&b.partial(2)),
            a.partial(2).sub(&c.partial(0)),
            b.partial(0).sub(&a.partial(1)),
        ])
    }

    pub fn div(&self) -> SepFn {
        self.0[0]
            .partial(0)
            .add(&self.0[1].partial(1))
            .add(&self.0[2].partial(2))
    }

    pub fn scale(&self, a: f64) -> SepVec {
        SepVec(self.0.clone().map(|f| f.scale(a)))
    }

    pub fn add(&self, other: &SepVec) -> SepVec {
        SepVec([
            self.0[0].add(&other.0[0]),
            self.0[1].add(&other.0[1]),
            self.0[2].add(&other.0[2]),
        ])
    }

    /// `phi * a` for a constant direction `a`.
    pub fn along(phi: &SepFn, a: [f64; 3]) -> SepVec {
        SepVec(a.map(|ai| phi.scale(ai)))
    }

    /// Jacobian `J[i][j] = d v_i / d x_j`.
    pub fn jacobian(&self) -> [[SepFn; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.0[i].partial(j)))
    }
}

/// Several separable functions evaluated together: each distinct
/// one-dimensional factor is computed once per point.
#[derive(Clone, Debug)]
pub struct CompiledSep {
    factors: [Vec<Factor>; 3],
    outputs: Vec<Vec<(f64, [usize; 3])>>,
}

impl CompiledSep {
    pub fn new<'a>(fns: impl IntoIterator<Item = &'a SepFn>) -> Self {
        let mut factors: [Vec<Factor>; 3] = Default::default();
        let mut outputs = Vec::new();
        for f in fns {
            let terms = f
                .terms
                .iter()
                .map(|t| {
                    let idx = std::array::from_fn(|a| {
                        match factors[a].iter().position(|g| *g == t.factors[a]) {
                            Some(i) => i,
                            None => {
                                factors[a].push(t.factors[a].clone());
                                factors[a].len() - 1
                            }
                        }
                    });
                    (t.coef, idx)
                })
                .collect();
            outputs.push(terms);
        }
        Self { factors, outputs }
    }

    pub fn from_vecs<'a>(vs: impl IntoIterator<Item = &'a SepVec>) -> Self {
        Self::new(vs.into_iter().flat_map(|v| v.0.iter()))
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Values of all compiled functions at `x`.
    pub fn eval(&self, x: &Vec3) -> Vec<f64> {
        let vals: [Vec<f64>; 3] = std::array::from_fn(|a| self.factors[a].iter().map(|f| f.eval(x[a])).collect());
        self.outputs
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(c, [i, j, k])| c * vals[0][*i] * vals[1][*j] * vals[2][*k])
                    .sum()
            })
            .collect()
    }
}

/// Reads three consecutive values as a vector.
pub fn vec_at(v: &[f64], offset: usize) -> Vec3 {
    Vec3::new(v[offset], v[offset + 1], v[offset + 2])
}

/// Evaluates a 3x3 array of separable functions.
pub fn eval_jacobian(j: &[[SepFn; 3]; 3], x: &Vec3) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::from_fn(|r, c| j[r][c].eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sin_cubed_expansion_matches() {
        let phi = SepFn::sin_cubed_bubble();
        let x = Vec3::new(0.3, 0.71, 0.45);
        let exact = ((PI * x.x).sin() * (PI * x.y).sin() * (PI * x.z).sin()).powi(3);
        assert!((phi.eval(&x) - exact).abs() < 1e-14);
    }

    #[test]
    fn partials_match_finite_differences() {
        let phi = SepFn::sin_cubed_bubble().add(&SepFn::term(
            2.0,
            [Factor::Poly(vec![0.0, 1.0, -1.0]), Factor::cos(2.0), Factor::One],
        ));
        let x = Vec3::new(0.21, 0.63, 0.37);
        let h = 1e-5;
        for axis in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (phi.eval(&xp) - phi.eval(&xm)) / (2.0 * h);
            assert!((phi.partial(axis).eval(&x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn curl_of_gradient_and_div_of_curl_vanish() {
        let phi = SepFn::sin_cubed_bubble();
        let x = Vec3::new(0.4, 0.2, 0.9);
        assert!(phi.grad().curl().eval(&x).norm() < 1e-12);
        let v = SepVec::along(&phi, [1.0, -2.0, 0.5]);
        assert!(v.curl().div().eval(&x).abs() < 1e-12);
    }

    #[test]
    fn time_profiles_differentiate() {
        for p in [TimeProfile::Exp(-1.0), TimeProfile::Cos(2.0)] {
            let t = 0.3;
            let fd = (p.value(t + 1e-6) - p.value(t - 1e-6)) / 2e-6;
            assert!((fd - p.derivative(t)).abs() < 1e-8);
        }
    }
}
