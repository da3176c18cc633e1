//! Gauss rules on the interval, the reference triangle and the reference
//! tetrahedron. The simplex rules are collapsed (Duffy) tensor products of
//! Gauss-Legendre rules, so any exactness degree is available.

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_m
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(m, z);
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(m: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Quadrature on the reference tetrahedron `{x, y, z >= 0, x + y + z <= 1}`.
///
/// Points are stored as barycentric coordinates `(l0, l1, l2, l3)` with
/// `l1 = x`, `l2 = y`, `l3 = z`; weights sum to the reference volume 1/6.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn tet(degree: usize) -> Self {
        // the collapsed map adds degree 2 in the first and 1 in the second direction
        let m = (degree + 3).div_ceil(2);
        let (g, gw) = gauss_legendre(m);
        let mut points = Vec::with_capacity(m * m * m);
        let mut weights = Vec::with_capacity(m * m * m);
        for (a, wa) in g.iter().zip(&gw) {
            for (b, wb) in g.iter().zip(&gw) {
                for (c, wc) in g.iter().zip(&gw) {
                    let x = a;
                    let y = b * (1.0 - a);
                    let z = c * (1.0 - a) * (1.0 - b);
                    points.push([1.0 - x - y - z, *x, y, z]);
                    weights.push(wa * wb * wc * (1.0 - a) * (1.0 - a) * (1.0 - b));
                }
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Rule on the reference triangle, barycentric `(l0, l1, l2)`, weights sum to 1/2.
pub fn triangle_rule(degree: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let m = (degree + 2).div_ceil(2);
    let (g, gw) = gauss_legendre(m);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for (a, wa) in g.iter().zip(&gw) {
        for (b, wb) in g.iter().zip(&gw) {
            let x = *a;
            let y = b * (1.0 - a);
            pts.push([1.0 - x - y, x, y]);
            wts.push(wa * wb * (1.0 - a));
        }
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn interval_rule_integrates_monomials() {
        for m in 1..8 {
            let (x, w) = gauss_legendre(m);
            for p in 0..(2 * m) as i32 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                assert!((q - 1.0 / (p + 1) as f64).abs() < 1e-14, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn tet_rule_exact_to_declared_degree() {
        for degree in [2, 4, 6] {
            let r = QuadratureRule::tet(degree);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0 / 6.0).abs() < 1e-15);
            // int x^a y^b z^c = a! b! c! / (a+b+c+3)!
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    for c in 0..=(degree as u32 - a - b) {
                        let q: f64 = r
                            .points
                            .iter()
                            .zip(&r.weights)
                            .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32) * p[3].powi(c as i32))
                            .sum();
                        let exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                        assert!((q - exact).abs() < 1e-15, "deg {degree}: {a} {b} {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_rule_exact() {
        let (p, w) = triangle_rule(5);
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = p
                    .iter()
                    .zip(&w)
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!((q - exact).abs() < 1e-15);
            }
        }
    }
}
