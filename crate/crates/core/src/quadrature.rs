//! One-dimensional Gauss rules (Golub-Welsch with Newton polish) and
//! symmetric rules on the unit sphere.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, VmbError};

/// A one-dimensional quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Three-term recurrence of orthonormal polynomials:
/// x p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}.
struct Jacobi {
    a: Vec<f64>,
    b: Vec<f64>, // b[0] unused
    mu0: f64,
}

impl Jacobi {
    /// Orthonormal polynomial values p_0..p_{n-1} at x (normalized measure).
    fn values(&self, x: f64, n: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        if n == 1 {
            return;
        }
        out.push((x - self.a[0]) / self.b[1]);
        for k in 1..n - 1 {
            let next = ((x - self.a[k]) * out[k] - self.b[k] * out[k - 1]) / self.b[k + 1];
            out.push(next);
        }
    }

    /// p_n(x) up to a positive factor, and its derivative.
    fn pn_and_derivative(&self, x: f64, n: usize) -> (f64, f64) {
        let (mut p0, mut p1) = (0.0, 1.0);
        let (mut d0, mut d1) = (0.0, 0.0);
        for k in 0..n {
            let bk = if k == 0 { 0.0 } else { self.b[k] };
            let p2 = ((x - self.a[k]) * p1 - bk * p0) / self.b[k + 1];
            let d2 = (p1 + (x - self.a[k]) * d1 - bk * d0) / self.b[k + 1];
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
        }
        (p1, d1)
    }

    fn rule(&self, n: usize) -> Result<Rule1d> {
        if n == 0 {
            return Err(VmbError::Config("quadrature rule needs at least one node".into()));
        }
        let mut jm = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            jm[(k, k)] = self.a[k];
            if k + 1 < n {
                jm[(k, k + 1)] = self.b[k + 1];
                jm[(k + 1, k)] = self.b[k + 1];
            }
        }
        let eig = SymmetricEigen::new(jm);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = self.pn_and_derivative(*x, n);
                if dp != 0.0 {
                    *x -= p / dp;
                }
            }
        }
        let mut buf = Vec::with_capacity(n);
        let weights = nodes
            .iter()
            .map(|&x| {
                self.values(x, n, &mut buf);
                self.mu0 / buf.iter().map(|p| p * p).sum::<f64>()
            })
            .collect();
        Ok(Rule1d { nodes, weights })
    }
}

/// Gauss-Hermite rule for the normalized weight e^{-x²/2}/√(2π) (weights sum to 1).
pub fn gauss_hermite_prob(n: usize) -> Result<Rule1d> {
    let jac = Jacobi {
        a: vec![0.0; n + 1],
        b: (0..=n + 1).map(|k| (k as f64).sqrt()).collect(),
        mu0: 1.0,
    };
    jac.rule(n)
}

/// Gauss-Hermite rule for the weight e^{-x²} (weights sum to √π).
pub fn gauss_hermite_phys(n: usize) -> Result<Rule1d> {
    let jac = Jacobi {
        a: vec![0.0; n + 1],
        b: (0..=n + 1).map(|k| (k as f64 / 2.0).sqrt()).collect(),
        mu0: std::f64::consts::PI.sqrt(),
    };
    jac.rule(n)
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Result<Rule1d> {
    let jac = Jacobi {
        a: vec![0.0; n + 1],
        b: (0..=n + 1)
            .map(|k| {
                let k = k as f64;
                if k == 0.0 {
                    0.0
                } else {
                    k / (4.0 * k * k - 1.0).sqrt()
                }
            })
            .collect(),
        mu0: 2.0,
    };
    jac.rule(n)
}

/// Generalized Gauss-Laguerre rule for s^α e^{-s} on (0, ∞).
pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<Rule1d> {
    let jac = Jacobi {
        a: (0..=n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect(),
        b: (0..=n + 1)
            .map(|k| {
                let k = k as f64;
                (k * (k + alpha)).sqrt()
            })
            .collect(),
        mu0: libm::tgamma(alpha + 1.0),
    };
    jac.rule(n)
}

/// Rule on the unit sphere; weights sum to 1 (an average over S²).
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Highest total degree integrated exactly.
    pub degree: usize,
}

fn push_orbit(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, base: [f64; 3], w: f64) {
    let mut seen: Vec<[f64; 3]> = Vec::new();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        for s in 0..8 {
            let mut q = [0.0; 3];
            for d in 0..3 {
                let sign = if (s >> d) & 1 == 1 { -1.0 } else { 1.0 };
                q[d] = sign * base[p[d]];
            }
            if !seen.iter().any(|o| o.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-14)) {
                seen.push(q);
            }
        }
    }
    for q in seen {
        points.push(q);
        weights.push(w);
    }
}

impl SphereRule {
    /// Lebedev rules with 6, 14, 26, 38 or 50 points.
    pub fn lebedev(npts: usize) -> Result<SphereRule> {
        let mut p = Vec::new();
        let mut w = Vec::new();
        let s2 = 0.5f64.sqrt();
        let s3 = (1.0f64 / 3.0).sqrt();
        let degree = match npts {
            6 => {
                push_orbit(&mut p, &mut w, [1.0, 0.0, 0.0], 1.0 / 6.0);
                3
            }
            14 => {
                push_orbit(&mut p, &mut w, [1.0, 0.0, 0.0], 1.0 / 15.0);
                push_orbit(&mut p, &mut w, [s3, s3, s3], 3.0 / 40.0);
                5
            }
            26 => {
                push_orbit(&mut p, &mut w, [1.0, 0.0, 0.0], 1.0 / 21.0);
                push_orbit(&mut p, &mut w, [s2, s2, 0.0], 4.0 / 105.0);
                push_orbit(&mut p, &mut w, [s3, s3, s3], 9.0 / 280.0);
                7
            }
            38 => {
                push_orbit(&mut p, &mut w, [1.0, 0.0, 0.0], 1.0 / 105.0);
                push_orbit(&mut p, &mut w, [s3, s3, s3], 9.0 / 280.0);
                let pp: f64 = 0.459_700_843_380_983_1;
                let qq = (1.0 - pp * pp).sqrt();
                push_orbit(&mut p, &mut w, [pp, qq, 0.0], 1.0 / 35.0);
                9
            }
            50 => {
                push_orbit(&mut p, &mut w, [1.0, 0.0, 0.0], 4.0 / 315.0);
                push_orbit(&mut p, &mut w, [s2, s2, 0.0], 64.0 / 2835.0);
                push_orbit(&mut p, &mut w, [s3, s3, s3], 27.0 / 1280.0);
                let l = 1.0 / 11.0f64.sqrt();
                let m = 3.0 / 11.0f64.sqrt();
                push_orbit(&mut p, &mut w, [l, l, m], 14641.0 / 725_760.0);
                11
            }
            _ => {
                return Err(VmbError::Config(format!(
                    "no Lebedev rule with {npts} points (use 6, 14, 26, 38 or 50)"
                )))
            }
        };
        debug_assert_eq!(p.len(), npts);
        Ok(SphereRule { points: p, weights: w, degree })
    }

    /// Gauss-Legendre in cos θ times an even trapezoid in φ; exact to `degree`
    /// and antipodally symmetric.
    pub fn product(degree: usize) -> Result<SphereRule> {
        let nt = degree / 2 + 1;
        let mut nphi = degree + 1;
        if nphi % 2 == 1 {
            nphi += 1;
        }
        let gl = gauss_legendre(nt)?;
        let mut points = Vec::with_capacity(nt * nphi);
        let mut weights = Vec::with_capacity(nt * nphi);
        for (c, wc) in gl.nodes.iter().zip(&gl.weights) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for m in 0..nphi {
                let phi = 2.0 * std::f64::consts::PI * m as f64 / nphi as f64;
                points.push([s * phi.cos(), s * phi.sin(), *c]);
                weights.push(wc / (2.0 * nphi as f64));
            }
        }
        Ok(SphereRule { points, weights, degree })
    }

    /// Smallest built-in rule exact to `degree`.
    pub fn for_degree(degree: usize) -> Result<SphereRule> {
        for n in [6, 14, 26, 38, 50] {
            let r = SphereRule::lebedev(n)?;
            if r.degree >= degree {
                return Ok(r);
            }
        }
        SphereRule::product(degree)
    }
}
