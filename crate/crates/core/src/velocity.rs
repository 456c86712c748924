//! Truncated velocity space: Hermite-type basis p(v)√M(v) of total degree
//! ≤ order, tensor Gauss-Hermite quadrature, kernel vectors, projections,
//! the seventeen-moment basis and the Galerkin velocity matrices.
//!
//! Every basis function is stored through its polynomial part p_k, and the
//! quadrature weights carry the Maxwellian, so Σ_q W_q p(v_q) q(v_q) = ∫ p q M dv
//! is the L²_v inner product of p√M and q√M.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VmbError};
use crate::quadrature::gauss_hermite_prob;

/// Two-species coefficient vector of length 2N, species-major: [G⁺ | G⁻].
pub type TwoSpeciesVector = DVector<f64>;

pub const ORTHO_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct QuadSpec {
    pub nodes_per_axis: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { nodes_per_axis: 20 }
    }
}

/// Multi-indices of total degree ≤ order, graded then lexicographic.
pub fn hermite_indices(order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for deg in 0..=order {
        for a in (0..=deg).rev() {
            for b in (0..=deg - a).rev() {
                out.push([a, b, deg - a - b]);
            }
        }
    }
    out
}

pub fn basis_size(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

/// Normalized probabilists' Hermite values h_n = He_n/√(n!) for n ≤ order.
pub fn hermite_1d(x: f64, order: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if order == 0 {
        return;
    }
    out[1] = x;
    for n in 1..order {
        let nf = n as f64;
        out[n + 1] = (x * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
    }
}

/// Raw tensor Hermite polynomial values at v for the given index list.
pub fn raw_values(v: [f64; 3], order: usize, indices: &[[usize; 3]], out: &mut [f64]) {
    let mut h = [[0.0; 16]; 3];
    assert!(order < 16, "basis order too large");
    for d in 0..3 {
        hermite_1d(v[d], order, &mut h[d]);
    }
    for (o, idx) in out.iter_mut().zip(indices) {
        *o = h[0][idx[0]] * h[1][idx[1]] * h[2][idx[2]];
    }
}

/// Derivative d/dv_d of the raw polynomial values.
fn raw_derivative(v: [f64; 3], order: usize, indices: &[[usize; 3]], d: usize, out: &mut [f64]) {
    let mut h = [[0.0; 16]; 3];
    for a in 0..3 {
        hermite_1d(v[a], order, &mut h[a]);
    }
    for (o, idx) in out.iter_mut().zip(indices) {
        let n = idx[d];
        if n == 0 {
            *o = 0.0;
            continue;
        }
        let mut p = (n as f64).sqrt();
        for a in 0..3 {
            p *= if a == d { h[a][n - 1] } else { h[a][idx[a]] };
        }
        *o = p;
    }
}

/// The velocity basis and everything derived from it.
#[derive(Clone, Debug)]
pub struct VelocityBasis {
    pub order: usize,
    pub size: usize,
    pub quad: QuadSpec,
    /// Raw Hermite multi-indices h_j(v) = Π He_{n_d}(v_d)/√(n_d!).
    pub indices: Vec<[usize; 3]>,
    /// e_k = Σ_j coef[(k, j)] h_j √M.
    pub coef: DMatrix<f64>,
    pub nodes: Vec<[f64; 3]>,
    /// Maxwell-absorbed weights.
    pub weights: Vec<f64>,
    pub maxwellian: Vec<f64>,
    /// Polynomial parts of e_k at the nodes (nq × N).
    pub basis_eval: DMatrix<f64>,
    /// χ₁…χ₅ coefficient vectors (χ₅ has norm² 3/2).
    pub kernel_single: Vec<DVector<f64>>,
    /// φ₁…φ₆ coefficient vectors of length 2N (φ₃..₅ norm² 2, φ₆ norm² 3).
    pub kernel_two: Vec<DVector<f64>>,
    /// Galerkin matrices of multiplication by v_d.
    pub vel_mul: [DMatrix<f64>; 3],
    /// Galerkin matrices of ∂_{v_d}.
    pub vel_diff: [DMatrix<f64>; 3],
    /// Galerkin matrices of (v × e_b)·∇_v.
    pub rot: [DMatrix<f64>; 3],
}

/// Moment test functions as coefficient vectors (each times √M).
#[derive(Clone, Debug)]
pub struct MomentVectors {
    pub one: DVector<f64>,
    pub v: [DVector<f64>; 3],
    /// (|v|²/3 − 1)
    pub e3: DVector<f64>,
    /// (|v|²/5 − 1)
    pub e5: DVector<f64>,
    /// Ψ polynomial part (|v|²/2 − 3/2)
    pub psi: DVector<f64>,
}

/// Fluid moments of a two-species vector at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointMoments {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
    pub n: f64,
    pub j: [f64; 3],
    pub w: f64,
}

impl VelocityBasis {
    pub fn build(order: usize, quad: QuadSpec) -> Result<VelocityBasis> {
        if order < 2 {
            return Err(VmbError::Argument(format!("basis order must be ≥ 2, got {order}")));
        }
        if order > 12 {
            return Err(VmbError::Argument(format!("basis order {order} beyond supported 12")));
        }
        let rule = gauss_hermite_prob(quad.nodes_per_axis)?;
        let indices = hermite_indices(order);
        let n = indices.len();
        let nq1 = rule.nodes.len();
        let nq = nq1 * nq1 * nq1;
        let mut nodes = Vec::with_capacity(nq);
        let mut weights = Vec::with_capacity(nq);
        let mut maxwellian = Vec::with_capacity(nq);
        let norm = (2.0 * std::f64::consts::PI).powf(-1.5);
        for a in 0..nq1 {
            for b in 0..nq1 {
                for c in 0..nq1 {
                    let v = [rule.nodes[a], rule.nodes[b], rule.nodes[c]];
                    nodes.push(v);
                    weights.push(rule.weights[a] * rule.weights[b] * rule.weights[c]);
                    let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                    maxwellian.push(norm * (-0.5 * r2).exp());
                }
            }
        }
        let mut raw = DMatrix::<f64>::zeros(nq, n);
        let mut buf = vec![0.0; n];
        for (q, v) in nodes.iter().enumerate() {
            raw_values(*v, order, &indices, &mut buf);
            for k in 0..n {
                raw[(q, k)] = buf[k];
            }
        }
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for q in 0..nq {
            let w = weights[q];
            for i in 0..n {
                let ri = w * raw[(q, i)];
                for j in 0..=i {
                    gram[(i, j)] += ri * raw[(q, j)];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        // Cholesky with explicit pivot check so a degenerate Gram is a hard error.
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = gram[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= ORTHO_TOL {
                return Err(VmbError::Construction(format!(
                    "Gram matrix not positive definite (pivot {d:e} at basis index {j}); \
                     {} nodes per axis cannot resolve degree {order}",
                    quad.nodes_per_axis
                )));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = gram[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        let coef = l
            .try_inverse()
            .ok_or_else(|| VmbError::Construction("singular Cholesky factor".into()))?;
        let basis_eval = &raw * coef.transpose();

        let mut basis = VelocityBasis {
            order,
            size: n,
            quad,
            indices,
            coef,
            nodes,
            weights,
            maxwellian,
            basis_eval,
            kernel_single: Vec::new(),
            kernel_two: Vec::new(),
            vel_mul: [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)],
            vel_diff: [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)],
            rot: [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)],
        };
        let gram_e = basis.gram();
        let dev = (&gram_e - DMatrix::<f64>::identity(n, n)).abs().max();
        if dev > ORTHO_TOL {
            return Err(VmbError::Construction(format!("orthonormalization residual {dev:e}")));
        }
        basis.build_kernels();
        basis.build_velocity_matrices();
        Ok(basis)
    }

    /// Gram matrix of the stored basis under the quadrature inner product.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut weighted = self.basis_eval.clone();
        for (q, w) in self.weights.iter().enumerate() {
            weighted.row_mut(q).scale_mut(*w);
        }
        self.basis_eval.transpose() * weighted
    }

    /// Polynomial parts of e_k at an arbitrary velocity.
    pub fn eval(&self, v: [f64; 3]) -> DVector<f64> {
        let mut raw = vec![0.0; self.size];
        raw_values(v, self.order, &self.indices, &mut raw);
        &self.coef * DVector::from_vec(raw)
    }

    /// Coefficients of f(v)√M(v) (exact when f is a polynomial of degree ≤ order).
    pub fn project_fn<F: Fn([f64; 3]) -> f64>(&self, f: F) -> DVector<f64> {
        let mut c = DVector::zeros(self.size);
        for (q, v) in self.nodes.iter().enumerate() {
            let fw = self.weights[q] * f(*v);
            if fw == 0.0 {
                continue;
            }
            for k in 0..self.size {
                c[k] += fw * self.basis_eval[(q, k)];
            }
        }
        c
    }

    /// ∫ f(v) g(v) M(v) w(v) dv-type Galerkin matrix ⟨e_i, m e_j⟩ for a multiplier m(v).
    pub fn multiplier_matrix<F: Fn([f64; 3]) -> f64>(&self, m: F) -> DMatrix<f64> {
        let mut weighted = self.basis_eval.clone();
        for (q, v) in self.nodes.iter().enumerate() {
            weighted.row_mut(q).scale_mut(self.weights[q] * m(*v));
        }
        self.basis_eval.transpose() * weighted
    }

    fn build_kernels(&mut self) {
        let one = self.project_fn(|_| 1.0);
        let vs: Vec<DVector<f64>> = (0..3).map(|d| self.project_fn(move |v| v[d])).collect();
        let psi = self.project_fn(|v| 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) - 1.5);
        self.kernel_single = vec![one.clone(), vs[0].clone(), vs[1].clone(), vs[2].clone(), psi.clone()];
        let n = self.size;
        let z = DVector::<f64>::zeros(n);
        let two = |a: &DVector<f64>, b: &DVector<f64>| {
            let mut out = DVector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(a);
            out.rows_mut(n, n).copy_from(b);
            out
        };
        self.kernel_two = vec![
            two(&one, &z),
            two(&z, &one),
            two(&vs[0], &vs[0]),
            two(&vs[1], &vs[1]),
            two(&vs[2], &vs[2]),
            two(&psi, &psi),
        ];
    }

    fn build_velocity_matrices(&mut self) {
        let n = self.size;
        let nq = self.nodes.len();
        let mut dpoly: [DMatrix<f64>; 3] = [DMatrix::zeros(nq, n), DMatrix::zeros(nq, n), DMatrix::zeros(nq, n)];
        let mut buf = vec![0.0; n];
        for d in 0..3 {
            for (q, v) in self.nodes.iter().enumerate() {
                raw_derivative(*v, self.order, &self.indices, d, &mut buf);
                for k in 0..n {
                    dpoly[d][(q, k)] = buf[k];
                }
            }
            dpoly[d] = &dpoly[d] * self.coef.transpose();
        }
        let mut wp = self.basis_eval.clone();
        for q in 0..nq {
            wp.row_mut(q).scale_mut(self.weights[q]);
        }
        for d in 0..3 {
            self.vel_mul[d] = self.multiplier_matrix(|v| v[d]);
            // ⟨e_i, ∂_d e_j⟩ with ∂_d(p√M) = (∂_d p − v_d p/2)√M
            self.vel_diff[d] = wp.transpose() * &dpoly[d] - &self.vel_mul[d] * 0.5;
        }
        // (v × e_b)·∇_v acts on p√M as √M Σ ε_{d a b} v_a ∂_d p.
        for b in 0..3 {
            let mut acc = DMatrix::<f64>::zeros(nq, n);
            for d in 0..3 {
                for a in 0..3 {
                    let s = levi_civita(d, a, b);
                    if s == 0.0 {
                        continue;
                    }
                    for q in 0..nq {
                        let va = self.nodes[q][a];
                        for k in 0..n {
                            acc[(q, k)] += s * va * dpoly[d][(q, k)];
                        }
                    }
                }
            }
            self.rot[b] = wp.transpose() * acc;
        }
    }

    pub fn moment_vectors(&self) -> MomentVectors {
        let r2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        MomentVectors {
            one: self.kernel_single[0].clone(),
            v: [self.kernel_single[1].clone(), self.kernel_single[2].clone(), self.kernel_single[3].clone()],
            e3: self.project_fn(move |v| r2(v) / 3.0 - 1.0),
            e5: self.project_fn(move |v| r2(v) / 5.0 - 1.0),
            psi: self.kernel_single[4].clone(),
        }
    }

    fn check_two(&self, g: &DVector<f64>) {
        assert_eq!(g.len(), 2 * self.size, "two-species vector must have length 2N");
    }

    /// ℙG with the ½ weight on φ₃..₅ and ⅓ on φ₆.
    pub fn project_p(&self, g: &TwoSpeciesVector) -> TwoSpeciesVector {
        self.check_two(g);
        let w = [1.0, 1.0, 0.5, 0.5, 0.5, 1.0 / 3.0];
        let mut out = DVector::zeros(g.len());
        for (phi, wi) in self.kernel_two.iter().zip(w) {
            out += phi * (wi * g.dot(phi));
        }
        out
    }

    pub fn project_p_perp(&self, g: &TwoSpeciesVector) -> TwoSpeciesVector {
        g - self.project_p(g)
    }

    /// Π_𝓛 g with weight 2/3 on χ₅.
    pub fn project_pi_l(&self, g: &DVector<f64>) -> DVector<f64> {
        assert_eq!(g.len(), self.size);
        let mut out = DVector::zeros(self.size);
        for (i, chi) in self.kernel_single.iter().enumerate() {
            let wi = if i == 4 { 2.0 / 3.0 } else { 1.0 };
            out += chi * (wi * g.dot(chi));
        }
        out
    }

    /// Matrix of ℙ (2N × 2N).
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let n2 = 2 * self.size;
        let mut m = DMatrix::zeros(n2, n2);
        let w = [1.0, 1.0, 0.5, 0.5, 0.5, 1.0 / 3.0];
        for (phi, wi) in self.kernel_two.iter().zip(w) {
            m += phi * phi.transpose() * wi;
        }
        m
    }

    pub fn pi_l_matrix(&self) -> DMatrix<f64> {
        let n = self.size;
        let mut m = DMatrix::zeros(n, n);
        for (i, chi) in self.kernel_single.iter().enumerate() {
            let wi = if i == 4 { 2.0 / 3.0 } else { 1.0 };
            m += chi * chi.transpose() * wi;
        }
        m
    }

    /// Coefficients of ℙG: (ρ⁺, ρ⁻, u, θ).
    pub fn kernel_coordinates(&self, g: &TwoSpeciesVector) -> (f64, f64, [f64; 3], f64) {
        let k = &self.kernel_two;
        (
            g.dot(&k[0]),
            g.dot(&k[1]),
            [0.5 * g.dot(&k[2]), 0.5 * g.dot(&k[3]), 0.5 * g.dot(&k[4])],
            g.dot(&k[5]) / 3.0,
        )
    }

    /// Fluid moments ρ, u, θ, n, j, w of a two-species vector.
    pub fn extract_moments(&self, g: &TwoSpeciesVector, eps: f64) -> Result<PointMoments> {
        if !(eps > 0.0) {
            return Err(VmbError::Argument(format!("eps must be > 0, got {eps}")));
        }
        self.check_two(g);
        let mv = self.moment_vectors();
        Ok(moments_with(&mv, g.as_slice(), self.size, eps))
    }
}

/// Moments from precomputed test vectors; `g` is [G⁺ | G⁻].
pub fn moments_with(mv: &MomentVectors, g: &[f64], n: usize, eps: f64) -> PointMoments {
    let (gp, gm) = g.split_at(n);
    let dot = |a: &[f64], b: &DVector<f64>| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
    let sum = |b: &DVector<f64>| dot(gp, b) + dot(gm, b);
    let diff = |b: &DVector<f64>| dot(gp, b) - dot(gm, b);
    PointMoments {
        rho: 0.5 * sum(&mv.one),
        u: [0.5 * sum(&mv.v[0]), 0.5 * sum(&mv.v[1]), 0.5 * sum(&mv.v[2])],
        theta: 0.5 * sum(&mv.e3),
        n: diff(&mv.one),
        j: [diff(&mv.v[0]) / eps, diff(&mv.v[1]) / eps, diff(&mv.v[2]) / eps],
        w: diff(&mv.e3) / eps,
    }
}

pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Seventeen-moment basis for two-species vectors.
#[derive(Clone, Debug)]
pub struct SeventeenMomentsBasis {
    /// Columns: β⁺, β⁻, β_i⁺, β_i⁻, β_i, β̃_i, β_jk (j<k) as 2N coefficient vectors.
    pub raw: DMatrix<f64>,
    /// Orthonormal companion basis (columns).
    pub ortho: DMatrix<f64>,
    pub rank: usize,
}

/// Coefficients of P_𝔅 f on the raw seventeen moments.
#[derive(Clone, Debug, PartialEq)]
pub struct SeventeenCoefficients {
    pub f_pm: [f64; 2],
    pub f_i_plus: [f64; 3],
    pub f_i_minus: [f64; 3],
    pub f_i: [f64; 3],
    pub f_tilde_i: [f64; 3],
    pub f_jk: [f64; 3],
}

impl SeventeenMomentsBasis {
    pub fn build(basis: &VelocityBasis) -> Result<SeventeenMomentsBasis> {
        if basis.order < 3 {
            return Err(VmbError::Config(format!(
                "seventeen moments need basis order ≥ 3 (got {})",
                basis.order
            )));
        }
        let n = basis.size;
        let r2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(17);
        let put = |a: Option<&DVector<f64>>, b: Option<&DVector<f64>>| {
            let mut c = DVector::zeros(2 * n);
            if let Some(a) = a {
                c.rows_mut(0, n).copy_from(a);
            }
            if let Some(b) = b {
                c.rows_mut(n, n).copy_from(b);
            }
            c
        };
        let one = basis.project_fn(|_| 1.0);
        cols.push(put(Some(&one), None));
        cols.push(put(None, Some(&one)));
        let vi: Vec<DVector<f64>> = (0..3).map(|i| basis.project_fn(move |v| v[i])).collect();
        for v in &vi {
            cols.push(put(Some(v), None));
        }
        for v in &vi {
            cols.push(put(None, Some(v)));
        }
        for i in 0..3 {
            let c = basis.project_fn(move |v| v[i] * v[i]);
            cols.push(put(Some(&c), Some(&c)));
        }
        for i in 0..3 {
            let c = basis.project_fn(move |v| v[i] * r2(v));
            cols.push(put(Some(&c), Some(&c)));
        }
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            let c = basis.project_fn(move |v| v[j] * v[k]);
            cols.push(put(Some(&c), Some(&c)));
        }
        let raw = DMatrix::from_columns(&cols);
        // modified Gram-Schmidt with rank detection
        let mut ortho_cols: Vec<DVector<f64>> = Vec::new();
        for c in &cols {
            let mut x = c.clone();
            for _ in 0..2 {
                for e in &ortho_cols {
                    let p = x.dot(e);
                    x -= e * p;
                }
            }
            let nx = x.norm();
            if nx / c.norm() > ORTHO_TOL {
                ortho_cols.push(x / nx);
            }
        }
        let rank = ortho_cols.len();
        if rank != 17 {
            return Err(VmbError::Config(format!("seventeen-moment basis has rank {rank}")));
        }
        Ok(SeventeenMomentsBasis { raw, ortho: DMatrix::from_columns(&ortho_cols), rank })
    }

    /// P_𝔅 f and its coefficients on the raw moments.
    pub fn project(&self, f: &DVector<f64>) -> (SeventeenCoefficients, DVector<f64>) {
        let proj = &self.ortho * (self.ortho.transpose() * f);
        let gram = self.raw.transpose() * &self.raw;
        let rhs = self.raw.transpose() * &proj;
        let c = gram.cholesky().expect("rank checked at construction").solve(&rhs);
        let g = |a: usize| [c[a], c[a + 1], c[a + 2]];
        (
            SeventeenCoefficients {
                f_pm: [c[0], c[1]],
                f_i_plus: g(2),
                f_i_minus: g(5),
                f_i: g(8),
                f_tilde_i: g(11),
                f_jk: g(14),
            },
            proj,
        )
    }
}

/// Single-species thirteen-moment analogue (√M, v_i, v_i², v_i|v|², v_jv_k).
pub fn thirteen_moments(basis: &VelocityBasis) -> Result<DMatrix<f64>> {
    if basis.order < 3 {
        return Err(VmbError::Config("thirteen moments need basis order ≥ 3".into()));
    }
    let r2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let mut cols = vec![basis.project_fn(|_| 1.0)];
    for i in 0..3 {
        cols.push(basis.project_fn(move |v| v[i]));
    }
    for i in 0..3 {
        cols.push(basis.project_fn(move |v| v[i] * v[i]));
    }
    for i in 0..3 {
        cols.push(basis.project_fn(move |v| v[i] * r2(v)));
    }
    for (j, k) in [(0, 1), (0, 2), (1, 2)] {
        cols.push(basis.project_fn(move |v| v[j] * v[k]));
    }
    let raw = DMatrix::from_columns(&cols);
    let qr = raw.clone().qr();
    let r = qr.r();
    for i in 0..13 {
        if r[(i, i)].abs() < ORTHO_TOL {
            return Err(VmbError::Config("thirteen-moment basis rank-deficient".into()));
        }
    }
    Ok(qr.q())
}

/// Single-species P onto the thirteen moments: Q Qᵀ f.
pub fn project_thirteen(q: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    q * (q.transpose() * f)
}

/// Exact Hermite-function ladder algebra on an index set of degree ≤ order.
/// ψ_n = h_n √M per axis: ∂ψ_n = (√n ψ_{n−1} − √(n+1) ψ_{n+1})/2 and
/// vψ_n = √(n+1) ψ_{n+1} + √n ψ_{n−1}.
pub mod ladder {
    use super::hermite_indices;
    use nalgebra::DMatrix;

    fn position(indices: &[[usize; 3]], idx: [usize; 3]) -> Option<usize> {
        indices.iter().position(|x| *x == idx)
    }

    /// ∂_{v_d} mapping raw coefficients of degree ≤ from into degree ≤ from+1.
    pub fn derivative(from: usize, d: usize) -> DMatrix<f64> {
        let src = hermite_indices(from);
        let dst = hermite_indices(from + 1);
        let mut m = DMatrix::zeros(dst.len(), src.len());
        for (j, idx) in src.iter().enumerate() {
            let n = idx[d] as f64;
            if idx[d] > 0 {
                let mut lo = *idx;
                lo[d] -= 1;
                m[(position(&dst, lo).unwrap(), j)] += 0.5 * n.sqrt();
            }
            let mut hi = *idx;
            hi[d] += 1;
            m[(position(&dst, hi).unwrap(), j)] -= 0.5 * (n + 1.0).sqrt();
        }
        m
    }

    /// Multiplication by v_d from degree ≤ from into degree ≤ from+1.
    pub fn multiply(from: usize, d: usize) -> DMatrix<f64> {
        let src = hermite_indices(from);
        let dst = hermite_indices(from + 1);
        let mut m = DMatrix::zeros(dst.len(), src.len());
        for (j, idx) in src.iter().enumerate() {
            let n = idx[d] as f64;
            if idx[d] > 0 {
                let mut lo = *idx;
                lo[d] -= 1;
                m[(position(&dst, lo).unwrap(), j)] += n.sqrt();
            }
            let mut hi = *idx;
            hi[d] += 1;
            m[(position(&dst, hi).unwrap(), j)] += (n + 1.0).sqrt();
        }
        m
    }

    /// Embedding of degree ≤ from into degree ≤ to (to ≥ from).
    pub fn embed(from: usize, to: usize) -> DMatrix<f64> {
        let src = hermite_indices(from);
        let dst = hermite_indices(to);
        let mut m = DMatrix::zeros(dst.len(), src.len());
        for (j, idx) in src.iter().enumerate() {
            m[(position(&dst, *idx).unwrap(), j)] = 1.0;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(basis_size(4), 35);
        assert_eq!(hermite_indices(4).len(), 35);
        assert_eq!(hermite_indices(5).len(), 56);
    }

    #[test]
    fn coarse_quadrature_is_rejected() {
        let err = VelocityBasis::build(4, QuadSpec { nodes_per_axis: 4 }).unwrap_err();
        assert!(matches!(err, VmbError::Construction(_)));
    }

    #[test]
    fn order_below_two_rejected() {
        assert!(VelocityBasis::build(1, QuadSpec::default()).is_err());
    }
}
