//! Hard-sphere collision machinery: ν(v), the quadratic tensor
//! T[i][j][k] = ⟨Q(e_i, e_j), e_k⟩, the linear operators 𝓛, 𝔏, 𝒮𝓛 and Γ.
//!
//! The angular kernel is b = |(v−v*)·ω|/(2π), so ∫_{S²} b dω = |v−v*| and the
//! loss part of 𝓛 is exactly ν(v). Integrals run in centre-of-mass
//! coordinates V = (v+v*)/2, g = v−v* with the σ-representation
//! v' = V + |g|σ/2, v*' = V − |g|σ/2, where every factor is polynomial times
//! Gaussian and the rules below are exact for the degrees involved.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Result, VmbError};
use crate::quadrature::{gauss_hermite_phys, gauss_laguerre, SphereRule};
use crate::velocity::{raw_values, TwoSpeciesVector, VelocityBasis};

pub const SYMMETRY_TOL: f64 = 1e-9;
pub const KERNEL_TOL: f64 = 1e-7;

/// ν(|v|) = √(2/π) e^{−r²/2} + (r + 1/r) erf(r/√2).
pub fn collision_frequency(v: [f64; 3]) -> f64 {
    nu_radial((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
}

pub fn nu_radial(r: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    if r < 1e-6 {
        // series: 2√(2/π)(1 + r²/6)
        return 2.0 * c * (1.0 + r * r / 6.0);
    }
    c * (-0.5 * r * r).exp() + (r + 1.0 / r) * libm::erf(r / std::f64::consts::SQRT_2)
}

/// Radial quadrature fallback for ν: (2π)^{-1/2} s⁻¹ ∫₀^∞ r²[e^{−(r−s)²/2} − e^{−(r+s)²/2}] dr.
pub fn nu_quadrature(s: f64) -> f64 {
    let gl = crate::quadrature::gauss_legendre(20).expect("static rule");
    let upper = s + 14.0;
    let panels = 64;
    let h = upper / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let r = a + 0.5 * h * (x + 1.0);
            let f = if s < 1e-8 {
                2.0 * r * r * r * (-0.5 * r * r).exp()
            } else {
                r * r * ((-0.5 * (r - s) * (r - s)).exp() - (-0.5 * (r + s) * (r + s)).exp()) / s
            };
            acc += 0.5 * h * w * f;
        }
    }
    acc / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct CollisionSpec {
    /// Points of the Lebedev rule used for σ (6, 14, 26, 38, 50).
    pub sphere_points: usize,
}

impl Default for CollisionSpec {
    fn default() -> Self {
        CollisionSpec { sphere_points: 26 }
    }
}

/// Centre-of-mass node: (V, g, weight) with the Gaussian and |g| absorbed.
struct ComNodes {
    v_nodes: Vec<([f64; 3], f64)>,
    g_nodes: Vec<([f64; 3], f64)>,
}

/// Rule for ∫∫ M(v)M(v*) |v−v*| F dv dv* exact when F is a polynomial of
/// total degree ≤ `deg` in (v, v*).
fn com_nodes(deg: usize) -> Result<ComNodes> {
    let nv = deg / 2 + 1;
    let gh = gauss_hermite_phys(nv)?;
    let mut v_nodes = Vec::with_capacity(nv * nv * nv);
    for a in 0..nv {
        for b in 0..nv {
            for c in 0..nv {
                v_nodes.push((
                    [gh.nodes[a], gh.nodes[b], gh.nodes[c]],
                    gh.weights[a] * gh.weights[b] * gh.weights[c],
                ));
            }
        }
    }
    // |g| = r = 2√s, r³ e^{−r²/4} dr = 8 s e^{−s} ds; polynomial degree in s ≤ deg/2
    let nr = (deg / 2) / 2 + 1;
    let lag = gauss_laguerre(nr, 1.0)?;
    let dirs = SphereRule::product(deg)?;
    let four_pi = 4.0 * std::f64::consts::PI;
    let pref = (2.0 * std::f64::consts::PI).powi(-3) * 8.0 * four_pi;
    let mut g_nodes = Vec::with_capacity(nr * dirs.points.len());
    for (s, ws) in lag.nodes.iter().zip(&lag.weights) {
        let r = 2.0 * s.sqrt();
        for (d, wd) in dirs.points.iter().zip(&dirs.weights) {
            g_nodes.push(([r * d[0], r * d[1], r * d[2]], pref * ws * wd));
        }
    }
    Ok(ComNodes { v_nodes, g_nodes })
}

/// Assembled collision operators on a velocity basis.
#[derive(Clone, Debug)]
pub struct CollisionOperators {
    pub size: usize,
    pub order: usize,
    pub spec: CollisionSpec,
    /// T[(i·N + j)·N + k] = ⟨Q(e_i, e_j), e_k⟩.
    pub gamma_tensor: Vec<f64>,
    pub l_single: DMatrix<f64>,
    pub frak_l: DMatrix<f64>,
    pub l_two: DMatrix<f64>,
    /// ν at the basis quadrature nodes.
    pub nu_diag: Vec<f64>,
    /// Galerkin matrix of multiplication by ν.
    pub nu_matrix: DMatrix<f64>,
}

/// Raw-Hermite tensor via blocked rank-one accumulation.
fn assemble_raw_tensor(basis: &VelocityBasis, sphere: &SphereRule) -> Result<Vec<f64>> {
    let order = basis.order;
    let n = basis.size;
    let idx = &basis.indices;
    let nodes = com_nodes(3 * order)?;
    let n2 = n * n;
    let chunk_rows = 256;
    let g_nodes = &nodes.g_nodes;
    let partials: Vec<Vec<f64>> = nodes
        .v_nodes
        .par_iter()
        .map(|(vc, wv)| {
            let mut acc = vec![0.0; n2 * n];
            let mut a = vec![0.0; chunk_rows * n2];
            let mut b = vec![0.0; chunk_rows * n];
            let mut pv = vec![0.0; n];
            let mut pw = vec![0.0; n];
            let mut pp = vec![0.0; n];
            let mut rows = 0;
            let flush = |a: &[f64], b: &[f64], rows: usize, acc: &mut [f64]| {
                // acc (n2 × n, row-major) += aᵀ b
                unsafe {
                    matrixmultiply::dgemm(
                        n2, rows, n, 1.0, a.as_ptr(), 1, n2 as isize, b.as_ptr(), n as isize, 1, 1.0,
                        acc.as_mut_ptr(), n as isize, 1,
                    );
                }
            };
            for (g, wg) in g_nodes {
                let v = [vc[0] + 0.5 * g[0], vc[1] + 0.5 * g[1], vc[2] + 0.5 * g[2]];
                let vs = [vc[0] - 0.5 * g[0], vc[1] - 0.5 * g[1], vc[2] - 0.5 * g[2]];
                raw_values(v, order, idx, &mut pv);
                raw_values(vs, order, idx, &mut pw);
                let half_r = 0.5 * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                let brow = &mut b[rows * n..(rows + 1) * n];
                brow.iter_mut().for_each(|x| *x = 0.0);
                for (s, ws) in sphere.points.iter().zip(&sphere.weights) {
                    let vp = [vc[0] + half_r * s[0], vc[1] + half_r * s[1], vc[2] + half_r * s[2]];
                    raw_values(vp, order, idx, &mut pp);
                    for k in 0..n {
                        brow[k] += ws * pp[k];
                    }
                }
                let w = wv * wg;
                for k in 0..n {
                    brow[k] = w * (brow[k] - pv[k]);
                }
                let arow = &mut a[rows * n2..(rows + 1) * n2];
                for i in 0..n {
                    let pi = pv[i];
                    for j in 0..n {
                        arow[i * n + j] = pi * pw[j];
                    }
                }
                rows += 1;
                if rows == chunk_rows {
                    flush(&a, &b, rows, &mut acc);
                    rows = 0;
                }
            }
            if rows > 0 {
                flush(&a, &b, rows, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n2 * n];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    Ok(total)
}

/// T_e[a][b][c] = Σ C_ai C_bj C_ck T_raw[i][j][k].
fn transform_tensor(raw: &[f64], c: &DMatrix<f64>) -> Vec<f64> {
    let n = c.nrows();
    let mode = |src: &[f64], axis: usize| -> Vec<f64> {
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        let (ii, jj, kk) = match axis {
                            0 => (m, j, k),
                            1 => (i, m, k),
                            _ => (i, j, m),
                        };
                        let cm = match axis {
                            0 => c[(i, m)],
                            1 => c[(j, m)],
                            _ => c[(k, m)],
                        };
                        if cm != 0.0 {
                            s += cm * src[(ii * n + jj) * n + kk];
                        }
                    }
                    out[(i * n + j) * n + k] = s;
                }
            }
        }
        out
    };
    let t = mode(raw, 0);
    let t = mode(&t, 1);
    mode(&t, 2)
}

impl CollisionOperators {
    pub fn assemble(basis: &VelocityBasis, spec: CollisionSpec) -> Result<CollisionOperators> {
        let sphere = SphereRule::lebedev(spec.sphere_points)?;
        if sphere.degree < basis.order {
            return Err(VmbError::Config(format!(
                "sphere rule of degree {} cannot integrate basis degree {}; use more sphere points",
                sphere.degree, basis.order
            )));
        }
        let raw = assemble_raw_tensor(basis, &sphere)?;
        let gamma_tensor = transform_tensor(&raw, &basis.coef);
        let ops = Self::from_tensor(basis, spec, gamma_tensor)?;
        ops.validate(basis)?;
        Ok(ops)
    }

    /// Builds the linear operators from an existing tensor (no validation).
    pub fn from_tensor(basis: &VelocityBasis, spec: CollisionSpec, gamma_tensor: Vec<f64>) -> Result<CollisionOperators> {
        let n = basis.size;
        if gamma_tensor.len() != n * n * n {
            return Err(VmbError::Argument("tensor size does not match basis".into()));
        }
        let m = &basis.kernel_single[0];
        // Q(g, √M) and Q(√M, g) as matrices acting on g
        let mut qa = DMatrix::<f64>::zeros(n, n);
        let mut qb = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let t = gamma_tensor[(i * n + j) * n + k];
                    qa[(k, i)] += t * m[j];
                    qb[(k, j)] += t * m[i];
                }
            }
        }
        let l_single = -(&qa + &qb);
        let frak_l = &qb - &qa;
        let l_two = two_species_from(&l_single, &frak_l);
        let nu_diag: Vec<f64> = basis.nodes.iter().map(|v| collision_frequency(*v)).collect();
        let nu_matrix = basis.multiplier_matrix(collision_frequency);
        Ok(CollisionOperators {
            size: n,
            order: basis.order,
            spec,
            gamma_tensor,
            l_single,
            frak_l,
            l_two,
            nu_diag,
            nu_matrix,
        })
    }

    /// Symmetry and kernel checks; failures abort.
    pub fn validate(&self, basis: &VelocityBasis) -> Result<()> {
        for (name, a) in [("L", &self.l_single), ("frakL", &self.frak_l), ("L_two", &self.l_two)] {
            let asym = (a - a.transpose()).abs().max();
            if asym > SYMMETRY_TOL {
                return Err(VmbError::Assembly(format!("{name} not symmetric: {asym:e}")));
            }
        }
        for (i, phi) in basis.kernel_two.iter().enumerate() {
            let r = (&self.l_two * phi).norm();
            if r > KERNEL_TOL {
                return Err(VmbError::Assembly(format!("L_two φ{} residual {r:e}", i + 1)));
            }
        }
        for (i, chi) in basis.kernel_single.iter().enumerate() {
            let r = (&self.l_single * chi).norm();
            if r > KERNEL_TOL {
                return Err(VmbError::Assembly(format!("L χ{} residual {r:e}", i + 1)));
            }
        }
        let r = (&self.frak_l * &basis.kernel_single[0]).norm();
        if r > KERNEL_TOL {
            return Err(VmbError::Assembly(format!("frakL √M residual {r:e}")));
        }
        Ok(())
    }

    /// Q(a, b) coefficient vector.
    pub fn apply_q(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let n = self.size;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let c = a[i] * b[j];
                if c == 0.0 {
                    continue;
                }
                let row = &self.gamma_tensor[(i * n + j) * n..(i * n + j + 1) * n];
                for k in 0..n {
                    out[k] += c * row[k];
                }
            }
        }
        out
    }

    /// Γ(G, H), symmetrized over species.
    pub fn apply_gamma(&self, g: &TwoSpeciesVector, h: &TwoSpeciesVector) -> TwoSpeciesVector {
        let n = self.size;
        let (gp, gm) = g.as_slice().split_at(n);
        let (hp, hm) = h.as_slice().split_at(n);
        let plus = self.apply_q(gp, hp) + self.apply_q(hp, gp) + self.apply_q(gp, hm) + self.apply_q(hp, gm);
        let minus = self.apply_q(gm, hm) + self.apply_q(hm, gm) + self.apply_q(gm, hp) + self.apply_q(hm, gp);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&(plus * 0.5));
        out.rows_mut(n, n).copy_from(&(minus * 0.5));
        out
    }

    /// Γ(G, G) = [Q(G⁺, S), Q(G⁻, S)] with S = G⁺ + G⁻, written into `out`.
    /// `work` must hold N² entries.
    pub fn gamma_diagonal_into(&self, g: &[f64], work: &mut [f64], out: &mut [f64]) {
        let n = self.size;
        let (gp, gm) = g.split_at(n);
        // W[i][k] = Σ_j S_j T[i][j][k]
        work.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let wrow = &mut work[i * n..(i + 1) * n];
            for j in 0..n {
                let s = gp[j] + gm[j];
                let row = &self.gamma_tensor[(i * n + j) * n..(i * n + j + 1) * n];
                for k in 0..n {
                    wrow[k] += s * row[k];
                }
            }
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        let (op, om) = out.split_at_mut(n);
        for i in 0..n {
            let wrow = &work[i * n..(i + 1) * n];
            let (a, b) = (gp[i], gm[i]);
            for k in 0..n {
                op[k] += a * wrow[k];
                om[k] += b * wrow[k];
            }
        }
    }

    /// ⟨νG, G⟩ for a two-species vector.
    pub fn nu_weighted_norm_sq(&self, g: &TwoSpeciesVector) -> f64 {
        let n = self.size;
        let gp = g.rows(0, n);
        let gm = g.rows(n, n);
        (gp.transpose() * &self.nu_matrix * gp)[(0, 0)] + (gm.transpose() * &self.nu_matrix * gm)[(0, 0)]
    }

    /// Block-diagonal ν matrix for two species.
    pub fn nu_matrix_two(&self) -> DMatrix<f64> {
        let n = self.size;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.nu_matrix);
        m.view_mut((n, n), (n, n)).copy_from(&self.nu_matrix);
        m
    }

    /// Smallest eigenvalue of L_two on Ker⊥.
    pub fn spectral_gap(&self, basis: &VelocityBasis) -> f64 {
        let (vals, _) = restricted_spectrum(&self.l_two, &basis.kernel_two);
        vals.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Largest λ with ⟨𝒮𝓛G, G⟩ ≥ λ ‖ℙ⊥G‖²_ν.
    pub fn coercivity_constant(&self, basis: &VelocityBasis) -> f64 {
        let z = complement_basis(&basis.kernel_two);
        let a = z.transpose() * &self.l_two * &z;
        let b = z.transpose() * self.nu_matrix_two() * &z;
        generalized_min_eig(&a, &b)
    }

    /// Hilbert split K = ν − 𝓛 (Galerkin) and its operator norm.
    pub fn compact_part(&self) -> (DMatrix<f64>, f64) {
        let k = &self.nu_matrix - &self.l_single;
        let sym = (&k + k.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let norm = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (k, norm)
    }
}

/// 𝒮𝓛 from 𝓛 and 𝔏: [[𝓛 + ½(𝓛+𝔏), ½(𝓛−𝔏)], [½(𝓛−𝔏), 𝓛 + ½(𝓛+𝔏)]].
pub fn two_species_from(l: &DMatrix<f64>, fl: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let diag = l + (l + fl) * 0.5;
    let off = (l - fl) * 0.5;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&diag);
    m.view_mut((n, n), (n, n)).copy_from(&diag);
    m.view_mut((0, n), (n, n)).copy_from(&off);
    m.view_mut((n, 0), (n, n)).copy_from(&off);
    m
}

/// Orthonormal basis (columns) of the orthogonal complement of span(kernel).
pub fn complement_basis(kernel: &[DVector<f64>]) -> DMatrix<f64> {
    let dim = kernel[0].len();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for k in kernel {
        let mut x = k.clone();
        for _ in 0..2 {
            for e in &cols {
                let p = x.dot(e);
                x -= e * p;
            }
        }
        cols.push(x.normalize());
    }
    let nk = cols.len();
    for i in 0..dim {
        let mut x = DVector::zeros(dim);
        x[i] = 1.0;
        for _ in 0..2 {
            for e in &cols {
                let p = x.dot(e);
                x -= e * p;
            }
        }
        let nx = x.norm();
        if nx > 1e-8 {
            cols.push(x / nx);
        }
        if cols.len() == dim {
            break;
        }
    }
    DMatrix::from_columns(&cols[nk..])
}

/// Eigenvalues/vectors of the symmetric part of A restricted to Ker⊥.
pub fn restricted_spectrum(a: &DMatrix<f64>, kernel: &[DVector<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let z = complement_basis(kernel);
    let r = z.transpose() * a * &z;
    let sym = (&r + r.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), &z * eig.eigenvectors)
}

/// Smallest λ of A x = λ B x with B symmetric positive definite.
pub fn generalized_min_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let bs = (b + b.transpose()) * 0.5;
    let chol = bs.cholesky().expect("weight matrix must be positive definite");
    let linv = chol.l().try_inverse().expect("invertible Cholesky factor");
    let c = &linv * ((a + a.transpose()) * 0.5) * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    SymmetricEigen::new(c).eigenvalues.iter().fold(f64::INFINITY, |m, x| m.min(*x))
}

/// Independent assembly of 𝓛 and 𝔏 through their weak forms
/// ⟨𝓛g, h⟩ = ¼∫∫ b M M* Δg Δh, Δ = p + p* − p' − p*', and
/// ⟨𝔏g, h⟩ = ¼∫∫ b M M* Δ⁻g Δ⁻h, Δ⁻ = p − p* − p' + p*'.
pub fn assemble_linear_direct(basis: &VelocityBasis) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let order = basis.order;
    let n = basis.size;
    let idx = &basis.indices;
    let sphere = SphereRule::for_degree(2 * order)?;
    let nodes = com_nodes(2 * order)?;
    let mut l_raw = DMatrix::<f64>::zeros(n, n);
    let mut f_raw = DMatrix::<f64>::zeros(n, n);
    let mut pv = vec![0.0; n];
    let mut pw = vec![0.0; n];
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; n];
    let chunk = 512;
    let mut xs = DMatrix::<f64>::zeros(chunk, n);
    let mut xd = DMatrix::<f64>::zeros(chunk, n);
    let mut rows = 0;
    let flush = |xs: &DMatrix<f64>, xd: &DMatrix<f64>, rows: usize, l: &mut DMatrix<f64>, f: &mut DMatrix<f64>| {
        let a = xs.rows(0, rows);
        let b = xd.rows(0, rows);
        *l += a.transpose() * a;
        *f += b.transpose() * b;
    };
    for (vc, wv) in &nodes.v_nodes {
        for (g, wg) in &nodes.g_nodes {
            let v = [vc[0] + 0.5 * g[0], vc[1] + 0.5 * g[1], vc[2] + 0.5 * g[2]];
            let vs = [vc[0] - 0.5 * g[0], vc[1] - 0.5 * g[1], vc[2] - 0.5 * g[2]];
            raw_values(v, order, idx, &mut pv);
            raw_values(vs, order, idx, &mut pw);
            let half_r = 0.5 * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            for (s, ws) in sphere.points.iter().zip(&sphere.weights) {
                let vp = [vc[0] + half_r * s[0], vc[1] + half_r * s[1], vc[2] + half_r * s[2]];
                let vq = [vc[0] - half_r * s[0], vc[1] - half_r * s[1], vc[2] - half_r * s[2]];
                raw_values(vp, order, idx, &mut pa);
                raw_values(vq, order, idx, &mut pb);
                let sw = (0.25 * wv * wg * ws).sqrt();
                for k in 0..n {
                    xs[(rows, k)] = sw * (pv[k] + pw[k] - pa[k] - pb[k]);
                    xd[(rows, k)] = sw * (pv[k] - pw[k] - pa[k] + pb[k]);
                }
                rows += 1;
                if rows == chunk {
                    flush(&xs, &xd, rows, &mut l_raw, &mut f_raw);
                    rows = 0;
                }
            }
        }
    }
    if rows > 0 {
        flush(&xs, &xd, rows, &mut l_raw, &mut f_raw);
    }
    let c = &basis.coef;
    Ok((c * l_raw * c.transpose(), c * f_raw * c.transpose()))
}
