//! Transport coefficients μ, κ, σ, λ from constrained solves on Ker⊥.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::collision::CollisionOperators;
use crate::error::{Result, VmbError};
use crate::velocity::VelocityBasis;

pub const SOLVE_TOL: f64 = 1e-10;

fn orthonormalize(vs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vs {
        let mut x = v.clone();
        for _ in 0..2 {
            for e in &out {
                let p = x.dot(e);
                x -= e * p;
            }
        }
        let n = x.norm();
        if n > 1e-12 {
            out.push(x / n);
        }
    }
    out
}

fn deflate(x: &mut DVector<f64>, z: &[DVector<f64>]) {
    for e in z {
        let p = x.dot(e);
        x.axpy(-p, e, 1.0);
    }
}

/// Solves A x = rhs with x ⊥ span(kernel) by projected conjugate gradients.
/// Returns the solution and its relative residual.
pub fn solve_on_ker_perp(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    kernel: &[DVector<f64>],
    tol: f64,
) -> Result<(DVector<f64>, f64)> {
    let z = orthonormalize(kernel);
    let bn = rhs.norm();
    for (i, e) in z.iter().enumerate() {
        let c = rhs.dot(e);
        if c.abs() > tol * bn.max(1.0) {
            return Err(VmbError::Infeasible { component: i, value: c });
        }
    }
    let mut b = rhs.clone();
    deflate(&mut b, &z);
    let bn = b.norm();
    if bn == 0.0 {
        return Ok((DVector::zeros(rhs.len()), 0.0));
    }
    let dim = rhs.len();
    let mut x = DVector::zeros(dim);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let max_iter = 20 * dim;
    for it in 0..max_iter {
        let mut ap = a * &p;
        deflate(&mut ap, &z);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(VmbError::Convergence { iterations: it, residual: rr.sqrt() / bn });
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if it % 8 == 7 {
            // refresh the recursive residual to avoid drift
            deflate(&mut x, &z);
            r = &b - a * &x;
            deflate(&mut r, &z);
        }
        let rr_new = r.dot(&r);
        if rr_new.sqrt() <= 0.1 * tol * bn {
            break;
        }
        let beta = rr_new / rr;
        p = &r + &p * beta;
        rr = rr_new;
    }
    deflate(&mut x, &z);
    let mut res = a * &x - &b;
    deflate(&mut res, &z);
    let rel = res.norm() / bn;
    if rel > tol {
        return Err(VmbError::Convergence { iterations: max_iter, residual: rel });
    }
    Ok((x, rel))
}

/// Right-hand sides and solved functions for the transport problems.
#[derive(Clone, Debug)]
pub struct TransportSolutions {
    /// A_ij √M, index 3i + j.
    pub a: Vec<DVector<f64>>,
    pub a_hat: Vec<DVector<f64>>,
    /// B_i √M = v_i(|v|²/2 − 5/2)√M.
    pub b: Vec<DVector<f64>>,
    pub b_hat: Vec<DVector<f64>>,
    /// Φ_i = v_i √M.
    pub phi: Vec<DVector<f64>>,
    pub phi_tilde: Vec<DVector<f64>>,
    /// Ψ = (|v|²/2 − 3/2)√M.
    pub psi: DVector<f64>,
    pub psi_tilde: DVector<f64>,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CoefficientReport {
    pub order: usize,
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub lambda: f64,
    /// Same pairings with an extra Maxwellian weight (diagnostic reading).
    pub mu_extra_weight: f64,
    pub kappa_extra_weight: f64,
    pub sigma_extra_weight: f64,
    pub lambda_extra_weight: f64,
    pub max_solve_residual: f64,
    /// max_{i≠j} |⟨Φ_i, Φ̃_j⟩| / σ
    pub isotropy_offdiag: f64,
    /// max_i |⟨Φ_i, Φ̃_i⟩ − σ/2| / σ
    pub isotropy_diag: f64,
    /// ⟨A_ij, Â_ij⟩ for the six ordered off-diagonal pairs.
    pub mu_offdiag_pairs: Vec<f64>,
    /// max over the four solved families of |component on the kernel|
    pub kernel_leak: f64,
    /// Relative change against the next basis order, when computed.
    pub refinement: Option<RefinementDelta>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RefinementDelta {
    pub finer_order: usize,
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub lambda: f64,
}

impl RefinementDelta {
    pub fn max(&self) -> f64 {
        self.mu.abs().max(self.kappa.abs()).max(self.sigma.abs()).max(self.lambda.abs())
    }
}

pub fn solve_transport(ops: &CollisionOperators, basis: &VelocityBasis) -> Result<TransportSolutions> {
    let r2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let lpf = &ops.l_single + &ops.frak_l;
    let mut max_res: f64 = 0.0;
    let mut a = Vec::with_capacity(9);
    let mut a_hat = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let rhs = basis.project_fn(move |v| v[i] * v[j] - if i == j { r2(v) / 3.0 } else { 0.0 });
            let (x, r) = solve_on_ker_perp(&ops.l_single, &rhs, &basis.kernel_single, SOLVE_TOL)?;
            max_res = max_res.max(r);
            a.push(rhs);
            a_hat.push(x);
        }
    }
    let mut b = Vec::with_capacity(3);
    let mut b_hat = Vec::with_capacity(3);
    let mut phi = Vec::with_capacity(3);
    let mut phi_tilde = Vec::with_capacity(3);
    for i in 0..3 {
        let rhs = basis.project_fn(move |v| v[i] * (0.5 * r2(v) - 2.5));
        let (x, r) = solve_on_ker_perp(&ops.l_single, &rhs, &basis.kernel_single, SOLVE_TOL)?;
        max_res = max_res.max(r);
        b.push(rhs);
        b_hat.push(x);
        let rhs = basis.kernel_single[1 + i].clone();
        let (x, r) = solve_on_ker_perp(&lpf, &rhs, &basis.kernel_single[..1], SOLVE_TOL)?;
        max_res = max_res.max(r);
        phi.push(rhs);
        phi_tilde.push(x);
    }
    let psi = basis.kernel_single[4].clone();
    let (psi_tilde, r) = solve_on_ker_perp(&lpf, &psi, &basis.kernel_single[..1], SOLVE_TOL)?;
    max_res = max_res.max(r);
    Ok(TransportSolutions { a, a_hat, b, b_hat, phi, phi_tilde, psi, psi_tilde, max_residual: max_res })
}

/// ∫ f g M² dv-type pairing: both functions' polynomial parts times an extra M.
fn extra_weight_pair(basis: &VelocityBasis, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let pf = &basis.basis_eval * f;
    let pg = &basis.basis_eval * g;
    (0..basis.nodes.len()).map(|q| basis.weights[q] * basis.maxwellian[q] * pf[q] * pg[q]).sum()
}

impl TransportSolutions {
    pub fn report(&self, ops: &CollisionOperators, basis: &VelocityBasis) -> CoefficientReport {
        let mu = 0.1 * (0..9).map(|k| self.a[k].dot(&self.a_hat[k])).sum::<f64>();
        let kappa = (2.0 / 15.0) * (0..3).map(|k| self.b[k].dot(&self.b_hat[k])).sum::<f64>();
        let sigma = (2.0 / 3.0) * (0..3).map(|k| self.phi[k].dot(&self.phi_tilde[k])).sum::<f64>();
        let lambda = self.psi.dot(&self.psi_tilde);
        let mu_x = 0.1 * (0..9).map(|k| extra_weight_pair(basis, &self.a[k], &self.a_hat[k])).sum::<f64>();
        let kappa_x = (2.0 / 15.0) * (0..3).map(|k| extra_weight_pair(basis, &self.b[k], &self.b_hat[k])).sum::<f64>();
        let sigma_x =
            (2.0 / 3.0) * (0..3).map(|k| extra_weight_pair(basis, &self.phi[k], &self.phi_tilde[k])).sum::<f64>();
        let lambda_x = extra_weight_pair(basis, &self.psi, &self.psi_tilde);
        let mut off: f64 = 0.0;
        let mut diag: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let v = self.phi[i].dot(&self.phi_tilde[j]);
                if i == j {
                    diag = diag.max((v - 0.5 * sigma).abs() / sigma);
                } else {
                    off = off.max(v.abs() / sigma);
                }
            }
        }
        let mut pairs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    pairs.push(self.a[3 * i + j].dot(&self.a_hat[3 * i + j]));
                }
            }
        }
        let mut leak: f64 = 0.0;
        for x in self.a_hat.iter().chain(&self.b_hat) {
            for k in &basis.kernel_single {
                leak = leak.max((x.dot(k) / k.norm()).abs());
            }
        }
        let m = &basis.kernel_single[0];
        for x in self.phi_tilde.iter().chain(std::iter::once(&self.psi_tilde)) {
            leak = leak.max(x.dot(m).abs());
        }
        let _ = ops;
        CoefficientReport {
            order: basis.order,
            mu,
            kappa,
            sigma,
            lambda,
            mu_extra_weight: mu_x,
            kappa_extra_weight: kappa_x,
            sigma_extra_weight: sigma_x,
            lambda_extra_weight: lambda_x,
            max_solve_residual: self.max_residual,
            isotropy_offdiag: off,
            isotropy_diag: diag,
            mu_offdiag_pairs: pairs,
            kernel_leak: leak,
            refinement: None,
        }
    }
}

/// (μ, κ) in the single-weight convention.
pub fn compute_mu_kappa(ops: &CollisionOperators, basis: &VelocityBasis) -> Result<(f64, f64)> {
    let s = solve_transport(ops, basis)?;
    let r = s.report(ops, basis);
    Ok((r.mu, r.kappa))
}

/// (σ, λ) in the single-weight convention.
pub fn compute_sigma_lambda(ops: &CollisionOperators, basis: &VelocityBasis) -> Result<(f64, f64)> {
    let s = solve_transport(ops, basis)?;
    let r = s.report(ops, basis);
    Ok((r.sigma, r.lambda))
}

pub fn with_refinement(coarse: CoefficientReport, fine: &CoefficientReport) -> CoefficientReport {
    let rel = |a: f64, b: f64| (b - a) / a;
    CoefficientReport {
        refinement: Some(RefinementDelta {
            finer_order: fine.order,
            mu: rel(coarse.mu, fine.mu),
            kappa: rel(coarse.kappa, fine.kappa),
            sigma: rel(coarse.sigma, fine.sigma),
            lambda: rel(coarse.lambda, fine.lambda),
        }),
        ..coarse
    }
}

/// Human-readable table.
pub fn format_table(r: &CoefficientReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("transport coefficients (basis order {})\n", r.order));
    s.push_str(&format!("{:<8} {:>18} {:>18} {:>12}\n", "coef", "value", "extra-M reading", "refine Δ"));
    let d = r.refinement.as_ref();
    let rows = [
        ("mu", r.mu, r.mu_extra_weight, d.map(|x| x.mu)),
        ("kappa", r.kappa, r.kappa_extra_weight, d.map(|x| x.kappa)),
        ("sigma", r.sigma, r.sigma_extra_weight, d.map(|x| x.sigma)),
        ("lambda", r.lambda, r.lambda_extra_weight, d.map(|x| x.lambda)),
    ];
    for (name, v, x, dd) in rows {
        let ds = dd.map(|z| format!("{:+.3e}", z)).unwrap_or_else(|| "-".into());
        s.push_str(&format!("{name:<8} {v:>18.12} {x:>18.12} {ds:>12}\n"));
    }
    s.push_str(&format!("max solve residual {:.2e}\n", r.max_solve_residual));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_on_small_singular_system() {
        // A = diag(0, 1, 2, 3) with kernel e0
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]));
        let k = vec![DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])];
        let (x, _) = solve_on_ker_perp(&a, &DVector::zeros(4), &k, 1e-12).unwrap();
        assert_eq!(x.norm(), 0.0);
        let y = DVector::from_vec(vec![0.0, 1.0, -2.0, 0.5]);
        let (x, r) = solve_on_ker_perp(&a, &(&a * &y), &k, 1e-12).unwrap();
        assert!((x - y).norm() < 1e-12 && r < 1e-12);
        let bad = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(solve_on_ker_perp(&a, &bad, &k, 1e-12), Err(VmbError::Infeasible { .. })));
    }
}
