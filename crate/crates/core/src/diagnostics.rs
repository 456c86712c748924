//! Functionals and residuals evaluated on snapshots: energy/dissipation,
//! global and local conservation, Ohm/Boussinesq/w residuals, and
//! kinetic-vs-fluid moment errors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::collision::{collision_frequency, CollisionOperators};
use crate::error::{Result, VmbError};
use crate::fluid::FluidState;
use crate::kinetic::KineticState;
use crate::spectral::{Grid, SpecField, SpecVec, C64, I};
use crate::transport::TransportSolutions;
use crate::velocity::{hermite_indices, ladder, raw_values, VelocityBasis};

pub const FLOOR: f64 = 1e-30;
/// Largest derivative order accepted by the H^s functionals.
pub const MAX_S: usize = 6;

/// Gram matrices of ∇_v^b in the stored basis, with and without the ν weight.
/// Derivatives are lifted exactly into higher-degree Hermite functions.
#[derive(Clone, Debug)]
pub struct VelocityNorms {
    pub s_max: usize,
    pub plain: Vec<DMatrix<f64>>,
    pub nu: Vec<DMatrix<f64>>,
}

fn nu_gram_raw(basis: &VelocityBasis, degree: usize) -> DMatrix<f64> {
    let idx = hermite_indices(degree);
    let m = idx.len();
    let mut g = DMatrix::zeros(m, m);
    let mut buf = vec![0.0; m];
    for (q, v) in basis.nodes.iter().enumerate() {
        raw_values(*v, degree, &idx, &mut buf);
        let w = basis.weights[q] * collision_frequency(*v);
        for j in 0..m {
            let bj = w * buf[j];
            for i in 0..m {
                g[(i, j)] += buf[i] * bj;
            }
        }
    }
    g
}

impl VelocityNorms {
    pub fn new(basis: &VelocityBasis, s_max: usize) -> Result<VelocityNorms> {
        if s_max > MAX_S {
            return Err(VmbError::Argument(format!("derivative order {s_max} above supported {MAX_S}")));
        }
        let k0 = basis.order;
        let derivs: Vec<[DMatrix<f64>; 3]> =
            (0..s_max).map(|l| [0, 1, 2].map(|d| ladder::derivative(k0 + l, d))).collect();
        let chain = |base: &dyn Fn(usize) -> DMatrix<f64>| -> Vec<DMatrix<f64>> {
            let mut out = Vec::with_capacity(s_max + 1);
            for b in 0..=s_max {
                // H_b at degree k0, built from H_0 at degree k0 + b
                let mut h = base(k0 + b);
                for l in (0..b).rev() {
                    let mut acc = DMatrix::zeros(derivs[l][0].ncols(), derivs[l][0].ncols());
                    for d in 0..3 {
                        acc += derivs[l][d].transpose() * &h * &derivs[l][d];
                    }
                    h = acc;
                }
                out.push(&basis.coef * h * basis.coef.transpose());
            }
            out
        };
        let plain = chain(&|deg| DMatrix::identity(hermite_indices(deg).len(), hermite_indices(deg).len()));
        let nu = chain(&|deg| nu_gram_raw(basis, deg));
        Ok(VelocityNorms { s_max, plain, nu })
    }
}

/// Two-species test vectors for the fluid moments.
#[derive(Clone, Debug)]
pub struct TestVectors {
    pub rho: DVector<f64>,
    pub u: [DVector<f64>; 3],
    pub theta: DVector<f64>,
    /// ½⟨G, q₂(|v|²/5 − 1)√M⟩
    pub theta5: DVector<f64>,
    pub n: DVector<f64>,
    /// without the 1/ε factor
    pub j: [DVector<f64>; 3],
    pub w: DVector<f64>,
}

impl TestVectors {
    pub fn new(basis: &VelocityBasis) -> TestVectors {
        let mv = basis.moment_vectors();
        let n = basis.size;
        let two = |a: &DVector<f64>, sa: f64, sb: f64| {
            let mut v = DVector::zeros(2 * n);
            v.rows_mut(0, n).copy_from(&(a * sa));
            v.rows_mut(n, n).copy_from(&(a * sb));
            v
        };
        TestVectors {
            rho: two(&mv.one, 0.5, 0.5),
            u: [0, 1, 2].map(|d| two(&mv.v[d], 0.5, 0.5)),
            theta: two(&mv.e3, 0.5, 0.5),
            theta5: two(&mv.e5, 0.5, 0.5),
            n: two(&mv.one, 1.0, -1.0),
            j: [0, 1, 2].map(|d| two(&mv.v[d], 1.0, -1.0)),
            w: two(&mv.e3, 1.0, -1.0),
        }
    }
}

/// Fluid moments of a kinetic state, as spectral fields.
#[derive(Clone, Debug)]
pub struct MomentFields {
    pub rho: SpecField,
    pub u: SpecVec,
    pub theta: SpecField,
    pub theta5: SpecField,
    pub n: SpecField,
    pub j: SpecVec,
    pub w: SpecField,
    pub e: SpecVec,
    pub b: SpecVec,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MomentRecord {
    pub t: f64,
    pub eps: f64,
    pub rho: f64,
    pub u: f64,
    pub theta: f64,
    pub n: f64,
    pub j: f64,
    pub w: f64,
    pub ohm: f64,
    pub boussinesq: f64,
    pub energy_equiv: f64,
    /// ‖w − nθ‖, reported next to the (3/2)nθ residual
    pub energy_equiv_unit: f64,
    pub incompressibility: f64,
    pub gauss: f64,
    pub local: [f64; 7],
    pub energy: f64,
    pub micro_dissipation: f64,
}

pub const MOMENT_COLUMNS: [&str; 23] = [
    "t", "eps", "rho", "u", "theta", "n", "j", "w", "ohm", "boussinesq", "energy_equiv", "energy_equiv_unit",
    "incompressibility", "gauss", "local_rho", "local_u", "local_theta", "local_n", "local_ampere", "local_faraday",
    "local_gauss", "energy", "micro_dissipation",
];

impl MomentRecord {
    pub fn header() -> Vec<&'static str> {
        MOMENT_COLUMNS.to_vec()
    }

    pub fn row(&self) -> Vec<f64> {
        let mut r = vec![
            self.t,
            self.eps,
            self.rho,
            self.u,
            self.theta,
            self.n,
            self.j,
            self.w,
            self.ohm,
            self.boussinesq,
            self.energy_equiv,
            self.energy_equiv_unit,
            self.incompressibility,
            self.gauss,
        ];
        r.extend_from_slice(&self.local);
        r.push(self.energy);
        r.push(self.micro_dissipation);
        r
    }

    pub fn all_finite_nonneg(&self) -> bool {
        self.row()[2..].iter().all(|x| x.is_finite() && *x >= 0.0)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EnergyReport {
    pub s: usize,
    pub e_s: f64,
    pub d_s: f64,
}

/// Everything needed to evaluate diagnostics for one kinetic run.
pub struct DiagContext {
    pub grid: Grid,
    pub basis: Arc<VelocityBasis>,
    pub ops: Arc<CollisionOperators>,
    pub eps: f64,
    pub sigma: f64,
    pub tv: TestVectors,
    pub norms: VelocityNorms,
    p_mat: DMatrix<f64>,
    /// ½ L â_ab (flux test vectors for the u law), index 3a+b
    flux_a: Vec<DVector<f64>>,
    /// ½ L b̂_b
    flux_b: Vec<DVector<f64>>,
}

fn pair(f: &[C64], nv: usize, v: &DVector<f64>) -> SpecField {
    f.chunks(nv).map(|m| m.iter().zip(v.iter()).map(|(a, b)| a * b).sum()).collect()
}

fn species_sum_pair(st: &KineticState, n: usize, v: &DVector<f64>) -> SpecField {
    st.g.chunks(st.nv)
        .map(|m| (0..n).map(|i| (m[i] + m[n + i]) * v[i]).sum())
        .collect()
}

fn scale(f: &SpecField, s: f64) -> SpecField {
    f.iter().map(|z| z * s).collect()
}

impl DiagContext {
    pub fn new(
        grid: Grid,
        basis: Arc<VelocityBasis>,
        ops: Arc<CollisionOperators>,
        transport: &TransportSolutions,
        sigma: f64,
        eps: f64,
        s_max: usize,
    ) -> Result<DiagContext> {
        let tv = TestVectors::new(&basis);
        let norms = VelocityNorms::new(&basis, s_max)?;
        let p_mat = basis.p_matrix();
        let lt = ops.l_single.transpose();
        let flux_a = transport.a_hat.iter().map(|a| &lt * a * 0.5).collect();
        let flux_b = transport.b_hat.iter().map(|b| &lt * b * 0.5).collect();
        Ok(DiagContext { grid, basis, ops, eps, sigma, tv, norms, p_mat, flux_a, flux_b })
    }

    fn check(&self, st: &KineticState) -> Result<()> {
        if st.g.len() != self.grid.npts * 2 * self.basis.size {
            return Err(VmbError::Argument("snapshot grid does not match diagnostics context".into()));
        }
        Ok(())
    }

    pub fn moments(&self, st: &KineticState) -> MomentFields {
        let nv = st.nv;
        let ie = 1.0 / st.eps;
        let tv = &self.tv;
        MomentFields {
            rho: pair(&st.g, nv, &tv.rho),
            u: [0, 1, 2].map(|d| pair(&st.g, nv, &tv.u[d])),
            theta: pair(&st.g, nv, &tv.theta),
            theta5: pair(&st.g, nv, &tv.theta5),
            n: pair(&st.g, nv, &tv.n),
            j: [0, 1, 2].map(|d| scale(&pair(&st.g, nv, &tv.j[d]), ie)),
            w: scale(&pair(&st.g, nv, &tv.w), ie),
            e: st.e.clone(),
            b: st.b.clone(),
        }
    }

    /// E_s = ‖G‖²_{H^s_{x,v}} + ‖E‖²_{H^s} + ‖B‖²_{H^s}.
    pub fn energy_functional(&self, st: &KineticState, s: usize) -> Result<f64> {
        self.check(st)?;
        if s > self.norms.s_max {
            return Err(VmbError::Argument(format!("s = {s} exceeds available order {}", self.norms.s_max)));
        }
        let g = &self.grid;
        let gs = self.mixed_norm_sq(&st.g, st.nv, s, 0, false);
        Ok(gs + g.hs_norm_sq_vec(&st.e, s) + g.hs_norm_sq_vec(&st.b, s))
    }

    /// D_s = ε⁻²‖ℙ⊥G‖²_{H^s(ν)} + ‖∇ℙG‖²_{H^{s−1}} + ‖E‖²_{H^{s−1}} + ‖∇B‖²_{H^{s−2}}; needs s ≥ 2.
    pub fn dissipation_functional(&self, st: &KineticState, s: usize) -> Result<f64> {
        self.check(st)?;
        if s < 2 {
            return Err(VmbError::Argument(format!("dissipation functional needs s >= 2, got {s}")));
        }
        if s > self.norms.s_max {
            return Err(VmbError::Argument(format!("s = {s} exceeds available order {}", self.norms.s_max)));
        }
        let (pg, pperp) = self.split(st);
        let g = &self.grid;
        let micro = self.mixed_norm_sq(&pperp, st.nv, s, 0, true) / (st.eps * st.eps);
        let macro_ = self.mixed_norm_sq(&pg, st.nv, s - 1, 1, false);
        let e = g.hs_norm_sq_vec(&st.e, s - 1);
        let b: f64 = st.b.iter().map(|c| (0..=s - 2).map(|j| g.homogeneous_sq(c, j + 1)).sum::<f64>()).sum();
        Ok(micro + macro_ + e + b)
    }

    pub fn energy_report(&self, st: &KineticState, s: usize) -> Result<EnergyReport> {
        Ok(EnergyReport { s, e_s: self.energy_functional(st, s)?, d_s: self.dissipation_functional(st, s.max(2))? })
    }

    /// ε⁻²‖ℙ⊥G‖²_ν (L² in x).
    pub fn micro_dissipation(&self, st: &KineticState) -> f64 {
        let (_, pperp) = self.split(st);
        self.mixed_norm_sq(&pperp, st.nv, 0, 0, true) / (st.eps * st.eps)
    }

    fn split(&self, st: &KineticState) -> (Vec<C64>, Vec<C64>) {
        let nv = st.nv;
        let mut pg = vec![C64::new(0.0, 0.0); st.g.len()];
        for (m, out) in st.g.chunks(nv).zip(pg.chunks_mut(nv)) {
            for j in 0..nv {
                let x = m[j];
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                let col = self.p_mat.column(j);
                for i in 0..nv {
                    out[i] += col[i] * x;
                }
            }
        }
        let pperp = st.g.iter().zip(&pg).map(|(a, b)| a - b).collect();
        (pg, pperp)
    }

    /// Σ_p Σ_{a+b≤s} |k|^{2(a+shift)} ĝ_pᴴ H_b ĝ_p over both species.
    fn mixed_norm_sq(&self, g: &[C64], nv: usize, s: usize, shift: usize, nu: bool) -> f64 {
        let n = nv / 2;
        let grams = if nu { &self.norms.nu } else { &self.norms.plain };
        let grid = &self.grid;
        let mut total = 0.0;
        for (p, m) in g.chunks(nv).enumerate() {
            if m.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            let k2 = grid.k2[p];
            for b in 0..=s {
                let h = &grams[b];
                let mut wb = 0.0;
                for sp in 0..2 {
                    let x = &m[sp * n..(sp + 1) * n];
                    for j in 0..n {
                        let mut hx = C64::new(0.0, 0.0);
                        for i in 0..n {
                            hx += h[(i, j)] * x[i];
                        }
                        wb += (x[j].conj() * hx).re;
                    }
                }
                let kw: f64 = (0..=s - b).map(|a| k2.powi((a + shift) as i32)).sum();
                total += kw * wb;
            }
        }
        grid.volume() * total
    }

    /// Time-derivative right-hand sides of the seven local laws at one snapshot.
    fn local_rates(&self, st: &KineticState, m: &MomentFields) -> LocalRates {
        let g = &self.grid;
        let n = self.basis.size;
        let ie = 1.0 / st.eps;
        let divu = g.div(&m.u);
        let rt: SpecField = m.rho.iter().zip(&m.theta).map(|(a, b)| a + b).collect();
        let grad_rt = g.grad(&rt);
        let fa: Vec<SpecField> = self.flux_a.iter().map(|v| scale(&species_sum_pair(st, n, v), ie)).collect();
        let fb: Vec<SpecField> = self.flux_b.iter().map(|v| scale(&species_sum_pair(st, n, v), ie)).collect();
        let ne = [0, 1, 2].map(|d| g.product(&m.n, &m.e[d]));
        let jxb = cross_spec(g, &m.j, &m.b);
        let je: SpecField = {
            let mut acc = g.zeros();
            for d in 0..3 {
                for (a, b) in acc.iter_mut().zip(g.product(&m.j[d], &m.e[d])) {
                    *a += b;
                }
            }
            acc
        };
        let mut ru = g.zeros_vec();
        let mut rrho = g.zeros();
        let mut rth = g.zeros();
        let mut rn = g.zeros();
        let curl_b = g.curl(&m.b);
        let curl_e = g.curl(&m.e);
        let divj = g.div(&m.j);
        let mut re = g.zeros_vec();
        let mut rb = g.zeros_vec();
        for p in 0..g.npts {
            let k = g.kvec[p];
            rrho[p] = -divu[p] * ie;
            let mut divfb = C64::new(0.0, 0.0);
            for b in 0..3 {
                divfb += I * k[b] * fb[b][p];
            }
            rth[p] = -divu[p] * (2.0 / 3.0 * ie) - divfb * (2.0 / 3.0) + je[p] * (st.eps / 3.0);
            rn[p] = -divj[p];
            for a in 0..3 {
                let mut divfa = C64::new(0.0, 0.0);
                for b in 0..3 {
                    divfa += I * k[b] * fa[3 * a + b][p];
                }
                ru[a][p] = -grad_rt[a][p] * ie - divfa + (ne[a][p] + jxb[a][p]) * 0.5;
                re[a][p] = curl_b[a][p] - m.j[a][p];
                rb[a][p] = -curl_e[a][p];
            }
        }
        LocalRates { rho: rrho, u: ru, theta: rth, n: rn, e: re, b: rb }
    }

    /// Left-minus-right fields of the seven local laws from a pair of
    /// snapshots: forward difference in t against the trapezoid average of
    /// the right-hand sides (second order in the spacing).
    pub fn local_residual_fields(&self, s0: &KineticState, s1: &KineticState) -> Result<LocalResidualFields> {
        self.check(s0)?;
        self.check(s1)?;
        if s0.nv != s1.nv || s0.eps != s1.eps {
            return Err(VmbError::Argument("snapshots come from different runs".into()));
        }
        let dt = s1.t - s0.t;
        if !(dt > 0.0) {
            return Err(VmbError::Argument(format!("snapshot spacing must be positive, got {dt}")));
        }
        let g = &self.grid;
        let m0 = self.moments(s0);
        let m1 = self.moments(s1);
        let r0 = self.local_rates(s0, &m0);
        let r1 = self.local_rates(s1, &m1);
        let sc = |f0: &SpecField, f1: &SpecField, a: &SpecField, b: &SpecField| -> SpecField {
            (0..g.npts).map(|p| (f1[p] - f0[p]) / dt - (a[p] + b[p]) * 0.5).collect()
        };
        let vc = |f0: &SpecVec, f1: &SpecVec, a: &SpecVec, b: &SpecVec| -> SpecVec {
            [0, 1, 2].map(|c| sc(&f0[c], &f1[c], &a[c], &b[c]))
        };
        let dive = g.div(&s1.e);
        Ok(LocalResidualFields {
            rho: sc(&m0.rho, &m1.rho, &r0.rho, &r1.rho),
            u: vc(&m0.u, &m1.u, &r0.u, &r1.u),
            theta: sc(&m0.theta, &m1.theta, &r0.theta, &r1.theta),
            n: sc(&m0.n, &m1.n, &r0.n, &r1.n),
            ampere: vc(&m0.e, &m1.e, &r0.e, &r1.e),
            faraday: vc(&m0.b, &m1.b, &r0.b, &r1.b),
            gauss_e: dive.iter().zip(&m1.n).map(|(a, b)| a - b).collect(),
            div_b: g.div(&s1.b),
        })
    }

    /// L² norms of the seven local-law residuals (the two Gauss constraints merged).
    pub fn local_conservation_residuals(&self, s0: &KineticState, s1: &KineticState) -> Result<[f64; 7]> {
        let f = self.local_residual_fields(s0, s1)?;
        let g = &self.grid;
        Ok([
            g.norm(&f.rho),
            g.vec_norm(&f.u),
            g.norm(&f.theta),
            g.norm(&f.n),
            g.vec_norm(&f.ampere),
            g.vec_norm(&f.faraday),
            (g.norm_sq(&f.gauss_e) + g.norm_sq(&f.div_b)).sqrt(),
        ])
    }

    pub fn record(&self, st: &KineticState, local: Option<[f64; 7]>) -> MomentRecord {
        let g = &self.grid;
        let m = self.moments(st);
        let dive = g.div(&st.e);
        let gauss: SpecField = dive.iter().zip(&m.n).map(|(a, b)| a - b).collect();
        MomentRecord {
            t: st.t,
            eps: st.eps,
            rho: g.norm(&m.rho),
            u: g.vec_norm(&m.u),
            theta: g.norm(&m.theta),
            n: g.norm(&m.n),
            j: g.vec_norm(&m.j),
            w: g.norm(&m.w),
            ohm: ohm_residual(g, &m, self.sigma),
            boussinesq: boussinesq_residual(g, &m),
            energy_equiv: energy_equiv_residual(g, &m),
            energy_equiv_unit: w_residual_with(g, &m, 1.0),
            incompressibility: g.norm(&g.div(&m.u)),
            gauss: g.norm(&gauss),
            local: local.unwrap_or([0.0; 7]),
            energy: self.energy_functional(st, 0).unwrap_or(f64::NAN),
            micro_dissipation: self.micro_dissipation(st),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalResidualFields {
    pub rho: SpecField,
    pub u: SpecVec,
    pub theta: SpecField,
    pub n: SpecField,
    pub ampere: SpecVec,
    pub faraday: SpecVec,
    pub gauss_e: SpecField,
    pub div_b: SpecField,
}

struct LocalRates {
    rho: SpecField,
    u: SpecVec,
    theta: SpecField,
    n: SpecField,
    e: SpecVec,
    b: SpecVec,
}

fn cross_spec(g: &Grid, a: &SpecVec, b: &SpecVec) -> SpecVec {
    let pr = |x: usize, y: usize| g.product(&a[x], &b[y]);
    let sub = |p: SpecField, q: SpecField| p.iter().zip(&q).map(|(x, y)| x - y).collect::<SpecField>();
    [sub(pr(1, 2), pr(2, 1)), sub(pr(2, 0), pr(0, 2)), sub(pr(0, 1), pr(1, 0))]
}

/// ‖j − nu − σ(−½∇n + E + u×B)‖ / (‖j‖ + floor).
pub fn ohm_residual(g: &Grid, m: &MomentFields, sigma: f64) -> f64 {
    let uxb = cross_spec(g, &m.u, &m.b);
    let gn = g.grad(&m.n);
    let mut r = g.zeros_vec();
    for d in 0..3 {
        let nu = g.product(&m.n, &m.u[d]);
        for p in 0..g.npts {
            r[d][p] = m.j[d][p] - nu[p] - sigma * (-gn[d][p] * 0.5 + m.e[d][p] + uxb[d][p]);
        }
    }
    g.vec_norm(&r) / (g.vec_norm(&m.j) + FLOOR)
}

/// ‖ρ + θ‖.
pub fn boussinesq_residual(g: &Grid, m: &MomentFields) -> f64 {
    let s: SpecField = m.rho.iter().zip(&m.theta).map(|(a, b)| a + b).collect();
    g.norm(&s)
}

/// ‖w − (3/2)nθ‖.
pub fn energy_equiv_residual(g: &Grid, m: &MomentFields) -> f64 {
    w_residual_with(g, m, 1.5)
}

fn w_residual_with(g: &Grid, m: &MomentFields, c: f64) -> f64 {
    let nt = g.product(&m.n, &m.theta);
    let s: SpecField = m.w.iter().zip(&nt).map(|(a, b)| a - b * c).collect();
    g.norm(&s)
}

/// Relative global-conservation drifts of a kinetic run.
pub fn global_conservation_residuals(
    solver: &crate::kinetic::KineticSolver,
    st: &KineticState,
    reference: &crate::kinetic::Conserved,
) -> [f64; 3] {
    solver.conserved(st).drift_from(reference)
}

/// Errors ‖𝒫u_ε − u‖, ‖(3/5)θ_ε − (2/5)ρ_ε − θ‖, ‖n_ε − n‖, ‖E_ε − E‖, ‖B_ε − B‖.
pub fn moment_errors(g: &Grid, m: &MomentFields, f: &FluidState) -> [f64; 5] {
    let mut pu = m.u.clone();
    g.leray_project(&mut pu);
    let dv = |a: &SpecVec, b: &SpecVec| {
        (0..3)
            .map(|c| g.norm_sq(&a[c].iter().zip(&b[c]).map(|(x, y)| x - y).collect::<SpecField>()))
            .sum::<f64>()
            .sqrt()
    };
    let ds = |a: &SpecField, b: &SpecField| g.norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<SpecField>());
    let th: SpecField = m.theta.iter().zip(&m.rho).map(|(t, r)| t * 0.6 - r * 0.4).collect();
    [dv(&pu, &f.u), ds(&th, &f.theta), ds(&m.n, &f.n), dv(&m.e, &f.e), dv(&m.b, &f.b)]
}

pub const ERROR_NAMES: [&str; 5] = ["u", "theta", "n", "E", "B"];

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ConvergenceSeries {
    pub eps: f64,
    pub times: Vec<f64>,
    /// per time: the five moment errors
    pub errors: Vec<[f64; 5]>,
    pub sup: [f64; 5],
    pub final_errors: [f64; 5],
}

/// Pairs kinetic moments and fluid states taken at the same times.
pub fn moment_convergence(
    g: &Grid,
    eps: f64,
    kinetic: &[(f64, MomentFields)],
    fluid: &[FluidState],
) -> Result<ConvergenceSeries> {
    if kinetic.len() != fluid.len() {
        return Err(VmbError::Argument(format!(
            "time grids differ: {} kinetic vs {} fluid snapshots",
            kinetic.len(),
            fluid.len()
        )));
    }
    let mut times = Vec::new();
    let mut errors = Vec::new();
    let mut sup = [0.0f64; 5];
    for ((t, m), f) in kinetic.iter().zip(fluid) {
        if (t - f.t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(VmbError::Argument(format!("time mismatch: kinetic {t} vs fluid {}", f.t)));
        }
        let e = moment_errors(g, m, f);
        for i in 0..5 {
            sup[i] = sup[i].max(e[i]);
        }
        times.push(*t);
        errors.push(e);
    }
    let final_errors = errors.last().copied().unwrap_or([0.0; 5]);
    Ok(ConvergenceSeries { eps, times, errors, sup, final_errors })
}

/// Observed order log2(r(h)/r(h/2)) for each entry.
pub fn observed_orders(coarse: &[f64], fine: &[f64]) -> Vec<f64> {
    coarse.iter().zip(fine).map(|(a, b)| (a / b).log2()).collect()
}

/// Ratios between consecutive entries (later / earlier).
pub fn contraction_ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / (w[0] + FLOOR)).collect()
}
