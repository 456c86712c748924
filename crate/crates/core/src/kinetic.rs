//! Perturbed two-species VMB integrator: Fourier in x, Galerkin in v.
//!
//! Each step is an implicit midpoint step. The per-mode linear operator
//! (transport, collisions, mean-field rotation, E↔j coupling, Maxwell curls)
//! is factorized once per (mode, dt); the pseudo-spectral nonlinear part
//! (force terms with E and B − B̄, and Γ) is resolved by fixed-point iteration.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::collision::CollisionOperators;
use crate::error::{Result, VmbError};
use crate::seed::FluidSeed;
use crate::spectral::{Grid, SpecField, SpecVec, C64, I};
use crate::velocity::{MomentVectors, VelocityBasis};

#[derive(Clone, Debug, PartialEq)]
pub struct KineticOptions {
    /// Include the quadratic terms (force terms in E, B − B̄, and Γ).
    pub nonlinear: bool,
    /// Re-project E∥ from n and B onto div-free after every step.
    pub enforce_gauss: bool,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Seeds with a larger physical amplitude trigger a warning.
    pub amplitude_limit: f64,
}

impl Default for KineticOptions {
    fn default() -> Self {
        KineticOptions { nonlinear: true, enforce_gauss: true, fp_tol: 1e-14, fp_max_iter: 100, amplitude_limit: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KineticState {
    pub t: f64,
    pub eps: f64,
    /// 2N velocity coefficients per Fourier mode, mode-major.
    pub nv: usize,
    pub g: Vec<C64>,
    pub e: SpecVec,
    pub b: SpecVec,
}

impl KineticState {
    pub fn zeros(grid: &Grid, nv: usize, eps: f64) -> KineticState {
        KineticState { t: 0.0, eps, nv, g: vec![C64::new(0.0, 0.0); grid.npts * nv], e: grid.zeros_vec(), b: grid.zeros_vec() }
    }

    pub fn mode(&self, p: usize) -> &[C64] {
        &self.g[p * self.nv..(p + 1) * self.nv]
    }

    /// Spectral field of a single velocity coefficient.
    pub fn coefficient(&self, i: usize) -> SpecField {
        self.g.chunks(self.nv).map(|m| m[i]).collect()
    }

    /// Spectral field of ⟨G, φ⟩ for a two-species test vector φ.
    pub fn pairing(&self, phi: &DVector<f64>) -> SpecField {
        self.g.chunks(self.nv).map(|m| m.iter().zip(phi.iter()).map(|(a, b)| a * b).sum()).collect()
    }

    /// Physical values of G at grid point p (2N reals), given physical coefficient fields.
    pub fn b_bar(&self) -> [f64; 3] {
        [self.b[0][0].re, self.b[1][0].re, self.b[2][0].re]
    }

    pub fn is_finite(&self) -> bool {
        self.g.iter().chain(self.e.iter().flatten()).chain(self.b.iter().flatten()).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    pub fp_residual: f64,
    /// ‖div E − n‖/(‖n‖+1e-30) before and after re-projection.
    pub gauss_before: f64,
    pub gauss_after: f64,
    pub div_b: f64,
}

/// The integrals of the global conservation laws, with magnitude scales
/// used to turn drifts into relative numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Conserved {
    pub mass: [f64; 2],
    pub momentum: [f64; 3],
    pub energy: f64,
    pub mass_scale: f64,
    pub momentum_scale: f64,
    pub energy_scale: f64,
}

impl Conserved {
    /// Relative drifts (mass pair, momentum, energy) against a reference.
    pub fn drift_from(&self, r: &Conserved) -> [f64; 3] {
        let dm = ((self.mass[0] - r.mass[0]).powi(2) + (self.mass[1] - r.mass[1]).powi(2)).sqrt();
        let dp = (0..3).map(|d| (self.momentum[d] - r.momentum[d]).powi(2)).sum::<f64>().sqrt();
        let de = (self.energy - r.energy).abs();
        [dm / (r.mass_scale + 1e-30), dp / (r.momentum_scale + 1e-30), de / (r.energy_scale + 1e-30)]
    }
}

fn matvec_acc(m: &DMatrix<f64>, x: &[C64], s: C64, out: &mut [C64]) {
    let (r, c) = m.shape();
    for j in 0..c {
        let xj = s * x[j];
        if xj.re == 0.0 && xj.im == 0.0 {
            continue;
        }
        let col = m.column(j);
        for i in 0..r {
            out[i] += col[i] * xj;
        }
    }
}

fn matvec_real_acc(m: &DMatrix<f64>, x: &[f64], s: f64, out: &mut [f64]) {
    if s == 0.0 {
        return;
    }
    let (r, c) = m.shape();
    for j in 0..c {
        let xj = s * x[j];
        if xj == 0.0 {
            continue;
        }
        let col = m.column(j);
        for i in 0..r {
            out[i] += col[i] * xj;
        }
    }
}

pub struct KineticSolver {
    pub grid: Grid,
    pub basis: Arc<VelocityBasis>,
    pub ops: Arc<CollisionOperators>,
    pub eps: f64,
    pub options: KineticOptions,
    n: usize,
    nv: usize,
    dy: usize,
    b_bar: [f64; 3],
    c0: DMatrix<f64>,
    force: [DMatrix<f64>; 3],
    s: [DVector<f64>; 3],
    mv: MomentVectors,
    lus: Vec<Option<LU<C64, Dyn, Dyn>>>,
    dt_cached: f64,
}

impl KineticSolver {
    pub fn new(
        grid: Grid,
        basis: Arc<VelocityBasis>,
        ops: Arc<CollisionOperators>,
        eps: f64,
        options: KineticOptions,
    ) -> Result<KineticSolver> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(VmbError::Argument(format!("eps must lie in (0, 1], got {eps}")));
        }
        if ops.size != basis.size {
            return Err(VmbError::Argument("collision operators built for a different basis".into()));
        }
        let n = basis.size;
        let force = [0, 1, 2].map(|d| &basis.vel_mul[d] * 0.5 - &basis.vel_diff[d]);
        let s = [0, 1, 2].map(|d| basis.kernel_single[1 + d].clone());
        let mv = basis.moment_vectors();
        let mut solver = KineticSolver {
            grid,
            basis,
            ops,
            eps,
            options,
            n,
            nv: 2 * n,
            dy: 2 * n + 6,
            b_bar: [0.0; 3],
            c0: DMatrix::zeros(2 * n, 2 * n),
            force,
            s,
            mv,
            lus: Vec::new(),
            dt_cached: f64::NAN,
        };
        solver.set_b_bar([0.0; 3]);
        Ok(solver)
    }

    pub fn velocity_size(&self) -> usize {
        self.n
    }

    fn set_b_bar(&mut self, b_bar: [f64; 3]) {
        let n = self.n;
        let mut c0 = &self.ops.l_two * (-1.0 / (self.eps * self.eps));
        let mut r = DMatrix::zeros(n, n);
        for b in 0..3 {
            r += &self.basis.rot[b] * b_bar[b];
        }
        let r = r * (1.0 / self.eps);
        {
            let mut top = c0.view_mut((0, 0), (n, n));
            top -= &r;
        }
        {
            let mut bot = c0.view_mut((n, n), (n, n));
            bot += &r;
        }
        self.c0 = c0;
        self.b_bar = b_bar;
        self.dt_cached = f64::NAN;
    }

    /// Dense per-mode linear operator A_k acting on (G, E, B).
    pub fn mode_matrix(&self, k: [f64; 3]) -> DMatrix<C64> {
        let (n, nv, dy) = (self.n, self.nv, self.dy);
        let ie = 1.0 / self.eps;
        let mut a = DMatrix::<C64>::zeros(dy, dy);
        for j in 0..nv {
            for i in 0..nv {
                a[(i, j)] = C64::new(self.c0[(i, j)], 0.0);
            }
        }
        for d in 0..3 {
            if k[d] == 0.0 {
                continue;
            }
            let v = &self.basis.vel_mul[d];
            for sp in 0..2 {
                for j in 0..n {
                    for i in 0..n {
                        a[(sp * n + i, sp * n + j)] += -I * (ie * k[d] * v[(i, j)]);
                    }
                }
            }
        }
        for d in 0..3 {
            for i in 0..n {
                let sv = self.s[d][i] * ie;
                a[(i, nv + d)] += C64::new(sv, 0.0);
                a[(n + i, nv + d)] += C64::new(-sv, 0.0);
                a[(nv + d, i)] += C64::new(-sv, 0.0);
                a[(nv + d, n + i)] += C64::new(sv, 0.0);
            }
        }
        // E' = ik × B, B' = −ik × E
        let cross = |a: &mut DMatrix<C64>, row: usize, col: usize, sign: f64| {
            a[(row, col + 2)] += I * (sign * k[1]);
            a[(row, col + 1)] += I * (-sign * k[2]);
            a[(row + 1, col)] += I * (sign * k[2]);
            a[(row + 1, col + 2)] += I * (-sign * k[0]);
            a[(row + 2, col + 1)] += I * (sign * k[0]);
            a[(row + 2, col)] += I * (-sign * k[1]);
        };
        cross(&mut a, nv, nv + 3, 1.0);
        cross(&mut a, nv + 3, nv, -1.0);
        a
    }

    fn apply_mode(&self, k: [f64; 3], y: &[C64], out: &mut [C64]) {
        let (n, nv) = (self.n, self.nv);
        let ie = 1.0 / self.eps;
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let (og, ofield) = out.split_at_mut(nv);
        matvec_acc(&self.c0, &y[..nv], C64::new(1.0, 0.0), og);
        for d in 0..3 {
            if k[d] != 0.0 {
                let s = -I * (ie * k[d]);
                matvec_acc(&self.basis.vel_mul[d], &y[..n], s, &mut og[..n]);
                matvec_acc(&self.basis.vel_mul[d], &y[n..nv], s, &mut og[n..]);
            }
        }
        let e = &y[nv..nv + 3];
        let b = &y[nv + 3..nv + 6];
        for d in 0..3 {
            let sd = &self.s[d];
            let mut jd = C64::new(0.0, 0.0);
            for i in 0..n {
                og[i] += e[d] * (sd[i] * ie);
                og[n + i] -= e[d] * (sd[i] * ie);
                jd += (y[i] - y[n + i]) * sd[i];
            }
            ofield[d] = -jd * ie;
        }
        let kc = |v: &[C64]| {
            [
                I * (k[1] * v[2] - k[2] * v[1]),
                I * (k[2] * v[0] - k[0] * v[2]),
                I * (k[0] * v[1] - k[1] * v[0]),
            ]
        };
        let kb = kc(b);
        let ke = kc(e);
        for d in 0..3 {
            ofield[d] += kb[d];
            ofield[3 + d] = -ke[d];
        }
    }

    fn factorize(&mut self, dt: f64) -> Result<()> {
        if self.dt_cached == dt && self.lus.len() == self.grid.npts {
            return Ok(());
        }
        let dy = self.dy;
        let grid = &self.grid;
        let lus: Vec<Option<LU<C64, Dyn, Dyn>>> = (0..grid.npts)
            .into_par_iter()
            .map(|p| {
                if !grid.mask[p] {
                    return None;
                }
                let a = self.mode_matrix(grid.kvec[p]);
                let m = DMatrix::<C64>::identity(dy, dy) - a * C64::new(0.5 * dt, 0.0);
                Some(m.lu())
            })
            .collect();
        self.lus = lus;
        self.dt_cached = dt;
        Ok(())
    }

    fn pack(&self, st: &KineticState) -> Vec<C64> {
        let (nv, dy) = (self.nv, self.dy);
        let mut y = vec![C64::new(0.0, 0.0); self.grid.npts * dy];
        for p in 0..self.grid.npts {
            y[p * dy..p * dy + nv].copy_from_slice(st.mode(p));
            for d in 0..3 {
                y[p * dy + nv + d] = st.e[d][p];
                y[p * dy + nv + 3 + d] = st.b[d][p];
            }
        }
        y
    }

    fn unpack(&self, y: &[C64], st: &mut KineticState) {
        let (nv, dy) = (self.nv, self.dy);
        for p in 0..self.grid.npts {
            st.g[p * nv..(p + 1) * nv].copy_from_slice(&y[p * dy..p * dy + nv]);
            for d in 0..3 {
                st.e[d][p] = y[p * dy + nv + d];
                st.b[d][p] = y[p * dy + nv + 3 + d];
            }
        }
    }

    /// Pseudo-spectral quadratic terms for the G block (dealiased), packed like y.
    fn nonlinear(&self, y: &[C64]) -> Vec<C64> {
        let grid = &self.grid;
        let (n, nv, dy, npts) = (self.n, self.nv, self.dy, grid.npts);
        let ie = 1.0 / self.eps;
        let to_phys = |i: usize, skip_mean: bool| -> Vec<f64> {
            let mut buf: Vec<C64> = (0..npts).map(|p| y[p * dy + i]).collect();
            if skip_mean {
                buf[0] = C64::new(0.0, 0.0);
            }
            grid.inverse_complex(&mut buf);
            buf.iter().map(|z| z.re).collect()
        };
        let cols: Vec<Vec<f64>> = (0..nv).into_par_iter().map(|i| to_phys(i, false)).collect();
        let e: Vec<Vec<f64>> = (0..3).map(|d| to_phys(nv + d, false)).collect();
        let db: Vec<Vec<f64>> = (0..3).map(|d| to_phys(nv + 3 + d, true)).collect();
        let mut rphys = vec![0.0; npts * nv];
        let ops = &self.ops;
        rphys.par_chunks_mut(nv).enumerate().for_each_init(
            || (vec![0.0; nv], vec![0.0; n * n], vec![0.0; nv]),
            |(g, work, gam), (p, r)| {
                for i in 0..nv {
                    g[i] = cols[i][p];
                }
                let (gp, gm) = g.split_at(n);
                let (rp, rm) = r.split_at_mut(n);
                for d in 0..3 {
                    let ed = e[d][p];
                    matvec_real_acc(&self.force[d], gp, ed, rp);
                    matvec_real_acc(&self.force[d], gm, -ed, rm);
                    let bd = db[d][p] * ie;
                    matvec_real_acc(&self.basis.rot[d], gp, -bd, rp);
                    matvec_real_acc(&self.basis.rot[d], gm, bd, rm);
                }
                ops.gamma_diagonal_into(g, work, gam);
                for i in 0..nv {
                    r[i] += ie * gam[i];
                }
            },
        );
        let spec: Vec<Vec<C64>> = (0..nv)
            .into_par_iter()
            .map(|i| {
                let mut buf: Vec<C64> = (0..npts).map(|p| C64::new(rphys[p * nv + i], 0.0)).collect();
                grid.forward_complex(&mut buf);
                grid.dealias(&mut buf);
                buf
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); npts * dy];
        for p in 0..npts {
            for i in 0..nv {
                out[p * dy + i] = spec[i][p];
            }
        }
        out
    }

    /// One implicit midpoint step of size dt.
    pub fn step(&mut self, st: &mut KineticState, dt: f64) -> Result<StepInfo> {
        if !(dt > 0.0) {
            return Err(VmbError::Argument(format!("dt must be > 0, got {dt}")));
        }
        if (st.eps - self.eps).abs() > 0.0 {
            return Err(VmbError::Argument("state eps differs from solver eps".into()));
        }
        let bb = st.b_bar();
        if bb != self.b_bar {
            self.set_b_bar(bb);
        }
        self.factorize(dt)?;
        let grid = &self.grid;
        let (dy, npts) = (self.dy, grid.npts);
        let y0 = self.pack(st);
        // explicit half of the linear part
        let mut base = vec![C64::new(0.0, 0.0); npts * dy];
        base.par_chunks_mut(dy).enumerate().for_each_init(
            || vec![C64::new(0.0, 0.0); dy],
            |tmp, (p, out)| {
                if !grid.mask[p] {
                    return;
                }
                let y = &y0[p * dy..(p + 1) * dy];
                self.apply_mode(grid.kvec[p], y, tmp);
                for i in 0..dy {
                    out[i] = y[i] + tmp[i] * (0.5 * dt);
                }
            },
        );
        let mut y1 = y0.clone();
        let mut info = StepInfo::default();
        let scale = y0.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-300);
        let max_iter = if self.options.nonlinear { self.options.fp_max_iter } else { 1 };
        let mut converged = !self.options.nonlinear;
        for it in 0..max_iter {
            let nl = if self.options.nonlinear {
                let mid: Vec<C64> = y0.iter().zip(&y1).map(|(a, b)| (a + b) * 0.5).collect();
                Some(self.nonlinear(&mid))
            } else {
                None
            };
            let lus = &self.lus;
            let mut ynew = vec![C64::new(0.0, 0.0); npts * dy];
            ynew.par_chunks_mut(dy).enumerate().for_each(|(p, out)| {
                if let Some(lu) = &lus[p] {
                    let mut rhs = DVector::from_iterator(dy, (0..dy).map(|i| {
                        let mut v = base[p * dy + i];
                        if let Some(nl) = &nl {
                            v += nl[p * dy + i] * dt;
                        }
                        v
                    }));
                    lu.solve_mut(&mut rhs);
                    out.copy_from_slice(rhs.as_slice());
                }
            });
            let diff = ynew.iter().zip(&y1).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            let ynorm = ynew.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(scale);
            y1 = ynew;
            info.iterations = it + 1;
            info.fp_residual = diff / ynorm;
            if !diff.is_finite() {
                break;
            }
            if diff <= self.options.fp_tol * ynorm {
                converged = true;
                break;
            }
        }
        let t_new = st.t + dt;
        if y1.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(VmbError::Integration { t: t_new, reason: "non-finite values in kinetic state".into() });
        }
        if !converged {
            return Err(VmbError::Convergence { iterations: info.iterations, residual: info.fp_residual });
        }
        self.unpack(&y1, st);
        st.t = t_new;
        info.gauss_before = self.gauss_residual(st);
        if self.options.enforce_gauss {
            self.enforce_fields(st);
        }
        info.gauss_after = self.gauss_residual(st);
        info.div_b = self.grid.vec_norm(&[self.grid.div(&st.b), self.grid.zeros(), self.grid.zeros()]);
        Ok(info)
    }

    /// Charge density n = ⟨G, q₁√M⟩ in spectral form.
    pub fn charge(&self, st: &KineticState) -> SpecField {
        let n = self.n;
        let one = &self.mv.one;
        st.g.chunks(self.nv)
            .map(|m| (0..n).map(|i| (m[i] - m[n + i]) * one[i]).sum())
            .collect()
    }

    pub fn gauss_residual(&self, st: &KineticState) -> f64 {
        let nfield = self.charge(st);
        let dive = self.grid.div(&st.e);
        let diff: Vec<C64> = dive.iter().zip(&nfield).map(|(a, b)| a - b).collect();
        self.grid.norm(&diff) / (self.grid.norm(&nfield) + 1e-30)
    }

    /// E∥ from n (Fourier Poisson relation) and B onto div-free fields.
    pub fn enforce_fields(&self, st: &mut KineticState) {
        let nfield = self.charge(st);
        let grid = &self.grid;
        for p in 0..grid.npts {
            let k2 = grid.k2[p];
            if k2 == 0.0 {
                continue;
            }
            let k = grid.kvec[p];
            let ke = (0..3).map(|d| k[d] * st.e[d][p]).sum::<C64>() / k2;
            let kb = (0..3).map(|d| k[d] * st.b[d][p]).sum::<C64>() / k2;
            for d in 0..3 {
                st.e[d][p] += -ke * k[d] - I * k[d] * nfield[p] / k2;
                st.b[d][p] -= kb * k[d];
            }
        }
    }

    /// Fields plus the global integrals shifted to their prescribed values
    /// through the zero mode of G.
    pub fn enforce_constraints(&self, st: &mut KineticState) {
        self.enforce_fields(st);
        let vol = self.grid.volume();
        let k = &self.basis.kernel_two;
        let g0: Vec<f64> = st.mode(0).iter().map(|z| z.re).collect();
        let g0 = DVector::from_vec(g0);
        let mut shift = DVector::zeros(self.nv);
        for phi in &k[..2] {
            shift -= phi * g0.dot(phi);
        }
        let exb = self.field_momentum(st);
        for d in 0..3 {
            let target = -exb[d] / vol;
            shift += &k[2 + d] * ((target - g0.dot(&k[2 + d])) / 2.0);
        }
        let target = -0.5 * self.eps * self.field_energy(st) / vol;
        shift += &k[5] * ((target - g0.dot(&k[5])) / 3.0);
        let nv = self.nv;
        for i in 0..nv {
            st.g[i] = C64::new(st.g[i].re + shift[i], 0.0);
        }
    }

    /// ∫ E × B dx.
    pub fn field_momentum(&self, st: &KineticState) -> [f64; 3] {
        let g = &self.grid;
        let c = |a: usize, b: usize| g.inner(&st.e[a], &st.b[b]);
        [c(1, 2) - c(2, 1), c(2, 0) - c(0, 2), c(0, 1) - c(1, 0)]
    }

    /// ∫ |E|² + |B − B̄|² dx.
    pub fn field_energy(&self, st: &KineticState) -> f64 {
        let g = &self.grid;
        let mut db = st.b.clone();
        for c in db.iter_mut() {
            c[0] = C64::new(0.0, 0.0);
        }
        g.vec_norm_sq(&st.e) + g.vec_norm_sq(&db)
    }

    pub fn conserved(&self, st: &KineticState) -> Conserved {
        let grid = &self.grid;
        let vol = grid.volume();
        let k = &self.basis.kernel_two;
        let g0 = DVector::from_iterator(self.nv, st.mode(0).iter().map(|z| z.re));
        let sv = vol.sqrt();
        let exb = self.field_momentum(st);
        let fe = self.field_energy(st);
        let mass = [vol * g0.dot(&k[0]), vol * g0.dot(&k[1])];
        let mass_scale = sv * (grid.norm(&st.pairing(&k[0])) + grid.norm(&st.pairing(&k[1])));
        let momentum = [0, 1, 2].map(|d| vol * g0.dot(&k[2 + d]) + exb[d]);
        let mom_field: f64 = (0..3).map(|d| grid.norm_sq(&st.pairing(&k[2 + d]))).sum::<f64>().sqrt();
        let momentum_scale = sv * mom_field + grid.vec_norm(&st.e) * grid.vec_norm(&st.b);
        let energy = vol * g0.dot(&k[5]) + 0.5 * self.eps * fe;
        let energy_scale = sv * grid.norm(&st.pairing(&k[5])) + 0.5 * self.eps * fe;
        Conserved { mass, momentum, energy, mass_scale, momentum_scale, energy_scale }
    }

    /// Kinetic state on the hydrodynamic manifold built from a fluid seed.
    /// Returns warnings (amplitude above the configured smallness).
    pub fn init_well_prepared(&self, seed: &FluidSeed) -> Result<(KineticState, Vec<String>)> {
        let grid = &self.grid;
        let mut warnings = Vec::new();
        let amp = seed.amplitude(grid);
        if amp > self.options.amplitude_limit {
            warnings.push(format!(
                "seed amplitude {amp:.3e} exceeds smallness limit {:.3e}; running anyway",
                self.options.amplitude_limit
            ));
        }
        let mut s = seed.clone();
        s.dealias(grid);
        let k = &self.basis.kernel_two;
        let mut st = KineticState::zeros(grid, self.nv, self.eps);
        for p in 0..grid.npts {
            let rp = s.rho[p] + s.n[p] * 0.5;
            let rm = s.rho[p] - s.n[p] * 0.5;
            let m = &mut st.g[p * self.nv..(p + 1) * self.nv];
            for i in 0..self.nv {
                let mut v = rp * k[0][i] + rm * k[1][i] + s.theta[p] * k[5][i];
                for d in 0..3 {
                    v += s.u[d][p] * k[2 + d][i];
                }
                m[i] = v;
            }
        }
        st.e = s.e;
        st.b = s.b;
        self.enforce_constraints(&mut st);
        Ok((st, warnings))
    }

    /// Advance `steps` steps of size dt, calling `observe` after each.
    pub fn advance<F: FnMut(&KineticState, &StepInfo) -> Result<()>>(
        &mut self,
        st: &mut KineticState,
        dt: f64,
        steps: usize,
        mut observe: F,
    ) -> Result<()> {
        for _ in 0..steps {
            let info = self.step(st, dt)?;
            observe(st, &info)?;
        }
        Ok(())
    }

    pub fn moment_vectors(&self) -> &MomentVectors {
        &self.mv
    }
}
