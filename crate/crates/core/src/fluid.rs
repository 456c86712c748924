//! Pseudo-spectral NSFM solver with Ohm's law on the periodic torus.
//!
//! Implicit midpoint in time: diffusion and the (E, B, n) block with the
//! Ohm damping are linear and factorized per mode; advection, Lorentz and
//! u×B terms are iterated to a fixed point.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::error::{Result, VmbError};
use crate::seed::FluidSeed;
use crate::spectral::{Grid, SpecField, SpecVec, C64, I};
use crate::transport::CoefficientReport;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
}

impl FluidParams {
    /// μ, κ, σ exactly as reported by the transport solve.
    pub fn from_report(r: &CoefficientReport) -> FluidParams {
        FluidParams { mu: r.mu, kappa: r.kappa, sigma: r.sigma }
    }

    /// Coefficients the two-species kinetic equation actually relaxes to.
    /// On species-symmetric perturbations 𝒮𝓛 acts as 2𝓛, so the viscosity
    /// and conductivity built from the single-species 𝓛 are halved; σ comes
    /// from the antisymmetric block 𝓛 + 𝔏 and is unchanged.
    pub fn two_species_limit(r: &CoefficientReport) -> FluidParams {
        FluidParams { mu: 0.5 * r.mu, kappa: 0.5 * r.kappa, sigma: r.sigma }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidOptions {
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Drop all quadratic terms (linear test runs).
    pub linear_only: bool,
    /// Hold u, θ, n at their initial values (frozen-field tests).
    pub freeze_matter: bool,
}

impl Default for FluidOptions {
    fn default() -> Self {
        FluidOptions { fp_tol: 1e-14, fp_max_iter: 100, linear_only: false, freeze_matter: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub t: f64,
    pub u: SpecVec,
    pub theta: SpecField,
    pub n: SpecField,
    pub e: SpecVec,
    pub b: SpecVec,
}

impl FluidState {
    pub fn zeros(grid: &Grid) -> FluidState {
        FluidState { t: 0.0, u: grid.zeros_vec(), theta: grid.zeros(), n: grid.zeros(), e: grid.zeros_vec(), b: grid.zeros_vec() }
    }

    /// ρ = −θ (Boussinesq).
    pub fn rho(&self) -> SpecField {
        self.theta.iter().map(|z| -z).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .flatten()
            .chain(&self.theta)
            .chain(&self.n)
            .chain(self.e.iter().flatten())
            .chain(self.b.iter().flatten())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

pub fn leray_project(grid: &Grid, v: &SpecVec) -> SpecVec {
    let mut out = v.clone();
    grid.leray_project(&mut out);
    out
}

fn cross_phys(a: &[Vec<f64>], b: &[Vec<f64>], p: usize) -> [f64; 3] {
    [
        a[1][p] * b[2][p] - a[2][p] * b[1][p],
        a[2][p] * b[0][p] - a[0][p] * b[2][p],
        a[0][p] * b[1][p] - a[1][p] * b[0][p],
    ]
}

fn phys_vec(grid: &Grid, v: &SpecVec) -> Vec<Vec<f64>> {
    v.iter().map(|c| grid.inverse(c)).collect()
}

/// j = nu + σ(−½∇n + E + u×B), products dealiased.
pub fn compute_ohm_current(grid: &Grid, u: &SpecVec, n: &SpecField, e: &SpecVec, b: &SpecVec, sigma: f64) -> SpecVec {
    let up = phys_vec(grid, u);
    let bp = phys_vec(grid, b);
    let np = grid.inverse(n);
    let gn = grid.grad(n);
    let mut out = grid.zeros_vec();
    for d in 0..3 {
        let prod: Vec<f64> = (0..grid.npts).map(|p| np[p] * up[d][p] + sigma * cross_phys(&up, &bp, p)[d]).collect();
        let mut s = grid.forward(&prod);
        grid.dealias(&mut s);
        for p in 0..grid.npts {
            out[d][p] = s[p] + sigma * (e[d][p] - gn[d][p] * 0.5);
        }
    }
    out
}

/// w = (3/2) n θ.
pub fn compute_w(grid: &Grid, n: &SpecField, theta: &SpecField) -> SpecField {
    grid.product(n, theta).into_iter().map(|z| z * 1.5).collect()
}

const DY: usize = 11; // u(3) θ E(3) B(3) n

pub struct FluidSolver {
    pub grid: Grid,
    pub params: FluidParams,
    pub options: FluidOptions,
    lus: Vec<Option<LU<C64, Dyn, Dyn>>>,
    dt_cached: f64,
}

impl FluidSolver {
    pub fn new(grid: Grid, params: FluidParams, options: FluidOptions) -> Result<FluidSolver> {
        if !(params.sigma > 0.0 && params.mu >= 0.0 && params.kappa >= 0.0) {
            return Err(VmbError::Argument(format!("invalid transport coefficients {params:?}")));
        }
        Ok(FluidSolver { grid, params, options, lus: Vec::new(), dt_cached: f64::NAN })
    }

    /// Linear per-mode operator on (u, θ, E, B, n).
    pub fn mode_matrix(&self, k: [f64; 3]) -> DMatrix<C64> {
        let FluidParams { mu, kappa, sigma } = self.params;
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let mut a = DMatrix::<C64>::zeros(DY, DY);
        if !self.options.freeze_matter {
            for d in 0..3 {
                a[(d, d)] = C64::new(-mu * k2, 0.0);
            }
            a[(3, 3)] = C64::new(-kappa * k2, 0.0);
        }
        let (e0, b0, nn) = (4, 7, 10);
        // ik × v as a matrix
        let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
        for r in 0..3 {
            for c in 0..3 {
                a[(e0 + r, b0 + c)] += I * kx[r][c];
                a[(b0 + r, e0 + c)] += -I * kx[r][c];
            }
            a[(e0 + r, e0 + r)] += C64::new(-sigma, 0.0);
            a[(e0 + r, nn)] += I * (0.5 * sigma * k[r]);
            if !self.options.freeze_matter {
                a[(nn, e0 + r)] += -I * (sigma * k[r]);
            }
        }
        if !self.options.freeze_matter {
            a[(nn, nn)] = C64::new(-0.5 * sigma * k2, 0.0);
        }
        a
    }

    fn factorize(&mut self, dt: f64) {
        if self.dt_cached == dt && self.lus.len() == self.grid.npts {
            return;
        }
        let grid = &self.grid;
        self.lus = (0..grid.npts)
            .into_par_iter()
            .map(|p| {
                if !grid.mask[p] {
                    return None;
                }
                let m = DMatrix::<C64>::identity(DY, DY) - self.mode_matrix(grid.kvec[p]) * C64::new(0.5 * dt, 0.0);
                Some(m.lu())
            })
            .collect();
        self.dt_cached = dt;
    }

    fn pack(&self, st: &FluidState) -> Vec<C64> {
        let npts = self.grid.npts;
        let mut y = vec![C64::new(0.0, 0.0); npts * DY];
        for p in 0..npts {
            let o = p * DY;
            for d in 0..3 {
                y[o + d] = st.u[d][p];
                y[o + 4 + d] = st.e[d][p];
                y[o + 7 + d] = st.b[d][p];
            }
            y[o + 3] = st.theta[p];
            y[o + 10] = st.n[p];
        }
        y
    }

    fn unpack(&self, y: &[C64], st: &mut FluidState) {
        for p in 0..self.grid.npts {
            let o = p * DY;
            for d in 0..3 {
                st.u[d][p] = y[o + d];
                st.e[d][p] = y[o + 4 + d];
                st.b[d][p] = y[o + 7 + d];
            }
            st.theta[p] = y[o + 3];
            st.n[p] = y[o + 10];
        }
    }

    fn unpack_state(&self, y: &[C64]) -> FluidState {
        let mut st = FluidState::zeros(&self.grid);
        self.unpack(y, &mut st);
        st
    }

    /// Quadratic and cubic terms, packed like y.
    fn nonlinear(&self, y: &[C64]) -> Vec<C64> {
        let grid = &self.grid;
        let npts = grid.npts;
        let st = self.unpack_state(y);
        let sigma = self.params.sigma;
        let up = phys_vec(grid, &st.u);
        let ep = phys_vec(grid, &st.e);
        let bp = phys_vec(grid, &st.b);
        let np = grid.inverse(&st.n);
        let gn = phys_vec(grid, &grid.grad(&st.n));
        let gth = phys_vec(grid, &grid.grad(&st.theta));
        let gu: Vec<Vec<Vec<f64>>> = (0..3).map(|c| phys_vec(grid, &grid.grad(&st.u[c]))).collect();
        // j − σE + (σ/2)∇n is the nonlinear part of the current; the full j enters j × B
        let mut fu = vec![vec![0.0; npts]; 3];
        let mut fth = vec![0.0; npts];
        let mut fj = vec![vec![0.0; npts]; 3];
        for p in 0..npts {
            let uxb = cross_phys(&up, &bp, p);
            let mut jnl = [0.0; 3];
            let mut jfull = [0.0; 3];
            for d in 0..3 {
                jnl[d] = np[p] * up[d][p] + sigma * uxb[d];
                jfull[d] = jnl[d] + sigma * (ep[d][p] - 0.5 * gn[d][p]);
            }
            let b = [bp[0][p], bp[1][p], bp[2][p]];
            let jxb = [jfull[1] * b[2] - jfull[2] * b[1], jfull[2] * b[0] - jfull[0] * b[2], jfull[0] * b[1] - jfull[1] * b[0]];
            for d in 0..3 {
                let adv: f64 = (0..3).map(|a| up[a][p] * gu[d][a][p]).sum();
                fu[d][p] = -adv + 0.5 * (np[p] * ep[d][p] + jxb[d]);
                fj[d][p] = jnl[d];
            }
            fth[p] = -(0..3).map(|a| up[a][p] * gth[a][p]).sum::<f64>();
        }
        let spec = |v: &[f64]| {
            let mut s = grid.forward(v);
            grid.dealias(&mut s);
            s
        };
        let mut nu = [spec(&fu[0]), spec(&fu[1]), spec(&fu[2])];
        grid.leray_project(&mut nu);
        let nth = spec(&fth);
        let nj = [spec(&fj[0]), spec(&fj[1]), spec(&fj[2])];
        let nn = grid.div(&nj);
        let mut out = vec![C64::new(0.0, 0.0); npts * DY];
        let frozen = self.options.freeze_matter;
        for p in 0..npts {
            let o = p * DY;
            for d in 0..3 {
                if !frozen {
                    out[o + d] = nu[d][p];
                }
                out[o + 4 + d] = -nj[d][p];
            }
            if !frozen {
                out[o + 3] = nth[p];
                out[o + 10] = -nn[p];
            }
        }
        out
    }

    pub fn step(&mut self, st: &mut FluidState, dt: f64) -> Result<usize> {
        if !(dt > 0.0) {
            return Err(VmbError::Argument(format!("dt must be > 0, got {dt}")));
        }
        self.factorize(dt);
        let grid = &self.grid;
        let npts = grid.npts;
        let y0 = self.pack(st);
        let mut base = vec![C64::new(0.0, 0.0); npts * DY];
        for p in 0..npts {
            if !grid.mask[p] {
                continue;
            }
            let a = self.mode_matrix(grid.kvec[p]);
            let y = DVector::from_column_slice(&y0[p * DY..(p + 1) * DY]);
            let r = &y + a * &y * C64::new(0.5 * dt, 0.0);
            base[p * DY..(p + 1) * DY].copy_from_slice(r.as_slice());
        }
        let nonlinear = !self.options.linear_only;
        let max_iter = if nonlinear { self.options.fp_max_iter } else { 1 };
        let scale = y0.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-300);
        let mut y1 = y0.clone();
        let mut converged = !nonlinear;
        let mut iters = 0;
        let mut resid = 0.0;
        for it in 0..max_iter {
            let nl = if nonlinear {
                let mid: Vec<C64> = y0.iter().zip(&y1).map(|(a, b)| (a + b) * 0.5).collect();
                Some(self.nonlinear(&mid))
            } else {
                None
            };
            let mut ynew = vec![C64::new(0.0, 0.0); npts * DY];
            for p in 0..npts {
                if let Some(lu) = &self.lus[p] {
                    let mut rhs = DVector::from_iterator(DY, (0..DY).map(|i| {
                        let mut v = base[p * DY + i];
                        if let Some(nl) = &nl {
                            v += nl[p * DY + i] * dt;
                        }
                        v
                    }));
                    lu.solve_mut(&mut rhs);
                    ynew[p * DY..(p + 1) * DY].copy_from_slice(rhs.as_slice());
                }
            }
            let diff = ynew.iter().zip(&y1).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            let ynorm = ynew.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(scale);
            y1 = ynew;
            iters = it + 1;
            resid = diff / ynorm;
            if !diff.is_finite() {
                break;
            }
            if diff <= self.options.fp_tol * ynorm {
                converged = true;
                break;
            }
        }
        if y1.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(VmbError::Integration { t: st.t + dt, reason: "non-finite values in fluid state".into() });
        }
        if !converged {
            return Err(VmbError::Convergence { iterations: iters, residual: resid });
        }
        self.unpack(&y1, st);
        st.t += dt;
        self.enforce(st);
        Ok(iters)
    }

    /// div u = 0, div B = 0, and E∥ re-synced so that div E = n.
    pub fn enforce(&self, st: &mut FluidState) {
        let grid = &self.grid;
        grid.leray_project(&mut st.u);
        grid.leray_project(&mut st.b);
        for p in 0..grid.npts {
            let k2 = grid.k2[p];
            if k2 == 0.0 {
                continue;
            }
            let k = grid.kvec[p];
            let ke = (0..3).map(|d| k[d] * st.e[d][p]).sum::<C64>() / k2;
            for d in 0..3 {
                st.e[d][p] += -ke * k[d] - I * k[d] * st.n[p] / k2;
            }
        }
    }

    /// Initial data from the seed: u = 𝒫u^in, θ = (3/5)θ^in − (2/5)ρ^in, E, B, n as given.
    pub fn init_from_seed(&self, seed: &FluidSeed) -> FluidState {
        let mut s = seed.clone();
        s.dealias(&self.grid);
        let mut st = FluidState {
            t: 0.0,
            u: s.u,
            theta: s.theta.iter().zip(&s.rho).map(|(t, r)| t * 0.6 - r * 0.4).collect(),
            n: s.n,
            e: s.e,
            b: s.b,
        };
        self.enforce(&mut st);
        st
    }

    pub fn current(&self, st: &FluidState) -> SpecVec {
        compute_ohm_current(&self.grid, &st.u, &st.n, &st.e, &st.b, self.params.sigma)
    }

    /// ½‖u‖² + (5/4)‖θ‖² + ¼(‖E‖² + ‖B‖²) + ⅛‖n‖².
    pub fn energy(&self, st: &FluidState) -> f64 {
        let g = &self.grid;
        0.5 * g.vec_norm_sq(&st.u)
            + 1.25 * g.norm_sq(&st.theta)
            + 0.25 * (g.vec_norm_sq(&st.e) + g.vec_norm_sq(&st.b))
            + 0.125 * g.norm_sq(&st.n)
    }

    /// μ‖∇u‖² + (5/2)κ‖∇θ‖² + (1/2σ)‖j − nu‖².
    pub fn dissipation(&self, st: &FluidState) -> f64 {
        let g = &self.grid;
        let FluidParams { mu, kappa, sigma } = self.params;
        let j = self.current(st);
        let mut jm = j.clone();
        for d in 0..3 {
            let nu = g.product(&st.n, &st.u[d]);
            for p in 0..g.npts {
                jm[d][p] -= nu[p];
            }
        }
        let gu: f64 = st.u.iter().map(|c| g.homogeneous_sq(c, 1)).sum();
        mu * gu + 2.5 * kappa * g.homogeneous_sq(&st.theta, 1) + g.vec_norm_sq(&jm) / (2.0 * sigma)
    }

    pub fn advance<F: FnMut(&FluidState) -> Result<()>>(
        &mut self,
        st: &mut FluidState,
        dt: f64,
        steps: usize,
        mut observe: F,
    ) -> Result<()> {
        for _ in 0..steps {
            self.step(st, dt)?;
            observe(st)?;
        }
        Ok(())
    }
}
