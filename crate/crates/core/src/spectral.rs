//! Periodic spectral grid on the torus of side 2π: FFTs, wavenumbers,
//! 2/3-rule mask, Leray projection and spectral norms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, VmbError};

pub type C64 = Complex64;
/// Spectral coefficients of a scalar field, normalized so that f(x) = Σ f̂_k e^{ik·x}.
pub type SpecField = Vec<C64>;
/// Spectral vector field (3 components regardless of spatial dimension).
pub type SpecVec = [SpecField; 3];

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub npts: usize,
    /// Wavevector per flat index (zero in unused directions, Nyquist set to 0).
    pub kvec: Vec<[f64; 3]>,
    pub k2: Vec<f64>,
    /// 2/3-rule: true where the mode is kept.
    pub mask: Vec<bool>,
    pub kmax: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Grid> {
        if !(1..=3).contains(&dim) {
            return Err(VmbError::Argument(format!("spatial dimension {dim} not in 1..=3")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(VmbError::Argument(format!("modes per axis must be even and >= 4, got {n}")));
        }
        let npts = n.pow(dim as u32);
        let kmax = n / 3;
        let mut kvec = Vec::with_capacity(npts);
        let mut k2 = Vec::with_capacity(npts);
        let mut mask = Vec::with_capacity(npts);
        for p in 0..npts {
            let idx = Self::unflatten(p, dim, n);
            let mut k = [0.0; 3];
            let mut keep = true;
            for a in 0..dim {
                let w = wavenumber(idx[a], n);
                if idx[a] == n / 2 {
                    keep = false;
                } else {
                    k[a] = w as f64;
                }
                if w.unsigned_abs() as usize > kmax {
                    keep = false;
                }
            }
            k2.push(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            kvec.push(k);
            mask.push(keep);
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid { dim, n, npts, kvec, k2, mask, kmax, fwd, inv })
    }

    fn unflatten(p: usize, dim: usize, n: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut r = p;
        for a in (0..dim).rev() {
            idx[a] = r % n;
            r /= n;
        }
        idx
    }

    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    pub fn point(&self, p: usize) -> [f64; 3] {
        let idx = Self::unflatten(p, self.dim, self.n);
        let h = 2.0 * PI / self.n as f64;
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = idx[a] as f64 * h;
        }
        x
    }

    /// Flat index of the mode with integer wavevector k (components beyond dim ignored).
    pub fn mode_index(&self, k: [i64; 3]) -> usize {
        let mut p = 0;
        for a in 0..self.dim {
            let i = k[a].rem_euclid(self.n as i64) as usize;
            p = p * self.n + i;
        }
        p
    }

    fn transform_axes(&self, buf: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut line = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for a in 0..self.dim {
            let stride = n.pow((self.dim - 1 - a) as u32);
            let block = stride * n;
            for base in (0..self.npts).step_by(block) {
                for off in 0..stride {
                    let s = base + off;
                    for i in 0..n {
                        line[i] = buf[s + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..n {
                        buf[s + i * stride] = line[i];
                    }
                }
            }
        }
    }

    /// Physical values → spectral coefficients.
    pub fn forward(&self, values: &[f64]) -> SpecField {
        let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.forward_complex(&mut buf);
        buf
    }

    pub fn forward_complex(&self, buf: &mut [C64]) {
        self.transform_axes(buf, &self.fwd);
        let s = 1.0 / self.npts as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }

    /// Spectral coefficients → physical values (real part).
    pub fn inverse(&self, spec: &[C64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inverse_complex(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    pub fn inverse_complex(&self, buf: &mut [C64]) {
        self.transform_axes(buf, &self.inv);
    }

    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.npts).map(|p| f(self.point(p))).collect()
    }

    pub fn sample_spec<F: Fn([f64; 3]) -> f64>(&self, f: F) -> SpecField {
        self.forward(&self.sample(f))
    }

    pub fn zeros(&self) -> SpecField {
        vec![C64::new(0.0, 0.0); self.npts]
    }

    pub fn zeros_vec(&self) -> SpecVec {
        [self.zeros(), self.zeros(), self.zeros()]
    }

    pub fn dealias(&self, f: &mut [C64]) {
        for (z, &keep) in f.iter_mut().zip(&self.mask) {
            if !keep {
                *z = C64::new(0.0, 0.0);
            }
        }
    }

    pub fn is_dealiased(&self, f: &[C64]) -> bool {
        f.iter().zip(&self.mask).all(|(z, &keep)| keep || z.norm() == 0.0)
    }

    /// Pseudo-spectral product of two spectral fields, with 2/3-rule truncation.
    pub fn product(&self, a: &[C64], b: &[C64]) -> SpecField {
        let pa = self.inverse(a);
        let pb = self.inverse(b);
        let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mut out = self.forward(&prod);
        self.dealias(&mut out);
        out
    }

    pub fn grad(&self, f: &[C64]) -> SpecVec {
        let mut out = self.zeros_vec();
        for p in 0..self.npts {
            for a in 0..3 {
                out[a][p] = I * self.kvec[p][a] * f[p];
            }
        }
        out
    }

    pub fn div(&self, v: &SpecVec) -> SpecField {
        (0..self.npts)
            .map(|p| {
                let k = self.kvec[p];
                I * (k[0] * v[0][p] + k[1] * v[1][p] + k[2] * v[2][p])
            })
            .collect()
    }

    pub fn curl(&self, v: &SpecVec) -> SpecVec {
        let mut out = self.zeros_vec();
        for p in 0..self.npts {
            let k = self.kvec[p];
            out[0][p] = I * (k[1] * v[2][p] - k[2] * v[1][p]);
            out[1][p] = I * (k[2] * v[0][p] - k[0] * v[2][p]);
            out[2][p] = I * (k[0] * v[1][p] - k[1] * v[0][p]);
        }
        out
    }

    pub fn laplacian(&self, f: &[C64]) -> SpecField {
        f.iter().zip(&self.k2).map(|(z, k2)| -z * *k2).collect()
    }

    /// k ↦ (I − kkᵀ/|k|²); zero mode untouched.
    pub fn leray_project(&self, v: &mut SpecVec) {
        for p in 0..self.npts {
            let k2 = self.k2[p];
            if k2 == 0.0 {
                continue;
            }
            let k = self.kvec[p];
            let dot = (k[0] * v[0][p] + k[1] * v[1][p] + k[2] * v[2][p]) / k2;
            for a in 0..3 {
                v[a][p] -= dot * k[a];
            }
        }
    }

    /// ∫|f|² dx.
    pub fn norm_sq(&self, f: &[C64]) -> f64 {
        self.volume() * f.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        self.norm_sq(f).sqrt()
    }

    pub fn vec_norm_sq(&self, v: &SpecVec) -> f64 {
        v.iter().map(|c| self.norm_sq(c)).sum()
    }

    pub fn vec_norm(&self, v: &SpecVec) -> f64 {
        self.vec_norm_sq(v).sqrt()
    }

    /// ∫ f g dx for real fields given spectrally.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> f64 {
        self.volume() * f.iter().zip(g).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
    }

    /// Σ_{j ≤ s} ‖∇^j f‖² computed with |k|^{2j} weights.
    pub fn hs_norm_sq(&self, f: &[C64], s: usize) -> f64 {
        self.volume()
            * f.iter()
                .zip(&self.k2)
                .map(|(z, &k2)| {
                    let mut w = 0.0;
                    let mut kp = 1.0;
                    for _ in 0..=s {
                        w += kp;
                        kp *= k2;
                    }
                    w * z.norm_sqr()
                })
                .sum::<f64>()
    }

    pub fn hs_norm_sq_vec(&self, v: &SpecVec, s: usize) -> f64 {
        v.iter().map(|c| self.hs_norm_sq(c, s)).sum()
    }

    /// ‖∇^j f‖² for a single order j.
    pub fn homogeneous_sq(&self, f: &[C64], j: usize) -> f64 {
        self.volume() * f.iter().zip(&self.k2).map(|(z, &k2)| k2.powi(j as i32) * z.norm_sqr()).sum::<f64>()
    }

    /// Mean value (zero mode).
    pub fn mean(&self, f: &[C64]) -> f64 {
        f[0].re
    }
}

pub fn vec_add_scaled(a: &mut SpecVec, s: f64, b: &SpecVec) {
    for c in 0..3 {
        for (x, y) in a[c].iter_mut().zip(&b[c]) {
            *x += s * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_derivative() {
        for dim in 1..=3 {
            let g = Grid::new(dim, 8).unwrap();
            let f = g.sample(|x| (x[0]).sin() + if dim > 1 { (2.0 * x[1]).cos() } else { 0.0 });
            let s = g.forward(&f);
            let back = g.inverse(&s);
            for (a, b) in f.iter().zip(&back) {
                assert!((a - b).abs() < 1e-13);
            }
            let d = g.grad(&s);
            let dx = g.inverse(&d[0]);
            let ex = g.sample(|x| x[0].cos());
            for (a, b) in dx.iter().zip(&ex) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mask_keeps_third() {
        let g = Grid::new(1, 32).unwrap();
        assert_eq!(g.mask.iter().filter(|&&m| m).count(), 21);
    }
}
