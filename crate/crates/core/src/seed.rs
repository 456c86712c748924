//! Macroscopic seed data (ρ, u, θ, n, E, B) shared by the kinetic and fluid runs.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VmbError};
use crate::spectral::{Grid, SpecField, SpecVec, C64};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SeedProfile {
    Zero,
    /// shear wave + temperature/charge modes + transverse fields
    #[default]
    ShearWave,
    /// single divergence-free velocity mode, no fields
    Stokes,
    /// transverse E only
    EField,
    /// velocity only, in x-direction-independent form
    VelocityOnly,
}

impl std::str::FromStr for SeedProfile {
    type Err = VmbError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => SeedProfile::Zero,
            "shear-wave" => SeedProfile::ShearWave,
            "stokes" => SeedProfile::Stokes,
            "e-field" => SeedProfile::EField,
            "velocity-only" => SeedProfile::VelocityOnly,
            _ => return Err(VmbError::Config(format!("unknown seed profile '{s}'"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct FluidSeed {
    pub rho: SpecField,
    pub u: SpecVec,
    pub theta: SpecField,
    pub n: SpecField,
    pub e: SpecVec,
    pub b: SpecVec,
}

impl FluidSeed {
    pub fn zeros(grid: &Grid) -> FluidSeed {
        FluidSeed {
            rho: grid.zeros(),
            u: grid.zeros_vec(),
            theta: grid.zeros(),
            n: grid.zeros(),
            e: grid.zeros_vec(),
            b: grid.zeros_vec(),
        }
    }

    pub fn profile(grid: &Grid, profile: &SeedProfile, a: f64) -> FluidSeed {
        let mut s = FluidSeed::zeros(grid);
        let f = |g: &dyn Fn([f64; 3]) -> f64| grid.sample_spec(g);
        match profile {
            SeedProfile::Zero => {}
            SeedProfile::ShearWave => {
                s.u = [grid.zeros(), f(&|x| a * x[0].cos()), f(&|x| 0.5 * a * x[0].sin())];
                s.theta = f(&|x| a * x[0].cos());
                s.rho = s.theta.iter().map(|z| -z).collect();
                s.n = f(&|x| 0.5 * a * (2.0 * x[0]).sin());
                s.e = [f(&|x| -0.25 * a * (2.0 * x[0]).cos()), f(&|x| 0.4 * a * x[0].sin()), grid.zeros()];
                s.b = [grid.zeros(), grid.zeros(), f(&|x| 0.3 * a * x[0].sin())];
            }
            SeedProfile::Stokes => {
                s.u = [grid.zeros(), f(&|x| a * x[0].sin()), grid.zeros()];
            }
            SeedProfile::EField => {
                s.e = [grid.zeros(), f(&|x| a * x[0].cos()), grid.zeros()];
            }
            SeedProfile::VelocityOnly => {
                s.u = [grid.zeros(), f(&|x| a * x[0].cos()), f(&|x| a * x[0].sin())];
            }
        }
        s.dealias(grid);
        s
    }

    pub fn dealias(&mut self, grid: &Grid) {
        grid.dealias(&mut self.rho);
        grid.dealias(&mut self.theta);
        grid.dealias(&mut self.n);
        for c in 0..3 {
            grid.dealias(&mut self.u[c]);
            grid.dealias(&mut self.e[c]);
            grid.dealias(&mut self.b[c]);
        }
    }

    /// Largest absolute physical value over all seed fields.
    pub fn amplitude(&self, grid: &Grid) -> f64 {
        let mut m: f64 = 0.0;
        let mut scan = |f: &[C64]| {
            for v in grid.inverse(f) {
                m = m.max(v.abs());
            }
        };
        scan(&self.rho);
        scan(&self.theta);
        scan(&self.n);
        for c in 0..3 {
            scan(&self.u[c]);
            scan(&self.e[c]);
            scan(&self.b[c]);
        }
        m
    }
}
