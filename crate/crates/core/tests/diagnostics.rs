use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmb_core::collision::{CollisionOperators, CollisionSpec};
use vmb_core::diagnostics::*;
use vmb_core::fluid::{compute_ohm_current, compute_w, FluidOptions, FluidParams, FluidSolver};
use vmb_core::kinetic::{KineticOptions, KineticSolver, KineticState};
use vmb_core::seed::{FluidSeed, SeedProfile};
use vmb_core::spectral::{Grid, SpecField, SpecVec, C64};
use vmb_core::transport::{solve_transport, TransportSolutions};
use vmb_core::velocity::{QuadSpec, VelocityBasis};

struct Fixture {
    basis: Arc<VelocityBasis>,
    ops: Arc<CollisionOperators>,
    ts: TransportSolutions,
    sigma: f64,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let basis = Arc::new(VelocityBasis::build(3, QuadSpec::default()).unwrap());
        let ops = Arc::new(CollisionOperators::assemble(&basis, CollisionSpec::default()).unwrap());
        let ts = solve_transport(&ops, &basis).unwrap();
        let sigma = ts.report(&ops, &basis).sigma;
        Fixture { basis, ops, ts, sigma }
    })
}

fn ctx(grid: &Grid, eps: f64, s_max: usize) -> DiagContext {
    let f = fixture();
    DiagContext::new(grid.clone(), f.basis.clone(), f.ops.clone(), &f.ts, f.sigma, eps, s_max).unwrap()
}

fn solver(grid: &Grid, eps: f64) -> KineticSolver {
    let f = fixture();
    KineticSolver::new(grid.clone(), f.basis.clone(), f.ops.clone(), eps, KineticOptions::default()).unwrap()
}

fn sub(a: &[C64], b: &[C64]) -> SpecField {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn moments_from(g: &Grid) -> MomentFields {
    MomentFields {
        rho: g.zeros(),
        u: g.zeros_vec(),
        theta: g.zeros(),
        theta5: g.zeros(),
        n: g.zeros(),
        j: g.zeros_vec(),
        w: g.zeros(),
        e: g.zeros_vec(),
        b: g.zeros_vec(),
    }
}

#[test]
fn zero_state_functionals_vanish() {
    let g = Grid::new(1, 8).unwrap();
    let c = ctx(&g, 0.5, 3);
    let st = KineticState::zeros(&g, 2 * fixture().basis.size, 0.5);
    for s in 0..=3 {
        assert_eq!(c.energy_functional(&st, s).unwrap(), 0.0);
    }
    for s in 2..=3 {
        assert_eq!(c.dissipation_functional(&st, s).unwrap(), 0.0);
    }
    let loc = c.local_conservation_residuals(&st, &KineticState { t: 0.1, ..st.clone() }).unwrap();
    assert!(loc.iter().all(|x| *x == 0.0));
    let rec = c.record(&st, Some(loc));
    assert!(rec.all_finite_nonneg());
    assert_eq!(rec.row().len(), MomentRecord::header().len());
}

#[test]
fn argument_errors() {
    let g = Grid::new(1, 8).unwrap();
    let c = ctx(&g, 0.5, 2);
    let st = KineticState::zeros(&g, 2 * fixture().basis.size, 0.5);
    assert!(c.energy_functional(&st, 3).is_err());
    assert!(c.dissipation_functional(&st, 1).is_err());
    let other = KineticState::zeros(&Grid::new(1, 16).unwrap(), st.nv, 0.5);
    assert!(c.energy_functional(&other, 0).is_err());
    assert!(c.local_conservation_residuals(&st, &other).is_err());
    assert!(c.local_conservation_residuals(&st, &st).is_err());
    let f = fixture();
    assert!(DiagContext::new(g.clone(), f.basis.clone(), f.ops.clone(), &f.ts, f.sigma, 0.5, MAX_S + 1).is_err());
}

#[test]
fn pure_kernel_constant_state_has_no_dissipation() {
    let g = Grid::new(1, 8).unwrap();
    let c = ctx(&g, 0.25, 3);
    let basis = &fixture().basis;
    let nv = 2 * basis.size;
    let mut st = KineticState::zeros(&g, nv, 0.25);
    let coeffs = [0.3, -0.2, 0.1, 0.05, -0.4, 0.25];
    for (phi, a) in basis.kernel_two.iter().zip(coeffs) {
        for i in 0..nv {
            st.g[i] += C64::new(a * phi[i], 0.0);
        }
    }
    assert!(c.dissipation_functional(&st, 2).unwrap().abs() < 1e-14);
    assert!(c.dissipation_functional(&st, 3).unwrap().abs() < 1e-14);
    assert!(c.energy_functional(&st, 0).unwrap() > 0.0);
}

#[test]
fn velocity_derivative_gram_oracle() {
    let basis = &fixture().basis;
    let norms = VelocityNorms::new(basis, 2).unwrap();
    let n = basis.size;
    let id = nalgebra::DMatrix::<f64>::identity(n, n);
    assert!((&norms.plain[0] - id).amax() < 1e-12);
    // ∇√M = −(v/2)√M, so ∫|∇√M|² = E|v|²/4 = 3/4
    let m = &basis.kernel_single[0];
    let h1 = (m.transpose() * &norms.plain[1] * m)[(0, 0)];
    assert!((h1 - 0.75).abs() < 1e-12, "{h1}");
    // ∂_a∂_b √M = (v_a v_b/4 − δ_ab/2)√M, so Σ_ab ∫|·|² = (E|v|⁴ − 4E|v|² + 12)/16 = (15 − 12 + 12)/16
    let h2 = (m.transpose() * &norms.plain[2] * m)[(0, 0)];
    assert!((h2 - 15.0 / 16.0).abs() < 1e-12, "{h2}");
    // ν-weighted Gram is positive definite
    let e = norms.nu[0].symmetric_eigenvalues();
    assert!(e.min() > 0.0);
}

#[test]
fn residuals_vanish_on_exact_inputs() {
    let g = Grid::new(1, 16).unwrap();
    let sigma = 0.7;
    let mut m = moments_from(&g);
    m.u = [g.zeros(), g.sample_spec(|x| 0.1 * x[0].cos()), g.sample_spec(|x| 0.05 * x[0].sin())];
    m.n = g.sample_spec(|x| 0.1 * (2.0 * x[0]).sin());
    m.e = [g.sample_spec(|x| -0.05 * (2.0 * x[0]).cos()), g.sample_spec(|x| 0.04 * x[0].sin()), g.zeros()];
    m.b = [g.zeros(), g.sample_spec(|x| 0.02 * x[0].cos()), g.sample_spec(|x| 0.03 * x[0].sin())];
    m.theta = g.sample_spec(|x| 0.1 * x[0].cos());
    m.rho = m.theta.iter().map(|z| -z).collect();
    m.j = compute_ohm_current(&g, &m.u, &m.n, &m.e, &m.b, sigma);
    m.w = compute_w(&g, &m.n, &m.theta);
    assert!(ohm_residual(&g, &m, sigma) <= 1e-12);
    assert!(boussinesq_residual(&g, &m) <= 1e-12);
    assert!(energy_equiv_residual(&g, &m) <= 1e-12);

    m.n = g.zeros();
    m.w = g.sample_spec(|x| 0.2 * x[0].sin());
    let want = g.norm(&m.w);
    assert!((energy_equiv_residual(&g, &m) - want).abs() <= 1e-15);

    let zero = moments_from(&g);
    assert_eq!(ohm_residual(&g, &zero, sigma), 0.0);
}

#[test]
fn boussinesq_residual_of_lifted_data() {
    let g = Grid::new(1, 16).unwrap();
    let c = ctx(&g, 0.5, 0);
    let s = solver(&g, 0.5);
    // no fields: the energy line then leaves the θ zero mode untouched
    let mut prepared = FluidSeed::profile(&g, &SeedProfile::ShearWave, 1e-2);
    prepared.e = g.zeros_vec();
    prepared.b = g.zeros_vec();
    prepared.n = g.zeros();
    let (st, _) = s.init_well_prepared(&prepared).unwrap();
    assert!(boussinesq_residual(&g, &c.moments(&st)) <= 1e-15);

    let mut unprepared = prepared.clone();
    unprepared.rho = g.sample_spec(|x| 0.02 * (2.0 * x[0]).cos());
    let (st, _) = s.init_well_prepared(&unprepared).unwrap();
    let want = g.norm(&unprepared.rho.iter().zip(&unprepared.theta).map(|(a, b)| a + b).collect::<SpecField>());
    assert!((boussinesq_residual(&g, &c.moments(&st)) - want).abs() <= 1e-14 * want.max(1.0));
}

#[test]
fn moment_errors_start_at_zero_on_fluid_manifold() {
    let g = Grid::new(1, 16).unwrap();
    let c = ctx(&g, 0.25, 0);
    let s = solver(&g, 0.25);
    let seed = FluidSeed::profile(&g, &SeedProfile::VelocityOnly, 1e-2);
    let mut seed = seed;
    seed.theta = g.sample_spec(|x| 0.01 * x[0].cos());
    seed.rho = seed.theta.iter().map(|z| -z).collect();
    let (st, _) = s.init_well_prepared(&seed).unwrap();
    let fs = FluidSolver::new(g.clone(), FluidParams { mu: 0.3, kappa: 0.4, sigma: 0.7 }, FluidOptions::default()).unwrap();
    let f0 = fs.init_from_seed(&seed);
    let series = moment_convergence(&g, 0.25, &[(0.0, c.moments(&st))], &[f0.clone()]).unwrap();
    assert!(series.final_errors.iter().all(|e| *e <= 1e-15), "{:?}", series.final_errors);

    let mut late = f0;
    late.t = 0.5;
    assert!(moment_convergence(&g, 0.25, &[(0.0, c.moments(&st))], &[late]).is_err());
    assert!(moment_convergence(&g, 0.25, &[], &[fs.init_from_seed(&seed)]).is_err());
}

#[test]
fn global_residuals_and_field_scaling() {
    let g = Grid::new(1, 16).unwrap();
    let seed = FluidSeed::profile(&g, &SeedProfile::ShearWave, 1e-2);
    let s1 = solver(&g, 0.5);
    let (st, _) = s1.init_well_prepared(&seed).unwrap();
    let c0 = s1.conserved(&st);
    assert!(global_conservation_residuals(&s1, &st, &c0).iter().all(|d| *d == 0.0));

    // the field term of the energy line is linear in ε
    let s2 = solver(&g, 0.25);
    let field = |s: &KineticSolver| {
        let c = s.conserved(&st);
        let g0 = nalgebra::DVector::from_iterator(st.nv, st.mode(0).iter().map(|z| z.re));
        c.energy - g.volume() * g0.dot(&fixture().basis.kernel_two[5])
    };
    let (a, b) = (field(&s1), field(&s2));
    assert!(a > 0.0);
    assert!((a / b - 2.0).abs() < 1e-12);
    assert!((a - 0.25 * s1.field_energy(&st)).abs() <= 1e-14 * a);
}

fn random_state(g: &Grid, nv: usize, eps: f64, seed: u64) -> KineticState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = KineticState::zeros(g, nv, eps);
    let mut rnd = |amp: f64| -> SpecField {
        let phys: Vec<f64> = (0..g.npts).map(|_| amp * rng.random_range(-1.0..1.0)).collect();
        let mut f = g.forward(&phys);
        g.dealias(&mut f);
        f
    };
    for i in 0..nv {
        let f = rnd(1e-2);
        for p in 0..g.npts {
            st.g[p * nv + i] = f[p];
        }
    }
    let e: SpecVec = [rnd(1e-2), rnd(1e-2), rnd(1e-2)];
    let b: SpecVec = [rnd(1e-2), rnd(1e-2), rnd(1e-2)];
    st.e = e;
    st.b = b;
    st
}

#[test]
fn charge_line_is_divergence_of_ampere_line() {
    let g = Grid::new(2, 8).unwrap();
    let eps = 0.5;
    let mut s = solver(&g, eps);
    let c = ctx(&g, eps, 0);
    let mut st = random_state(&g, 2 * fixture().basis.size, eps, 3);
    s.enforce_constraints(&mut st);
    let s0 = st.clone();
    s.step(&mut st, 0.01).unwrap();
    let f = c.local_residual_fields(&s0, &st).unwrap();
    let div_amp = g.div(&f.ampere);
    let diff = sub(&f.n, &div_amp);
    let scale = g.norm(&f.n) + g.vec_norm(&f.ampere) + 1e-12;
    assert!(g.norm(&diff) <= 1e-10 * scale.max(1.0), "{} vs {}", g.norm(&diff), scale);
}

#[test]
fn local_residuals_second_order_in_spacing() {
    let g = Grid::new(1, 16).unwrap();
    let eps = 0.5;
    let seed = FluidSeed::profile(&g, &SeedProfile::ShearWave, 5e-2);
    let c = ctx(&g, eps, 0);
    let pair_residual = |dt: f64| -> [f64; 7] {
        let mut s = solver(&g, eps);
        let (mut st, _) = s.init_well_prepared(&seed).unwrap();
        let steps = (0.2 / dt).round() as usize;
        s.advance(&mut st, dt, steps, |_, _| Ok(())).unwrap();
        let s0 = st.clone();
        s.advance(&mut st, dt, 2, |_, _| Ok(())).unwrap();
        c.local_conservation_residuals(&s0, &st).unwrap()
    };
    let a = pair_residual(0.02);
    let b = pair_residual(0.01);
    for i in 0..7 {
        if a[i] < 1e-13 {
            assert!(b[i] < 1e-13, "law {i}: {} -> {}", a[i], b[i]);
            continue;
        }
        let order = (a[i] / b[i]).log2();
        assert!((order - 2.0).abs() <= 0.6, "law {i}: {} -> {} order {order}", a[i], b[i]);
    }
}
