use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use vmb_core::velocity::{ladder, thirteen_moments, project_thirteen, QuadSpec, SeventeenMomentsBasis, VelocityBasis};

fn basis() -> &'static VelocityBasis {
    static B: OnceLock<VelocityBasis> = OnceLock::new();
    B.get_or_init(|| VelocityBasis::build(4, QuadSpec::default()).unwrap())
}

fn random_two(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(2 * n, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn gram_is_identity() {
    let b = basis();
    assert_eq!(b.size, 35);
    let g = b.gram();
    assert!((g - DMatrix::<f64>::identity(35, 35)).abs().max() < 1e-12);
}

#[test]
fn maxwellian_moments() {
    let b = basis();
    let m = |f: &dyn Fn([f64; 3]) -> f64| -> f64 { b.nodes.iter().zip(&b.weights).map(|(v, w)| w * f(*v)).sum() };
    let r2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    assert!((m(&|_| 1.0) - 1.0).abs() < 1e-8);
    assert!(m(&|v| v[0]).abs() < 1e-8);
    assert!((m(&|v| r2(v)) - 3.0).abs() < 1e-8);
    assert!((m(&|v| r2(v) * r2(v)) - 15.0).abs() < 1e-8);
    // Maxwell-absorbed weights agree with the explicit Maxwellian values
    let direct: f64 = b.nodes.iter().enumerate().map(|(q, _)| b.weights[q] / b.maxwellian[q] * b.maxwellian[q]).sum();
    assert!((direct - 1.0).abs() < 1e-12);
}

#[test]
fn order_two_holds_kernel_exactly() {
    let b = VelocityBasis::build(2, QuadSpec { nodes_per_axis: 6 }).unwrap();
    assert_eq!(b.size, 10);
    // χ₅ norm² = 3/2 and Π_𝓛 fixes it
    let chi5 = &b.kernel_single[4];
    assert!((chi5.norm_squared() - 1.5).abs() < 1e-12);
    assert!((b.project_pi_l(chi5) - chi5).norm() < 1e-12);
    // reconstruction of χ₅ at a point
    let v = [0.3, -1.1, 0.7];
    let val = b.eval(v).dot(chi5);
    let exact = 0.5 * (0.09 + 1.21 + 0.49) - 1.5;
    assert!((val - exact).abs() < 1e-12);
}

#[test]
fn kernel_norms() {
    let b = basis();
    let norms: Vec<f64> = b.kernel_two.iter().map(|p| p.norm_squared()).collect();
    let expect = [1.0, 1.0, 2.0, 2.0, 2.0, 3.0];
    for (a, e) in norms.iter().zip(expect) {
        assert!((a - e).abs() < 1e-12);
    }
    assert!((b.kernel_single[1].norm_squared() - 1.0).abs() < 1e-12);
}

#[test]
fn projections_are_orthogonal_projectors() {
    let b = basis();
    let p = b.p_matrix();
    assert!((&p * &p - &p).abs().max() < 1e-10);
    assert!((&p - p.transpose()).abs().max() < 1e-10);
    let pl = b.pi_l_matrix();
    assert!((&pl * &pl - &pl).abs().max() < 1e-10);
    assert!((&pl - pl.transpose()).abs().max() < 1e-10);
    for (i, phi) in b.kernel_two.iter().enumerate() {
        assert!((b.project_p(phi) - phi).norm() < 1e-12, "φ{}", i + 1);
        assert!(b.project_p_perp(phi).norm() < 1e-12);
    }
    for chi in &b.kernel_single {
        assert!((b.project_pi_l(chi) - chi).norm() < 1e-12);
    }
}

#[test]
fn p_norm_identity_and_decomposition() {
    let b = basis();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let g = random_two(&mut rng, b.size);
        let pg = b.project_p(&g);
        let (rp, rm, u, th) = b.kernel_coordinates(&g);
        let expect = rp * rp + rm * rm + 2.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) + 3.0 * th * th;
        assert!((pg.norm_squared() - expect).abs() < 1e-12 * expect.max(1.0));
        let perp = b.project_p_perp(&g);
        let rel = (g.norm_squared() - pg.norm_squared() - perp.norm_squared()).abs() / g.norm_squared();
        assert!(rel < 1e-12);
        assert!(b.project_p(&perp).norm() < 1e-12);
        // vectors orthogonal to every φ_i project to zero
        assert!(b.project_p(&perp).norm() < 1e-12);
    }
}

#[test]
fn single_species_consistency() {
    // ⟨G⁺, χ₁⟩ = ⟨G, φ₁⟩, ⟨G⁻, χ₁⟩ = ⟨G, φ₂⟩, and the χ_{1+i}, χ₅ relations
    let b = basis();
    let n = b.size;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_two(&mut rng, n);
    let gp = g.rows(0, n).into_owned();
    let gm = g.rows(n, n).into_owned();
    let chi = &b.kernel_single;
    let phi = &b.kernel_two;
    assert!((gp.dot(&chi[0]) - g.dot(&phi[0])).abs() < 1e-13);
    assert!((gm.dot(&chi[0]) - g.dot(&phi[1])).abs() < 1e-13);
    let q_phi = |k: usize| {
        let mut x = phi[k].clone();
        for i in n..2 * n {
            x[i] = -x[i];
        }
        x
    };
    for i in 0..3 {
        let qp = q_phi(2 + i);
        let plus = 0.5 * g.dot(&phi[2 + i]) + 0.5 * g.dot(&qp);
        let minus = 0.5 * g.dot(&phi[2 + i]) - 0.5 * g.dot(&qp);
        assert!((gp.dot(&chi[1 + i]) - plus).abs() < 1e-13);
        assert!((gm.dot(&chi[1 + i]) - minus).abs() < 1e-13);
    }
    // θ± = ⟨G±, (2/3)χ₅⟩ and θ = (θ⁺+θ⁻)/2 = ⟨G, φ₆⟩/3
    let th = 0.5 * ((2.0 / 3.0) * gp.dot(&chi[4]) + (2.0 / 3.0) * gm.dot(&chi[4]));
    assert!((th - g.dot(&phi[5]) / 3.0).abs() < 1e-13);
}

#[test]
fn moment_extraction_examples() {
    let b = basis();
    let n = b.size;
    let eps = 0.3;
    // G = u·v q₂ √M
    let u = [0.2, -0.4, 0.1];
    let mut g = DVector::zeros(2 * n);
    for d in 0..3 {
        g += &b.kernel_two[2 + d] * u[d];
    }
    let m = b.extract_moments(&g, eps).unwrap();
    assert!(m.rho.abs() < 1e-13 && m.theta.abs() < 1e-13 && m.n.abs() < 1e-13 && m.w.abs() < 1e-13);
    for d in 0..3 {
        assert!((m.u[d] - u[d]).abs() < 1e-13);
        assert!(m.j[d].abs() < 1e-13);
    }
    // G = (ε/2) c Φ q₁ → j = c (⟨q₁, q₁⟩ = 2 absorbs the ½)
    let c = [0.7, 0.0, -0.2];
    let mut g = DVector::zeros(2 * n);
    for d in 0..3 {
        let v = &b.kernel_single[1 + d];
        for k in 0..n {
            g[k] += 0.5 * eps * c[d] * v[k];
            g[n + k] -= 0.5 * eps * c[d] * v[k];
        }
    }
    let m = b.extract_moments(&g, eps).unwrap();
    for d in 0..3 {
        assert!((m.j[d] - c[d]).abs() < 1e-13);
    }
    assert!(b.extract_moments(&g, 0.0).is_err());
}

#[test]
fn pi_perp_relation_with_p_perp() {
    // Π⊥_𝓛 G⁺ = (ℙ⊥G)⁺ − (ε/2) j·v√M − (ε/2) w (|v|²/2 − 3/2)√M
    let b = basis();
    let n = b.size;
    let eps = 0.4;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_two(&mut rng, n);
    let m = b.extract_moments(&g, eps).unwrap();
    let gp = g.rows(0, n).into_owned();
    let lhs = &gp - b.project_pi_l(&gp);
    let perp = b.project_p_perp(&g);
    let mut rhs = perp.rows(0, n).into_owned();
    for d in 0..3 {
        rhs -= &b.kernel_single[1 + d] * (0.5 * eps * m.j[d]);
    }
    rhs -= &b.kernel_single[4] * (0.5 * eps * m.w);
    assert!((lhs - rhs).norm() < 1e-12);
}

#[test]
fn seventeen_moments() {
    let b = basis();
    let s = SeventeenMomentsBasis::build(b).unwrap();
    assert_eq!(s.rank, 17);
    let o = &s.ortho;
    assert!((o.transpose() * o - DMatrix::<f64>::identity(17, 17)).abs().max() < 1e-12);
    // f ∈ Span 𝔅 → f, with recovered coefficients
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = DVector::from_fn(17, |_, _| rng.random_range(-1.0..1.0));
    let f = &s.raw * &c;
    let (coef, proj) = s.project(&f);
    assert!((&proj - &f).norm() < 1e-11);
    assert!((coef.f_pm[0] - c[0]).abs() < 1e-10);
    assert!((coef.f_jk[2] - c[16]).abs() < 1e-10);
    // f ⊥ Span 𝔅 → 0
    let r = random_two(&mut rng, b.size);
    let perp = &r - o * (o.transpose() * &r);
    assert!(s.project(&perp).1.norm() < 1e-12);
    // idempotent
    let p1 = s.project(&r).1;
    assert!((s.project(&p1).1 - &p1).norm() < 1e-12);
    // order 2 cannot hold 𝔅
    let b2 = VelocityBasis::build(2, QuadSpec { nodes_per_axis: 8 }).unwrap();
    assert!(SeventeenMomentsBasis::build(&b2).is_err());
    // single-species thirteen moments
    let q = thirteen_moments(b).unwrap();
    let x = b.kernel_single[4].clone();
    assert!((project_thirteen(&q, &x) - &x).norm() < 1e-12);
}

#[test]
fn velocity_matrices_match_ladder_algebra() {
    // Quadrature-built Galerkin matrices equal the analytic Hermite-function ladder
    // operators truncated to the basis.
    let b = basis();
    let order = b.order;
    let emb = ladder::embed(order, order + 1);
    let c = &b.coef;
    for d in 0..3 {
        let lm = emb.transpose() * ladder::multiply(order, d);
        let ld = emb.transpose() * ladder::derivative(order, d);
        let mul = c * lm * c.transpose();
        let dif = c * ld * c.transpose();
        assert!((&mul - &b.vel_mul[d]).abs().max() < 1e-11);
        assert!((&dif - &b.vel_diff[d]).abs().max() < 1e-11);
        assert!((&b.vel_diff[d] + b.vel_diff[d].transpose()).abs().max() < 1e-11);
        assert!((&b.rot[d] + b.rot[d].transpose()).abs().max() < 1e-11);
    }
    // rotations annihilate radial functions: Ω_b χ₁ = Ω_b χ₅ = 0
    for bb in 0..3 {
        assert!((&b.rot[bb] * &b.kernel_single[0]).norm() < 1e-12);
        assert!((&b.rot[bb] * &b.kernel_single[4]).norm() < 1e-12);
    }
    // Ω_3 (v_1 √M) = (v × e_3)·∇ (v_1) √M = v_2 √M
    let r = &b.rot[2] * &b.kernel_single[1];
    assert!((r - &b.kernel_single[2]).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn projection_idempotent_random(seed in 0u64..10_000) {
        let b = basis();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_two(&mut rng, b.size);
        let p = b.project_p(&g);
        prop_assert!((b.project_p(&p) - &p).norm() < 1e-12);
        let h = random_two(&mut rng, b.size);
        // self-adjoint
        prop_assert!((b.project_p(&g).dot(&h) - g.dot(&b.project_p(&h))).abs() < 1e-12);
    }
}
