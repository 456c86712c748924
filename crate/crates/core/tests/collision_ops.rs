use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use vmb_core::collision::{
    assemble_linear_direct, collision_frequency, nu_radial, two_species_from, CollisionOperators, CollisionSpec,
};
use vmb_core::quadrature::{gauss_hermite_prob, gauss_legendre, SphereRule};
use vmb_core::velocity::{QuadSpec, VelocityBasis};

struct Fixture {
    basis: VelocityBasis,
    ops: CollisionOperators,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let basis = VelocityBasis::build(4, QuadSpec::default()).unwrap();
        let t0 = std::time::Instant::now();
        let ops = CollisionOperators::assemble(&basis, CollisionSpec::default()).unwrap();
        eprintln!("tensor assembly: {:.2}s", t0.elapsed().as_secs_f64());
        Fixture { basis, ops }
    })
}

fn random_two(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(2 * n, |_, _| rng.random_range(-1.0..1.0))
}

/// ν oracle: (2π)^{-3/2} 2π ∫₀^R r³ ∫_{-1}^{1} exp(−(r² + s² − 2rsc)/2) dc dr.
fn nu_oracle(s: f64) -> f64 {
    let gl = gauss_legendre(24).unwrap();
    let r_max = s + 15.0;
    let panels = 80;
    let h = r_max / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let r = p as f64 * h + 0.5 * h * (x + 1.0);
            // geometric panels in c toward c = 1 where exp(rsc) peaks
            let mut inner = 0.0;
            for m in 0..52 {
                let lo = 1.0 - 2.0 * 0.5f64.powi(m);
                let hi = if m == 51 { 1.0 } else { 1.0 - 2.0 * 0.5f64.powi(m + 1) };
                for (c, wc) in gl.nodes.iter().zip(&gl.weights) {
                    let cc = lo + 0.5 * (hi - lo) * (c + 1.0);
                    inner += 0.5 * (hi - lo) * wc * (-(r * r + s * s - 2.0 * r * s * cc) / 2.0).exp();
                }
            }
            acc += 0.5 * h * w * r * r * r * inner;
        }
    }
    acc * 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI).powf(-1.5)
}

#[test]
fn collision_frequency_closed_form_vs_oracle() {
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let s = 10.0 * i as f64 / 200.0;
        let d = (nu_radial(s) - nu_oracle(s)).abs();
        worst = worst.max(d);
    }
    assert!(worst < 1e-8, "worst deviation {worst:e}");
    // ν(0) is the mean speed 2√(2/π); a 3D Gauss-Hermite rule converges to it slowly
    let gh = gauss_hermite_prob(60).unwrap();
    let mut q = 0.0;
    for (a, wa) in gh.nodes.iter().zip(&gh.weights) {
        for (b, wb) in gh.nodes.iter().zip(&gh.weights) {
            for (c, wc) in gh.nodes.iter().zip(&gh.weights) {
                q += wa * wb * wc * (a * a + b * b + c * c).sqrt();
            }
        }
    }
    assert!((q - collision_frequency([0.0; 3])).abs() < 1e-3);
    assert!((collision_frequency([0.0; 3]) - 1.595_769_121_605_730_7).abs() < 1e-14);
}

#[test]
fn collision_frequency_linear_bounds() {
    let ratios: Vec<f64> = (0..=1000).map(|i| {
        let r = 10.0 * i as f64 / 1000.0;
        nu_radial(r) / (1.0 + r)
    }).collect();
    let c1 = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let c2 = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(c1 > 0.8 && c2 < 1.6, "c1={c1} c2={c2}");
    for r in [50.0, 200.0, 1000.0] {
        assert!((nu_radial(r) / r - 1.0).abs() < 1.0 / (r * r) + 1e-12);
    }
}

#[test]
fn operators_symmetric_with_exact_kernels() {
    let f = fixture();
    for a in [&f.ops.l_single, &f.ops.frak_l, &f.ops.l_two] {
        assert!((a - a.transpose()).abs().max() <= 1e-9);
    }
    for phi in &f.basis.kernel_two {
        assert!((&f.ops.l_two * phi).norm() <= 1e-7);
    }
    for chi in &f.basis.kernel_single {
        assert!((&f.ops.l_single * chi).norm() <= 1e-7);
    }
    assert!((&f.ops.frak_l * &f.basis.kernel_single[0]).norm() <= 1e-7);
}

#[test]
fn maxwellian_is_collision_equilibrium() {
    let f = fixture();
    let m = f.basis.kernel_single[0].as_slice();
    assert!(f.ops.apply_q(m, m).norm() < 1e-12);
}

#[test]
fn q_conserves_mass_brute_force() {
    // ⟨Q(e_a, e_b), χ₁⟩ from an independent (v, v*, σ) product quadrature
    let f = fixture();
    let b = &f.basis;
    let n = b.size;
    let gh = gauss_hermite_prob(5).unwrap();
    let sphere = SphereRule::lebedev(14).unwrap();
    let mut pts = Vec::new();
    for (x, wx) in gh.nodes.iter().zip(&gh.weights) {
        for (y, wy) in gh.nodes.iter().zip(&gh.weights) {
            for (z, wz) in gh.nodes.iter().zip(&gh.weights) {
                pts.push(([*x, *y, *z], wx * wy * wz, b.eval([*x, *y, *z])));
            }
        }
    }
    let chi1 = &b.kernel_single[0];
    let pairs = [(0usize, 0usize), (1, 4), (7, 20), (34, 12)];
    for (ia, ib) in pairs {
        let mut acc = 0.0;
        for (v, wv, pv) in &pts {
            for (vs, ws, pw) in &pts {
                let g = [v[0] - vs[0], v[1] - vs[1], v[2] - vs[2]];
                let r = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                let vc = [(v[0] + vs[0]) / 2.0, (v[1] + vs[1]) / 2.0, (v[2] + vs[2]) / 2.0];
                let mut gain = 0.0;
                for (s, w) in sphere.points.iter().zip(&sphere.weights) {
                    let vp = [vc[0] + 0.5 * r * s[0], vc[1] + 0.5 * r * s[1], vc[2] + 0.5 * r * s[2]];
                    gain += w * b.eval(vp).dot(chi1);
                }
                let loss = pv.dot(chi1);
                acc += wv * ws * r * pv[ia] * pw[ib] * (gain - loss);
            }
        }
        assert!(acc.abs() < 1e-12, "({ia},{ib}): {acc:e}");
        let t: f64 = (0..n).map(|k| f.ops.gamma_tensor[(ia * n + ib) * n + k] * chi1[k]).sum();
        assert!(t.abs() < 1e-12);
    }
}

#[test]
fn tensor_matches_direct_weak_form_assembly() {
    let f = fixture();
    let (l_direct, fl_direct) = assemble_linear_direct(&f.basis).unwrap();
    let dl = (&l_direct - &f.ops.l_single).abs().max();
    let df = (&fl_direct - &f.ops.frak_l).abs().max();
    assert!(dl < 1e-9, "L mismatch {dl:e}");
    assert!(df < 1e-9, "frakL mismatch {df:e}");
    // (𝒮𝓛G)·q₁ = (𝓛+𝔏)(G·q₁) and (𝒮𝓛G)·q₂ = 2𝓛(G·q₂), right sides from the direct path
    let n = f.basis.size;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let g = random_two(&mut rng, n);
        let sg = &f.ops.l_two * &g;
        let q1 = g.rows(0, n) - g.rows(n, n);
        let q2 = g.rows(0, n) + g.rows(n, n);
        let lhs1 = sg.rows(0, n) - sg.rows(n, n);
        let lhs2 = sg.rows(0, n) + sg.rows(n, n);
        assert!((lhs1 - (&l_direct + &fl_direct) * q1).norm() < 1e-9);
        assert!((lhs2 - &l_direct * q2 * 2.0).norm() < 1e-9);
    }
    let rebuilt = two_species_from(&l_direct, &fl_direct);
    assert!((rebuilt - &f.ops.l_two).abs().max() < 1e-9);
}

#[test]
fn spectral_gap_positive_and_stable() {
    let f = fixture();
    let gap = f.ops.spectral_gap(&f.basis);
    assert!(gap > 0.0);
    let fine_basis = VelocityBasis::build(4, QuadSpec { nodes_per_axis: 24 }).unwrap();
    let fine = CollisionOperators::assemble(&fine_basis, CollisionSpec { sphere_points: 50 }).unwrap();
    let gap_fine = fine.spectral_gap(&fine_basis);
    assert!(((gap - gap_fine) / gap).abs() < 0.05, "gap {gap} vs {gap_fine}");
    // single-species and 𝓛+𝔏 are nonnegative too
    let (vals, _) = vmb_core::collision::restricted_spectrum(&f.ops.l_single, &f.basis.kernel_single);
    assert!(vals.iter().all(|x| *x > 0.0));
    let (vals, _) = vmb_core::collision::restricted_spectrum(&f.ops.frak_l, &f.basis.kernel_single[..1]);
    assert!(vals.iter().all(|x| *x > 0.0));
}

#[test]
fn gamma_properties() {
    let f = fixture();
    let n = f.basis.size;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let zero = DVector::zeros(2 * n);
    let h = random_two(&mut rng, n);
    assert_eq!(f.ops.apply_gamma(&zero, &h).norm(), 0.0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g = random_two(&mut rng, n);
        let h = random_two(&mut rng, n);
        let gh = f.ops.apply_gamma(&g, &h);
        let hg = f.ops.apply_gamma(&h, &g);
        assert!((&gh - &hg).norm() < 1e-12 * gh.norm().max(1.0));
        for phi in &f.basis.kernel_two {
            worst = worst.max(gh.dot(phi).abs() / (g.norm() * h.norm()));
        }
        assert!(f.basis.project_p(&gh).norm() / (g.norm() * h.norm()) < 1e-7);
    }
    assert!(worst <= 1e-7, "worst {worst:e}");
    // fast diagonal path agrees with the general form
    let g = random_two(&mut rng, n);
    let mut work = vec![0.0; n * n];
    let mut out = vec![0.0; 2 * n];
    f.ops.gamma_diagonal_into(g.as_slice(), &mut work, &mut out);
    assert!((DVector::from_vec(out) - f.ops.apply_gamma(&g, &g)).norm() < 1e-12);
}

#[test]
fn nu_norm_and_coercivity() {
    let f = fixture();
    let n = f.basis.size;
    let c1 = (0..=1000)
        .map(|i| {
            let r = 10.0 * i as f64 / 1000.0;
            nu_radial(r) / (1.0 + r)
        })
        .fold(f64::INFINITY, f64::min);
    assert_eq!(f.ops.nu_weighted_norm_sq(&DVector::zeros(2 * n)), 0.0);
    let lambda = f.ops.coercivity_constant(&f.basis);
    assert!(lambda > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..50 {
        let g = random_two(&mut rng, n);
        assert!(f.ops.nu_weighted_norm_sq(&g) >= c1 * g.norm_squared());
        let perp = f.basis.project_p_perp(&g);
        let lhs = g.dot(&(&f.ops.l_two * &g));
        assert!(lhs >= lambda * f.ops.nu_weighted_norm_sq(&perp) * (1.0 - 1e-9));
    }
}

#[test]
fn hilbert_split_structure() {
    let f = fixture();
    let n = f.basis.size;
    let (k, norm) = f.ops.compact_part();
    assert!(norm.is_finite() && norm < 10.0);
    assert!((&k - k.transpose()).abs().max() < 1e-6);
    // two species: 𝒮𝓛 = 2ν𝕀 − 𝒦 with 𝒦 bounded
    let mut two_nu = DMatrix::<f64>::zeros(2 * n, 2 * n);
    two_nu.view_mut((0, 0), (n, n)).copy_from(&(&f.ops.nu_matrix * 2.0));
    two_nu.view_mut((n, n), (n, n)).copy_from(&(&f.ops.nu_matrix * 2.0));
    let kk = two_nu - &f.ops.l_two;
    let e = nalgebra::SymmetricEigen::new((&kk + kk.transpose()) * 0.5);
    let kn = e.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(kn.is_finite() && kn < 20.0);
    // ⟨𝓛g, g⟩ = ‖g‖²_ν − ⟨Kg, g⟩
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let lhs = g.dot(&(&f.ops.l_single * &g));
    let rhs = g.dot(&(&f.ops.nu_matrix * &g)) - g.dot(&(&k * &g));
    assert!((lhs - rhs).abs() < 1e-10);
}
