use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmb_core::collision::CollisionSpec;
use vmb_core::fluid::FluidState;
use vmb_core::harness::checkpoint::{decode, encode};
use vmb_core::harness::config::CoefficientChoice;
use vmb_core::harness::run::{contraction_table, run as run_harness};
use vmb_core::harness::{
    load_checkpoint, parse_config, parse_with_overrides, save_checkpoint, CheckpointMeta, ExperimentConfig, Mode,
    Overrides, ResolvedConfig, Snapshot,
};
use vmb_core::kinetic::KineticState;
use vmb_core::spectral::{Grid, C64};
use vmb_core::velocity::QuadSpec;
use vmb_core::VmbError;

fn parse_line(text: &str) -> (usize, String) {
    match parse_config(text) {
        Err(VmbError::Parse { line, msg }) => (line, msg),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn minimal_config_fills_defaults() {
    let r = parse_config("mode = \"coeffs\"\n").unwrap();
    assert_eq!(r.config.mode, Mode::Coeffs);
    assert_eq!(r.config.grid.modes, 32);
    assert_eq!(r.config.basis.order, 4);
    assert_eq!(r.config.physics.coefficients, CoefficientChoice::TwoSpecies);
    for key in ["grid.modes", "basis.order", "time.dt", "physics.eps", "workers"] {
        assert!(r.defaulted.iter().any(|d| d == key), "{key} missing from {:?}", r.defaulted);
    }
    assert!(!r.defaulted.iter().any(|d| d == "mode"));
}

#[test]
fn eps_forms_and_ordering() {
    let r = parse_config("mode = \"converge\"\n[physics]\neps = \"0.125, 0.5,0.25\"\n").unwrap();
    assert_eq!(r.config.physics.eps, vec![0.5, 0.25, 0.125]);
    let r = parse_config("mode = \"converge\"\n[physics]\neps = [0.25, 1.0, 0.25]\n").unwrap();
    assert_eq!(r.config.physics.eps, vec![1.0, 0.25]);
    let r = parse_config("mode = \"converge\"\n[physics]\neps = 0.5\n").unwrap();
    assert_eq!(r.config.physics.eps, vec![0.5]);
}

#[test]
fn invalid_values_report_their_line() {
    let (line, msg) = parse_line("mode = \"converge\"\n\n[physics]\neps = [0.5, 0.0]\n");
    assert_eq!(line, 4, "{msg}");
    let (line, _) = parse_line("mode = \"converge\"\n[physics]\neps = 1.5\n");
    assert_eq!(line, 3);
    let (line, msg) = parse_line("mode = \"coeffs\"\n[grid]\nmodez = 8\n");
    assert_eq!(line, 3);
    assert!(msg.contains("modez"), "{msg}");
    let (line, _) = parse_line("mode = \"coeffs\"\n[grid]\nmodes = 7\n");
    assert_eq!(line, 3);
    let (line, _) = parse_line("mode = \"coeffs\"\n[basis]\norder = 9\n");
    assert_eq!(line, 3);
    let (line, _) = parse_line("mode = \"coeffs\"\n[time]\ndt = 0.03\nt_end = 0.1\n");
    assert_eq!(line, 4);
    let (line, _) = parse_line("mode = \"nope\"\n");
    assert_eq!(line, 1);
    assert!(parse_config("[grid]\nmodes = 8\n").is_err());
}

#[test]
fn overrides_apply_and_are_validated() {
    let ov = Overrides { mode: Some(Mode::Converge), eps: Some(vec![0.25, 0.5]), modes: Some(16), ..Overrides::default() };
    let r = parse_with_overrides("", &ov).unwrap();
    assert_eq!(r.config.mode, Mode::Converge);
    assert_eq!(r.config.physics.eps, vec![0.5, 0.25]);
    assert_eq!(r.config.grid.modes, 16);
    assert!(!r.defaulted.iter().any(|d| d == "grid.modes" || d == "physics.eps"));

    let bad = Overrides { mode: Some(Mode::Converge), eps: Some(vec![0.0]), ..Overrides::default() };
    match parse_with_overrides("", &bad) {
        Err(VmbError::Parse { line: 0, .. }) => {}
        other => panic!("{other:?}"),
    }
    let clash = Overrides { mode: Some(Mode::Converge), ..Overrides::default() };
    assert!(parse_with_overrides("mode = \"coeffs\"\n", &clash).is_err());
}

#[test]
fn resolved_config_round_trips_through_toml() {
    let r = parse_config("mode = \"simulate-kinetic\"\n[grid]\ndim = 2\nmodes = 8\n").unwrap();
    let again = parse_config(&r.config.to_toml()).unwrap();
    assert_eq!(again.config, r.config);
    assert!(again.defaulted.is_empty(), "{:?}", again.defaulted);
}

fn random_kinetic(grid: &Grid, nv: usize, seed: u64) -> KineticState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = KineticState::zeros(grid, nv, 0.25);
    let mut z = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    for v in st.g.iter_mut() {
        *v = z();
    }
    for c in 0..3 {
        for p in 0..grid.npts {
            st.e[c][p] = z();
            st.b[c][p] = z();
        }
    }
    st.t = 0.375;
    st
}

fn meta(grid: &Grid, order: usize) -> CheckpointMeta {
    CheckpointMeta::new(grid, order, QuadSpec::default(), CollisionSpec::default())
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let g = Grid::new(2, 4).unwrap();
    let m = meta(&g, 2);
    let snap = Snapshot::Kinetic(random_kinetic(&g, 20, 1));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.ckpt");
    save_checkpoint(&path, &snap, &m).unwrap();
    let back = load_checkpoint(&path, &m).unwrap();
    assert_eq!(back, snap);
    assert_eq!(encode(&back, &m), std::fs::read(&path).unwrap());

    let mut f = FluidState::zeros(&g);
    f.theta[3] = C64::new(0.5, -0.25);
    f.u[1][2] = C64::new(1e-300, 3.0);
    f.t = 2.0;
    let snap = Snapshot::Fluid(f);
    let bytes = encode(&snap, &m);
    assert_eq!(decode(&bytes, &m).unwrap(), snap);
}

fn checkpoint_err(bytes: &[u8], m: &CheckpointMeta) -> String {
    match decode(bytes, m) {
        Err(VmbError::Checkpoint(msg)) => msg,
        other => panic!("expected checkpoint error, got {other:?}"),
    }
}

#[test]
fn damaged_or_mismatched_checkpoints_are_refused() {
    let g = Grid::new(1, 8).unwrap();
    let m = meta(&g, 4);
    let bytes = encode(&Snapshot::Kinetic(random_kinetic(&g, 70, 2)), &m);

    for cut in [3, 30, bytes.len() / 2, bytes.len() - 1] {
        let msg = checkpoint_err(&bytes[..cut], &m);
        assert!(msg.contains("truncated"), "{cut}: {msg}");
    }

    let mut bad = bytes.clone();
    let last = bad.len() - 1;
    bad[last] ^= 0x40;
    let msg = checkpoint_err(&bad, &m);
    assert!(msg.contains("section 'b'"), "{msg}");

    let msg = checkpoint_err(&bytes, &meta(&g, 5));
    assert!(msg.contains("order 4") && msg.contains("order 5"), "{msg}");

    let msg = checkpoint_err(&bytes, &meta(&Grid::new(1, 16).unwrap(), 4));
    assert!(msg.contains("grid"), "{msg}");

    let other_coll = CheckpointMeta::new(&g, 4, QuadSpec::default(), CollisionSpec { sphere_points: 1 });
    assert!(checkpoint_err(&bytes, &other_coll).contains("collision"));

    let mut bad = bytes.clone();
    bad[0] = b'X';
    checkpoint_err(&bad, &m);
}

fn small(mode: Mode, out: &std::path::Path, eps: &[f64]) -> ResolvedConfig {
    let ov = Overrides {
        mode: Some(mode),
        out: Some(out.to_path_buf()),
        eps: Some(eps.to_vec()),
        modes: Some(8),
        order: Some(2),
        dt: Some(0.02),
        t_end: Some(0.1),
    };
    parse_with_overrides("[time]\ncadence = 2\n", &ov).unwrap()
}

#[test]
fn single_eps_sweep_is_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let r = small(Mode::Converge, dir.path(), &[0.5]);
    let o = run_harness(&r).unwrap();
    assert!(!o.passed);
    assert_eq!(o.summary["status"], "insufficient sweep");
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("errors_eps_0.5.csv").exists());
}

#[test]
fn failing_sub_runs_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = small(Mode::Converge, dir.path(), &[0.5, 0.25]);
    r.config.kinetic.fp_max_iter = 1;
    let o = run_harness(&r).unwrap();
    assert!(!o.passed);
    assert!(o.summary["status"].as_str().unwrap().starts_with("partial"));
    let runs = o.summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r["error"].is_string()));
}

#[test]
fn kinetic_output_is_bit_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ra = small(Mode::SimulateKinetic, a.path(), &[0.5]);
    let mut rb = small(Mode::SimulateKinetic, b.path(), &[0.5]);
    ra.config.workers = 1;
    rb.config.workers = 2;
    let oa = run_harness(&ra).unwrap();
    run_harness(&rb).unwrap();
    assert!(oa.passed, "{}", oa.summary);
    for f in ["kinetic_eps_0.5.csv", "kinetic_eps_0.5.ckpt", "summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let csv = std::fs::read_to_string(a.path().join("kinetic_eps_0.5.csv")).unwrap();
    // header + t = 0, 0.04, 0.08, 0.1
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn contraction_table_flags() {
    let rows = [[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], [0.5, 0.95, 2.0, 0.5, 0.5, 0.5, 0.5, 0.5]];
    let t = contraction_table(&rows, 0.9);
    assert_eq!(t[0].contraction_ok, Some(true));
    assert_eq!(t[1].contraction_ok, Some(false));
    assert!(t[1].monotone);
    assert!(!t[2].monotone);
    assert_eq!(t[2].contraction_ok, None);
}

#[test]
fn for_mode_defaults_are_valid() {
    for mode in [Mode::Coeffs, Mode::SimulateKinetic, Mode::SimulateFluid, Mode::Converge] {
        let c = ExperimentConfig::for_mode(mode);
        assert_eq!(parse_config(&c.to_toml()).unwrap().config, c);
    }
}
