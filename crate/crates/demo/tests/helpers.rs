use congested_flow_demo::{profile_rows, Simulation};

#[test]
fn two_block_worldlines_meet_at_the_collision() {
    let sim = Simulation::build("two-block", f64::NAN, 16).unwrap();
    assert_eq!(sim.event_times(), vec![0.25]);
    let m = sim.worldline_count(100);
    assert_eq!(m, 16);
    let rows = sim.worldlines(5, 100);
    assert_eq!(rows.len(), 5 * (m + 1));
    // Frame 2 is t = 0.375, after the merge: one rigid block at rest.
    let frame = &rows[2 * (m + 1)..3 * (m + 1)];
    assert_eq!(frame[0], 0.375);
    for w in frame[1..].windows(2) {
        assert!((w[1] - w[0] - 1.0 / 16.0).abs() < 1e-12);
    }
}

#[test]
fn worldlines_are_strided() {
    let sim = Simulation::build("smooth-compression", f64::NAN, 1000).unwrap();
    let m = sim.worldline_count(64);
    assert!(m <= 64);
    assert_eq!(sim.worldlines(3, 64).len(), 3 * (m + 1));
}

#[test]
fn density_rows_carry_unit_mass() {
    let sim = Simulation::build("smooth-compression", f64::NAN, 40).unwrap();
    for t in [0.0, 0.3, 0.9] {
        let rows = sim.density(t);
        assert_eq!(rows.len(), 4 * 40);
        let mass: f64 = rows.chunks(4).map(|c| (c[1] - c[0]) * c[2]).sum();
        assert!((mass - 1.0).abs() < 1e-12, "t = {t}: {mass}");
        assert!(rows.chunks(4).all(|c| c[2] <= 1.0 + 1e-12));
    }
}

#[test]
fn simulated_profile_matches_the_sticky_branch() {
    let rows = profile_rows(0.5, 32).unwrap();
    assert_eq!(rows.len(), 4 * 33);
    for r in rows.chunks(4) {
        assert!((r[1] - r[2]).abs() < 1e-12, "{r:?}");
    }
    let sim = Simulation::build("two-block", 0.5, 32).unwrap();
    assert!((sim.pressure_mass() - 0.25).abs() < 1e-12);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(Simulation::build("two-block", f64::NAN, 1).is_err());
    assert!(Simulation::build("two-block", 1.5, 8).is_err());
    assert!(Simulation::build("nope", f64::NAN, 8).is_err());
    assert!(profile_rows(0.0, 8).is_err());
    assert!(profile_rows(0.5, 1_000_000).is_err());
}
