use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::spin_model::{build_ideal, SpinHamiltonian};

fn op_of(h: &SpinHamiltonian<f64>) -> SpinOperator<f64> {
    SpinOperator::new(h, 20).unwrap()
}

fn sz_expect(state: &SpinState<f64>, i: usize) -> f64 {
    state.probabilities().iter().enumerate().map(|(s, p)| p * sz_of::<f64>(s, i)).sum()
}

fn zz_expect(state: &SpinState<f64>, i: usize, j: usize) -> f64 {
    state
        .probabilities()
        .iter()
        .enumerate()
        .map(|(s, p)| p * sz_of::<f64>(s, i) * sz_of::<f64>(s, j))
        .sum()
}

fn lattice(lx: usize, ly: usize) -> LatticeSpec<f64> {
    LatticeSpec::dimensionless(lx, ly).unwrap()
}

#[test]
fn transverse_field_ground_state() {
    let l = lattice(3, 2);
    let h = build_ideal(&l, XY::new(0.0, 0.0), 4.0);
    let g = eigenstate(&op_of(&h), Extremal::Ground, &EigenOptions::default()).unwrap();
    assert_abs_diff_eq!(g.energy, -6.0, epsilon = 1e-9);
    let a0 = g.state.amplitudes()[0].re.signum();
    for (s, a) in g.state.amplitudes().iter().enumerate() {
        let parity = if s.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        assert_abs_diff_eq!(a.re * a0, parity / 8.0, epsilon = 1e-8);
    }
    let obs = observables(&g.state, &l, &l.bulk_region(), XY::new(1.0, 1.0));
    assert!(obs.z_bulk <= 1e-10);
    assert!(obs.z_bulk_pair.unwrap().abs() <= 1e-10);
}

#[test]
fn classical_doublet_is_flagged() {
    let l = lattice(2, 1);
    let h = build_ideal(&l, XY::new(1.0, 0.0), 0.0);
    let g = eigenstate(&op_of(&h), Extremal::Ground, &EigenOptions::default()).unwrap();
    assert!(g.degenerate);
    assert_eq!(g.energy, -1.0);
    let p = g.state.probabilities();
    assert_eq!(p[0] + p[3], 1.0);
    let obs = observables(&g.state, &l, &l.bulk_region(), XY::new(1.0, 1.0));
    assert_eq!(obs.z_bulk, 1.0);
    assert_eq!(obs.bond_zz, vec![1.0]);
}

#[test]
fn two_site_ground_energy_matches_dense() {
    // dense 4x4 diagonalization at J = 1, U/4 = 0.7
    let l = lattice(2, 1);
    let h = build_ideal(&l, XY::new(1.0, 0.0), 2.8);
    let g = eigenstate(&op_of(&h), Extremal::Ground, &EigenOptions::default()).unwrap();
    assert_abs_diff_eq!(g.energy, -1.7204650534085255, epsilon = 1e-10);
    assert!(!g.degenerate);
}

#[test]
fn plaquette_ground_state_matches_dense() {
    // dense 16x16 diagonalization, 2x2 at J = U/4 = 1
    let l = lattice(2, 2);
    let h = build_ideal(&l, XY::new(1.0, 1.0), 4.0);
    let g = eigenstate(&op_of(&h), Extremal::Ground, &EigenOptions::default()).unwrap();
    assert_abs_diff_eq!(g.energy, -5.226251859505506, epsilon = 1e-10);
    assert_abs_diff_eq!(g.sector_gap.unwrap(), 0.3978247347593147, epsilon = 1e-8);
    let obs = observables(&g.state, &l, &l.bulk_region(), XY::new(1.0, 0.5));
    for &c in &obs.bond_zz {
        assert_abs_diff_eq!(c, 0.6532814824381883, epsilon = 1e-8);
    }
    assert_abs_diff_eq!(obs.q_bulk.y, 0.5 * 0.6532814824381883, epsilon = 1e-8);
    assert_abs_diff_eq!(obs.z_bulk_pair.unwrap(), 0.6367054518232168, epsilon = 1e-8);
    assert!(obs.z_bulk < 1e-12);
    assert_abs_diff_eq!(zz_expect(&g.state, 0, 3), 0.6035533905932738, epsilon = 1e-8);
}

#[test]
fn top_is_ground_of_negation() {
    let l = lattice(3, 2);
    let h = build_ideal(&l, XY::new(0.8, 0.3), 2.0);
    let top = eigenstate(&op_of(&h), Extremal::Top, &EigenOptions::default()).unwrap();
    let g = eigenstate(&op_of(&h.negated()), Extremal::Ground, &EigenOptions::default()).unwrap();
    assert_abs_diff_eq!(top.energy, -g.energy, epsilon = 1e-9);
}

#[test]
fn residual_meets_target() {
    let l = lattice(4, 3);
    let h = build_ideal(&l, XY::new(1.1, 0.4), 6.0);
    let op = op_of(&h);
    let g = eigenstate(&op, Extremal::Ground, &EigenOptions::default()).unwrap();
    assert!(g.residual <= 1e-8 * op.norm_bound());
    assert_abs_diff_eq!(g.state.norm(), 1.0, epsilon = 1e-12);
}

#[test]
fn longitudinal_field_breaks_sectors() {
    let h = SpinHamiltonian::new(2, [(0, 1, -1.0)], vec![0.5, 0.5], vec![0.2, 0.2]).unwrap();
    let g = eigenstate(&op_of(&h), Extremal::Ground, &EigenOptions::default()).unwrap();
    assert!(g.sector_gap.is_none());
    assert!(sz_expect(&g.state, 0) < -0.5);
}

#[test]
fn static_hamiltonian_leaves_state() {
    let h = SpinHamiltonian::new(3, [], vec![0.0; 3], vec![0.0; 3]).unwrap();
    let psi = SpinState::from_real(3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
    let snaps = evolve(&op_of(&h), &psi, &[0.0, 1.0, 10.0], &EvolveOptions::default()).unwrap();
    for s in snaps {
        for (a, b) in s.amplitudes().iter().zip(psi.amplitudes()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-14);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-14);
        }
    }
}

#[test]
fn single_site_rabi() {
    let u = 3.7;
    let h = SpinHamiltonian::new(1, [], vec![u / 4.0], vec![0.0]).unwrap();
    let times: Vec<f64> = (0..40).map(|k| 0.17 * k as f64).collect();
    let snaps = evolve(&op_of(&h), &SpinState::all_ground(1), &times, &EvolveOptions::default()).unwrap();
    for (t, s) in times.iter().zip(&snaps) {
        assert_abs_diff_eq!(sz_expect(s, 0), -(u * t / 2.0).cos(), epsilon = 1e-10);
    }
}

#[test]
fn two_site_quench_matches_dense_expm() {
    // dense 4x4 matrix exponential, J = 1, U = 3
    let l = lattice(2, 1);
    let h = build_ideal(&l, XY::new(1.0, 0.0), 3.0);
    let times = [0.3, 1.1, 2.5];
    let oracle = [
        (-0.9033879704859304, 0.8164896240832575),
        (-0.2711894071193127, 0.4188374408815212),
        (0.16155161000626436, 0.3365055328242421),
    ];
    let snaps = evolve(&op_of(&h), &SpinState::all_ground(2), &times, &EvolveOptions::default()).unwrap();
    for (s, (sz0, zz)) in snaps.iter().zip(oracle) {
        assert_abs_diff_eq!(sz_expect(s, 0), sz0, epsilon = 1e-8);
        assert_abs_diff_eq!(zz_expect(s, 0, 1), zz, epsilon = 1e-8);
    }
}

#[test]
fn energy_conserved() {
    let l = lattice(3, 3);
    let h = build_ideal(&l, XY::new(1.2, 0.7), 9.0);
    let op = op_of(&h);
    let psi = SpinState::all_ground(9);
    let e0 = psi.energy(&op);
    let times: Vec<f64> = (1..=20).map(|k| 0.25 * k as f64).collect();
    let snaps = evolve(&op, &psi, &times, &EvolveOptions::default()).unwrap();
    for s in &snaps {
        assert!((s.energy(&op) - e0).abs() <= 1e-8 * e0.abs());
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-10);
    }
}

#[test]
fn bad_time_grids() {
    let h = SpinHamiltonian::new(1, [], vec![1.0], vec![0.0]).unwrap();
    let op = op_of(&h);
    let psi = SpinState::all_ground(1);
    assert!(matches!(evolve(&op, &psi, &[-1.0], &EvolveOptions::default()), Err(Error::TimeGrid(_))));
    assert!(matches!(evolve(&op, &psi, &[2.0, 1.0], &EvolveOptions::default()), Err(Error::TimeGrid(_))));
}

#[test]
fn sign_flip_invariance_small() {
    let l = lattice(2, 2);
    let h = build_ideal(&l, XY::new(1.0, 0.6), 5.0);
    let times: Vec<f64> = (0..30).map(|k| 0.1 * k as f64).collect();
    let run = |h: &SpinHamiltonian<f64>| {
        evolve_observe(&op_of(h), 1.0, &Drive::constant(), &SpinState::all_ground(4), &times, &EvolveOptions::default(), |_, s| {
            observables(s, &l, &l.bulk_region(), XY::new(1.0, 1.0))
        })
        .unwrap()
    };
    for (a, b) in run(&h).iter().zip(run(&h.negated()).iter()) {
        for (x, y) in a.sz.iter().zip(&b.sz) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }
}

#[test]
fn anneal_without_drive_keeps_initial_state() {
    // Omega = 0, delta > 0: |0...0> is an eigenstate
    let h = SpinHamiltonian::new(3, [(0, 1, 0.4), (1, 2, 0.4)], vec![0.0; 3], vec![-0.3; 3]).unwrap();
    let sched = AnnealSchedule::new(4.0, 50).unwrap();
    let out = anneal(&op_of(&h), &sched, &SpinState::all_ground(3), None, &EvolveOptions::default()).unwrap();
    assert_abs_diff_eq!(out.probabilities()[0], 1.0, epsilon = 1e-14);
}

#[test]
fn slow_anneal_tracks_top_state() {
    let h = SpinHamiltonian::new(2, [(0, 1, 1.0)], vec![0.6, 0.6], vec![-0.5, -0.5]).unwrap();
    let op = op_of(&h);
    let top = eigenstate(&op, Extremal::Top, &EigenOptions::default()).unwrap();
    let target = zz_expect(&top.state, 0, 1);
    let mut last_overlap = 0.0;
    for t_max in [5.0, 20.0, 80.0] {
        let sched = AnnealSchedule::new(t_max, (t_max * 50.0) as usize).unwrap();
        let out = anneal(&op, &sched, &SpinState::all_ground(2), None, &EvolveOptions::default()).unwrap();
        let ov = out.overlap(&top.state).norm_sqr();
        assert!(ov >= last_overlap - 1e-9);
        last_overlap = ov;
        if t_max == 80.0 {
            assert!((zz_expect(&out, 0, 1) - target).abs() <= 0.02 * target.abs());
        }
    }
}

#[test]
fn anneal_step_doubling() {
    let l = lattice(3, 2);
    let h = build_ideal(&l, XY::new(1.0, 0.5), 3.0).qpu_form(1.0);
    let op = op_of(&h);
    let run = |n| {
        let out = anneal(&op, &AnnealSchedule::new(10.0, n).unwrap(), &SpinState::all_ground(6), None, &EvolveOptions::default())
            .unwrap();
        (0..6).map(|i| sz_expect(&out, i)).collect::<Vec<_>>()
    };
    let (a, b) = (run(200), run(400));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-4);
    }
}

#[test]
fn z_offset_is_a_detuning() {
    // a constant z offset on a single site only adds a phase
    let h = SpinHamiltonian::new(1, [], vec![0.0], vec![0.0]).unwrap();
    let off = |_t: f64| 0.9;
    let drive = Drive::constant().with_z_offset(&off);
    let opts = EvolveOptions { max_segment: Some(0.1), ..EvolveOptions::default() };
    let psi = SpinState::from_real(1, &[1.0, 1.0]).unwrap();
    let out = evolve_observe(&op_of(&h), 1.0, &drive, &psi, &[2.0], &opts, |_, s| s.clone()).unwrap();
    let rel = out[0].amplitudes()[1] / out[0].amplitudes()[0];
    let phase: f64 = -2.0 * 0.9 * 2.0;
    assert_abs_diff_eq!(rel.re, phase.cos(), epsilon = 1e-9);
    assert_abs_diff_eq!(rel.im, phase.sin(), epsilon = 1e-9);
}

#[test]
fn observables_of_polarized_state() {
    let l = lattice(4, 4);
    let s = SpinState::basis(16, (1 << 16) - 1);
    let obs = observables(&s, &l, &l.bulk_region(), XY::new(1.0, 0.65));
    assert_eq!(obs.z_bulk, 1.0);
    assert_eq!(obs.z_bulk_pair, Some(1.0));
    assert!(obs.bond_zz.iter().all(|&c| c == 1.0));
    assert_eq!(obs.q_bulk, XY::new(1.0, 0.65));
}

#[test]
fn f32_backend_runs() {
    let l = LatticeSpec::<f32>::dimensionless(2, 2).unwrap();
    let h = build_ideal(&l, XY::new(1.0f32, 1.0), 4.0);
    let g = eigenstate(&SpinOperator::new(&h, 20).unwrap(), Extremal::Ground, &EigenOptions::default()).unwrap();
    assert!((g.energy - (-5.226_252)).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn z_bulk_in_unit_interval(jx in 0.0f64..2.0, jy in 0.0f64..2.0, u in 0.0f64..12.0, t in 0.0f64..3.0) {
        let l = lattice(2, 2);
        let h = build_ideal(&l, XY::new(jx, jy), u);
        let snaps = evolve(&op_of(&h), &SpinState::all_ground(4), &[t], &EvolveOptions::default()).unwrap();
        let obs = observables(&snaps[0], &l, &l.bulk_region(), XY::new(1.0, 1.0));
        prop_assert!(obs.z_bulk >= 0.0 && obs.z_bulk <= 1.0 + 1e-12);
    }

    #[test]
    fn sign_flip_trajectories(jx in 0.1f64..2.0, jy in 0.1f64..2.0, u in 0.5f64..16.0) {
        let l = lattice(2, 2);
        let h = build_ideal(&l, XY::new(jx, jy), u);
        let times = [0.2, 0.9, 1.7];
        let a = evolve(&op_of(&h), &SpinState::all_ground(4), &times, &EvolveOptions::default()).unwrap();
        let b = evolve(&op_of(&h.negated()), &SpinState::all_ground(4), &times, &EvolveOptions::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for i in 0..4 {
                prop_assert!((sz_expect(x, i) - sz_expect(y, i)).abs() <= 1e-10);
            }
        }
    }
}
