use auxspin::fermion::{metallic_couplings, HubbardParams, KGrid};
use auxspin::lattice::LatticeSpec;
use auxspin::quench::{regime_classifier, run_quench, spectrum, uniform_times, QuenchPlan, Regime, RegimeThresholds, SpectrumOptions};
use proptest::prelude::*;

fn iso() -> HubbardParams<f64> {
    HubbardParams::new(1.0, 1.0, 0.0, 20.0).unwrap()
}

fn lat(lx: usize, ly: usize) -> LatticeSpec<f64> {
    LatticeSpec::dimensionless(lx, ly).unwrap()
}

// Sparse matrix-exponential propagation of the 4x4 register on the default grid.
const ORACLE: [(f64, [f64; 3]); 2] = [
    (5.0, [0.5596197968509233, 0.15053040618915606, 0.02297046513514026]),
    (16.0, [0.5934175085928528, 0.28535456479206184, 0.00082281208414475]),
];

#[test]
fn trajectories_match_the_reference_propagator() {
    for (u_f, zs) in ORACLE {
        let s = run_quench(&lat(4, 4), &iso(), &QuenchPlan::new(u_f)).unwrap();
        assert_eq!(s.z_mean[0], 1.0);
        for (k, z) in [7, 23, 59].into_iter().zip(zs) {
            assert!((s.z_mean[k] - z).abs() <= 1e-8, "U_f = {u_f}, k = {k}: {} vs {z}", s.z_mean[k]);
        }
    }
}

#[test]
fn couplings_are_frozen_at_the_metal() {
    let s = run_quench(&lat(2, 2), &iso(), &QuenchPlan::new(9.0)).unwrap();
    assert_eq!(s.fermion_solves, 1);
    assert_eq!(s.j, metallic_couplings(&iso(), KGrid::default()).unwrap());
}

#[test]
fn classifier_labels() {
    let label = |u_f: f64| {
        let s = run_quench(&lat(4, 4), &iso(), &QuenchPlan::new(u_f)).unwrap();
        regime_classifier(&s, &RegimeThresholds::default()).regime
    };
    assert_eq!(label(0.0), Regime::Metallic);
    assert_eq!(label(16.0), Regime::Mott);
    assert_eq!(label(5.0), Regime::Mott);
}

#[test]
fn spectrum_resolves_a_pure_tone() {
    let t: Vec<f64> = uniform_times(20.0, 400);
    let z: Vec<f64> = t.iter().map(|&t| 0.3 + 0.1 * (7.0 * t).cos()).collect();
    let s = spectrum(&t, &z, &SpectrumOptions::default()).unwrap();
    let df = s.freqs[1];
    assert!((s.peak_freq - 7.0).abs() <= df, "{}", s.peak_freq);
}

proptest! {
    #[test]
    fn spectrum_is_nonnegative_and_conserves_energy(
        z in prop::collection::vec(-1.0f64..1.0, 16..80),
        span in 0.5f64..20.0,
        pad in 1usize..9,
    ) {
        let t = uniform_times(span, z.len());
        let s = spectrum(&t, &z, &SpectrumOptions { pad, ..SpectrumOptions::default() }).unwrap();
        prop_assert!(s.amplitude.iter().all(|&a| a >= 0.0));
        prop_assert!(s.freqs.windows(2).all(|w| w[1] > w[0]));
        prop_assert!((s.signal_energy - s.spectral_energy).abs() <= 1e-9 * (1.0 + s.signal_energy));
    }
}
