#![allow(clippy::excessive_precision)] // oracle digits kept verbatim

use nlinterf::dispersion::{beta2_from_d, d_from_beta2, quantum_like_phase, DispersionParameter};
use nlinterf::interferogram::synthesize;
use nlinterf::spectral::{detuning_from_degeneracy, idler_wavelength};
use nlinterf::verify::{run_all, Fault};
use nlinterf::{FiberUnderTest, Scenario, Wavelength};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn reference_dispersion_oracles() {
    let l0 = Wavelength::from_nm(1560.6).unwrap();
    let beta2 = beta2_from_d(DispersionParameter(-82.08), l0);
    assert!(rel(beta2, 1.061_255_567_527_276e-25) < 1e-12, "{beta2:e}");
    assert!(rel(beta2 * 10.0, 1.061_255_567_527_276e-24) < 1e-12);
    let d = d_from_beta2(1.06125e-24 / 10.0, l0).ps_per_nm_km();
    assert!(rel(d, -82.079_569_394_354_39) < 1e-12, "{d}");
}

#[test]
fn reference_trace_fringe_count() {
    let s: Scenario = Scenario::reference();
    let trace = synthesize(&s.synthesis).unwrap();
    let phase = &trace.components.as_ref().unwrap().phase;
    let fringes = (phase[phase.len() - 1] - phase[0]).abs() / std::f64::consts::TAU;
    assert!((fringes - 43.354_678_760_603_37).abs() < 1e-6, "{fringes}");
    assert!(trace.meta.warnings.is_empty());
}

#[test]
fn single_precision_synthesis_tracks_double() {
    let s64 = Scenario::reference();
    let s32 = nlinterf::estimator::Scenario::<f32>::reference();
    let a = synthesize(&s64.synthesis).unwrap();
    let b = synthesize(&s32.synthesis).unwrap();
    assert_eq!(a.len(), b.len());
    // f32 phase error grows with the ~1e2 rad total phase; compare the envelope only
    let ga = &a.components.as_ref().unwrap().baseline;
    let gb = &b.components.as_ref().unwrap().baseline;
    for (x, y) in ga.iter().zip(gb) {
        assert!((x - *y as f64).abs() < 1e-5);
    }
}

#[test]
fn property_checks_pass_on_a_clean_build() {
    for c in run_all(7, Fault::None).unwrap() {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}

proptest! {
    #[test]
    fn summed_phase_is_shared_by_signal_and_idler(
        ls in 1500.0_f64..1620.0,
        b2 in -3e-25_f64..3e-25,
        b1 in 1e-9_f64..1e-8,
        len in 1.0_f64..20.0,
    ) {
        let pump = Wavelength::from_nm(780.3).unwrap();
        let fiber = FiberUnderTest {
            length: len,
            beta0: 0.1,
            beta1: b1,
            beta2: b2,
            beta3: 1e-40,
            reference: Wavelength::from_nm(1560.6).unwrap(),
        };
        let signal = Wavelength::from_nm(ls).unwrap();
        let idler = idler_wavelength(pump, signal).unwrap();
        let ps = quantum_like_phase(&fiber, detuning_from_degeneracy(signal, pump).unwrap());
        let pi = quantum_like_phase(&fiber, detuning_from_degeneracy(idler, pump).unwrap());
        prop_assert!((ps - pi).abs() <= 1e-9 * ps.abs().max(1.0));
    }
}
