mod common;

use std::f64::consts::PI;

use ionflow::reservoir::{
    collective_rates, dos, reservoir_state, single_ion_rates, temperature_sweep, CoolingLaser,
};
use ionflow::units::{mhz, wavevector_from_nm};
use ionflow::Error;
use proptest::prelude::*;

fn laser(rabi_over_gamma: f64, detuning_over_gamma: f64) -> CoolingLaser {
    let g = mhz(41.4);
    CoolingLaser::new(rabi_over_gamma * g, detuning_over_gamma * g, wavevector_from_nm(280.35), g).unwrap()
}

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn lorentzian_normalization() {
    let (d, k) = (-3.0, 0.2);
    // the ±50κ window holds (2/π)·atan(100) of the weight
    let window = simpson(|e| dos(e, d, k), d - 50.0 * k, d + 50.0 * k, 200_000);
    assert!((window - 2.0 / PI * 100f64.atan()).abs() < 1e-9);
    // the full line: substitute ε = δ + (κ/2)·tan θ
    let full = simpson(|t: f64| dos(d + 0.5 * k * t.tan(), d, k) * 0.5 * k / t.cos().powi(2), -PI / 2.0 + 1e-9, PI / 2.0 - 1e-9, 20_000);
    assert!((full - 1.0).abs() < 1e-8);
}

#[test]
fn no_cooling_is_an_error() {
    assert!(matches!(reservoir_state(2.0, 1.0, 1.0), Err(Error::NoCooling { .. })));
    assert!(matches!(reservoir_state(1.0, 1.0, 1.0), Err(Error::NoCooling { .. })));
}

#[test]
fn far_detuned_rows_are_flagged_weak() {
    let (_, arr, modes) = common::mg_crystal();
    let g = mhz(41.4);
    let rows = temperature_sweep(&modes, &arr, &laser(0.5, 0.0), &[-0.5 * g, -200.0 * g], 0, 2, 2.0 * PI * 10.0).unwrap();
    assert!(!rows[0].source.as_ref().unwrap().weak);
    assert!(rows[1].source.as_ref().unwrap().weak);
    assert!(temperature_sweep(&modes, &arr, &laser(0.5, 0.0), &[], 0, 2, 0.0).unwrap().is_empty());
}

#[test]
fn blue_detuning_is_flagged_per_row() {
    let (_, arr, modes) = common::mg_crystal();
    let g = mhz(41.4);
    let rows = temperature_sweep(&modes, &arr, &laser(0.5, 0.0), &[-0.5 * g, 0.3 * g], 0, 2, 0.0).unwrap();
    assert!(rows[0].source.is_some());
    assert!(rows[1].source.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn red_detuning_cools(det in -3.0f64..-1e-3, w in 0.2f64..3.0) {
        let (p, m) = single_ion_rates(&laser(0.5, det), 25.0, mhz(w));
        prop_assert!(m > p && p >= 0.0 && p.is_finite());
    }

    #[test]
    fn occupation_reproduces_rate_ratio(gp in 0.0f64..10.0, extra in 1e-3f64..10.0, w in 0.1f64..10.0) {
        let st = reservoir_state(gp, gp + extra, w).unwrap();
        let lhs = gp / (gp + extra);
        let rhs = st.nbar / (st.nbar + 1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300) || (lhs == 0.0 && rhs == 0.0));
        prop_assert!(st.kappa > 0.0);
    }

    #[test]
    fn width_scales_with_rabi_squared(det in -2.0f64..-0.05) {
        let (_, arr, modes) = common::mg_crystal();
        let a = collective_rates(&modes, &arr, &laser(0.01, det));
        let b = collective_rates(&modes, &arr, &laser(0.02, det));
        for (x, y) in a.iter().zip(&b) {
            let ka = 2.0 * (x.1 - x.0);
            let kb = 2.0 * (y.1 - y.0);
            prop_assert!((kb / ka - 4.0).abs() < 1e-6 * 4.0);
        }
    }

    #[test]
    fn dos_is_positive_and_peaks_at_detuning(e in -10.0f64..10.0, d in -5.0f64..5.0, k in 0.01f64..3.0) {
        let v = dos(e, d, k);
        prop_assert!(v > 0.0 && v <= 2.0 / (PI * k) * (1.0 + 1e-15));
    }
}
