#![allow(dead_code)]

use std::f64::consts::PI;

use ionflow::crystal::{solve_crystal, CrystalArrangement, IonSpecies, NormalModes, TrapConfig};
use ionflow::dimer::DimerConfig;
use ionflow::magnet::{build_hamiltonian, diagonalize, ExchangeDrive, SpinModel};
use ionflow::reservoir::{CoolingLaser, ReservoirLabel, ReservoirSpec};
use ionflow::transport::{generator_for, GeneratorOptions, TransportGenerator};
use ionflow::units::{mhz, wavevector_from_nm};

/// Ising coupling J/2π = 0.16 kHz.
pub const J: f64 = 2.0 * PI * 160.0;

pub fn linewidth() -> f64 {
    mhz(41.4)
}

pub fn mode_frequencies() -> [f64; 2] {
    [mhz(1.0), mhz(1.0) * (29.0f64 / 5.0).sqrt()]
}

pub fn mg_crystal() -> (TrapConfig, CrystalArrangement, NormalModes) {
    let trap = TrapConfig::new(mhz(4.0), mhz(4.5), mhz(1.0)).unwrap();
    let arr = CrystalArrangement::new(vec![
        IonSpecies::spin("25Mg+", 25.0).unwrap(),
        IonSpecies::coolant("26Mg+", 26.0, linewidth()).unwrap(),
        IonSpecies::spin("25Mg+", 25.0).unwrap(),
    ])
    .unwrap();
    let modes = solve_crystal(&trap, &arr).unwrap();
    (trap, arr, modes)
}

pub fn mg_laser(detuning: f64) -> CoolingLaser {
    let g = linewidth();
    CoolingLaser::new(0.5 * g, detuning, wavevector_from_nm(280.35), g).unwrap()
}

/// Homogeneous Ising dimer with equal δ, κ, g on both reservoirs.
pub fn dimer_cfg(g_over_kappa: f64, kappa: f64, delta: f64, nbar: [f64; 2]) -> DimerConfig {
    DimerConfig::symmetric(J, g_over_kappa * kappa, delta, kappa, nbar, mode_frequencies()).unwrap()
}

pub fn dimer_gen(cfg: &DimerConfig) -> TransportGenerator {
    cfg.generator(GeneratorOptions::default()).unwrap()
}

pub fn reservoirs(kappa: [f64; 2], nbar: [f64; 2], delta: [f64; 2]) -> [ReservoirSpec; 2] {
    let w = mode_frequencies();
    [
        ReservoirSpec::from_width(ReservoirLabel::Source, w[0], kappa[0], nbar[0], delta[0]).unwrap(),
        ReservoirSpec::from_width(ReservoirLabel::Drain, w[1], kappa[1], nbar[1], delta[1]).unwrap(),
    ]
}

pub fn generator(model: &SpinModel, drive: &ExchangeDrive, res: [ReservoirSpec; 2], opts: GeneratorOptions) -> TransportGenerator {
    let spectrum = diagonalize(&build_hamiltonian(model, 12).unwrap()).unwrap();
    generator_for(&spectrum, drive, res, opts).unwrap()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Indices of strict interior local maxima.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1]).collect()
}
