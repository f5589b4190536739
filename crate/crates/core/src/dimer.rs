//! Closed forms for the antiferromagnetic Ising dimer H = J σ^z_1σ^z_2
//! driven homogeneously by both reservoirs.
//!
//! Levels are quoted relative to the Bell pair, so ε_T = ε_S = 0 and
//! ε_↑↑ = ε_↓↓ = 2J. Two V-scheme channels carry transport:
//! T ↔ ↓↓ at ω = −2J and ↑↑ ↔ T at ω = +2J.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::magnet::{build_hamiltonian, diagonalize, ExchangeDrive, SpinModel};
use crate::reservoir::{dos, ReservoirLabel, ReservoirSpec};
use crate::transport::{generator_for, GeneratorOptions, TransportGenerator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerConfig {
    /// Ising coupling J > 0.
    pub j: f64,
    /// g_r, homogeneous over both spins.
    pub g: [f64; 2],
    /// δ_r
    pub detuning: [f64; 2],
    /// κ_r
    pub kappa: [f64; 2],
    /// 𝔫_r(ω_r)
    pub nbar: [f64; 2],
    /// ω_r; only enters the energy current and reservoir temperatures.
    pub mode_frequency: [f64; 2],
}

impl DimerConfig {
    pub fn new(
        j: f64,
        g: [f64; 2],
        detuning: [f64; 2],
        kappa: [f64; 2],
        nbar: [f64; 2],
        mode_frequency: [f64; 2],
    ) -> Result<Self> {
        if !(j > 0.0) || !j.is_finite() {
            return Err(Error::InvalidInput("dimer needs J > 0".into()));
        }
        if kappa.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::InvalidInput("dimer needs kappa_r > 0".into()));
        }
        if nbar.iter().any(|n| !(*n >= 0.0) || !n.is_finite()) {
            return Err(Error::InvalidInput("dimer needs nbar_r >= 0".into()));
        }
        if g.iter().chain(&detuning).chain(&mode_frequency).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dimer parameters must be finite".into()));
        }
        Ok(Self { j, g, detuning, kappa, nbar, mode_frequency })
    }

    /// Equal g, δ and κ on both reservoirs.
    pub fn symmetric(j: f64, g: f64, detuning: f64, kappa: f64, nbar: [f64; 2], mode_frequency: [f64; 2]) -> Result<Self> {
        Self::new(j, [g, g], [detuning; 2], [kappa; 2], nbar, mode_frequency)
    }

    fn dos(&self, r: usize, eps: f64) -> f64 {
        dos(eps, self.detuning[r], self.kappa[r])
    }

    pub fn reservoirs(&self) -> Result<[ReservoirSpec; 2]> {
        let r = |l: ReservoirLabel| {
            let i = l.index();
            ReservoirSpec::from_width(l, self.mode_frequency[i], self.kappa[i], self.nbar[i], self.detuning[i])
        };
        Ok([r(ReservoirLabel::Source)?, r(ReservoirLabel::Drain)?])
    }

    /// Full two-channel transport generator for the same parameters.
    pub fn generator(&self, opts: GeneratorOptions) -> Result<TransportGenerator> {
        let h = build_hamiltonian(&SpinModel::ising_dimer(self.j), 2)?;
        let spectrum = diagonalize(&h)?;
        generator_for(&spectrum, &ExchangeDrive::homogeneous(2, self.g[0], self.g[1]), self.reservoirs()?, opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerLevel {
    pub label: &'static str,
    pub energy: f64,
    /// Amplitudes on |↓↓⟩, |↑↓⟩, |↓↑⟩, |↑↑⟩ (bit i set = spin i up).
    pub state: [f64; 4],
    /// Decoupled from homogeneous drives.
    pub dark: bool,
}

pub fn dimer_spectrum(j: f64) -> [DimerLevel; 4] {
    let s = FRAC_1_SQRT_2;
    [
        DimerLevel { label: "T", energy: 0.0, state: [0.0, s, s, 0.0], dark: false },
        DimerLevel { label: "S", energy: 0.0, state: [0.0, s, -s, 0.0], dark: true },
        DimerLevel { label: "dd", energy: 2.0 * j, state: [1.0, 0.0, 0.0, 0.0], dark: false },
        DimerLevel { label: "uu", energy: 2.0 * j, state: [0.0, 0.0, 0.0, 1.0], dark: false },
    ]
}

/// Rates of both V-scheme channels for one reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRates {
    /// Γ_Mr(T, ↓↓), 𝔇_r(−2J)
    pub absorb_lower: f64,
    /// Γ_rM(↓↓, T), 𝔇_r(−2J)
    pub emit_lower: f64,
    /// Γ_Mr(↑↑, T), 𝔇_r(+2J)
    pub absorb_upper: f64,
    /// Γ_rM(T, ↑↑), 𝔇_r(+2J)
    pub emit_upper: f64,
}

pub fn channel_rates(cfg: &DimerConfig) -> [ChannelRates; 2] {
    [0, 1].map(|r| {
        let pre = 4.0 * PI * cfg.g[r] * cfg.g[r];
        let lo = pre * cfg.dos(r, -2.0 * cfg.j);
        let hi = pre * cfg.dos(r, 2.0 * cfg.j);
        let n = cfg.nbar[r];
        ChannelRates {
            absorb_lower: lo * n,
            emit_lower: lo * (1.0 + n),
            absorb_upper: hi * n,
            emit_upper: hi * (1.0 + n),
        }
    })
}

/// Γ_tot of the lower channel.
pub fn total_rate(cfg: &DimerConfig) -> f64 {
    channel_rates(cfg).iter().map(|c| c.absorb_lower + c.emit_lower).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqPopulations {
    pub down: f64,
    pub triplet: f64,
    /// max_r 𝔇_r(+2J)/𝔇_r(−2J); small when only the lower channel is open.
    pub validity: f64,
}

pub fn eq_populations(cfg: &DimerConfig) -> EqPopulations {
    let c = channel_rates(cfg);
    let tot = total_rate(cfg);
    let validity = (0..2)
        .map(|r| cfg.dos(r, 2.0 * cfg.j) / cfg.dos(r, -2.0 * cfg.j))
        .fold(0.0, f64::max);
    if tot == 0.0 {
        return EqPopulations { down: 1.0, triplet: 0.0, validity };
    }
    EqPopulations {
        down: (c[0].emit_lower + c[1].emit_lower) / tot,
        triplet: (c[0].absorb_lower + c[1].absorb_lower) / tot,
        validity,
    }
}

/// Single-channel source current (quanta/s).
pub fn analytic_current(cfg: &DimerConfig) -> f64 {
    let w = -2.0 * cfg.j;
    let d = [cfg.dos(0, w), cfg.dos(1, w)];
    let g2 = [cfg.g[0] * cfg.g[0], cfg.g[1] * cfg.g[1]];
    let den: f64 = (0..2).map(|r| g2[r] * d[r] * (1.0 + 2.0 * cfg.nbar[r])).sum();
    if den == 0.0 {
        return 0.0;
    }
    4.0 * PI * g2[0] * g2[1] * d[0] * d[1] * (cfg.nbar[0] - cfg.nbar[1]) / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: [f64; 2]) -> DimerConfig {
        DimerConfig::symmetric(1.0, 0.0025, -2.0, 0.05, n, [5.0, 6.0]).unwrap()
    }

    #[test]
    fn levels() {
        let lv = dimer_spectrum(1.0);
        let mut e: Vec<f64> = lv.iter().map(|l| l.energy).collect();
        e.sort_by(f64::total_cmp);
        assert_eq!(e, vec![0.0, 0.0, 2.0, 2.0]);
        assert!(dimer_spectrum(0.0).iter().all(|l| l.energy == 0.0));
        assert_eq!(lv.iter().filter(|l| l.dark).count(), 1);
    }

    #[test]
    fn no_quanta_no_absorption() {
        let c = channel_rates(&cfg([0.0, 0.0]));
        assert!(c.iter().all(|c| c.absorb_lower == 0.0 && c.absorb_upper == 0.0));
        let p = eq_populations(&cfg([0.0, 0.0]));
        assert_eq!((p.down, p.triplet), (1.0, 0.0));
    }

    #[test]
    fn current_limits() {
        assert_eq!(analytic_current(&cfg([0.4, 0.4])), 0.0);
        let mut c = cfg([0.4, 0.1]);
        c.g[1] = 0.0;
        assert_eq!(analytic_current(&c), 0.0);
        let c = cfg([0.4, 0.1]);
        let d = dos(-2.0, -2.0, 0.05);
        let simple = 2.0 * PI * 0.0025f64.powi(2) * d * 0.3 / 1.5;
        assert!((analytic_current(&c) - simple).abs() < 1e-14 * simple);
    }

    #[test]
    fn bad_config() {
        assert!(DimerConfig::symmetric(-1.0, 0.1, -2.0, 0.05, [0.1, 0.0], [1.0, 1.0]).is_err());
        assert!(DimerConfig::symmetric(1.0, 0.1, -2.0, 0.0, [0.1, 0.0], [1.0, 1.0]).is_err());
    }
}
