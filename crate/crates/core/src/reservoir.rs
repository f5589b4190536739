//! Travelling-wave Doppler cooling of axial modes and the thermal reservoirs
//! it produces.

use std::f64::consts::PI;

use crate::crystal::{CrystalArrangement, NormalModes, Role};
use crate::units::{AMU, HBAR};
use crate::{Error, Result};

/// Carrier-recoil diffusion coefficient for isotropic dipole emission.
pub const RECOIL_ALPHA: f64 = 2.0 / 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingLaser {
    /// Ω_L (rad/s).
    pub rabi: f64,
    /// Δ_L from the coolant transition (rad/s); negative is red.
    pub detuning: f64,
    /// Wavevector projection on the trap axis (1/m).
    pub wavevector: f64,
    /// Γ of the coolant transition (rad/s).
    pub linewidth: f64,
    /// Adds the carrier-recoil diffusion term to both rates.
    pub recoil: bool,
}

impl CoolingLaser {
    pub fn new(rabi: f64, detuning: f64, wavevector: f64, linewidth: f64) -> Result<Self> {
        if !(rabi > 0.0) || !(wavevector > 0.0) || !(linewidth > 0.0) || !detuning.is_finite() {
            return Err(Error::InvalidInput(
                "cooling laser needs positive Rabi frequency, wavevector and linewidth".into(),
            ));
        }
        Ok(Self { rabi, detuning, wavevector, linewidth, recoil: false })
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_rabi(mut self, rabi: f64) -> Self {
        self.rabi = rabi;
        self
    }

    fn lorentzian(&self, delta: f64) -> f64 {
        let g = self.linewidth;
        (0.5 * self.rabi).powi(2) * g / (0.25 * g * g + delta * delta)
    }
}

/// η = k √(ħ / 2 m ω).
pub fn lamb_dicke(wavevector: f64, mass_amu: f64, omega: f64) -> f64 {
    wavevector * (HBAR / (2.0 * mass_amu * AMU * omega)).sqrt()
}

/// Heating and cooling rates (Γ_+, Γ_−) of a single ion of the given mass
/// oscillating at ω_t.
pub fn single_ion_rates(laser: &CoolingLaser, mass_amu: f64, omega_t: f64) -> (f64, f64) {
    let eta2 = lamb_dicke(laser.wavevector, mass_amu, omega_t).powi(2);
    let mut plus = laser.lorentzian(laser.detuning - omega_t);
    let mut minus = laser.lorentzian(laser.detuning + omega_t);
    if laser.recoil {
        let carrier = RECOIL_ALPHA * laser.lorentzian(laser.detuning);
        plus += carrier;
        minus += carrier;
    }
    (eta2 * plus, eta2 * minus)
}

/// Rates for every axial mode, summed over coolant sites with weights M_{i,n}².
/// The Lamb-Dicke factor of each coolant is taken at the mode frequency and
/// with that ion's own mass.
pub fn collective_rates(
    modes: &NormalModes,
    arr: &CrystalArrangement,
    laser: &CoolingLaser,
) -> Vec<(f64, f64)> {
    let z = &modes.z;
    (0..z.len())
        .map(|n| {
            let w = z.frequencies[n];
            arr.ions
                .iter()
                .enumerate()
                .filter(|(_, s)| s.role == Role::Coolant)
                .fold((0.0, 0.0), |(p, m), (i, s)| {
                    let d2 = z.displacement(i, n).powi(2);
                    let (gp, gm) = single_ion_rates(laser, s.mass, w);
                    (p + d2 * gp, m + d2 * gm)
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState {
    pub nbar: f64,
    /// Temperature as an angular frequency (k_B T / ħ).
    pub temperature: f64,
    pub kappa: f64,
}

/// Steady thermal state of a mode with heating/cooling rates Γ_+, Γ_−.
pub fn reservoir_state(gamma_plus: f64, gamma_minus: f64, omega: f64) -> Result<ThermalState> {
    if !(gamma_minus > gamma_plus) || gamma_plus < 0.0 {
        return Err(Error::NoCooling { mode: 0, gamma_plus, gamma_minus });
    }
    let nbar = gamma_plus / (gamma_minus - gamma_plus);
    Ok(ThermalState {
        nbar,
        temperature: temperature_from_nbar(nbar, omega),
        kappa: 2.0 * (gamma_minus - gamma_plus),
    })
}

/// T = ω / ln((n̄+1)/n̄); zero for n̄ = 0.
pub fn temperature_from_nbar(nbar: f64, omega: f64) -> f64 {
    if nbar <= 0.0 {
        0.0
    } else {
        omega / ((nbar + 1.0) / nbar).ln()
    }
}

/// Bose occupation at temperature `t` (angular units).
pub fn bose(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        1.0 / ((omega / t).exp_m1())
    }
}

/// Lorentzian density of states 𝔇(ε) = (1/2π) κ / ((ε−δ)² + (κ/2)²).
pub fn dos(eps: f64, detuning: f64, kappa: f64) -> f64 {
    let x = eps - detuning;
    kappa / (2.0 * PI * (x * x + 0.25 * kappa * kappa))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReservoirLabel {
    Source,
    Drain,
}

impl ReservoirLabel {
    pub const BOTH: [ReservoirLabel; 2] = [ReservoirLabel::Source, ReservoirLabel::Drain];

    pub fn index(self) -> usize {
        match self {
            ReservoirLabel::Source => 0,
            ReservoirLabel::Drain => 1,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            ReservoirLabel::Source => "S",
            ReservoirLabel::Drain => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirSpec {
    pub label: ReservoirLabel,
    /// Axial mode index (0-based), if the reservoir comes from a crystal.
    pub mode: Option<usize>,
    pub mode_frequency: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub kappa: f64,
    pub nbar: f64,
    pub temperature: f64,
    /// Sideband detuning δ_r (rad/s).
    pub detuning: f64,
}

impl ReservoirSpec {
    pub fn from_rates(
        label: ReservoirLabel,
        mode: Option<usize>,
        mode_frequency: f64,
        gamma_plus: f64,
        gamma_minus: f64,
        detuning: f64,
    ) -> Result<Self> {
        let st = reservoir_state(gamma_plus, gamma_minus, mode_frequency).map_err(|e| match e {
            Error::NoCooling { gamma_plus, gamma_minus, .. } => Error::NoCooling {
                mode: mode.map_or(0, |m| m + 1),
                gamma_plus,
                gamma_minus,
            },
            e => e,
        })?;
        Ok(Self {
            label,
            mode,
            mode_frequency,
            gamma_plus,
            gamma_minus,
            kappa: st.kappa,
            nbar: st.nbar,
            temperature: st.temperature,
            detuning,
        })
    }

    /// Reservoir given directly by its width and occupation; the underlying
    /// rates are Γ_− = κ(n̄+1)/2 and Γ_+ = κn̄/2.
    pub fn from_width(
        label: ReservoirLabel,
        mode_frequency: f64,
        kappa: f64,
        nbar: f64,
        detuning: f64,
    ) -> Result<Self> {
        if !(kappa > 0.0) || !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::InvalidInput(format!(
                "reservoir {} needs kappa > 0 and nbar >= 0",
                label.short()
            )));
        }
        Ok(Self {
            label,
            mode: None,
            mode_frequency,
            gamma_plus: 0.5 * kappa * nbar,
            gamma_minus: 0.5 * kappa * (nbar + 1.0),
            kappa,
            nbar,
            temperature: temperature_from_nbar(nbar, mode_frequency),
            detuning,
        })
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::from_width(self.label, self.mode_frequency, kappa, self.nbar, self.detuning)
            .map(|s| Self { mode: self.mode, ..s })
    }

    pub fn dos(&self, eps: f64) -> f64 {
        dos(eps, self.detuning, self.kappa)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTemperature {
    pub nbar: f64,
    pub temperature: f64,
    pub kappa: f64,
    /// κ below the configured floor.
    pub weak: bool,
    /// n̄ > 5, where the two-level cooling picture is poor.
    pub hot: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureRow {
    pub detuning: f64,
    /// `None` when the mode is not cooled at this detuning.
    pub source: Option<ModeTemperature>,
    pub drain: Option<ModeTemperature>,
}

impl TemperatureRow {
    /// T_S − T_D when both modes are cooled.
    pub fn difference(&self) -> Option<f64> {
        Some(self.source.as_ref()?.temperature - self.drain.as_ref()?.temperature)
    }
}

/// Source/drain temperatures as a function of the cooling-laser detuning.
/// Modes are 0-based axial indices.
pub fn temperature_sweep(
    modes: &NormalModes,
    arr: &CrystalArrangement,
    laser: &CoolingLaser,
    detunings: &[f64],
    source_mode: usize,
    drain_mode: usize,
    kappa_floor: f64,
) -> Result<Vec<TemperatureRow>> {
    let n = modes.z.len();
    if source_mode >= n || drain_mode >= n {
        return Err(Error::InvalidInput(format!("mode index out of range (crystal has {n} modes)")));
    }
    let state = |rates: &[(f64, f64)], m: usize| -> Option<ModeTemperature> {
        let (gp, gm) = rates[m];
        let st = reservoir_state(gp, gm, modes.z.frequencies[m]).ok()?;
        Some(ModeTemperature {
            nbar: st.nbar,
            temperature: st.temperature,
            kappa: st.kappa,
            weak: st.kappa < kappa_floor,
            hot: st.nbar > 5.0,
        })
    };
    Ok(detunings
        .iter()
        .map(|&d| {
            let rates = collective_rates(modes, arr, &laser.with_detuning(d));
            TemperatureRow { detuning: d, source: state(&rates, source_mode), drain: state(&rates, drain_mode) }
        })
        .collect())
}
