//! Builds core objects from a validated config.

use ionflow::crystal::{solve_crystal, Branch, CrystalArrangement, IonSpecies, NormalModes, TrapConfig};
use ionflow::lindblad::DenseSteadyOptions;
use ionflow::magnet::{
    build_hamiltonian, diagonalize, mediated_couplings, mediated_xy_couplings, ExchangeDrive, ModelKind, SpinModel,
    SpinSpectrum,
};
use ionflow::ode::OdeOptions;
use ionflow::reservoir::{collective_rates, CoolingLaser, ReservoirLabel, ReservoirSpec};
use ionflow::transport::{Dissipator, GeneratorOptions, SteadyMethod, SteadyOptions};
use ionflow::units::{khz, mhz, wavevector_from_nm};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::{
    BranchName, CoolingSection, CrystalSection, DissipatorName, DriveSection, KindName, MagnetSection, MethodName,
    RoleName, RunConfig, SolverSection,
};
use crate::CliError;

fn need<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| CliError::missing(name))
}

pub struct Crystal {
    pub arrangement: CrystalArrangement,
    pub modes: NormalModes,
}

pub fn crystal(cfg: &RunConfig) -> Result<Crystal, CliError> {
    let c: &CrystalSection = need(&cfg.crystal, "crystal")?;
    let trap = TrapConfig::new(mhz(c.trap_x_MHz), mhz(c.trap_y_MHz), mhz(c.trap_z_MHz))
        .map_err(|e| CliError::core("trap", e))?;
    let ions = c
        .ions
        .iter()
        .map(|i| match i.role {
            RoleName::Spin => IonSpecies::spin(i.name.clone(), i.mass_amu),
            RoleName::Coolant => IonSpecies::coolant(i.name.clone(), i.mass_amu, mhz(i.linewidth_MHz.unwrap_or(0.0))),
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::core("ion species", e))?;
    let arrangement = CrystalArrangement::new(ions).map_err(|e| CliError::core("crystal", e))?;
    let modes = solve_crystal(&trap, &arrangement).map_err(|e| CliError::core("normal modes", e))?;
    Ok(Crystal { arrangement, modes })
}

/// Cooling laser at the configured detuning; the linewidth is that of the
/// first coolant ion.
pub fn laser(cfg: &RunConfig) -> Result<CoolingLaser, CliError> {
    let co: &CoolingSection = need(&cfg.cooling, "cooling")?;
    let cr = need(&cfg.crystal, "crystal")?;
    let gamma = cr
        .ions
        .iter()
        .find(|i| i.role == RoleName::Coolant)
        .and_then(|i| i.linewidth_MHz)
        .map(mhz)
        .ok_or_else(|| CliError::missing("crystal coolant ion"))?;
    let mut laser = CoolingLaser::new(
        co.rabi_over_linewidth * gamma,
        co.detuning_over_linewidth * gamma,
        wavevector_from_nm(co.wavelength_nm),
        gamma,
    )
    .map_err(|e| CliError::core("cooling laser", e))?;
    laser.recoil = co.recoil;
    Ok(laser)
}

fn pair_matrix(m: &MagnetSection, pick: impl Fn(&crate::config::CouplingEntry) -> f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m.spins, m.spins);
    for e in &m.couplings {
        let (a, b) = (e.sites[0] - 1, e.sites[1] - 1);
        j[(a, b)] = khz(pick(e));
        j[(b, a)] = j[(a, b)];
    }
    j
}

pub fn spin_model(cfg: &RunConfig) -> Result<SpinModel, CliError> {
    let m = need(&cfg.magnet, "magnet")?;
    let h = khz(m.field_kHz);
    let n = m.spins;
    let (jx, jy, jz) = match &m.mediated {
        None => (pair_matrix(m, |e| e.jx_kHz), pair_matrix(m, |e| e.jy_kHz), pair_matrix(m, |e| e.jz_kHz)),
        Some(med) => {
            let cr = crystal(cfg)?;
            let sites: Vec<usize> = med.sites.iter().map(|s| s - 1).collect();
            let (f, d, g) = (khz(med.force_kHz), khz(med.detuning_kHz), khz(med.guard_kHz));
            let err = |e| CliError::core("mediated couplings", e);
            match m.kind {
                KindName::Xy => {
                    let (jx, jy) = mediated_xy_couplings(&cr.modes, &sites, f, d, g).map_err(err)?;
                    (jx, jy, DMatrix::zeros(n, n))
                }
                _ => {
                    let b = if med.branch == BranchName::X { Branch::X } else { Branch::Y };
                    let jz = mediated_couplings(&cr.modes, b, &sites, f, d, g).map_err(err)?;
                    (DMatrix::zeros(n, n), DMatrix::zeros(n, n), jz)
                }
            }
        }
    };
    let kind = match m.kind {
        KindName::Ising => ModelKind::Ising,
        KindName::Xy => ModelKind::Xy,
        KindName::Xxz => ModelKind::Xxz,
        KindName::Xyz => ModelKind::Xyz,
    };
    SpinModel::new(kind, h, jx, jy, jz).map_err(|e| CliError::core("spin model", e))
}

pub fn spectrum(cfg: &RunConfig) -> Result<SpinSpectrum, CliError> {
    let model = spin_model(cfg)?;
    let h = build_hamiltonian(&model, cfg.solver.max_spins).map_err(|e| CliError::core("hamiltonian", e))?;
    diagonalize(&h).map_err(|e| CliError::core("diagonalization", e))
}

pub fn drive(cfg: &RunConfig) -> Result<ExchangeDrive, CliError> {
    let d: &DriveSection = need(&cfg.drive, "drive")?;
    let n = need(&cfg.magnet, "magnet")?.spins;
    let c = |v: Vec<f64>| v.into_iter().map(|g| Complex64::new(khz(g), 0.0)).collect();
    ExchangeDrive::new(c(d.g_source_kHz.expand(n)), c(d.g_drain_kHz.expand(n))).map_err(|e| CliError::core("drive", e))
}

/// Source and drain reservoirs, explicit or derived from the cooling laser.
pub fn reservoirs(cfg: &RunConfig) -> Result<[ReservoirSpec; 2], CliError> {
    let d = need(&cfg.drive, "drive")?;
    let labels = ReservoirLabel::BOTH;
    let crystal_modes = || -> Result<(Crystal, [usize; 2]), CliError> {
        let co = need(&cfg.cooling, "cooling")?;
        Ok((crystal(cfg)?, [co.source_mode - 1, co.drain_mode - 1]))
    };
    let err = |e| CliError::core("reservoir", e);
    match (d.kappa_kHz, d.nbar) {
        (Some(k), Some(nb)) => {
            let w = match d.mode_frequency_MHz {
                Some(w) => [mhz(w[0]), mhz(w[1])],
                None => {
                    let (c, m) = crystal_modes()?;
                    [c.modes.z.frequencies[m[0]], c.modes.z.frequencies[m[1]]]
                }
            };
            let r = |i: usize| ReservoirSpec::from_width(labels[i], w[i], khz(k[i]), nb[i], khz(d.detuning_kHz[i]));
            Ok([r(0).map_err(err)?, r(1).map_err(err)?])
        }
        _ => {
            let (c, m) = crystal_modes()?;
            let rates = collective_rates(&c.modes, &c.arrangement, &laser(cfg)?);
            let r = |i: usize| {
                let mode = m[i];
                let w = d.mode_frequency_MHz.map_or(c.modes.z.frequencies[mode], |w| mhz(w[i]));
                ReservoirSpec::from_rates(labels[i], Some(mode), w, rates[mode].0, rates[mode].1, khz(d.detuning_kHz[i]))
            };
            Ok([r(0).map_err(err)?, r(1).map_err(err)?])
        }
    }
}

pub fn generator_options(s: &SolverSection) -> GeneratorOptions {
    GeneratorOptions {
        warn_ratio: s.warn_ratio,
        max_ratio: s.max_ratio,
        dissipator: match s.dissipator {
            DissipatorName::Secular => Dissipator::Secular,
            DissipatorName::BohrGrouped => Dissipator::BohrGrouped,
        },
    }
}

pub fn ode_options(s: &SolverSection) -> OdeOptions {
    OdeOptions { rtol: s.rtol, atol: s.atol, ..Default::default() }
}

pub fn steady_options(s: &SolverSection) -> SteadyOptions {
    SteadyOptions {
        method: match s.method {
            MethodName::NullSpace => SteadyMethod::NullSpace,
            MethodName::Propagation => SteadyMethod::Propagation,
            MethodName::CrossCheck => SteadyMethod::CrossCheck,
        },
        tol: s.tol,
        horizon: s.horizon_s,
        ode: ode_options(s),
        crosscheck_tol: s.crosscheck_tol,
        dense: DenseSteadyOptions::default(),
    }
}
