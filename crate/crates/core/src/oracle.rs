//! Full Lindblad model of the spins coupled to both laser-cooled modes, used
//! as ground truth for the eliminated transport equation.
//!
//! Frame: each mode rotates with its own sideband drive, which leaves a
//! time-independent Hamiltonian
//!   H = H_m + Σ_r δ_r a_r†a_r + Σ_{i,r} (g_{i,r} σ_i^+ a_r + h.c.)
//! and cooling jumps √(κ_r(n̄_r+1)) a_r, √(κ_r n̄_r) a_r†.
//! Basis index: s + 2^N (n_S + (n_max+1) n_D).

use num_complex::Complex64;

use crate::lindblad::{self, DenseSteadyOptions, LindbladModel};
use crate::magnet::{build_hamiltonian, diagonalize, ExchangeDrive, SpinModel};
use crate::reservoir::ReservoirSpec;
use crate::transport::{generator_for, DensityMatrix, GeneratorOptions, TransportGenerator};
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub model: SpinModel,
    pub drive: ExchangeDrive,
    /// δ_r, κ_r and n̄_r of both modes.
    pub reservoirs: [ReservoirSpec; 2],
    /// Starting Fock truncation.
    pub n_max: usize,
    pub n_max_cap: usize,
    /// Accepted top-Fock population.
    pub top_fock_tol: f64,
    /// Cap on the composite Hilbert-space dimension.
    pub max_dim: usize,
    pub dense: DenseSteadyOptions,
}

impl OracleConfig {
    pub fn new(model: SpinModel, drive: ExchangeDrive, reservoirs: [ReservoirSpec; 2]) -> Self {
        Self {
            model,
            drive,
            reservoirs,
            n_max: 6,
            n_max_cap: 14,
            top_fock_tol: 1e-4,
            max_dim: 4 * 15 * 15,
            dense: DenseSteadyOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullModel {
    pub n_max: usize,
    pub spins: usize,
    pub lindblad: LindbladModel,
    /// Excitation number: up spins plus phonons. Conserved by H.
    pub charges: Vec<i64>,
    pub reservoirs: [ReservoirSpec; 2],
    /// Mode lowering operators on the composite space.
    pub lowering: [CMatrix; 2],
}

impl FullModel {
    pub fn dim(&self) -> usize {
        self.charges.len()
    }

    fn spin_dim(&self) -> usize {
        1 << self.spins
    }

    fn index(&self, s: usize, ns: usize, nd: usize) -> usize {
        s + self.spin_dim() * (ns + (self.n_max + 1) * nd)
    }

    /// ρ_spin ⊗ |0,0⟩⟨0,0|
    pub fn with_vacuum(&self, rho_spin: &CMatrix) -> CMatrix {
        let ds = self.spin_dim();
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for a in 0..ds {
            for b in 0..ds {
                out[(a, b)] = rho_spin[(a, b)];
            }
        }
        out
    }
}

pub fn build_full(cfg: &OracleConfig, n_max: usize) -> Result<FullModel> {
    let spins = cfg.model.spins();
    if cfg.drive.spins() != spins {
        return Err(Error::InvalidInput("drive and spin model sizes differ".into()));
    }
    let ds = 1usize << spins;
    let nf = n_max + 1;
    let dim = ds * nf * nf;
    if dim > cfg.max_dim {
        return Err(Error::SizeCap { what: "spin-phonon Hilbert space".into(), size: dim, cap: cfg.max_dim });
    }
    let hm = build_hamiltonian(&cfg.model, spins)?;
    let idx = |s: usize, ns: usize, nd: usize| s + ds * (ns + nf * nd);
    let mut h = CMatrix::zeros(dim, dim);
    let mut lower = [CMatrix::zeros(dim, dim), CMatrix::zeros(dim, dim)];
    let mut charges = vec![0i64; dim];
    for nd in 0..nf {
        for ns in 0..nf {
            for s in 0..ds {
                let i = idx(s, ns, nd);
                charges[i] = (s.count_ones() as usize + ns + nd) as i64;
                for sp in 0..ds {
                    h[(idx(sp, ns, nd), i)] += hm[(sp, s)];
                }
                let occ = [ns as f64, nd as f64];
                for r in 0..2 {
                    h[(i, i)] += Complex64::new(cfg.reservoirs[r].detuning * occ[r], 0.0);
                }
                if ns > 0 {
                    lower[0][(idx(s, ns - 1, nd), i)] = Complex64::new((ns as f64).sqrt(), 0.0);
                }
                if nd > 0 {
                    lower[1][(idx(s, ns, nd - 1), i)] = Complex64::new((nd as f64).sqrt(), 0.0);
                }
            }
        }
    }
    // exchange Σ_i g_{i,r} σ_i^+ a_r + h.c.
    for r in 0..2 {
        let mut x = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            let s = i % ds;
            let rest = i / ds;
            let (ns, nd) = (rest % nf, rest / nf);
            let n = [ns, nd][r];
            if n == 0 {
                continue;
            }
            let amp = (n as f64).sqrt();
            for (site, g) in cfg.drive.couplings[r].iter().enumerate() {
                if s & (1 << site) != 0 {
                    continue;
                }
                let (ns2, nd2) = if r == 0 { (ns - 1, nd) } else { (ns, nd - 1) };
                let j = idx(s | (1 << site), ns2, nd2);
                x[(j, i)] += g * amp;
            }
        }
        h += &x + x.adjoint();
    }
    let mut jumps = Vec::new();
    for r in 0..2 {
        let res = &cfg.reservoirs[r];
        let down = (res.kappa * (res.nbar + 1.0)).sqrt();
        let up = (res.kappa * res.nbar).sqrt();
        if n_max > 0 {
            jumps.push(&lower[r] * Complex64::new(down, 0.0));
            if up > 0.0 {
                jumps.push(lower[r].adjoint() * Complex64::new(up, 0.0));
            }
        }
    }
    Ok(FullModel {
        n_max,
        spins,
        lindblad: LindbladModel::new(h, jumps)?,
        charges,
        reservoirs: cfg.reservoirs,
        lowering: lower,
    })
}

#[derive(Debug, Clone)]
pub struct FullSteadyState {
    pub rho: CMatrix,
    pub residual: f64,
    pub subspace_dim: usize,
}

/// Stationary state reached from ρ_spin ⊗ |0,0⟩⟨0,0|, solved directly on the
/// reachable charge-diagonal blocks.
pub fn full_steady_state(model: &FullModel, rho_spin: &CMatrix, opts: DenseSteadyOptions) -> Result<FullSteadyState> {
    let rho0 = model.with_vacuum(rho_spin);
    let ss = lindblad::steady_state(&model.lindblad, &rho0, Some(&model.charges), opts)?;
    Ok(FullSteadyState { rho: ss.rho, residual: ss.residual, subspace_dim: ss.subspace_dim })
}

/// Partial trace over both modes.
pub fn reduced_spin(model: &FullModel, rho: &CMatrix) -> CMatrix {
    let ds = model.spin_dim();
    let nf = model.n_max + 1;
    let mut out = CMatrix::zeros(ds, ds);
    for nd in 0..nf {
        for ns in 0..nf {
            for a in 0..ds {
                for b in 0..ds {
                    out[(a, b)] += rho[(model.index(a, ns, nd), model.index(b, ns, nd))];
                }
            }
        }
    }
    out
}

/// Reduced state of mode r (0 = source, 1 = drain).
pub fn reduced_mode(model: &FullModel, rho: &CMatrix, r: usize) -> CMatrix {
    let ds = model.spin_dim();
    let nf = model.n_max + 1;
    let mut out = CMatrix::zeros(nf, nf);
    for m in 0..nf {
        for n in 0..nf {
            for other in 0..nf {
                for s in 0..ds {
                    let (i, j) = if r == 0 {
                        (model.index(s, m, other), model.index(s, n, other))
                    } else {
                        (model.index(s, other, m), model.index(s, other, n))
                    };
                    out[(m, n)] += rho[(i, j)];
                }
            }
        }
    }
    out
}

/// Truncated thermal distribution renormalized on 0..=n_max.
pub fn thermal_populations(nbar: f64, n_max: usize) -> Vec<f64> {
    let q = nbar / (1.0 + nbar);
    let p: Vec<f64> = (0..=n_max).map(|n| q.powi(n as i32)).collect();
    let z: f64 = p.iter().sum();
    p.iter().map(|v| v / z).collect()
}

/// Uhlmann fidelity of ρ with a diagonal state σ.
pub fn fidelity_with_diagonal(rho: &CMatrix, sigma: &[f64]) -> f64 {
    let n = sigma.len();
    let s: Vec<f64> = sigma.iter().map(|v| v.max(0.0).sqrt()).collect();
    let m = CMatrix::from_fn(n, n, |a, b| rho[(a, b)] * (s[a] * s[b]));
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr: f64 = m.symmetric_eigenvalues().iter().map(|l| l.max(0.0).sqrt()).sum();
    tr * tr
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCurrent {
    /// Net quanta/s dissipated by the drain mode's bath.
    pub drain: f64,
    /// Net quanta/s supplied by the source mode's bath.
    pub source: f64,
}

/// Bath fluxes Tr(L_− ρ L_−†) − Tr(L_+ ρ L_+†) per mode, evaluated with the
/// truncated operators so that quanta are conserved exactly.
pub fn full_current(model: &FullModel, rho: &CMatrix) -> OracleCurrent {
    let flux = |r: usize| {
        let res = &model.reservoirs[r];
        let a = &model.lowering[r];
        let n = (a * rho * a.adjoint()).trace().re;
        let aad = (a.adjoint() * rho * a).trace().re;
        res.kappa * (res.nbar + 1.0) * n - res.kappa * res.nbar * aad
    };
    OracleCurrent { drain: flux(1), source: -flux(0) }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub n_max: usize,
    /// Reduced spin state, computational basis.
    pub spin: CMatrix,
    pub occupations: [f64; 2],
    pub top_fock: [f64; 2],
    /// Fidelity of each reduced mode with its thermal state.
    pub phonon_fidelity: [f64; 2],
    pub current: OracleCurrent,
    pub residual: f64,
}

/// Solves the full model from all spins down, raising n_max until the top
/// Fock level of both modes holds less than `top_fock_tol`.
pub fn run_oracle(cfg: &OracleConfig) -> Result<OracleReport> {
    let ds = 1usize << cfg.model.spins();
    let mut rho_spin = CMatrix::zeros(ds, ds);
    rho_spin[(0, 0)] = Complex64::new(1.0, 0.0);
    let mut n_max = cfg.n_max;
    loop {
        let model = build_full(cfg, n_max)?;
        let report = solve_at(&model, &rho_spin, cfg.dense)?;
        if report.top_fock.iter().all(|p| *p < cfg.top_fock_tol) || n_max == 0 {
            return Ok(report);
        }
        if n_max >= cfg.n_max_cap {
            return Err(Error::NoConvergence {
                what: format!("Fock truncation at n_max = {n_max}"),
                residual: report.top_fock[0].max(report.top_fock[1]),
            });
        }
        n_max += 1;
    }
}

/// Steady-state report at a fixed truncation.
pub fn solve_at(model: &FullModel, rho_spin: &CMatrix, dense: DenseSteadyOptions) -> Result<OracleReport> {
    let ss = full_steady_state(model, rho_spin, dense)?;
    let modes = [reduced_mode(model, &ss.rho, 0), reduced_mode(model, &ss.rho, 1)];
    let n_max = model.n_max;
    let occupations = [0, 1].map(|r| (0..=n_max).map(|n| n as f64 * modes[r][(n, n)].re).sum());
    let top_fock = [0, 1].map(|r| modes[r][(n_max, n_max)].re);
    let phonon_fidelity =
        [0, 1].map(|r| fidelity_with_diagonal(&modes[r], &thermal_populations(model.reservoirs[r].nbar, n_max)));
    Ok(OracleReport {
        n_max,
        spin: reduced_spin(model, &ss.rho),
        occupations,
        top_fock,
        phonon_fidelity,
        current: full_current(model, &ss.rho),
        residual: ss.residual,
    })
}

#[derive(Debug, Clone)]
pub struct OracleComparison {
    /// Effective-model populations in its eigenbasis.
    pub effective: Vec<f64>,
    /// Oracle populations in the same basis.
    pub full: Vec<f64>,
    /// max relative population difference over levels holding > 1e-3.
    pub population_error: f64,
    pub effective_current: f64,
    pub full_current: f64,
    pub current_error: f64,
}

/// Effective generator matching an oracle configuration.
pub fn effective_generator(cfg: &OracleConfig) -> Result<TransportGenerator> {
    let spectrum = diagonalize(&build_hamiltonian(&cfg.model, cfg.model.spins())?)?;
    let opts = GeneratorOptions { warn_ratio: f64::INFINITY, max_ratio: f64::INFINITY, ..Default::default() };
    generator_for(&spectrum, &cfg.drive, cfg.reservoirs, opts)
}

pub fn compare(cfg: &OracleConfig, report: &OracleReport) -> Result<OracleComparison> {
    let gen = effective_generator(cfg)?;
    let eff = gen.steady_state(&gen.all_down(), &Default::default())?;
    let full = gen.to_eigenbasis(&DensityMatrix::unchecked(report.spin.clone()));
    let effective = eff.populations();
    let full_p = full.populations();
    let population_error = effective
        .iter()
        .zip(&full_p)
        .filter(|(e, _)| **e > 1e-3)
        .map(|(e, f)| (f - e).abs() / e)
        .fold(0.0, f64::max);
    let effective_current = gen.current(&eff).drain;
    let full_current = report.current.drain;
    let current_error = (full_current - effective_current).abs() / effective_current.abs().max(1e-300);
    Ok(OracleComparison {
        effective,
        full: full_p,
        population_error,
        effective_current,
        full_current,
        current_error,
    })
}
