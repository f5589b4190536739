//! Reduced master equation on the magnet after eliminating both reservoirs.
//!
//! All states handled here live in the drive-adapted eigenbasis of the spin
//! Hamiltonian; [`TransportGenerator::to_eigenbasis`] converts from the
//! computational basis.
//!
//! A channel is an ordered pair (up, down) with g̃_{up,down,r} ≠ 0: absorbing
//! a reservoir quantum moves the magnet down → up with rate
//! Γ_Mr(up, down) = 2π|g̃|²𝔇_r(ω_{up,down}) n_r, emitting moves it back with
//! Γ_rM(down, up) = 2π|g̃|²𝔇_r(ω_{up,down}) (1 + n_r).

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::lindblad::{self, DenseSteadyOptions, LindbladModel};
use crate::magnet::{transition_data, ExchangeDrive, SpinSpectrum, TransitionData};
use crate::ode::{self, OdeOptions};
use crate::reservoir::{dos, ReservoirLabel, ReservoirSpec};
use crate::{CMatrix, CVector, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validated density matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = Self(m);
        rho.validate()?;
        Ok(rho)
    }

    pub fn unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn pure(v: &CVector) -> Self {
        let n = v.norm();
        let v = v / Complex64::new(n, 0.0);
        Self(&v * v.adjoint())
    }

    pub fn basis_state(dim: usize, i: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(i, i)] = Complex64::new(1.0, 0.0);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn population(&self, i: usize) -> f64 {
        self.0[(i, i)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.population(i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.0.is_square() || self.0.nrows() == 0 {
            return Err(Error::InvalidInput("density matrix must be square".into()));
        }
        if self.hermiticity_error() > 1e-12 {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        if (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("density matrix trace is {}", self.trace())));
        }
        if self.min_eigenvalue() < -1e-9 {
            return Err(Error::InvalidInput("density matrix is not positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dissipator {
    /// One jump operator per channel; coherences decouple from populations.
    Secular,
    /// One jump operator per reservoir, direction and Bohr frequency; keeps
    /// coherences between channels with equal transition frequency.
    BohrGrouped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// max |g̃|/κ above which a warning is recorded.
    pub warn_ratio: f64,
    /// max |g̃|/κ above which the build fails.
    pub max_ratio: f64,
    pub dissipator: Dissipator,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self { warn_ratio: 0.1, max_ratio: 0.5, dissipator: Dissipator::Secular }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub up: usize,
    pub down: usize,
    /// ω_{up,down}
    pub omega: f64,
    /// g̃_{up,down,r}
    pub coupling: [Complex64; 2],
    /// Γ_Mr(up, down)
    pub absorb: [f64; 2],
    /// Γ_rM(down, up)
    pub emit: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportGenerator {
    pub spectrum: SpinSpectrum,
    /// Δε_{ℓ,r}
    pub lamb: [Vec<f64>; 2],
    pub channels: Vec<Channel>,
    pub reservoirs: [ReservoirSpec; 2],
    pub dissipator: Dissipator,
    pub warnings: Vec<String>,
}

/// Couplings below this fraction of the largest one are treated as zero.
const COUPLING_FLOOR: f64 = 1e-12;

pub fn build_generator(
    transitions: &TransitionData,
    reservoirs: [ReservoirSpec; 2],
    opts: GeneratorOptions,
) -> Result<TransportGenerator> {
    let d = transitions.dim();
    let mut warnings = Vec::new();
    for (r, res) in reservoirs.iter().enumerate() {
        if !(res.kappa > 0.0) {
            return Err(Error::InvalidInput("reservoir width must be positive".into()));
        }
        let gmax = transitions.dressed[r].iter().map(|v| v.norm()).fold(0.0, f64::max);
        let ratio = gmax / res.kappa;
        if ratio > opts.max_ratio {
            return Err(Error::Validity { reservoir: res.label.short(), ratio, bound: opts.max_ratio });
        }
        if ratio > opts.warn_ratio {
            warnings.push(format!(
                "reservoir {}: |g~|/kappa = {ratio:.3} exceeds {}; elimination may be inaccurate",
                res.label.short(),
                opts.warn_ratio
            ));
        }
    }
    let gmax = transitions
        .dressed
        .iter()
        .flat_map(|m| m.iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let mut channels = Vec::new();
    let mut lamb = [vec![0.0; d], vec![0.0; d]];
    for down in 0..d {
        for up in 0..d {
            let g = [transitions.dressed[0][(up, down)], transitions.dressed[1][(up, down)]];
            if g.iter().all(|g| g.norm() <= COUPLING_FLOOR * gmax) {
                continue;
            }
            let omega = transitions.frequency(up, down);
            let mut absorb = [0.0; 2];
            let mut emit = [0.0; 2];
            for r in 0..2 {
                let res = &reservoirs[r];
                let g2 = g[r].norm_sqr();
                let base = 2.0 * PI * g2 * res.dos(omega);
                absorb[r] = base * res.nbar;
                emit[r] = base * (1.0 + res.nbar);
                let x = res.detuning - omega;
                lamb[r][up] -= g2 * x / (x * x + 0.25 * res.kappa * res.kappa);
            }
            channels.push(Channel { up, down, omega, coupling: g, absorb, emit });
        }
    }
    Ok(TransportGenerator {
        spectrum: transitions.spectrum.clone(),
        lamb,
        channels,
        reservoirs,
        dissipator: opts.dissipator,
        warnings,
    })
}

/// Spectrum + drive → generator in one call.
pub fn generator_for(
    spectrum: &SpinSpectrum,
    drive: &ExchangeDrive,
    reservoirs: [ReservoirSpec; 2],
    opts: GeneratorOptions,
) -> Result<TransportGenerator> {
    build_generator(&transition_data(spectrum, drive)?, reservoirs, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    NullSpace,
    Propagation,
    /// Both methods; fails if they disagree by more than `crosscheck_tol`.
    CrossCheck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    pub method: SteadyMethod,
    /// Propagation stops when max|dρ/dt| < tol · (dominant rate).
    pub tol: f64,
    /// Propagation horizon; defaults to 1e3 over the slowest nonzero rate.
    pub horizon: Option<f64>,
    pub ode: OdeOptions,
    pub crosscheck_tol: f64,
    /// Dense Liouvillian cap for the Bohr-grouped dissipator.
    pub dense: DenseSteadyOptions,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            method: SteadyMethod::NullSpace,
            tol: 1e-12,
            horizon: None,
            ode: OdeOptions { rtol: 1e-12, atol: 1e-15, ..Default::default() },
            crosscheck_tol: 1e-8,
            dense: DenseSteadyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelLabel {
    Transition { up: usize, down: usize },
    BohrFrequency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCurrent {
    pub label: ChannelLabel,
    /// Net quanta/s absorbed from the source through this channel.
    pub source: f64,
    /// Net quanta/s emitted into the drain through this channel.
    pub drain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentResult {
    /// I_S: net quanta/s absorbed from the source.
    pub source: f64,
    /// I_D: net quanta/s emitted into the drain.
    pub drain: f64,
    /// I_S · ω_S
    pub energy: f64,
    pub channels: Vec<ChannelCurrent>,
}

/// Jump operator of the Bohr-grouped dissipator.
#[derive(Debug, Clone)]
struct GroupedJump {
    reservoir: usize,
    absorb: bool,
    omega: f64,
    op: CMatrix,
}

impl TransportGenerator {
    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    /// ε_ℓ + Σ_r Δε_{ℓ,r}
    pub fn shifted_energies(&self) -> Vec<f64> {
        (0..self.dim()).map(|l| self.spectrum.energies[l] + self.lamb[0][l] + self.lamb[1][l]).collect()
    }

    fn channel(&self, up: usize, down: usize) -> Option<&Channel> {
        self.channels.iter().find(|c| c.up == up && c.down == down)
    }

    /// Γ_Mr(ℓ, ℓ'): absorption ℓ' → ℓ.
    pub fn absorption_rate(&self, r: ReservoirLabel, l: usize, lp: usize) -> f64 {
        self.channel(l, lp).map_or(0.0, |c| c.absorb[r.index()])
    }

    /// Γ_rM(ℓ, ℓ'): emission ℓ' → ℓ.
    pub fn emission_rate(&self, r: ReservoirLabel, l: usize, lp: usize) -> f64 {
        self.channel(lp, l).map_or(0.0, |c| c.emit[r.index()])
    }

    /// Population jumps summed over reservoirs (secular form).
    pub fn jumps(&self) -> Vec<Jump> {
        let mut out = Vec::with_capacity(2 * self.channels.len());
        for c in &self.channels {
            let a = c.absorb[0] + c.absorb[1];
            let e = c.emit[0] + c.emit[1];
            if a > 0.0 {
                out.push(Jump { from: c.down, to: c.up, rate: a });
            }
            if e > 0.0 {
                out.push(Jump { from: c.up, to: c.down, rate: e });
            }
        }
        out
    }

    /// Largest total rate of a single channel, Σ_r (Γ_Mr + Γ_rM). For the
    /// single-channel dimer this is the relaxation rate Γ_tot.
    pub fn dominant_rate(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.absorb[0] + c.absorb[1] + c.emit[0] + c.emit[1])
            .fold(0.0, f64::max)
    }

    /// Total escape rate of every level.
    pub fn escape_rates(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for j in self.jumps() {
            g[j.from] += j.rate;
        }
        g
    }

    /// Generator with one reservoir switched off (its g set to zero).
    pub fn quench(&self, off: ReservoirLabel) -> Self {
        let r = off.index();
        let mut out = self.clone();
        out.lamb[r].iter_mut().for_each(|v| *v = 0.0);
        for c in &mut out.channels {
            c.coupling[r] = ZERO;
            c.absorb[r] = 0.0;
            c.emit[r] = 0.0;
        }
        out.channels.retain(|c| c.coupling.iter().any(|g| g.norm() > 0.0));
        out
    }

    /// Metastable cut: rates below `ratio` times the largest rate are set to
    /// zero. Gives the long plateau reached before slow channels act.
    pub fn frozen(&self, ratio: f64) -> Self {
        if ratio <= 0.0 {
            return self.clone();
        }
        let max = self
            .channels
            .iter()
            .flat_map(|c| c.absorb.iter().chain(&c.emit))
            .fold(0.0f64, |m, v| m.max(*v));
        let cut = ratio * max;
        let mut out = self.clone();
        for c in &mut out.channels {
            for r in 0..2 {
                if c.absorb[r] < cut {
                    c.absorb[r] = 0.0;
                }
                if c.emit[r] < cut {
                    c.emit[r] = 0.0;
                }
            }
        }
        out
    }

    /// Computational-basis state in the generator's eigenbasis.
    pub fn to_eigenbasis(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.spectrum.to_eigenbasis(rho.matrix()))
    }

    pub fn to_computational(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.spectrum.to_computational(rho.matrix()))
    }

    /// All spins down, in the eigenbasis.
    pub fn all_down(&self) -> DensityMatrix {
        self.to_eigenbasis(&DensityMatrix::basis_state(self.dim(), 0))
    }

    fn grouped_jumps(&self) -> Vec<GroupedJump> {
        let d = self.dim();
        let scale = self.channels.iter().map(|c| c.omega.abs()).fold(1.0, f64::max);
        let tol = 1e-9 * scale;
        let mut out: Vec<GroupedJump> = Vec::new();
        for r in 0..2 {
            let res = &self.reservoirs[r];
            let mut freqs: Vec<f64> = Vec::new();
            for c in &self.channels {
                if c.coupling[r].norm() > 0.0 && !freqs.iter().any(|f| (f - c.omega).abs() <= tol) {
                    freqs.push(c.omega);
                }
            }
            for w in freqs {
                let base = 2.0 * PI * res.dos(w);
                let mut up_op = CMatrix::zeros(d, d);
                for c in self.channels.iter().filter(|c| (c.omega - w).abs() <= tol) {
                    up_op[(c.up, c.down)] += c.coupling[r];
                }
                let a = (base * res.nbar).sqrt();
                let e = (base * (1.0 + res.nbar)).sqrt();
                if a > 0.0 {
                    out.push(GroupedJump { reservoir: r, absorb: true, omega: w, op: &up_op * Complex64::new(a, 0.0) });
                }
                if e > 0.0 {
                    out.push(GroupedJump { reservoir: r, absorb: false, omega: w, op: up_op.adjoint() * Complex64::new(e, 0.0) });
                }
            }
        }
        out
    }

    /// The generator as an explicit Lindblad model in the eigenbasis.
    pub fn lindblad_model(&self) -> LindbladModel {
        let d = self.dim();
        let e = self.shifted_energies();
        let h = CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(e[i], 0.0) } else { ZERO });
        let jumps = match self.dissipator {
            Dissipator::Secular => self
                .jumps()
                .into_iter()
                .map(|j| {
                    let mut m = CMatrix::zeros(d, d);
                    m[(j.to, j.from)] = Complex64::new(j.rate.sqrt(), 0.0);
                    m
                })
                .collect(),
            Dissipator::BohrGrouped => self.grouped_jumps().into_iter().map(|g| g.op).collect(),
        };
        LindbladModel::new(h, jumps).expect("square operators")
    }

    /// dρ/dt
    pub fn rhs(&self, rho: &DensityMatrix) -> CMatrix {
        match self.dissipator {
            Dissipator::Secular => {
                let d = self.dim();
                let e = self.shifted_energies();
                let g = self.escape_rates();
                let m = rho.matrix();
                let mut out = CMatrix::from_fn(d, d, |a, b| {
                    m[(a, b)] * Complex64::new(-0.5 * (g[a] + g[b]), -(e[a] - e[b]))
                });
                for j in self.jumps() {
                    out[(j.to, j.to)] += m[(j.from, j.from)] * j.rate;
                }
                out
            }
            Dissipator::BohrGrouped => self.lindblad_model().rhs(rho.matrix()),
        }
    }

    /// ρ(t) at each of the sorted times.
    pub fn propagate_many(&self, rho0: &DensityMatrix, times: &[f64], opts: OdeOptions) -> Result<Vec<DensityMatrix>> {
        if rho0.dim() != self.dim() {
            return Err(Error::InvalidInput("state and generator dimensions differ".into()));
        }
        match self.dissipator {
            Dissipator::Secular => self.propagate_secular(rho0, times, opts),
            Dissipator::BohrGrouped => Ok(self
                .lindblad_model()
                .propagate(rho0.matrix(), times, opts)?
                .into_iter()
                .map(DensityMatrix)
                .collect()),
        }
    }

    pub fn propagate(&self, rho0: &DensityMatrix, t: f64, opts: OdeOptions) -> Result<DensityMatrix> {
        Ok(self.propagate_many(rho0, &[t], opts)?.pop().expect("one output"))
    }

    /// Populations follow the rate equations; each coherence evolves on its
    /// own with a closed-form phase and decay.
    fn propagate_secular(&self, rho0: &DensityMatrix, times: &[f64], opts: OdeOptions) -> Result<Vec<DensityMatrix>> {
        let d = self.dim();
        let jumps = self.jumps();
        let g = self.escape_rates();
        let e = self.shifted_energies();
        let p0 = rho0.populations();
        let pops = ode::integrate(
            |_, p, dp| {
                for i in 0..d {
                    dp[i] = -g[i] * p[i];
                }
                for j in &jumps {
                    dp[j.to] += j.rate * p[j.from];
                }
            },
            0.0,
            &p0,
            times,
            opts,
        )?;
        let m0 = rho0.matrix();
        Ok(times
            .iter()
            .zip(pops)
            .map(|(&t, p)| {
                DensityMatrix(CMatrix::from_fn(d, d, |a, b| {
                    if a == b {
                        Complex64::new(p[a], 0.0)
                    } else if t == 0.0 {
                        m0[(a, b)]
                    } else {
                        let z = Complex64::new(-0.5 * (g[a] + g[b]), -(e[a] - e[b])) * t;
                        m0[(a, b)] * z.exp()
                    }
                }))
            })
            .collect())
    }

    pub fn steady_state(&self, rho0: &DensityMatrix, opts: &SteadyOptions) -> Result<DensityMatrix> {
        if rho0.dim() != self.dim() {
            return Err(Error::InvalidInput("state and generator dimensions differ".into()));
        }
        match opts.method {
            SteadyMethod::NullSpace => self.steady_null_space(rho0, opts),
            SteadyMethod::Propagation => self.steady_propagation(rho0, opts),
            SteadyMethod::CrossCheck => {
                let a = self.steady_null_space(rho0, opts)?;
                let b = self.steady_propagation(rho0, opts)?;
                let diff = (a.matrix() - b.matrix()).iter().map(|v| v.norm()).fold(0.0, f64::max);
                if diff > opts.crosscheck_tol {
                    return Err(Error::SteadyState(format!(
                        "null-space and propagated steady states differ by {diff:.3e}"
                    )));
                }
                Ok(a)
            }
        }
    }

    fn steady_null_space(&self, rho0: &DensityMatrix, opts: &SteadyOptions) -> Result<DensityMatrix> {
        match self.dissipator {
            Dissipator::Secular => self.secular_stationary(rho0),
            Dissipator::BohrGrouped => {
                let ss = lindblad::steady_state(&self.lindblad_model(), rho0.matrix(), None, opts.dense)?;
                Ok(DensityMatrix(ss.rho))
            }
        }
    }

    /// Exact stationary state of the secular generator reached from ρ0:
    /// closed classes of the rate graph, weighted by absorption
    /// probabilities, plus the coherences that never decay or dephase.
    fn secular_stationary(&self, rho0: &DensityMatrix) -> Result<DensityMatrix> {
        let d = self.dim();
        let p0 = rho0.populations();
        let p = stationary_populations(d, &self.jumps(), &p0)?;
        let g = self.escape_rates();
        let e = self.shifted_energies();
        let escale = e.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let m0 = rho0.matrix();
        Ok(DensityMatrix(CMatrix::from_fn(d, d, |a, b| {
            if a == b {
                Complex64::new(p[a], 0.0)
            } else if g[a] == 0.0 && g[b] == 0.0 && (e[a] - e[b]).abs() <= 1e-12 * escale {
                m0[(a, b)]
            } else {
                ZERO
            }
        })))
    }

    fn steady_propagation(&self, rho0: &DensityMatrix, opts: &SteadyOptions) -> Result<DensityMatrix> {
        let rate = self.dominant_rate();
        if rate == 0.0 {
            return Ok(rho0.clone());
        }
        let slowest = self
            .jumps()
            .iter()
            .map(|j| j.rate)
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min);
        let horizon = opts.horizon.unwrap_or(1e3 / slowest);
        let d = self.dim();
        let g = self.escape_rates();
        let e = self.shifted_energies();
        // undamped coherences between non-degenerate levels oscillate forever;
        // their time average is zero
        let escale = e.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let frozen = |a: usize, b: usize| g[a] == 0.0 && g[b] == 0.0;
        let mut t = 1.0 / rate;
        let mut rho = rho0.clone();
        let mut elapsed = 0.0;
        loop {
            rho = self.propagate(&rho, t, opts.ode)?;
            elapsed += t;
            let dr = self.rhs(&rho);
            let mut worst = 0.0f64;
            for a in 0..d {
                for b in 0..d {
                    if a != b && frozen(a, b) {
                        continue;
                    }
                    worst = worst.max(dr[(a, b)].norm());
                }
            }
            if worst < opts.tol * rate {
                break;
            }
            if elapsed >= horizon {
                return Err(Error::NoConvergence {
                    what: format!("steady-state propagation within horizon {horizon:.3e} s"),
                    residual: worst / rate,
                });
            }
            t = (2.0 * t).min(horizon - elapsed).max(1.0 / rate);
        }
        let m = rho.matrix();
        Ok(DensityMatrix(CMatrix::from_fn(d, d, |a, b| {
            if a != b && frozen(a, b) && (e[a] - e[b]).abs() > 1e-12 * escale {
                ZERO
            } else {
                m[(a, b)]
            }
        })))
    }

    /// Quanta currents and their per-channel breakdown.
    pub fn current(&self, rho: &DensityMatrix) -> CurrentResult {
        let mut channels = Vec::new();
        match self.dissipator {
            Dissipator::Secular => {
                for c in &self.channels {
                    let pd = rho.population(c.down);
                    let pu = rho.population(c.up);
                    channels.push(ChannelCurrent {
                        label: ChannelLabel::Transition { up: c.up, down: c.down },
                        source: c.absorb[0] * pd - c.emit[0] * pu,
                        drain: c.emit[1] * pu - c.absorb[1] * pd,
                    });
                }
            }
            Dissipator::BohrGrouped => {
                let mut by_freq: Vec<(f64, [f64; 2])> = Vec::new();
                for j in self.grouped_jumps() {
                    let flux = (&j.op * rho.matrix() * j.op.adjoint()).trace().re;
                    let sign = match (j.reservoir, j.absorb) {
                        (0, true) | (1, false) => 1.0,
                        _ => -1.0,
                    };
                    let slot = match by_freq.iter().position(|(w, _)| *w == j.omega) {
                        Some(i) => i,
                        None => {
                            by_freq.push((j.omega, [0.0; 2]));
                            by_freq.len() - 1
                        }
                    };
                    by_freq[slot].1[j.reservoir] += sign * flux;
                }
                for (w, [s, dr]) in by_freq {
                    channels.push(ChannelCurrent { label: ChannelLabel::BohrFrequency(w), source: s, drain: dr });
                }
            }
        }
        let source: f64 = channels.iter().map(|c| c.source).sum();
        let drain: f64 = channels.iter().map(|c| c.drain).sum();
        CurrentResult { source, drain, energy: source * self.reservoirs[0].mode_frequency, channels }
    }
}

/// Stationary distribution of the rate equations reached from p0.
pub fn stationary_populations(d: usize, jumps: &[Jump], p0: &[f64]) -> Result<Vec<f64>> {
    let mut graph = DiGraph::<usize, f64>::with_capacity(d, jumps.len());
    let nodes: Vec<_> = (0..d).map(|i| graph.add_node(i)).collect();
    let mut out_rates: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for j in jumps.iter().filter(|j| j.rate > 0.0 && j.from != j.to) {
        graph.add_edge(nodes[j.from], nodes[j.to], j.rate);
        out_rates[j.from].push((j.to, j.rate));
    }
    // states reachable from the initial support
    let mut reach = vec![false; d];
    let mut stack: Vec<usize> = (0..d).filter(|&i| p0[i] > 0.0).collect();
    for &i in &stack {
        reach[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &(j, _) in &out_rates[i] {
            if !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    let comp_of = {
        let mut c = vec![usize::MAX; d];
        let sccs = tarjan_scc(&graph);
        for (k, scc) in sccs.iter().enumerate() {
            for n in scc {
                c[graph[*n]] = k;
            }
        }
        c
    };
    let ncomp = comp_of.iter().max().map_or(0, |m| m + 1);
    let mut closed = vec![true; ncomp];
    for i in 0..d {
        for &(j, _) in &out_rates[i] {
            if comp_of[j] != comp_of[i] {
                closed[comp_of[i]] = false;
            }
        }
    }
    let classes: Vec<Vec<usize>> = (0..ncomp)
        .filter(|&k| closed[k])
        .map(|k| (0..d).filter(|&i| comp_of[i] == k && reach[i]).collect::<Vec<_>>())
        .filter(|v| !v.is_empty())
        .collect();
    let transient: Vec<usize> = (0..d).filter(|&i| reach[i] && !closed[comp_of[i]]).collect();

    let mut p = vec![0.0; d];
    let tpos: HashMap<usize, usize> = transient.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    // absorption probabilities h_C(i) for transient i
    let h: Option<DMatrix<f64>> = if transient.is_empty() {
        None
    } else {
        let nt = transient.len();
        let mut a = DMatrix::<f64>::zeros(nt, nt);
        let mut b = DMatrix::<f64>::zeros(nt, classes.len());
        let class_of: HashMap<usize, usize> = classes
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.iter().map(move |&i| (i, k)))
            .collect();
        for (k, &i) in transient.iter().enumerate() {
            for &(j, rate) in &out_rates[i] {
                a[(k, k)] -= rate;
                if let Some(&m) = tpos.get(&j) {
                    a[(k, m)] += rate;
                } else if let Some(&c) = class_of.get(&j) {
                    b[(k, c)] -= rate;
                }
            }
        }
        let lu = a.full_piv_lu();
        Some(lu.solve(&b).ok_or_else(|| Error::SteadyState("transient block is singular".into()))?)
    };
    for (c, class) in classes.iter().enumerate() {
        let mut weight: f64 = class.iter().map(|&i| p0[i]).sum();
        if let Some(h) = &h {
            weight += transient.iter().enumerate().map(|(k, &i)| p0[i] * h[(k, c)]).sum::<f64>();
        }
        if weight == 0.0 {
            continue;
        }
        let pi = class_stationary(class, &out_rates)?;
        for (k, &i) in class.iter().enumerate() {
            p[i] += weight * pi[k];
        }
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SteadyState("initial state has no population".into()));
    }
    Ok(p.iter().map(|v| v / total).collect())
}

/// Unique stationary vector of an irreducible class: W π = 0 with one row
/// replaced by normalization, solved by full-pivot LU. A pivot below
/// 1e-12·‖W‖ means the null space is not one-dimensional.
fn class_stationary(class: &[usize], out_rates: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let m = class.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let pos: HashMap<usize, usize> = class.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut w = DMatrix::<f64>::zeros(m, m);
    for (k, &i) in class.iter().enumerate() {
        for &(j, rate) in &out_rates[i] {
            let t = pos[&j];
            w[(t, k)] += rate;
            w[(k, k)] -= rate;
        }
    }
    let norm = w.amax();
    for k in 0..m {
        w[(0, k)] = 1.0;
    }
    let lu = w.full_piv_lu();
    let u = lu.u();
    let min_pivot = (0..m).map(|k| u[(k, k)].abs()).fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 * norm {
        return Err(Error::SteadyState("rate matrix null space is not one-dimensional".into()));
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    rhs[0] = 1.0;
    let pi = lu.solve(&rhs).ok_or_else(|| Error::SteadyState("singular rate matrix".into()))?;
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

/// One point of a detuning/width sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub detuning: [f64; 2],
    pub kappa: [f64; 2],
}

/// Everything that stays fixed along a sweep.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    pub spectrum: SpinSpectrum,
    pub drive: ExchangeDrive,
    pub reservoirs: [ReservoirSpec; 2],
    /// When set, each reservoir's couplings are rescaled so that
    /// max_i |g_{i,r}| = ratio · κ_r at every point.
    pub g_over_kappa: Option<f64>,
    pub generator: GeneratorOptions,
    pub steady: SteadyOptions,
    /// Metastable cut passed to [`TransportGenerator::frozen`]; 0 disables.
    pub frozen_ratio: f64,
    /// Initial state in the computational basis.
    pub rho0: DensityMatrix,
}

impl SweepSetup {
    pub fn generator_at(&self, point: &SweepPoint) -> Result<TransportGenerator> {
        let mut res = self.reservoirs;
        for r in 0..2 {
            res[r] = res[r].with_kappa(point.kappa[r])?.with_detuning(point.detuning[r]);
        }
        let mut drive = self.drive.clone();
        if let Some(ratio) = self.g_over_kappa {
            for r in 0..2 {
                let gmax = self.drive.max_coupling(r);
                if gmax > 0.0 {
                    let s = ratio * point.kappa[r] / gmax;
                    drive.couplings[r].iter_mut().for_each(|g| *g *= s);
                }
            }
        }
        Ok(generator_for(&self.spectrum, &drive, res, self.generator)?.frozen(self.frozen_ratio))
    }
}

pub fn sweep_point(setup: &SweepSetup, point: &SweepPoint) -> Result<CurrentResult> {
    let gen = setup.generator_at(point)?;
    let rho0 = gen.to_eigenbasis(&setup.rho0);
    let rho = gen.steady_state(&rho0, &setup.steady)?;
    Ok(gen.current(&rho))
}

/// Serial sweep; failures are kept per point.
pub fn current_sweep(setup: &SweepSetup, points: &[SweepPoint]) -> Vec<Result<CurrentResult>> {
    points.iter().map(|p| sweep_point(setup, p)).collect()
}

/// Points of the co-swept convention δ_S = δ_D = δ, κ_S = κ_D = κ.
pub fn co_swept_grid(detunings: &[f64], kappas: &[f64]) -> Vec<SweepPoint> {
    kappas
        .iter()
        .flat_map(|&k| detunings.iter().map(move |&d| SweepPoint { detuning: [d, d], kappa: [k, k] }))
        .collect()
}

/// Reference DOS value helper for callers that sample Lorentzians.
pub fn sample_dos(res: &ReservoirSpec, eps: &[f64]) -> Vec<f64> {
    eps.iter().map(|&e| dos(e, res.detuning, res.kappa)).collect()
}
