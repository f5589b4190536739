//! Quench-and-probe estimate of the source current.
//!
//! Sequence: prepare ↓↓, equilibrate with both reservoirs until t_q, switch
//! the drain off, wait Δt, freeze and read the ↓↓ population. The current is
//! the drop of ρ_↓↓ over Δt.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ode::OdeOptions;
use crate::reservoir::ReservoirLabel;
use crate::transport::{DensityMatrix, TransportGenerator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Quench time t_q (s).
    pub t_q: f64,
    /// Probe interval Δt (s).
    pub dt: f64,
    /// Shots per population for sampled readout; `None` gives exact values.
    pub repetitions: Option<u64>,
    pub seed: u64,
    /// Readout error: probability that a shot is misclassified.
    pub flip_probability: f64,
    /// t_q below this many 1/Γ_tot raises a warning.
    pub min_equilibration: f64,
    /// Δt·(Γ_MS+Γ_SM) above this raises a warning.
    pub max_probe_ratio: f64,
    pub ode: OdeOptions,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            t_q: 0.0,
            dt: 0.0,
            repetitions: None,
            seed: 0,
            flip_probability: 0.0,
            min_equilibration: 20.0,
            max_probe_ratio: 0.1,
            ode: OdeOptions { rtol: 1e-12, atol: 1e-16, ..Default::default() },
        }
    }
}

impl ProtocolConfig {
    /// t_q and Δt in units of 1/Γ_tot of `gen`.
    pub fn scaled(gen: &TransportGenerator, t_q: f64, dt: f64) -> Self {
        let g = gen.dominant_rate();
        Self { t_q: t_q / g, dt: dt / g, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledEstimate {
    pub p_tq: f64,
    pub p_tq_dt: f64,
    pub estimate: f64,
    /// One-sigma shot-noise error of `estimate`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    /// ρ_↓↓(t_q)
    pub p_tq: f64,
    /// ρ_↓↓(t_q + Δt)
    pub p_tq_dt: f64,
    /// (ρ_↓↓(t_q) − ρ_↓↓(t_q+Δt)) / Δt
    pub estimate: f64,
    /// −dρ_↓↓/dt just after the quench; the Δt → 0 limit of `estimate`.
    pub reference: f64,
    /// ½Δt(Γ_MS+Γ_SM)|I_est|, the leading bias of the estimator.
    pub bias_bound: f64,
    pub sampled: Option<SampledEstimate>,
    pub warnings: Vec<String>,
}

/// ρ_↓↓ of an eigenbasis state.
pub fn down_population(gen: &TransportGenerator, rho: &DensityMatrix) -> f64 {
    gen.to_computational(rho).population(0)
}

/// Γ_MS + Γ_SM on the fastest source channel.
fn source_rate(gen: &TransportGenerator) -> f64 {
    gen.channels.iter().map(|c| c.absorb[0] + c.emit[0]).fold(0.0, f64::max)
}

pub fn run_protocol(gen: &TransportGenerator, cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    if !(cfg.t_q >= 0.0) || !(cfg.dt > 0.0) {
        return Err(Error::InvalidInput("protocol needs t_q >= 0 and dt > 0".into()));
    }
    if !(0.0..=0.5).contains(&cfg.flip_probability) {
        return Err(Error::InvalidInput("flip probability must lie in [0, 0.5]".into()));
    }
    let mut warnings = Vec::new();
    let gtot = gen.dominant_rate();
    if cfg.t_q * gtot < cfg.min_equilibration {
        warnings.push(format!(
            "t_q = {:.3}/Gamma_tot is below {}/Gamma_tot; the magnet may not have equilibrated",
            cfg.t_q * gtot,
            cfg.min_equilibration
        ));
    }
    let gs = source_rate(gen);
    if cfg.dt * gs >= cfg.max_probe_ratio {
        warnings.push(format!(
            "dt*(Gamma_MS+Gamma_SM) = {:.3} is not small; estimator bias is first order in dt",
            cfg.dt * gs
        ));
    }
    let rho0 = gen.all_down();
    let rho_q = gen.propagate(&rho0, cfg.t_q, cfg.ode)?;
    let quenched = gen.quench(ReservoirLabel::Drain);
    let rho_p = quenched.propagate(&rho_q, cfg.dt, cfg.ode)?;
    let p_tq = down_population(gen, &rho_q);
    let p_tq_dt = down_population(gen, &rho_p);
    let estimate = (p_tq - p_tq_dt) / cfg.dt;
    let reference = -gen.spectrum.to_computational(&quenched.rhs(&rho_q))[(0, 0)].re;
    let sampled = cfg.repetitions.map(|n| {
        let a = sample_population(p_tq, n, cfg.flip_probability, cfg.seed, 0);
        let b = sample_population(p_tq_dt, n, cfg.flip_probability, cfg.seed, 1);
        let var = |p: f64| p * (1.0 - p) / n as f64;
        SampledEstimate {
            p_tq: a,
            p_tq_dt: b,
            estimate: (a - b) / cfg.dt,
            std_error: (var(a) + var(b)).sqrt() / cfg.dt,
        }
    });
    Ok(ProtocolResult {
        p_tq,
        p_tq_dt,
        estimate,
        reference,
        bias_bound: 0.5 * cfg.dt * gs * estimate.abs(),
        sampled,
        warnings,
    })
}

/// Fraction of `shots` projective readouts that report ↓↓. Shot k of series
/// s uses its own generator seeded from (seed, s, k).
pub fn sample_population(p: f64, shots: u64, flip: f64, seed: u64, series: u64) -> f64 {
    if shots == 0 {
        return f64::NAN;
    }
    let p = (p * (1.0 - flip) + (1.0 - p) * flip).clamp(0.0, 1.0);
    let mut hits = 0u64;
    for k in 0..shots {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(series);
        rng.set_word_pos(u128::from(k) * 16);
        if rng.random::<f64>() < p {
            hits += 1;
        }
    }
    hits as f64 / shots as f64
}

/// Closed-form populations (ρ_↓↓, ρ_TT) of the source-only two-level rate
/// equations, t measured from the quench.
pub fn quench_rate_equations(gamma_ms: f64, gamma_sm: f64, p0: (f64, f64), times: &[f64]) -> Vec<(f64, f64)> {
    let s = gamma_ms + gamma_sm;
    let m = p0.0 + p0.1;
    times
        .iter()
        .map(|&t| {
            if s == 0.0 || t == 0.0 {
                return p0;
            }
            let inf = gamma_ms * m / s;
            let pt = inf + (p0.1 - inf) * (-s * t).exp();
            (m - pt, pt)
        })
        .collect()
}

/// Least-squares slope of log|y| against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_rates_relax_to_half() {
        let p = quench_rate_equations(2.0, 2.0, (1.0, 0.0), &[0.0, 50.0]);
        assert_eq!(p[0], (1.0, 0.0));
        assert!((p[1].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_population(0.3, 2000, 0.0, 7, 0);
        assert_eq!(a, sample_population(0.3, 2000, 0.0, 7, 0));
        assert!((a - 0.3).abs() < 0.05);
        assert_eq!(sample_population(1.0, 100, 0.0, 1, 0), 1.0);
        assert!((sample_population(1.0, 4000, 0.1, 1, 0) - 0.9).abs() < 0.03);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }
}
