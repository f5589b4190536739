//! One function per subcommand; each returns the CSV tables it produces.

use ionflow::dimer::{analytic_current, eq_populations, DimerConfig};
use ionflow::magnet::transition_data;
use ionflow::oracle::{compare, run_oracle, OracleConfig};
use ionflow::protocol::{run_protocol, ProtocolConfig};
use ionflow::reservoir::{collective_rates, dos, reservoir_state, ReservoirLabel};
use ionflow::transport::{
    co_swept_grid, generator_for, sweep_point, ChannelLabel, DensityMatrix, SweepPoint, SweepSetup,
    TransportGenerator,
};
use ionflow::units::{khz, temperature_kelvin, to_hz, HBAR};
use rayon::prelude::*;

use crate::config::{KindName, PerSpin, RunConfig};
use crate::output::{num, Table};
use crate::{setup, CliError};

/// Diagnostics that do not stop a run.
pub type Warnings = Vec<String>;

pub fn modes(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let c = setup::crystal(cfg)?;
    let n = c.arrangement.len();
    let mut header = vec!["branch".to_string(), "n".into(), "frequency_Hz".into()];
    header.extend((1..=n).map(|i| format!("M_{i}")));
    let mut t = Table::new("modes", header);
    for (label, b) in [("x", &c.modes.x), ("y", &c.modes.y), ("z", &c.modes.z)] {
        for m in 0..b.len() {
            let mut row = vec![label.to_string(), (m + 1).to_string(), num(to_hz(b.frequencies[m]))];
            row.extend((0..n).map(|i| num(b.displacement(i, m))));
            t.push(row);
        }
    }
    Ok(vec![t])
}

pub fn reservoirs(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let c = setup::crystal(cfg)?;
    let laser = setup::laser(cfg)?;
    let co = cfg.cooling.as_ref().expect("checked by setup::laser");
    let scan = co.scan_over_linewidth.as_ref().map_or(vec![co.detuning_over_linewidth], |g| g.values());
    let mut t = Table::new(
        "reservoirs",
        ["Delta_L_Hz", "reservoir", "mode", "Gamma_plus", "Gamma_minus", "kappa", "nbar", "T_mK", "status"],
    );
    let floor = 2.0 * std::f64::consts::PI * co.kappa_floor_Hz;
    for x in scan {
        let d = x * laser.linewidth;
        let rates = collective_rates(&c.modes, &c.arrangement, &laser.with_detuning(d));
        for (label, mode) in [(ReservoirLabel::Source, co.source_mode - 1), (ReservoirLabel::Drain, co.drain_mode - 1)] {
            let (gp, gm) = rates[mode];
            let mut row = vec![num(to_hz(d)), label.short().into(), (mode + 1).to_string(), num(gp), num(gm)];
            match reservoir_state(gp, gm, c.modes.z.frequencies[mode]) {
                Ok(st) => {
                    let status = if st.kappa < floor { "weak" } else { "ok" };
                    row.extend([
                        num(st.kappa),
                        num(st.nbar),
                        num(temperature_kelvin(st.temperature) * 1e3),
                        status.into(),
                    ]);
                }
                Err(_) => row.extend([String::new(), String::new(), String::new(), "not_cooled".into()]),
            }
            t.push(row);
        }
    }
    Ok(vec![t])
}

pub fn dos_table(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let res = setup::reservoirs(cfg)?;
    let eps = match cfg.sweep.as_ref().and_then(|s| s.energy_kHz.as_ref()) {
        Some(g) => g.values().into_iter().map(khz).collect(),
        None => {
            let lo = res.iter().map(|r| r.detuning - 10.0 * r.kappa).fold(f64::INFINITY, f64::min);
            let hi = res.iter().map(|r| r.detuning + 10.0 * r.kappa).fold(f64::NEG_INFINITY, f64::max);
            (0..401).map(|k| lo + (hi - lo) * k as f64 / 400.0).collect::<Vec<_>>()
        }
    };
    let mut t = Table::new("dos", ["energy_kHz", "dos_source_per_kHz", "dos_drain_per_kHz"]);
    for e in eps {
        let per_khz = |r: usize| dos(e, res[r].detuning, res[r].kappa) * khz(1.0);
        t.push(vec![num(to_hz(e) * 1e-3), num(per_khz(0)), num(per_khz(1))]);
    }
    Ok(vec![t])
}

pub fn spectrum(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let spec = setup::spectrum(cfg)?;
    let drive = setup::drive(cfg)?;
    let td = transition_data(&spec, &drive).map_err(|e| CliError::core("transition data", e))?;
    let mut levels = Table::new("levels", ["level", "energy_kHz", "block"]);
    for l in 0..td.dim() {
        levels.push(vec![l.to_string(), num(to_hz(td.spectrum.energies[l]) * 1e-3), td.spectrum.block_of(l).to_string()]);
    }
    let mut couplings =
        Table::new("couplings", ["level", "from_level", "omega_kHz", "abs_g_source_kHz", "abs_g_drain_kHz"]);
    let scale = td.dressed.iter().flat_map(|m| m.iter().map(|v| v.norm())).fold(0.0, f64::max);
    for l in 0..td.dim() {
        for lp in 0..td.dim() {
            let g = [td.dressed[0][(l, lp)].norm(), td.dressed[1][(l, lp)].norm()];
            if g.iter().any(|v| *v > 1e-12 * scale) {
                couplings.push(vec![
                    l.to_string(),
                    lp.to_string(),
                    num(to_hz(td.frequency(l, lp)) * 1e-3),
                    num(to_hz(g[0]) * 1e-3),
                    num(to_hz(g[1]) * 1e-3),
                ]);
            }
        }
    }
    Ok(vec![levels, couplings])
}

fn generator(cfg: &RunConfig, warnings: &mut Warnings) -> Result<TransportGenerator, CliError> {
    let spec = setup::spectrum(cfg)?;
    let gen = generator_for(&spec, &setup::drive(cfg)?, setup::reservoirs(cfg)?, setup::generator_options(&cfg.solver))
        .map_err(|e| CliError::core("transport generator", e))?;
    warnings.extend(gen.warnings.iter().cloned());
    let frozen = cfg.sweep.as_ref().map_or(0.0, |s| s.frozen_ratio);
    Ok(gen.frozen(frozen))
}

pub fn steady(cfg: &RunConfig, warnings: &mut Warnings) -> Result<Vec<Table>, CliError> {
    let gen = generator(cfg, warnings)?;
    let rho = gen
        .steady_state(&gen.all_down(), &setup::steady_options(&cfg.solver))
        .map_err(|e| CliError::core("steady state", e))?;
    let cur = gen.current(&rho);
    let mut summary = Table::new("steady", ["I_S_per_s", "I_D_per_s", "energy_W", "dominant_rate_per_s"]);
    summary.push(vec![num(cur.source), num(cur.drain), num(cur.energy * HBAR), num(gen.dominant_rate())]);
    let mut pops = Table::new("populations", ["level", "energy_kHz", "population"]);
    for (l, p) in rho.populations().iter().enumerate() {
        pops.push(vec![l.to_string(), num(to_hz(gen.spectrum.energies[l]) * 1e-3), num(*p)]);
    }
    let mut chans = Table::new("channels", ["up", "down", "omega_kHz", "source_per_s", "drain_per_s"]);
    for c in &cur.channels {
        let (up, down, w) = match c.label {
            ChannelLabel::Transition { up, down } => (
                up.to_string(),
                down.to_string(),
                gen.spectrum.energies[up] - gen.spectrum.energies[down],
            ),
            ChannelLabel::BohrFrequency(w) => (String::new(), String::new(), w),
        };
        chans.push(vec![up, down, num(to_hz(w) * 1e-3), num(c.source), num(c.drain)]);
    }
    Ok(vec![summary, pops, chans])
}

fn sweep_setup(cfg: &RunConfig) -> Result<SweepSetup, CliError> {
    let spectrum = setup::spectrum(cfg)?;
    let n = spectrum.dim();
    Ok(SweepSetup {
        spectrum,
        drive: setup::drive(cfg)?,
        reservoirs: setup::reservoirs(cfg)?,
        g_over_kappa: cfg.drive.as_ref().and_then(|d| d.g_over_kappa),
        generator: setup::generator_options(&cfg.solver),
        steady: setup::steady_options(&cfg.solver),
        frozen_ratio: cfg.sweep.as_ref().map_or(0.0, |s| s.frozen_ratio),
        rho0: DensityMatrix::basis_state(n, 0),
    })
}

/// Co-swept grid of the sweep section; a single point at the drive's own
/// detunings and widths when there is no sweep.
fn sweep_points(cfg: &RunConfig, setup: &SweepSetup, warnings: &mut Warnings) -> Vec<SweepPoint> {
    let res = &setup.reservoirs;
    let Some(s) = &cfg.sweep else {
        return vec![SweepPoint { detuning: [res[0].detuning, res[1].detuning], kappa: [res[0].kappa, res[1].kappa] }];
    };
    let kappas = match &s.kappa_kHz {
        Some(g) => g.values().into_iter().map(khz).collect(),
        None => {
            if res[0].kappa != res[1].kappa {
                warnings.push("sweep sets kappa_S = kappa_D; using the source width for both".into());
            }
            vec![res[0].kappa]
        }
    };
    let detunings: Vec<f64> = s.detuning_kHz.values().into_iter().map(khz).collect();
    co_swept_grid(&detunings, &kappas)
}

pub fn sweep(cfg: &RunConfig, warnings: &mut Warnings) -> Result<Vec<Table>, CliError> {
    if cfg.sweep.is_none() {
        return Err(CliError::missing("sweep"));
    }
    let setup = sweep_setup(cfg)?;
    let points = sweep_points(cfg, &setup, warnings);
    // rows stay in grid order whatever the thread count
    let results: Vec<_> = points.par_iter().map(|p| sweep_point(&setup, p)).collect();
    let mut t = Table::new("sweep", ["kappa_kHz", "detuning_kHz", "I_S_per_s", "I_D_per_s", "energy_W", "error"]);
    for (p, r) in points.iter().zip(results) {
        let mut row = vec![num(to_hz(p.kappa[0]) * 1e-3), num(to_hz(p.detuning[0]) * 1e-3)];
        match r {
            Ok(c) => row.extend([num(c.source), num(c.drain), num(c.energy * HBAR), String::new()]),
            Err(e) => row.extend([String::new(), String::new(), String::new(), e.to_string()]),
        }
        t.push(row);
    }
    Ok(vec![t])
}

/// J of a two-spin Ising magnet with zero field.
fn dimer_coupling(cfg: &RunConfig) -> Result<f64, CliError> {
    let bad = |why: &str| CliError::unsupported(format!("dimer needs {why}"));
    let m = cfg.magnet.as_ref().ok_or_else(|| CliError::missing("magnet"))?;
    if m.kind != KindName::Ising || m.spins != 2 || m.field_kHz != 0.0 {
        return Err(bad("an ising magnet with two spins and zero field"));
    }
    let j = setup::spin_model(cfg)?.couplings()[2][(0, 1)];
    if !(j > 0.0) {
        return Err(bad("an antiferromagnetic coupling J > 0"));
    }
    let d = cfg.drive.as_ref().ok_or_else(|| CliError::missing("drive"))?;
    let homogeneous = |g: &PerSpin| g.expand(2).windows(2).all(|w| w[0] == w[1]);
    if !homogeneous(&d.g_source_kHz) || !homogeneous(&d.g_drain_kHz) {
        return Err(bad("the same coupling on both spins"));
    }
    Ok(j)
}

pub fn dimer(cfg: &RunConfig, warnings: &mut Warnings) -> Result<Vec<Table>, CliError> {
    let j = dimer_coupling(cfg)?;
    let setup = sweep_setup(cfg)?;
    let points = sweep_points(cfg, &setup, warnings);
    let rows: Vec<_> = points
        .par_iter()
        .map(|p| -> Result<Vec<String>, CliError> {
            let gen = setup.generator_at(p).map_err(|e| CliError::core("transport generator", e))?;
            let rho = gen
                .steady_state(&gen.to_eigenbasis(&setup.rho0), &setup.steady)
                .map_err(|e| CliError::core("steady state", e))?;
            let c = gen.to_computational(&rho);
            let m = c.matrix();
            let triplet = 0.5 * (m[(1, 1)] + m[(2, 2)] + m[(1, 2)] + m[(2, 1)]).re;
            let g = [0, 1].map(|r| drive_g(&setup, p, r));
            let r = &gen.reservoirs;
            let dc = DimerConfig::new(
                j,
                g,
                p.detuning,
                p.kappa,
                [r[0].nbar, r[1].nbar],
                [r[0].mode_frequency, r[1].mode_frequency],
            )
            .map_err(|e| CliError::core("dimer", e))?;
            let eq = eq_populations(&dc);
            Ok(vec![
                num(to_hz(p.kappa[0]) * 1e-3),
                num(to_hz(p.detuning[0]) * 1e-3),
                num(gen.current(&rho).source),
                num(analytic_current(&dc)),
                num(m[(0, 0)].re),
                num(eq.down),
                num(triplet),
                num(eq.triplet),
                num(eq.validity),
            ])
        })
        .collect();
    let mut t = Table::new(
        "dimer",
        [
            "kappa_kHz",
            "detuning_kHz",
            "I_numeric_per_s",
            "I_analytic_per_s",
            "rho_dd_numeric",
            "rho_dd_analytic",
            "rho_TT_numeric",
            "rho_TT_analytic",
            "validity",
        ],
    );
    for r in rows {
        t.push(r?);
    }
    Ok(vec![t])
}

/// Per-spin coupling of reservoir `r` at a sweep point, after any g/κ rescaling.
fn drive_g(setup: &SweepSetup, p: &SweepPoint, r: usize) -> f64 {
    let g = setup.drive.couplings[r][0].re;
    match setup.g_over_kappa {
        Some(ratio) if setup.drive.max_coupling(r) > 0.0 => ratio * p.kappa[r] * g / setup.drive.max_coupling(r),
        _ => g,
    }
}

pub fn oracle(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let o = &cfg.oracle;
    let mut oc = OracleConfig::new(setup::spin_model(cfg)?, setup::drive(cfg)?, setup::reservoirs(cfg)?);
    oc.n_max = o.n_max;
    oc.n_max_cap = o.n_max_cap;
    oc.top_fock_tol = o.top_fock_tol;
    oc.max_dim = o.max_dim;
    let rep = run_oracle(&oc).map_err(|e| CliError::core("oracle", e))?;
    let cmp = compare(&oc, &rep).map_err(|e| CliError::core("oracle comparison", e))?;
    let rel = |e: f64, f: f64| if e != 0.0 { num((f - e).abs() / e.abs()) } else { String::new() };
    let mut t = Table::new("oracle", ["quantity", "effective", "full", "relative_error"]);
    for (l, (e, f)) in cmp.effective.iter().zip(&cmp.full).enumerate() {
        t.push(vec![format!("population_{l}"), num(*e), num(*f), rel(*e, *f)]);
    }
    t.push(vec![
        "drain_current_per_s".into(),
        num(cmp.effective_current),
        num(cmp.full_current),
        rel(cmp.effective_current, cmp.full_current),
    ]);
    let mut tr = Table::new(
        "oracle_truncation",
        ["n_max", "top_fock_S", "top_fock_D", "occupation_S", "occupation_D", "fidelity_S", "fidelity_D", "residual"],
    );
    tr.push(vec![
        rep.n_max.to_string(),
        num(rep.top_fock[0]),
        num(rep.top_fock[1]),
        num(rep.occupations[0]),
        num(rep.occupations[1]),
        num(rep.phonon_fidelity[0]),
        num(rep.phonon_fidelity[1]),
        num(rep.residual),
    ]);
    Ok(vec![t, tr])
}

pub fn protocol(cfg: &RunConfig, warnings: &mut Warnings) -> Result<Vec<Table>, CliError> {
    let p = cfg.protocol.as_ref().ok_or_else(|| CliError::missing("protocol"))?;
    let gen = generator(cfg, warnings)?;
    let grid: Vec<(f64, f64)> = p
        .t_q_over_gamma
        .values()
        .into_iter()
        .flat_map(|tq| p.dt_over_gamma.values().into_iter().map(move |dt| (tq, dt)))
        .collect();
    let results: Vec<_> = grid
        .par_iter()
        .map(|&(tq, dt)| {
            let pc = ProtocolConfig {
                repetitions: p.repetitions,
                seed: p.seed,
                flip_probability: p.flip_probability,
                ode: setup::ode_options(&cfg.solver),
                ..ProtocolConfig::scaled(&gen, tq, dt)
            };
            run_protocol(&gen, &pc).map(|r| (pc, r))
        })
        .collect();
    let mut t = Table::new(
        "protocol",
        [
            "t_q_s",
            "dt_s",
            "rho_dd_tq",
            "rho_dd_tq_dt",
            "I_est_per_s",
            "I_S_per_s",
            "bias_per_s",
            "bias_bound_per_s",
            "I_sampled_per_s",
            "I_sampled_err_per_s",
        ],
    );
    for r in results {
        let (pc, r) = r.map_err(|e| CliError::core("protocol", e))?;
        for w in &r.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        let (s, se) = r.sampled.map_or((String::new(), String::new()), |s| (num(s.estimate), num(s.std_error)));
        t.push(vec![
            num(pc.t_q),
            num(pc.dt),
            num(r.p_tq),
            num(r.p_tq_dt),
            num(r.estimate),
            num(r.reference),
            num(r.estimate - r.reference),
            num(r.bias_bound),
            s,
            se,
        ]);
    }
    Ok(vec![t])
}
