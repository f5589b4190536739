//! Run configuration: TOML schema, defaults and semantic validation.
//!
//! Key names carry their unit (`trap_z_MHz`, `kappa_kHz`). Frequencies in
//! the file are ordinary frequencies; they are converted to angular ones when
//! the core types are built.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub crystal: Option<CrystalSection>,
    pub cooling: Option<CoolingSection>,
    pub magnet: Option<MagnetSection>,
    pub drive: Option<DriveSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub oracle: OracleSection,
    pub protocol: Option<ProtocolSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct CrystalSection {
    pub trap_x_MHz: f64,
    pub trap_y_MHz: f64,
    pub trap_z_MHz: f64,
    pub ions: Vec<IonEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    Spin,
    Coolant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct IonEntry {
    pub name: String,
    pub mass_amu: f64,
    pub role: RoleName,
    /// Cooling-transition linewidth; coolant ions only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth_MHz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct CoolingSection {
    pub rabi_over_linewidth: f64,
    pub wavelength_nm: f64,
    /// Laser detuning Δ_L/Γ used when reservoirs are derived from cooling.
    pub detuning_over_linewidth: f64,
    /// 1-based axial mode indices.
    pub source_mode: usize,
    pub drain_mode: usize,
    /// Adds carrier-recoil diffusion to both cooling rates.
    #[serde(default)]
    pub recoil: bool,
    /// κ below this floor flags a reservoir as weakly cooled.
    #[serde(default = "default_kappa_floor")]
    pub kappa_floor_Hz: f64,
    /// Δ_L/Γ grid for the `reservoirs` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_over_linewidth: Option<Grid>,
}

fn default_kappa_floor() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Ising,
    Xy,
    Xxz,
    Xyz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MagnetSection {
    pub kind: KindName,
    pub spins: usize,
    #[serde(default)]
    pub field_kHz: f64,
    #[serde(default)]
    pub couplings: Vec<CouplingEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mediated: Option<MediatedSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct CouplingEntry {
    /// 1-based spin indices.
    pub sites: [usize; 2],
    #[serde(default)]
    pub jx_kHz: f64,
    #[serde(default)]
    pub jy_kHz: f64,
    #[serde(default)]
    pub jz_kHz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchName {
    X,
    Y,
}

/// Couplings from a state-dependent force on the radial modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MediatedSection {
    /// Branch for Ising models; XY models use both.
    #[serde(default = "default_branch")]
    pub branch: BranchName,
    /// 1-based ion indices carrying the spins, in spin order.
    pub sites: Vec<usize>,
    /// F·x₀ expressed as a frequency.
    pub force_kHz: f64,
    /// Beat note above the radial trap frequency.
    pub detuning_kHz: f64,
    #[serde(default = "default_guard")]
    pub guard_kHz: f64,
}

fn default_branch() -> BranchName {
    BranchName::X
}

fn default_guard() -> f64 {
    1.0
}

/// A number for every spin, or one number shared by all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSpin {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerSpin {
    pub fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            PerSpin::Uniform(v) => vec![*v; n],
            PerSpin::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct DriveSection {
    pub g_source_kHz: PerSpin,
    pub g_drain_kHz: PerSpin,
    /// Sideband detunings δ_S, δ_D.
    pub detuning_kHz: [f64; 2],
    /// κ_S, κ_D. Give together with `nbar`, or leave both out to derive the
    /// reservoirs from the crystal and cooling sections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_kHz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<[f64; 2]>,
    /// Reservoir mode frequencies; taken from the crystal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_frequency_MHz: Option<[f64; 2]>,
    /// Rescale g so that max|g_r| = ratio · κ_r at every sweep point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_over_kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range(Range),
    Values(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range(r) if r.points == 1 => vec![r.start],
            Grid::Range(r) => {
                (0..r.points).map(|k| r.start + (r.stop - r.start) * k as f64 / (r.points - 1) as f64).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct SweepSection {
    /// Co-swept δ_S = δ_D grid.
    pub detuning_kHz: Grid,
    /// Co-swept κ_S = κ_D values; the drive's κ when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_kHz: Option<Grid>,
    /// Metastable cut, see the README.
    #[serde(default)]
    pub frozen_ratio: f64,
    /// Energy grid for the `dos` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_kHz: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    NullSpace,
    Propagation,
    CrossCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipatorName {
    Secular,
    BohrGrouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub method: MethodName,
    pub dissipator: DissipatorName,
    pub tol: f64,
    pub rtol: f64,
    pub atol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_s: Option<f64>,
    pub crosscheck_tol: f64,
    pub max_spins: usize,
    pub warn_ratio: f64,
    pub max_ratio: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            method: MethodName::NullSpace,
            dissipator: DissipatorName::Secular,
            tol: 1e-12,
            rtol: 1e-12,
            atol: 1e-15,
            horizon_s: None,
            crosscheck_tol: 1e-8,
            max_spins: 12,
            warn_ratio: 0.1,
            max_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub n_max: usize,
    pub n_max_cap: usize,
    pub top_fock_tol: f64,
    pub max_dim: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { n_max: 6, n_max_cap: 14, top_fock_tol: 1e-4, max_dim: 900 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// Quench times in units of 1/Γ_tot; several values give a t_q scan.
    pub t_q_over_gamma: Grid,
    /// Probe intervals in units of 1/Γ_tot.
    pub dt_over_gamma: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub flip_probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for CSV files, relative to the config file. Tables go to
    /// stdout when neither this nor `--out-dir` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// One problem found in a config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    /// TOML syntax or schema violation; the deserializer stops at the first.
    Schema(Issue),
    /// Every semantic problem found.
    Invalid(Vec<Issue>),
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        ConfigError::Schema(Issue {
            path: e.span().map_or_else(|| "<root>".into(), |s| locate(text, s.start)),
            reason: e.message().to_string(),
        })
    })?;
    let issues = validate(&cfg);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(issues))
    }
}

fn locate(text: &str, offset: usize) -> String {
    let line = text[..offset.min(text.len())].matches('\n').count() + 1;
    format!("line {line}")
}

pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

struct Checker(Vec<Issue>);

impl Checker {
    fn push(&mut self, path: impl Into<String>, reason: impl Into<String>) {
        self.0.push(Issue { path: path.into(), reason: reason.into() });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("must be positive and finite, got {v}"));
        }
    }

    fn finite(&mut self, path: &str, v: f64) {
        if !v.is_finite() {
            self.push(path, "must be finite");
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.push(path, format!("must be non-negative and finite, got {v}"));
        }
    }

    fn grid(&mut self, path: &str, g: &Grid) {
        match g {
            Grid::Range(r) => {
                if r.points == 0 {
                    self.push(format!("{path}.points"), "must be at least 1");
                }
                if !r.start.is_finite() || !r.stop.is_finite() {
                    self.push(path, "bounds must be finite");
                } else if r.points > 1 && r.stop <= r.start {
                    self.push(path, "stop must exceed start");
                }
            }
            Grid::Values(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    self.push(path, "values must be finite");
                } else if v.windows(2).any(|w| w[1] <= w[0]) {
                    self.push(path, "values must be strictly increasing");
                }
            }
        }
    }
}

pub fn validate(cfg: &RunConfig) -> Vec<Issue> {
    let mut c = Checker(Vec::new());
    if let Some(cr) = &cfg.crystal {
        c.positive("crystal.trap_x_MHz", cr.trap_x_MHz);
        c.positive("crystal.trap_y_MHz", cr.trap_y_MHz);
        c.positive("crystal.trap_z_MHz", cr.trap_z_MHz);
        if cr.trap_z_MHz >= cr.trap_x_MHz.min(cr.trap_y_MHz) {
            c.push("crystal.trap_z_MHz", "axial frequency must be below both radial ones");
        }
        if cr.ions.is_empty() {
            c.push("crystal.ions", "needs at least one ion");
        }
        for (i, ion) in cr.ions.iter().enumerate() {
            let p = format!("crystal.ions[{i}]");
            c.positive(&format!("{p}.mass_amu"), ion.mass_amu);
            match (ion.role, ion.linewidth_MHz) {
                (RoleName::Coolant, Some(l)) => c.positive(&format!("{p}.linewidth_MHz"), l),
                (RoleName::Coolant, None) => c.push(format!("{p}.linewidth_MHz"), "required for coolant ions"),
                (RoleName::Spin, Some(_)) => c.push(format!("{p}.linewidth_MHz"), "only coolant ions have a linewidth"),
                (RoleName::Spin, None) => {}
            }
        }
        if let Some(m) = &cfg.magnet {
            if let Some(med) = &m.mediated {
                for (k, s) in med.sites.iter().enumerate() {
                    if *s == 0 || *s > cr.ions.len() {
                        c.push(format!("magnet.mediated.sites[{k}]"), format!("ion {s} outside the crystal"));
                    } else if cr.ions[s - 1].role != RoleName::Spin {
                        c.push(format!("magnet.mediated.sites[{k}]"), format!("ion {s} is not a spin ion"));
                    }
                }
            }
        }
    }
    if let Some(co) = &cfg.cooling {
        c.positive("cooling.rabi_over_linewidth", co.rabi_over_linewidth);
        c.positive("cooling.wavelength_nm", co.wavelength_nm);
        c.finite("cooling.detuning_over_linewidth", co.detuning_over_linewidth);
        c.non_negative("cooling.kappa_floor_Hz", co.kappa_floor_Hz);
        if let Some(g) = &co.scan_over_linewidth {
            c.grid("cooling.scan_over_linewidth", g);
        }
        let n = cfg.crystal.as_ref().map(|cr| cr.ions.len());
        for (name, m) in [("source_mode", co.source_mode), ("drain_mode", co.drain_mode)] {
            if m == 0 || n.is_some_and(|n| m > n) {
                c.push(format!("cooling.{name}"), format!("mode {m} does not exist"));
            }
        }
        if co.source_mode == co.drain_mode {
            c.push("cooling.drain_mode", "source and drain must be different modes");
        }
        match &cfg.crystal {
            None => c.push("cooling", "needs a [crystal] section"),
            Some(cr) if !cr.ions.iter().any(|i| i.role == RoleName::Coolant) => {
                c.push("crystal.ions", "cooling needs at least one coolant ion")
            }
            Some(_) => {}
        }
    }
    if let Some(m) = &cfg.magnet {
        if m.spins == 0 {
            c.push("magnet.spins", "must be at least 1");
        } else if m.spins > cfg.solver.max_spins {
            c.push("magnet.spins", format!("exceeds solver.max_spins = {}", cfg.solver.max_spins));
        }
        c.finite("magnet.field_kHz", m.field_kHz);
        for (k, e) in m.couplings.iter().enumerate() {
            let p = format!("magnet.couplings[{k}]");
            let [a, b] = e.sites;
            if a == 0 || b == 0 || a > m.spins || b > m.spins {
                c.push(format!("{p}.sites"), format!("sites must lie in 1..={}", m.spins));
            } else if a == b {
                c.push(format!("{p}.sites"), "a spin cannot couple to itself");
            }
            for (n, v) in [("jx_kHz", e.jx_kHz), ("jy_kHz", e.jy_kHz), ("jz_kHz", e.jz_kHz)] {
                c.finite(&format!("{p}.{n}"), v);
            }
            match m.kind {
                KindName::Ising if e.jx_kHz != 0.0 || e.jy_kHz != 0.0 => {
                    c.push(&p, "ising couplings only have jz_kHz")
                }
                KindName::Xy if e.jz_kHz != 0.0 => c.push(&p, "xy couplings have no jz_kHz"),
                KindName::Xxz if e.jx_kHz != e.jy_kHz => c.push(&p, "xxz needs jx_kHz = jy_kHz"),
                _ => {}
            }
        }
        if let Some(med) = &m.mediated {
            if !m.couplings.is_empty() {
                c.push("magnet.mediated", "give either couplings or mediated, not both");
            }
            if !matches!(m.kind, KindName::Ising | KindName::Xy) {
                c.push("magnet.mediated", "mediated couplings support ising and xy models");
            }
            if med.sites.len() != m.spins {
                c.push("magnet.mediated.sites", format!("needs one ion per spin ({})", m.spins));
            }
            c.non_negative("magnet.mediated.force_kHz", med.force_kHz);
            c.finite("magnet.mediated.detuning_kHz", med.detuning_kHz);
            c.non_negative("magnet.mediated.guard_kHz", med.guard_kHz);
            if cfg.crystal.is_none() {
                c.push("magnet.mediated", "needs a [crystal] section");
            }
        }
    }
    if let Some(d) = &cfg.drive {
        let n = cfg.magnet.as_ref().map_or(0, |m| m.spins);
        for (name, g) in [("g_source_kHz", &d.g_source_kHz), ("g_drain_kHz", &d.g_drain_kHz)] {
            if let PerSpin::List(v) = g {
                if cfg.magnet.is_some() && v.len() != n {
                    c.push(format!("drive.{name}"), format!("needs {n} entries, one per spin"));
                }
            }
            if g.expand(1.max(n)).iter().any(|x| !x.is_finite()) {
                c.push(format!("drive.{name}"), "must be finite");
            }
        }
        if cfg.magnet.is_none() {
            c.push("drive", "needs a [magnet] section");
        }
        for r in 0..2 {
            c.finite(&format!("drive.detuning_kHz[{r}]"), d.detuning_kHz[r]);
        }
        match (d.kappa_kHz, d.nbar) {
            (Some(k), Some(nb)) => {
                for r in 0..2 {
                    c.positive(&format!("drive.kappa_kHz[{r}]"), k[r]);
                    c.non_negative(&format!("drive.nbar[{r}]"), nb[r]);
                }
            }
            (None, None) => {
                if cfg.cooling.is_none() {
                    c.push("drive", "without kappa_kHz and nbar the reservoirs come from [cooling], which is missing");
                }
            }
            _ => c.push("drive", "kappa_kHz and nbar must be given together"),
        }
        match d.mode_frequency_MHz {
            Some(w) => {
                for r in 0..2 {
                    c.positive(&format!("drive.mode_frequency_MHz[{r}]"), w[r]);
                }
            }
            None if cfg.cooling.is_none() => {
                c.push("drive.mode_frequency_MHz", "required when there is no [cooling] section to pick the modes")
            }
            None => {}
        }
        if let Some(r) = d.g_over_kappa {
            c.non_negative("drive.g_over_kappa", r);
        }
    }
    if let Some(s) = &cfg.sweep {
        c.grid("sweep.detuning_kHz", &s.detuning_kHz);
        if let Some(k) = &s.kappa_kHz {
            c.grid("sweep.kappa_kHz", k);
            if k.values().iter().any(|v| *v <= 0.0) {
                c.push("sweep.kappa_kHz", "widths must be positive");
            }
        }
        if let Some(e) = &s.energy_kHz {
            c.grid("sweep.energy_kHz", e);
        }
        if !(0.0..1.0).contains(&s.frozen_ratio) {
            c.push("sweep.frozen_ratio", "must lie in [0, 1)");
        }
    }
    let sv = &cfg.solver;
    c.positive("solver.tol", sv.tol);
    c.positive("solver.rtol", sv.rtol);
    c.positive("solver.atol", sv.atol);
    c.positive("solver.crosscheck_tol", sv.crosscheck_tol);
    c.positive("solver.warn_ratio", sv.warn_ratio);
    if !(sv.max_ratio >= sv.warn_ratio) {
        c.push("solver.max_ratio", "must be at least solver.warn_ratio");
    }
    if let Some(h) = sv.horizon_s {
        c.positive("solver.horizon_s", h);
    }
    if sv.max_spins == 0 || sv.max_spins > 14 {
        c.push("solver.max_spins", "must lie in 1..=14");
    }
    let o = &cfg.oracle;
    if o.n_max > o.n_max_cap {
        c.push("oracle.n_max", "exceeds oracle.n_max_cap");
    }
    c.positive("oracle.top_fock_tol", o.top_fock_tol);
    if let Some(p) = &cfg.protocol {
        c.grid("protocol.t_q_over_gamma", &p.t_q_over_gamma);
        c.grid("protocol.dt_over_gamma", &p.dt_over_gamma);
        if p.t_q_over_gamma.values().iter().any(|v| *v < 0.0) {
            c.push("protocol.t_q_over_gamma", "must be non-negative");
        }
        if p.dt_over_gamma.values().iter().any(|v| *v <= 0.0) {
            c.push("protocol.dt_over_gamma", "must be positive");
        }
        if p.repetitions == Some(0) {
            c.push("protocol.repetitions", "must be at least 1");
        }
        if !(0.0..=0.5).contains(&p.flip_probability) {
            c.push("protocol.flip_probability", "must lie in [0, 0.5]");
        }
    }
    c.0
}
