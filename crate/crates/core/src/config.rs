//! Scenario configuration: flat `section.key = value` text.
//!
//! ```text
//! # comment
//! geometry.antennas = 64
//! geometry.layout = line
//! noise.sigma_min_dbm = -95
//! experiment.receivers = bmrc, bmmse
//! ```
//!
//! Powers are given in dBm and SINDRs in dB; everything is converted to
//! linear units when the scenario is built. Command-line overrides
//! (`key=value`) are applied after the file.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dither::{DitherConfig, InnerSolver};
use crate::error::{Error, Result};
use crate::geometry::{CsiMode, GeometryConfig, Layout, Position};
use crate::linksim::GainEstimate;
use crate::power::OptimizerConfig;
use crate::receivers::ReceiverKind;
use crate::units::{dbm_to_watts, watts_to_dbm};

/// The experiment families driven by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    /// SINDR of every UE at a common transmit power.
    SndrSweep,
    /// Minimum sum power meeting a common SINDR target.
    MinPower,
    /// Max-min SINDR under a per-UE power cap.
    MaxMin,
    /// 16-QAM symbol error rate at the max-min operating point.
    Ser,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::SndrSweep,
        ExperimentKind::MinPower,
        ExperimentKind::MaxMin,
        ExperimentKind::Ser,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SndrSweep => "sndr-sweep",
            ExperimentKind::MinPower => "minpower",
            ExperimentKind::MaxMin => "maxmin",
            ExperimentKind::Ser => "ser",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Swept variable when `experiment.sweep = auto`.
    pub fn natural_sweep(self) -> SweepVariable {
        match self {
            ExperimentKind::SndrSweep => SweepVariable::RhoDbm,
            ExperimentKind::MinPower => SweepVariable::TargetDb,
            ExperimentKind::MaxMin | ExperimentKind::Ser => SweepVariable::RhoUeDbm,
        }
    }

    /// Default `(start, stop, step)` of the natural sweep.
    pub fn default_range(self) -> (f64, f64, f64) {
        match self {
            ExperimentKind::SndrSweep => (-30.0, 40.0, 1.0),
            ExperimentKind::MinPower => (-5.0, 10.0, 2.5),
            ExperimentKind::MaxMin | ExperimentKind::Ser => (-5.0, 25.0, 5.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    /// Common UE transmit power, dBm.
    RhoDbm,
    /// Common SINDR target, dB.
    TargetDb,
    /// Per-UE power cap, dBm.
    RhoUeDbm,
    /// Distance from the reference RRH to the UE cluster, m.
    DRefM,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::RhoDbm => "rho_dbm",
            SweepVariable::TargetDb => "target_db",
            SweepVariable::RhoUeDbm => "rho_ue_dbm",
            SweepVariable::DRefM => "d_ref_m",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::RhoDbm, Self::TargetDb, Self::RhoUeDbm, Self::DRefM]
            .into_iter()
            .find(|v| v.name() == s)
    }

    fn allowed_for(self, kind: ExperimentKind) -> bool {
        self == SweepVariable::DRefM || self == kind.natural_sweep()
    }
}

/// Sweep and Monte Carlo settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// `None` selects the experiment's natural variable.
    pub sweep: Option<SweepVariable>,
    /// `None` falls back to the experiment's default range.
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
    /// Channel seeds; every seed yields its own set of rows.
    pub seeds: Vec<u64>,
    pub receivers: Vec<ReceiverKind>,
    /// Dithering modes to run (`false` = every σ_b at the floor).
    pub dithering: Vec<bool>,
    /// Power solvers compared by the min-power experiment.
    pub methods: Vec<InnerSolver>,
    /// Fixed common power when it is not the swept variable.
    pub rho_dbm: f64,
    /// Fixed common SINDR target when it is not the swept variable.
    pub target_db: f64,
    /// Fixed per-UE cap when it is not the swept variable.
    pub rho_ue_dbm: f64,
    pub n_symbols: usize,
    pub symbol_seed: u64,
    pub gain_estimate: GainEstimate,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sweep: None,
            start: None,
            stop: None,
            step: None,
            seeds: vec![1],
            receivers: ReceiverKind::ALL.to_vec(),
            dithering: vec![false, true],
            methods: vec![InnerSolver::Bcd],
            rho_dbm: 0.0,
            target_db: 0.0,
            rho_ue_dbm: 25.0,
            n_symbols: 100_000,
            symbol_seed: 11,
            gain_estimate: GainEstimate::Analytic,
        }
    }
}

/// Everything needed to reproduce one experiment run.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    /// Thermal-noise power σ_min², dBm.
    pub sigma_min_dbm: f64,
    pub csi: CsiMode,
    /// Pilot length behind the CSI error level; recorded, not simulated.
    pub pilot_length: usize,
    pub optimizer: OptimizerConfig,
    pub dither: DitherConfig,
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
    /// Line each key was last set on (0 for command-line overrides).
    lines: HashMap<String, usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            sigma_min_dbm: -95.0,
            csi: CsiMode::Perfect,
            pilot_length: 0,
            optimizer: OptimizerConfig::default(),
            dither: DitherConfig::default(),
            experiment: ExperimentConfig::default(),
            output_dir: PathBuf::from("out"),
            lines: HashMap::new(),
        }
    }
}

impl PartialEq for ScenarioConfig {
    fn eq(&self, other: &Self) -> bool {
        self.render() == other.render()
    }
}

/// Every key that shapes the results, in canonical order. `output.dir` is
/// accepted too but kept out of the rendered (and hashed) configuration.
pub const KEYS: &[&str] = &[
    "geometry.num_rrh",
    "geometry.antennas",
    "geometry.num_ue",
    "geometry.layout",
    "geometry.spacing_m",
    "geometry.d_ref_m",
    "geometry.b_cluster_m",
    "geometry.rrh_height_m",
    "geometry.ue_height_m",
    "geometry.rrh_positions",
    "geometry.ue_positions",
    "noise.sigma_min_dbm",
    "csi.mode",
    "csi.epsilon",
    "csi.pilot_length",
    "optimizer.alpha",
    "optimizer.beta",
    "optimizer.zeta_rho",
    "optimizer.nu",
    "optimizer.nu_damping",
    "optimizer.max_iters",
    "optimizer.sindr_tol",
    "optimizer.rho_init_dbm",
    "optimizer.gradient_init_low_dbm",
    "optimizer.gradient_init_high_dbm",
    "optimizer.seed",
    "optimizer.rho_ceiling_dbm",
    "dither.eps_sigma_frac",
    "dither.eps_rho_db",
    "dither.eps_gamma_db",
    "dither.zeta_sigma",
    "dither.kappa",
    "dither.nu_eta",
    "dither.fine_tune_iters",
    "dither.backtracks",
    "dither.rho_max_dbm",
    "dither.inner",
    "experiment.sweep",
    "experiment.start",
    "experiment.stop",
    "experiment.step",
    "experiment.seeds",
    "experiment.receivers",
    "experiment.dithering",
    "experiment.methods",
    "experiment.rho_dbm",
    "experiment.target_db",
    "experiment.rho_ue_dbm",
    "experiment.n_symbols",
    "experiment.symbol_seed",
    "experiment.gain_estimate",
];

type FieldResult<T> = std::result::Result<T, String>;

fn num(v: &str) -> FieldResult<f64> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(x)
}

fn int<T: std::str::FromStr>(v: &str) -> FieldResult<T> {
    v.parse()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn opt_num(v: &str) -> FieldResult<Option<f64>> {
    match v {
        "auto" | "none" => Ok(None),
        _ => num(v).map(Some),
    }
}

fn positions(v: &str) -> FieldResult<Vec<Position>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let c: Vec<f64> = list(p).map(num).collect::<FieldResult<_>>()?;
            match c.as_slice() {
                [x, y, z] => Ok([*x, *y, *z]),
                [x, y] => Ok([*x, *y, 0.0]),
                _ => Err(format!("position `{p}` needs 2 or 3 coordinates")),
            }
        })
        .collect()
}

fn fmt_positions(p: &[Position]) -> String {
    p.iter()
        .map(|q| format!("{}, {}, {}", q[0], q[1], q[2]))
        .collect::<Vec<_>>()
        .join("; ")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

fn on_off(v: &str) -> FieldResult<bool> {
    match v {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("`{v}` is not on/off")),
    }
}

fn solver_name(s: InnerSolver) -> &'static str {
    match s {
        InnerSolver::Bcd => "bcd",
        InnerSolver::Gradient => "gradient",
    }
}

fn parse_solver(v: &str) -> FieldResult<InnerSolver> {
    match v {
        "bcd" => Ok(InnerSolver::Bcd),
        "gradient" => Ok(InnerSolver::Gradient),
        _ => Err(format!("unknown solver `{v}` (expected bcd or gradient)")),
    }
}

impl ScenarioConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Reads `path` (if given), then applies `overrides` of the form `key=value`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config {
                line: 0,
                field: p.display().to_string(),
                message: format!("cannot read config file: {e}"),
            })?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config {
                    line,
                    field: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            self.set_at(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    /// Applies one `key=value` override (line 0 in error reports).
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(Error::Config {
                line: 0,
                field: assignment.to_string(),
                message: "override must look like key=value".into(),
            });
        };
        self.set_at(key.trim(), value.trim(), 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        self.set(key, value).map_err(|message| Error::Config {
            line,
            field: key.to_string(),
            message,
        })?;
        self.lines.insert(key.to_string(), line);
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> FieldResult<()> {
        let g = &mut self.geometry;
        let o = &mut self.optimizer;
        let d = &mut self.dither;
        let e = &mut self.experiment;
        match key {
            "geometry.num_rrh" => g.num_rrh = int(v)?,
            "geometry.antennas" => g.antennas = int(v)?,
            "geometry.num_ue" => g.num_ue = int(v)?,
            "geometry.layout" => {
                let spacing = match &g.layout {
                    Layout::SquareGrid { spacing_m } | Layout::Line { spacing_m } => *spacing_m,
                    Layout::Explicit { .. } => 100.0,
                };
                g.layout = match v {
                    "square_grid" => Layout::SquareGrid { spacing_m: spacing },
                    "line" => Layout::Line { spacing_m: spacing },
                    "explicit" => match &g.layout {
                        Layout::Explicit { .. } => g.layout.clone(),
                        _ => Layout::Explicit {
                            rrh_positions: Vec::new(),
                            ue_positions: Vec::new(),
                        },
                    },
                    _ => return Err(format!("unknown layout `{v}` (square_grid, line, explicit)")),
                };
            }
            "geometry.spacing_m" => match &mut g.layout {
                Layout::SquareGrid { spacing_m } | Layout::Line { spacing_m } => *spacing_m = num(v)?,
                Layout::Explicit { .. } => return Err("spacing is unused by the explicit layout".into()),
            },
            "geometry.d_ref_m" => g.d_ref_m = num(v)?,
            "geometry.b_cluster_m" => g.b_cluster_m = num(v)?,
            "geometry.rrh_height_m" => g.rrh_height_m = num(v)?,
            "geometry.ue_height_m" => g.ue_height_m = num(v)?,
            "geometry.rrh_positions" | "geometry.ue_positions" => {
                let p = positions(v)?;
                let Layout::Explicit {
                    rrh_positions,
                    ue_positions,
                } = &mut g.layout
                else {
                    return Err("positions need `geometry.layout = explicit` first".into());
                };
                if key == "geometry.rrh_positions" {
                    *rrh_positions = p;
                } else {
                    *ue_positions = p;
                }
            }
            "noise.sigma_min_dbm" => self.sigma_min_dbm = num(v)?,
            "csi.mode" => {
                self.csi = match v {
                    "perfect" => CsiMode::Perfect,
                    "synthetic_error" => match self.csi {
                        CsiMode::SyntheticError { .. } => self.csi,
                        CsiMode::Perfect => CsiMode::SyntheticError { epsilon: 0.0 },
                    },
                    _ => return Err(format!("unknown CSI mode `{v}` (perfect, synthetic_error)")),
                }
            }
            "csi.epsilon" => match &mut self.csi {
                CsiMode::SyntheticError { epsilon } => *epsilon = num(v)?,
                CsiMode::Perfect => return Err("epsilon needs `csi.mode = synthetic_error` first".into()),
            },
            "csi.pilot_length" => self.pilot_length = int(v)?,
            "optimizer.alpha" => o.alpha = num(v)?,
            "optimizer.beta" => o.beta = num(v)?,
            "optimizer.zeta_rho" => o.zeta_rho = num(v)?,
            "optimizer.nu" => o.nu = num(v)?,
            "optimizer.nu_damping" => o.nu_damping = num(v)?,
            "optimizer.max_iters" => o.max_iters = int(v)?,
            "optimizer.sindr_tol" => o.sindr_tol = num(v)?,
            "optimizer.rho_init_dbm" => o.rho_init_dbm = num(v)?,
            "optimizer.gradient_init_low_dbm" => o.gradient_init_dbm[0] = num(v)?,
            "optimizer.gradient_init_high_dbm" => o.gradient_init_dbm[1] = num(v)?,
            "optimizer.seed" => o.seed = int(v)?,
            "optimizer.rho_ceiling_dbm" => o.rho_ceiling_dbm = num(v)?,
            "dither.eps_sigma_frac" => d.eps_sigma_frac = num(v)?,
            "dither.eps_rho_db" => d.eps_rho_db = num(v)?,
            "dither.eps_gamma_db" => d.eps_gamma_db = num(v)?,
            "dither.zeta_sigma" => d.zeta_sigma = num(v)?,
            "dither.kappa" => d.kappa = num(v)?,
            "dither.nu_eta" => d.nu_eta = num(v)?,
            "dither.fine_tune_iters" => d.fine_tune_iters = int(v)?,
            "dither.backtracks" => d.backtracks = int(v)?,
            "dither.rho_max_dbm" => d.rho_max = opt_num(v)?.map(dbm_to_watts),
            "dither.inner" => d.inner = parse_solver(v)?,
            "experiment.sweep" => {
                e.sweep = match v {
                    "auto" => None,
                    _ => Some(SweepVariable::parse(v).ok_or_else(|| {
                        format!("unknown sweep variable `{v}` (auto, rho_dbm, target_db, rho_ue_dbm, d_ref_m)")
                    })?),
                }
            }
            "experiment.start" => e.start = opt_num(v)?,
            "experiment.stop" => e.stop = opt_num(v)?,
            "experiment.step" => e.step = opt_num(v)?,
            "experiment.seeds" => e.seeds = list(v).map(int).collect::<FieldResult<_>>()?,
            "experiment.receivers" => e.receivers = list(v).map(str::parse).collect::<FieldResult<_>>()?,
            "experiment.dithering" => e.dithering = list(v).map(on_off).collect::<FieldResult<_>>()?,
            "experiment.methods" => e.methods = list(v).map(parse_solver).collect::<FieldResult<_>>()?,
            "experiment.rho_dbm" => e.rho_dbm = num(v)?,
            "experiment.target_db" => e.target_db = num(v)?,
            "experiment.rho_ue_dbm" => e.rho_ue_dbm = num(v)?,
            "experiment.n_symbols" => e.n_symbols = int(v)?,
            "experiment.symbol_seed" => e.symbol_seed = int(v)?,
            "experiment.gain_estimate" => {
                e.gain_estimate = match v {
                    "analytic" => GainEstimate::Analytic,
                    "empirical_fit" => GainEstimate::EmpiricalFit,
                    _ => return Err(format!("unknown gain estimate `{v}` (analytic, empirical_fit)")),
                }
            }
            "output.dir" => self.output_dir = PathBuf::from(v),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Current value of `key` in config syntax.
    pub fn get(&self, key: &str) -> Option<String> {
        let g = &self.geometry;
        let o = &self.optimizer;
        let d = &self.dither;
        let e = &self.experiment;
        let explicit = match &g.layout {
            Layout::Explicit {
                rrh_positions,
                ue_positions,
            } => Some((rrh_positions, ue_positions)),
            _ => None,
        };
        let join = |it: Vec<String>| it.join(", ");
        Some(match key {
            "geometry.num_rrh" => g.num_rrh.to_string(),
            "geometry.antennas" => g.antennas.to_string(),
            "geometry.num_ue" => g.num_ue.to_string(),
            "geometry.layout" => match g.layout {
                Layout::SquareGrid { .. } => "square_grid".into(),
                Layout::Line { .. } => "line".into(),
                Layout::Explicit { .. } => "explicit".into(),
            },
            "geometry.spacing_m" => match g.layout {
                Layout::SquareGrid { spacing_m } | Layout::Line { spacing_m } => {
                    spacing_m.to_string()
                }
                Layout::Explicit { .. } => return None,
            },
            "geometry.d_ref_m" => g.d_ref_m.to_string(),
            "geometry.b_cluster_m" => g.b_cluster_m.to_string(),
            "geometry.rrh_height_m" => g.rrh_height_m.to_string(),
            "geometry.ue_height_m" => g.ue_height_m.to_string(),
            "geometry.rrh_positions" => fmt_positions(explicit?.0),
            "geometry.ue_positions" => fmt_positions(explicit?.1),
            "noise.sigma_min_dbm" => self.sigma_min_dbm.to_string(),
            "csi.mode" => match self.csi {
                CsiMode::Perfect => "perfect".into(),
                CsiMode::SyntheticError { .. } => "synthetic_error".into(),
            },
            "csi.epsilon" => match self.csi {
                CsiMode::SyntheticError { epsilon } => epsilon.to_string(),
                CsiMode::Perfect => return None,
            },
            "csi.pilot_length" => self.pilot_length.to_string(),
            "optimizer.alpha" => o.alpha.to_string(),
            "optimizer.beta" => o.beta.to_string(),
            "optimizer.zeta_rho" => o.zeta_rho.to_string(),
            "optimizer.nu" => o.nu.to_string(),
            "optimizer.nu_damping" => o.nu_damping.to_string(),
            "optimizer.max_iters" => o.max_iters.to_string(),
            "optimizer.sindr_tol" => o.sindr_tol.to_string(),
            "optimizer.rho_init_dbm" => o.rho_init_dbm.to_string(),
            "optimizer.gradient_init_low_dbm" => o.gradient_init_dbm[0].to_string(),
            "optimizer.gradient_init_high_dbm" => o.gradient_init_dbm[1].to_string(),
            "optimizer.seed" => o.seed.to_string(),
            "optimizer.rho_ceiling_dbm" => o.rho_ceiling_dbm.to_string(),
            "dither.eps_sigma_frac" => d.eps_sigma_frac.to_string(),
            "dither.eps_rho_db" => d.eps_rho_db.to_string(),
            "dither.eps_gamma_db" => d.eps_gamma_db.to_string(),
            "dither.zeta_sigma" => d.zeta_sigma.to_string(),
            "dither.kappa" => d.kappa.to_string(),
            "dither.nu_eta" => d.nu_eta.to_string(),
            "dither.fine_tune_iters" => d.fine_tune_iters.to_string(),
            "dither.backtracks" => d.backtracks.to_string(),
            "dither.rho_max_dbm" => fmt_opt(d.rho_max.map(watts_to_dbm)),
            "dither.inner" => solver_name(d.inner).into(),
            "experiment.sweep" => e.sweep.map_or("auto", SweepVariable::name).into(),
            "experiment.start" => fmt_opt(e.start),
            "experiment.stop" => fmt_opt(e.stop),
            "experiment.step" => fmt_opt(e.step),
            "experiment.seeds" => join(e.seeds.iter().map(u64::to_string).collect()),
            "experiment.receivers" => {
                join(e.receivers.iter().map(|r| r.name().to_string()).collect())
            }
            "experiment.dithering" => join(
                e.dithering
                    .iter()
                    .map(|on| if *on { "on" } else { "off" }.to_string())
                    .collect(),
            ),
            "experiment.methods" => join(
                e.methods
                    .iter()
                    .map(|m| solver_name(*m).to_string())
                    .collect(),
            ),
            "experiment.rho_dbm" => e.rho_dbm.to_string(),
            "experiment.target_db" => e.target_db.to_string(),
            "experiment.rho_ue_dbm" => e.rho_ue_dbm.to_string(),
            "experiment.n_symbols" => e.n_symbols.to_string(),
            "experiment.symbol_seed" => e.symbol_seed.to_string(),
            "experiment.gain_estimate" => match e.gain_estimate {
                GainEstimate::Analytic => "analytic".into(),
                GainEstimate::EmpiricalFit => "empirical_fit".into(),
            },
            "output.dir" => self.output_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Canonical text of the configuration (without `output.dir`). Parsing
    /// it gives back an equal configuration; the run manifest hashes it.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = self.get(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }

    fn field_error(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.lines.get(field).copied().unwrap_or(0),
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn sigma_min(&self) -> f64 {
        dbm_to_watts(self.sigma_min_dbm).sqrt()
    }

    pub fn sweep_variable(&self, kind: ExperimentKind) -> SweepVariable {
        self.experiment
            .sweep
            .unwrap_or_else(|| kind.natural_sweep())
    }

    /// Sweep grid `start, start + step, ...` up to and including `stop`.
    pub fn sweep_points(&self, kind: ExperimentKind) -> Vec<f64> {
        let (start, stop, step) = self.range(kind);
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| start + i as f64 * step).collect()
    }

    fn range(&self, kind: ExperimentKind) -> (f64, f64, f64) {
        let e = &self.experiment;
        let (s0, s1, s2) = if self.sweep_variable(kind) == SweepVariable::DRefM {
            (0.0, 40.0, 10.0)
        } else {
            kind.default_range()
        };
        (
            e.start.unwrap_or(s0),
            e.stop.unwrap_or(s1),
            e.step.unwrap_or(s2),
        )
    }

    /// Checks the configuration for running `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let g = &self.geometry;
        for (field, v) in [
            ("geometry.num_rrh", g.num_rrh),
            ("geometry.antennas", g.antennas),
            ("geometry.num_ue", g.num_ue),
        ] {
            if v == 0 {
                return Err(self.field_error(field, "must be at least 1"));
            }
        }
        if let Layout::SquareGrid { spacing_m } | Layout::Line { spacing_m } = g.layout {
            if !(spacing_m > 0.0) || !spacing_m.is_finite() {
                return Err(self.field_error("geometry.spacing_m", "must be positive"));
            }
        }
        for (field, v) in [
            ("geometry.d_ref_m", g.d_ref_m),
            ("geometry.b_cluster_m", g.b_cluster_m),
            ("geometry.rrh_height_m", g.rrh_height_m),
            ("geometry.ue_height_m", g.ue_height_m),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(self.field_error(field, "must be finite and non-negative"));
            }
        }
        if let Layout::Explicit {
            rrh_positions,
            ue_positions,
        } = &g.layout
        {
            if rrh_positions.len() != g.num_rrh {
                return Err(self.field_error(
                    "geometry.rrh_positions",
                    format!(
                        "lists {} RRHs, geometry.num_rrh is {}",
                        rrh_positions.len(),
                        g.num_rrh
                    ),
                ));
            }
            if ue_positions.len() != g.num_ue {
                return Err(self.field_error(
                    "geometry.ue_positions",
                    format!(
                        "lists {} UEs, geometry.num_ue is {}",
                        ue_positions.len(),
                        g.num_ue
                    ),
                ));
            }
        }
        if !self.sigma_min_dbm.is_finite() {
            return Err(self.field_error("noise.sigma_min_dbm", "must be finite"));
        }
        if let CsiMode::SyntheticError { epsilon } = self.csi {
            if !(0.0..1.0).contains(&epsilon) {
                return Err(self.field_error("csi.epsilon", "must lie in [0, 1)"));
            }
        }
        self.optimizer
            .validate()
            .map_err(|e| self.field_error("optimizer", e.to_string()))?;
        self.dither
            .validate()
            .map_err(|e| self.field_error("dither", e.to_string()))?;

        let e = &self.experiment;
        let sweep = self.sweep_variable(kind);
        if !sweep.allowed_for(kind) {
            return Err(self.field_error(
                "experiment.sweep",
                format!("{} cannot sweep {}", kind.name(), sweep.name()),
            ));
        }
        let (start, stop, step) = self.range(kind);
        if !(step > 0.0) || !step.is_finite() {
            return Err(self.field_error("experiment.step", "must be positive"));
        }
        if !start.is_finite() || !stop.is_finite() || start > stop {
            return Err(self.field_error("experiment.stop", "sweep range is empty"));
        }
        if sweep == SweepVariable::DRefM && start < 0.0 {
            return Err(self.field_error("experiment.start", "distances must be non-negative"));
        }
        for (field, empty) in [
            ("experiment.seeds", e.seeds.is_empty()),
            ("experiment.receivers", e.receivers.is_empty()),
            ("experiment.dithering", e.dithering.is_empty()),
            ("experiment.methods", e.methods.is_empty()),
        ] {
            if empty {
                return Err(self.field_error(field, "needs at least one entry"));
            }
        }
        if kind == ExperimentKind::Ser && e.n_symbols == 0 {
            return Err(self.field_error("experiment.n_symbols", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_render() {
        let cfg = ScenarioConfig::default();
        let back = ScenarioConfig::parse(&cfg.render()).unwrap();
        assert_eq!(back.render(), cfg.render());
        assert_eq!(back.geometry, cfg.geometry);
        assert_eq!(back.optimizer, cfg.optimizer);
        assert_eq!(back.dither, cfg.dither);
        assert_eq!(back.experiment, cfg.experiment);
    }

    #[test]
    fn every_key_is_rendered_or_conditional() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_text("geometry.layout = explicit\ncsi.mode = synthetic_error")
            .unwrap();
        let text = cfg.render();
        for key in KEYS.iter().filter(|k| **k != "geometry.spacing_m") {
            assert!(text.contains(&format!("{key} =")), "{key}");
        }
    }

    #[test]
    fn parses_sections_lists_and_comments() {
        let cfg = ScenarioConfig::parse(
            "# desk scale\n\
             geometry.antennas = 64   # more antennas\n\
             geometry.layout = line\n\
             geometry.spacing_m = 50\n\
             csi.mode = synthetic_error\n\
             csi.epsilon = 0.1\n\
             dither.rho_max_dbm = 30\n\
             experiment.seeds = 3, 4,5\n\
             experiment.receivers = bmmse\n\
             experiment.dithering = on\n\
             experiment.methods = bcd, gradient\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry.antennas, 64);
        assert_eq!(cfg.geometry.layout, Layout::Line { spacing_m: 50.0 });
        assert_eq!(cfg.csi, CsiMode::SyntheticError { epsilon: 0.1 });
        assert!((cfg.dither.rho_max.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cfg.experiment.seeds, vec![3, 4, 5]);
        assert_eq!(cfg.experiment.receivers, vec![ReceiverKind::Bmmse]);
        assert_eq!(cfg.experiment.dithering, vec![true]);
        assert_eq!(
            cfg.experiment.methods,
            vec![InnerSolver::Bcd, InnerSolver::Gradient]
        );
    }

    #[test]
    fn explicit_positions() {
        let cfg = ScenarioConfig::parse(
            "geometry.num_rrh = 2\ngeometry.num_ue = 1\ngeometry.layout = explicit\n\
             geometry.rrh_positions = 0,0,5; 100,0,5\ngeometry.ue_positions = 10, 0\n",
        )
        .unwrap();
        cfg.validate(ExperimentKind::SndrSweep).unwrap();
        let back = ScenarioConfig::parse(&cfg.render()).unwrap();
        assert_eq!(back.geometry, cfg.geometry);
        match &cfg.geometry.layout {
            Layout::Explicit {
                rrh_positions,
                ue_positions,
            } => {
                assert_eq!(rrh_positions[1], [100.0, 0.0, 5.0]);
                assert_eq!(ue_positions[0], [10.0, 0.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    fn config_error(r: Result<ScenarioConfig>) -> (usize, String) {
        match r {
            Err(Error::Config { line, field, .. }) => (line, field),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_and_field() {
        let text = "geometry.antennas = 8\n\nnoise.sigma_min_dbm = loud\n";
        assert_eq!(
            config_error(ScenarioConfig::parse(text)),
            (3, "noise.sigma_min_dbm".into())
        );
        let text = "geometry.antennas = 8\ngeometry.colour = red\n";
        assert_eq!(
            config_error(ScenarioConfig::parse(text)),
            (2, "geometry.colour".into())
        );
        assert_eq!(config_error(ScenarioConfig::parse("just words")).0, 1);
    }

    #[test]
    fn validation_points_at_the_offending_line() {
        let cfg = ScenarioConfig::parse("experiment.start = 10\nexperiment.stop = 0\n").unwrap();
        match cfg.validate(ExperimentKind::MaxMin) {
            Err(Error::Config { line, field, .. }) => {
                assert_eq!((line, field.as_str()), (2, "experiment.stop"));
            }
            other => panic!("{other:?}"),
        }
        let cfg = ScenarioConfig::parse("geometry.num_ue = 0\n").unwrap();
        assert!(cfg.validate(ExperimentKind::MaxMin).is_err());
        let cfg = ScenarioConfig::parse("experiment.sweep = target_db\n").unwrap();
        assert!(cfg.validate(ExperimentKind::MaxMin).is_err());
        assert!(cfg.validate(ExperimentKind::MinPower).is_ok());
    }

    #[test]
    fn overrides_win_over_the_file() {
        let dir = std::env::temp_dir().join(format!("onebit-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scenario.cfg");
        std::fs::write(&path, "geometry.antennas = 8\nexperiment.rho_ue_dbm = 10\n").unwrap();
        let cfg = ScenarioConfig::load(Some(&path), &["geometry.antennas=16".into()]).unwrap();
        assert_eq!(cfg.geometry.antennas, 16);
        assert_eq!(cfg.experiment.rho_ue_dbm, 10.0);
        assert!(ScenarioConfig::load(Some(&path), &["antennas".into()]).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_grids() {
        let cfg = ScenarioConfig::default();
        let p = cfg.sweep_points(ExperimentKind::SndrSweep);
        assert_eq!(p.len(), 71);
        assert_eq!((p[0], p[70]), (-30.0, 40.0));
        assert_eq!(
            cfg.sweep_points(ExperimentKind::MaxMin),
            vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0]
        );
        let cfg = ScenarioConfig::parse(
            "experiment.start = 0\nexperiment.stop = 1\nexperiment.step = 0.1",
        )
        .unwrap();
        assert_eq!(cfg.sweep_points(ExperimentKind::SndrSweep).len(), 11);
    }
}
