//! Sweep orchestration: one CSV per receiver × dithering mode (× power
//! solver for min-power), a manifest with the config hash, and a checker
//! that re-derives every logged SINDR from the logged powers and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentKind, ScenarioConfig, SweepVariable};
use crate::dither::{
    equalizing_dither, optimize_dithering, without_dithering, DitherConfig, DitherProblem,
    InnerSolver, ObjectiveKind,
};
use crate::error::{Error, Result};
use crate::geometry::{
    apply_csi_model, build_geometry, draw_channels, ChannelState, SystemGeometry,
};
use crate::linksim::{detect_qam16, simulate_symbols, Constellation, SerResult};
use crate::power::{minpower_bcd, minpower_gradient, PowerProblem};
use crate::quantized::{PowerDitherPoint, Quantizer};
use crate::receivers::{evaluate, ReceiverKind};
use crate::units::{
    db_to_linear, dbm_to_sigma, dbm_to_watts, linear_to_db, sigma_to_dbm, watts_to_dbm,
};

pub const MANIFEST: &str = "manifest.txt";
pub const CONFIG_FILE: &str = "config.txt";

/// One output series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Series {
    pub receiver: ReceiverKind,
    pub dithering: bool,
    /// Power solver; only the min-power experiment distinguishes it.
    pub method: Option<InnerSolver>,
}

impl Series {
    pub fn file_name(&self, kind: ExperimentKind) -> String {
        let mut name = format!(
            "{}_{}_{}",
            kind.name().replace('-', "_"),
            self.receiver,
            if self.dithering { "dither" } else { "nodither" }
        );
        if let Some(m) = self.method {
            name.push('_');
            name.push_str(method_name(m));
        }
        name + ".csv"
    }
}

fn method_name(m: InnerSolver) -> &'static str {
    match m {
        InnerSolver::Bcd => "bcd",
        InnerSolver::Gradient => "gradient",
    }
}

/// Series run for `kind`, in output order.
pub fn series(kind: ExperimentKind, cfg: &ScenarioConfig) -> Vec<Series> {
    let e = &cfg.experiment;
    let methods: Vec<Option<InnerSolver>> = match kind {
        ExperimentKind::MinPower => e.methods.iter().map(|m| Some(*m)).collect(),
        _ => vec![None],
    };
    let mut out = Vec::new();
    for &receiver in &e.receivers {
        for &dithering in &e.dithering {
            for &method in &methods {
                out.push(Series {
                    receiver,
                    dithering,
                    method,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    /// Min-power targets not met; the best attempt is still logged.
    Infeasible,
    /// The point could not be solved at all.
    Failed(String),
}

impl RowStatus {
    fn label(&self) -> String {
        match self {
            RowStatus::Ok => "ok".into(),
            RowStatus::Infeasible => "infeasible".into(),
            RowStatus::Failed(msg) => format!("error: {msg}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub seed: u64,
    pub x: f64,
    pub status: RowStatus,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sindr: Vec<f64>,
    /// Min SINDR in dB, sum power in dBm or worst-UE SER, by experiment.
    pub objective: f64,
    pub ser: Option<SerResult>,
}

impl Row {
    fn failed(seed: u64, x: f64, err: &Error) -> Self {
        Row {
            seed,
            x,
            status: RowStatus::Failed(err.to_string()),
            rho: Vec::new(),
            sigma: Vec::new(),
            sindr: Vec::new(),
            objective: f64::NAN,
            ser: None,
        }
    }
}

fn objective_column(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SndrSweep | ExperimentKind::MaxMin => "min_sindr_db",
        ExperimentKind::MinPower => "sum_power_dbm",
        ExperimentKind::Ser => "max_ser",
    }
}

/// A file produced by a run.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub kind: ExperimentKind,
    /// Canonical configuration text, written next to the CSVs.
    pub config_text: String,
    pub artifacts: Vec<Artifact>,
    pub manifest: String,
    /// Rows marked infeasible or failed.
    pub flagged: usize,
}

impl RunOutput {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        std::fs::write(dir.join(CONFIG_FILE), &self.config_text)?;
        std::fs::write(dir.join(MANIFEST), &self.manifest)?;
        Ok(())
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Geometry and channels of one sweep point. The small-scale fading depends
/// only on the seed, so moving the UE cluster rescales the same draw.
pub fn scenario_at(
    cfg: &ScenarioConfig,
    sweep: SweepVariable,
    x: f64,
    seed: u64,
) -> Result<(SystemGeometry, ChannelState)> {
    let mut g = cfg.geometry.clone();
    if sweep == SweepVariable::DRefM {
        g.d_ref_m = x;
    }
    let geometry = build_geometry(&g)?;
    let truth = draw_channels(&geometry, seed)?;
    let channels = apply_csi_model(&truth, &geometry, cfg.csi, seed)?;
    Ok((geometry, channels))
}

/// Runs every series of `kind` over the configured sweep and seeds.
pub fn run_sweep(kind: ExperimentKind, cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate(kind)?;
    let sweep = cfg.sweep_variable(kind);
    let series = series(kind, cfg);
    let points: Vec<(u64, f64)> = cfg
        .experiment
        .seeds
        .iter()
        .flat_map(|&s| cfg.sweep_points(kind).into_iter().map(move |x| (s, x)))
        .collect();
    // Rows come back in sweep order whatever order the workers finish in.
    let per_point: Vec<Vec<Row>> = points
        .par_iter()
        .map(|&(seed, x)| solve_point(kind, cfg, sweep, &series, seed, x))
        .collect();

    let k = cfg.geometry.num_ue;
    let b = cfg.geometry.num_rrh;
    let mut artifacts = Vec::new();
    let mut flagged = 0;
    for (i, s) in series.iter().enumerate() {
        let rows: Vec<&Row> = per_point.iter().map(|r| &r[i]).collect();
        flagged += rows.iter().filter(|r| r.status != RowStatus::Ok).count();
        artifacts.push(Artifact {
            name: s.file_name(kind),
            contents: write_rows(kind, sweep, s, &rows, k, b)?,
        });
    }
    let config_text = cfg.render();
    let manifest = manifest(kind, &config_text, &artifacts, flagged);
    Ok(RunOutput {
        kind,
        config_text,
        artifacts,
        manifest,
        flagged,
    })
}

fn manifest(
    kind: ExperimentKind,
    config_text: &str,
    artifacts: &[Artifact],
    flagged: usize,
) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "crate = {}", env!("CARGO_PKG_NAME"));
    let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "experiment = {}", kind.name());
    let _ = writeln!(m, "config = {CONFIG_FILE}");
    let _ = writeln!(m, "config_sha256 = {}", sha256_hex(config_text.as_bytes()));
    let _ = writeln!(m, "rows_flagged = {flagged}");
    for a in artifacts {
        let _ = writeln!(m, "artifact = {} {}", a.name, sha256_hex(&a.contents));
    }
    m
}

fn solve_point(
    kind: ExperimentKind,
    cfg: &ScenarioConfig,
    sweep: SweepVariable,
    series: &[Series],
    seed: u64,
    x: f64,
) -> Vec<Row> {
    let (geometry, channels) = match scenario_at(cfg, sweep, x, seed) {
        Ok(s) => s,
        Err(e) => return series.iter().map(|_| Row::failed(seed, x, &e)).collect(),
    };
    series
        .iter()
        .map(|s| {
            solve_series(kind, cfg, sweep, s, &geometry, &channels, seed, x)
                .unwrap_or_else(|e| Row::failed(seed, x, &e))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn solve_series(
    kind: ExperimentKind,
    cfg: &ScenarioConfig,
    sweep: SweepVariable,
    s: &Series,
    geometry: &SystemGeometry,
    channels: &ChannelState,
    seed: u64,
    x: f64,
) -> Result<Row> {
    let e = &cfg.experiment;
    let sigma_min = cfg.sigma_min();
    let num_ue = channels.num_ue();
    let floor = vec![sigma_min; channels.num_rrh];
    let pick = |v: SweepVariable, fixed: f64| if sweep == v { x } else { fixed };
    let dither = DitherConfig {
        inner: s.method.unwrap_or(cfg.dither.inner),
        ..cfg.dither.clone()
    };
    let problem = DitherProblem::new(channels, geometry.gain_max.clone(), s.receiver, sigma_min);

    let row = |status, rho: Vec<f64>, sigma: Vec<f64>, sindr: Vec<f64>, objective| Row {
        seed,
        x,
        status,
        rho,
        sigma,
        sindr,
        objective,
        ser: None,
    };

    match kind {
        ExperimentKind::SndrSweep => {
            let rho = vec![dbm_to_watts(pick(SweepVariable::RhoDbm, e.rho_dbm)); num_ue];
            let sigma = if s.dithering {
                equalizing_dither(&geometry.gain_max, sigma_min)
            } else {
                floor
            };
            let point = PowerDitherPoint::new(rho.clone(), sigma.clone(), sigma_min)?;
            let ev = evaluate(channels, &point, s.receiver, Quantizer::OneBit)?;
            let obj = linear_to_db(ev.min_sindr());
            Ok(row(RowStatus::Ok, rho, sigma, ev.sindr, obj))
        }
        ExperimentKind::MinPower => {
            let target = db_to_linear(pick(SweepVariable::TargetDb, e.target_db));
            let problem = problem.with_targets(vec![target; num_ue]);
            let (rho, sigma, sindr, feasible) = if s.dithering {
                let sol =
                    optimize_dithering(ObjectiveKind::MinPower, &problem, &cfg.optimizer, &dither)?;
                let p = sol.best;
                (p.rho, p.sigma, p.sindr, p.feasible)
            } else {
                let pp: PowerProblem = problem.power_problem(floor.clone());
                let run = match dither.inner {
                    InnerSolver::Bcd => minpower_bcd(&pp, &cfg.optimizer)?,
                    InnerSolver::Gradient => minpower_gradient(&pp, &cfg.optimizer)?,
                };
                let feasible = pp.targets_met(&run.best.sindr, cfg.optimizer.sindr_tol);
                (run.best.rho, floor, run.best.sindr, feasible)
            };
            let status = if feasible {
                RowStatus::Ok
            } else {
                RowStatus::Infeasible
            };
            let obj = watts_to_dbm(rho.iter().sum());
            Ok(row(status, rho, sigma, sindr, obj))
        }
        ExperimentKind::MaxMin | ExperimentKind::Ser => {
            let cap = dbm_to_watts(pick(SweepVariable::RhoUeDbm, e.rho_ue_dbm));
            let problem = problem.with_cap(cap);
            let p = if s.dithering {
                optimize_dithering(ObjectiveKind::MaxMin, &problem, &cfg.optimizer, &dither)?.best
            } else {
                without_dithering(ObjectiveKind::MaxMin, &problem, &cfg.optimizer, &dither)?
            };
            if kind == ExperimentKind::MaxMin {
                let obj = linear_to_db(p.objective);
                return Ok(row(RowStatus::Ok, p.rho, p.sigma, p.sindr, obj));
            }
            // The SER is measured at the max-min operating point.
            let point = PowerDitherPoint::new(p.rho.clone(), p.sigma.clone(), sigma_min)?;
            let bank = evaluate(channels, &point, s.receiver, Quantizer::OneBit)?.receivers();
            let symbols = simulate_symbols(
                channels,
                &point,
                &bank,
                Quantizer::OneBit,
                e.n_symbols,
                Constellation::Qam16,
                e.symbol_seed,
            )?;
            let ser = detect_qam16(
                &symbols,
                channels,
                &point,
                &bank,
                Quantizer::OneBit,
                e.gain_estimate,
            )?;
            let mut r = row(RowStatus::Ok, p.rho, p.sigma, p.sindr, ser.max_ser);
            r.ser = Some(ser);
            Ok(r)
        }
    }
}

fn write_rows(
    kind: ExperimentKind,
    sweep: SweepVariable,
    s: &Series,
    rows: &[&Row],
    k: usize,
    b: usize,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "seed",
        sweep.name(),
        "receiver",
        "dithering",
        "method",
        "status",
    ]
    .map(String::from)
    .to_vec();
    header.push(objective_column(kind).into());
    header.extend((0..k).map(|i| format!("rho_dbm_{i}")));
    header.extend((0..b).map(|i| format!("sigma_dbm_{i}")));
    header.extend((0..k).map(|i| format!("sindr_{i}")));
    if kind == ExperimentKind::Ser {
        header.extend(["ser_half_width", "n_symbols"].map(String::from));
        header.extend((0..k).map(|i| format!("ser_{i}")));
    }
    w.write_record(&header)?;
    let fmt = |v: f64| {
        if v.is_nan() {
            String::new()
        } else {
            v.to_string()
        }
    };
    let pad = |vals: Vec<String>, n: usize| -> Vec<String> {
        if vals.is_empty() {
            vec![String::new(); n]
        } else {
            vals
        }
    };
    for r in rows {
        let mut rec = vec![
            r.seed.to_string(),
            r.x.to_string(),
            s.receiver.to_string(),
            if s.dithering { "on" } else { "off" }.to_string(),
            s.method.map_or("bcd", method_name).to_string(),
            r.status.label(),
            fmt(r.objective),
        ];
        rec.extend(pad(
            r.rho.iter().map(|x| watts_to_dbm(*x).to_string()).collect(),
            k,
        ));
        rec.extend(pad(
            r.sigma
                .iter()
                .map(|x| sigma_to_dbm(*x).to_string())
                .collect(),
            b,
        ));
        rec.extend(pad(r.sindr.iter().map(|x| x.to_string()).collect(), k));
        if kind == ExperimentKind::Ser {
            match &r.ser {
                Some(ser) => {
                    rec.push(ser.max_half_width.to_string());
                    rec.push(ser.n_symbols.to_string());
                    rec.extend(ser.per_ue.iter().map(|x| x.to_string()));
                }
                None => rec.extend(vec![String::new(); k + 2]),
            }
        }
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Outcome of re-deriving a finished run from its files.
#[derive(Clone, Debug, Default)]
pub struct Rederivation {
    pub rows_checked: usize,
    pub rows_skipped: usize,
    /// Largest relative difference between logged and recomputed SINDRs.
    pub max_rel_error: f64,
    /// Problems found: hash mismatches, missing files, large errors.
    pub problems: Vec<String>,
}

impl Rederivation {
    pub fn passed(&self, tol: f64) -> bool {
        self.problems.is_empty() && self.max_rel_error <= tol
    }
}

/// Re-evaluates the closed-form SINDR of every logged row of the run in
/// `dir` from its powers, dithering levels and seed, and checks the
/// manifest hashes.
pub fn rederive(dir: &Path) -> Result<Rederivation> {
    let manifest = std::fs::read_to_string(dir.join(MANIFEST))?;
    let mut fields = BTreeMap::new();
    let mut artifacts = Vec::new();
    for line in manifest.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            if k == "artifact" {
                if let Some((name, hash)) = v.split_once(' ') {
                    artifacts.push((name.to_string(), hash.to_string()));
                }
            } else {
                fields.insert(k.to_string(), v.to_string());
            }
        }
    }
    let mut report = Rederivation::default();
    let config_text = std::fs::read_to_string(dir.join(CONFIG_FILE))?;
    if fields.get("config_sha256") != Some(&sha256_hex(config_text.as_bytes())) {
        report
            .problems
            .push("config hash does not match the manifest".into());
    }
    let kind = fields
        .get("experiment")
        .and_then(|k| ExperimentKind::parse(k))
        .ok_or_else(|| Error::domain("manifest names no known experiment"))?;
    let cfg = ScenarioConfig::parse(&config_text)?;
    let sweep = cfg.sweep_variable(kind);
    let sigma_min = cfg.sigma_min();

    for (name, hash) in artifacts {
        let bytes = std::fs::read(dir.join(&name))?;
        if sha256_hex(&bytes) != hash {
            report
                .problems
                .push(format!("{name}: hash does not match the manifest"));
        }
        let mut rd = csv::Reader::from_reader(bytes.as_slice());
        let header = rd.headers()?.clone();
        let col = |prefix: &str| -> Vec<usize> {
            header
                .iter()
                .enumerate()
                .filter(|(_, h)| {
                    h.strip_prefix(prefix)
                        .is_some_and(|n| n.parse::<usize>().is_ok())
                })
                .map(|(i, _)| i)
                .collect()
        };
        let (rho_c, sigma_c, sindr_c) = (col("rho_dbm_"), col("sigma_dbm_"), col("sindr_"));
        for rec in rd.records() {
            let rec = rec?;
            if rec[5].starts_with("error") {
                report.rows_skipped += 1;
                continue;
            }
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::domain(format!("{name}: bad number `{}`", &rec[i])))
            };
            let seed: u64 = rec[0]
                .parse()
                .map_err(|_| Error::domain(format!("{name}: bad seed `{}`", &rec[0])))?;
            let x = parse(1)?;
            let receiver: ReceiverKind = rec[2].parse().map_err(Error::Domain)?;
            let rho = rho_c
                .iter()
                .map(|&i| parse(i).map(dbm_to_watts))
                .collect::<Result<Vec<_>>>()?;
            // dBm round trips can land a hair under the floor.
            let sigma = sigma_c
                .iter()
                .map(|&i| parse(i).map(|d| dbm_to_sigma(d).max(sigma_min)))
                .collect::<Result<Vec<_>>>()?;
            let logged = sindr_c
                .iter()
                .map(|&i| parse(i))
                .collect::<Result<Vec<_>>>()?;
            let (_, channels) = scenario_at(&cfg, sweep, x, seed)?;
            let point = PowerDitherPoint::new(rho, sigma, sigma_min)?;
            let fresh = evaluate(&channels, &point, receiver, Quantizer::OneBit)?.sindr;
            for (a, b) in fresh.iter().zip(&logged) {
                let rel = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
                report.max_rel_error = report.max_rel_error.max(rel);
            }
            report.rows_checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind_lines: &str) -> ScenarioConfig {
        ScenarioConfig::parse(&format!(
            "geometry.num_rrh = 2\ngeometry.antennas = 4\ngeometry.num_ue = 2\n\
             geometry.layout = line\n{kind_lines}"
        ))
        .unwrap()
    }

    fn text(out: &RunOutput, name: &str) -> String {
        String::from_utf8(out.artifact(name).unwrap().contents.clone()).unwrap()
    }

    #[test]
    fn one_file_per_series_and_one_row_per_point() {
        let cfg = small("experiment.start = -20\nexperiment.stop = 10\nexperiment.step = 10\nexperiment.seeds = 1, 2\n");
        let out = run_sweep(ExperimentKind::SndrSweep, &cfg).unwrap();
        assert_eq!(out.artifacts.len(), 4);
        let t = text(&out, "sndr_sweep_bmmse_dither.csv");
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 4);
        assert!(lines[0]
            .starts_with("seed,rho_dbm,receiver,dithering,method,status,min_sindr_db,rho_dbm_0"));
        assert!(lines[1].starts_with("1,-20,bmmse,on,bcd,ok,"));
        assert!(lines[5].starts_with("2,-20,"));
        assert_eq!(out.flagged, 0);
    }

    #[test]
    fn min_power_series_split_by_method_and_flag_infeasible_rows() {
        let cfg = small(
            "experiment.receivers = bmmse\nexperiment.dithering = off\nexperiment.methods = bcd, gradient\n\
             experiment.start = 0\nexperiment.stop = 60\nexperiment.step = 60\n",
        );
        let out = run_sweep(ExperimentKind::MinPower, &cfg).unwrap();
        let names: Vec<&str> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "minpower_bmmse_nodither_bcd.csv",
                "minpower_bmmse_nodither_gradient.csv"
            ]
        );
        let t = text(&out, "minpower_bmmse_nodither_bcd.csv");
        let rows: Vec<&str> = t.lines().skip(1).collect();
        assert!(rows[0].contains(",ok,"), "{}", rows[0]);
        // 60 dB is far beyond what 8 one-bit antennas deliver.
        assert!(rows[1].contains(",infeasible,"), "{}", rows[1]);
        assert!(out.flagged >= 2);
    }

    #[test]
    fn manifest_hashes_config_and_files() {
        let cfg = small("experiment.start = 0\nexperiment.stop = 0\n");
        let out = run_sweep(ExperimentKind::SndrSweep, &cfg).unwrap();
        assert!(out.manifest.contains(&format!(
            "config_sha256 = {}",
            sha256_hex(out.config_text.as_bytes())
        )));
        assert!(out
            .manifest
            .contains(&format!("version = {}", env!("CARGO_PKG_VERSION"))));
        for a in &out.artifacts {
            assert!(out.manifest.contains(&format!(
                "artifact = {} {}",
                a.name,
                sha256_hex(&a.contents)
            )));
        }
    }

    #[test]
    fn logged_rows_rederive_and_tampering_is_caught() {
        let cfg = small(
            "experiment.sweep = d_ref_m\nexperiment.start = 0\nexperiment.stop = 20\nexperiment.step = 20\n\
             csi.mode = synthetic_error\ncsi.epsilon = 0.1\n",
        );
        let out = run_sweep(ExperimentKind::MaxMin, &cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("onebit-rederive-{}", std::process::id()));
        out.write_to(&dir).unwrap();
        let r = rederive(&dir).unwrap();
        assert_eq!(r.rows_checked, 8);
        assert!(r.passed(1e-8), "{r:?}");

        let name = "maxmin_bmrc_dither.csv";
        let t = std::fs::read_to_string(dir.join(name)).unwrap();
        let mut lines: Vec<String> = t.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
        let last = cells.len() - 1;
        let v: f64 = cells[last].parse().unwrap();
        cells[last] = (v * 1.001).to_string();
        lines[1] = cells.join(",");
        std::fs::write(dir.join(name), lines.join("\n") + "\n").unwrap();
        let r = rederive(&dir).unwrap();
        assert!(!r.passed(1e-8));
        assert!(r.max_rel_error > 1e-4);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg =
            small("experiment.start = 10\nexperiment.stop = 20\nexperiment.n_symbols = 3000\n");
        let a = run_sweep(ExperimentKind::Ser, &cfg).unwrap();
        let b = run_sweep(ExperimentKind::Ser, &cfg).unwrap();
        assert_eq!(a.manifest, b.manifest);
        for (x, y) in a.artifacts.iter().zip(&b.artifacts) {
            assert_eq!(x.contents, y.contents, "{}", x.name);
        }
        assert!(text(&a, "ser_bmrc_nodither.csv").lines().next().unwrap().ends_with("max_ser,rho_dbm_0,rho_dbm_1,sigma_dbm_0,sigma_dbm_1,sindr_0,sindr_1,ser_half_width,n_symbols,ser_0,ser_1"));
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let cfg = small("experiment.step = -1\n");
        assert!(matches!(
            run_sweep(ExperimentKind::MaxMin, &cfg),
            Err(Error::Config { .. })
        ));
    }
}
