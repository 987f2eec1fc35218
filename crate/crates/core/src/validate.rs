//! Self-check suites run by `onebit-dmimo validate`.
//!
//! Each suite compares the implementation against an independent oracle:
//! central finite differences, Monte Carlo quantization, exact invariances,
//! or a brute-force power grid.

use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::Result;
use crate::geometry::{build_geometry, draw_channels, ChannelState, GeometryConfig, Layout};
use crate::gradients::{
    fd_step, lagrangian_at, lagrangian_grad_rho, lagrangian_grad_sigma, relative_error,
    AnalyticDerivatives, DerivativeBundle, DerivativeProvider, DualState, Objective,
};
use crate::instances::{random_covariance, random_instance};
use crate::linalg::{CMat, C64};
use crate::linksim::{max_entry_deviation, quantizer_moments};
use crate::power::{
    maxmin_bcd, minpower_bcd, power_gap_db, OptimizerConfig, PowerProblem, Termination,
};
use crate::quantized::{
    arcsine_covariance, bussgang_gain, qd_covariance, PowerDitherPoint, QuantizedModel, Quantizer,
};
use crate::receivers::{evaluate, sindr_at, ReceiverKind};
use crate::rng;
use crate::units::dbm_to_watts;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    CrOracle,
    ScaleInvariance,
    ReceiverOrder,
    BcdDetectors,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Gradients,
        Suite::CrOracle,
        Suite::ScaleInvariance,
        Suite::ReceiverOrder,
        Suite::BcdDetectors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradients => "gradients",
            Suite::CrOracle => "cr-oracle",
            Suite::ScaleInvariance => "scale-invariance",
            Suite::ReceiverOrder => "receiver-order",
            Suite::BcdDetectors => "bcd-detectors",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

/// Tolerances and sizes of the suites.
#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub gradient_instances: usize,
    pub gradient_tol: f64,
    pub cr_matrices: usize,
    pub cr_samples: usize,
    pub cr_tol: f64,
    pub invariance_tol: f64,
    pub order_instances: usize,
    pub order_slack: f64,
    pub detector_runs: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            gradient_instances: 20,
            gradient_tol: 1e-4,
            cr_matrices: 20,
            cr_samples: 1_000_000,
            cr_tol: 5e-3,
            invariance_tol: 1e-10,
            order_instances: 100,
            order_slack: 1e-9,
            detector_runs: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: usize,
    pub failures: Vec<String>,
    /// Worst value of the suite's error metric.
    pub worst: f64,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn new(suite: Suite) -> Self {
        Self {
            suite,
            checks: 0,
            failures: Vec::new(),
            worst: 0.0,
            elapsed: Duration::ZERO,
        }
    }

    /// Records one comparison of `value` against `tol`.
    fn check(&mut self, what: impl FnOnce() -> String, value: f64, tol: f64) {
        self.checks += 1;
        self.worst = self.worst.max(value);
        if !(value <= tol) {
            self.failures
                .push(format!("{}: {value:.3e} > {tol:.1e}", what()));
        }
    }

    fn record(&mut self, what: impl FnOnce() -> String, ok: bool) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn error(&mut self, what: &str, e: crate::Error) {
        self.checks += 1;
        self.failures.push(format!("{what}: {e}"));
    }
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> SuiteReport {
    let start = Instant::now();
    let mut r = match suite {
        Suite::Gradients => gradient_suite(&AnalyticDerivatives, opts),
        Suite::CrOracle => cr_oracle_suite(opts),
        Suite::ScaleInvariance => invariance_suite(opts),
        Suite::ReceiverOrder => receiver_order_suite(opts),
        Suite::BcdDetectors => detector_suite(opts),
    };
    r.elapsed = start.elapsed();
    r
}

pub fn run_suites(suites: &[Suite], opts: &ValidateOptions) -> Vec<SuiteReport> {
    suites.iter().map(|s| run_suite(*s, opts)).collect()
}

fn cmat_entries(m: &CMat) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn bump(
    p: &PowerDitherPoint,
    rho: Option<usize>,
    sigma: Option<usize>,
    h: f64,
) -> PowerDitherPoint {
    let mut q = p.clone();
    if let Some(k) = rho {
        q.rho[k] += h;
    }
    if let Some(b) = sigma {
        q.sigma[b] += h;
    }
    q
}

/// Central differences of (Â, C_r̂) through the full model.
fn fd_model(
    ch: &ChannelState,
    p: &PowerDitherPoint,
    rho: Option<usize>,
    sigma: Option<usize>,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let plus = QuantizedModel::new(ch, &bump(p, rho, sigma, h), Quantizer::OneBit)?;
    let minus = QuantizedModel::new(ch, &bump(p, rho, sigma, -h), Quantizer::OneBit)?;
    let da = (&plus.a - &minus.a) / (2.0 * h);
    let dcr = (&plus.c_r - &minus.c_r) / C64::new(2.0 * h, 0.0);
    Ok((da.iter().cloned().collect(), cmat_entries(&dcr)))
}

/// Finite-difference check of the model derivatives and both Lagrangian
/// gradients on random instances with B·M ≤ 8 and K ≤ 3. The derivative
/// source is a parameter so that broken implementations can be shown to fail.
pub fn gradient_suite(provider: &dyn DerivativeProvider, opts: &ValidateOptions) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Gradients);
    for seed in 0..opts.gradient_instances as u64 {
        let b = 1 + seed as usize % 4;
        let m = 8 / b.max(2);
        let k = 1 + (seed as usize / 4) % 3;
        let eps = if seed % 2 == 1 { 0.1 } else { 0.0 };
        if let Err(e) = gradient_instance(provider, opts, seed, b, m, k, eps, &mut r) {
            r.error(&format!("instance {seed}"), e);
        }
    }
    r
}

#[allow(clippy::too_many_arguments)]
fn gradient_instance(
    provider: &dyn DerivativeProvider,
    opts: &ValidateOptions,
    seed: u64,
    b: usize,
    m: usize,
    k: usize,
    eps: f64,
    r: &mut SuiteReport,
) -> Result<()> {
    let tol = opts.gradient_tol;
    let inst = random_instance(seed + 500, b, m, k, eps);
    let (ch, p) = (&inst.channels, &inst.point);
    let model = QuantizedModel::new(ch, p, Quantizer::OneBit)?;
    let bundle: DerivativeBundle = provider.bundle(&model, ch, p)?;
    for j in 0..k {
        let (fa, fc) = fd_model(ch, p, Some(j), None, fd_step(p.rho[j]))?;
        let da: Vec<f64> = bundle.da_drho[j].iter().cloned().collect();
        r.check(
            || format!("instance {seed} dA/drho_{j}"),
            relative_error(&da, &fa),
            tol,
        );
        let e = relative_error(&cmat_entries(&bundle.dcr_drho[j]), &fc);
        r.check(|| format!("instance {seed} dCr/drho_{j}"), e, tol);
    }
    for bb in 0..b {
        let (fa, fc) = fd_model(ch, p, None, Some(bb), fd_step(p.sigma[bb]))?;
        let da: Vec<f64> = bundle.da_dsigma[bb].iter().cloned().collect();
        r.check(
            || format!("instance {seed} dA/dsigma_{bb}"),
            relative_error(&da, &fa),
            tol,
        );
        let e = relative_error(&cmat_entries(&bundle.dcr_dsigma[bb]), &fc);
        r.check(|| format!("instance {seed} dCr/dsigma_{bb}"), e, tol);
    }

    let mut g = rng::stream(seed, 0xd0a1);
    let mut draw = |n: usize| (0..n).map(|_| g.gen_range(0.1..1.0)).collect::<Vec<f64>>();
    let duals = DualState::new(draw(k), draw(b), draw(k))?;
    let objectives = [
        Objective::MinPower {
            targets: (0..k).map(|i| 0.5 + i as f64).collect(),
        },
        Objective::MaxMin { gamma: 1.3 },
    ];
    for kind in ReceiverKind::ALL {
        let eval = evaluate(ch, p, kind, Quantizer::OneBit)?;
        for obj in &objectives {
            let value =
                |q: &PowerDitherPoint| lagrangian_at(ch, q, kind, Quantizer::OneBit, obj, &duals);
            let label = match obj {
                Objective::MinPower { .. } => "min-power",
                Objective::MaxMin { .. } => "max-min",
            };
            let grad = lagrangian_grad_rho(&eval, ch, obj, &bundle, &duals);
            let mut fd = Vec::with_capacity(k);
            for j in 0..k {
                let h = fd_step(p.rho[j]);
                fd.push(
                    (value(&bump(p, Some(j), None, h))? - value(&bump(p, Some(j), None, -h))?)
                        / (2.0 * h),
                );
            }
            let e = relative_error(&grad, &fd);
            r.check(|| format!("instance {seed} {kind} {label} dL/drho"), e, tol);
            let grad = lagrangian_grad_sigma(&eval, ch, obj, &bundle, &duals);
            let mut fd = Vec::with_capacity(b);
            for j in 0..b {
                let h = fd_step(p.sigma[j]);
                fd.push(
                    (value(&bump(p, None, Some(j), h))? - value(&bump(p, None, Some(j), -h))?)
                        / (2.0 * h),
                );
            }
            let e = relative_error(&grad, &fd);
            r.check(
                || format!("instance {seed} {kind} {label} dL/dsigma"),
                e,
                tol,
            );
        }
    }
    Ok(())
}

/// Monte Carlo quantization of random 4×4 covariances against the arcsine
/// law, and of the distortion q = r − Â y against C_q̂.
pub fn cr_oracle_suite(opts: &ValidateOptions) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::CrOracle);
    for i in 0..opts.cr_matrices as u64 {
        let c_y = random_covariance(i, 4);
        let run = || -> Result<(f64, f64)> {
            let mc = quantizer_moments(&c_y, opts.cr_samples, 1000 + i)?;
            let c_r = arcsine_covariance(&c_y)?;
            let c_q = qd_covariance(&c_y, &bussgang_gain(&c_y)?, &c_r);
            Ok((
                max_entry_deviation(&mc.c_r, &c_r),
                max_entry_deviation(&mc.c_q, &c_q),
            ))
        };
        match run() {
            Ok((dr, dq)) => {
                r.check(|| format!("matrix {i} C_r"), dr, opts.cr_tol);
                r.check(|| format!("matrix {i} C_q"), dq, opts.cr_tol);
            }
            Err(e) => r.error(&format!("matrix {i}"), e),
        }
    }
    r
}

/// Scaling every ρ_k and σ_b² by c leaves C_r̂, Â Ĉ_y Â and every γ̂_k unchanged.
pub fn invariance_suite(opts: &ValidateOptions) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::ScaleInvariance);
    let rel = |a: C64, b: C64| (a - b).norm() / b.norm().max(1e-300);
    for seed in 0..10u64 {
        let inst = random_instance(
            seed + 900,
            2 + seed as usize % 2,
            3,
            1 + seed as usize % 3,
            if seed % 2 == 0 { 0.0 } else { 0.2 },
        );
        let ch = &inst.channels;
        let base = &inst.point;
        let mut run = || -> Result<()> {
            let m0 = QuantizedModel::new(ch, base, Quantizer::OneBit)?;
            let aca0 = scaled_cy(&m0);
            let g0: Vec<Vec<f64>> = ReceiverKind::ALL
                .iter()
                .map(|k| sindr_at(ch, base, *k, Quantizer::OneBit))
                .collect::<Result<_>>()?;
            for c in [0.1, 10.0, 1000.0] {
                let p = PowerDitherPoint::new(
                    base.rho.iter().map(|x| x * c).collect(),
                    base.sigma.iter().map(|s| s * c.sqrt()).collect(),
                    base.sigma_min * c.sqrt(),
                )?;
                let m1 = QuantizedModel::new(ch, &p, Quantizer::OneBit)?;
                let e = m1
                    .c_r
                    .iter()
                    .zip(m0.c_r.iter())
                    .fold(0f64, |w, (a, b)| w.max(rel(*a, *b)));
                r.check(
                    || format!("instance {seed} c = {c}: C_r"),
                    e,
                    opts.invariance_tol,
                );
                let e = scaled_cy(&m1)
                    .iter()
                    .zip(aca0.iter())
                    .fold(0f64, |w, (a, b)| w.max(rel(*a, *b)));
                r.check(
                    || format!("instance {seed} c = {c}: A C_y A"),
                    e,
                    opts.invariance_tol,
                );
                for (kind, g) in ReceiverKind::ALL.iter().zip(&g0) {
                    let g1 = sindr_at(ch, &p, *kind, Quantizer::OneBit)?;
                    let e = g1
                        .iter()
                        .zip(g)
                        .fold(0f64, |w, (a, b)| w.max((a - b).abs() / b.abs()));
                    r.check(
                        || format!("instance {seed} c = {c}: {kind} SINDR"),
                        e,
                        opts.invariance_tol,
                    );
                }
            }
            Ok(())
        };
        if let Err(e) = run() {
            r.error(&format!("instance {seed}"), e);
        }
    }
    r
}

fn scaled_cy(m: &QuantizedModel) -> CMat {
    let n = m.dim();
    CMat::from_fn(n, n, |i, j| m.c_y[(i, j)] * (m.a[i] * m.a[j]))
}

/// BMMSE never does worse than BMRC (up to a relative slack).
pub fn receiver_order_suite(opts: &ValidateOptions) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::ReceiverOrder);
    for seed in 0..opts.order_instances as u64 {
        let inst = random_instance(seed + 2000, 4, 32, 4, if seed % 2 == 0 { 0.0 } else { 0.1 });
        let run = || -> Result<(Vec<f64>, Vec<f64>)> {
            Ok((
                sindr_at(
                    &inst.channels,
                    &inst.point,
                    ReceiverKind::Bmrc,
                    Quantizer::OneBit,
                )?,
                sindr_at(
                    &inst.channels,
                    &inst.point,
                    ReceiverKind::Bmmse,
                    Quantizer::OneBit,
                )?,
            ))
        };
        match run() {
            Ok((mrc, mmse)) => {
                // Shortfall of BMMSE relative to BMRC; ≤ 0 when ordered.
                let worst = mrc
                    .iter()
                    .zip(&mmse)
                    .map(|(a, b)| (a - b) / a.max(1.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                r.check(
                    || format!("instance {seed}"),
                    worst.max(0.0),
                    opts.order_slack,
                );
            }
            Err(e) => r.error(&format!("instance {seed}"), e),
        }
    }
    r
}

/// Single UE at 30 m from a one-RRH array.
fn single_ue(antennas: usize, seed: u64) -> Result<(ChannelState, f64)> {
    let cfg = GeometryConfig {
        num_rrh: 1,
        antennas,
        num_ue: 1,
        layout: Layout::Explicit {
            rrh_positions: vec![[0.0, 0.0, 5.0]],
            ue_positions: vec![[30.0, 0.0, 0.0]],
        },
        ..GeometryConfig::default()
    };
    let g = build_geometry(&cfg)?;
    Ok((draw_channels(&g, seed)?, dbm_to_watts(-95.0).sqrt()))
}

/// Smallest power on a 0.01 dB grid meeting `target`, and the SNDR peak.
fn grid_oracle(
    ch: &ChannelState,
    sigma: f64,
    kind: ReceiverKind,
    target: f64,
) -> Result<(Option<f64>, f64)> {
    let mut first = None;
    let mut peak = 0f64;
    for i in 0..=10_000 {
        let rho = dbm_to_watts(-60.0 + 0.01 * i as f64);
        let p = PowerDitherPoint::new(vec![rho], vec![sigma], sigma)?;
        let g = sindr_at(ch, &p, kind, Quantizer::OneBit)?[0];
        peak = peak.max(g);
        if first.is_none() && g >= target {
            first = Some(rho);
        }
    }
    Ok((first, peak))
}

/// Termination logic of the BCD methods: the all-UE QD detector stays
/// silent on an unquantized (monotone) system, the per-UE detector fires on
/// an unreachable single-UE target, and single-UE min-power powers agree
/// with a brute-force grid.
pub fn detector_suite(opts: &ValidateOptions) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::BcdDetectors);
    let cfg = OptimizerConfig::default();
    let short = OptimizerConfig {
        max_iters: 60,
        ..cfg.clone()
    };
    let mut g = rng::stream(99, 0xdead);
    for run in 0..opts.detector_runs as u64 {
        let k = 1 + (run % 3) as usize;
        let inst = random_instance(run, 2, 2, k, 0.0);
        let kind = if run % 2 == 0 {
            ReceiverKind::Bmrc
        } else {
            ReceiverKind::Bmmse
        };
        let targets: Vec<f64> = (0..k).map(|_| 10f64.powf(g.gen_range(-1.0..3.0))).collect();
        let p = PowerProblem::new(&inst.channels, kind, inst.point.sigma.clone(), 1e-6)
            .with_targets(targets)
            .with_cap(dbm_to_watts(30.0))
            .with_quantizer(Quantizer::Unquantized);
        let qd =
            |t: Termination| matches!(t, Termination::QdRegionAllUes | Termination::QdRegionPerUe);
        match (minpower_bcd(&p, &short), maxmin_bcd(&p, &short)) {
            (Ok(a), Ok(b)) => r.record(
                || {
                    format!(
                        "unquantized run {run}: QD detector fired ({:?}, {:?})",
                        a.termination, b.termination
                    )
                },
                !qd(a.termination) && !qd(b.termination),
            ),
            (Err(e), _) | (_, Err(e)) => r.error(&format!("unquantized run {run}"), e),
        }
    }

    let alpha_db = 10.0 * cfg.alpha.log10();
    for seed in [3u64, 5] {
        let run = |r: &mut SuiteReport| -> Result<()> {
            let (ch, sigma) = single_ue(16, seed)?;
            for kind in ReceiverKind::ALL {
                let (_, peak) = grid_oracle(&ch, sigma, kind, f64::INFINITY)?;
                let p =
                    PowerProblem::new(&ch, kind, vec![sigma], sigma).with_targets(vec![2.0 * peak]);
                let over = minpower_bcd(&p, &cfg)?;
                r.record(
                    || {
                        format!(
                            "seed {seed} {kind}: unreachable target ended with {:?}",
                            over.termination
                        )
                    },
                    over.termination == Termination::QdRegionPerUe,
                );
                let target = 0.5 * peak;
                let (oracle, _) = grid_oracle(&ch, sigma, kind, target)?;
                let p = PowerProblem::new(&ch, kind, vec![sigma], sigma).with_targets(vec![target]);
                let run = minpower_bcd(&p, &cfg)?;
                match oracle {
                    Some(o) => r.check(
                        || format!("seed {seed} {kind}: power gap to the grid oracle (dB)"),
                        power_gap_db(run.best.rho[0], o).abs(),
                        alpha_db.max(0.1),
                    ),
                    None => r.record(
                        || format!("seed {seed} {kind}: grid oracle found no power"),
                        false,
                    ),
                }
            }
            Ok(())
        };
        if let Err(e) = run(&mut r) {
            r.error(&format!("single-UE seed {seed}"), e);
        }
    }
    r
}

/// Analytic derivatives with the sign of ∂C_r̂/∂ρ_k flipped. A mutation used
/// to prove the gradient suite notices a broken derivative.
#[derive(Clone, Copy, Debug, Default)]
pub struct SignFlippedCrDerivative;

impl DerivativeProvider for SignFlippedCrDerivative {
    fn bundle(
        &self,
        model: &QuantizedModel,
        channels: &ChannelState,
        point: &PowerDitherPoint,
    ) -> Result<DerivativeBundle> {
        let mut b = DerivativeBundle::compute(model, channels, point)?;
        for d in &mut b.dcr_drho {
            *d = -d.clone();
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ValidateOptions {
        ValidateOptions {
            gradient_instances: 6,
            cr_matrices: 2,
            cr_samples: 200_000,
            cr_tol: 1e-2,
            order_instances: 10,
            detector_runs: 30,
            ..ValidateOptions::default()
        }
    }

    #[test]
    fn every_suite_passes_on_the_implementation() {
        for report in run_suites(&Suite::ALL, &quick()) {
            assert!(
                report.passed(),
                "{}: {:?}",
                report.suite.name(),
                report.failures
            );
            assert!(report.checks > 0);
        }
    }

    #[test]
    fn sign_error_in_dcr_is_caught() {
        let r = gradient_suite(&SignFlippedCrDerivative, &quick());
        assert!(!r.passed());
        assert!(r.failures.iter().any(|f| f.contains("dCr/drho")));
        assert!(r.failures.iter().all(|f| !f.contains("dCr/dsigma")));
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("everything"), None);
    }
}
