//! Joint optimization of UE powers and RRH dithering levels.
//!
//! The coarse stage ties every dithering level to one scalar θ,
//! σ_b = σ_min · max(1, √δ_b^max θ), and runs a ternary search on θ with a
//! full power optimization at every probe. The fine stage then moves the
//! individual σ_b along the Lagrangian gradient, re-solving the powers after
//! each move and keeping only improving steps.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::ChannelState;
use crate::gradients::{
    constraint_jacobian_rho, lagrangian_grad_sigma, AnalyticDerivatives, DerivativeProvider,
    DualState, Objective,
};
use crate::power::{
    maxmin_bcd, minpower_bcd, minpower_gradient_with, OptimizerConfig, PowerProblem, Termination,
};
use crate::quantized::Quantizer;
use crate::receivers::{Evaluation, ReceiverKind};
use crate::units::{linear_to_db, sigma_to_dbm, watts_to_dbm};

/// Search range of θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaInterval {
    pub theta_low: f64,
    pub theta_high: f64,
}

impl ThetaInterval {
    /// [1/max_b √δ_b^max, 1/min_b √δ_b^max]. At the lower end no RRH is
    /// dithered; at the upper end every RRH but the one with the weakest
    /// best link is.
    pub fn from_gain_max(gain_max: &[f64]) -> Result<Self> {
        if gain_max.is_empty() || gain_max.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::domain("per-RRH gains must be positive and finite"));
        }
        let max = gain_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = gain_max.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self {
            theta_low: 1.0 / max.sqrt(),
            theta_high: 1.0 / min.sqrt(),
        })
    }

    pub fn width(&self) -> f64 {
        self.theta_high - self.theta_low
    }

    /// θ^(l) = ((3 − l) θ_low + l θ_high) / 3 for l = 1, 2.
    pub fn probes(&self) -> [f64; 2] {
        let p = |l: f64| ((3.0 - l) * self.theta_low + l * self.theta_high) / 3.0;
        [p(1.0), p(2.0)]
    }

    fn drop_lower_third(&mut self) {
        self.theta_low = (2.0 * self.theta_low + self.theta_high) / 3.0;
    }

    fn drop_upper_third(&mut self) {
        self.theta_high = (self.theta_low + 2.0 * self.theta_high) / 3.0;
    }
}

/// σ_b = σ_min · max(1, √δ_b^max θ).
pub fn coarse_dither(theta: f64, gain_max: &[f64], sigma_min: f64) -> Vec<f64> {
    gain_max
        .iter()
        .map(|g| sigma_min * (g.sqrt() * theta).max(1.0))
        .collect()
}

/// Fixed dithering that keeps the quantization distortion of every RRH at
/// the level of the weakest one: σ_b = σ_min √(δ_b^max / min_b δ_b^max).
/// All RRHs then saturate at the same UE power. Same as `coarse_dither` at
/// the top of the θ range.
pub fn equalizing_dither(gain_max: &[f64], sigma_min: f64) -> Vec<f64> {
    let weakest = gain_max.iter().cloned().fold(f64::INFINITY, f64::min);
    gain_max
        .iter()
        .map(|g| sigma_min * (g / weakest).sqrt().max(1.0))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// One ternary-search iteration: both probes and the interval left after it.
#[derive(Clone, Debug, PartialEq)]
pub struct TernaryStep {
    pub theta: [f64; 2],
    pub score: [f64; 2],
    pub interval: ThetaInterval,
}

#[derive(Clone, Debug)]
pub struct TernaryOutcome<T> {
    pub theta: f64,
    pub score: f64,
    pub value: T,
    pub steps: Vec<TernaryStep>,
    pub evaluations: usize,
}

/// Number of probe evaluations [`ternary_search`] makes on an interval of
/// width `width` with tolerance `eps`.
pub fn ternary_evaluations(width: f64, eps: f64) -> usize {
    if width <= eps {
        return 1;
    }
    let mut w = width;
    let mut n = 0;
    while w > eps {
        w *= 2.0 / 3.0;
        n += 1;
    }
    2 * n
}

/// Ternary search of a unimodal score over θ.
///
/// Each iteration scores the two interior probes (in parallel) and drops the
/// outer third on the side of the worse one, so the width shrinks by 2/3.
/// Stops once θ_high − θ_low ≤ `eps`. The best probe seen is returned; for a
/// unimodal score it always lies inside the final interval.
pub fn ternary_search<T, F>(
    interval: ThetaInterval,
    eps: f64,
    direction: Direction,
    f: F,
) -> Result<TernaryOutcome<T>>
where
    T: Send,
    F: Fn(f64) -> Result<(f64, T)> + Sync,
{
    if !(eps >= 0.0) || !(interval.theta_low > 0.0) || interval.width() < 0.0 {
        return Err(Error::domain("invalid theta interval or tolerance"));
    }
    let better = |a: f64, b: f64| match direction {
        Direction::Minimize => a < b,
        Direction::Maximize => a > b,
    };
    let mut steps = Vec::new();
    let mut best: Option<(f64, f64, T)> = None;
    let keep = |theta: f64, score: f64, value: T, best: &mut Option<(f64, f64, T)>| {
        if best.as_ref().is_none_or(|(_, s, _)| better(score, *s)) {
            *best = Some((theta, score, value));
        }
    };
    let mut evaluations = 0;
    let mut iv = interval;
    if iv.width() <= eps {
        let theta = 0.5 * (iv.theta_low + iv.theta_high);
        let (score, value) = f(theta)?;
        evaluations += 1;
        keep(theta, score, value, &mut best);
    }
    while iv.width() > eps {
        let theta = iv.probes();
        let (r1, r2) = rayon::join(|| f(theta[0]), || f(theta[1]));
        let ((s1, v1), (s2, v2)) = (r1?, r2?);
        evaluations += 2;
        // The second probe wins ties, matching the strict comparison that
        // moves θ_low.
        if better(s2, s1) || s1 == s2 {
            iv.drop_lower_third();
        } else {
            iv.drop_upper_third();
        }
        keep(theta[0], s1, v1, &mut best);
        keep(theta[1], s2, v2, &mut best);
        steps.push(TernaryStep {
            theta,
            score: [s1, s2],
            interval: iv,
        });
    }
    let (theta, score, value) = best.expect("at least one evaluation");
    Ok(TernaryOutcome {
        theta,
        score,
        value,
        steps,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    MinPower,
    MaxMin,
}

impl ObjectiveKind {
    fn direction(self) -> Direction {
        match self {
            ObjectiveKind::MinPower => Direction::Minimize,
            ObjectiveKind::MaxMin => Direction::Maximize,
        }
    }
}

/// Power optimizer used at every θ probe and fine-tune step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolver {
    Bcd,
    Gradient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DitherConfig {
    /// Ternary-search tolerance as a fraction of the initial θ width.
    pub eps_sigma_frac: f64,
    /// Fine-tune stops when the sum power improves by no more than this (dB).
    pub eps_rho_db: f64,
    /// Fine-tune stops when the min SINDR improves by no more than this (dB).
    pub eps_gamma_db: f64,
    /// Fine-tune step: largest relative change of any σ_b per step.
    pub zeta_sigma: f64,
    /// Step of the dithering-floor duals υ_b, relative to σ_min.
    pub kappa: f64,
    /// Step of the max-min SINDR duals η_k.
    pub nu_eta: f64,
    pub fine_tune_iters: usize,
    /// Halvings of the σ step tried before fine-tuning gives up.
    pub backtracks: usize,
    /// Power used in the infeasibility penalty of min-power probes, watts.
    /// Defaults to the per-UE cap of the problem when `None`.
    pub rho_max: Option<f64>,
    pub inner: InnerSolver,
}

impl Default for DitherConfig {
    fn default() -> Self {
        Self {
            eps_sigma_frac: 0.01,
            eps_rho_db: 0.01,
            eps_gamma_db: 0.05,
            zeta_sigma: 0.5,
            kappa: 1e-2,
            nu_eta: 1.0,
            fine_tune_iters: 30,
            backtracks: 4,
            rho_max: None,
            inner: InnerSolver::Bcd,
        }
    }
}

impl DitherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_sigma_frac > 0.0) || !(self.eps_rho_db >= 0.0) || !(self.eps_gamma_db >= 0.0)
        {
            return Err(Error::domain("dither tolerances must be positive"));
        }
        if !(self.zeta_sigma >= 0.0) || !(self.kappa >= 0.0) || !(self.nu_eta >= 0.0) {
            return Err(Error::domain("dither step sizes must be non-negative"));
        }
        if let Some(r) = self.rho_max {
            if !(r > 0.0) {
                return Err(Error::domain("rho_max must be positive"));
            }
        }
        Ok(())
    }
}

/// Joint power/dithering problem.
#[derive(Clone, Debug)]
pub struct DitherProblem<'a> {
    pub channels: &'a ChannelState,
    /// δ_b^max per RRH.
    pub gain_max: Vec<f64>,
    pub kind: ReceiverKind,
    pub quantizer: Quantizer,
    pub sigma_min: f64,
    pub targets: Vec<f64>,
    pub rho_ue_max: f64,
}

impl<'a> DitherProblem<'a> {
    pub fn new(
        channels: &'a ChannelState,
        gain_max: Vec<f64>,
        kind: ReceiverKind,
        sigma_min: f64,
    ) -> Self {
        Self {
            channels,
            gain_max,
            kind,
            quantizer: Quantizer::OneBit,
            sigma_min,
            targets: vec![0.0; channels.num_ue()],
            rho_ue_max: f64::INFINITY,
        }
    }

    pub fn with_targets(mut self, targets: Vec<f64>) -> Self {
        self.targets = targets;
        self
    }

    pub fn with_cap(mut self, rho_ue_max: f64) -> Self {
        self.rho_ue_max = rho_ue_max;
        self
    }

    pub fn power_problem(&self, sigma: Vec<f64>) -> PowerProblem<'a> {
        PowerProblem::new(self.channels, self.kind, sigma, self.sigma_min)
            .with_quantizer(self.quantizer)
            .with_targets(self.targets.clone())
            .with_cap(self.rho_ue_max)
    }

    pub fn interval(&self) -> Result<ThetaInterval> {
        if self.gain_max.len() != self.channels.num_rrh {
            return Err(Error::domain("one gain_max entry per RRH required"));
        }
        ThetaInterval::from_gain_max(&self.gain_max)
    }
}

/// A solved (ρ, σ) point.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPoint {
    pub theta: f64,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sindr: Vec<f64>,
    /// Sum power (min-power) or min SINDR (max-min).
    pub objective: f64,
    /// Min-power only: whether every target is met. Max-min points are
    /// always feasible.
    pub feasible: bool,
    /// Value compared by the search: the objective, or the infeasibility
    /// penalty for infeasible min-power points.
    pub score: f64,
    pub termination: Termination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FineTuneStop {
    /// Improvement fell below the tolerance.
    Converged,
    /// No step length improved the objective.
    NoImprovement,
    MaxIters,
    /// A derivative could not be formed; the best point so far is kept.
    Singular,
    Disabled,
}

#[derive(Clone, Debug)]
pub struct JointSolution {
    pub kind: ObjectiveKind,
    pub best: JointPoint,
    pub coarse: JointPoint,
    /// Every θ probe of the coarse stage, in evaluation order.
    pub probes: Vec<JointPoint>,
    pub steps: Vec<TernaryStep>,
    /// Accepted fine-tune iterates (the coarse point first).
    pub fine: Vec<JointPoint>,
    pub fine_stop: FineTuneStop,
}

impl JointSolution {
    pub fn rho(&self) -> &[f64] {
        &self.best.rho
    }

    pub fn sigma(&self) -> &[f64] {
        &self.best.sigma
    }

    pub fn objective(&self) -> f64 {
        self.best.objective
    }

    /// Trace CSV: one row per probe (`stage = coarse`) and per fine-tune
    /// iterate (`stage = fine`), with σ as noise power in dBm and ρ in dBm.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let (b, k) = (self.best.sigma.len(), self.best.rho.len());
        let mut header = vec![
            "stage".to_string(),
            "iteration".to_string(),
            "theta".to_string(),
        ];
        header.extend((0..b).map(|i| format!("sigma_dbm_{i}")));
        header.extend((0..k).map(|i| format!("rho_dbm_{i}")));
        header.extend(["objective", "feasible"].map(String::from));
        w.write_record(&header)?;
        let rows = self
            .probes
            .iter()
            .enumerate()
            .map(|(i, p)| ("coarse", i / 2, p))
            .chain(self.fine.iter().enumerate().map(|(i, p)| ("fine", i, p)));
        for (stage, i, p) in rows {
            let mut row = vec![
                stage.to_string(),
                i.to_string(),
                format!("{:.17e}", p.theta),
            ];
            row.extend(p.sigma.iter().map(|s| format!("{:.17e}", sigma_to_dbm(*s))));
            row.extend(p.rho.iter().map(|r| format!("{:.17e}", watts_to_dbm(*r))));
            row.push(format!("{:.17e}", p.objective));
            row.push(p.feasible.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the power problem at dithering `sigma`.
pub fn solve_at(
    kind: ObjectiveKind,
    problem: &DitherProblem,
    sigma: Vec<f64>,
    theta: f64,
    power: &OptimizerConfig,
    dither: &DitherConfig,
    interval: &ThetaInterval,
) -> Result<JointPoint> {
    let pp = problem.power_problem(sigma.clone());
    let record = match (kind, dither.inner) {
        (ObjectiveKind::MaxMin, _) => maxmin_bcd(&pp, power)?,
        (ObjectiveKind::MinPower, InnerSolver::Bcd) => minpower_bcd(&pp, power)?,
        (ObjectiveKind::MinPower, InnerSolver::Gradient) => {
            minpower_gradient_with(&pp, power, &AnalyticDerivatives)?
        }
    };
    let best = record.best;
    let (objective, feasible, score) = match kind {
        ObjectiveKind::MaxMin => {
            let g = best.min_sindr();
            (g, true, g)
        }
        ObjectiveKind::MinPower => {
            let sum = best.sum_power();
            let feasible = pp.targets_met(&best.sindr, power.sindr_tol);
            let score = if feasible {
                sum
            } else {
                infeasibility_penalty(problem, dither, theta, interval)
            };
            (sum, feasible, score)
        }
    };
    Ok(JointPoint {
        theta,
        rho: best.rho,
        sigma,
        sindr: best.sindr,
        objective,
        feasible,
        score,
        termination: record.termination,
    })
}

/// K ρ_max / θ̄ with θ̄ = θ / θ_high ∈ (0, 1]: never below the sum of K
/// capped powers, and larger for less dithering so the search is pushed
/// towards the side where targets become reachable.
fn infeasibility_penalty(
    problem: &DitherProblem,
    dither: &DitherConfig,
    theta: f64,
    interval: &ThetaInterval,
) -> f64 {
    let rho_max = dither.rho_max.unwrap_or(problem.rho_ue_max);
    let rho_max = if rho_max.is_finite() { rho_max } else { 1.0 };
    let theta_bar = theta / interval.theta_high;
    problem.targets.len() as f64 * rho_max / theta_bar
}

/// Coarse stage: ternary search over θ.
pub fn coarse_search(
    kind: ObjectiveKind,
    problem: &DitherProblem,
    power: &OptimizerConfig,
    dither: &DitherConfig,
) -> Result<(JointPoint, Vec<JointPoint>, Vec<TernaryStep>)> {
    power.validate()?;
    dither.validate()?;
    let interval = problem.interval()?;
    let eps = dither.eps_sigma_frac * interval.width();
    let probe = |theta: f64| -> Result<(f64, JointPoint)> {
        let sigma = coarse_dither(theta, &problem.gain_max, problem.sigma_min);
        let p = solve_at(kind, problem, sigma, theta, power, dither, &interval).map_err(|e| {
            Error::InnerSolve {
                theta,
                source: Box::new(e),
            }
        })?;
        Ok((p.score, p))
    };
    // Probes are re-collected from the steps so the trace keeps every point,
    // not only the best.
    let seen = std::sync::Mutex::new(Vec::new());
    let outcome = ternary_search(interval, eps, kind.direction(), |theta| {
        let r = probe(theta)?;
        seen.lock().expect("probe log").push(r.1.clone());
        Ok(r)
    })?;
    let mut probes = seen.into_inner().expect("probe log");
    // Parallel probes may log out of order; restore θ order within a pair.
    for pair in probes.chunks_mut(2) {
        pair.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    }
    Ok((outcome.value, probes, outcome.steps))
}

/// Coarse stage followed by fine-tuning.
pub fn optimize_dithering(
    kind: ObjectiveKind,
    problem: &DitherProblem,
    power: &OptimizerConfig,
    dither: &DitherConfig,
) -> Result<JointSolution> {
    optimize_dithering_with(kind, problem, power, dither, &AnalyticDerivatives)
}

pub fn optimize_dithering_with(
    kind: ObjectiveKind,
    problem: &DitherProblem,
    power: &OptimizerConfig,
    dither: &DitherConfig,
    provider: &dyn DerivativeProvider,
) -> Result<JointSolution> {
    let (coarse, probes, steps) = coarse_search(kind, problem, power, dither)?;
    let (fine, fine_stop) = fine_tune(kind, problem, &coarse, power, dither, provider)?;
    let best = fine.last().expect("coarse point first").clone();
    Ok(JointSolution {
        kind,
        best,
        coarse,
        probes,
        steps,
        fine,
        fine_stop,
    })
}

/// Solution without dithering (every σ_b = σ_min).
pub fn without_dithering(
    kind: ObjectiveKind,
    problem: &DitherProblem,
    power: &OptimizerConfig,
    dither: &DitherConfig,
) -> Result<JointPoint> {
    let interval = problem.interval()?;
    let sigma = vec![problem.sigma_min; problem.gain_max.len()];
    solve_at(
        kind,
        problem,
        sigma,
        interval.theta_low,
        power,
        dither,
        &interval,
    )
}

fn improves(kind: ObjectiveKind, new: &JointPoint, old: &JointPoint) -> bool {
    match kind {
        // An infeasible min-power point never replaces a feasible one.
        ObjectiveKind::MinPower => new.feasible && (!old.feasible || new.objective < old.objective),
        ObjectiveKind::MaxMin => new.objective > old.objective,
    }
}

fn improvement_db(kind: ObjectiveKind, new: &JointPoint, old: &JointPoint) -> f64 {
    match kind {
        ObjectiveKind::MinPower => linear_to_db(old.objective / new.objective),
        ObjectiveKind::MaxMin => linear_to_db(new.objective / old.objective),
    }
}

/// Duals of the min-power SINDR constraints from the stationarity condition
/// ∂L/∂ρ = 0, i.e. Jᵀμ = 1 over the UEs with a positive target.
fn stationary_mu(eval: &Evaluation, problem: &DitherProblem, jac: &[Vec<f64>]) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..problem.targets.len())
        .filter(|&k| problem.targets[k] > 0.0)
        .collect();
    let mut mu = vec![0.0; eval.sindr.len()];
    if active.is_empty() {
        return Some(mu);
    }
    let n = active.len();
    let jt = DMatrix::from_fn(n, n, |r, c| jac[active[c]][active[r]]);
    let sol = jt.lu().solve(&DVector::from_element(n, 1.0))?;
    for (i, &k) in active.iter().enumerate() {
        mu[k] = sol[i].max(0.0);
    }
    Some(mu)
}

/// Gradient ∂L/∂σ_b at `point`, or `None` when a derivative is singular.
#[allow(clippy::too_many_arguments)]
fn sigma_gradient(
    kind: ObjectiveKind,
    problem: &DitherProblem,
    point: &JointPoint,
    duals: &mut DualState,
    weights: &mut [f64],
    dither: &DitherConfig,
    provider: &dyn DerivativeProvider,
) -> Result<Option<Vec<f64>>> {
    let pp = problem.power_problem(point.sigma.clone());
    let eval = pp.evaluate(&point.rho)?;
    let bundle = match provider.bundle(&eval.model, problem.channels, &eval.point) {
        Ok(b) => b,
        Err(Error::DerivativeSingularity { i, j, value }) => {
            log::warn!("fine-tune stopped: singular derivative at ({i}, {j}), |x| = {value}");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    duals.update_floor_duals(
        &point.sigma,
        problem.sigma_min,
        dither.kappa / problem.sigma_min,
    );
    let grad = match kind {
        ObjectiveKind::MinPower => {
            let objective = Objective::MinPower {
                targets: problem.targets.clone(),
            };
            let jac = constraint_jacobian_rho(&eval, problem.channels, &objective, &bundle);
            let Some(mu) = stationary_mu(&eval, problem, &jac) else {
                log::warn!("fine-tune stopped: singular power Jacobian");
                return Ok(None);
            };
            duals.mu = mu;
            lagrangian_grad_sigma(&eval, problem.channels, &objective, &bundle, duals)
        }
        ObjectiveKind::MaxMin => {
            let gamma = common_sindr(&eval, weights);
            // Shift weight towards the UEs at the bottom; χ̃_k = γ_k/γ − 1.
            let floor = eval.min_sindr();
            for (w, s) in weights.iter_mut().zip(&eval.sindr) {
                *w = (*w - dither.nu_eta * (s / floor - 1.0)).max(0.0);
            }
            normalize_weights(weights, &eval.sindr);
            let objective = Objective::MaxMin { gamma };
            // η_k = w_k / (b_k − a_k) makes the step a weighted sum of the
            // SINDR sensitivities ∂γ̂_k/∂σ_b.
            duals.eta = (0..weights.len())
                .map(|k| {
                    let (a, b) = slackness_terms(&eval, k);
                    if b > a {
                        weights[k] / (b - a)
                    } else {
                        0.0
                    }
                })
                .collect();
            lagrangian_grad_sigma(&eval, problem.channels, &objective, &bundle, duals)
        }
    };
    if grad.iter().any(|g| !g.is_finite()) {
        return Ok(None);
    }
    Ok(Some(grad))
}

/// (a_k, b_k) of the complementary-slackness form (γ+1)a_k − γ b_k.
fn slackness_terms(eval: &Evaluation, k: usize) -> (f64, f64) {
    let rho = eval.point.rho[k];
    match eval.kind {
        ReceiverKind::Bmrc => (rho * eval.x[k] * eval.x[k], eval.q[k]),
        ReceiverKind::Bmmse => (rho * eval.q[k], 1.0),
    }
}

/// γ = Σ η_k a_k / Σ η_k (b_k − a_k), with the weights as η.
pub fn common_sindr(eval: &Evaluation, eta: &[f64]) -> f64 {
    let (num, den) = (0..eta.len()).fold((0.0, 0.0), |(n, d), k| {
        let (a, b) = slackness_terms(eval, k);
        (n + eta[k] * a, d + eta[k] * (b - a))
    });
    if den > 0.0 {
        num / den
    } else {
        eval.min_sindr()
    }
}

fn normalize_weights(w: &mut [f64], sindr: &[f64]) {
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        let k = (0..sindr.len())
            .min_by(|a, b| sindr[*a].total_cmp(&sindr[*b]))
            .expect("at least one UE");
        w.iter_mut().for_each(|x| *x = 0.0);
        w[k] = 1.0;
    }
}

/// Fine-tuning of the individual dithering levels.
///
/// Each iteration takes the projected step σ_b ← max(σ_min, σ_b − t σ_b d_b)
/// with d_b the Lagrangian gradient in relative units (σ_b ∂L/∂σ_b over the
/// objective), clipped to [−1, 1], and t starting at `zeta_sigma`. The powers
/// are re-solved at the new σ. A step is kept only if it improves the
/// objective; otherwise t is halved up to `backtracks` times. Returns the
/// accepted iterates, starting with `coarse`, so the last one is the best.
pub fn fine_tune(
    kind: ObjectiveKind,
    problem: &DitherProblem,
    coarse: &JointPoint,
    power: &OptimizerConfig,
    dither: &DitherConfig,
    provider: &dyn DerivativeProvider,
) -> Result<(Vec<JointPoint>, FineTuneStop)> {
    dither.validate()?;
    let mut accepted = vec![coarse.clone()];
    if dither.zeta_sigma == 0.0 || dither.fine_tune_iters == 0 {
        return Ok((accepted, FineTuneStop::Disabled));
    }
    if kind == ObjectiveKind::MinPower && !coarse.feasible {
        return Ok((accepted, FineTuneStop::NoImprovement));
    }
    let interval = problem.interval()?;
    let (num_ue, num_rrh) = (problem.targets.len(), problem.gain_max.len());
    let mut duals = DualState::zeros(num_ue, num_rrh);
    let mut weights = vec![1.0 / num_ue as f64; num_ue];
    let eps_db = match kind {
        ObjectiveKind::MinPower => dither.eps_rho_db,
        ObjectiveKind::MaxMin => dither.eps_gamma_db,
    };
    let mut current = coarse.clone();
    for _ in 0..dither.fine_tune_iters {
        let Some(grad) = sigma_gradient(
            kind,
            problem,
            &current,
            &mut duals,
            &mut weights,
            dither,
            provider,
        )?
        else {
            return Ok((accepted, FineTuneStop::Singular));
        };
        let scale = current.objective.abs().max(f64::MIN_POSITIVE);
        // Gradient descent on L lowers the sum power, and for the max-min
        // Lagrangian raises the weighted SINDR.
        let dir: Vec<f64> = grad
            .iter()
            .zip(&current.sigma)
            .map(|(g, s)| (s * g / scale).clamp(-1.0, 1.0))
            .collect();
        let mut t = dither.zeta_sigma;
        let mut next = None;
        for _ in 0..=dither.backtracks {
            let sigma: Vec<f64> = current
                .sigma
                .iter()
                .zip(&dir)
                .map(|(s, d)| (s - t * s * d).max(problem.sigma_min))
                .collect();
            if sigma != current.sigma {
                let theta = current.theta;
                let cand = solve_at(kind, problem, sigma, theta, power, dither, &interval)?;
                if improves(kind, &cand, &current) {
                    next = Some(cand);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = next else {
            return Ok((accepted, FineTuneStop::NoImprovement));
        };
        let gain = improvement_db(kind, &next, &current);
        accepted.push(next.clone());
        current = next;
        if gain <= eps_db {
            return Ok((accepted, FineTuneStop::Converged));
        }
    }
    Ok((accepted, FineTuneStop::MaxIters))
}
