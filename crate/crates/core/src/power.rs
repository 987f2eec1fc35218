//! UE transmit-power optimization at fixed dithering levels.
//!
//! * [`minpower_gradient`]: primal-dual projected gradient on the min-power
//!   Lagrangian.
//! * [`minpower_bcd`]: block coordinate descent, one UE scaled per iteration.
//! * [`maxmin_bcd`]: block coordinate descent towards the max-min SINDR.
//!
//! The BCD variants stop as soon as the SINDR shows the non-monotonic
//! behaviour caused by quantization distortion (QD).

use std::fmt;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::ChannelState;
use crate::gradients::{
    constraint_values, lagrangian_grad_rho, AnalyticDerivatives, DerivativeProvider, DualState,
    Objective,
};
use crate::quantized::{PowerDitherPoint, QuantizedModel, Quantizer};
use crate::receivers::{evaluate_model, Evaluation, ReceiverKind};
use crate::rng;
use crate::units::{dbm_to_watts, linear_to_db, watts_to_dbm};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Cap on the per-iteration power scaling of min-power BCD (> 1).
    pub alpha: f64,
    /// Fixed per-iteration power scaling of max-min BCD (> 1).
    pub beta: f64,
    /// Primal step of the gradient method, in normalized-power units.
    pub zeta_rho: f64,
    /// Dual step of the gradient method, in normalized-constraint units.
    pub nu: f64,
    /// Damping of the dual step on the change of the constraint values.
    pub nu_damping: f64,
    pub max_iters: usize,
    /// Relative slack on the SINDR targets: met when γ̂_k ≥ γ_k^Tar (1 − tol).
    pub sindr_tol: f64,
    /// Starting power of the BCD methods, dBm.
    pub rho_init_dbm: f64,
    /// Range of the log-uniform random start of the gradient method, dBm.
    pub gradient_init_dbm: [f64; 2],
    /// Seed of the random start of the gradient method.
    pub seed: u64,
    /// Hard ceiling on any power the gradient method may propose, dBm. Past
    /// the SINDR peak an unreachable target would otherwise push ρ without
    /// bound.
    pub rho_ceiling_dbm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            beta: 1.2589,
            zeta_rho: 0.1,
            nu: 4.0,
            nu_damping: 8.0,
            max_iters: 500,
            sindr_tol: 1e-2,
            rho_init_dbm: -30.0,
            gradient_init_dbm: [-30.0, 0.0],
            seed: 0,
            rho_ceiling_dbm: 60.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || !(self.beta > 1.0) {
            return Err(Error::domain("alpha and beta must exceed 1"));
        }
        if !(self.zeta_rho >= 0.0) || !(self.nu >= 0.0) || !(self.nu_damping >= 0.0) {
            return Err(Error::domain("step sizes must be non-negative"));
        }
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.sindr_tol) {
            return Err(Error::domain("sindr_tol must lie in [0, 1)"));
        }
        if !self.rho_ceiling_dbm.is_finite() {
            return Err(Error::domain("rho_ceiling_dbm must be finite"));
        }
        if !(self.gradient_init_dbm[0] <= self.gradient_init_dbm[1]) {
            return Err(Error::domain("gradient_init_dbm must be an ordered range"));
        }
        Ok(())
    }
}

/// Power-allocation problem at fixed dithering.
#[derive(Clone, Debug)]
pub struct PowerProblem<'a> {
    pub channels: &'a ChannelState,
    pub kind: ReceiverKind,
    pub quantizer: Quantizer,
    pub sigma: Vec<f64>,
    pub sigma_min: f64,
    /// Per-UE SINDR targets (min-power objective), linear.
    pub targets: Vec<f64>,
    /// Per-UE power cap (max-min objective), watts.
    pub rho_ue_max: f64,
}

impl<'a> PowerProblem<'a> {
    pub fn new(
        channels: &'a ChannelState,
        kind: ReceiverKind,
        sigma: Vec<f64>,
        sigma_min: f64,
    ) -> Self {
        Self {
            channels,
            kind,
            quantizer: Quantizer::OneBit,
            sigma,
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

    pub fn with_quantizer(mut self, quantizer: Quantizer) -> Self {
        self.quantizer = quantizer;
        self
    }

    pub fn num_ue(&self) -> usize {
        self.channels.num_ue()
    }

    pub fn point(&self, rho: Vec<f64>) -> Result<PowerDitherPoint> {
        let mut p = PowerDitherPoint::new(rho, self.sigma.clone(), self.sigma_min)?;
        p.rho_ue_max = self.rho_ue_max;
        Ok(p)
    }

    pub fn evaluate(&self, rho: &[f64]) -> Result<Evaluation> {
        let point = self.point(rho.to_vec())?;
        let model = QuantizedModel::new(self.channels, &point, self.quantizer)?;
        evaluate_model(model, self.channels, &point, self.kind)
    }

    fn validate(&self) -> Result<()> {
        if self.targets.len() != self.num_ue() {
            return Err(Error::domain("one SINDR target per UE required"));
        }
        if self.targets.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::domain(
                "SINDR targets must be finite and non-negative",
            ));
        }
        if !(self.rho_ue_max > 0.0) {
            return Err(Error::domain("power cap must be positive"));
        }
        Ok(())
    }

    /// Every positive target is met with equality up to a relative `tol`,
    /// which is where the sum power is smallest.
    pub fn targets_tight(&self, sindr: &[f64], tol: f64) -> bool {
        sindr
            .iter()
            .zip(&self.targets)
            .all(|(g, t)| *t == 0.0 || (g / t - 1.0).abs() <= tol)
    }

    /// γ̂_k ≥ γ_k^Tar (1 − tol) for every UE.
    pub fn targets_met(&self, sindr: &[f64], tol: f64) -> bool {
        sindr
            .iter()
            .zip(&self.targets)
            .all(|(g, t)| *g >= t * (1.0 - tol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TargetsMet,
    MaxIters,
    /// The selected UE's SINDR fell after its power was raised.
    QdRegionPerUe,
    /// Every UE is worse off than at some earlier iterate with lower powers.
    QdRegionAllUes,
    PowerCapHit,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::TargetsMet => "targets_met",
            Termination::MaxIters => "max_iters",
            Termination::QdRegionPerUe => "qd_region_per_ue",
            Termination::QdRegionAllUes => "qd_region_all_ues",
            Termination::PowerCapHit => "power_cap_hit",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub rho: Vec<f64>,
    pub sindr: Vec<f64>,
    /// Sum power (min-power) or min SINDR (max-min).
    pub objective: f64,
}

impl Iterate {
    pub fn min_sindr(&self) -> f64 {
        self.sindr.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sum_power(&self) -> f64 {
        self.rho.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct OptRunRecord {
    pub iterates: Vec<Iterate>,
    pub termination: Termination,
    pub best: Iterate,
}

impl OptRunRecord {
    /// One row per iterate: iteration, ρ_k in dBm, SINDR_k (linear),
    /// objective and the termination reason of the run.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.best.rho.len();
        let mut header = vec!["iteration".to_string()];
        header.extend((0..k).map(|i| format!("rho_dbm_{i}")));
        header.extend((0..k).map(|i| format!("sindr_{i}")));
        header.extend(["objective".to_string(), "termination".to_string()]);
        w.write_record(&header)?;
        for (i, it) in self.iterates.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(it.rho.iter().map(|r| format!("{:.17e}", watts_to_dbm(*r))));
            row.extend(it.sindr.iter().map(|s| format!("{s:.17e}")));
            row.push(format!("{:.17e}", it.objective));
            row.push(self.termination.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn iterate(eval: &Evaluation, min_power: bool) -> Iterate {
    Iterate {
        rho: eval.point.rho.clone(),
        sindr: eval.sindr.clone(),
        objective: if min_power {
            eval.point.rho.iter().sum()
        } else {
            eval.min_sindr()
        },
    }
}

/// Min-power UE selection: argmax_k γ_k^Tar / γ̂_k.
pub fn select_ue(targets: &[f64], sindr: &[f64]) -> usize {
    let ratio = |k: usize| {
        if sindr[k] > 0.0 {
            targets[k] / sindr[k]
        } else if targets[k] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    (0..targets.len())
        .max_by(|a, b| ratio(*a).total_cmp(&ratio(*b)))
        .expect("at least one UE")
}

/// Min-power scaling factor: min(α, γ^Tar / γ̂).
pub fn scale_factor(alpha: f64, target: f64, sindr: f64) -> f64 {
    if sindr > 0.0 {
        alpha.min(target / sindr)
    } else {
        alpha
    }
}

/// True when some earlier iterate `j` has ρ^(j) ⪯ ρ^(i) and every UE's
/// SINDR is now strictly lower, which is impossible for a monotone system.
fn dominated_by_earlier(history: &[Iterate], current: &Iterate) -> bool {
    history.iter().any(|prev| {
        prev.rho.iter().zip(&current.rho).all(|(p, c)| c >= p)
            && prev.sindr.iter().zip(&current.sindr).all(|(p, c)| c < p)
    })
}

/// Min-power block coordinate descent.
///
/// Starts from `rho_init_dbm` on every UE; each iteration raises the power
/// of the UE furthest from its target by min(α, γ^Tar/γ̂).
pub fn minpower_bcd(problem: &PowerProblem, config: &OptimizerConfig) -> Result<OptRunRecord> {
    let rho0 = vec![dbm_to_watts(config.rho_init_dbm); problem.num_ue()];
    minpower_bcd_from(problem, config, rho0)
}

pub fn minpower_bcd_from(
    problem: &PowerProblem,
    config: &OptimizerConfig,
    rho0: Vec<f64>,
) -> Result<OptRunRecord> {
    config.validate()?;
    problem.validate()?;
    let mut current = iterate(&problem.evaluate(&rho0)?, true);
    let mut iterates = vec![current.clone()];
    let mut termination = Termination::MaxIters;
    for _ in 0..config.max_iters {
        if problem.targets_met(&current.sindr, config.sindr_tol) {
            termination = Termination::TargetsMet;
            break;
        }
        let k = select_ue(&problem.targets, &current.sindr);
        let scale = scale_factor(config.alpha, problem.targets[k], current.sindr[k]);
        let mut rho = current.rho.clone();
        rho[k] *= scale;
        let next = iterate(&problem.evaluate(&rho)?, true);
        if scale > 1.0 && next.sindr[k] < current.sindr[k] {
            termination = Termination::QdRegionPerUe;
            break;
        }
        // The start is excluded from the comparison set.
        if dominated_by_earlier(&iterates[1..], &next) {
            termination = Termination::QdRegionAllUes;
            break;
        }
        iterates.push(next.clone());
        current = next;
    }
    if termination == Termination::MaxIters && problem.targets_met(&current.sindr, config.sindr_tol)
    {
        termination = Termination::TargetsMet;
    }
    Ok(OptRunRecord {
        iterates,
        termination,
        best: current,
    })
}

/// Max-min block coordinate descent.
///
/// Each iteration multiplies the power of the weakest UE by β. The returned
/// solution is the iterate with the largest min-SINDR seen.
pub fn maxmin_bcd(problem: &PowerProblem, config: &OptimizerConfig) -> Result<OptRunRecord> {
    let rho0 = vec![dbm_to_watts(config.rho_init_dbm).min(problem.rho_ue_max); problem.num_ue()];
    maxmin_bcd_from(problem, config, rho0)
}

pub fn maxmin_bcd_from(
    problem: &PowerProblem,
    config: &OptimizerConfig,
    rho0: Vec<f64>,
) -> Result<OptRunRecord> {
    config.validate()?;
    problem.validate()?;
    let cap = problem.rho_ue_max;
    let rho0: Vec<f64> = rho0.into_iter().map(|r| r.min(cap)).collect();
    let mut current = iterate(&problem.evaluate(&rho0)?, false);
    let mut iterates = vec![current.clone()];
    let mut best_trace = current.objective;
    let mut termination = Termination::MaxIters;
    if current.rho.iter().any(|r| *r >= cap) {
        termination = Termination::PowerCapHit;
    } else {
        for _ in 0..config.max_iters {
            let k = (0..current.sindr.len())
                .min_by(|a, b| current.sindr[*a].total_cmp(&current.sindr[*b]))
                .expect("at least one UE");
            let mut rho = current.rho.clone();
            rho[k] = (rho[k] * config.beta).min(cap);
            let next = iterate(&problem.evaluate(&rho)?, false);
            let max_now = next.sindr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            best_trace = best_trace.max(next.objective);
            let per_ue = next.sindr[k] < current.sindr[k];
            let all_ue = max_now < best_trace;
            let hit_cap = rho[k] >= cap;
            iterates.push(next.clone());
            current = next;
            if per_ue {
                termination = Termination::QdRegionPerUe;
                break;
            }
            if all_ue {
                termination = Termination::QdRegionAllUes;
                break;
            }
            if hit_cap {
                termination = Termination::PowerCapHit;
                break;
            }
        }
    }
    let best = iterates
        .iter()
        .fold(None::<&Iterate>, |acc, it| match acc {
            Some(b) if b.objective >= it.objective => Some(b),
            _ => Some(it),
        })
        .expect("non-empty")
        .clone();
    Ok(OptRunRecord {
        iterates,
        termination,
        best,
    })
}

/// State of the primal-dual gradient method.
///
/// The step on ρ_k is the negative Lagrangian gradient scaled by a per-UE
/// power unit `r_k`: the larger of ρ_k and the power at which UE k's SINDR
/// would reach its target if γ̂_k/ρ_k stayed at its current value. The
/// constraint ξ_k is measured in units of `g_k r_k`, with `g_k` the explicit
/// slope ∂ξ_k/∂ρ_k, and the duals are kept in the matching normalized form
/// `μ̃_k = μ_k g_k`. With these units one pair of step sizes fits every UE
/// and operating point.
///
/// The dual step is μ̃ ← max(0, μ̃ − ν ξ̃ − ν_d (ξ̃ − ξ̃_prev)). With ν_d = 0
/// it is the plain projected dual ascent; a positive ν_d damps the
/// oscillation of the primal-dual pair around the saddle point.
#[derive(Clone, Debug)]
pub struct GradientPowerState {
    pub rho: Vec<f64>,
    /// Normalized duals μ̃_k.
    pub mu_normalized: Vec<f64>,
    previous_xi: Option<Vec<f64>>,
}

/// Per-UE power unit and explicit constraint slope at `eval`.
pub fn gradient_units(eval: &Evaluation, targets: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (0..targets.len())
        .map(|k| {
            let rho = eval.point.rho[k];
            let (x, q) = (eval.x[k], eval.q[k]);
            // γ̂_k / ρ_k, finite as ρ_k → 0.
            let efficiency = match eval.kind {
                ReceiverKind::Bmrc => x * x / (q - rho * x * x),
                ReceiverKind::Bmmse => q / (1.0 - rho * q),
            };
            let unit = if efficiency > 0.0 {
                rho.max(targets[k] / efficiency)
            } else {
                rho
            };
            let slope = match eval.kind {
                ReceiverKind::Bmrc => (targets[k] + 1.0) * x * x,
                ReceiverKind::Bmmse => (targets[k] + 1.0) * q,
            };
            (unit, if slope > 0.0 { slope } else { 1.0 })
        })
        .unzip()
}

impl GradientPowerState {
    pub fn new(rho: Vec<f64>, mu_normalized: Vec<f64>) -> Self {
        Self {
            rho,
            mu_normalized,
            previous_xi: None,
        }
    }

    /// Duals μ_k in the Lagrangian's own units at `eval`.
    pub fn duals(&self, eval: &Evaluation, targets: &[f64]) -> Vec<f64> {
        let (_, slope) = gradient_units(eval, targets);
        self.mu_normalized
            .iter()
            .zip(&slope)
            .map(|(m, g)| m / g)
            .collect()
    }

    /// One primal step on ρ followed by one dual step on μ, both evaluated
    /// at `eval` (which must correspond to `self.rho`).
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        eval: &Evaluation,
        channels: &ChannelState,
        targets: &[f64],
        provider: &dyn DerivativeProvider,
        config: &OptimizerConfig,
        iteration: usize,
    ) -> Result<()> {
        let objective = Objective::MinPower {
            targets: targets.to_vec(),
        };
        let bundle = provider.bundle(&eval.model, channels, &eval.point)?;
        let (unit, slope) = gradient_units(eval, targets);
        let duals = DualState {
            mu: self.duals(eval, targets),
            upsilon: vec![0.0; eval.point.sigma.len()],
            eta: vec![0.0; self.rho.len()],
        };
        let grad = lagrangian_grad_rho(eval, channels, &objective, &bundle, &duals);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration });
        }
        let xi: Vec<f64> = constraint_values(eval, &objective)
            .iter()
            .enumerate()
            .map(|(k, x)| {
                if unit[k] > 0.0 {
                    x / (slope[k] * unit[k])
                } else {
                    0.0
                }
            })
            .collect();
        let ceiling = dbm_to_watts(config.rho_ceiling_dbm);
        for k in 0..self.rho.len() {
            self.rho[k] = (self.rho[k] - config.zeta_rho * unit[k] * grad[k]).clamp(0.0, ceiling);
            let trend = self.previous_xi.as_ref().map_or(0.0, |p| xi[k] - p[k]);
            self.mu_normalized[k] =
                (self.mu_normalized[k] - config.nu * xi[k] - config.nu_damping * trend).max(0.0);
        }
        self.previous_xi = Some(xi);
        Ok(())
    }
}

/// Random start of the gradient method: ρ log-uniform over the configured
/// dBm range, normalized μ uniform in (0, 1].
pub fn gradient_start(config: &OptimizerConfig, num_ue: usize) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng::stream(config.seed, rng::STREAM_OPT_INIT);
    let [lo, hi] = config.gradient_init_dbm;
    let rho = (0..num_ue)
        .map(|_| dbm_to_watts(if hi > lo { r.gen_range(lo..hi) } else { lo }))
        .collect();
    let mu = (0..num_ue).map(|_| 1.0 - r.gen::<f64>()).collect();
    (rho, mu)
}

/// Min-power gradient method with analytic derivatives.
pub fn minpower_gradient(problem: &PowerProblem, config: &OptimizerConfig) -> Result<OptRunRecord> {
    minpower_gradient_with(problem, config, &AnalyticDerivatives)
}

pub fn minpower_gradient_with(
    problem: &PowerProblem,
    config: &OptimizerConfig,
    provider: &dyn DerivativeProvider,
) -> Result<OptRunRecord> {
    config.validate()?;
    problem.validate()?;
    let (rho0, mu0) = gradient_start(config, problem.num_ue());
    let mut eval = problem.evaluate(&rho0)?;
    let mut state = GradientPowerState::new(rho0, mu0);
    let mut iterates = vec![iterate(&eval, true)];
    let mut termination = Termination::MaxIters;
    for i in 1..=config.max_iters {
        if problem.targets_tight(&eval.sindr, config.sindr_tol) {
            termination = Termination::TargetsMet;
            break;
        }
        state.step(
            &eval,
            problem.channels,
            &problem.targets,
            provider,
            config,
            i,
        )?;
        eval = problem.evaluate(&state.rho)?;
        iterates.push(iterate(&eval, true));
    }
    if termination == Termination::MaxIters && problem.targets_tight(&eval.sindr, config.sindr_tol)
    {
        termination = Termination::TargetsMet;
    }
    let best = iterates.last().expect("non-empty").clone();
    Ok(OptRunRecord {
        iterates,
        termination,
        best,
    })
}

/// Ratio of two powers in dB.
pub fn power_gap_db(a: f64, b: f64) -> f64 {
    linear_to_db(a / b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, draw_channels, GeometryConfig, Layout};
    use crate::instances::random_instance;
    use crate::receivers::sindr_at;

    fn single_ue_channels(antennas: usize, seed: u64) -> (ChannelState, f64) {
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
        let g = build_geometry(&cfg).unwrap();
        (draw_channels(&g, seed).unwrap(), dbm_to_watts(-95.0).sqrt())
    }

    /// Smallest power on a 0.01 dB grid meeting the target, and the SNDR peak.
    fn grid_oracle(
        ch: &ChannelState,
        sigma: f64,
        kind: ReceiverKind,
        target: f64,
    ) -> (Option<f64>, f64) {
        let mut first = None;
        let mut peak = 0f64;
        let mut dbm = -60.0;
        while dbm <= 40.0 {
            let rho = dbm_to_watts(dbm);
            let p = PowerDitherPoint::new(vec![rho], vec![sigma], sigma).unwrap();
            let g = sindr_at(ch, &p, kind, Quantizer::OneBit).unwrap()[0];
            peak = peak.max(g);
            if first.is_none() && g >= target {
                first = Some(rho);
            }
            dbm += 0.01;
        }
        (first, peak)
    }

    #[test]
    fn selection_and_scaling_rules() {
        assert_eq!(select_ue(&[4.0, 4.0], &[1.0, 2.0]), 0);
        assert_eq!(scale_factor(3.0, 5.0, 1.0), 3.0);
        assert_eq!(scale_factor(3.0, 2.0, 1.0), 2.0);
    }

    #[test]
    fn zero_targets_terminate_immediately() {
        let inst = random_instance(1, 2, 2, 2, 0.0);
        let p = PowerProblem::new(
            &inst.channels,
            ReceiverKind::Bmmse,
            inst.point.sigma.clone(),
            1e-6,
        );
        let cfg = OptimizerConfig::default();
        let g = minpower_gradient(&p, &cfg).unwrap();
        assert_eq!(g.termination, Termination::TargetsMet);
        assert_eq!(g.iterates.len(), 1);
        assert_eq!(g.best.rho, gradient_start(&cfg, 2).0);
        let b = minpower_bcd(&p, &cfg).unwrap();
        assert_eq!(b.termination, Termination::TargetsMet);
        assert_eq!(b.iterates.len(), 1);
    }

    #[test]
    fn single_ue_matches_grid_search() {
        let (ch, sigma) = single_ue_channels(16, 3);
        let cfg = OptimizerConfig::default();
        for kind in ReceiverKind::ALL {
            let (_, peak) = grid_oracle(&ch, sigma, kind, f64::INFINITY);
            let target = 0.5 * peak;
            let (oracle, _) = grid_oracle(&ch, sigma, kind, target);
            let oracle = oracle.unwrap();
            let p = PowerProblem::new(&ch, kind, vec![sigma], sigma).with_targets(vec![target]);

            let bcd = minpower_bcd(&p, &cfg).unwrap();
            assert_eq!(bcd.termination, Termination::TargetsMet, "{kind}");
            let gap = power_gap_db(bcd.best.rho[0], oracle).abs();
            assert!(
                gap <= 10.0 * cfg.alpha.log10() && gap <= 0.1,
                "{kind} bcd gap {gap}"
            );

            let grad = minpower_gradient(&p, &cfg).unwrap();
            assert_eq!(grad.termination, Termination::TargetsMet, "{kind}");
            assert!((grad.best.sindr[0] / target - 1.0).abs() <= 0.01, "{kind}");
            let gap = power_gap_db(grad.best.rho[0], oracle).abs();
            assert!(gap <= 0.1, "{kind} gradient gap {gap}");
        }
    }

    #[test]
    fn infeasible_target_is_reported() {
        let (ch, sigma) = single_ue_channels(8, 5);
        let cfg = OptimizerConfig::default();
        for kind in ReceiverKind::ALL {
            let (_, peak) = grid_oracle(&ch, sigma, kind, f64::INFINITY);
            let p = PowerProblem::new(&ch, kind, vec![sigma], sigma).with_targets(vec![2.0 * peak]);
            let grad = minpower_gradient(&p, &cfg).unwrap();
            assert_eq!(grad.termination, Termination::MaxIters);
            assert!(grad.best.sindr[0] < 2.0 * peak);
            let bcd = minpower_bcd(&p, &cfg).unwrap();
            assert_eq!(bcd.termination, Termination::QdRegionPerUe);
            assert!(bcd.best.sindr[0] <= peak * (1.0 + 1e-9));
        }
    }

    #[test]
    fn maxmin_single_ue_reaches_peak() {
        let (ch, sigma) = single_ue_channels(16, 7);
        let cfg = OptimizerConfig::default();
        for kind in ReceiverKind::ALL {
            let (_, peak) = grid_oracle(&ch, sigma, kind, f64::INFINITY);
            let p = PowerProblem::new(&ch, kind, vec![sigma], sigma).with_cap(dbm_to_watts(40.0));
            let run = maxmin_bcd(&p, &cfg).unwrap();
            assert_ne!(run.termination, Termination::MaxIters);
            // One β step around the peak moves the SNDR by a small fraction.
            assert!(run.best.objective <= peak * (1.0 + 1e-9));
            assert!(
                run.best.objective >= 0.97 * peak,
                "{} vs {peak}",
                run.best.objective
            );
        }
    }

    #[test]
    fn maxmin_trace_bookkeeping() {
        let inst = random_instance(4, 2, 4, 3, 0.0);
        let p = PowerProblem::new(
            &inst.channels,
            ReceiverKind::Bmrc,
            inst.point.sigma.clone(),
            1e-6,
        )
        .with_cap(dbm_to_watts(25.0));
        let run = maxmin_bcd(&p, &OptimizerConfig::default()).unwrap();
        for it in &run.iterates {
            assert_eq!(it.objective, it.min_sindr());
            assert!(it.rho.iter().all(|r| *r <= p.rho_ue_max));
        }
        let best = run
            .iterates
            .iter()
            .map(|i| i.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.best.objective, best);
    }

    #[test]
    fn maxmin_power_cap_is_respected() {
        let inst = random_instance(6, 1, 4, 2, 0.0);
        let cap = dbm_to_watts(-25.0);
        let p = PowerProblem::new(
            &inst.channels,
            ReceiverKind::Bmmse,
            inst.point.sigma.clone(),
            1e-6,
        )
        .with_cap(cap);
        let run = maxmin_bcd(&p, &OptimizerConfig::default()).unwrap();
        assert_eq!(run.termination, Termination::PowerCapHit);
        assert!(run.best.rho.iter().all(|r| *r <= cap));
    }

    #[test]
    fn bcd_selected_ue_improves_every_accepted_iteration() {
        for seed in 0..10 {
            let inst = random_instance(seed, 2, 4, 3, 0.0);
            let targets = vec![2.0, 1.0, 3.0];
            let p = PowerProblem::new(
                &inst.channels,
                ReceiverKind::Bmmse,
                inst.point.sigma.clone(),
                1e-6,
            )
            .with_targets(targets.clone());
            let run = minpower_bcd(&p, &OptimizerConfig::default()).unwrap();
            for w in run.iterates.windows(2) {
                let k = select_ue(&targets, &w[0].sindr);
                assert!(w[1].sindr[k] > w[0].sindr[k]);
                assert!(w[1].rho[k] > w[0].rho[k]);
            }
        }
    }

    #[test]
    fn unquantized_system_never_triggers_all_ue_detector() {
        use rand::Rng;
        let mut r = rng::stream(99, 0);
        for run in 0..1000u64 {
            let k = 1 + (run % 3) as usize;
            let inst = random_instance(run, 2, 2, k, 0.0);
            let kind = if run % 2 == 0 {
                ReceiverKind::Bmrc
            } else {
                ReceiverKind::Bmmse
            };
            let targets: Vec<f64> = (0..k).map(|_| 10f64.powf(r.gen_range(-1.0..3.0))).collect();
            let p = PowerProblem::new(&inst.channels, kind, inst.point.sigma.clone(), 1e-6)
                .with_targets(targets)
                .with_cap(dbm_to_watts(30.0))
                .with_quantizer(Quantizer::Unquantized);
            let cfg = OptimizerConfig {
                max_iters: 60,
                ..OptimizerConfig::default()
            };
            let a = minpower_bcd(&p, &cfg).unwrap();
            assert_ne!(a.termination, Termination::QdRegionAllUes, "run {run}");
            assert_ne!(a.termination, Termination::QdRegionPerUe, "run {run}");
            let b = maxmin_bcd(&p, &cfg).unwrap();
            assert_ne!(b.termination, Termination::QdRegionPerUe, "run {run}");
            assert_ne!(b.termination, Termination::QdRegionAllUes, "run {run}");
        }
    }

    #[test]
    fn csv_has_one_row_per_iterate() {
        let inst = random_instance(2, 1, 4, 2, 0.0);
        let p = PowerProblem::new(
            &inst.channels,
            ReceiverKind::Bmrc,
            inst.point.sigma.clone(),
            1e-6,
        )
        .with_targets(vec![0.5, 0.5]);
        let run = minpower_bcd(&p, &OptimizerConfig::default()).unwrap();
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), run.iterates.len() + 1);
        assert!(
            text.starts_with("iteration,rho_dbm_0,rho_dbm_1,sindr_0,sindr_1,objective,termination")
        );
    }
}
