//! Analytic derivatives of Â and C_r̂ with respect to the transmit powers and
//! dithering levels, and the Lagrangian gradients built on them.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ChannelState;
use crate::linalg::{quad_form, CMat, CVec, C64};
use crate::quantized::{PowerDitherPoint, QuantizedModel, Quantizer};
use crate::receivers::{evaluate, Evaluation, ReceiverKind};

/// Normalized correlations beyond this magnitude are clamped before the
/// arcsine derivative is taken.
pub const SINGULARITY_CLAMP: f64 = 1.0 - 1e-6;

/// Derivatives of the Bussgang quantities at one operating point.
#[derive(Clone, Debug)]
pub struct DerivativeBundle {
    /// Diagonal of ∂Â/∂ρ_k, one entry per UE.
    pub da_drho: Vec<DVector<f64>>,
    pub dcr_drho: Vec<CMat>,
    /// Diagonal of ∂Â/∂σ_b, one entry per RRH.
    pub da_dsigma: Vec<DVector<f64>>,
    pub dcr_dsigma: Vec<CMat>,
}

/// ∂Ĉ_y/∂ρ_k = ĥ_k ĥ_k^H + C_{h̃_k}.
pub fn dcy_drho(channels: &ChannelState, k: usize) -> CMat {
    let h = &channels.h_hat[k];
    let mut g = channels.c_err[k].clone();
    g.gerc(C64::new(1.0, 0.0), h, h, C64::new(1.0, 0.0));
    g
}

/// Diagonal of ∂Ĉ_y/∂σ_b = 2σ_b E_b.
pub fn dcy_dsigma_diag(model: &QuantizedModel, point: &PowerDitherPoint, b: usize) -> DVector<f64> {
    model.block_mask(b) * (2.0 * point.sigma[b])
}

/// ∂Â given the diagonal of ∂Ĉ_y: −√(1/2π) diag(Ĉ_y)^{-3/2} diag(∂Ĉ_y).
fn da_from_dcy_diag(model: &QuantizedModel, dcy_diag: &DVector<f64>) -> DVector<f64> {
    match model.quantizer {
        Quantizer::Unquantized => DVector::zeros(model.dim()),
        Quantizer::OneBit => {
            let s = (0.5 / PI).sqrt();
            DVector::from_iterator(
                model.dim(),
                (0..model.dim()).map(|i| -s * model.c_y[(i, i)].re.powf(-1.5) * dcy_diag[i]),
            )
        }
    }
}

/// Derivative of (2/π)·asin(x) where x = c/√(c_ii c_jj) and the three inputs
/// move by (dc, dc_ii, dc_jj).
fn darcsine(
    c: f64,
    dc: f64,
    cii: f64,
    cjj: f64,
    dii: f64,
    djj: f64,
    i: usize,
    j: usize,
) -> Result<f64> {
    let s = 1.0 / (cii * cjj).sqrt();
    let mut x = c * s;
    if !x.is_finite() || x.abs() >= 1.0 {
        return Err(Error::DerivativeSingularity { i, j, value: x });
    }
    if x.abs() > SINGULARITY_CLAMP {
        log::warn!("normalized correlation {x} at ({i}, {j}) clamped for the arcsine derivative");
        x = SINGULARITY_CLAMP.copysign(x);
    }
    let dx = dc * s - 0.5 * x * (dii / cii + djj / cjj);
    Ok(FRAC_2_PI * dx / (1.0 - x * x).sqrt())
}

/// ∂C_r̂ for a perturbation `dcy` of Ĉ_y (zero diagonal, Hermitian).
fn dcr_from_dcy(model: &QuantizedModel, dcy: &CMat) -> Result<CMat> {
    if model.quantizer == Quantizer::Unquantized {
        return Ok(dcy.clone());
    }
    let n = model.dim();
    let c = &model.c_y;
    let mut out = CMat::zeros(n, n);
    for j in 0..n {
        let (cjj, djj) = (c[(j, j)].re, dcy[(j, j)].re);
        for i in 0..j {
            let (cii, dii) = (c[(i, i)].re, dcy[(i, i)].re);
            let re = darcsine(c[(i, j)].re, dcy[(i, j)].re, cii, cjj, dii, djj, i, j)?;
            let im = darcsine(c[(i, j)].im, dcy[(i, j)].im, cii, cjj, dii, djj, i, j)?;
            out[(i, j)] = C64::new(re, im);
            out[(j, i)] = C64::new(re, -im);
        }
    }
    Ok(out)
}

pub fn d_bussgang_d_rho(model: &QuantizedModel, channels: &ChannelState, k: usize) -> DVector<f64> {
    let h = &channels.h_hat[k];
    let diag = DVector::from_iterator(
        model.dim(),
        (0..model.dim()).map(|i| h[i].norm_sqr() + channels.c_err[k][(i, i)].re),
    );
    da_from_dcy_diag(model, &diag)
}

pub fn d_cr_d_rho(model: &QuantizedModel, channels: &ChannelState, k: usize) -> Result<CMat> {
    dcr_from_dcy(model, &dcy_drho(channels, k))
}

pub fn d_bussgang_d_sigma(
    model: &QuantizedModel,
    point: &PowerDitherPoint,
    b: usize,
) -> DVector<f64> {
    da_from_dcy_diag(model, &dcy_dsigma_diag(model, point, b))
}

pub fn d_cr_d_sigma(model: &QuantizedModel, point: &PowerDitherPoint, b: usize) -> Result<CMat> {
    let d = dcy_dsigma_diag(model, point, b);
    dcr_from_dcy(model, &CMat::from_diagonal(&d.map(|x| C64::new(x, 0.0))))
}

impl DerivativeBundle {
    pub fn compute(
        model: &QuantizedModel,
        channels: &ChannelState,
        point: &PowerDitherPoint,
    ) -> Result<Self> {
        let num_ue = channels.num_ue();
        let rho: Vec<(DVector<f64>, CMat)> = (0..num_ue)
            .into_par_iter()
            .map(|k| {
                Ok((
                    d_bussgang_d_rho(model, channels, k),
                    d_cr_d_rho(model, channels, k)?,
                ))
            })
            .collect::<Result<_>>()?;
        let sigma: Vec<(DVector<f64>, CMat)> = (0..model.num_rrh)
            .into_par_iter()
            .map(|b| {
                Ok((
                    d_bussgang_d_sigma(model, point, b),
                    d_cr_d_sigma(model, point, b)?,
                ))
            })
            .collect::<Result<_>>()?;
        let (da_drho, dcr_drho) = rho.into_iter().unzip();
        let (da_dsigma, dcr_dsigma) = sigma.into_iter().unzip();
        Ok(Self {
            da_drho,
            dcr_drho,
            da_dsigma,
            dcr_dsigma,
        })
    }
}

/// Source of derivative bundles. The analytic implementation is the default;
/// the validation harness swaps in deliberately broken ones to prove it can
/// tell the difference.
pub trait DerivativeProvider: Sync {
    fn bundle(
        &self,
        model: &QuantizedModel,
        channels: &ChannelState,
        point: &PowerDitherPoint,
    ) -> Result<DerivativeBundle>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyticDerivatives;

impl DerivativeProvider for AnalyticDerivatives {
    fn bundle(
        &self,
        model: &QuantizedModel,
        channels: &ChannelState,
        point: &PowerDitherPoint,
    ) -> Result<DerivativeBundle> {
        DerivativeBundle::compute(model, channels, point)
    }
}

/// Which Lagrangian is being differentiated.
#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// Minimize Σρ_k subject to γ̂_k ≥ γ_k^Tar.
    MinPower { targets: Vec<f64> },
    /// Maximize the common SINDR level γ.
    MaxMin { gamma: f64 },
}

impl Objective {
    pub fn target(&self, k: usize) -> f64 {
        match self {
            Objective::MinPower { targets } => targets[k],
            Objective::MaxMin { gamma } => *gamma,
        }
    }

    /// SINDR-constraint duals for this objective (μ or η).
    pub fn sindr_duals<'a>(&self, duals: &'a DualState) -> &'a [f64] {
        match self {
            Objective::MinPower { .. } => &duals.mu,
            Objective::MaxMin { .. } => &duals.eta,
        }
    }

    fn sindr_duals_mut<'a>(&self, duals: &'a mut DualState) -> &'a mut Vec<f64> {
        match self {
            Objective::MinPower { .. } => &mut duals.mu,
            Objective::MaxMin { .. } => &mut duals.eta,
        }
    }
}

/// Step sizes of the primal-dual updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub zeta_rho: f64,
    pub zeta_sigma: f64,
    pub nu: f64,
    pub kappa: f64,
}

/// Dual variables: μ (min-power SINDR), η (max-min SINDR), υ (dithering floor).
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub eta: Vec<f64>,
}

impl DualState {
    pub fn new(mu: Vec<f64>, upsilon: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let d = Self { mu, upsilon, eta };
        if d.mu
            .iter()
            .chain(&d.upsilon)
            .chain(&d.eta)
            .any(|x| !(*x >= 0.0))
        {
            return Err(Error::domain("dual variables must be non-negative"));
        }
        Ok(d)
    }

    pub fn zeros(num_ue: usize, num_rrh: usize) -> Self {
        Self {
            mu: vec![0.0; num_ue],
            upsilon: vec![0.0; num_rrh],
            eta: vec![0.0; num_ue],
        }
    }

    /// μ_k ← max(0, μ_k − ν ξ_k) (or η for the max-min objective).
    pub fn update_sindr_duals(&mut self, objective: &Objective, xi: &[f64], nu: f64) {
        for (d, x) in objective.sindr_duals_mut(self).iter_mut().zip(xi) {
            *d = (*d - nu * x).max(0.0);
        }
    }

    /// υ_b ← max(0, υ_b − κ (σ_b − σ_min)).
    pub fn update_floor_duals(&mut self, sigma: &[f64], sigma_min: f64, kappa: f64) {
        for (u, s) in self.upsilon.iter_mut().zip(sigma) {
            *u = (*u - kappa * (s - sigma_min)).max(0.0);
        }
    }
}

/// SINDR constraint values ξ_k (≥ 0 when UE k meets its target).
///
/// BMRC: (γ+1) ρ_k x_k² − γ q_k. BMMSE: (γ+1) ρ_k q_k − γ.
pub fn constraint_values(eval: &Evaluation, objective: &Objective) -> Vec<f64> {
    (0..eval.sindr.len())
        .map(|k| {
            let g = objective.target(k);
            let rho = eval.point.rho[k];
            match eval.kind {
                ReceiverKind::Bmrc => (g + 1.0) * rho * eval.x[k] * eval.x[k] - g * eval.q[k],
                ReceiverKind::Bmmse => (g + 1.0) * rho * eval.q[k] - g,
            }
        })
        .collect()
}

/// Â-perturbed channel: ∂Â ĥ.
fn scale(d: &DVector<f64>, h: &CVec) -> CVec {
    CVec::from_iterator(h.len(), h.iter().zip(d.iter()).map(|(x, a)| x * *a))
}

/// Implicit part of ∂ξ_k/∂p through Â and C_r̂ (the explicit ρ_k term is
/// added by the caller).
fn constraint_sensitivity(
    eval: &Evaluation,
    channels: &ChannelState,
    k: usize,
    target: f64,
    da: &DVector<f64>,
    dcr: &CMat,
) -> f64 {
    let dah = scale(da, &channels.h_hat[k]);
    let u = &eval.u[k];
    let v = &eval.v[k];
    let rho = eval.point.rho[k];
    match eval.kind {
        ReceiverKind::Bmrc => {
            let dx = 2.0 * dah.dotc(u).re;
            let dy = 2.0 * dah.dotc(v).re + quad_form(u, dcr, u).re;
            (target + 1.0) * rho * 2.0 * eval.x[k] * dx - target * dy
        }
        ReceiverKind::Bmmse => {
            let dz = 2.0 * dah.dotc(v).re - quad_form(v, dcr, v).re;
            (target + 1.0) * rho * dz
        }
    }
}

/// ∂ξ_k/∂ρ_j for all k, j (row k, column j).
pub fn constraint_jacobian_rho(
    eval: &Evaluation,
    channels: &ChannelState,
    objective: &Objective,
    bundle: &DerivativeBundle,
) -> Vec<Vec<f64>> {
    let num_ue = eval.sindr.len();
    (0..num_ue)
        .map(|k| {
            let g = objective.target(k);
            (0..num_ue)
                .map(|j| {
                    let mut d = constraint_sensitivity(
                        eval,
                        channels,
                        k,
                        g,
                        &bundle.da_drho[j],
                        &bundle.dcr_drho[j],
                    );
                    if j == k {
                        d += match eval.kind {
                            ReceiverKind::Bmrc => (g + 1.0) * eval.x[k] * eval.x[k],
                            ReceiverKind::Bmmse => (g + 1.0) * eval.q[k],
                        };
                    }
                    d
                })
                .collect()
        })
        .collect()
}

/// ∂ξ_k/∂σ_b for all k, b (row k, column b).
pub fn constraint_jacobian_sigma(
    eval: &Evaluation,
    channels: &ChannelState,
    objective: &Objective,
    bundle: &DerivativeBundle,
) -> Vec<Vec<f64>> {
    (0..eval.sindr.len())
        .map(|k| {
            let g = objective.target(k);
            (0..bundle.da_dsigma.len())
                .map(|b| {
                    constraint_sensitivity(
                        eval,
                        channels,
                        k,
                        g,
                        &bundle.da_dsigma[b],
                        &bundle.dcr_dsigma[b],
                    )
                })
                .collect()
        })
        .collect()
}

/// Lagrangian value.
///
/// MinPower: Σ_k ρ_k − Σ_k μ_k ξ_k − Σ_b υ_b (σ_b − σ_min).
/// MaxMin: γ − Σ_k η_k χ_k − Σ_b υ_b (σ_b − σ_min).
pub fn lagrangian_value(eval: &Evaluation, objective: &Objective, duals: &DualState) -> f64 {
    let xi = constraint_values(eval, objective);
    let lead = match objective {
        Objective::MinPower { .. } => eval.point.rho.iter().sum::<f64>(),
        Objective::MaxMin { gamma } => *gamma,
    };
    let sindr_term: f64 = objective
        .sindr_duals(duals)
        .iter()
        .zip(&xi)
        .map(|(d, x)| d * x)
        .sum();
    let floor_term: f64 = duals
        .upsilon
        .iter()
        .zip(&eval.point.sigma)
        .map(|(u, s)| u * (s - eval.point.sigma_min))
        .sum();
    lead - sindr_term - floor_term
}

/// Same as [`lagrangian_value`] but evaluated from scratch at `point`.
pub fn lagrangian_at(
    channels: &ChannelState,
    point: &PowerDitherPoint,
    kind: ReceiverKind,
    quantizer: Quantizer,
    objective: &Objective,
    duals: &DualState,
) -> Result<f64> {
    let eval = evaluate(channels, point, kind, quantizer)?;
    Ok(lagrangian_value(&eval, objective, duals))
}

/// ∂L/∂ρ_j. The MinPower Lagrangian carries the leading 1 from Σρ_k; the
/// MaxMin one does not depend on ρ except through the constraints.
pub fn lagrangian_grad_rho(
    eval: &Evaluation,
    channels: &ChannelState,
    objective: &Objective,
    bundle: &DerivativeBundle,
    duals: &DualState,
) -> Vec<f64> {
    let jac = constraint_jacobian_rho(eval, channels, objective, bundle);
    weighted_gradient(
        &jac,
        objective.sindr_duals(duals),
        eval.sindr.len(),
        |_| match objective {
            Objective::MinPower { .. } => 1.0,
            Objective::MaxMin { .. } => 0.0,
        },
    )
}

/// ∂L/∂σ_b = −Σ_k μ_k ∂ξ_k/∂σ_b − υ_b (η in place of μ for MaxMin).
pub fn lagrangian_grad_sigma(
    eval: &Evaluation,
    channels: &ChannelState,
    objective: &Objective,
    bundle: &DerivativeBundle,
    duals: &DualState,
) -> Vec<f64> {
    let jac = constraint_jacobian_sigma(eval, channels, objective, bundle);
    weighted_gradient(
        &jac,
        objective.sindr_duals(duals),
        bundle.da_dsigma.len(),
        |b| -duals.upsilon[b],
    )
}

fn weighted_gradient(
    jac: &[Vec<f64>],
    weights: &[f64],
    cols: usize,
    lead: impl Fn(usize) -> f64,
) -> Vec<f64> {
    (0..cols)
        .map(|j| {
            lead(j)
                - jac
                    .iter()
                    .zip(weights)
                    .map(|(row, w)| w * row[j])
                    .sum::<f64>()
        })
        .collect()
}

/// Step for central finite differences of a parameter `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(f64::MIN_POSITIVE)
}

/// Normwise relative error max|a − b| / max|b|, with a tiny absolute floor.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(reference)
        .fold(0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
