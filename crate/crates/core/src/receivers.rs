//! Bussgang-based MRC / MMSE receivers and the per-UE SINDR.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::ChannelState;
use crate::linalg::{quad_form, CVec, HermitianSolver, C64};
use crate::quantized::{PowerDitherPoint, QuantizedModel, Quantizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReceiverKind {
    Bmrc,
    Bmmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 2] = [ReceiverKind::Bmrc, ReceiverKind::Bmmse];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Bmrc => "bmrc",
            ReceiverKind::Bmmse => "bmmse",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bmrc" => Ok(ReceiverKind::Bmrc),
            "bmmse" => Ok(ReceiverKind::Bmmse),
            other => Err(format!(
                "unknown receiver `{other}` (expected bmrc or bmmse)"
            )),
        }
    }
}

/// Combining vectors w_k for every UE.
#[derive(Clone, Debug)]
pub struct ReceiverBank {
    pub kind: ReceiverKind,
    pub w: Vec<CVec>,
}

/// w_k = Â ĥ_k.
pub fn bmrc(model: &QuantizedModel, channels: &ChannelState) -> ReceiverBank {
    ReceiverBank {
        kind: ReceiverKind::Bmrc,
        w: channels.h_hat.iter().map(|h| model.apply_gain(h)).collect(),
    }
}

/// w_k = √ρ_k C_r̂^{-1} Â ĥ_k.
pub fn bmmse(model: &QuantizedModel, channels: &ChannelState, rho: &[f64]) -> Result<ReceiverBank> {
    let solver = HermitianSolver::new(&model.c_r)?;
    Ok(ReceiverBank {
        kind: ReceiverKind::Bmmse,
        w: channels
            .h_hat
            .iter()
            .zip(rho)
            .map(|(h, r)| solver.solve(&model.apply_gain(h)) * C64::new(r.sqrt(), 0.0))
            .collect(),
    })
}

pub fn build_receivers(
    kind: ReceiverKind,
    model: &QuantizedModel,
    channels: &ChannelState,
    rho: &[f64],
) -> Result<ReceiverBank> {
    match kind {
        ReceiverKind::Bmrc => Ok(bmrc(model, channels)),
        ReceiverKind::Bmmse => bmmse(model, channels, rho),
    }
}

/// Per-UE SINDR values together with the targets they were judged against.
#[derive(Clone, Debug, PartialEq)]
pub struct SindrReport {
    pub sindr: Vec<f64>,
    pub gamma_target: Vec<f64>,
}

impl SindrReport {
    pub fn min(&self) -> f64 {
        self.sindr.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn targets_met(&self, slack: f64) -> bool {
        self.sindr
            .iter()
            .zip(&self.gamma_target)
            .all(|(g, t)| *g >= t * (1.0 - slack))
    }
}

fn ratio(ue: usize, signal: f64, total: f64) -> Result<f64> {
    let denominator = total - signal;
    if !(denominator > 0.0) || !denominator.is_finite() {
        return Err(Error::DegenerateSindr { ue, denominator });
    }
    Ok(signal / denominator)
}

/// Generic SINDR of any linear receiver,
/// γ̂_k = ρ_k |w_k^H Â ĥ_k|² / (w_k^H C_r̂ w_k − ρ_k |w_k^H Â ĥ_k|²).
pub fn sindr(
    model: &QuantizedModel,
    channels: &ChannelState,
    rho: &[f64],
    bank: &ReceiverBank,
) -> Result<SindrReport> {
    let mut out = Vec::with_capacity(rho.len());
    for (k, w) in bank.w.iter().enumerate() {
        let g = w.dotc(&model.apply_gain(&channels.h_hat[k]));
        let signal = rho[k] * g.norm_sqr();
        let total = quad_form(w, &model.c_r, w).re;
        out.push(ratio(k, signal, total)?);
    }
    Ok(SindrReport {
        sindr: out,
        gamma_target: vec![0.0; rho.len()],
    })
}

/// SINDR with the denominator written term by term: estimation error,
/// inter-UE interference, filtered noise and quantization distortion.
pub fn sindr_expanded(
    model: &QuantizedModel,
    channels: &ChannelState,
    point: &PowerDitherPoint,
    bank: &ReceiverBank,
) -> Result<Vec<f64>> {
    let m = channels.antennas;
    let rho = &point.rho;
    let mut out = Vec::with_capacity(rho.len());
    for (k, w) in bank.w.iter().enumerate() {
        let aw = model.apply_gain(w);
        let signal = rho[k] * aw.dotc(&channels.h_hat[k]).norm_sqr();
        let mut den = 0.0;
        for (j, r) in rho.iter().enumerate() {
            den += r * quad_form(&aw, &channels.c_err[j], &aw).re;
            if j != k {
                den += r * aw.dotc(&channels.h_hat[j]).norm_sqr();
            }
        }
        den += aw
            .iter()
            .enumerate()
            .map(|(i, x)| point.sigma[i / m].powi(2) * x.norm_sqr())
            .sum::<f64>();
        den += quad_form(w, &model.c_q, w).re;
        if !(den > 0.0) {
            return Err(Error::DegenerateSindr {
                ue: k,
                denominator: den,
            });
        }
        out.push(signal / den);
    }
    Ok(out)
}

/// Receiver-specific quadratic forms at one operating point.
///
/// `u_k = Â ĥ_k`. For BMRC `v_k = C_r̂ u_k`; for BMMSE `v_k = C_r̂^{-1} u_k`.
/// `x_k = u_k^H u_k` and `q_k = u_k^H v_k`, so that
/// BMRC: γ̂_k = ρ_k x_k² / (q_k − ρ_k x_k²) and BMMSE: γ̂_k = ρ_k q_k / (1 − ρ_k q_k).
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub kind: ReceiverKind,
    pub model: QuantizedModel,
    pub point: PowerDitherPoint,
    pub u: Vec<CVec>,
    pub v: Vec<CVec>,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub sindr: Vec<f64>,
}

impl Evaluation {
    pub fn min_sindr(&self) -> f64 {
        self.sindr.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_sindr(&self) -> f64 {
        self.sindr.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The receiver bank these forms correspond to.
    pub fn receivers(&self) -> ReceiverBank {
        let w = match self.kind {
            ReceiverKind::Bmrc => self.u.clone(),
            ReceiverKind::Bmmse => self
                .v
                .iter()
                .zip(&self.point.rho)
                .map(|(v, r)| v * C64::new(r.sqrt(), 0.0))
                .collect(),
        };
        ReceiverBank { kind: self.kind, w }
    }
}

/// Closed-form SINDR for the chosen receiver at `point`.
pub fn evaluate(
    channels: &ChannelState,
    point: &PowerDitherPoint,
    kind: ReceiverKind,
    quantizer: Quantizer,
) -> Result<Evaluation> {
    let model = QuantizedModel::new(channels, point, quantizer)?;
    evaluate_model(model, channels, point, kind)
}

pub fn evaluate_model(
    model: QuantizedModel,
    channels: &ChannelState,
    point: &PowerDitherPoint,
    kind: ReceiverKind,
) -> Result<Evaluation> {
    let u: Vec<CVec> = channels.h_hat.iter().map(|h| model.apply_gain(h)).collect();
    let v: Vec<CVec> = match kind {
        ReceiverKind::Bmrc => u.iter().map(|x| &model.c_r * x).collect(),
        ReceiverKind::Bmmse => {
            let solver = HermitianSolver::new(&model.c_r)?;
            u.iter().map(|x| solver.solve(x)).collect()
        }
    };
    let x: Vec<f64> = u.iter().map(|x| x.norm_squared()).collect();
    let q: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.dotc(b).re).collect();
    let mut sindr = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let rho = point.rho[k];
        let value = match kind {
            ReceiverKind::Bmrc => ratio(k, rho * x[k] * x[k], q[k])?,
            ReceiverKind::Bmmse => ratio(k, rho * q[k], 1.0)?,
        };
        sindr.push(value);
    }
    Ok(Evaluation {
        kind,
        model,
        point: point.clone(),
        u,
        v,
        x,
        q,
        sindr,
    })
}

/// Convenience: SINDR vector only.
pub fn sindr_at(
    channels: &ChannelState,
    point: &PowerDitherPoint,
    kind: ReceiverKind,
    quantizer: Quantizer,
) -> Result<Vec<f64>> {
    evaluate(channels, point, kind, quantizer).map(|e| e.sindr)
}
