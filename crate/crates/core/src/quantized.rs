//! 1-bit quantizer and the Bussgang quantities built from the estimated
//! received covariance: Ĉ_y, Â, C_r̂ and C_q̂.

use nalgebra::DVector;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_PI};

use crate::error::{Error, Result};
use crate::geometry::ChannelState;
use crate::linalg::{CMat, CVec, C64};

/// Slack allowed on normalized correlations before the arcsine.
pub const ARCSINE_TOLERANCE: f64 = 1e-9;

/// Sign with `sgn(0) = +1`.
#[inline]
fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[inline]
pub fn quantize_scalar(y: C64) -> C64 {
    C64::new(sgn(y.re) * FRAC_1_SQRT_2, sgn(y.im) * FRAC_1_SQRT_2)
}

/// Entry-wise 1-bit quantization of in-phase and quadrature parts.
pub fn quantize(y: &CVec) -> CVec {
    y.map(quantize_scalar)
}

/// Operating point: UE transmit powers and RRH dithering levels.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerDitherPoint {
    /// UE transmit powers, watts.
    pub rho: Vec<f64>,
    /// Per-RRH dithering standard deviation, √W.
    pub sigma: Vec<f64>,
    /// Floor on `sigma` (thermal noise), √W.
    pub sigma_min: f64,
    /// Per-UE power cap of the max-min design, watts.
    pub rho_ue_max: f64,
    /// Reference power used by the min-power line-search fallback, watts.
    pub rho_max: f64,
}

impl PowerDitherPoint {
    pub fn new(rho: Vec<f64>, sigma: Vec<f64>, sigma_min: f64) -> Result<Self> {
        let p = Self {
            rho,
            sigma,
            sigma_min,
            rho_ue_max: f64::INFINITY,
            rho_max: f64::INFINITY,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::domain(
                "transmit powers must be finite and non-negative",
            ));
        }
        if self
            .sigma
            .iter()
            .any(|s| !(*s >= self.sigma_min) || !s.is_finite())
        {
            return Err(Error::domain(
                "dithering levels must be finite and >= sigma_min",
            ));
        }
        Ok(())
    }

    pub fn with_rho(&self, rho: Vec<f64>) -> Self {
        Self {
            rho,
            ..self.clone()
        }
    }

    pub fn with_sigma(&self, sigma: Vec<f64>) -> Self {
        Self {
            sigma,
            ..self.clone()
        }
    }
}

/// Quantizer used by the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Quantizer {
    #[default]
    OneBit,
    /// Identity quantizer (Â = I, C_r̂ = Ĉ_y, C_q̂ = 0). Not a physical
    /// receiver; used to test the QD-region detectors on a monotone system.
    Unquantized,
}

/// Ĉ_y = Σ_k ρ_k (ĥ_k ĥ_k^H + C_{h̃_k}) + blockdiag(σ_b² I_M).
pub fn covariance_y(channels: &ChannelState, point: &PowerDitherPoint) -> Result<CMat> {
    let n = channels.dim();
    if point.sigma.len() != channels.num_rrh {
        return Err(Error::domain(format!(
            "expected {} dithering levels, got {}",
            channels.num_rrh,
            point.sigma.len()
        )));
    }
    if point.rho.len() != channels.num_ue() {
        return Err(Error::domain(format!(
            "expected {} transmit powers, got {}",
            channels.num_ue(),
            point.rho.len()
        )));
    }
    let mut c = CMat::zeros(n, n);
    for (k, &rho) in point.rho.iter().enumerate() {
        if rho == 0.0 {
            continue;
        }
        let h = &channels.h_hat[k];
        c.gerc(C64::new(rho, 0.0), h, h, C64::new(1.0, 0.0));
        c.zip_apply(&channels.c_err[k], |a, e| *a += e * rho);
    }
    let m = channels.antennas;
    for i in 0..n {
        let s = point.sigma[i / m];
        c[(i, i)] += C64::new(s * s, 0.0);
    }
    Ok(c)
}

fn check_diagonal(c_y: &CMat) -> Result<DVector<f64>> {
    let d = DVector::from_iterator(c_y.nrows(), (0..c_y.nrows()).map(|i| c_y[(i, i)].re));
    if let Some(i) = d.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!(
            "covariance diagonal entry {i} is not positive ({})",
            d[i]
        )));
    }
    Ok(d)
}

/// Diagonal of Â = √(2/π) Diag(Ĉ_y)^{-1/2}.
pub fn bussgang_gain(c_y: &CMat) -> Result<DVector<f64>> {
    let d = check_diagonal(c_y)?;
    let s = FRAC_2_PI.sqrt();
    Ok(d.map(|v| s / v.sqrt()))
}

fn clamped_asin(x: f64, i: usize, j: usize) -> Result<f64> {
    if x.abs() > 1.0 + ARCSINE_TOLERANCE || !x.is_finite() {
        return Err(Error::Numerical(format!(
            "normalized correlation at ({i}, {j}) is {x}, outside [-1, 1]"
        )));
    }
    Ok(x.clamp(-1.0, 1.0).asin())
}

/// Arcsine law for the covariance of the quantized output.
pub fn arcsine_covariance(c_y: &CMat) -> Result<CMat> {
    let d = check_diagonal(c_y)?;
    let n = c_y.nrows();
    let inv_sqrt = d.map(|v| 1.0 / v.sqrt());
    let mut c_r = CMat::zeros(n, n);
    for j in 0..n {
        c_r[(j, j)] = C64::new(1.0, 0.0);
        for i in 0..j {
            let s = inv_sqrt[i] * inv_sqrt[j];
            let z = c_y[(i, j)];
            let re = FRAC_2_PI * clamped_asin(z.re * s, i, j)?;
            let im = FRAC_2_PI * clamped_asin(z.im * s, i, j)?;
            c_r[(i, j)] = C64::new(re, im);
            c_r[(j, i)] = C64::new(re, -im);
        }
    }
    Ok(c_r)
}

/// C_q̂ = C_r̂ − Â Ĉ_y Â^H.
pub fn qd_covariance(c_y: &CMat, a: &DVector<f64>, c_r: &CMat) -> CMat {
    let n = c_y.nrows();
    let mut c_q = c_r.clone();
    for j in 0..n {
        for i in 0..n {
            c_q[(i, j)] -= c_y[(i, j)] * (a[i] * a[j]);
        }
    }
    c_q
}

/// Bussgang model of the quantized uplink at one operating point.
#[derive(Clone, Debug)]
pub struct QuantizedModel {
    pub quantizer: Quantizer,
    pub num_rrh: usize,
    pub antennas: usize,
    pub c_y: CMat,
    /// Diagonal of Â.
    pub a: DVector<f64>,
    pub c_r: CMat,
    pub c_q: CMat,
}

impl QuantizedModel {
    pub fn new(
        channels: &ChannelState,
        point: &PowerDitherPoint,
        quantizer: Quantizer,
    ) -> Result<Self> {
        let c_y = covariance_y(channels, point)?;
        let n = c_y.nrows();
        let (a, c_r, c_q) = match quantizer {
            Quantizer::OneBit => {
                let a = bussgang_gain(&c_y)?;
                let c_r = arcsine_covariance(&c_y)?;
                let c_q = qd_covariance(&c_y, &a, &c_r);
                (a, c_r, c_q)
            }
            Quantizer::Unquantized => {
                check_diagonal(&c_y)?;
                (
                    DVector::from_element(n, 1.0),
                    c_y.clone(),
                    CMat::zeros(n, n),
                )
            }
        };
        Ok(Self {
            quantizer,
            num_rrh: channels.num_rrh,
            antennas: channels.antennas,
            c_y,
            a,
            c_r,
            c_q,
        })
    }

    pub fn dim(&self) -> usize {
        self.c_y.nrows()
    }

    /// Â v.
    pub fn apply_gain(&self, v: &CVec) -> CVec {
        CVec::from_iterator(v.len(), v.iter().zip(self.a.iter()).map(|(x, a)| x * *a))
    }

    /// Selector of RRH `b`'s antennas (the mask E_b).
    pub fn block_mask(&self, b: usize) -> DVector<f64> {
        let m = self.antennas;
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| if i / m == b { 1.0 } else { 0.0 }),
        )
    }
}
