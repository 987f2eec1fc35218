//! Monte Carlo simulation of the quantized uplink.
//!
//! Symbols are drawn in fixed-size batches, each from its own ChaCha stream,
//! so the output is identical whatever the number of worker threads.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ChannelState;
use crate::linalg::{psd_factor, CMat, C64};
use crate::quantized::{
    bussgang_gain, quantize_scalar, PowerDitherPoint, QuantizedModel, Quantizer,
};
use crate::receivers::ReceiverBank;
use crate::rng::{self, complex_normal, STREAM_SYMBOLS};

/// Symbols per independently seeded batch.
pub const BATCH: usize = 4096;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constellation {
    /// Unit-variance circular complex Gaussian.
    Gaussian,
    /// Unit-average-power 16-point square grid.
    Qam16,
    /// Unit-power QPSK (the corner points of the 16-QAM grid, rescaled).
    Qpsk,
}

/// 16-QAM points with levels {±1, ±3}/√10.
pub fn qam16_points() -> [C64; 16] {
    let l = [-3.0, -1.0, 1.0, 3.0];
    let s = 1.0 / 10f64.sqrt();
    std::array::from_fn(|i| C64::new(l[i % 4] * s, l[i / 4] * s))
}

fn qpsk_points() -> [C64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        C64::new(s, s),
        C64::new(-s, s),
        C64::new(-s, -s),
        C64::new(s, -s),
    ]
}

impl Constellation {
    fn draw<R: Rng>(self, rng: &mut R) -> C64 {
        match self {
            Constellation::Gaussian => complex_normal(rng, 1.0),
            Constellation::Qam16 => qam16_points()[rng.gen_range(0..16)],
            Constellation::Qpsk => qpsk_points()[rng.gen_range(0..4)],
        }
    }

    fn points(self) -> Option<Vec<C64>> {
        match self {
            Constellation::Gaussian => None,
            Constellation::Qam16 => Some(qam16_points().to_vec()),
            Constellation::Qpsk => Some(qpsk_points().to_vec()),
        }
    }
}

/// Transmitted and soft-detected symbols, `[k][n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftSymbols {
    pub constellation: Constellation,
    pub sent: Vec<Vec<C64>>,
    pub soft: Vec<Vec<C64>>,
}

impl SoftSymbols {
    pub fn len(&self) -> usize {
        self.sent.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws `n_symbols` uplink symbol vectors through the true channel, adds
/// noise plus dithering per RRH, quantizes and combines with `bank`.
pub fn simulate_symbols(
    channels: &ChannelState,
    point: &PowerDitherPoint,
    bank: &ReceiverBank,
    quantizer: Quantizer,
    n_symbols: usize,
    constellation: Constellation,
    seed: u64,
) -> Result<SoftSymbols> {
    point.validate()?;
    let (n, k) = (channels.dim(), channels.num_ue());
    if point.rho.len() != k || point.sigma.len() != channels.num_rrh || bank.w.len() != k {
        return Err(Error::domain(
            "operating point and receivers must match the channels",
        ));
    }
    let amp: Vec<f64> = point.rho.iter().map(|r| r.sqrt()).collect();
    let m = channels.antennas;
    let batches: Vec<(Vec<Vec<C64>>, Vec<Vec<C64>>)> = (0..n_symbols.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let count = BATCH.min(n_symbols - b * BATCH);
            let mut rng = rng::stream(seed, STREAM_SYMBOLS + b as u64);
            let mut sent = vec![Vec::with_capacity(count); k];
            let mut soft = vec![Vec::with_capacity(count); k];
            let mut y = vec![C64::new(0.0, 0.0); n];
            let mut d = vec![C64::new(0.0, 0.0); k];
            for _ in 0..count {
                for dk in d.iter_mut() {
                    *dk = constellation.draw(&mut rng);
                }
                for (i, yi) in y.iter_mut().enumerate() {
                    let s = point.sigma[i / m];
                    *yi = complex_normal(&mut rng, s * s);
                }
                for (kk, h) in channels.h.iter().enumerate() {
                    let x = d[kk] * amp[kk];
                    for (yi, hi) in y.iter_mut().zip(h.iter()) {
                        *yi += hi * x;
                    }
                }
                if quantizer == Quantizer::OneBit {
                    for yi in y.iter_mut() {
                        *yi = quantize_scalar(*yi);
                    }
                }
                for kk in 0..k {
                    let w = &bank.w[kk];
                    let est: C64 = w.iter().zip(&y).map(|(wi, ri)| wi.conj() * ri).sum();
                    sent[kk].push(d[kk]);
                    soft[kk].push(est);
                }
            }
            (sent, soft)
        })
        .collect();
    let mut sent = vec![Vec::with_capacity(n_symbols); k];
    let mut soft = vec![Vec::with_capacity(n_symbols); k];
    for (s, e) in batches {
        for kk in 0..k {
            sent[kk].extend_from_slice(&s[kk]);
            soft[kk].extend_from_slice(&e[kk]);
        }
    }
    Ok(SoftSymbols {
        constellation,
        sent,
        soft,
    })
}

/// How soft symbols are rescaled before nearest-neighbour detection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GainEstimate {
    /// g_k = √ρ_k w_k^H Â ĥ_k from the Bussgang model.
    #[default]
    Analytic,
    /// Least-squares fit Σ d̂ d* / Σ |d|² against the sent symbols.
    EmpiricalFit,
}

/// Analytic Bussgang gains g_k = √ρ_k w_k^H Â ĥ_k.
pub fn analytic_gains(
    channels: &ChannelState,
    point: &PowerDitherPoint,
    bank: &ReceiverBank,
    quantizer: Quantizer,
) -> Result<Vec<C64>> {
    let model = QuantizedModel::new(channels, point, quantizer)?;
    Ok(channels
        .h_hat
        .iter()
        .zip(&bank.w)
        .zip(&point.rho)
        .map(|((h, w), r)| w.dotc(&model.apply_gain(h)) * r.sqrt())
        .collect())
}

/// Per-UE least-squares gain of soft on sent symbols.
pub fn fitted_gains(symbols: &SoftSymbols) -> Vec<C64> {
    symbols
        .sent
        .iter()
        .zip(&symbols.soft)
        .map(|(d, e)| {
            let num: C64 = e.iter().zip(d).map(|(e, d)| e * d.conj()).sum();
            let den: f64 = d.iter().map(|d| d.norm_sqr()).sum();
            num / den
        })
        .collect()
}

/// Symbol error rates with 95% normal-approximation binomial half-widths.
#[derive(Clone, Debug, PartialEq)]
pub struct SerResult {
    pub per_ue: Vec<f64>,
    pub half_width: Vec<f64>,
    pub max_ser: f64,
    /// Half-width of the UE attaining `max_ser`.
    pub max_half_width: f64,
    pub n_symbols: usize,
}

impl SerResult {
    /// Upper end of the 95% interval of the worst UE.
    pub fn upper(&self) -> f64 {
        self.max_ser + self.max_half_width
    }

    pub fn lower(&self) -> f64 {
        self.max_ser - self.max_half_width
    }

    /// True when this worst-UE interval lies entirely below `other`'s.
    pub fn clearly_below(&self, other: &SerResult) -> bool {
        self.upper() < other.lower()
    }
}

pub fn binomial_half_width(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Rescales each soft symbol by 1/g_k and picks the nearest constellation
/// point.
pub fn detect(symbols: &SoftSymbols, gains: &[C64]) -> Result<SerResult> {
    let points = symbols
        .constellation
        .points()
        .ok_or_else(|| Error::domain("detection needs a finite constellation"))?;
    if gains.len() != symbols.sent.len() {
        return Err(Error::domain("one gain per UE required"));
    }
    if let Some((ue, g)) = gains.iter().enumerate().find(|(_, g)| !(g.norm() >= 1e-12)) {
        return Err(Error::DegenerateGain {
            ue,
            magnitude: g.norm(),
        });
    }
    let n = symbols.len();
    let per_ue: Vec<f64> = symbols
        .sent
        .iter()
        .zip(&symbols.soft)
        .zip(gains)
        .map(|((sent, soft), g)| {
            let errors = sent
                .iter()
                .zip(soft)
                .filter(|(d, e)| {
                    let z = *e / g;
                    let nearest = points
                        .iter()
                        .min_by(|a, b| (z - *a).norm_sqr().total_cmp(&(z - *b).norm_sqr()))
                        .expect("non-empty constellation");
                    nearest != *d
                })
                .count();
            if n == 0 {
                0.0
            } else {
                errors as f64 / n as f64
            }
        })
        .collect();
    let half_width: Vec<f64> = per_ue.iter().map(|p| binomial_half_width(*p, n)).collect();
    let worst = (0..per_ue.len())
        .max_by(|a, b| per_ue[*a].total_cmp(&per_ue[*b]))
        .ok_or_else(|| Error::domain("no UEs"))?;
    Ok(SerResult {
        max_ser: per_ue[worst],
        max_half_width: half_width[worst],
        per_ue,
        half_width,
        n_symbols: n,
    })
}

/// 16-QAM detection of simulated symbols.
pub fn detect_qam16(
    symbols: &SoftSymbols,
    channels: &ChannelState,
    point: &PowerDitherPoint,
    bank: &ReceiverBank,
    quantizer: Quantizer,
    gain: GainEstimate,
) -> Result<SerResult> {
    if symbols.constellation != Constellation::Qam16 {
        return Err(Error::domain("16-QAM detection needs 16-QAM symbols"));
    }
    let gains = match gain {
        GainEstimate::Analytic => analytic_gains(channels, point, bank, quantizer)?,
        GainEstimate::EmpiricalFit => fitted_gains(symbols),
    };
    detect(symbols, &gains)
}

/// Per-UE SINDR measured from soft symbols: |g|² E|d|² / (E|d̂|² − |g|² E|d|²)
/// with g the least-squares gain.
pub fn empirical_sindr(symbols: &SoftSymbols) -> Vec<f64> {
    let gains = fitted_gains(symbols);
    symbols
        .sent
        .iter()
        .zip(&symbols.soft)
        .zip(gains)
        .map(|((d, e), g)| {
            let n = d.len() as f64;
            let signal = g.norm_sqr() * d.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
            let total = e.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
            signal / (total - signal)
        })
        .collect()
}

/// Sample covariances of the quantized output r and of the distortion
/// q = r − Â y, for y ~ CN(0, c_y).
#[derive(Clone, Debug)]
pub struct QuantizerMoments {
    pub c_r: CMat,
    pub c_q: CMat,
    pub n_samples: usize,
}

/// Sample statistics of 1-bit quantized Gaussian vectors with covariance
/// `c_y`.
pub fn quantizer_moments(c_y: &CMat, n_samples: usize, seed: u64) -> Result<QuantizerMoments> {
    let n = c_y.nrows();
    let factor = psd_factor(c_y)?;
    let a = bussgang_gain(c_y)?;
    let batches: Vec<(CMat, CMat)> = (0..n_samples.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let count = BATCH.min(n_samples - b * BATCH);
            let mut rng = rng::stream(seed, STREAM_SYMBOLS + b as u64);
            let mut acc_r = CMat::zeros(n, n);
            let mut acc_q = CMat::zeros(n, n);
            let mut z = vec![C64::new(0.0, 0.0); n];
            let mut r = vec![C64::new(0.0, 0.0); n];
            let mut q = vec![C64::new(0.0, 0.0); n];
            for _ in 0..count {
                for zi in z.iter_mut() {
                    *zi = complex_normal(&mut rng, 1.0);
                }
                for i in 0..n {
                    let y: C64 = (0..n).map(|j| factor[(i, j)] * z[j]).sum();
                    r[i] = quantize_scalar(y);
                    q[i] = r[i] - y * a[i];
                }
                for j in 0..n {
                    for i in 0..=j {
                        acc_r[(i, j)] += r[i] * r[j].conj();
                        acc_q[(i, j)] += q[i] * q[j].conj();
                    }
                }
            }
            (acc_r, acc_q)
        })
        .collect();
    let mut c_r = CMat::zeros(n, n);
    let mut c_q = CMat::zeros(n, n);
    for (r, q) in batches {
        c_r += r;
        c_q += q;
    }
    let scale = 1.0 / n_samples.max(1) as f64;
    for j in 0..n {
        for i in 0..=j {
            c_r[(i, j)] *= scale;
            c_q[(i, j)] *= scale;
            c_r[(j, i)] = c_r[(i, j)].conj();
            c_q[(j, i)] = c_q[(i, j)].conj();
        }
    }
    Ok(QuantizerMoments {
        c_r,
        c_q,
        n_samples,
    })
}

/// Sample covariance of quantize(y), y ~ CN(0, c_y).
pub fn empirical_cr(c_y: &CMat, n_samples: usize, seed: u64) -> Result<CMat> {
    Ok(quantizer_moments(c_y, n_samples, seed)?.c_r)
}

/// Largest entry-wise absolute difference of two matrices.
pub fn max_entry_deviation(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0f64, |m, (x, y)| m.max((x - y).norm()))
}
