//! Randomized small instances for property checks and the validation suites.

use nalgebra::DMatrix;
use rand::Rng;

use crate::geometry::{apply_csi_model, draw_channels, ChannelState, CsiMode, SystemGeometry};
use crate::linalg::{CMat, C64};
use crate::quantized::PowerDitherPoint;
use crate::rng;

/// A channel realization together with an operating point.
#[derive(Clone, Debug)]
pub struct Instance {
    pub geometry: SystemGeometry,
    pub channels: ChannelState,
    pub point: PowerDitherPoint,
}

/// Random instance with per-antenna SNRs roughly in [-15, 25] dB.
///
/// Gains are log-uniform in [1e-10.5, 1e-8.5], powers log-uniform in
/// [1e-4, 1e-1] W, the noise floor is 1e-12 W and each RRH adds up to 3×
/// that floor in dithering standard deviation. `epsilon > 0` enables the
/// synthetic CSI-error model.
pub fn random_instance(
    seed: u64,
    num_rrh: usize,
    antennas: usize,
    num_ue: usize,
    epsilon: f64,
) -> Instance {
    let mut r = rng::stream(seed, 0xfeed);
    let gain = DMatrix::from_fn(num_ue, num_rrh, |_, _| 10f64.powf(r.gen_range(-10.5..-8.5)));
    let geometry = SystemGeometry::from_gains(antennas, gain).expect("positive gains");
    let truth = draw_channels(&geometry, seed).expect("valid geometry");
    let mode = if epsilon > 0.0 {
        CsiMode::SyntheticError { epsilon }
    } else {
        CsiMode::Perfect
    };
    let channels = apply_csi_model(&truth, &geometry, mode, seed).expect("valid epsilon");
    let sigma_min = 1e-6;
    let rho = (0..num_ue)
        .map(|_| 10f64.powf(r.gen_range(-4.0..-1.0)))
        .collect();
    let sigma = (0..num_rrh)
        .map(|_| sigma_min * r.gen_range(1.0..3.0))
        .collect();
    let point = PowerDitherPoint::new(rho, sigma, sigma_min).expect("valid point");
    Instance {
        geometry,
        channels,
        point,
    }
}

/// Random Hermitian positive-definite `n × n` covariance G Gᴴ + 0.1 I with
/// G entries CN(0, 1).
pub fn random_covariance(seed: u64, n: usize) -> CMat {
    let mut r = rng::stream(seed, 0xc0f);
    let g = CMat::from_fn(n, n, |_, _| rng::complex_normal(&mut r, 1.0));
    &g * g.adjoint() + CMat::identity(n, n) * C64::new(0.1, 0.0)
}
