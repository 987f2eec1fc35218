//! Deployment geometry, pathloss, Rayleigh channel draws and the CSI-error model.

use nalgebra::DMatrix;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::rng::{self, complex_normal};
use crate::units::db_to_linear;

pub type Position = [f64; 3];

/// Large-scale gain in dB at `distance_m` meters (28 GHz, exponent 3).
pub fn pathloss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::domain(format!(
            "pathloss needs a positive distance, got {distance_m}"
        )));
    }
    Ok(-61.0 - 30.0 * distance_m.log10())
}

pub fn pathloss_linear(distance_m: f64) -> Result<f64> {
    pathloss_db(distance_m).map(db_to_linear)
}

/// How RRHs are laid out.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    /// RRHs on the corners of square grids with the given spacing, the
    /// reference RRH at the origin. UE cluster moves along the diagonal.
    SquareGrid { spacing_m: f64 },
    /// RRHs on the x axis with the given spacing; the UE cluster moves along the axis.
    Line { spacing_m: f64 },
    /// Fully explicit positions (the UE cluster parameters are ignored).
    Explicit {
        rrh_positions: Vec<Position>,
        ue_positions: Vec<Position>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryConfig {
    pub num_rrh: usize,
    pub antennas: usize,
    pub num_ue: usize,
    pub layout: Layout,
    /// Distance from the reference RRH to the nearest point of the UE cluster.
    pub d_ref_m: f64,
    /// Side of the square UE cluster.
    pub b_cluster_m: f64,
    pub rrh_height_m: f64,
    pub ue_height_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            num_rrh: 4,
            antennas: 32,
            num_ue: 4,
            layout: Layout::SquareGrid { spacing_m: 100.0 },
            d_ref_m: 0.0,
            b_cluster_m: 10.0,
            rrh_height_m: 5.0,
            ue_height_m: 0.0,
        }
    }
}

/// Node placement and the resulting K×B distance and gain matrices.
#[derive(Clone, Debug)]
pub struct SystemGeometry {
    pub num_rrh: usize,
    pub antennas: usize,
    pub num_ue: usize,
    pub rrh_positions: Vec<Position>,
    pub ue_positions: Vec<Position>,
    pub d_ref_m: f64,
    pub b_cluster_m: f64,
    /// `distance[(k, b)]` in meters.
    pub distance: DMatrix<f64>,
    /// `gain[(k, b)]`, linear large-scale gain δ_{b,k}.
    pub gain: DMatrix<f64>,
    /// Best gain seen by each RRH, max over UEs.
    pub gain_max: Vec<f64>,
}

impl SystemGeometry {
    /// Aggregated dimension B·M.
    pub fn dim(&self) -> usize {
        self.num_rrh * self.antennas
    }

    /// Geometry defined directly by its gain matrix (`gain[(k, b)]`), with
    /// no physical positions. Useful for synthetic instances.
    pub fn from_gains(antennas: usize, gain: DMatrix<f64>) -> Result<Self> {
        let (num_ue, num_rrh) = gain.shape();
        if antennas == 0 || num_ue == 0 || num_rrh == 0 {
            return Err(Error::domain("geometry needs B, M, K >= 1"));
        }
        if gain.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::domain(
                "large-scale gains must be positive and finite",
            ));
        }
        let gain_max = column_max(&gain);
        Ok(Self {
            num_rrh,
            antennas,
            num_ue,
            rrh_positions: Vec::new(),
            ue_positions: Vec::new(),
            d_ref_m: f64::NAN,
            b_cluster_m: f64::NAN,
            distance: DMatrix::from_element(num_ue, num_rrh, f64::NAN),
            gain,
            gain_max,
        })
    }

    /// Block of aggregated indices belonging to RRH `b`.
    pub fn block(&self, b: usize) -> std::ops::Range<usize> {
        b * self.antennas..(b + 1) * self.antennas
    }
}

fn column_max(gain: &DMatrix<f64>) -> Vec<f64> {
    (0..gain.ncols())
        .map(|b| {
            gain.column(b)
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// UE positions: K points on a circle of radius `b/√2` around the cluster center,
/// starting from the point closest to the reference RRH. For K = 4 these are
/// the corners of an axis-aligned `b × b` square.
fn cluster_positions(center: [f64; 2], b: f64, k: usize, height: f64) -> Vec<Position> {
    if k == 1 {
        return vec![[center[0], center[1], height]];
    }
    let r = b * FRAC_1_SQRT_2;
    (0..k)
        .map(|i| {
            let phi = 1.25 * PI + 2.0 * PI * i as f64 / k as f64;
            [center[0] + r * phi.cos(), center[1] + r * phi.sin(), height]
        })
        .collect()
}

pub fn build_geometry(cfg: &GeometryConfig) -> Result<SystemGeometry> {
    if cfg.num_rrh == 0 || cfg.antennas == 0 || cfg.num_ue == 0 {
        return Err(Error::domain("geometry needs B, M, K >= 1"));
    }
    // The cluster center sits `d_ref + b/√2` from the reference RRH.
    let center_dist = cfg.d_ref_m + cfg.b_cluster_m * FRAC_1_SQRT_2;
    let (rrh, ue) = match &cfg.layout {
        Layout::SquareGrid { spacing_m } => {
            let side = (cfg.num_rrh as f64).sqrt().ceil() as usize;
            let rrh: Vec<Position> = (0..cfg.num_rrh)
                .map(|i| {
                    let (row, col) = (i / side, i % side);
                    [
                        col as f64 * spacing_m,
                        row as f64 * spacing_m,
                        cfg.rrh_height_m,
                    ]
                })
                .collect();
            let c = center_dist * FRAC_1_SQRT_2;
            let ue = cluster_positions([c, c], cfg.b_cluster_m, cfg.num_ue, cfg.ue_height_m);
            (rrh, ue)
        }
        Layout::Line { spacing_m } => {
            let rrh: Vec<Position> = (0..cfg.num_rrh)
                .map(|i| [i as f64 * spacing_m, 0.0, cfg.rrh_height_m])
                .collect();
            let ue = cluster_positions(
                [center_dist, 0.0],
                cfg.b_cluster_m,
                cfg.num_ue,
                cfg.ue_height_m,
            );
            (rrh, ue)
        }
        Layout::Explicit {
            rrh_positions,
            ue_positions,
        } => {
            if rrh_positions.len() != cfg.num_rrh || ue_positions.len() != cfg.num_ue {
                return Err(Error::domain(format!(
                    "explicit layout lists {} RRHs and {} UEs, expected {} and {}",
                    rrh_positions.len(),
                    ue_positions.len(),
                    cfg.num_rrh,
                    cfg.num_ue
                )));
            }
            (rrh_positions.clone(), ue_positions.clone())
        }
    };
    from_positions(cfg.antennas, rrh, ue, cfg.d_ref_m, cfg.b_cluster_m)
}

/// Geometry from explicit node positions (3-D Euclidean distances).
pub fn from_positions(
    antennas: usize,
    rrh: Vec<Position>,
    ue: Vec<Position>,
    d_ref_m: f64,
    b_cluster_m: f64,
) -> Result<SystemGeometry> {
    let (num_ue, num_rrh) = (ue.len(), rrh.len());
    if antennas == 0 || num_ue == 0 || num_rrh == 0 {
        return Err(Error::domain("geometry needs B, M, K >= 1"));
    }
    let mut distance = DMatrix::zeros(num_ue, num_rrh);
    let mut gain = DMatrix::zeros(num_ue, num_rrh);
    for (k, u) in ue.iter().enumerate() {
        for (b, r) in rrh.iter().enumerate() {
            let d = ((u[0] - r[0]).powi(2) + (u[1] - r[1]).powi(2) + (u[2] - r[2]).powi(2)).sqrt();
            if d <= 0.0 {
                return Err(Error::domain(format!("UE {k} coincides with RRH {b}")));
            }
            distance[(k, b)] = d;
            gain[(k, b)] = pathloss_linear(d)?;
        }
    }
    let gain_max = column_max(&gain);
    Ok(SystemGeometry {
        num_rrh,
        antennas,
        num_ue,
        rrh_positions: rrh,
        ue_positions: ue,
        d_ref_m,
        b_cluster_m,
        distance,
        gain,
        gain_max,
    })
}

/// True channels, their estimates and the estimation-error covariances.
#[derive(Clone, Debug)]
pub struct ChannelState {
    pub num_rrh: usize,
    pub antennas: usize,
    /// True aggregated channels h_k (length B·M).
    pub h: Vec<CVec>,
    /// Estimates ĥ_k.
    pub h_hat: Vec<CVec>,
    /// Realized estimation errors h̃_k = h_k − ĥ_k.
    pub h_err: Vec<CVec>,
    /// Error covariances C_{h̃_k}.
    pub c_err: Vec<CMat>,
}

impl ChannelState {
    pub fn dim(&self) -> usize {
        self.num_rrh * self.antennas
    }

    pub fn num_ue(&self) -> usize {
        self.h.len()
    }

    /// Perfect-CSI state from explicit channel vectors.
    pub fn perfect(num_rrh: usize, antennas: usize, h: Vec<CVec>) -> Result<Self> {
        let n = num_rrh * antennas;
        if h.iter().any(|v| v.len() != n) {
            return Err(Error::domain(format!(
                "channel vectors must have length {n}"
            )));
        }
        let zeros = vec![CVec::zeros(n); h.len()];
        let c_err = vec![CMat::zeros(n, n); h.len()];
        Ok(Self {
            num_rrh,
            antennas,
            h_hat: h.clone(),
            h,
            h_err: zeros,
            c_err,
        })
    }

    /// True channels treated as estimates, used by the exact (perfect-CSI) SINDR.
    pub fn as_perfect(&self) -> Self {
        Self::perfect(self.num_rrh, self.antennas, self.h.clone())
            .expect("dimensions already validated")
    }
}

/// Uncorrelated Rayleigh channels: h_{b,k} ~ CN(0, δ_{b,k} I_M), perfect CSI.
pub fn draw_channels(geometry: &SystemGeometry, seed: u64) -> Result<ChannelState> {
    if geometry.gain.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::domain("large-scale gains must be positive"));
    }
    let mut rng = rng::stream(seed, rng::STREAM_CHANNEL);
    let (m, n) = (geometry.antennas, geometry.dim());
    let h = (0..geometry.num_ue)
        .map(|k| {
            CVec::from_iterator(
                n,
                (0..n).map(|i| complex_normal(&mut rng, geometry.gain[(k, i / m)])),
            )
        })
        .collect();
    ChannelState::perfect(geometry.num_rrh, m, h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CsiMode {
    Perfect,
    /// Error covariance ε·δ_{b,k}·I_M per RRH block.
    SyntheticError {
        epsilon: f64,
    },
}

/// Attach channel estimates to the true channels.
///
/// For `SyntheticError(ε)` the error is drawn from its distribution
/// conditioned on the true channel, h̃ | h ~ CN(ε h, ε(1−ε) δ I), which makes
/// h̃ independent of ĥ = h − h̃ with ĥ ~ CN(0, (1−ε) δ I) and h̃ ~ CN(0, ε δ I).
pub fn apply_csi_model(
    state: &ChannelState,
    geometry: &SystemGeometry,
    mode: CsiMode,
    seed: u64,
) -> Result<ChannelState> {
    let (m, n) = (state.antennas, state.dim());
    match mode {
        CsiMode::Perfect => Ok(state.as_perfect()),
        CsiMode::SyntheticError { epsilon } => {
            if !(0.0..1.0).contains(&epsilon) {
                return Err(Error::domain(format!(
                    "CSI error level must lie in [0, 1), got {epsilon}"
                )));
            }
            if epsilon == 0.0 {
                return Ok(state.as_perfect());
            }
            let mut rng = rng::stream(seed, rng::STREAM_CSI);
            let mut h_hat = Vec::with_capacity(state.num_ue());
            let mut h_err = Vec::with_capacity(state.num_ue());
            let mut c_err = Vec::with_capacity(state.num_ue());
            for (k, h) in state.h.iter().enumerate() {
                let err = CVec::from_iterator(
                    n,
                    (0..n).map(|i| {
                        let var = epsilon * (1.0 - epsilon) * geometry.gain[(k, i / m)];
                        h[i] * epsilon + complex_normal(&mut rng, var)
                    }),
                );
                let mut cov = CMat::zeros(n, n);
                for i in 0..n {
                    cov[(i, i)] = C64::new(epsilon * geometry.gain[(k, i / m)], 0.0);
                }
                h_hat.push(h - &err);
                h_err.push(err);
                c_err.push(cov);
            }
            Ok(ChannelState {
                num_rrh: state.num_rrh,
                antennas: m,
                h: state.h.clone(),
                h_hat,
                h_err,
                c_err,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pathloss_reference_values() {
        assert!((pathloss_db(1.0).unwrap() + 61.0).abs() < 1e-12);
        assert!((pathloss_db(10.0).unwrap() + 91.0).abs() < 1e-12);
        assert!((pathloss_db(100.0).unwrap() + 121.0).abs() < 1e-12);
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-3.0).is_err());
    }

    #[test]
    fn vertical_offset_only() {
        let g = from_positions(1, vec![[0.0, 0.0, 5.0]], vec![[0.0, 0.0, 0.0]], 0.0, 0.0).unwrap();
        assert!((g.distance[(0, 0)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn farthest_rrh_from_corner_centered_cluster() {
        // Cluster centered on the reference RRH's ground position.
        let rrh = vec![
            [0.0, 0.0, 5.0],
            [100.0, 0.0, 5.0],
            [0.0, 100.0, 5.0],
            [100.0, 100.0, 5.0],
        ];
        let ue = cluster_positions([0.0, 0.0], 10.0, 4, 0.0);
        let center = [0.0f64, 0.0];
        let far = rrh
            .iter()
            .map(|r| ((r[0] - center[0]).powi(2) + (r[1] - center[1]).powi(2)).sqrt())
            .fold(0f64, f64::max);
        assert!((far - 100.0 * 2f64.sqrt()).abs() < 1e-9);
        let g = from_positions(8, rrh, ue, 0.0, 10.0).unwrap();
        assert_eq!(g.dim(), 32);
    }

    #[test]
    fn square_cluster_nearest_corner_is_d_ref_away() {
        let cfg = GeometryConfig {
            d_ref_m: 7.0,
            rrh_height_m: 0.0,
            ..GeometryConfig::default()
        };
        let g = build_geometry(&cfg).unwrap();
        let nearest = g
            .distance
            .column(0)
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!((nearest - 7.0).abs() < 1e-9, "{nearest}");
        // corners of an axis-aligned b × b square
        let xs: Vec<f64> = g.ue_positions.iter().map(|p| p[0]).collect();
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((spread - 10.0).abs() < 1e-9);
    }

    #[test]
    fn gain_max_on_two_rrh_line() {
        let cfg = GeometryConfig {
            num_rrh: 2,
            antennas: 4,
            num_ue: 2,
            layout: Layout::Explicit {
                rrh_positions: vec![[0.0, 0.0, 5.0], [100.0, 0.0, 5.0]],
                ue_positions: vec![[10.0, 0.0, 0.0], [90.0, 0.0, 0.0]],
            },
            ..GeometryConfig::default()
        };
        let g = build_geometry(&cfg).unwrap();
        // brute-force recomputation over the distance matrix
        for b in 0..2 {
            let dmin = (0..2)
                .map(|k| g.distance[(k, b)])
                .fold(f64::INFINITY, f64::min);
            let expect = pathloss_linear(dmin).unwrap();
            assert!((g.gain_max[b] - expect).abs() <= 1e-15 * expect);
            assert!((dmin - (100f64 + 25.0).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn coincident_nodes_rejected() {
        let r = from_positions(1, vec![[1.0, 2.0, 0.0]], vec![[1.0, 2.0, 0.0]], 0.0, 0.0);
        assert!(r.is_err());
    }

    #[test]
    fn zero_gain_rejected() {
        let g = DMatrix::from_row_slice(1, 2, &[1e-9, 0.0]);
        assert!(SystemGeometry::from_gains(2, g).is_err());
    }

    #[test]
    fn channel_draw_is_deterministic() {
        let g = build_geometry(&GeometryConfig::default()).unwrap();
        let a = draw_channels(&g, 11).unwrap();
        let b = draw_channels(&g, 11).unwrap();
        let c = draw_channels(&g, 12).unwrap();
        assert_eq!(a.h, b.h);
        assert_ne!(a.h, c.h);
    }

    #[test]
    fn channel_second_moment() {
        let gain = DMatrix::from_row_slice(1, 2, &[1e-8, 3e-10]);
        let g = SystemGeometry::from_gains(500, gain).unwrap();
        let mut power = [0.0; 2];
        for seed in 0..40 {
            let s = draw_channels(&g, seed).unwrap();
            for (b, p) in power.iter_mut().enumerate() {
                *p += s.h[0]
                    .rows(b * 500, 500)
                    .iter()
                    .map(|x| x.norm_sqr())
                    .sum::<f64>();
            }
        }
        for b in 0..2 {
            let ratio = power[b] / 20_000.0 / g.gain[(0, b)];
            assert!((ratio - 1.0).abs() < 0.02, "{b}: {ratio}");
        }
    }

    #[test]
    fn csi_modes() {
        let gain = DMatrix::from_row_slice(1, 1, &[1.0]);
        let g = SystemGeometry::from_gains(1000, gain).unwrap();
        let s = draw_channels(&g, 3).unwrap();
        let p = apply_csi_model(&s, &g, CsiMode::Perfect, 0).unwrap();
        assert_eq!(p.h_hat, s.h);
        assert!(p.c_err[0].iter().all(|x| *x == C64::new(0.0, 0.0)));
        let z = apply_csi_model(&s, &g, CsiMode::SyntheticError { epsilon: 0.0 }, 0).unwrap();
        assert_eq!(z.h_hat, p.h_hat);
        assert_eq!(z.c_err, p.c_err);

        let (mut var, mut cross) = (0.0, C64::new(0.0, 0.0));
        for seed in 0..100 {
            let s = draw_channels(&g, seed).unwrap();
            let e =
                apply_csi_model(&s, &g, CsiMode::SyntheticError { epsilon: 0.1 }, seed).unwrap();
            var += e.h_err[0].iter().map(|x| x.norm_sqr()).sum::<f64>();
            let recon = &e.h_hat[0] + &e.h_err[0];
            assert!((recon - &e.h[0]).camax() < 1e-15);
            // estimate and error uncorrelated
            cross += e.h_hat[0].dotc(&e.h_err[0]);
            assert_eq!(e.c_err[0][(3, 3)], C64::new(0.1, 0.0));
        }
        let var = var / 100_000.0;
        assert!((var - 0.1).abs() < 0.1 * 0.02, "{var}");
        assert!((cross / 100_000.0).norm() < 5e-3, "{cross}");

        assert!(apply_csi_model(&s, &g, CsiMode::SyntheticError { epsilon: 1.0 }, 0).is_err());
        assert!(apply_csi_model(&s, &g, CsiMode::SyntheticError { epsilon: -0.1 }, 0).is_err());
    }
}
