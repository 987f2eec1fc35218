//! SNDR of one UE at 30 m from a single RRH as its transmit power sweeps
//! from -30 to 40 dBm. The curve rises while thermal noise dominates, then
//! falls once 1-bit distortion takes over; the peak moves with the array size.
//!
//! ```text
//! cargo run --release --example sndr_single_rrh [seed]
//! ```

use onebit_dmimo::geometry::{draw_channels, from_positions};
use onebit_dmimo::quantized::{PowerDitherPoint, Quantizer};
use onebit_dmimo::receivers::{sindr_at, ReceiverKind};
use onebit_dmimo::units::{dbm_to_sigma, dbm_to_watts, linear_to_db};

fn main() -> onebit_dmimo::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map_or(1, |a| a.parse().expect("seed"));
    let sigma_min = dbm_to_sigma(-95.0);
    let grid: Vec<f64> = (-30..=40).map(f64::from).collect();

    println!("antennas  receiver  peak_dbm  peak_db  maxima");
    for antennas in [16, 32, 64, 128] {
        let geometry = from_positions(
            antennas,
            vec![[0.0, 0.0, 5.0]],
            vec![[30.0, 0.0, 0.0]],
            0.0,
            0.0,
        )?;
        let channels = draw_channels(&geometry, seed)?;
        for kind in ReceiverKind::ALL {
            let mut curve = Vec::with_capacity(grid.len());
            for &rho_dbm in &grid {
                let point =
                    PowerDitherPoint::new(vec![dbm_to_watts(rho_dbm)], vec![sigma_min], sigma_min)?;
                curve.push(linear_to_db(
                    sindr_at(&channels, &point, kind, Quantizer::OneBit)?[0],
                ));
            }
            let (i, peak) =
                curve
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                        if v > best.1 {
                            (i, v)
                        } else {
                            best
                        }
                    });
            let maxima = (1..curve.len() - 1)
                .filter(|&i| curve[i] > curve[i - 1] && curve[i] >= curve[i + 1])
                .count();
            println!(
                "{antennas:>8}  {kind:>8}  {:>8.0}  {peak:>7.2}  {maxima:>6}",
                grid[i]
            );
        }
    }
    Ok(())
}
