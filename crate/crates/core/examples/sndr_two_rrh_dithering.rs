//! One UE at 10 m from the near RRH of a pair spaced 100 m apart. Without
//! dithering the near RRH saturates first and the SNDR curve has two humps;
//! adding noise at the near RRH so both saturate together merges them into
//! one higher peak.
//!
//! ```text
//! cargo run --release --example sndr_two_rrh_dithering [antennas]
//! ```

use onebit_dmimo::dither::equalizing_dither;
use onebit_dmimo::geometry::{draw_channels, from_positions};
use onebit_dmimo::quantized::{PowerDitherPoint, Quantizer};
use onebit_dmimo::receivers::{sindr_at, ReceiverKind};
use onebit_dmimo::units::{dbm_to_sigma, dbm_to_watts, linear_to_db, sigma_to_dbm};

fn local_maxima(curve: &[f64]) -> Vec<usize> {
    (1..curve.len() - 1)
        .filter(|&i| curve[i] > curve[i - 1] && curve[i] >= curve[i + 1])
        .collect()
}

fn main() -> onebit_dmimo::Result<()> {
    let antennas = std::env::args()
        .nth(1)
        .map_or(64, |a| a.parse().expect("antennas"));
    let geometry = from_positions(
        antennas,
        vec![[0.0, 0.0, 5.0], [100.0, 0.0, 5.0]],
        vec![[10.0, 0.0, 0.0]],
        0.0,
        0.0,
    )?;
    let channels = draw_channels(&geometry, 1)?;
    let sigma_min = dbm_to_sigma(-95.0);
    let plain = vec![sigma_min; 2];
    let equalized = equalizing_dither(&geometry.gain_max, sigma_min);
    println!(
        "dither noise per RRH: [{:.1}, {:.1}] dBm",
        sigma_to_dbm(equalized[0]),
        sigma_to_dbm(equalized[1])
    );

    let grid: Vec<f64> = (-40..=50).map(f64::from).collect();
    for kind in ReceiverKind::ALL {
        for (label, sigma) in [("no dithering", &plain), ("dithering", &equalized)] {
            let mut curve = Vec::with_capacity(grid.len());
            for &rho_dbm in &grid {
                let point =
                    PowerDitherPoint::new(vec![dbm_to_watts(rho_dbm)], sigma.clone(), sigma_min)?;
                curve.push(linear_to_db(
                    sindr_at(&channels, &point, kind, Quantizer::OneBit)?[0],
                ));
            }
            let peaks: Vec<String> = local_maxima(&curve)
                .iter()
                .map(|&i| format!("{:.2} dB at {} dBm", curve[i], grid[i]))
                .collect();
            println!("{kind} {label:>12}: {}", peaks.join(", "));
        }
    }
    Ok(())
}
