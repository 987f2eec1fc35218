//! Max-min SINDR with and without dithering for a UE cluster sitting next to
//! one RRH of a 2x2 grid.
//!
//! ```text
//! cargo run --release --example max_min_dithering [antennas] [rho_ue_dbm]
//! ```

use std::time::Instant;

use onebit_dmimo::dither::{
    optimize_dithering, without_dithering, DitherConfig, DitherProblem, ObjectiveKind,
};
use onebit_dmimo::geometry::{build_geometry, draw_channels, GeometryConfig};
use onebit_dmimo::power::OptimizerConfig;
use onebit_dmimo::receivers::ReceiverKind;
use onebit_dmimo::units::{dbm_to_sigma, dbm_to_watts, linear_to_db, sigma_to_dbm, watts_to_dbm};

fn main() -> onebit_dmimo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let antennas = args.first().map_or(32, |a| a.parse().expect("antennas"));
    let cap_dbm: f64 = args.get(1).map_or(25.0, |a| a.parse().expect("rho_ue_dbm"));

    let geometry = build_geometry(&GeometryConfig {
        antennas,
        ..GeometryConfig::default()
    })?;
    let channels = draw_channels(&geometry, 1)?;
    let power = OptimizerConfig::default();
    let dither = DitherConfig::default();

    for kind in ReceiverKind::ALL {
        let start = Instant::now();
        let problem = DitherProblem::new(
            &channels,
            geometry.gain_max.clone(),
            kind,
            dbm_to_sigma(-95.0),
        )
        .with_cap(dbm_to_watts(cap_dbm));
        let plain = without_dithering(ObjectiveKind::MaxMin, &problem, &power, &dither)?;
        let sol = optimize_dithering(ObjectiveKind::MaxMin, &problem, &power, &dither)?;
        println!(
            "{kind}: no dithering {:.2} dB, coarse {:.2} dB, fine-tuned {:.2} dB ({} probes, {} fine steps, {:?}, {:.1?})",
            linear_to_db(plain.objective),
            linear_to_db(sol.coarse.objective),
            linear_to_db(sol.best.objective),
            sol.probes.len(),
            sol.fine.len() - 1,
            sol.fine_stop,
            start.elapsed(),
        );
        let sigma: Vec<String> = sol
            .best
            .sigma
            .iter()
            .map(|s| format!("{:.1}", sigma_to_dbm(*s)))
            .collect();
        let rho: Vec<String> = sol
            .best
            .rho
            .iter()
            .map(|r| format!("{:.1}", watts_to_dbm(*r)))
            .collect();
        println!(
            "  noise+dither dBm [{}], UE power dBm [{}]",
            sigma.join(", "),
            rho.join(", ")
        );
    }
    Ok(())
}
