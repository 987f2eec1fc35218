//! Minimum sum power meeting a common SINDR target for four UEs, solved by
//! block coordinate descent, by the primal-dual gradient method, and by the
//! joint power/dithering search on top of BCD.
//!
//! ```text
//! cargo run --release --example min_power [target_db ...]
//! ```

use onebit_dmimo::dither::{optimize_dithering, DitherConfig, DitherProblem, ObjectiveKind};
use onebit_dmimo::geometry::{build_geometry, draw_channels, GeometryConfig};
use onebit_dmimo::power::{
    minpower_bcd, minpower_gradient, OptRunRecord, OptimizerConfig, PowerProblem,
};
use onebit_dmimo::receivers::ReceiverKind;
use onebit_dmimo::units::{db_to_linear, dbm_to_sigma, linear_to_db, watts_to_dbm};

fn summary(run: &OptRunRecord) -> String {
    format!(
        "{:7.2} dBm, min SINDR {:5.2} dB, {} iterations, {}",
        watts_to_dbm(run.best.sum_power()),
        linear_to_db(run.best.min_sindr()),
        run.iterates.len() - 1,
        run.termination
    )
}

fn main() -> onebit_dmimo::Result<()> {
    let mut targets: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("target_db"))
        .collect();
    if targets.is_empty() {
        targets = vec![0.0, 5.0];
    }
    let geometry = build_geometry(&GeometryConfig::default())?;
    let channels = draw_channels(&geometry, 1)?;
    let sigma_min = dbm_to_sigma(-95.0);
    let power = OptimizerConfig::default();
    let dither = DitherConfig::default();
    let k = channels.num_ue();

    for kind in ReceiverKind::ALL {
        for &target_db in &targets {
            let t = vec![db_to_linear(target_db); k];
            let problem = PowerProblem::new(
                &channels,
                kind,
                vec![sigma_min; geometry.num_rrh],
                sigma_min,
            )
            .with_targets(t.clone());
            println!("{kind}, target {target_db} dB");
            println!("  bcd       {}", summary(&minpower_bcd(&problem, &power)?));
            println!(
                "  gradient  {}",
                summary(&minpower_gradient(&problem, &power)?)
            );
            let joint = DitherProblem::new(&channels, geometry.gain_max.clone(), kind, sigma_min)
                .with_targets(t);
            let sol = optimize_dithering(ObjectiveKind::MinPower, &joint, &power, &dither)?;
            println!(
                "  dithering {:7.2} dBm, feasible {}, {} probes",
                watts_to_dbm(sol.best.objective),
                sol.best.feasible,
                sol.probes.len()
            );
        }
    }
    Ok(())
}
