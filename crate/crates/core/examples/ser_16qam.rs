//! 16-QAM symbol error rate at the max-min operating point, with and without
//! dithering, measured by Monte Carlo through the 1-bit receiver chain.
//!
//! ```text
//! cargo run --release --example ser_16qam [n_symbols] [rho_ue_dbm]
//! ```

use onebit_dmimo::dither::{
    optimize_dithering, without_dithering, DitherConfig, DitherProblem, JointPoint, ObjectiveKind,
};
use onebit_dmimo::geometry::{build_geometry, draw_channels, ChannelState, GeometryConfig};
use onebit_dmimo::linksim::{
    detect_qam16, simulate_symbols, Constellation, GainEstimate, SerResult,
};
use onebit_dmimo::power::OptimizerConfig;
use onebit_dmimo::quantized::{PowerDitherPoint, Quantizer};
use onebit_dmimo::receivers::{evaluate, ReceiverKind};
use onebit_dmimo::units::{dbm_to_sigma, dbm_to_watts, linear_to_db};

fn ser_at(
    channels: &ChannelState,
    sol: &JointPoint,
    sigma_min: f64,
    kind: ReceiverKind,
    n: usize,
) -> onebit_dmimo::Result<SerResult> {
    let point = PowerDitherPoint::new(sol.rho.clone(), sol.sigma.clone(), sigma_min)?;
    let bank = evaluate(channels, &point, kind, Quantizer::OneBit)?.receivers();
    let symbols = simulate_symbols(
        channels,
        &point,
        &bank,
        Quantizer::OneBit,
        n,
        Constellation::Qam16,
        11,
    )?;
    detect_qam16(
        &symbols,
        channels,
        &point,
        &bank,
        Quantizer::OneBit,
        GainEstimate::Analytic,
    )
}

fn main() -> onebit_dmimo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args
        .first()
        .map_or(100_000, |a| a.parse().expect("n_symbols"));
    let cap_dbm: f64 = args.get(1).map_or(25.0, |a| a.parse().expect("rho_ue_dbm"));

    let geometry = build_geometry(&GeometryConfig::default())?;
    let channels = draw_channels(&geometry, 1)?;
    let sigma_min = dbm_to_sigma(-95.0);
    let power = OptimizerConfig::default();
    let dither = DitherConfig::default();

    for kind in ReceiverKind::ALL {
        let problem = DitherProblem::new(&channels, geometry.gain_max.clone(), kind, sigma_min)
            .with_cap(dbm_to_watts(cap_dbm));
        let plain = without_dithering(ObjectiveKind::MaxMin, &problem, &power, &dither)?;
        let tuned = optimize_dithering(ObjectiveKind::MaxMin, &problem, &power, &dither)?.best;
        for (label, sol) in [("no dithering", &plain), ("dithering", &tuned)] {
            let ser = ser_at(&channels, sol, sigma_min, kind, n)?;
            println!(
                "{kind} {label:>12}: min SINDR {:5.2} dB, worst-UE SER {:.4e} ± {:.1e} ({} symbols)",
                linear_to_db(sol.objective),
                ser.max_ser,
                ser.max_half_width,
                ser.n_symbols
            );
        }
    }
    Ok(())
}
