//! Compares the closed-form covariance of 1-bit quantized Gaussian vectors
//! (arcsine law) and of the Bussgang distortion against Monte Carlo sample
//! covariances.
//!
//! ```text
//! cargo run --release --example arcsine_law_check [n_samples] [dimension]
//! ```

use onebit_dmimo::instances::random_covariance;
use onebit_dmimo::linksim::{max_entry_deviation, quantizer_moments};
use onebit_dmimo::quantized::{arcsine_covariance, bussgang_gain, qd_covariance};

fn main() -> onebit_dmimo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args
        .first()
        .map_or(1_000_000, |a| a.parse().expect("n_samples"));
    let dim: usize = args.get(1).map_or(4, |a| a.parse().expect("dimension"));
    println!("matrix  max|C_r - MC|  max|C_q - MC|");
    for seed in 0..5 {
        let c_y = random_covariance(seed, dim);
        let c_r = arcsine_covariance(&c_y)?;
        let c_q = qd_covariance(&c_y, &bussgang_gain(&c_y)?, &c_r);
        let mc = quantizer_moments(&c_y, n, 1000 + seed)?;
        println!(
            "{seed:>6}  {:>13.2e}  {:>13.2e}",
            max_entry_deviation(&c_r, &mc.c_r),
            max_entry_deviation(&c_q, &mc.c_q)
        );
    }
    println!(
        "sampling error scales as 1/sqrt(n) = {:.1e}",
        1.0 / (n as f64).sqrt()
    );
    Ok(())
}
