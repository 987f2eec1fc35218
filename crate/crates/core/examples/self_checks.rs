//! Runs the built-in oracle suites: analytic derivatives against finite
//! differences, the arcsine law against Monte Carlo, joint power/dither scale
//! invariance, BMMSE dominating BMRC, and the BCD stopping rules.
//!
//! ```text
//! cargo run --release --example self_checks [cr_samples]
//! ```

use onebit_dmimo::validate::{run_suites, Suite, ValidateOptions};

fn main() {
    let mut opts = ValidateOptions::default();
    if let Some(n) = std::env::args().nth(1) {
        opts.cr_samples = n.parse().expect("cr_samples");
    }
    let mut ok = true;
    for r in run_suites(&Suite::ALL, &opts) {
        println!(
            "{:<15} {} ({} checks, worst {:.2e}, {:.1?})",
            r.suite.name(),
            if r.passed() { "ok" } else { "FAILED" },
            r.checks,
            r.worst,
            r.elapsed
        );
        for f in &r.failures {
            println!("  {f}");
        }
        ok &= r.passed();
    }
    std::process::exit(if ok { 0 } else { 1 });
}
