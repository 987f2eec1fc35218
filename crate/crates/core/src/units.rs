//! Power unit conversions. Everything inside the crate is linear watts.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Dithering standard deviation (√W) expressed as the equivalent noise power in dBm.
pub fn sigma_to_dbm(sigma: f64) -> f64 {
    watts_to_dbm(sigma * sigma)
}

pub fn dbm_to_sigma(dbm: f64) -> f64 {
    dbm_to_watts(dbm).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((watts_to_dbm(1e-3)).abs() < 1e-12);
        assert!((sigma_to_dbm(dbm_to_sigma(-95.0)) + 95.0).abs() < 1e-12);
    }
}
