//! dB conversions. Everything inside the library is linear; these are only
//! used when reading configs and writing CSV.

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Power ratio in dB, clipped from below at `floor_db`.
pub fn ratio_db_floored(x: f64, reference: f64, floor_db: f64) -> f64 {
    if !(x > 0.0) || !(reference > 0.0) {
        return floor_db;
    }
    linear_to_db(x / reference).max(floor_db)
}
