//! Unit conversions. Powers are dBm at module boundaries and watts inside
//! the physics; frequencies are THz/GHz at boundaries and Hz inside.

/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

pub fn w_to_dbm(w: f64) -> f64 {
    lin_to_db(w * 1e3)
}

pub fn thz_to_hz(thz: f64) -> f64 {
    thz * 1e12
}

pub fn ghz_to_hz(ghz: f64) -> f64 {
    ghz * 1e9
}

/// dB/km to the field attenuation coefficient in 1/km.
pub fn db_per_km_to_neper(db_per_km: f64) -> f64 {
    db_per_km / (10.0 * std::f64::consts::E.log10())
}

/// ps²/km to s²/km.
pub fn ps2_to_s2(ps2: f64) -> f64 {
    ps2 * 1e-24
}
