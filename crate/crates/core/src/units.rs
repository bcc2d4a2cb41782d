//! Decibel conversions and power measurement helpers.

use num_complex::Complex64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// dBm to milliwatts.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_lin(dbm)
}

/// Milliwatts to dBm. Zero power maps to negative infinity.
#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    lin_to_db(mw)
}

/// Mean of `|x|^2` over the slice; 0 for an empty slice.
pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Sum of two powers given in dBm.
pub fn dbm_sum(a_dbm: f64, b_dbm: f64) -> f64 {
    mw_to_dbm(dbm_to_mw(a_dbm) + dbm_to_mw(b_dbm))
}

/// Scale `samples` in place so their mean power equals `target_mw`.
/// Zero-power input is left untouched.
pub fn normalize_power(samples: &mut [Complex64], target_mw: f64) {
    let p = mean_power(samples);
    if p > 0.0 {
        let g = (target_mw / p).sqrt();
        samples.iter_mut().for_each(|s| *s *= g);
    }
}
