//! RF front-end impairments: Rapp power amplifier, AGC plus uniform ADC, and
//! thermal noise.
//!
//! Samples are complex baseband amplitudes with `|x|^2` in mW.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::OfdmFft;
use crate::units::{dbm_to_mw, lin_to_db, mean_power, THERMAL_NOISE_DBM_PER_HZ};

/// Effective ADC dynamic range usable by digital SIC for a 14-bit converter:
/// residual SI must arrive within this many dB of the noise floor.
pub const EFFECTIVE_ADC_RANGE_DB: f64 = 72.24;

/// Rapp solid-state PA, AM/AM only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaModel {
    pub gain_db: f64,
    /// Output-referred 1 dB compression point.
    pub p1db_dbm: f64,
    pub rapp_smoothness: f64,
}

impl Default for PaModel {
    fn default() -> Self {
        Self {
            gain_db: 20.0,
            p1db_dbm: 43.0,
            rapp_smoothness: 2.0,
        }
    }
}

impl PaModel {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.rapp_smoothness > 0.0) {
            return Err(Error::invalid(format!("{path}.rapp_smoothness"), "must be positive"));
        }
        if !self.gain_db.is_finite() || !self.p1db_dbm.is_finite() {
            return Err(Error::invalid(path, "gain_db and p1db_dbm must be finite"));
        }
        Ok(())
    }

    /// Input power at which the gain has compressed by 1 dB.
    pub fn input_p1db_dbm(&self) -> f64 {
        self.p1db_dbm - self.gain_db + 1.0
    }

    /// Output saturation amplitude (sqrt mW) placing the 1 dB compression
    /// point at `p1db_dbm`.
    pub fn saturation_amplitude(&self) -> f64 {
        let p = self.rapp_smoothness;
        let ratio = (10f64.powf(p / 10.0) - 1.0).powf(1.0 / (2.0 * p));
        dbm_to_mw(self.p1db_dbm).sqrt() * 10f64.powf(1.0 / 20.0) / ratio
    }

    /// Saturation level expressed as a power.
    pub fn vsat_dbm(&self) -> f64 {
        20.0 * self.saturation_amplitude().log10()
    }

    #[inline]
    fn apply_one(&self, g: f64, a_sat: f64, x: Complex64) -> Complex64 {
        let y = x * g;
        let two_p = 2.0 * self.rapp_smoothness;
        y / (1.0 + (y.norm() / a_sat).powf(two_p)).powf(1.0 / two_p)
    }
}

/// Rapp AM/AM: `y = Gx / (1 + (|Gx|/Asat)^(2p))^(1/(2p))`.
pub fn pa_apply(samples: &[Complex64], pa: &PaModel) -> Vec<Complex64> {
    let g = 10f64.powf(pa.gain_db / 20.0);
    let a_sat = pa.saturation_amplitude();
    samples.iter().map(|&x| pa.apply_one(g, a_sat, x)).collect()
}

/// Uniform mid-rise ADC behind an RMS-holding AGC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcModel {
    pub bits: u32,
    /// Power of a complex exponential whose I and Q rails just reach the
    /// clip level.
    pub full_scale_dbm: f64,
    /// Input RMS is held this far below full scale.
    pub agc_backoff_db: f64,
}

impl Default for AdcModel {
    fn default() -> Self {
        Self {
            bits: 14,
            full_scale_dbm: 0.0,
            agc_backoff_db: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub samples: Vec<Complex64>,
    /// Amplitude factor the AGC applied before quantising.
    pub scale: f64,
}

impl AdcModel {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(1..=30).contains(&self.bits) {
            return Err(Error::invalid(format!("{path}.bits"), "must be within 1..=30"));
        }
        if !self.full_scale_dbm.is_finite() || !self.agc_backoff_db.is_finite() {
            return Err(Error::invalid(path, "full_scale_dbm and agc_backoff_db must be finite"));
        }
        Ok(())
    }

    /// Clip level of each rail.
    pub fn clip_level(&self) -> f64 {
        dbm_to_mw(self.full_scale_dbm).sqrt()
    }

    pub fn step(&self) -> f64 {
        2.0 * self.clip_level() / 2f64.powi(self.bits as i32)
    }

    /// Ideal full-scale sinusoid SQNR, `6.02 b + 1.76` dB (exact form).
    pub fn ideal_sqnr_db(&self) -> f64 {
        lin_to_db(1.5) + self.bits as f64 * lin_to_db(4.0)
    }

    /// Amplitude factor that places the RMS of `samples` at the AGC target.
    pub fn agc_scale(&self, samples: &[Complex64]) -> Option<f64> {
        let p = mean_power(samples);
        (p > 0.0).then(|| (dbm_to_mw(self.full_scale_dbm - self.agc_backoff_db) / p).sqrt())
    }

    fn quantize_rail(&self, v: f64) -> f64 {
        let step = self.step();
        let top = 2f64.powi(self.bits as i32 - 1);
        let idx = (v / step).floor().clamp(-top, top - 1.0);
        (idx + 0.5) * step
    }

    /// Quantise `samples` after multiplying them by `scale`; output stays in
    /// ADC units.
    pub fn quantize_with_scale(&self, samples: &[Complex64], scale: f64) -> Vec<Complex64> {
        samples
            .iter()
            .map(|s| {
                let v = s * scale;
                Complex64::new(self.quantize_rail(v.re), self.quantize_rail(v.im))
            })
            .collect()
    }

    /// AGC then quantise. Zero-power input bypasses the AGC and yields zeros
    /// with a unit scale.
    pub fn quantize(&self, samples: &[Complex64]) -> Quantized {
        match self.agc_scale(samples) {
            Some(scale) => Quantized {
                samples: self.quantize_with_scale(samples, scale),
                scale,
            },
            None => Quantized {
                samples: vec![Complex64::default(); samples.len()],
                scale: 1.0,
            },
        }
    }
}

pub fn adc_quantize(samples: &[Complex64], adc: &AdcModel) -> Quantized {
    adc.quantize(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            bandwidth_hz: 120e6,
            noise_figure_db: 3.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::invalid(format!("{path}.bandwidth_hz"), "must be positive"));
        }
        if !self.noise_figure_db.is_finite() {
            return Err(Error::invalid(format!("{path}.noise_figure_db"), "must be finite"));
        }
        Ok(())
    }

    pub fn floor_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }
}

pub fn noise_floor_dbm(noise: &NoiseModel) -> f64 {
    noise.floor_dbm()
}

/// SI reduction needed to bring `tx_power_dbm` down to the noise floor.
pub fn required_reduction_db(tx_power_dbm: f64, floor_dbm: f64) -> f64 {
    tx_power_dbm - floor_dbm
}

/// Gray-zone admission: digital SIC can only work if the SI entering the ADC
/// is within `range_db` of the noise floor.
pub fn within_gray_zone(si_dbm: f64, floor_dbm: f64, range_db: f64) -> bool {
    si_dbm <= floor_dbm + range_db
}

/// Circular complex white Gaussian noise of the given mean power.
pub fn awgn<R: Rng>(n: usize, power_mw: f64, rng: &mut R) -> Vec<Complex64> {
    let sd = (power_mw / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * sd, im * sd)
        })
        .collect()
}

/// Gaussian noise confined to the active subcarriers, with `power_mw` of
/// in-band power, laid out as a CP-OFDM frame of `n_symbols` symbols.
pub fn in_band_noise<R: Rng>(fft: &OfdmFft, n_symbols: usize, power_mw: f64, rng: &mut R) -> Vec<Complex64> {
    let cfg = *fft.config();
    let bins = cfg.active_bins();
    let (n, cp) = (cfg.fft_size, cfg.cp_len);
    // Bin variance v gives time-domain power K v / N^2 after the inverse DFT
    // and the 1/N of map_symbols; solve for v.
    let per_bin = power_mw * (n * n) as f64 / bins.len() as f64;
    let mut out = Vec::with_capacity(n_symbols * (n + cp));
    let mut buf = vec![Complex64::default(); n];
    for _ in 0..n_symbols {
        buf.iter_mut().for_each(|b| *b = Complex64::default());
        let draws = awgn(bins.len(), per_bin, rng);
        for (&b, d) in bins.iter().zip(draws) {
            buf[b] = d;
        }
        fft.inverse(&mut buf);
        let scale = 1.0 / n as f64;
        let start = out.len();
        out.extend(buf[n - cp..].iter().map(|v| v * scale));
        out.extend(buf.iter().map(|v| v * scale));
        debug_assert_eq!(out.len() - start, n + cp);
    }
    out
}
