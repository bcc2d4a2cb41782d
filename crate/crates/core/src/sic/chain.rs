//! End-to-end link-level SI reduction chain.
//!
//! One calibration frame (desired signal absent) runs through:
//! PA -> SI channel + receiver noise -> optional two-tap RF canceller ->
//! channel-select filter -> AGC/ADC -> Hammerstein digital canceller.
//! Powers are measured on the active subcarriers after each stage and
//! include the receiver noise, so a perfect canceller ends at the noise floor.

use log::debug;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{apply_analog_canceller, default_delays, fit_hammerstein, tune_two_tap, Framing, HammersteinSpec};
use crate::error::{Error, Result};
use crate::geometry::{direction, si_channel, AntennaPattern, ReflectorConfig, SiGeometry, Vec3, CARRIER_28GHZ};
use crate::ofdm::{band_limit, estimate_channel_ls, in_band_power, modulate, qpsk_grid, useful_power, OfdmConfig, OfdmFft, OfdmFrame};
use crate::rf::{awgn, in_band_noise, pa_apply, AdcModel, NoiseModel, PaModel, EFFECTIVE_ADC_RANGE_DB};
use crate::rng;
use crate::units::{dbm_to_mw, lin_to_db, mean_power, mw_to_dbm, normalize_power};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnalogMode {
    Off,
    On,
    /// Engage the RF canceller only when the SI after propagation comes
    /// within `analog_margin_db` of the ADC's effective range.
    #[default]
    Auto,
}

/// Everything the link-level chain needs for one IAB-node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    pub tx_power_dbm: f64,
    pub carrier_freq_hz: f64,
    pub antenna_separation_m: f64,
    /// Direction from the DU (Tx) antenna to the MT (Rx) antenna.
    pub rx_offset_direction: [f64; 3],
    pub du_azimuth_deg: f64,
    pub du_downtilt_deg: f64,
    pub mt_azimuth_deg: f64,
    pub mt_downtilt_deg: f64,
    pub du_pattern: AntennaPattern,
    pub mt_pattern: AntennaPattern,
    pub cross_pol_isolation_db: f64,
    pub reflectors: ReflectorConfig,
    pub ofdm: OfdmConfig,
    /// Symbols per calibration frame; the first one is the pilot.
    pub n_symbols: usize,
    pub pa: PaModel,
    /// PA drive level below the input-referred 1 dB compression point.
    pub pa_input_backoff_db: f64,
    pub adc: AdcModel,
    pub noise: NoiseModel,
    pub effective_adc_range_db: f64,
    pub analog: AnalogMode,
    pub analog_margin_db: f64,
    /// Canceller delays; defaults depend on the separation.
    pub canceller_delays_s: Option<[f64; 2]>,
    pub hammerstein: HammersteinSpec,
    /// Zero the SI channel entirely.
    pub ideal_fd: bool,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 43.0,
            carrier_freq_hz: CARRIER_28GHZ,
            antenna_separation_m: 1.0,
            rx_offset_direction: [0.0, 0.0, -1.0],
            du_azimuth_deg: 0.0,
            du_downtilt_deg: 30.0,
            mt_azimuth_deg: 180.0,
            mt_downtilt_deg: 0.0,
            du_pattern: AntennaPattern::iab(),
            mt_pattern: AntennaPattern::iab(),
            cross_pol_isolation_db: 0.0,
            reflectors: ReflectorConfig::default(),
            ofdm: OfdmConfig::default(),
            n_symbols: 8,
            pa: PaModel::default(),
            pa_input_backoff_db: 10.0,
            adc: AdcModel::default(),
            noise: NoiseModel::default(),
            effective_adc_range_db: EFFECTIVE_ADC_RANGE_DB,
            analog: AnalogMode::Auto,
            analog_margin_db: 10.0,
            canceller_delays_s: None,
            hammerstein: HammersteinSpec::default(),
            ideal_fd: false,
        }
    }
}

impl LinkParams {
    pub fn with_separation(d: f64) -> Self {
        Self {
            antenna_separation_m: d,
            ..Self::default()
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let p = |f: &str| format!("{path}.{f}");
        if !(self.antenna_separation_m > 0.0) {
            return Err(Error::invalid(p("antenna_separation_m"), "must be positive"));
        }
        if !(self.cross_pol_isolation_db >= 0.0) {
            return Err(Error::invalid(p("cross_pol_isolation_db"), "must be non-negative"));
        }
        if !(self.carrier_freq_hz > 0.0) {
            return Err(Error::invalid(p("carrier_freq_hz"), "must be positive"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::invalid(p("tx_power_dbm"), "must be finite"));
        }
        if Vec3::from(self.rx_offset_direction).norm() == 0.0 {
            return Err(Error::invalid(p("rx_offset_direction"), "must be non-zero"));
        }
        if self.n_symbols < 2 {
            return Err(Error::invalid(p("n_symbols"), "need a pilot and at least one data symbol"));
        }
        if !(self.effective_adc_range_db > 0.0) {
            return Err(Error::invalid(p("effective_adc_range_db"), "must be positive"));
        }
        if !self.pa_input_backoff_db.is_finite() || !self.analog_margin_db.is_finite() {
            return Err(Error::invalid(p("pa_input_backoff_db"), "back-off and margin must be finite"));
        }
        self.du_pattern.validate(&p("du_pattern"))?;
        self.mt_pattern.validate(&p("mt_pattern"))?;
        self.reflectors.validate(&p("reflectors"))?;
        self.ofdm.validate(&p("ofdm"))?;
        self.pa.validate(&p("pa"))?;
        self.adc.validate(&p("adc"))?;
        self.noise.validate(&p("noise"))?;
        self.hammerstein.validate(&p("hammerstein"))?;
        if let Some(d) = self.canceller_delays_s {
            if !(d[0] >= 0.0 && d[0] < d[1] && d[1] < self.ofdm.cp_duration_s()) {
                return Err(Error::invalid(
                    p("canceller_delays_s"),
                    "need 0 <= t1 < t2 < cyclic prefix duration",
                ));
            }
        }
        Ok(())
    }

    pub fn si_geometry(&self) -> SiGeometry {
        SiGeometry {
            antenna_separation_m: self.antenna_separation_m,
            tx_orientation: direction(self.du_azimuth_deg, self.du_downtilt_deg),
            rx_orientation: direction(self.mt_azimuth_deg, self.mt_downtilt_deg),
            rx_offset_direction: Vec3::from(self.rx_offset_direction),
            cross_pol_isolation_db: self.cross_pol_isolation_db,
        }
    }

    pub fn canceller_delays(&self) -> [f64; 2] {
        self.canceller_delays_s
            .unwrap_or_else(|| default_delays(self.antenna_separation_m))
    }
}

/// SI power after each reduction domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub tx_power_dbm: f64,
    pub after_propagation_dbm: f64,
    pub after_analog_dbm: f64,
    pub after_digital_dbm: f64,
    /// Propagation, analog and digital contributions.
    pub per_domain_db: [f64; 3],
    pub noise_floor_dbm: f64,
    pub analog_applied: bool,
    pub digital_applied: bool,
    /// The SI entering the ADC exceeded the effective range above the floor.
    pub saturated: bool,
    pub conditioning_warning: bool,
    pub reflection_taps: usize,
}

impl ReductionReport {
    pub fn total_reduction_db(&self) -> f64 {
        self.tx_power_dbm - self.after_digital_dbm
    }

    /// SI power left once the receiver noise is removed from a stage power.
    pub fn si_only_dbm(&self, stage_dbm: f64) -> f64 {
        let excess = dbm_to_mw(stage_dbm) - dbm_to_mw(self.noise_floor_dbm);
        if excess > 0.0 {
            mw_to_dbm(excess)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn ideal(tx_power_dbm: f64, floor: f64) -> Self {
        Self {
            tx_power_dbm,
            after_propagation_dbm: floor,
            after_analog_dbm: floor,
            after_digital_dbm: floor,
            per_domain_db: [tx_power_dbm - floor, 0.0, 0.0],
            noise_floor_dbm: floor,
            analog_applied: false,
            digital_applied: false,
            saturated: false,
            conditioning_warning: false,
            reflection_taps: 0,
        }
    }
}

/// Run the SI reduction chain for one drop.
pub fn run_link_chain(params: &LinkParams, seed: u64) -> Result<ReductionReport> {
    params.validate("link")?;
    let floor = params.noise.floor_dbm();
    if params.ideal_fd {
        return Ok(ReductionReport::ideal(params.tx_power_dbm, floor));
    }
    let cfg = params.ofdm;
    let fft = OfdmFft::new(&cfg);
    let range = params.effective_adc_range_db;

    let frame = OfdmFrame::random_qpsk(&cfg, params.n_symbols, 1, &mut rng::stream(seed, &[rng::DATA]))?;
    let x = &frame.samples;

    // PA driven below compression, then referred to the configured Tx power.
    let drive = dbm_to_mw(params.pa.input_p1db_dbm() - params.pa_input_backoff_db);
    let x_in: Vec<Complex64> = x.iter().map(|v| v * drive.sqrt()).collect();
    let mut pa_out = pa_apply(&x_in, &params.pa);
    let g = (dbm_to_mw(params.tx_power_dbm) / useful_power(&pa_out, &cfg)?).sqrt();
    pa_out.iter_mut().for_each(|v| *v *= g);

    let channel = si_channel(
        &params.si_geometry(),
        &params.du_pattern,
        &params.mt_pattern,
        &params.reflectors,
        params.carrier_freq_hz,
        seed,
    )?;
    let h = channel.frequency_response(&cfg.all_freqs_hz());
    let si = fft.map_symbols(&pa_out, |_, spec| spec.iter_mut().zip(&h).for_each(|(s, hk)| *s *= hk))?;

    let floor_mw = dbm_to_mw(floor);
    let mut noise = in_band_noise(&fft, params.n_symbols, floor_mw, &mut rng::stream(seed, &[rng::NOISE]));
    let ns = (floor_mw / in_band_power(&fft, &noise)?).sqrt();
    noise.iter_mut().for_each(|v| *v *= ns);
    let rx: Vec<Complex64> = si.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let after_prop = mw_to_dbm(in_band_power(&fft, &rx)?);

    // Analog-circuit domain.
    let engage = match params.analog {
        AnalogMode::Off => false,
        AnalogMode::On => true,
        AnalogMode::Auto => after_prop > floor + range - params.analog_margin_db,
    };
    let mut adc_in = band_limit(&fft, &rx)?;
    let mut after_analog = after_prop;
    let mut analog_applied = false;
    if engage {
        let bins = cfg.active_bins();
        let y0 = &fft.spectra(&rx[..cfg.symbol_len()])?[0];
        let p0 = &fft.spectra(&pa_out[..cfg.symbol_len()])?[0];
        let yk: Vec<Complex64> = bins.iter().map(|&b| y0[b]).collect();
        let pk: Vec<Complex64> = bins.iter().map(|&b| p0[b]).collect();
        let h_est = estimate_channel_ls(&[yk], &[pk])?;
        let taps = tune_two_tap(&h_est, &cfg.active_freqs_hz(), params.canceller_delays(), &cfg)?;
        let residual = band_limit(&fft, &apply_analog_canceller(&pa_out, &rx, &taps, &fft)?)?;
        let p = mw_to_dbm(in_band_power(&fft, &residual)?);
        if p < after_prop {
            adc_in = residual;
            after_analog = p;
            analog_applied = true;
        } else {
            debug!("analog canceller bypassed: {p:.2} dBm would not improve on {after_prop:.2} dBm");
        }
    }

    // ADC with the gray-zone admission rule.
    let saturated = after_analog > floor + range;
    let q = params.adc.quantize(&adc_in);
    let digital_in: Vec<Complex64> = q.samples.iter().map(|v| v / q.scale).collect();

    let fit = fit_hammerstein(x, &digital_in, &params.hammerstein, Framing::Ofdm(cfg))?;
    let quantization_limit = dbm_to_mw(after_analog - range);
    let mut after_digital = mw_to_dbm(fit.residual_power.max(quantization_limit));
    let digital_applied = after_digital < after_analog;
    if !digital_applied {
        after_digital = after_analog;
    }

    Ok(ReductionReport {
        tx_power_dbm: params.tx_power_dbm,
        after_propagation_dbm: after_prop,
        after_analog_dbm: after_analog,
        after_digital_dbm: after_digital,
        per_domain_db: [
            params.tx_power_dbm - after_prop,
            after_prop - after_analog,
            after_analog - after_digital,
        ],
        noise_floor_dbm: floor,
        analog_applied,
        digital_applied,
        saturated,
        conditioning_warning: fit.conditioning_warning,
        reflection_taps: channel.taps().len() - 1,
    })
}

/// SNR (dB) of a desired OFDM signal received together with SI that is
/// `si_to_signal_db` stronger, after the AGC/ADC and a genie digital
/// canceller that removes the SI exactly. Only quantisation noise remains,
/// so this bounds what any digital canceller can reach.
pub fn quantization_limited_snr_db(si_to_signal_db: f64, adc: &AdcModel, cfg: &OfdmConfig, seed: u64) -> Result<f64> {
    let n_sym = 4;
    let fft = OfdmFft::new(cfg);
    let desired = modulate(&qpsk_grid(n_sym, cfg.active_subcarriers, &mut rng::stream(seed, &[rng::DESIRED])), cfg)?;
    let mut si = modulate(&qpsk_grid(n_sym, cfg.active_subcarriers, &mut rng::stream(seed, &[rng::DATA])), cfg)?;
    normalize_power(&mut si, mean_power(&desired) * 10f64.powf(si_to_signal_db / 10.0));
    let input: Vec<Complex64> = desired.iter().zip(&si).map(|(a, b)| a + b).collect();
    let q = adc.quantize(&input);
    let err: Vec<Complex64> = q
        .samples
        .iter()
        .zip(&si)
        .zip(&desired)
        .map(|((y, s), d)| y / q.scale - s - d)
        .collect();
    Ok(lin_to_db(in_band_power(&fft, &desired)? / in_band_power(&fft, &err)?))
}

/// Complex white noise helper kept for examples that build custom chains.
pub fn thermal_noise(n: usize, floor_dbm: f64, seed: u64) -> Vec<Complex64> {
    awgn(n, dbm_to_mw(floor_dbm), &mut rng::stream(seed, &[rng::NOISE]))
}
