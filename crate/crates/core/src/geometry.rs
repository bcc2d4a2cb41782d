//! Propagation-domain quantities: free-space path loss, directional antenna
//! patterns, tapped-delay-line SI channels and link budgets.
//!
//! Positions are metres in a right-handed frame with `z` up. Antenna
//! orientations are unit vectors along boresight.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng;
use crate::units::SPEED_OF_LIGHT;

pub type Vec3 = Vector3<f64>;

/// Carrier frequency used throughout the simulator.
pub const CARRIER_28GHZ: f64 = 28e9;

/// Friis free-space path loss in dB.
pub fn fspl_db(distance_m: f64, freq_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !(freq_hz > 0.0) {
        return Err(Error::Domain(format!(
            "free-space path loss needs positive distance and frequency (got {distance_m} m, {freq_hz} Hz)"
        )));
    }
    Ok(20.0 * (4.0 * PI * distance_m * freq_hz / SPEED_OF_LIGHT).log10())
}

/// Angle between two (not necessarily unit) vectors, in degrees within [0, 180].
pub fn angle_between_deg(a: &Vec3, b: &Vec3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Unit vector for an azimuth (counter-clockwise from +x) and a downtilt
/// below the horizon, both in degrees.
pub fn direction(azimuth_deg: f64, downtilt_deg: f64) -> Vec3 {
    let (az, el) = (azimuth_deg.to_radians(), -downtilt_deg.to_radians());
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Polarization {
    #[default]
    V,
    H,
}

/// Gaussian-mainlobe directional pattern clamped at a sidelobe floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaPattern {
    pub boresight_gain_dbi: f64,
    pub beamwidth_3db_deg: f64,
    pub sidelobe_floor_dbi: f64,
    #[serde(default)]
    pub polarization: Polarization,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self::iab()
    }
}

impl AntennaPattern {
    pub fn new(boresight_gain_dbi: f64, beamwidth_3db_deg: f64, sidelobe_floor_dbi: f64) -> Result<Self> {
        let p = Self {
            boresight_gain_dbi,
            beamwidth_3db_deg,
            sidelobe_floor_dbi,
            polarization: Polarization::V,
        };
        p.validate("antenna")?;
        Ok(p)
    }

    /// Rooftop DU/MT pattern: 20 dBi, 12 degree beamwidth.
    pub fn iab() -> Self {
        Self {
            boresight_gain_dbi: 20.0,
            beamwidth_3db_deg: 12.0,
            sidelobe_floor_dbi: -10.0,
            polarization: Polarization::V,
        }
    }

    /// Lens antenna of the 28 GHz measurement rig: 19.86 dBi, 13.4 degrees.
    pub fn prototype_lens() -> Self {
        Self {
            boresight_gain_dbi: 19.86,
            beamwidth_3db_deg: 13.4,
            sidelobe_floor_dbi: -10.0,
            polarization: Polarization::V,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.beamwidth_3db_deg > 0.0) {
            return Err(Error::invalid(format!("{path}.beamwidth_3db_deg"), "must be positive"));
        }
        if !(self.boresight_gain_dbi > self.sidelobe_floor_dbi) {
            return Err(Error::invalid(
                format!("{path}.sidelobe_floor_dbi"),
                "must be below the boresight gain",
            ));
        }
        Ok(())
    }

    /// Gain at an angular offset from boresight.
    pub fn gain_dbi(&self, offset_deg: f64) -> f64 {
        let x = offset_deg / self.beamwidth_3db_deg;
        (self.boresight_gain_dbi - 12.0 * x * x).max(self.sidelobe_floor_dbi)
    }

    /// Gain toward `target` for an antenna pointing along `boresight`.
    pub fn gain_toward_dbi(&self, boresight: &Vec3, target: &Vec3) -> f64 {
        self.gain_dbi(angle_between_deg(boresight, target))
    }
}

pub fn antenna_gain_dbi(pattern: &AntennaPattern, offset_deg: f64) -> f64 {
    pattern.gain_dbi(offset_deg)
}

/// Relative placement of a node's transmit (DU) and receive (MT) antennas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiGeometry {
    pub antenna_separation_m: f64,
    pub tx_orientation: Vec3,
    pub rx_orientation: Vec3,
    /// Direction from the Tx antenna to the Rx antenna.
    pub rx_offset_direction: Vec3,
    pub cross_pol_isolation_db: f64,
}

impl SiGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.antenna_separation_m > 0.0) {
            return Err(Error::invalid("antenna_separation_m", "must be positive"));
        }
        if !(self.cross_pol_isolation_db >= 0.0) {
            return Err(Error::invalid("cross_pol_isolation_db", "must be non-negative"));
        }
        for (name, v) in [
            ("tx_orientation", &self.tx_orientation),
            ("rx_orientation", &self.rx_orientation),
            ("rx_offset_direction", &self.rx_offset_direction),
        ] {
            if !(v.norm() > 0.0) {
                return Err(Error::invalid(name, "must be a non-zero vector"));
            }
        }
        Ok(())
    }

    /// Angular offsets (Tx, Rx) of the direct SI path from each boresight.
    pub fn direct_path_offsets_deg(&self) -> (f64, f64) {
        (
            angle_between_deg(&self.tx_orientation, &self.rx_offset_direction),
            angle_between_deg(&self.rx_orientation, &(-self.rx_offset_direction)),
        )
    }
}

/// Statistics of the seeded reflections added after the direct SI path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectorConfig {
    /// The tap count is drawn uniformly from `0..=max_taps`.
    pub max_taps: usize,
    pub min_excess_delay_s: f64,
    pub max_excess_delay_s: f64,
    /// Reflection power below the direct tap, dB (uniform between the bounds).
    pub min_rel_power_db: f64,
    pub max_rel_power_db: f64,
}

impl Default for ReflectorConfig {
    fn default() -> Self {
        Self {
            max_taps: 6,
            min_excess_delay_s: 1e-9,
            max_excess_delay_s: 20e-9,
            min_rel_power_db: 15.0,
            max_rel_power_db: 30.0,
        }
    }
}

impl ReflectorConfig {
    pub fn disabled() -> Self {
        Self {
            max_taps: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if self.max_taps > 6 {
            return Err(Error::invalid(format!("{path}.max_taps"), "at most 6 reflections"));
        }
        if !(self.min_excess_delay_s > 0.0 && self.max_excess_delay_s >= self.min_excess_delay_s) {
            return Err(Error::invalid(
                format!("{path}.max_excess_delay_s"),
                "need 0 < min_excess_delay_s <= max_excess_delay_s",
            ));
        }
        if !(self.min_rel_power_db >= 0.0 && self.max_rel_power_db >= self.min_rel_power_db) {
            return Err(Error::invalid(
                format!("{path}.max_rel_power_db"),
                "need 0 <= min_rel_power_db <= max_rel_power_db",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay_s: f64,
    pub gain: Complex64,
}

/// Tapped-delay-line channel; gains are complex linear amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse {
    taps: Vec<Tap>,
    pub carrier_freq_hz: f64,
}

impl ChannelImpulseResponse {
    /// Builds a channel, sorting taps by delay. Delays must be distinct and
    /// non-negative and the total power positive.
    pub fn new(mut taps: Vec<Tap>, carrier_freq_hz: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Domain("channel needs at least one tap".into()));
        }
        taps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
        if taps[0].delay_s < 0.0 || taps.windows(2).any(|w| w[1].delay_s <= w[0].delay_s) {
            return Err(Error::Domain("tap delays must be non-negative and distinct".into()));
        }
        let c = Self { taps, carrier_freq_hz };
        if !(c.total_power() > 0.0) {
            return Err(Error::Domain("channel has zero power".into()));
        }
        Ok(c)
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    /// Baseband frequency response at offsets `freqs_hz` from the carrier.
    pub fn frequency_response(&self, freqs_hz: &[f64]) -> Vec<Complex64> {
        freqs_hz
            .iter()
            .map(|&f| {
                self.taps
                    .iter()
                    .map(|t| t.gain * Complex64::from_polar(1.0, -2.0 * PI * f * t.delay_s))
                    .sum()
            })
            .collect()
    }
}

/// Power suppression (dB) of the direct SI path alone: path loss plus
/// antenna discrimination plus cross-polarisation isolation.
pub fn direct_path_suppression_db(
    geom: &SiGeometry,
    tx_pat: &AntennaPattern,
    rx_pat: &AntennaPattern,
    carrier_freq_hz: f64,
) -> Result<f64> {
    geom.validate()?;
    let (tx_off, rx_off) = geom.direct_path_offsets_deg();
    Ok(fspl_db(geom.antenna_separation_m, carrier_freq_hz)? - tx_pat.gain_dbi(tx_off) - rx_pat.gain_dbi(rx_off)
        + geom.cross_pol_isolation_db)
}

/// SI channel between a node's Tx and Rx antennas: a direct tap at `d/c`
/// followed by up to six seeded reflections.
pub fn si_channel(
    geom: &SiGeometry,
    tx_pat: &AntennaPattern,
    rx_pat: &AntennaPattern,
    reflectors: &ReflectorConfig,
    carrier_freq_hz: f64,
    seed: u64,
) -> Result<ChannelImpulseResponse> {
    reflectors.validate("reflectors")?;
    let suppression = direct_path_suppression_db(geom, tx_pat, rx_pat, carrier_freq_hz)?;
    let direct_delay = geom.antenna_separation_m / SPEED_OF_LIGHT;
    let direct_amp = 10f64.powf(-suppression / 20.0);
    let direct = Tap {
        delay_s: direct_delay,
        gain: Complex64::from_polar(direct_amp, -2.0 * PI * carrier_freq_hz * direct_delay),
    };

    let mut rng = rng::stream(seed, &[rng::REFLECTORS]);
    let count = rng.random_range(0..=reflectors.max_taps);
    let mut taps = vec![direct];
    while taps.len() < count + 1 {
        let excess = rng.random_range(reflectors.min_excess_delay_s..=reflectors.max_excess_delay_s);
        let rel_db = rng.random_range(reflectors.min_rel_power_db..=reflectors.max_rel_power_db);
        let phase = rng.random_range(0.0..2.0 * PI);
        let delay_s = direct_delay + excess;
        // Redraw on an exact delay collision; practically never taken.
        if taps.iter().any(|t| t.delay_s == delay_s) {
            continue;
        }
        taps.push(Tap {
            delay_s,
            gain: Complex64::from_polar(direct_amp * 10f64.powf(-rel_db / 20.0), phase),
        });
    }
    ChannelImpulseResponse::new(taps, carrier_freq_hz)
}

/// Antenna at one end of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Antenna {
    Isotropic { gain_dbi: f64 },
    Directional { pattern: AntennaPattern, boresight: Vec3 },
}

impl Antenna {
    pub fn gain_toward_dbi(&self, target: &Vec3) -> f64 {
        match self {
            Antenna::Isotropic { gain_dbi } => *gain_dbi,
            Antenna::Directional { pattern, boresight } => pattern.gain_toward_dbi(boresight, target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terminal {
    pub position: Vec3,
    pub antenna: Antenna,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudget {
    pub rx_power_dbm: f64,
    pub path_loss_db: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub shadowing_db: f64,
}

/// Log-normal shadowing draw for one link; zero when `sigma_db` is zero.
pub fn shadowing_db(sigma_db: f64, seed: u64) -> f64 {
    if sigma_db <= 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma_db).expect("positive sigma");
    normal.sample(&mut rng::stream(seed, &[rng::SHADOWING]))
}

/// Received power over a line-of-sight link with optional log-normal
/// shadowing (`shadow_sigma_db`, drawn from `shadow_seed`).
pub fn link_budget(
    tx: &Terminal,
    rx: &Terminal,
    tx_power_dbm: f64,
    carrier_freq_hz: f64,
    shadow_sigma_db: f64,
    shadow_seed: u64,
) -> Result<LinkBudget> {
    let tx_to_rx = rx.position - tx.position;
    let distance = tx_to_rx.norm();
    if !(distance > 0.0) {
        return Err(Error::Domain("link endpoints coincide".into()));
    }
    let path_loss_db = fspl_db(distance, carrier_freq_hz)?;
    let tx_gain_dbi = tx.antenna.gain_toward_dbi(&tx_to_rx);
    let rx_gain_dbi = rx.antenna.gain_toward_dbi(&(-tx_to_rx));
    let shadowing_db = shadowing_db(shadow_sigma_db, shadow_seed);
    Ok(LinkBudget {
        rx_power_dbm: tx_power_dbm + tx_gain_dbi + rx_gain_dbi - path_loss_db - shadowing_db,
        path_loss_db,
        tx_gain_dbi,
        rx_gain_dbi,
        shadowing_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // 20*log10(4*pi*d*f/c) evaluated at 30 digits with mpmath.
    const FSPL_1M: f64 = 61.390_943_848_727_76;
    const FSPL_0P1M: f64 = 41.390_943_848_727_76;

    fn facing(d: f64) -> SiGeometry {
        SiGeometry {
            antenna_separation_m: d,
            tx_orientation: Vec3::x(),
            rx_orientation: -Vec3::x(),
            rx_offset_direction: Vec3::x(),
            cross_pol_isolation_db: 0.0,
        }
    }

    fn averted(d: f64) -> SiGeometry {
        SiGeometry {
            tx_orientation: Vec3::y(),
            rx_orientation: Vec3::y(),
            ..facing(d)
        }
    }

    #[test]
    fn fspl_reference_values() {
        assert_abs_diff_eq!(fspl_db(1.0, 28e9).unwrap(), FSPL_1M, epsilon = 1e-9);
        assert_abs_diff_eq!(fspl_db(0.1, 28e9).unwrap(), FSPL_0P1M, epsilon = 1e-9);
        let doubled = fspl_db(2.0, 28e9).unwrap() - fspl_db(1.0, 28e9).unwrap();
        assert_abs_diff_eq!(doubled, 20.0 * 2f64.log10(), epsilon = 1e-12);
        assert!((fspl_db(2.0, 28e9).unwrap() - 67.41).abs() < 0.005);
    }

    #[test]
    fn fspl_rejects_non_positive() {
        assert!(fspl_db(0.0, 28e9).is_err());
        assert!(fspl_db(1.0, -1.0).is_err());
        assert!(fspl_db(f64::NAN, 28e9).is_err());
    }

    #[test]
    fn pattern_points() {
        let p = AntennaPattern::iab();
        assert_eq!(antenna_gain_dbi(&p, 0.0), 20.0);
        assert_abs_diff_eq!(p.gain_dbi(6.0), 17.0, epsilon = 1e-12);
        assert_eq!(p.gain_dbi(90.0), -10.0);
        let lens = AntennaPattern::prototype_lens();
        assert_abs_diff_eq!(lens.gain_dbi(6.7), 16.86, epsilon = 1e-12);
        assert!(AntennaPattern::new(5.0, 10.0, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn pattern_is_monotone(a in 0.0f64..180.0, b in 0.0f64..180.0) {
            let p = AntennaPattern::iab();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(p.gain_dbi(lo) >= p.gain_dbi(hi));
            prop_assert!(p.gain_dbi(hi) >= p.sidelobe_floor_dbi);
        }

        #[test]
        fn suppression_grows_with_separation(d1 in 0.05f64..5.0, d2 in 0.05f64..5.0, seed in any::<u64>()) {
            let p = AntennaPattern::iab();
            let r = ReflectorConfig::default();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let near = si_channel(&averted(lo), &p, &p, &r, CARRIER_28GHZ, seed).unwrap();
            let far = si_channel(&averted(hi), &p, &p, &r, CARRIER_28GHZ, seed).unwrap();
            prop_assert!(far.taps()[0].gain.norm() <= near.taps()[0].gain.norm());
            prop_assert!(far.total_power() <= near.total_power() * (1.0 + 1e-12));
        }

        #[test]
        fn cross_pol_adds_exactly(x in 0.0f64..40.0) {
            let p = AntennaPattern::iab();
            let base = direct_path_suppression_db(&averted(1.0), &p, &p, CARRIER_28GHZ).unwrap();
            let g = SiGeometry { cross_pol_isolation_db: x, ..averted(1.0) };
            let iso = direct_path_suppression_db(&g, &p, &p, CARRIER_28GHZ).unwrap();
            prop_assert!((iso - base - x).abs() < 1e-9);
        }
    }

    #[test]
    fn si_channel_direct_path_only() {
        let p = AntennaPattern::iab();
        let off = ReflectorConfig::disabled();
        let h = si_channel(&facing(1.0), &p, &p, &off, CARRIER_28GHZ, 1).unwrap();
        assert_eq!(h.taps().len(), 1);
        assert_abs_diff_eq!(h.taps()[0].delay_s, 1.0 / SPEED_OF_LIGHT, epsilon = 1e-20);
        let supp = -10.0 * h.total_power().log10();
        assert_abs_diff_eq!(supp, FSPL_1M - 40.0, epsilon = 1e-9);

        let h = si_channel(&averted(1.0), &p, &p, &off, CARRIER_28GHZ, 1).unwrap();
        assert_abs_diff_eq!(-10.0 * h.total_power().log10(), FSPL_1M + 20.0, epsilon = 1e-9);
    }

    #[test]
    fn si_channel_is_deterministic() {
        let p = AntennaPattern::iab();
        let r = ReflectorConfig::default();
        let a = si_channel(&averted(0.1), &p, &p, &r, CARRIER_28GHZ, 99).unwrap();
        let b = si_channel(&averted(0.1), &p, &p, &r, CARRIER_28GHZ, 99).unwrap();
        assert_eq!(a, b);
        let counts: std::collections::BTreeSet<usize> = (0..200)
            .map(|s| si_channel(&averted(0.1), &p, &p, &r, CARRIER_28GHZ, s).unwrap().taps().len())
            .collect();
        assert_eq!(counts, (1..=7).collect());
    }

    #[test]
    fn reflections_respect_statistics() {
        let p = AntennaPattern::iab();
        let r = ReflectorConfig::default();
        let g = averted(2.0);
        for seed in 0..100 {
            let h = si_channel(&g, &p, &p, &r, CARRIER_28GHZ, seed).unwrap();
            let d0 = h.taps()[0];
            for t in &h.taps()[1..] {
                let excess = t.delay_s - d0.delay_s;
                assert!((1e-9..=20e-9).contains(&excess));
                let rel = 20.0 * (d0.gain.norm() / t.gain.norm()).log10();
                assert!((15.0 - 1e-9..=30.0 + 1e-9).contains(&rel));
            }
        }
    }

    #[test]
    fn channel_rejects_bad_taps() {
        let t = |d: f64| Tap { delay_s: d, gain: Complex64::new(1.0, 0.0) };
        assert!(ChannelImpulseResponse::new(vec![], 28e9).is_err());
        assert!(ChannelImpulseResponse::new(vec![t(1e-9), t(1e-9)], 28e9).is_err());
        assert!(ChannelImpulseResponse::new(vec![t(-1e-9)], 28e9).is_err());
        let z = Tap { delay_s: 0.0, gain: Complex64::new(0.0, 0.0) };
        assert!(ChannelImpulseResponse::new(vec![z], 28e9).is_err());
    }

    fn boresight_pair(distance: f64) -> (Terminal, Terminal) {
        let p = AntennaPattern::iab();
        let tx = Terminal {
            position: Vec3::zeros(),
            antenna: Antenna::Directional { pattern: p, boresight: Vec3::x() },
        };
        let rx = Terminal {
            position: Vec3::new(distance, 0.0, 0.0),
            antenna: Antenna::Directional { pattern: p, boresight: -Vec3::x() },
        };
        (tx, rx)
    }

    #[test]
    fn link_budget_boresight_100m() {
        let (tx, rx) = boresight_pair(100.0);
        let lb = link_budget(&tx, &rx, 43.0, 28e9, 0.0, 0).unwrap();
        assert_abs_diff_eq!(lb.rx_power_dbm, 43.0 + 40.0 - (FSPL_1M + 40.0), epsilon = 1e-9);
        let sum = 43.0 + lb.tx_gain_dbi + lb.rx_gain_dbi - lb.path_loss_db - lb.shadowing_db;
        assert_abs_diff_eq!(lb.rx_power_dbm, sum, epsilon = 1e-9);
        // Reciprocity of the formula.
        let back = link_budget(&rx, &tx, 43.0, 28e9, 0.0, 0).unwrap();
        assert_abs_diff_eq!(back.rx_power_dbm, lb.rx_power_dbm, epsilon = 1e-12);
    }

    #[test]
    fn link_budget_rejects_coincident() {
        let (tx, _) = boresight_pair(1.0);
        assert!(link_budget(&tx, &tx, 43.0, 28e9, 0.0, 0).is_err());
    }

    #[test]
    fn shadowing_bounded_by_four_sigma() {
        let (tx, rx) = boresight_pair(100.0);
        let clear = link_budget(&tx, &rx, 43.0, 28e9, 0.0, 0).unwrap().rx_power_dbm;
        let draws: Vec<f64> = (0..20_000u64)
            .map(|s| link_budget(&tx, &rx, 43.0, 28e9, 4.0, s).unwrap().rx_power_dbm)
            .collect();
        assert_ne!(draws[0], draws[1]);
        let inside = draws.iter().filter(|p| (*p - clear).abs() <= 16.0).count();
        assert!(inside as f64 / draws.len() as f64 >= 0.9999);
    }
}
