//! Channel-aware two-tap RF canceller.
//!
//! The canceller taps the PA output and subtracts two delayed, weighted
//! copies of it. Delays are sub-sample, so they are realised as per-symbol
//! phase ramps, which is exact while both delays stay inside the CP.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ofdm::{OfdmConfig, OfdmFft};
use crate::units::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoTapConfig {
    pub delays_s: [f64; 2],
    pub gains: [Complex64; 2],
}

impl TwoTapConfig {
    pub fn validate(&self, ofdm: &OfdmConfig) -> Result<()> {
        validate_delays(self.delays_s, ofdm)
    }

    /// Canceller response at baseband frequency `f`.
    pub fn response(&self, f: f64) -> Complex64 {
        self.delays_s
            .iter()
            .zip(&self.gains)
            .map(|(t, a)| a * Complex64::from_polar(1.0, -2.0 * PI * f * t))
            .sum()
    }
}

fn validate_delays(delays: [f64; 2], ofdm: &OfdmConfig) -> Result<()> {
    let [t1, t2] = delays;
    if !(t1 >= 0.0 && t1 < t2) {
        return Err(Error::Domain(format!("canceller delays need 0 <= t1 < t2 (got {t1:e}, {t2:e})")));
    }
    if t2 >= ofdm.cp_duration_s() {
        return Err(Error::Domain(format!(
            "canceller delay {t2:e} s is not inside the cyclic prefix ({:e} s)",
            ofdm.cp_duration_s()
        )));
    }
    Ok(())
}

/// Canceller delays used for the three reference separations; any other
/// separation gets delays bracketing the direct-path delay.
pub fn default_delays(separation_m: f64) -> [f64; 2] {
    const TABLE: [(f64, [f64; 2]); 3] = [(2.0, [6e-9, 8e-9]), (1.0, [3e-9, 4e-9]), (0.1, [0.3e-9, 0.4e-9])];
    TABLE
        .iter()
        .find(|(d, _)| (d - separation_m).abs() < 1e-9)
        .map(|(_, t)| *t)
        .unwrap_or_else(|| {
            let t = separation_m / SPEED_OF_LIGHT;
            [0.9 * t, 1.2 * t]
        })
}

/// Closed-form least-squares fit of two delayed taps to a sampled
/// frequency response `h` at baseband frequencies `freqs_hz`.
pub fn tune_two_tap(h: &[Complex64], freqs_hz: &[f64], delays_s: [f64; 2], ofdm: &OfdmConfig) -> Result<TwoTapConfig> {
    if h.len() != freqs_hz.len() {
        return Err(Error::Shape {
            what: "frequency response length",
            expected: freqs_hz.len(),
            got: h.len(),
        });
    }
    if delays_s[0] == delays_s[1] {
        return Err(Error::Singular("two-tap canceller with equal delays".into()));
    }
    validate_delays(delays_s, ofdm)?;

    // Normal equations [g11 g12; g21 g22] a = b with basis e_i(f) = exp(-j2 pi f t_i).
    let (mut g12, mut b1, mut b2) = (Complex64::default(), Complex64::default(), Complex64::default());
    let k = h.len() as f64;
    for (&hk, &f) in h.iter().zip(freqs_hz) {
        let e1 = Complex64::from_polar(1.0, -2.0 * PI * f * delays_s[0]);
        let e2 = Complex64::from_polar(1.0, -2.0 * PI * f * delays_s[1]);
        g12 += e1.conj() * e2;
        b1 += e1.conj() * hk;
        b2 += e2.conj() * hk;
    }
    let det = k * k - g12.norm_sqr();
    if det <= 1e-12 * k * k {
        return Err(Error::Singular(format!(
            "two-tap normal equations are ill-conditioned for delays {:e}, {:e}",
            delays_s[0], delays_s[1]
        )));
    }
    let a1 = (b1 * k - g12 * b2) / det;
    let a2 = (b2 * k - g12.conj() * b1) / det;
    Ok(TwoTapConfig {
        delays_s,
        gains: [a1, a2],
    })
}

/// Mean of `|h - canceller|^2` over the sampled frequencies.
pub fn two_tap_residual(h: &[Complex64], freqs_hz: &[f64], cfg: &TwoTapConfig) -> f64 {
    let s: f64 = h
        .iter()
        .zip(freqs_hz)
        .map(|(hk, &f)| (hk - cfg.response(f)).norm_sqr())
        .sum();
    s / h.len().max(1) as f64
}

/// Regenerate the SI estimate from the tapped PA output and subtract it
/// from the received samples.
pub fn apply_analog_canceller(
    pa_output: &[Complex64],
    rx: &[Complex64],
    cfg: &TwoTapConfig,
    fft: &OfdmFft,
) -> Result<Vec<Complex64>> {
    if pa_output.len() != rx.len() {
        return Err(Error::Shape {
            what: "received sample count",
            expected: pa_output.len(),
            got: rx.len(),
        });
    }
    let response: Vec<Complex64> = fft.config().all_freqs_hz().iter().map(|&f| cfg.response(f)).collect();
    let estimate = fft.map_symbols(pa_output, |_, spec| {
        spec.iter_mut().zip(&response).for_each(|(s, r)| *s *= r);
    })?;
    Ok(rx.iter().zip(&estimate).map(|(r, e)| r - e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{self, in_band_power};
    use crate::rf::awgn;
    use crate::rng;
    use crate::units::lin_to_db;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn cfg() -> OfdmConfig {
        OfdmConfig::default()
    }

    fn two_tap_channel(f: &[f64], taps: &[(f64, Complex64)]) -> Vec<Complex64> {
        f.iter()
            .map(|&f| taps.iter().map(|(t, g)| g * Complex64::from_polar(1.0, -2.0 * PI * f * t)).sum())
            .collect()
    }

    #[test]
    fn model_matched_recovery_is_exact() {
        let f = cfg().active_freqs_hz();
        let g = [Complex64::new(0.3, -0.2), Complex64::new(-0.05, 0.11)];
        let h = two_tap_channel(&f, &[(6e-9, g[0]), (8e-9, g[1])]);
        let t = tune_two_tap(&h, &f, [6e-9, 8e-9], &cfg()).unwrap();
        assert!((t.gains[0] - g[0]).norm() < 1e-9 && (t.gains[1] - g[1]).norm() < 1e-9);
        let p_h = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64;
        assert!(lin_to_db(two_tap_residual(&h, &f, &t) / p_h) < -120.0);
    }

    #[test]
    fn equal_or_invalid_delays_rejected() {
        let f = cfg().active_freqs_hz();
        let h = vec![Complex64::new(1.0, 0.0); f.len()];
        assert!(matches!(tune_two_tap(&h, &f, [3e-9, 3e-9], &cfg()), Err(Error::Singular(_))));
        assert!(tune_two_tap(&h, &f, [4e-9, 3e-9], &cfg()).is_err());
        assert!(tune_two_tap(&h, &f, [1e-9, 2e-6], &cfg()).is_err());
    }

    // Oracle: project the third tap onto the orthogonal complement of the
    // two-tap subspace with explicit Gram-Schmidt.
    #[test]
    fn third_tap_leaves_its_unmodelled_power() {
        let f = cfg().active_freqs_hz();
        let third = Complex64::from_polar(0.1, 1.0);
        let taps = [(6e-9, Complex64::new(1.0, 0.0)), (8e-9, Complex64::new(0.5, 0.2)), (25e-9, third)];
        let h = two_tap_channel(&f, &taps);
        let t = tune_two_tap(&h, &f, [6e-9, 8e-9], &cfg()).unwrap();
        let res = two_tap_residual(&h, &f, &t);

        let e = |tau: f64| two_tap_channel(&f, &[(tau, Complex64::new(1.0, 0.0))]);
        let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
        let u1 = e(6e-9);
        let n1 = dot(&u1, &u1).re.sqrt();
        let u1: Vec<Complex64> = u1.iter().map(|v| v / n1).collect();
        let mut u2 = e(8e-9);
        let c = dot(&u1, &u2);
        u2.iter_mut().zip(&u1).for_each(|(a, b)| *a -= c * b);
        let n2 = dot(&u2, &u2).re.sqrt();
        u2.iter_mut().for_each(|v| *v /= n2);
        let mut v = two_tap_channel(&f, &[(25e-9, third)]);
        for u in [&u1, &u2] {
            let c = dot(u, &v);
            v.iter_mut().zip(u.iter()).for_each(|(a, b)| *a -= c * b);
        }
        let oracle = dot(&v, &v).re / f.len() as f64;
        assert_abs_diff_eq!(res, oracle, epsilon = 1e-12 * third.norm_sqr());
        // Within 1 dB of the third tap's own power.
        assert!(lin_to_db(res / third.norm_sqr()).abs() <= 1.0);
    }

    #[test]
    fn permuting_taps_keeps_residual() {
        let f = cfg().active_freqs_hz();
        let h = two_tap_channel(
            &f,
            &[(1e-9, Complex64::new(0.2, 0.1)), (4e-9, Complex64::new(-0.3, 0.0)), (9e-9, Complex64::new(0.05, 0.0))],
        );
        let a = tune_two_tap(&h, &f, [1e-9, 4e-9], &cfg()).unwrap();
        let swapped = TwoTapConfig {
            delays_s: [a.delays_s[1], a.delays_s[0]],
            gains: [a.gains[1], a.gains[0]],
        };
        assert_abs_diff_eq!(
            two_tap_residual(&h, &f, &a),
            two_tap_residual(&h, &f, &swapped),
            epsilon = 1e-15
        );
    }

    fn frame(seed: u64) -> (OfdmFft, Vec<Complex64>) {
        let c = cfg();
        let mut r = rng::stream(seed, &[rng::DATA]);
        let x = ofdm::modulate(&ofdm::qpsk_grid(3, 792, &mut r), &c).unwrap();
        (OfdmFft::new(&c), x)
    }

    #[test]
    fn exact_copy_is_cancelled_and_zero_gain_is_identity() {
        let (fft, x) = frame(1);
        let tt = TwoTapConfig {
            delays_s: [3e-9, 4e-9],
            gains: [Complex64::new(0.01, 0.002), Complex64::new(-0.004, 0.001)],
        };
        let zero = TwoTapConfig {
            gains: [Complex64::default(); 2],
            ..tt
        };
        let rx = apply_analog_canceller(&x, &vec![Complex64::default(); x.len()], &zero, &fft).unwrap();
        assert!(rx.iter().all(|v| v.norm() == 0.0));
        let neg = TwoTapConfig {
            gains: [-tt.gains[0], -tt.gains[1]],
            ..tt
        };
        let rx = apply_analog_canceller(&x, &vec![Complex64::default(); x.len()], &neg, &fft).unwrap();
        let res = apply_analog_canceller(&x, &rx, &tt, &fft).unwrap();
        let p_rx = in_band_power(&fft, &rx).unwrap();
        assert!(lin_to_db(crate::units::mean_power(&res) / p_rx) <= -120.0);
        let same = apply_analog_canceller(&x, &rx, &zero, &fft).unwrap();
        assert_eq!(same, rx);
        assert!(apply_analog_canceller(&x, &rx[1..], &tt, &fft).is_err());
    }

    /// Mean cancellation (dB) of a two-tap channel when the canceller is
    /// tuned on a per-subcarrier estimate with the given SNR.
    fn noisy_tuning_cancellation_db(est_snr_db: f64, trials: u64) -> f64 {
        let c = cfg();
        let f = c.active_freqs_hz();
        let delays = [6e-9, 8e-9];
        let (mut p_h, mut p_err) = (0.0, 0.0);
        for t in 0..trials {
            let mut r = rng::stream(t, &[rng::REFLECTORS]);
            let g = [
                Complex64::from_polar(1.0, r.random_range(0.0..2.0 * PI)),
                Complex64::from_polar(r.random_range(0.1..0.5), r.random_range(0.0..2.0 * PI)),
            ];
            let h = two_tap_channel(&f, &[(delays[0], g[0]), (delays[1], g[1])]);
            let ph = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64;
            let noise = awgn(h.len(), ph * 10f64.powf(-est_snr_db / 10.0), &mut rng::stream(t, &[rng::NOISE]));
            let est: Vec<Complex64> = h.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let tt = tune_two_tap(&est, &f, delays, &c).unwrap();
            p_h += ph;
            p_err += two_tap_residual(&h, &f, &tt);
        }
        lin_to_db(p_h / p_err)
    }

    // Two complex unknowns fitted to K noisy bins leave 2/K of the
    // estimation noise, so cancellation is SNR + 10 log10(K/2).
    #[test]
    fn cancellation_with_noisy_estimate_follows_projection_gain() {
        let expected = 20.0 + lin_to_db(792.0 / 2.0);
        let got = noisy_tuning_cancellation_db(20.0, 1000);
        assert!((got - expected).abs() < 0.5, "{got} vs {expected}");
    }

    #[test]
    fn default_delay_table() {
        assert_eq!(default_delays(2.0), [6e-9, 8e-9]);
        assert_eq!(default_delays(1.0), [3e-9, 4e-9]);
        assert_eq!(default_delays(0.1), [0.3e-9, 0.4e-9]);
        let d = default_delays(0.5);
        let t = 0.5 / SPEED_OF_LIGHT;
        assert!(d[0] < t && t < d[1]);
    }
}
