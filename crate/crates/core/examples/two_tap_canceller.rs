//! Tune the two-tap RF canceller on a noisy SI channel estimate and report
//! how much of the SI channel it removes. Reflections outside the two
//! taps cap the result once the estimate is good enough.

use fdiab::geometry::{si_channel, ReflectorConfig, CARRIER_28GHZ};
use fdiab::ofdm::OfdmConfig;
use fdiab::rf::awgn;
use fdiab::sic::{default_delays, tune_two_tap, two_tap_residual, LinkParams};
use fdiab::units::{lin_to_db, mean_power};
use fdiab::rng;

fn main() -> fdiab::Result<()> {
    let cfg = OfdmConfig::default();
    let f = cfg.active_freqs_hz();
    for d in [0.1, 1.0, 2.0] {
        let p = LinkParams::with_separation(d);
        let h = si_channel(&p.si_geometry(), &p.du_pattern, &p.mt_pattern, &ReflectorConfig::default(), CARRIER_28GHZ, 3)?
            .frequency_response(&f);
        let ph = mean_power(&h);
        let delays = default_delays(d);
        print!("d = {d:>3} m, delays {:.2}/{:.2} ns:", delays[0] * 1e9, delays[1] * 1e9);
        for snr in [10.0, 20.0, 40.0] {
            let n = awgn(h.len(), ph * 10f64.powf(-snr / 10.0), &mut rng::stream(5, &[rng::NOISE]));
            let est: Vec<_> = h.iter().zip(&n).map(|(a, b)| a + b).collect();
            let t = tune_two_tap(&est, &f, delays, &cfg)?;
            print!("  est. SNR {snr:>2} dB -> {:5.1} dB", lin_to_db(ph / two_tap_residual(&h, &f, &t)));
        }
        println!();
    }
    Ok(())
}
