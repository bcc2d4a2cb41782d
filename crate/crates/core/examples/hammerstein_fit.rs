//! Fit a parallel Hammerstein model to PA-distorted SI and compare it with a
//! linear-only canceller at several PA drive levels.

use fdiab::ofdm::{modulate, qpsk_grid, OfdmConfig, OfdmFft};
use fdiab::rf::{in_band_noise, pa_apply, PaModel};
use fdiab::sic::{fit_hammerstein, Framing, HammersteinSpec};
use fdiab::units::{dbm_to_mw, lin_to_db, normalize_power};
use fdiab::rng;

fn main() -> fdiab::Result<()> {
    let cfg = OfdmConfig::default();
    let fft = OfdmFft::new(&cfg);
    let pa = PaModel::default();
    let spec = HammersteinSpec::default();
    println!("orders {:?}, memory {}, unknowns {}", spec.orders, spec.memory_len, spec.unknowns());
    for backoff in [4.0, 8.0, 12.0] {
        let mut x = modulate(&qpsk_grid(8, cfg.active_subcarriers, &mut rng::stream(1, &[rng::DATA])), &cfg)?;
        normalize_power(&mut x, dbm_to_mw(pa.input_p1db_dbm() - backoff));
        // SI 60 dB below the PA output, plus noise another 50 dB down.
        let mut y = pa_apply(&x, &pa);
        y.iter_mut().for_each(|v| *v *= 1e-3);
        let p = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        let w = in_band_noise(&fft, 8, p * 1e-5, &mut rng::stream(1, &[rng::NOISE]));
        y.iter_mut().zip(&w).for_each(|(a, b)| *a += b);

        let full = fit_hammerstein(&x, &y, &spec, Framing::Ofdm(cfg))?;
        let lin = fit_hammerstein(&x, &y, &spec.linear_only(), Framing::Ofdm(cfg))?;
        println!(
            "back-off {backoff:4.1} dB: linear-only {:6.2} dB, fifth-order {:6.2} dB below SI (noise at 50 dB)",
            -lin_to_db(lin.residual_power / p),
            -lin_to_db(full.residual_power / p)
        );
    }
    Ok(())
}
