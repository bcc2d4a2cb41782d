//! Rapp PA: AM/AM compression and two-tone IM3 versus input back-off.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use fdiab::rf::{pa_apply, PaModel};
use fdiab::units::{dbm_to_mw, mw_to_dbm};

fn main() {
    let pa = PaModel::default();
    println!("input P1dB {:.1} dBm, Vsat {:.2} dBm", pa.input_p1db_dbm(), pa.vsat_dbm());
    for pin in [-10.0, 0.0, 10.0, 20.0, 24.0, 28.0] {
        let y = pa_apply(&[Complex64::new(dbm_to_mw(pin).sqrt(), 0.0)], &pa)[0];
        println!("  Pin {pin:5.1} dBm -> Pout {:6.2} dBm", mw_to_dbm(y.norm_sqr()));
    }

    let n = 4096;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let im3 = |pin_dbm: f64| -> f64 {
        let a = (dbm_to_mw(pin_dbm) / 2.0).sqrt();
        let x: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                Complex64::from_polar(a, 2.0 * PI * 100.0 * t) + Complex64::from_polar(a, 2.0 * PI * 110.0 * t)
            })
            .collect();
        let mut y = pa_apply(&x, &pa);
        fft.process(&mut y);
        10.0 * (y[120].norm_sqr() / y[110].norm_sqr()).log10()
    };
    println!("\nIM3 relative to the tone (two tones, total input power):");
    for backoff in [0.0, 4.0, 6.0, 10.0, 16.0] {
        println!("  {backoff:4.1} dB below input P1dB: {:7.2} dBc", im3(pa.input_p1db_dbm() - backoff));
    }
}
