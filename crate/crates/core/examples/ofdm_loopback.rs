//! OFDM modulation through a short multipath channel, LS channel
//! estimation on a pilot symbol and zero-forcing equalisation.

use num_complex::Complex64;

use fdiab::ofdm::{convolve_integer_taps, demodulate, estimate_channel_ls, OfdmConfig, OfdmFrame};
use fdiab::rng;

fn main() -> fdiab::Result<()> {
    let cfg = OfdmConfig::default();
    println!(
        "N = {}, K = {}, CP = {} ({:.0} ns), {:.2} Msps",
        cfg.fft_size,
        cfg.active_subcarriers,
        cfg.cp_len,
        cfg.cp_duration_s() * 1e9,
        cfg.sample_rate_hz() / 1e6
    );
    let frame = OfdmFrame::random_qpsk(&cfg, 4, 1, &mut rng::stream(1, &[rng::DATA]))?;
    let taps = [(0, Complex64::new(1.0, 0.0)), (3, Complex64::new(0.3, -0.2)), (17, Complex64::new(0.05, 0.02))];
    let rx = convolve_integer_taps(&frame.samples, &taps);
    let grid = demodulate(&rx, &cfg)?;

    let h = estimate_channel_ls(&grid[..1], &frame.symbols[..1])?;
    let mut worst = 0.0f64;
    for (y, x) in grid.iter().zip(&frame.symbols).skip(1) {
        for ((y, x), h) in y.iter().zip(x).zip(&h) {
            worst = worst.max((y / h - x).norm());
        }
    }
    println!("max symbol error after equalisation: {worst:.2e}");
    Ok(())
}
