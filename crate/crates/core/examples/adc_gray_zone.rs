//! ADC quantisation: ideal SQNR, the effective range used for the gray-zone
//! rule, and how strong SI caps the SNR a digital canceller can reach.

use fdiab::ofdm::OfdmConfig;
use fdiab::rf::{within_gray_zone, AdcModel, NoiseModel, EFFECTIVE_ADC_RANGE_DB};
use fdiab::sic::quantization_limited_snr_db;

fn main() -> fdiab::Result<()> {
    let adc = AdcModel::default();
    let floor = NoiseModel::default().floor_dbm();
    println!("{}-bit ideal SQNR {:.2} dB, effective range {EFFECTIVE_ADC_RANGE_DB} dB", adc.bits, adc.ideal_sqnr_db());
    for si in [-60.0, -30.0, -17.0] {
        println!("  SI {si:5.1} dBm inside gray zone: {}", within_gray_zone(si, floor, EFFECTIVE_ADC_RANGE_DB));
    }
    let cfg = OfdmConfig::default();
    println!("\nSI-to-signal  SNR after genie SIC  bound 86.04 - SIR");
    for sir in [0.0, 20.0, 40.0, 60.0, 80.0] {
        let snr = quantization_limited_snr_db(sir, &adc, &cfg, 1)?;
        println!("  {sir:5.1} dB   {snr:8.2} dB   {:8.2} dB", 86.04 - sir);
    }
    Ok(())
}
