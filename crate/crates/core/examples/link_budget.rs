//! Noise floor, required SI reduction and a few line-of-sight link budgets.

use fdiab::geometry::{link_budget, Antenna, AntennaPattern, Terminal, Vec3, CARRIER_28GHZ};
use fdiab::rf::{required_reduction_db, NoiseModel};

fn main() -> fdiab::Result<()> {
    let floor = NoiseModel::default().floor_dbm();
    println!("noise floor (120 MHz, NF 3 dB): {floor:.2} dBm");
    for tx in [43.0, 46.0] {
        println!("  Tx {tx} dBm needs {:.1} dB of SI reduction", required_reduction_db(tx, floor));
    }

    let donor = Vec3::new(250.0, -300.0, 130.0);
    let node = Vec3::new(100.0, 150.0, 126.0);
    let iab = AntennaPattern::iab();
    let bh = link_budget(
        &Terminal { position: donor, antenna: Antenna::Directional { pattern: iab, boresight: node - donor } },
        &Terminal { position: node, antenna: Antenna::Directional { pattern: iab, boresight: donor - node } },
        43.0,
        CARRIER_28GHZ,
        0.0,
        0,
    )?;
    println!("\nbackhaul {:.0} m: {:.1} dBm, SNR {:.1} dB", (node - donor).norm(), bh.rx_power_dbm, bh.rx_power_dbm - floor);

    // A UE seen off the backhaul beam, with shadowing.
    let ue = Terminal { position: Vec3::new(300.0, 250.0, 1.5), antenna: Antenna::Isotropic { gain_dbi: 0.0 } };
    for seed in 0..3 {
        let lb = link_budget(
            &Terminal { position: donor, antenna: Antenna::Directional { pattern: iab, boresight: node - donor } },
            &ue,
            43.0,
            CARRIER_28GHZ,
            4.0,
            seed,
        )?;
        println!(
            "UE seed {seed}: PL {:.1} dB, Tx gain {:.1} dBi, shadowing {:+.1} dB -> {:.1} dBm",
            lb.path_loss_db, lb.tx_gain_dbi, lb.shadowing_db, lb.rx_power_dbm
        );
    }
    Ok(())
}
