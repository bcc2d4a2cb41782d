//! Direct-path SI suppression versus antenna separation, and one seeded
//! SI channel with its reflections.

use fdiab::geometry::{direct_path_suppression_db, si_channel, ReflectorConfig, CARRIER_28GHZ};
use fdiab::sic::LinkParams;

fn main() -> fdiab::Result<()> {
    for d in [0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let p = LinkParams::with_separation(d);
        let s = direct_path_suppression_db(&p.si_geometry(), &p.du_pattern, &p.mt_pattern, CARRIER_28GHZ)?;
        println!("d = {d:>4} m  direct-path suppression {s:6.2} dB");
    }

    let p = LinkParams::with_separation(1.0);
    let h = si_channel(&p.si_geometry(), &p.du_pattern, &p.mt_pattern, &ReflectorConfig::default(), CARRIER_28GHZ, 7)?;
    println!("\nd = 1 m, seed 7: total gain {:.2} dB", 10.0 * h.total_power().log10());
    for t in h.taps() {
        println!("  delay {:6.3} ns  power {:7.2} dB", t.delay_s * 1e9, 20.0 * t.gain.norm().log10());
    }
    Ok(())
}
