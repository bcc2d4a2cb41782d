//! Simulated propagation-domain suppression of the lens-antenna prototype
//! next to the shipped outdoor reference.

use fdiab::runner::{compare_prototype, PrototypeReference};
use fdiab::sic::LinkParams;

fn main() -> fdiab::Result<()> {
    let reference = PrototypeReference::shipped();
    let (rows, summary) = compare_prototype(&reference, &LinkParams::default(), 0)?;
    for r in &rows {
        println!(
            "d {:>4} m  az {:>5.1} deg  measured {:7.2} dB  simulated {:7.2} dB",
            r.separation_m, r.relative_azimuth_deg, r.measured_db, r.simulated_db
        );
    }
    println!();
    for s in &summary {
        println!(
            "d {:>4} m  mean measured {:7.3} dB  simulated {:7.2} dB  delta {:+6.2} dB",
            s.separation_m, s.measured_mean_db, s.simulated_mean_db, s.mean_delta_db
        );
    }
    Ok(())
}
