//! The three-domain SI reduction chain for the default node at several
//! antenna separations.
//!
//! Usage: `cargo run --release --example link_chain -- [drops]`

use fdiab::sic::{run_link_chain, LinkParams};

fn main() -> fdiab::Result<()> {
    let drops: u64 = std::env::args().nth(1).map_or(5, |a| a.parse().expect("drops"));
    println!("  d [m]  seed  prop [dB]  analog [dB]  digital [dB]  residual - floor [dB]");
    for d in [2.0, 1.0, 0.1] {
        let p = LinkParams::with_separation(d);
        for seed in 0..drops {
            let r = run_link_chain(&p, seed)?;
            println!(
                "  {d:5.1}  {seed:4}  {:9.2}  {:11.2}  {:12.2}  {:8.2}{}",
                r.per_domain_db[0],
                r.per_domain_db[1],
                r.per_domain_db[2],
                r.after_digital_dbm - r.noise_floor_dbm,
                if r.saturated { "  (ADC saturated)" } else { "" }
            );
        }
    }
    Ok(())
}
