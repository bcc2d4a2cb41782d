//! One system-level drop per seed: per-mode median UE throughput.
//!
//! Usage: `cargo run --release --example system_drop -- [separation_m] [drops]`

use fdiab::system::{median, run_drop, Mode, Scenario};

fn main() -> fdiab::Result<()> {
    let mut args = std::env::args().skip(1);
    let d: f64 = args.next().map_or(Ok(1.0), |a| a.parse()).expect("separation");
    let drops: u64 = args.next().map_or(Ok(3), |a| a.parse()).expect("drops");

    let mut scenario = Scenario::default();
    for n in &mut scenario.iab_nodes {
        n.antenna_separation_m = d;
    }
    let mut per_mode: Vec<Vec<f64>> = vec![Vec::new(); Mode::ALL.len()];
    let mut relayed = 0usize;
    let mut total = 0usize;
    for seed in 0..drops {
        for r in run_drop(&scenario, seed)? {
            let m = Mode::ALL.iter().position(|&m| m == r.mode).unwrap();
            per_mode[m].push(r.throughput_bps);
            if r.mode == Mode::Fibered {
                total += 1;
                relayed += usize::from(r.serving_cell > 0);
            }
        }
    }
    println!("separation {d} m, {drops} drops, {relayed}/{total} UEs relayed");
    for (m, v) in Mode::ALL.iter().zip(&per_mode) {
        let med = median(v).unwrap_or(f64::NAN);
        println!("{:<24} median {:8.1} Mbit/s", m.as_str(), med / 1e6);
    }
    Ok(())
}
