//! Drive the runner from code: load a shipped scenario, override a field and
//! sweep the antenna separation at system level.

use std::path::Path;

use fdiab::runner::{apply_overrides, cmd_sweep, load_scenario};
use fdiab::system::{SweepConfig, SweepKind};

fn main() -> fdiab::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/default.json");
    let mut s = apply_overrides(&load_scenario(&path)?, &["ue_grid.nx=11".into(), "ue_grid.ny=11".into()])?;
    s.sweep = Some(SweepConfig {
        key: "iab_nodes.*.antenna_separation_m".into(),
        values: vec![2.0.into(), 1.0.into(), 0.1.into()],
        kind: SweepKind::System,
    });
    let out = cmd_sweep(&s, 1)?;
    let t = &out[0].1;
    println!("{}", t.header.join(","));
    for r in &t.rows {
        println!("{}", r.join(","));
    }
    Ok(())
}
