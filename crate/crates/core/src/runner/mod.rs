//! Command orchestration behind the `fdiab` binary.
//!
//! Every command reads a JSON scenario, applies `--set` overrides, runs with
//! a 64-bit seed and writes CSV files plus one `<command>.meta.json` sidecar
//! into the output directory. CSV bytes depend only on the resolved
//! scenario and seed, never on thread count or completion order.
//!
//! | command | files |
//! |---|---|
//! | `link-sim` | `link_sim.csv` |
//! | `system-sim` | `throughput.csv`, `residual_si.csv`, `cdf_<mode>.csv` |
//! | `sweep` | `sweep.csv` |
//! | `compare-prototype` | `prototype_comparison.csv`, `prototype_summary.csv` |

mod config;
mod prototype;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::*;
pub use prototype::*;

use crate::error::{Error, Result};
use crate::sic::{run_link_chain, ReductionReport};
use crate::system::{cdf, quantile, run_drop_detailed, Mode, Scenario, SweepKind, ThroughputRecord};

pub const LINK_HEADER: &[&str] = &[
    "drop",
    "seed",
    "tx_power_dbm",
    "after_propagation_dbm",
    "after_analog_dbm",
    "after_digital_dbm",
    "propagation_db",
    "analog_db",
    "digital_db",
    "total_reduction_db",
    "noise_floor_dbm",
    "analog_applied",
    "digital_applied",
    "saturated",
    "conditioning_warning",
    "reflection_taps",
];

pub const THROUGHPUT_HEADER: &[&str] = &[
    "drop",
    "seed",
    "mode",
    "ue_id",
    "x_m",
    "y_m",
    "serving_cell",
    "beam",
    "access_sinr_db",
    "backhaul_sinr_db",
    "dli_power_dbm",
    "throughput_bps",
];

pub const RESIDUAL_SI_HEADER: &[&str] = &["drop", "seed", "node", "beam", "full_dbm", "propagation_dbm"];

pub const CDF_HEADER: &[&str] = &["throughput_bps", "probability"];

pub const SWEEP_SYSTEM_HEADER: &[&str] = &[
    "sweep_key",
    "sweep_value",
    "mode",
    "samples",
    "mean_throughput_bps",
    "median_throughput_bps",
    "p05_throughput_bps",
    "p95_throughput_bps",
];

pub const COMPARISON_HEADER: &[&str] = &[
    "separation_m",
    "relative_azimuth_deg",
    "measured_db",
    "simulated_db",
    "delta_db",
];

pub const SUMMARY_HEADER: &[&str] = &["separation_m", "measured_mean_db", "simulated_mean_db", "mean_delta_db"];

/// Header of a link-level sweep: the swept key and value, then the
/// `link-sim` columns.
pub fn sweep_link_header() -> Vec<&'static str> {
    ["sweep_key", "sweep_value"].into_iter().chain(LINK_HEADER.iter().copied()).collect()
}

/// Process exit code for an error: 2 for I/O, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 2,
        Error::Csv(c) if c.is_io_error() => 2,
        _ => 1,
    }
}

/// Seed of drop `i`.
pub fn drop_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn link_fields(drop: usize, seed: u64, r: &ReductionReport) -> Vec<String> {
    vec![
        drop.to_string(),
        seed.to_string(),
        fmt_f(r.tx_power_dbm),
        fmt_f(r.after_propagation_dbm),
        fmt_f(r.after_analog_dbm),
        fmt_f(r.after_digital_dbm),
        fmt_f(r.per_domain_db[0]),
        fmt_f(r.per_domain_db[1]),
        fmt_f(r.per_domain_db[2]),
        fmt_f(r.total_reduction_db()),
        fmt_f(r.noise_floor_dbm),
        r.analog_applied.to_string(),
        r.digital_applied.to_string(),
        r.saturated.to_string(),
        r.conditioning_warning.to_string(),
        r.reflection_taps.to_string(),
    ]
}

fn throughput_fields(drop: usize, seed: u64, r: &ThroughputRecord) -> Vec<String> {
    vec![
        drop.to_string(),
        seed.to_string(),
        r.mode.to_string(),
        r.ue_id.to_string(),
        fmt_f(r.x_m),
        fmt_f(r.y_m),
        r.serving_cell.to_string(),
        r.beam.to_string(),
        fmt_f(r.access_sinr_db),
        fmt_opt(r.backhaul_sinr_db),
        fmt_opt(r.dli_power_dbm),
        fmt_f(r.throughput_bps),
    ]
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Domain(e.to_string()))
    }
}

/// Named output tables of one command.
pub type Outputs = Vec<(String, Table)>;

fn link_table(scenario: &Scenario, seed: u64) -> Result<Table> {
    let reports = (0..scenario.drops)
        .into_par_iter()
        .map(|i| run_link_chain(&scenario.link, drop_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(LINK_HEADER);
    for (i, r) in reports.iter().enumerate() {
        t.rows.push(link_fields(i, drop_seed(seed, i), r));
    }
    Ok(t)
}

pub fn cmd_link_sim(scenario: &Scenario, seed: u64) -> Result<Outputs> {
    Ok(vec![("link_sim.csv".into(), link_table(scenario, seed)?)])
}

pub fn cmd_system_sim(scenario: &Scenario, seed: u64) -> Result<Outputs> {
    let drops = (0..scenario.drops)
        .map(|i| run_drop_detailed(scenario, drop_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut thr = Table::new(THROUGHPUT_HEADER);
    let mut si = Table::new(RESIDUAL_SI_HEADER);
    for (i, d) in drops.iter().enumerate() {
        let s = drop_seed(seed, i);
        thr.rows.extend(d.records.iter().map(|r| throughput_fields(i, s, r)));
        for n in d.residual_si.iter().flatten() {
            si.rows.push(vec![
                i.to_string(),
                s.to_string(),
                n.node.to_string(),
                n.beam.to_string(),
                fmt_f(n.full_dbm),
                fmt_f(n.propagation_dbm),
            ]);
        }
    }
    let mut out: Outputs = vec![("throughput.csv".into(), thr), ("residual_si.csv".into(), si)];
    for &m in &scenario.modes {
        let v: Vec<f64> = drops
            .iter()
            .flat_map(|d| d.records.iter())
            .filter(|r| r.mode == m)
            .map(|r| r.throughput_bps)
            .collect();
        let mut t = Table::new(CDF_HEADER);
        t.rows = cdf(&v).iter().map(|p| vec![fmt_f(p.value), fmt_f(p.probability)]).collect();
        out.push((format!("cdf_{m}.csv"), t));
    }
    Ok(out)
}

fn system_summary(key: &str, value: &str, scenario: &Scenario, seed: u64) -> Result<Vec<Vec<String>>> {
    let mut per_mode: Vec<(Mode, Vec<f64>)> = scenario.modes.iter().map(|&m| (m, Vec::new())).collect();
    for i in 0..scenario.drops {
        for r in run_drop_detailed(scenario, drop_seed(seed, i))?.records {
            if let Some((_, v)) = per_mode.iter_mut().find(|(m, _)| *m == r.mode) {
                v.push(r.throughput_bps);
            }
        }
    }
    Ok(per_mode
        .into_iter()
        .map(|(m, v)| {
            let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
            let q = |p: f64| fmt_opt(quantile(&v, p));
            vec![
                key.to_owned(),
                value.to_owned(),
                m.to_string(),
                v.len().to_string(),
                fmt_f(mean),
                q(0.5),
                q(0.05),
                q(0.95),
            ]
        })
        .collect())
}

pub fn cmd_sweep(scenario: &Scenario, seed: u64) -> Result<Outputs> {
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| Error::invalid("sweep", "the sweep command needs a `sweep` section"))?;
    let cells: Vec<(String, Scenario)> = sweep
        .values
        .iter()
        .map(|v| {
            let text = serde_json::to_string(v)?;
            let s = apply_overrides(scenario, &[format!("{}={text}", sweep.key)])?;
            Ok((text, s))
        })
        .collect::<Result<_>>()?;
    let blocks: Vec<Vec<Vec<String>>> = cells
        .par_iter()
        .map(|(text, s)| match sweep.kind {
            SweepKind::Link => Ok(link_table(s, seed)?
                .rows
                .into_iter()
                .map(|r| [sweep.key.clone(), text.clone()].into_iter().chain(r).collect())
                .collect()),
            SweepKind::System => system_summary(&sweep.key, text, s, seed),
        })
        .collect::<Result<_>>()?;
    let mut t = match sweep.kind {
        SweepKind::Link => Table::new(&sweep_link_header()),
        SweepKind::System => Table::new(SWEEP_SYSTEM_HEADER),
    };
    t.rows = blocks.into_iter().flatten().collect();
    Ok(vec![("sweep.csv".into(), t)])
}

pub fn cmd_compare_prototype(scenario: &Scenario, scenario_dir: &Path, seed: u64) -> Result<Outputs> {
    let reference = match &scenario.prototype_reference {
        Some(p) => PrototypeReference::load(&scenario_dir.join(p))?,
        None => PrototypeReference::shipped(),
    };
    let (rows, summary) = compare_prototype(&reference, &scenario.link, seed)?;
    let mut cmp = Table::new(COMPARISON_HEADER);
    cmp.rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f(r.separation_m),
                fmt_f(r.relative_azimuth_deg),
                fmt_f(r.measured_db),
                fmt_f(r.simulated_db),
                fmt_f(r.delta_db),
            ]
        })
        .collect();
    let mut sum = Table::new(SUMMARY_HEADER);
    sum.rows = summary
        .iter()
        .map(|s| {
            vec![
                fmt_f(s.separation_m),
                fmt_f(s.measured_mean_db),
                fmt_f(s.simulated_mean_db),
                fmt_f(s.mean_delta_db),
            ]
        })
        .collect();
    Ok(vec![("prototype_comparison.csv".into(), cmp), ("prototype_summary.csv".into(), sum)])
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    overrides: &'a [String],
    outputs: Vec<&'a str>,
    /// Wall-clock creation time; the only field that differs between runs.
    created_unix_s: u64,
    scenario: &'a Scenario,
}

/// Run `f` on a pool capped by `FDIAB_THREADS`, if set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads_from_env()? {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Domain(e.to_string()))?
            .install(f),
    }
}

/// Resolve the scenario and produce the output tables without touching disk.
pub fn execute(cfg: &RunConfig) -> Result<(Scenario, Outputs)> {
    cfg.validate()?;
    let scenario = load_scenario_with_overrides(&cfg.scenario_path, &cfg.overrides)?;
    let seed = cfg.seed.unwrap_or(0);
    let dir = cfg.scenario_path.parent().unwrap_or(Path::new("."));
    let outputs = with_thread_cap(|| match cfg.command {
        Command::LinkSim => cmd_link_sim(&scenario, seed),
        Command::SystemSim => cmd_system_sim(&scenario, seed),
        Command::Sweep => cmd_sweep(&scenario, seed),
        Command::ComparePrototype => cmd_compare_prototype(&scenario, dir, seed),
    })?;
    Ok((scenario, outputs))
}

/// Run a command end to end; returns the written file paths.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (scenario, outputs) = execute(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut written = Vec::new();
    for (name, table) in &outputs {
        let path = cfg.output_dir.join(name);
        std::fs::write(&path, table.to_csv()?).map_err(|e| Error::io(&path, e))?;
        log::info!("wrote {}", path.display());
        written.push(path);
    }
    let sidecar = Sidecar {
        tool: "fdiab",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.as_str(),
        seed: cfg.seed.unwrap_or(0),
        overrides: &cfg.overrides,
        outputs: outputs.iter().map(|(n, _)| n.as_str()).collect(),
        created_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        scenario: &scenario,
    };
    let path = cfg.output_dir.join(format!("{}.meta.json", cfg.command.as_str()));
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
