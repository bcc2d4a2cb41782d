//! Scheduling, SINR and throughput evaluation for one deployment drop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{capacity_bps, Codebook, McsTable, Mode, Scenario};
use crate::error::Result;
use crate::geometry::{link_budget, shadowing_db, Antenna, AntennaPattern, Terminal, Vec3};
use crate::rng;
use crate::sic::run_link_chain;
use crate::units::{dbm_to_mw, mw_to_dbm};

/// A transmitting cell: index 0 is the donor, `1..` the IAB-nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub position: Vec3,
    pub tx_power_dbm: f64,
    pub codebook: Codebook,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub cell: usize,
    pub beam: usize,
    pub rx_power_dbm: f64,
    pub snr_db: f64,
}

/// Receiving UE with its per-cell shadowing draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: usize,
    pub position: Vec3,
    pub antenna_gain_dbi: f64,
    /// Shadowing toward each cell, dB.
    pub shadowing_db: Vec<f64>,
}

impl Ue {
    fn terminal(&self) -> Terminal {
        Terminal {
            position: self.position,
            antenna: Antenna::Isotropic {
                gain_dbi: self.antenna_gain_dbi,
            },
        }
    }
}

/// Max-SNR cell and beam selection; ties go to the lowest (cell, beam).
pub fn schedule_ue(ue: &Ue, cells: &[Cell], noise_floor_dbm: f64, carrier_freq_hz: f64) -> Result<Schedule> {
    let mut best: Option<Schedule> = None;
    let rx = ue.terminal();
    for (c, cell) in cells.iter().enumerate() {
        for (b, beam) in cell.codebook.beams.iter().enumerate() {
            let tx = Terminal {
                position: cell.position,
                antenna: Antenna::Directional {
                    pattern: cell.codebook.pattern,
                    boresight: beam.direction,
                },
            };
            let lb = link_budget(&tx, &rx, cell.tx_power_dbm, carrier_freq_hz, 0.0, 0)?;
            let p = lb.rx_power_dbm - ue.shadowing_db[c];
            if best.is_none_or(|s| p > s.rx_power_dbm) {
                best = Some(Schedule {
                    cell: c,
                    beam: b,
                    rx_power_dbm: p,
                    snr_db: p - noise_floor_dbm,
                });
            }
        }
    }
    best.ok_or_else(|| crate::Error::Domain("no cells to schedule on".into()))
}

/// Power a UE receives from the donor's fixed backhaul beam.
pub fn dli_power_dbm(
    donor_position: Vec3,
    donor_tx_power_dbm: f64,
    donor_pattern: &AntennaPattern,
    backhaul_boresight: Vec3,
    ue: &Ue,
    carrier_freq_hz: f64,
) -> Result<f64> {
    let tx = Terminal {
        position: donor_position,
        antenna: Antenna::Directional {
            pattern: *donor_pattern,
            boresight: backhaul_boresight,
        },
    };
    let lb = link_budget(&tx, &ue.terminal(), donor_tx_power_dbm, carrier_freq_hz, 0.0, 0)?;
    Ok(lb.rx_power_dbm - ue.shadowing_db[0])
}

/// Residual SI (noise excluded) of a node serving through one beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSi {
    pub node: usize,
    pub beam: usize,
    pub full_dbm: f64,
    pub propagation_dbm: f64,
}

/// Everything about one UE that the mode-specific throughput needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeLinks {
    pub ue_id: usize,
    pub position: Vec3,
    pub schedule: Schedule,
    /// Present for UEs served by an IAB-node.
    pub relay: Option<RelayLinks>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayLinks {
    pub backhaul_rx_dbm: f64,
    pub dli_dbm: f64,
    pub si: NodeSi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputParams<'a> {
    pub noise_floor_dbm: f64,
    pub bandwidth_hz: f64,
    pub mcs: &'a McsTable,
    pub guard_overhead: f64,
    pub dli_enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub mode: Mode,
    pub ue_id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub serving_cell: usize,
    pub beam: usize,
    pub access_sinr_db: f64,
    pub backhaul_sinr_db: Option<f64>,
    pub dli_power_dbm: Option<f64>,
    pub throughput_bps: f64,
}

fn sinr_db(signal_dbm: f64, noise_dbm: f64, interference_dbm: f64) -> f64 {
    signal_dbm - mw_to_dbm(dbm_to_mw(noise_dbm) + dbm_to_mw(interference_dbm))
}

/// HD relaying with the optimal time split and guard overhead.
pub fn hd_throughput(c_backhaul: f64, c_access: f64, guard_overhead: f64) -> f64 {
    if c_backhaul + c_access <= 0.0 {
        0.0
    } else {
        (1.0 - guard_overhead) * c_backhaul * c_access / (c_backhaul + c_access)
    }
}

pub fn ue_throughput(ue: &UeLinks, mode: Mode, p: &ThroughputParams) -> ThroughputRecord {
    let cap = |sinr: f64| capacity_bps(sinr, p.bandwidth_hz, p.mcs);
    let n = p.noise_floor_dbm;
    let s = ue.schedule.rx_power_dbm;
    let base = ThroughputRecord {
        mode,
        ue_id: ue.ue_id,
        x_m: ue.position.x,
        y_m: ue.position.y,
        serving_cell: ue.schedule.cell,
        beam: ue.schedule.beam,
        access_sinr_db: s - n,
        backhaul_sinr_db: None,
        dli_power_dbm: None,
        throughput_bps: cap(s - n),
    };
    let Some(r) = ue.relay else {
        return base;
    };
    let dli = if mode.is_full_duplex() && p.dli_enabled {
        r.dli_dbm
    } else {
        f64::NEG_INFINITY
    };
    let si = match mode {
        Mode::FdFull => r.si.full_dbm,
        Mode::FdPropagationOnly => r.si.propagation_dbm,
        _ => f64::NEG_INFINITY,
    };
    let access_sinr = sinr_db(s, n, dli);
    let backhaul_sinr = sinr_db(r.backhaul_rx_dbm, n, si);
    let throughput = match mode {
        Mode::Fibered => cap(access_sinr),
        Mode::Hd => hd_throughput(cap(backhaul_sinr), cap(access_sinr), p.guard_overhead),
        _ => cap(access_sinr).min(cap(backhaul_sinr)),
    };
    ThroughputRecord {
        access_sinr_db: access_sinr,
        backhaul_sinr_db: (mode != Mode::Fibered).then_some(backhaul_sinr),
        dli_power_dbm: Some(r.dli_dbm),
        throughput_bps: throughput,
        ..base
    }
}

pub fn cells(scenario: &Scenario) -> Vec<Cell> {
    std::iter::once(Cell {
        position: scenario.donor.position.into(),
        tx_power_dbm: scenario.donor.tx_power_dbm,
        codebook: scenario.donor_codebook(),
    })
    .chain(scenario.iab_nodes.iter().enumerate().map(|(i, n)| Cell {
        position: n.position.into(),
        tx_power_dbm: n.tx_power_dbm,
        codebook: scenario.node_codebook(i),
    }))
    .collect()
}

/// Residual SI for every (node, beam) pair, from the scenario override or
/// from the link-level chain seeded per pair.
pub fn residual_si_table(scenario: &Scenario, seed: u64) -> Result<Vec<Vec<NodeSi>>> {
    let needs_chain = scenario
        .modes
        .iter()
        .any(|m| matches!(m, Mode::FdFull | Mode::FdPropagationOnly));
    let jobs: Vec<(usize, usize)> = (0..scenario.iab_nodes.len())
        .flat_map(|n| (0..scenario.node_codebook(n).beams.len()).map(move |b| (n, b)))
        .collect();
    let flat: Vec<NodeSi> = jobs
        .par_iter()
        .map(|&(n, b)| {
            if let Some(o) = scenario.iab_nodes[n].residual_si {
                return Ok(NodeSi {
                    node: n,
                    beam: b,
                    full_dbm: o.full_dbm,
                    propagation_dbm: o.propagation_dbm,
                });
            }
            if !needs_chain {
                return Ok(NodeSi {
                    node: n,
                    beam: b,
                    full_dbm: f64::NEG_INFINITY,
                    propagation_dbm: f64::NEG_INFINITY,
                });
            }
            let beam = scenario.node_codebook(n).beams[b];
            let params = scenario.link_params(n, &beam);
            let r = run_link_chain(&params, rng::derive(seed, &[rng::BEAM, n as u64, b as u64]))?;
            Ok(NodeSi {
                node: n,
                beam: b,
                full_dbm: r.si_only_dbm(r.after_digital_dbm),
                propagation_dbm: r.si_only_dbm(r.after_propagation_dbm),
            })
        })
        .collect::<Result<_>>()?;
    let mut table: Vec<Vec<NodeSi>> = vec![Vec::new(); scenario.iab_nodes.len()];
    for s in flat {
        table[s.node].push(s);
    }
    Ok(table)
}

/// Schedule every UE and collect the link quantities shared by all modes.
pub fn ue_links(scenario: &Scenario, seed: u64, si: &[Vec<NodeSi>]) -> Result<Vec<UeLinks>> {
    let cells = cells(scenario);
    let floor = scenario.noise.floor_dbm();
    let carrier = scenario.link.carrier_freq_hz;
    let donor = Vec3::from(scenario.donor.position);
    let sigma = scenario.access_shadowing_sigma_db;
    scenario
        .ue_grid
        .positions()
        .into_par_iter()
        .enumerate()
        .map(|(id, position)| {
            let ue = Ue {
                id,
                position,
                antenna_gain_dbi: scenario.ue_grid.antenna_gain_dbi,
                shadowing_db: (0..cells.len())
                    .map(|c| shadowing_db(sigma, rng::derive(seed, &[rng::SHADOWING, c as u64, id as u64])))
                    .collect(),
            };
            let schedule = schedule_ue(&ue, &cells, floor, carrier)?;
            let relay = if schedule.cell == 0 {
                None
            } else {
                let node = &scenario.iab_nodes[schedule.cell - 1];
                let mt = Vec3::from(node.position);
                let bh = link_budget(
                    &Terminal {
                        position: donor,
                        antenna: Antenna::Directional {
                            pattern: scenario.donor.du_pattern,
                            boresight: mt - donor,
                        },
                    },
                    &Terminal {
                        position: mt,
                        antenna: Antenna::Directional {
                            pattern: node.mt_pattern,
                            boresight: donor - mt,
                        },
                    },
                    scenario.donor.tx_power_dbm,
                    carrier,
                    0.0,
                    0,
                )?;
                let dli = dli_power_dbm(
                    donor,
                    scenario.donor.tx_power_dbm,
                    &scenario.donor.du_pattern,
                    mt - donor,
                    &ue,
                    carrier,
                )?;
                Some(RelayLinks {
                    backhaul_rx_dbm: bh.rx_power_dbm,
                    dli_dbm: dli,
                    si: si[schedule.cell - 1][schedule.beam],
                })
            };
            Ok(UeLinks {
                ue_id: id,
                position,
                schedule,
                relay,
            })
        })
        .collect()
}

pub fn throughput_params(scenario: &Scenario) -> ThroughputParams<'_> {
    ThroughputParams {
        noise_floor_dbm: scenario.noise.floor_dbm(),
        bandwidth_hz: scenario.noise.bandwidth_hz,
        mcs: &scenario.mcs,
        guard_overhead: scenario.guard_overhead,
        dli_enabled: scenario.dli_enabled,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropOutput {
    pub residual_si: Vec<Vec<NodeSi>>,
    pub records: Vec<ThroughputRecord>,
}

/// One drop with its residual SI table.
pub fn run_drop_detailed(scenario: &Scenario, seed: u64) -> Result<DropOutput> {
    scenario.validate()?;
    let residual_si = residual_si_table(scenario, seed)?;
    let links = ue_links(scenario, seed, &residual_si)?;
    let p = throughput_params(scenario);
    let records = scenario
        .modes
        .iter()
        .flat_map(|&m| links.iter().map(move |u| ue_throughput(u, m, &p)))
        .collect();
    Ok(DropOutput { residual_si, records })
}

/// All records of one drop, grouped by mode in scenario order, UEs in grid
/// order within each mode.
pub fn run_drop(scenario: &Scenario, seed: u64) -> Result<Vec<ThroughputRecord>> {
    Ok(run_drop_detailed(scenario, seed)?.records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub probability: f64,
}

/// Empirical CDF with one point per distinct value.
pub fn cdf(values: &[f64]) -> Vec<CdfPoint> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.value == x => last.probability = p,
            _ => out.push(CdfPoint { value: x, probability: p }),
        }
    }
    out
}

/// Evaluate an empirical CDF at `x`.
pub fn cdf_at(points: &[CdfPoint], x: f64) -> f64 {
    points.iter().take_while(|p| p.value <= x).last().map_or(0.0, |p| p.probability)
}

/// Smallest value whose empirical CDF reaches `q`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    cdf(values).into_iter().find(|p| p.probability >= q).map(|p| p.value)
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}
