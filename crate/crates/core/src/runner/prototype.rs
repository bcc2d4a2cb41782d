use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AntennaPattern;
use crate::rng;
use crate::sic::{run_link_chain, LinkParams};

/// Shipped outdoor measurement reference. Per-azimuth rows are
/// reconstructed around the three measured per-separation means.
pub const PROTOTYPE_REFERENCE_CSV: &str = include_str!("../../data/prototype_reference.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    Reconstructed,
    MeasuredMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub separation_m: f64,
    /// Empty for mean rows.
    pub relative_azimuth_deg: Option<f64>,
    pub suppression_db: f64,
    pub source: RowSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeReference {
    pub rows: Vec<ReferenceRow>,
}

fn sep_key(d: f64) -> i64 {
    (d * 1e6).round() as i64
}

impl PrototypeReference {
    pub fn shipped() -> Self {
        Self::parse(PROTOTYPE_REFERENCE_CSV).expect("shipped prototype dataset parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<ReferenceRow>, _>>()?;
        let r = Self { rows };
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Azimuth rows, grouped by separation in ascending order.
    pub fn grid(&self) -> Vec<ReferenceRow> {
        let mut v: Vec<ReferenceRow> = self
            .rows
            .iter()
            .copied()
            .filter(|r| r.source == RowSource::Reconstructed)
            .collect();
        v.sort_by(|a, b| {
            a.separation_m
                .total_cmp(&b.separation_m)
                .then(a.relative_azimuth_deg.unwrap_or(0.0).total_cmp(&b.relative_azimuth_deg.unwrap_or(0.0)))
        });
        v
    }

    /// Mean of the azimuth rows per separation, ascending.
    pub fn row_means(&self) -> Vec<(f64, f64)> {
        let mut acc: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
        for r in self.grid() {
            let e = acc.entry(sep_key(r.separation_m)).or_insert((r.separation_m, 0.0, 0));
            e.1 += r.suppression_db;
            e.2 += 1;
        }
        acc.into_values().map(|(d, s, n)| (d, s / n as f64)).collect()
    }

    pub fn measured_mean(&self, separation_m: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.source == RowSource::MeasuredMean && sep_key(r.separation_m) == sep_key(separation_m))
            .map(|r| r.suppression_db)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if !(r.separation_m > 0.0) || !r.suppression_db.is_finite() {
                return Err(Error::invalid(format!("prototype_reference[{i}]"), "bad separation or suppression"));
            }
            if r.source == RowSource::Reconstructed && r.relative_azimuth_deg.is_none() {
                return Err(Error::invalid(
                    format!("prototype_reference[{i}].relative_azimuth_deg"),
                    "required for azimuth rows",
                ));
            }
        }
        for (d, m) in self.row_means() {
            if let Some(target) = self.measured_mean(d) {
                if (m - target).abs() > 0.01 {
                    return Err(Error::invalid(
                        "prototype_reference",
                        format!("rows at {d} m average {m:.3} dB, measured mean is {target} dB"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Link parameters of the lens-antenna prototype: both antennas side by side
/// in the horizontal plane, the Rx rotated by the relative azimuth.
pub fn prototype_link_params(template: &LinkParams, separation_m: f64, relative_azimuth_deg: f64) -> LinkParams {
    LinkParams {
        antenna_separation_m: separation_m,
        rx_offset_direction: [0.0, 1.0, 0.0],
        du_azimuth_deg: 0.0,
        du_downtilt_deg: 0.0,
        mt_azimuth_deg: relative_azimuth_deg,
        mt_downtilt_deg: 0.0,
        du_pattern: AntennaPattern::prototype_lens(),
        mt_pattern: AntennaPattern::prototype_lens(),
        ideal_fd: false,
        ..template.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub separation_m: f64,
    pub relative_azimuth_deg: f64,
    pub measured_db: f64,
    pub simulated_db: f64,
    pub delta_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub separation_m: f64,
    pub measured_mean_db: f64,
    pub simulated_mean_db: f64,
    pub mean_delta_db: f64,
}

/// Simulated propagation-domain suppression on the reference grid.
pub fn compare_prototype(
    reference: &PrototypeReference,
    template: &LinkParams,
    seed: u64,
) -> Result<(Vec<ComparisonRow>, Vec<ComparisonSummary>)> {
    use rayon::prelude::*;
    let grid = reference.grid();
    let rows: Vec<ComparisonRow> = grid
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let az = r.relative_azimuth_deg.unwrap_or(0.0);
            let p = prototype_link_params(template, r.separation_m, az);
            let rep = run_link_chain(&p, rng::derive(seed, &[rng::REFLECTORS, i as u64]))?;
            let sim = rep.per_domain_db[0];
            Ok(ComparisonRow {
                separation_m: r.separation_m,
                relative_azimuth_deg: az,
                measured_db: r.suppression_db,
                simulated_db: sim,
                delta_db: sim - r.suppression_db,
            })
        })
        .collect::<Result<_>>()?;
    let mut acc: BTreeMap<i64, (f64, f64, f64, usize)> = BTreeMap::new();
    for r in &rows {
        let e = acc.entry(sep_key(r.separation_m)).or_insert((r.separation_m, 0.0, 0.0, 0));
        e.1 += r.measured_db;
        e.2 += r.simulated_db;
        e.3 += 1;
    }
    let summary = acc
        .into_values()
        .map(|(d, m, s, n)| {
            let measured = reference.measured_mean(d).unwrap_or(m / n as f64);
            let simulated = s / n as f64;
            ComparisonSummary {
                separation_m: d,
                measured_mean_db: measured,
                simulated_mean_db: simulated,
                mean_delta_db: simulated - measured,
            }
        })
        .collect();
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_means() {
        let r = PrototypeReference::shipped();
        assert_eq!(r.measured_mean(2.0), Some(100.125));
        assert_eq!(r.measured_mean(1.0), Some(97.26));
        assert_eq!(r.measured_mean(0.1), Some(82.18));
        for (d, m) in r.row_means() {
            assert!((m - r.measured_mean(d).unwrap()).abs() < 1e-9);
        }
        assert_eq!(r.grid().len(), 21);
        let spread = r.grid().iter().map(|x| (x.suppression_db - r.measured_mean(x.separation_m).unwrap()).abs()).fold(0.0, f64::max);
        assert!(spread <= 8.0 + 1e-9);
    }

    #[test]
    fn inconsistent_means_rejected() {
        let text = PROTOTYPE_REFERENCE_CSV.replace("2,0,106.125", "2,0,107.125");
        assert!(PrototypeReference::parse(&text).is_err());
    }
}
