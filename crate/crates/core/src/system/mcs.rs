use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    pub min_sinr_db: f64,
    pub spectral_efficiency_bps_per_hz: f64,
}

/// Discrete SINR to spectral-efficiency mapping with closed lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McsTable {
    pub entries: Vec<McsEntry>,
}

impl Default for McsTable {
    /// 15-level CQI-style table.
    fn default() -> Self {
        const TABLE: [(f64, f64); 15] = [
            (-6.7, 0.1523),
            (-5.1, 0.2344),
            (-3.2, 0.3770),
            (-1.3, 0.6016),
            (0.8, 0.8770),
            (2.7, 1.1758),
            (4.7, 1.4766),
            (6.5, 1.9141),
            (8.6, 2.4063),
            (10.4, 2.7305),
            (12.3, 3.3223),
            (14.2, 3.9023),
            (15.9, 4.5234),
            (17.8, 5.1152),
            (19.8, 5.5547),
        ];
        Self {
            entries: TABLE
                .iter()
                .map(|&(t, e)| McsEntry {
                    min_sinr_db: t,
                    spectral_efficiency_bps_per_hz: e,
                })
                .collect(),
        }
    }
}

impl McsTable {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::invalid(path, "MCS table is empty"));
        }
        for (i, w) in self.entries.windows(2).enumerate() {
            if !(w[1].min_sinr_db > w[0].min_sinr_db) {
                return Err(Error::invalid(format!("{path}[{}].min_sinr_db", i + 1), "thresholds must increase strictly"));
            }
            if !(w[1].spectral_efficiency_bps_per_hz > w[0].spectral_efficiency_bps_per_hz) {
                return Err(Error::invalid(
                    format!("{path}[{}].spectral_efficiency_bps_per_hz", i + 1),
                    "efficiencies must increase strictly",
                ));
            }
        }
        if !(self.entries[0].spectral_efficiency_bps_per_hz > 0.0) {
            return Err(Error::invalid(format!("{path}[0].spectral_efficiency_bps_per_hz"), "must be positive"));
        }
        Ok(())
    }

    /// Efficiency of the highest entry whose threshold is at most `sinr_db`;
    /// zero (outage) below the first threshold or for NaN.
    pub fn efficiency(&self, sinr_db: f64) -> f64 {
        self.entries
            .iter()
            .rev()
            .find(|e| sinr_db >= e.min_sinr_db)
            .map_or(0.0, |e| e.spectral_efficiency_bps_per_hz)
    }

    pub fn max_efficiency(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.spectral_efficiency_bps_per_hz)
    }
}

pub fn capacity_bps(sinr_db: f64, bandwidth_hz: f64, mcs: &McsTable) -> f64 {
    bandwidth_hz * mcs.efficiency(sinr_db)
}
