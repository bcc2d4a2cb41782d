//! Deployment description consumed by the system-level simulator.

use serde::{Deserialize, Serialize};

use super::McsTable;
use crate::error::{Error, Result};
use crate::geometry::{direction, AntennaPattern, Vec3};
use crate::rf::NoiseModel;
use crate::sic::LinkParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fibered,
    IdealFd,
    FdFull,
    FdPropagationOnly,
    Hd,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Fibered, Mode::IdealFd, Mode::FdFull, Mode::FdPropagationOnly, Mode::Hd];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Fibered => "fibered",
            Mode::IdealFd => "ideal_fd",
            Mode::FdFull => "fd_full",
            Mode::FdPropagationOnly => "fd_propagation_only",
            Mode::Hd => "hd",
        }
    }

    pub fn is_full_duplex(self) -> bool {
        matches!(self, Mode::IdealFd | Mode::FdFull | Mode::FdPropagationOnly)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn d43() -> f64 {
    43.0
}
fn north() -> f64 {
    90.0
}
fn one_metre() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DonorConfig {
    pub position: [f64; 3],
    #[serde(default = "d43")]
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub du_pattern: AntennaPattern,
    /// Centre azimuth of the access codebook sector.
    #[serde(default = "north")]
    pub sector_azimuth_deg: f64,
}

/// SI powers (noise excluded) that replace the link-level chain for a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualSiOverride {
    pub full_dbm: f64,
    pub propagation_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub position: [f64; 3],
    #[serde(default = "d43")]
    pub tx_power_dbm: f64,
    #[serde(default)]
    pub du_pattern: AntennaPattern,
    #[serde(default)]
    pub mt_pattern: AntennaPattern,
    #[serde(default = "north")]
    pub sector_azimuth_deg: f64,
    #[serde(default = "one_metre")]
    pub antenna_separation_m: f64,
    #[serde(default)]
    pub residual_si: Option<ResidualSiOverride>,
}

impl NodeConfig {
    pub fn at(position: [f64; 3]) -> Self {
        Self {
            position,
            tx_power_dbm: 43.0,
            du_pattern: AntennaPattern::iab(),
            mt_pattern: AntennaPattern::iab(),
            sector_azimuth_deg: 90.0,
            antenna_separation_m: 1.0,
            residual_si: None,
        }
    }
}

/// Eight azimuth by two elevation beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    pub sector_width_deg: f64,
    pub center_downtilt_deg: f64,
    pub elevation_span_deg: f64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self {
            sector_width_deg: 120.0,
            center_downtilt_deg: 30.0,
            elevation_span_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub azimuth_deg: f64,
    pub downtilt_deg: f64,
    pub direction: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub beams: Vec<Beam>,
    pub pattern: AntennaPattern,
}

impl Codebook {
    pub const AZIMUTH_BEAMS: usize = 8;
    pub const ELEVATION_BEAMS: usize = 2;

    /// Beam `e * 8 + a` points at the centre of azimuth slot `a` and
    /// elevation slot `e` of the sector.
    pub fn new(sector_azimuth_deg: f64, cfg: &CodebookConfig, pattern: AntennaPattern) -> Self {
        let az_step = cfg.sector_width_deg / Self::AZIMUTH_BEAMS as f64;
        let el_step = cfg.elevation_span_deg / Self::ELEVATION_BEAMS as f64;
        let mut beams = Vec::with_capacity(16);
        for e in 0..Self::ELEVATION_BEAMS {
            let tilt = cfg.center_downtilt_deg - cfg.elevation_span_deg / 2.0 + el_step * (e as f64 + 0.5);
            for a in 0..Self::AZIMUTH_BEAMS {
                let az = sector_azimuth_deg - cfg.sector_width_deg / 2.0 + az_step * (a as f64 + 0.5);
                beams.push(Beam {
                    azimuth_deg: az,
                    downtilt_deg: tilt,
                    direction: direction(az, tilt),
                });
            }
        }
        Self { beams, pattern }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UeGrid {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub height_m: f64,
    pub antenna_gain_dbi: f64,
}

impl Default for UeGrid {
    fn default() -> Self {
        Self {
            x_min_m: 0.0,
            x_max_m: 500.0,
            y_min_m: 0.0,
            y_max_m: 500.0,
            nx: 21,
            ny: 21,
            height_m: 1.5,
            antenna_gain_dbi: 0.0,
        }
    }
}

impl UeGrid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// UE positions in row-major order (x fastest).
    pub fn positions(&self) -> Vec<Vec3> {
        let step = |lo: f64, hi: f64, n: usize, i: usize| {
            if n <= 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        (0..self.ny)
            .flat_map(|j| {
                (0..self.nx).map(move |i| {
                    Vec3::new(
                        step(self.x_min_m, self.x_max_m, self.nx, i),
                        step(self.y_min_m, self.y_max_m, self.ny, j),
                        self.height_m,
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    #[default]
    Link,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Dotted scenario path to vary, e.g. `iab_nodes.*.antenna_separation_m`.
    pub key: String,
    pub values: Vec<serde_json::Value>,
    #[serde(default)]
    pub kind: SweepKind,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_nodes() -> Vec<NodeConfig> {
    vec![
        NodeConfig {
            sector_azimuth_deg: 90.0,
            ..NodeConfig::at([100.0, 150.0, 126.0])
        },
        NodeConfig {
            sector_azimuth_deg: 90.0,
            ..NodeConfig::at([400.0, 150.0, 99.0])
        },
    ]
}
fn all_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}
fn four_db() -> f64 {
    4.0
}
fn guard() -> f64 {
    0.1
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub donor: DonorConfig,
    #[serde(default = "default_nodes")]
    pub iab_nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub codebook: CodebookConfig,
    #[serde(default)]
    pub ue_grid: UeGrid,
    #[serde(default = "all_modes")]
    pub modes: Vec<Mode>,
    /// Receiver noise; its bandwidth is also the capacity bandwidth.
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "four_db")]
    pub access_shadowing_sigma_db: f64,
    /// Fraction of HD frame time lost to backhaul/access switching guards.
    #[serde(default = "guard")]
    pub guard_overhead: f64,
    #[serde(default = "yes")]
    pub dli_enabled: bool,
    #[serde(default)]
    pub mcs: McsTable,
    /// Link-level template for residual SI; per-node position, separation,
    /// patterns and beams replace the geometric fields.
    #[serde(default)]
    pub link: LinkParams,
    /// Independent drops per command; drop `i` runs with `seed + i`.
    #[serde(default = "one")]
    pub drops: usize,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Optional measured-reference CSV for compare-prototype, relative to
    /// the scenario file.
    #[serde(default)]
    pub prototype_reference: Option<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            donor: DonorConfig {
                position: [250.0, -300.0, 130.0],
                tx_power_dbm: 43.0,
                du_pattern: AntennaPattern::iab(),
                sector_azimuth_deg: 90.0,
            },
            iab_nodes: default_nodes(),
            codebook: CodebookConfig::default(),
            ue_grid: UeGrid::default(),
            modes: all_modes(),
            noise: NoiseModel::default(),
            access_shadowing_sigma_db: 4.0,
            guard_overhead: 0.1,
            dli_enabled: true,
            mcs: McsTable::default(),
            link: LinkParams::default(),
            drops: 1,
            sweep: None,
            prototype_reference: None,
        }
    }
}

fn finite3(v: &[f64; 3], path: String) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(path, "coordinates must be finite"))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        finite3(&self.donor.position, "donor.position".into())?;
        if !self.donor.tx_power_dbm.is_finite() {
            return Err(Error::invalid("donor.tx_power_dbm", "must be finite"));
        }
        self.donor.du_pattern.validate("donor.du_pattern")?;
        for (i, n) in self.iab_nodes.iter().enumerate() {
            let p = |f: &str| format!("iab_nodes[{i}].{f}");
            finite3(&n.position, p("position"))?;
            if n.position == self.donor.position {
                return Err(Error::invalid(p("position"), "coincides with the donor"));
            }
            if !(n.antenna_separation_m > 0.0) {
                return Err(Error::invalid(p("antenna_separation_m"), "must be positive"));
            }
            if !n.tx_power_dbm.is_finite() {
                return Err(Error::invalid(p("tx_power_dbm"), "must be finite"));
            }
            n.du_pattern.validate(&p("du_pattern"))?;
            n.mt_pattern.validate(&p("mt_pattern"))?;
            if let Some(r) = &n.residual_si {
                if r.full_dbm > r.propagation_dbm {
                    return Err(Error::invalid(
                        p("residual_si.full_dbm"),
                        "full-chain residual cannot exceed the propagation-only residual",
                    ));
                }
            }
        }
        let cb = &self.codebook;
        if !(cb.sector_width_deg > 0.0 && cb.sector_width_deg <= 360.0) {
            return Err(Error::invalid("codebook.sector_width_deg", "must be within (0, 360]"));
        }
        if !(cb.elevation_span_deg >= 0.0) {
            return Err(Error::invalid("codebook.elevation_span_deg", "must be non-negative"));
        }
        let g = &self.ue_grid;
        if !(g.x_max_m >= g.x_min_m && g.y_max_m >= g.y_min_m) {
            return Err(Error::invalid("ue_grid", "grid bounds are inverted"));
        }
        if !g.height_m.is_finite() {
            return Err(Error::invalid("ue_grid.height_m", "must be finite"));
        }
        if self.modes.is_empty() {
            return Err(Error::invalid("modes", "at least one mode is required"));
        }
        self.noise.validate("noise")?;
        if !(self.access_shadowing_sigma_db >= 0.0) {
            return Err(Error::invalid("access_shadowing_sigma_db", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.guard_overhead) {
            return Err(Error::invalid("guard_overhead", "must be within [0, 1)"));
        }
        self.mcs.validate("mcs")?;
        self.link.validate("link")?;
        if self.drops == 0 {
            return Err(Error::invalid("drops", "must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::invalid("sweep.values", "must not be empty"));
            }
        }
        Ok(())
    }

    pub fn donor_codebook(&self) -> Codebook {
        Codebook::new(self.donor.sector_azimuth_deg, &self.codebook, self.donor.du_pattern)
    }

    pub fn node_codebook(&self, node: usize) -> Codebook {
        let n = &self.iab_nodes[node];
        Codebook::new(n.sector_azimuth_deg, &self.codebook, n.du_pattern)
    }

    /// Link-chain parameters for `node` serving through `beam`.
    pub fn link_params(&self, node: usize, beam: &Beam) -> LinkParams {
        let n = &self.iab_nodes[node];
        let to_donor = Vec3::from(self.donor.position) - Vec3::from(n.position);
        let horiz = (to_donor.x * to_donor.x + to_donor.y * to_donor.y).sqrt();
        LinkParams {
            tx_power_dbm: n.tx_power_dbm,
            antenna_separation_m: n.antenna_separation_m,
            du_azimuth_deg: beam.azimuth_deg,
            du_downtilt_deg: beam.downtilt_deg,
            mt_azimuth_deg: to_donor.y.atan2(to_donor.x).to_degrees(),
            mt_downtilt_deg: -to_donor.z.atan2(horiz).to_degrees(),
            du_pattern: n.du_pattern,
            mt_pattern: n.mt_pattern,
            ..self.link.clone()
        }
    }
}
