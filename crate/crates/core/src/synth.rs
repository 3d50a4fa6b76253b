//! Seeded synthetic mobile network with a known relation rule.
//!
//! Sites are scattered uniformly over a bounding box and every site hosts a
//! few cells that share its coordinates. Each cell carries eight attributes:
//!
//! | column           | meaning                                            |
//! |------------------|----------------------------------------------------|
//! | `lat`, `lon`     | site position in degrees                           |
//! | `band`           | frequency band index in `0..bands`                 |
//! | `azimuth`        | sector pointing direction, degrees in `[0, 360)`   |
//! | `tx_power`       | transmit power proxy (dBm), lower for higher bands |
//! | `antenna_height` | site mast height plus per-cell jitter (m)          |
//! | `capacity`       | site load level plus per-cell jitter               |
//! | `noise`          | Gaussian nuisance, independent of everything else  |
//!
//! Relations: every pair of cells on the same site, plus inter-site pairs
//! within `neighbor_radius_km` that pass the configured [`RelationRule`].

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{geo_distance, DistanceMetric};
use crate::data::{write_cells_csv, write_edges_csv, DataError};
use crate::features::{CoordColumns, FeatureMatrix};
use crate::graph::{CellId, RanGraph};
use crate::nn::Matrix;

pub const FEATURE_COLUMNS: [&str; 8] = [
    "lat",
    "lon",
    "band",
    "azimuth",
    "tx_power",
    "antenna_height",
    "capacity",
    "noise",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config, field `{field}`: {message}")]
    BadConfig { field: &'static str, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

/// Which inter-site pairs within the radius become relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RelationRule {
    /// Band indices equal or adjacent (`|Δband| ≤ 1`).
    #[default]
    Band,
    /// Mean `capacity` over the two sites' cells differs by at most
    /// `tolerance`. Only recoverable from a cell's site-mates, not from the
    /// cell itself.
    SiteAggregate { tolerance: f64 },
}

/// Fields left out of a JSON config take their [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sites: usize,
    /// Inclusive range of cells per site.
    pub cells_per_site: [usize; 2],
    pub region: BoundingBox,
    pub neighbor_radius_km: f64,
    pub bands: u32,
    /// Standard deviation of the nuisance feature.
    pub feature_noise: f64,
    /// Standard deviation of the per-cell capacity jitter around its site level.
    pub capacity_jitter: f64,
    pub rule: RelationRule,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sites: 300,
            cells_per_site: [3, 7],
            region: BoundingBox {
                lat_min: 59.0,
                lat_max: 59.9,
                lon_min: 17.5,
                lon_max: 19.3,
            },
            neighbor_radius_km: 2.0,
            bands: 8,
            feature_noise: 1.0,
            capacity_jitter: 10.0,
            rule: RelationRule::Band,
            seed: 1,
        }
    }
}

fn bad(field: &'static str, message: impl Into<String>) -> SynthError {
    SynthError::BadConfig {
        field,
        message: message.into(),
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.sites < 2 {
            return Err(bad("sites", format!("must be at least 2, got {}", self.sites)));
        }
        let [lo, hi] = self.cells_per_site;
        if lo == 0 || lo > hi {
            return Err(bad("cells_per_site", format!("need 1 <= min <= max, got [{lo}, {hi}]")));
        }
        if !(self.neighbor_radius_km > 0.0) || !self.neighbor_radius_km.is_finite() {
            return Err(bad("neighbor_radius_km", "must be positive and finite"));
        }
        if self.bands == 0 {
            return Err(bad("bands", "must be at least 1"));
        }
        if !(self.feature_noise >= 0.0) || !self.feature_noise.is_finite() {
            return Err(bad("feature_noise", "must be a finite value >= 0"));
        }
        if !(self.capacity_jitter >= 0.0) || !self.capacity_jitter.is_finite() {
            return Err(bad("capacity_jitter", "must be a finite value >= 0"));
        }
        let b = self.region;
        let ordered = b.lat_min < b.lat_max && b.lon_min < b.lon_max;
        let polar_safe = b.lat_min >= -60.0 && b.lat_max <= 60.0;
        let lon_ok = b.lon_min >= -180.0 && b.lon_max <= 180.0;
        if !(ordered && polar_safe && lon_ok) {
            return Err(bad("region", "need lat_min < lat_max within [-60, 60] and lon_min < lon_max within [-180, 180]"));
        }
        if let RelationRule::SiteAggregate { tolerance } = self.rule {
            if !(tolerance >= 0.0) {
                return Err(bad("rule", "site_aggregate tolerance must be >= 0"));
            }
        }
        Ok(())
    }
}

/// A generated network and the rule that produced its relations.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub graph: RanGraph,
    /// Site index of every cell.
    pub site_of: Vec<usize>,
    pub config: SynthConfig,
}

/// Independent random streams, so e.g. changing the nuisance level leaves
/// positions and bands untouched.
fn stream(seed: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(lane);
    rng
}

pub fn generate(cfg: &SynthConfig) -> Result<GroundTruth, SynthError> {
    cfg.validate()?;
    let mut site_rng = stream(cfg.seed, 1);
    let mut cell_rng = stream(cfg.seed, 2);
    let mut noise_rng = stream(cfg.seed, 3);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");

    let b = cfg.region;
    struct Site {
        lat: f64,
        lon: f64,
        cells: usize,
        height: f64,
        load: f64,
        heading: f64,
    }
    let sites: Vec<Site> = (0..cfg.sites)
        .map(|_| Site {
            lat: site_rng.random_range(b.lat_min..b.lat_max),
            lon: site_rng.random_range(b.lon_min..b.lon_max),
            cells: site_rng.random_range(cfg.cells_per_site[0]..=cfg.cells_per_site[1]),
            height: site_rng.random_range(15.0..45.0),
            load: site_rng.random_range(0.0..100.0),
            heading: site_rng.random_range(0.0..360.0),
        })
        .collect();

    let mut ids = Vec::new();
    let mut site_of = Vec::new();
    let mut rows: Vec<[f64; 8]> = Vec::new();
    for (s, site) in sites.iter().enumerate() {
        for c in 0..site.cells {
            let band = cell_rng.random_range(0..cfg.bands) as f64;
            let azimuth = (site.heading + 360.0 * c as f64 / site.cells as f64 + 10.0 * unit.sample(&mut cell_rng)).rem_euclid(360.0);
            let tx_power = 46.0 - 3.0 * band + unit.sample(&mut cell_rng);
            let height = site.height + unit.sample(&mut cell_rng);
            let capacity = site.load + cfg.capacity_jitter * unit.sample(&mut cell_rng);
            let noise = cfg.feature_noise * unit.sample(&mut noise_rng);
            // rem_euclid can round up to exactly 360
            let azimuth = if azimuth >= 360.0 { 0.0 } else { azimuth };
            rows.push([site.lat, site.lon, band, azimuth, tx_power, height, capacity, noise]);
            ids.push(CellId::new(format!("S{s:04}-C{c}")));
            site_of.push(s);
        }
    }

    let site_capacity: Vec<f64> = {
        let mut sum = vec![0.0; sites.len()];
        let mut count = vec![0usize; sites.len()];
        for (row, &s) in rows.iter().zip(&site_of) {
            sum[s] += row[6];
            count[s] += 1;
        }
        sum.iter().zip(&count).map(|(t, &n)| t / n as f64).collect()
    };

    let mut edges = Vec::new();
    let n = rows.len();
    for i in 0..n {
        for j in i + 1..n {
            let (si, sj) = (site_of[i], site_of[j]);
            let related = if si == sj {
                true
            } else {
                let d = geo_distance((rows[i][0], rows[i][1]), (rows[j][0], rows[j][1]), DistanceMetric::HaversineKm);
                d <= cfg.neighbor_radius_km
                    && match cfg.rule {
                        RelationRule::Band => (rows[i][2] - rows[j][2]).abs() <= 1.0,
                        RelationRule::SiteAggregate { tolerance } => (site_capacity[si] - site_capacity[sj]).abs() <= tolerance,
                    }
            };
            if related {
                edges.push((i, j));
            }
        }
    }

    let values = Matrix::from_rows(&rows).expect("finite synthetic values");
    let columns = FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let features = FeatureMatrix::new(columns, values, Some(CoordColumns { lat: 0, lon: 1 })).expect("valid synthetic features");
    let graph = RanGraph::from_indexed(ids, edges, features).expect("valid synthetic graph");
    Ok(GroundTruth {
        graph,
        site_of,
        config: cfg.clone(),
    })
}

/// Summary written next to the exported CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMeta {
    pub config: SynthConfig,
    pub cells: usize,
    pub relations: usize,
    pub columns: Vec<String>,
}

impl GroundTruth {
    pub fn meta(&self) -> GroundTruthMeta {
        GroundTruthMeta {
            config: self.config.clone(),
            cells: self.graph.num_nodes(),
            relations: self.graph.num_edges(),
            columns: self.graph.features().columns().to_vec(),
        }
    }
}

/// Writes `cells.csv` and `edges.csv` into `dir`.
pub fn export(gt: &GroundTruth, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    let g = &gt.graph;
    let mut cells = Vec::new();
    write_cells_csv(g.ids(), g.features(), &mut cells)?;
    fs::write(dir.join("cells.csv"), cells)?;
    let mut edges = Vec::new();
    write_edges_csv(&g.edge_ids(), &mut edges)?;
    fs::write(dir.join("edges.csv"), edges)?;
    Ok(())
}
