//! Farm geometry and the k-nearest-neighbour structure.
//!
//! Every turbine's model input stacks the wind-speed histories of its k
//! nearest turbines (itself always first), so the neighbour index built here
//! fixes the channel order of every training sample. The index is immutable
//! once built and carries a content digest so a checkpoint can refuse to run
//! against a different farm.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("layout must contain at least one turbine")]
    EmptyLayout,
    #[error("duplicate turbine id {0:?}")]
    DuplicateTurbineId(String),
    #[error("turbine {id:?} has non-finite coordinate ({x}, {y})")]
    NonFiniteCoordinate { id: String, x: f64, y: f64 },
    #[error("got {ids} turbine ids but {coords} coordinate pairs")]
    CountMismatch { ids: usize, coords: usize },
    #[error("k must satisfy 1 <= k <= {n} (farm size), got {k}")]
    KOutOfRange { k: usize, n: usize },
    #[error("layout csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("layout csv {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Turbine positions on a planar grid, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmLayout {
    turbine_ids: Vec<String>,
    coords: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutRow {
    turbine_id: String,
    x: f64,
    y: f64,
}

impl FarmLayout {
    pub fn new(turbine_ids: Vec<String>, coords: Vec<(f64, f64)>) -> Result<Self, GraphError> {
        if turbine_ids.is_empty() {
            return Err(GraphError::EmptyLayout);
        }
        if turbine_ids.len() != coords.len() {
            return Err(GraphError::CountMismatch {
                ids: turbine_ids.len(),
                coords: coords.len(),
            });
        }
        let mut seen = HashSet::new();
        for (id, &(x, y)) in turbine_ids.iter().zip(&coords) {
            if !seen.insert(id.as_str()) {
                return Err(GraphError::DuplicateTurbineId(id.clone()));
            }
            if !x.is_finite() || !y.is_finite() {
                return Err(GraphError::NonFiniteCoordinate {
                    id: id.clone(),
                    x,
                    y,
                });
            }
        }
        Ok(Self {
            turbine_ids,
            coords,
        })
    }

    pub fn len(&self) -> usize {
        self.turbine_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turbine_ids.is_empty()
    }

    pub fn turbine_ids(&self) -> &[String] {
        &self.turbine_ids
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn index_of(&self, turbine_id: &str) -> Option<usize> {
        self.turbine_ids.iter().position(|id| id == turbine_id)
    }

    /// Read a layout from CSV with header `turbine_id,x,y`.
    ///
    /// With `latlon` set, `x` is longitude and `y` latitude in degrees; the
    /// pair is projected to local planar meters (equirectangular around the
    /// farm centroid), which is accurate at wind-farm extents.
    pub fn from_csv(path: &Path, latlon: bool) -> Result<Self, GraphError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                let msg = e.to_string();
                GraphError::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::other(msg),
                }
            }
            _ => GraphError::Csv(e),
        })?;
        let mut ids = Vec::new();
        let mut coords = Vec::new();
        for row in reader.deserialize() {
            let row: LayoutRow = row?;
            ids.push(row.turbine_id);
            coords.push((row.x, row.y));
        }
        let layout = Self::new(ids, coords)?;
        if latlon {
            Ok(layout.project_lat_lon())
        } else {
            Ok(layout)
        }
    }

    pub fn to_csv(&self, path: &Path) -> Result<(), GraphError> {
        let mut writer = csv::Writer::from_path(path)?;
        for (id, &(x, y)) in self.turbine_ids.iter().zip(&self.coords) {
            writer.serialize(LayoutRow {
                turbine_id: id.clone(),
                x,
                y,
            })?;
        }
        writer.flush().map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Project (longitude, latitude) degrees to planar meters around the
    /// farm centroid.
    fn project_lat_lon(&self) -> Self {
        let n = self.coords.len() as f64;
        let lon0 = self.coords.iter().map(|c| c.0).sum::<f64>() / n;
        let lat0 = self.coords.iter().map(|c| c.1).sum::<f64>() / n;
        let coords = self
            .coords
            .iter()
            .map(|&(lon, lat)| {
                let x = EARTH_RADIUS_M * (lon - lon0).to_radians() * lat0.to_radians().cos();
                let y = EARTH_RADIUS_M * (lat - lat0).to_radians();
                (x, y)
            })
            .collect();
        Self {
            turbine_ids: self.turbine_ids.clone(),
            coords,
        }
    }
}

/// Per-turbine ordered neighbour lists; entry 0 is always the turbine itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborIndex {
    k: usize,
    lists: Vec<Vec<usize>>,
}

impl NeighborIndex {
    /// Degenerate index where every turbine's only neighbour is itself.
    /// Used by baselines that ignore spatial context.
    pub fn self_only(n: usize) -> Self {
        Self {
            k: 1,
            lists: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Neighbour indices of turbine `i`, nearest first, `i` itself leading.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    /// Content digest over the layout and neighbour lists, hex encoded.
    /// Checkpoints store this so a model is never applied to a farm with a
    /// different geometry or neighbour order.
    pub fn digest(&self, layout: &FarmLayout) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.k.to_le_bytes());
        hasher.update(layout.len().to_le_bytes());
        for (id, &(x, y)) in layout.turbine_ids().iter().zip(layout.coords()) {
            hasher.update(id.as_bytes());
            hasher.update([0u8]);
            hasher.update(x.to_le_bytes());
            hasher.update(y.to_le_bytes());
        }
        for list in &self.lists {
            for &j in list {
                hasher.update(j.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Write the index as CSV: `turbine_id,rank,neighbor_id,distance_m`.
    pub fn to_csv(&self, layout: &FarmLayout, path: &Path) -> Result<(), GraphError> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["turbine_id", "rank", "neighbor_id", "distance_m"])?;
        for (i, list) in self.lists.iter().enumerate() {
            let (xi, yi) = layout.coords()[i];
            for (rank, &j) in list.iter().enumerate() {
                let (xj, yj) = layout.coords()[j];
                let dist = ((xj - xi).powi(2) + (yj - yi).powi(2)).sqrt();
                writer.write_record([
                    layout.turbine_ids()[i].as_str(),
                    &rank.to_string(),
                    layout.turbine_ids()[j].as_str(),
                    &format!("{dist}"),
                ])?;
            }
        }
        writer.flush().map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Build the k-nearest-neighbour index by exhaustive pairwise distances.
///
/// Each turbine's list starts with itself; the remaining k-1 slots are the
/// nearest other turbines by Euclidean distance, ties broken by ascending
/// turbine index. Farms are a few hundred turbines at most, so the O(N²)
/// scan is cheap.
pub fn build_knn(layout: &FarmLayout, k: usize) -> Result<NeighborIndex, GraphError> {
    let n = layout.len();
    if k < 1 || k > n {
        return Err(GraphError::KOutOfRange { k, n });
    }
    let coords = layout.coords();
    let lists = (0..n)
        .map(|i| {
            let (xi, yi) = coords[i];
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let (xj, yj) = coords[j];
                    ((xj - xi).powi(2) + (yj - yi).powi(2), j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut list = Vec::with_capacity(k);
            list.push(i);
            list.extend(others.iter().take(k - 1).map(|&(_, j)| j));
            list
        })
        .collect();
    Ok(NeighborIndex { k, lists })
}
