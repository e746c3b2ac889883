//! Post-processing of watershed-detector output maps.
//!
//! The detector produces, per pixel, an objectness energy, one score per
//! class and a predicted box size. [`detect`] turns those maps into discrete
//! detections: markers are the connected components of the thresholded
//! energy, each marker takes the class with the largest summed score, and its
//! box size comes from the regressed map, a per-class cached table, or a
//! hybrid of the two.

mod bias;
mod document;
mod maps;
mod markers;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bias::{size_bias_report, size_bias_report_pages, BiasBin, BiasReport, BIAS_MATCH_IOU};
pub use document::{detections_from_json, detections_to_json, load_detections, save_detections, PageDetections};
pub use maps::{MapStack, DWM_MAGIC};
pub use markers::{extract_markers, Component};

use crate::annotation::{BBox, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class_name: String,
    pub bbox: BBox,
    /// Peak energy of the marker.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::InvalidArgument(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

/// Where a detection's box size comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxMode {
    /// Energy-weighted mean of the box-size maps over the marker.
    #[default]
    Regressed,
    /// The class's entry in the cached table.
    Cached,
    /// Cached when the regressed size strays from the cached one by more than
    /// the relative tolerance in either dimension, regressed otherwise.
    Hybrid,
}

impl FromStr for BoxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regressed" => Ok(BoxMode::Regressed),
            "cached" => Ok(BoxMode::Cached),
            "hybrid" => Ok(BoxMode::Hybrid),
            other => Err(Error::InvalidArgument(format!(
                "unknown box mode {other:?}; expected regressed, cached or hybrid"
            ))),
        }
    }
}

impl fmt::Display for BoxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxMode::Regressed => "regressed",
            BoxMode::Cached => "cached",
            BoxMode::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostConfig {
    /// Energy threshold τ; pixels with energy ≥ τ are marker candidates.
    pub energy_threshold: f64,
    pub connectivity: Connectivity,
    /// Markers with fewer pixels are discarded.
    pub min_area: usize,
    pub box_mode: BoxMode,
    /// Relative deviation δ that makes hybrid mode fall back to the cache.
    pub hybrid_tolerance: f64,
}

impl Default for PostConfig {
    fn default() -> Self {
        Self {
            energy_threshold: 0.2,
            connectivity: Connectivity::Eight,
            min_area: 4,
            box_mode: BoxMode::Regressed,
            hybrid_tolerance: 0.5,
        }
    }
}

impl PostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_threshold > 0.0 && self.energy_threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "energy threshold must lie in (0, 1), got {}",
                self.energy_threshold
            )));
        }
        if self.hybrid_tolerance.is_nan() || self.hybrid_tolerance <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "hybrid tolerance must be positive, got {}",
                self.hybrid_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CachedBox {
    pub height: f64,
    pub width: f64,
}

/// Canonical per-class box size used in place of regressed sizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CachedBoxTable {
    boxes: BTreeMap<String, CachedBox>,
    /// Classes that could not be cached (no instances, or a zero median).
    #[serde(default)]
    empty_classes: Vec<String>,
}

impl CachedBoxTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, class: impl Into<String>, width: f64, height: f64) -> Result<()> {
        let class = class.into();
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::Validation(format!(
                "cached box for {class:?} must be strictly positive, got {width}x{height}"
            )));
        }
        self.boxes.insert(class, CachedBox { height, width });
        Ok(())
    }

    pub fn get(&self, class: &str) -> Option<CachedBox> {
        self.boxes.get(class).copied()
    }

    pub fn boxes(&self) -> &BTreeMap<String, CachedBox> {
        &self.boxes
    }

    pub fn empty_classes(&self) -> &[String] {
        &self.empty_classes
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: CachedBoxTable = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        for (c, b) in &t.boxes {
            if !(b.width > 0.0 && b.height > 0.0) {
                return Err(Error::Validation(format!(
                    "cached box for {c:?} is not strictly positive"
                )));
            }
        }
        Ok(t)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per class, the element-wise median of ground-truth widths and heights
/// (mean of the two middle values for even counts). Registry classes without
/// instances are listed in [`CachedBoxTable::empty_classes`].
pub fn build_cached_boxes(d: &Dataset) -> CachedBoxTable {
    let mut dims: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for a in d.pages.iter().flat_map(|p| &p.annotations) {
        let e = dims.entry(a.class_name()).or_default();
        e.0.push(a.bbox.width());
        e.1.push(a.bbox.height());
    }
    let mut table = CachedBoxTable::new();
    for (class, (mut ws, mut hs)) in dims {
        let (w, h) = (median(&mut ws), median(&mut hs));
        if table.insert(class, w, h).is_err() {
            table.empty_classes.push(class.to_string());
        }
    }
    for c in &d.class_registry {
        if table.get(c).is_none() && !table.empty_classes.contains(c) {
            table.empty_classes.push(c.clone());
        }
    }
    table.empty_classes.sort();
    table
}

/// Converts output maps into detections, one per marker, in marker order.
///
/// `registry[k]` names class plane `k`. A table is required for the cached
/// and hybrid modes.
pub fn detect(
    maps: &MapStack,
    registry: &[String],
    cfg: &PostConfig,
    table: Option<&CachedBoxTable>,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    if registry.len() != maps.num_classes() {
        return Err(Error::Validation(format!(
            "registry has {} classes but the maps carry {}",
            registry.len(),
            maps.num_classes()
        )));
    }
    let table = match (cfg.box_mode, table) {
        (BoxMode::Regressed, t) => t,
        (_, Some(t)) => Some(t),
        (mode, None) => {
            return Err(Error::InvalidArgument(format!(
                "box mode {mode} needs a cached box table"
            )))
        }
    };
    let (h, w) = (maps.height(), maps.width());
    let markers = extract_markers(maps.energy(), h, w, cfg);
    let mut out = Vec::with_capacity(markers.len());
    for m in markers {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..maps.num_classes() {
            let plane = maps.class_plane(k);
            let s: f64 = m.pixels.iter().map(|&(r, c)| plane[r * w + c] as f64).sum();
            // strict comparison keeps the lower index on ties
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        let Some((k, _)) = best else {
            return Err(Error::Validation("maps carry no class planes".into()));
        };
        let class_name = registry[k].clone();

        let regressed = || -> (f64, f64) {
            let (bw, bh) = (maps.box_widths(), maps.box_heights());
            let (mut sw, mut sh, mut se) = (0f64, 0f64, 0f64);
            for &(r, c) in &m.pixels {
                let i = r * w + c;
                let e = maps.energy()[i] as f64;
                sw += bw[i] as f64 * e;
                sh += bh[i] as f64 * e;
                se += e;
            }
            (sw / se, sh / se)
        };
        let cached = || -> Result<(f64, f64)> {
            let b = table
                .and_then(|t| t.get(&class_name))
                .ok_or_else(|| Error::MissingCacheEntry(class_name.clone()))?;
            Ok((b.width, b.height))
        };
        let (bw, bh) = match cfg.box_mode {
            BoxMode::Regressed => regressed(),
            BoxMode::Cached => cached()?,
            BoxMode::Hybrid => {
                let (rw, rh) = regressed();
                let (cw, ch) = cached()?;
                let off = |r: f64, c: f64| (r - c).abs() / c > cfg.hybrid_tolerance;
                if off(rw, cw) || off(rh, ch) {
                    (cw, ch)
                } else {
                    (rw, rh)
                }
            }
        };
        let (cx, cy) = m.centroid;
        out.push(Detection {
            class_name,
            bbox: BBox::from_center(cx, cy, bw, bh).clip(w as f64, h as f64),
            score: m.peak as f64,
        });
    }
    Ok(out)
}
