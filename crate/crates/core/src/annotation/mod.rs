//! Dataset object model: boxes, labels, pages and datasets.

mod document;
mod label;
mod rational;

use std::collections::BTreeSet;

pub use document::{dataset_from_json, dataset_to_json, load_dataset, save_dataset};
pub use label::{is_valid_class_name, parse_label, serialize_label, Label, Musical};
pub use rational::{ParseRationalError, Rational};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates (origin top-left, y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min > x_max || y_min > y_max {
            return Err(Error::Validation(format!(
                "invalid bbox [{x_min}, {y_min}, {x_max}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Box of size `w`×`h` centred on `(cx, cy)`. Negative sizes collapse to 0.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        let (hw, hh) = (w.max(0.0) / 2.0, h.max(0.0) / 2.0);
        Self {
            x_min: cx - hw,
            y_min: cy - hh,
            x_max: cx + hw,
            y_max: cy + hh,
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Intersection with `[0,width]×[0,height]`; empty boxes collapse onto the
    /// nearest edge.
    pub fn clip(&self, width: f64, height: f64) -> Self {
        let cx = |v: f64| v.clamp(0.0, width);
        let cy = |v: f64| v.clamp(0.0, height);
        Self {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }

    /// Coordinates rounded to the 1/1000 pixel grid used by the dataset
    /// document.
    pub fn quantized(&self) -> Self {
        let q = |v: f64| (v * 1000.0).round() / 1000.0;
        Self {
            x_min: q(self.x_min),
            y_min: q(self.y_min),
            x_max: q(self.x_max),
            y_max: q(self.y_max),
        }
    }
}

/// One labelled symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub label: Label,
    pub bbox: BBox,
}

impl Annotation {
    pub fn new(label: Label, bbox: BBox) -> Self {
        Self { label, bbox }
    }

    pub fn class_name(&self) -> &str {
        self.label.class_name()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub image: Option<String>,
    pub annotations: Vec<Annotation>,
}

impl Page {
    pub fn new(id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            id: id.into(),
            width,
            height,
            image: None,
            annotations: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation(format!(
                "page {:?}: dimensions must be positive, got {}x{}",
                self.id, self.width, self.height
            )));
        }
        for (i, a) in self.annotations.iter().enumerate() {
            if !a.bbox.within(self.width as f64, self.height as f64) {
                return Err(Error::Validation(format!(
                    "page {:?}: annotation {i} ({}) bbox {:?} lies outside {}x{}",
                    self.id,
                    a.label,
                    a.bbox.as_array(),
                    self.width,
                    self.height
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub class_registry: Vec<String>,
    pub pages: Vec<Page>,
}

impl Dataset {
    /// Builds and validates a dataset.
    pub fn new(class_registry: Vec<String>, pages: Vec<Page>) -> Result<Self> {
        let d = Self { class_registry, pages };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.class_registry {
            if !is_valid_class_name(c) {
                return Err(Error::Validation(format!(
                    "registry entry {c:?} is not a valid class name"
                )));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Validation(format!("registry lists {c:?} twice")));
            }
        }
        let mut ids = BTreeSet::new();
        for p in &self.pages {
            if !ids.insert(p.id.as_str()) {
                return Err(Error::Validation(format!("duplicate page id {:?}", p.id)));
            }
            p.validate()?;
            for a in &p.annotations {
                if !seen.contains(a.class_name()) {
                    return Err(Error::Validation(format!(
                        "page {:?}: class {:?} missing from the registry",
                        p.id,
                        a.class_name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn page(&self, id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.id == id)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_registry.iter().position(|c| c == name)
    }

    pub fn num_annotations(&self) -> usize {
        self.pages.iter().map(|p| p.annotations.len()).sum()
    }
}
