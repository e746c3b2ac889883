//! Canonical JSON dataset document.
//!
//! ```json
//! {"class_registry": [...],
//!  "pages": [{"annotations": [{"bbox": [x0, y0, x1, y1], "label": "..."}],
//!             "height": 0, "id": "...", "image": "...", "width": 0}]}
//! ```
//!
//! Keys are emitted in lexicographic order and box coordinates are rounded to
//! three fractional digits, so equal datasets serialize to equal bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_label, Annotation, BBox, Dataset, Page};
use crate::error::{Error, Result};
use crate::fsutil;

// Field order below is the serialized key order; keep it alphabetical.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDoc {
    class_registry: Vec<String>,
    pages: Vec<PageDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PageDoc {
    annotations: Vec<AnnotationDoc>,
    height: u32,
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<String>,
    width: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationDoc {
    bbox: [f64; 4],
    label: String,
}

fn canonical_coord(v: f64) -> f64 {
    // adding 0.0 turns -0.0 into 0.0
    (v * 1000.0).round() / 1000.0 + 0.0
}

fn to_doc(d: &Dataset) -> DatasetDoc {
    DatasetDoc {
        class_registry: d.class_registry.clone(),
        pages: d
            .pages
            .iter()
            .map(|p| PageDoc {
                annotations: p
                    .annotations
                    .iter()
                    .map(|a| AnnotationDoc {
                        bbox: a.bbox.as_array().map(canonical_coord),
                        label: a.label.to_string(),
                    })
                    .collect(),
                height: p.height,
                id: p.id.clone(),
                image: p.image.clone(),
                width: p.width,
            })
            .collect(),
    }
}

fn from_doc(doc: DatasetDoc) -> Result<Dataset> {
    let mut pages = Vec::with_capacity(doc.pages.len());
    for p in doc.pages {
        let mut annotations = Vec::with_capacity(p.annotations.len());
        for (i, a) in p.annotations.into_iter().enumerate() {
            let label = parse_label(&a.label)
                .map_err(|e| Error::Validation(format!("page {:?}: annotation {i}: {e}", p.id)))?;
            let [x0, y0, x1, y1] = a.bbox;
            let bbox = BBox::new(x0, y0, x1, y1)
                .map_err(|e| Error::Validation(format!("page {:?}: annotation {i}: {e}", p.id)))?;
            annotations.push(Annotation::new(label, bbox));
        }
        pages.push(Page {
            id: p.id,
            width: p.width,
            height: p.height,
            image: p.image,
            annotations,
        });
    }
    Dataset::new(doc.class_registry, pages)
}

/// Canonical document bytes (pretty-printed, trailing newline).
pub fn dataset_to_json(d: &Dataset) -> Result<String> {
    d.validate()?;
    let mut s =
        serde_json::to_string_pretty(&to_doc(d)).map_err(|e| Error::Schema(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    let doc: DatasetDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    from_doc(doc)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fsutil::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Schema(format!("{}: not UTF-8: {e}", path.display())))?;
    dataset_from_json(text).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Validates, then writes the canonical document atomically.
pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let text = dataset_to_json(d)?;
    fsutil::write_atomic(path, text.as_bytes())
}
