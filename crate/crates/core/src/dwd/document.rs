//! Detections document:
//! `{"pages": [{"detections": [{"bbox": [...], "class": "...", "score": s}], "id": "..."}]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::annotation::{is_valid_class_name, BBox};
use crate::error::{Error, Result};
use crate::fsutil;

/// Detections of one page.
#[derive(Debug, Clone, PartialEq)]
pub struct PageDetections {
    pub id: String,
    pub detections: Vec<Detection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    pages: Vec<PageDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PageDoc {
    detections: Vec<DetDoc>,
    id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetDoc {
    bbox: [f64; 4],
    class: String,
    score: f64,
}

fn coord(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0 + 0.0
}

pub fn detections_to_json(pages: &[PageDetections]) -> String {
    let doc = Doc {
        pages: pages
            .iter()
            .map(|p| PageDoc {
                detections: p
                    .detections
                    .iter()
                    .map(|d| DetDoc {
                        bbox: d.bbox.as_array().map(coord),
                        class: d.class_name.clone(),
                        score: d.score,
                    })
                    .collect(),
                id: p.id.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn detections_from_json(text: &str) -> Result<Vec<PageDetections>> {
    let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    doc.pages
        .into_iter()
        .map(|p| {
            let detections = p
                .detections
                .into_iter()
                .map(|d| {
                    if !is_valid_class_name(&d.class) {
                        return Err(Error::Validation(format!("invalid class name {:?}", d.class)));
                    }
                    let [x0, y0, x1, y1] = d.bbox;
                    Ok(Detection {
                        class_name: d.class,
                        bbox: BBox::new(x0, y0, x1, y1)?,
                        score: d.score,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(PageDetections { id: p.id, detections })
        })
        .collect()
}

pub fn load_detections(path: &Path) -> Result<Vec<PageDetections>> {
    let bytes = fsutil::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    detections_from_json(text)
}

pub fn save_detections(pages: &[PageDetections], path: &Path) -> Result<()> {
    fsutil::write_atomic(path, detections_to_json(pages).as_bytes())
}
