//! Tooling for optical music recognition datasets and detectors.
//!
//! The crate covers the data side of an OMR detection pipeline:
//!
//! * [`annotation`]: the dataset object model, the extended
//!   `classname.onset.relativecoordinate.duration` label grammar and the
//!   canonical JSON dataset document.
//! * [`imbalance`]: class histograms, top-k coverage and rare-class selection.
//! * [`augment`]: a crop bank of rare symbols pasted into the top margin of
//!   pages to oversample rare classes.
//! * [`dwd`]: post-processing of watershed-detector style output maps
//!   (energy, class scores, box sizes) into detections, including cached
//!   per-class boxes and a size-bias diagnostic.
//! * [`align`]: rigid realignment of scanned pages and annotation transfer.
//! * [`synth`]: synthetic score pages, oracle output maps and scan
//!   degradations, so every stage can be checked without a trained network.
//! * [`eval`]: IoU, greedy matching and macro mAP.

pub mod align;
pub mod annotation;
pub mod augment;
pub mod dwd;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod image;
pub mod imbalance;
pub mod synth;

pub use error::{Error, Result};
