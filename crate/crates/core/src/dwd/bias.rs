//! Size-bias diagnostic: does the detector inflate small boxes and shrink
//! large ones?

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::annotation::Annotation;
use crate::error::{Error, Result};
use crate::eval::{greedy_match, EvalImage};

/// IoU needed for a detection to be paired with a ground-truth box.
pub const BIAS_MATCH_IOU: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasBin {
    pub count: usize,
    /// Range of √(ground-truth area) covered by the bin.
    pub max_sqrt_area: f64,
    /// Mean of `(area_det − area_gt) / area_gt`.
    pub mean_rel_area_error: f64,
    pub min_sqrt_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Ordered from the smallest to the largest ground-truth boxes.
    pub bins: Vec<BiasBin>,
    pub matched: usize,
    pub unmatched_detections: usize,
    pub unmatched_ground_truth: usize,
}

pub fn size_bias_report(dets: &[Detection], gts: &[Annotation], bins: usize) -> Result<BiasReport> {
    size_bias_report_pages(
        &[EvalImage {
            detections: dets,
            ground_truth: gts,
        }],
        bins,
    )
}

/// Pairs detections with ground truth (greedy by score, class-agnostic, IoU ≥
/// [`BIAS_MATCH_IOU`]), splits the pairs into `bins` equal-population bins by
/// √(ground-truth area) and reports the mean signed relative area error per
/// bin. With fewer pairs than bins, each pair gets its own bin.
pub fn size_bias_report_pages(images: &[EvalImage<'_>], bins: usize) -> Result<BiasReport> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new(); // (sqrt gt area, rel error)
    let (mut n_det, mut n_gt) = (0usize, 0usize);
    for img in images {
        n_det += img.detections.len();
        n_gt += img.ground_truth.len();
        let m = greedy_match(img.detections, img.ground_truth, BIAS_MATCH_IOU, false);
        for (d, gi) in img.detections.iter().zip(m) {
            if let Some(gi) = gi {
                let ga = img.ground_truth[gi].bbox.area();
                pairs.push((ga.sqrt(), (d.bbox.area() - ga) / ga));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoMatches);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let bins = bins.min(n);
    let out = (0..bins)
        .map(|b| {
            let chunk = &pairs[b * n / bins..(b + 1) * n / bins];
            BiasBin {
                count: chunk.len(),
                max_sqrt_area: chunk.last().unwrap().0,
                mean_rel_area_error: chunk.iter().map(|p| p.1).sum::<f64>() / chunk.len() as f64,
                min_sqrt_area: chunk[0].0,
            }
        })
        .collect();
    Ok(BiasReport {
        bins: out,
        matched: n,
        unmatched_detections: n_det - n,
        unmatched_ground_truth: n_gt - n,
    })
}

impl BiasReport {
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:>4} {:>6} {:>10} {:>10} {:>12}\n",
            "bin", "count", "min_sqrtA", "max_sqrtA", "mean_rel_err"
        );
        for (i, b) in self.bins.iter().enumerate() {
            s.push_str(&format!(
                "{:>4} {:>6} {:>10.3} {:>10.3} {:>+12.4}\n",
                i, b.count, b.min_sqrt_area, b.max_sqrt_area, b.mean_rel_area_error
            ));
        }
        s.push_str(&format!(
            "matched = {}  unmatched detections = {}  unmatched ground truth = {}\n",
            self.matched, self.unmatched_detections, self.unmatched_ground_truth
        ));
        s
    }
}
