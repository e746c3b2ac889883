//! Detection scoring: IoU, greedy matching, per-class AP and macro mAP.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{Annotation, BBox};
use crate::dwd::Detection;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Indices of `scores` in descending order; equal scores keep input order.
fn by_descending_score(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy matching on one image. Detections are visited by descending score;
/// each takes the unmatched same-class ground-truth box of highest IoU at or
/// above the threshold. Returns a true-positive flag per detection, in input
/// order.
pub fn match_detections(dets: &[Detection], gts: &[Annotation], iou_threshold: f64) -> Vec<bool> {
    greedy_match(dets, gts, iou_threshold, true)
        .into_iter()
        .map(|m| m.is_some())
        .collect()
}

/// Like [`match_detections`] but returns the matched ground-truth index;
/// `same_class = false` ignores classes.
pub fn greedy_match(
    dets: &[Detection],
    gts: &[Annotation],
    iou_threshold: f64,
    same_class: bool,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; gts.len()];
    let mut out = vec![None; dets.len()];
    for di in by_descending_score(dets.iter().map(|d| d.score)) {
        let d = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if taken[gi] || (same_class && g.class_name() != d.class_name) {
                continue;
            }
            let v = iou(&d.bbox, &g.bbox);
            if v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            out[di] = Some(gi);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub ap: f64,
    pub fp: usize,
    pub num_det: usize,
    pub num_gt: usize,
    pub tp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub iou_threshold: f64,
    /// Mean AP over classes with at least one ground-truth box.
    pub map_macro: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub per_class: BTreeMap<String, ClassEval>,
}

/// Detections and ground truth of one image.
#[derive(Debug, Clone, Copy)]
pub struct EvalImage<'a> {
    pub detections: &'a [Detection],
    pub ground_truth: &'a [Annotation],
}

/// All-point interpolated AP from TP flags already sorted by descending
/// score.
pub fn average_precision(sorted_tp: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 || sorted_tp.is_empty() {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(sorted_tp.len());
    for (i, &hit) in sorted_tp.iter().enumerate() {
        if hit {
            tp += 1;
        }
        points.push((tp as f64 / num_gt as f64, tp as f64 / (i + 1) as f64));
    }
    let mut envelope = 0.0f64;
    for p in points.iter_mut().rev() {
        envelope = envelope.max(p.1);
        p.1 = envelope;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in points {
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap.clamp(0.0, 1.0)
}

pub fn evaluate(images: &[EvalImage<'_>], iou_threshold: f64) -> EvalResult {
    // class -> (score, tp) in image order, then detection order
    let mut hits: BTreeMap<String, Vec<(f64, bool)>> = BTreeMap::new();
    let mut num_gt: BTreeMap<String, usize> = BTreeMap::new();
    for img in images {
        for g in img.ground_truth {
            *num_gt.entry(g.class_name().to_string()).or_default() += 1;
        }
        let flags = match_detections(img.detections, img.ground_truth, iou_threshold);
        for (d, tp) in img.detections.iter().zip(flags) {
            hits.entry(d.class_name.clone()).or_default().push((d.score, tp));
        }
    }
    let mut classes: Vec<String> = num_gt.keys().chain(hits.keys()).cloned().collect();
    classes.sort();
    classes.dedup();

    let mut per_class = BTreeMap::new();
    let (mut tp_all, mut det_all, mut gt_all) = (0usize, 0usize, 0usize);
    for c in classes {
        let list = hits.remove(&c).unwrap_or_default();
        let order = by_descending_score(list.iter().map(|h| h.0));
        let sorted: Vec<bool> = order.iter().map(|&i| list[i].1).collect();
        let n_gt = num_gt.get(&c).copied().unwrap_or(0);
        let tp = sorted.iter().filter(|&&t| t).count();
        tp_all += tp;
        det_all += sorted.len();
        gt_all += n_gt;
        per_class.insert(
            c,
            ClassEval {
                ap: average_precision(&sorted, n_gt),
                fp: sorted.len() - tp,
                num_det: sorted.len(),
                num_gt: n_gt,
                tp,
            },
        );
    }
    let with_gt: Vec<f64> = per_class.values().filter(|c| c.num_gt > 0).map(|c| c.ap).collect();
    let map_macro = if with_gt.is_empty() {
        0.0
    } else {
        with_gt.iter().sum::<f64>() / with_gt.len() as f64
    };
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    EvalResult {
        iou_threshold,
        map_macro,
        micro_precision: ratio(tp_all, det_all),
        micro_recall: ratio(tp_all, gt_all),
        per_class,
    }
}

pub fn evaluate_single(dets: &[Detection], gts: &[Annotation], iou_threshold: f64) -> EvalResult {
    evaluate(
        &[EvalImage {
            detections: dets,
            ground_truth: gts,
        }],
        iou_threshold,
    )
}

impl EvalResult {
    /// Fixed-width text table, one row per class plus a summary line.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<24} {:>7} {:>7} {:>6} {:>6} {:>8}\n",
            "class", "num_gt", "num_det", "tp", "fp", "AP"
        );
        for (c, e) in &self.per_class {
            s.push_str(&format!(
                "{:<24} {:>7} {:>7} {:>6} {:>6} {:>8.4}\n",
                c, e.num_gt, e.num_det, e.tp, e.fp, e.ap
            ));
        }
        s.push_str(&format!(
            "mAP(macro)@{:.2} = {:.4}  micro precision = {:.4}  micro recall = {:.4}\n",
            self.iou_threshold, self.map_macro, self.micro_precision, self.micro_recall
        ));
        s
    }
}
