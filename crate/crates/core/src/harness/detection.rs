//! Detection quality: IoU matching, precision, recall and all-points AP.

use serde::{Deserialize, Serialize};

/// Axis-aligned box, `(x1, y1)` top-left and `(x2, y2)` bottom-right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEval {
    pub predictions: Vec<Prediction>,
    pub ground_truth: Vec<BBox>,
    #[serde(default = "default_iou")]
    pub iou_threshold: f64,
}

fn default_iou() -> f64 {
    0.5
}

impl DetectionEval {
    pub fn new(predictions: Vec<Prediction>, ground_truth: Vec<BBox>) -> Self {
        Self { predictions, ground_truth, iou_threshold: default_iou() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(p) = self.predictions.iter().find(|p| !(0.0..=1.0).contains(&p.confidence)) {
            return Err(format!("confidence {} outside [0, 1]", p.confidence));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(format!("iou_threshold {} outside [0, 1]", self.iou_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Greedy matching in descending confidence (ties keep input order). Each
/// prediction takes the unmatched ground truth with the highest IoU at or
/// above the threshold. Empty prediction sets score precision 0, and empty
/// ground truth scores recall 0 and AP 0.
pub fn detection_metrics(e: &DetectionEval) -> DetectionMetrics {
    let mut order: Vec<usize> = (0..e.predictions.len()).collect();
    order.sort_by(|&a, &b| e.predictions[b].confidence.total_cmp(&e.predictions[a].confidence));
    let mut matched = vec![false; e.ground_truth.len()];
    let n_gt = e.ground_truth.len();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve = Vec::with_capacity(order.len());
    for &i in &order {
        let pb = &e.predictions[i].bbox;
        let best = e
            .ground_truth
            .iter()
            .enumerate()
            .filter(|(g, _)| !matched[*g])
            .map(|(g, gt)| (g, pb.iou(gt)))
            .filter(|(_, iou)| *iou >= e.iou_threshold)
            .fold(None::<(usize, f64)>, |acc, cand| match acc {
                Some((_, best)) if best >= cand.1 => acc,
                _ => Some(cand),
            });
        match best {
            Some((g, _)) => {
                matched[g] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
        curve.push((recall, precision));
    }
    let precision = if order.is_empty() { 0.0 } else { tp as f64 / order.len() as f64 };
    let recall = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
    DetectionMetrics { ap: all_points_ap(&curve), precision, recall }
}

/// Area under the precision envelope `p(r) = max_{r' ≥ r} precision(r')`.
pub fn all_points_ap(curve: &[(f64, f64)]) -> f64 {
    let mut envelope = vec![0.0; curve.len()];
    let mut running = 0.0f64;
    for (k, &(_, p)) in curve.iter().enumerate().rev() {
        running = running.max(p);
        envelope[k] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (k, &(r, _)) in curve.iter().enumerate() {
        ap += (r - prev_recall) * envelope[k];
        prev_recall = r;
    }
    ap
}
