//! Scoring detections against ground truth, and learning detector
//! parameters from labeled corpora.
//!
//! Rates are date-level:
//!
//! * FAR = false accepts / detections
//! * FRR = false rejects / true dates
//! * efficiency = matches with the correct class / true dates
//!
//! Document-level counts are reported alongside.

use serde::{Deserialize, Serialize};

use crate::detector::{
    numeric_features, Detection, EcccWindow, Interval, NumericRangeConfig, WINDOW_LEN,
};
use crate::error::{Error, Result};
use crate::knn::{SeparatorLabel, SeparatorSample};
use crate::layout::{BBox, ConnComp};
use crate::synth::{DistractorKind, GroundTruth};
use crate::DateClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchOptions {
    pub iou_min: f64,
    /// Count known-failure truths (merged digits) as dates to find.
    pub include_expected_miss: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            iou_min: 0.5,
            include_expected_miss: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub detection: usize,
    pub truth: usize,
    pub iou: f64,
    pub class_correct: bool,
}

/// Per-document matching result. Indices refer to the detection slice and
/// to `GroundTruth::dates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub detections: usize,
    pub true_dates: usize,
    pub excluded_truths: usize,
    pub matches: Vec<MatchPair>,
    pub false_accepts: Vec<usize>,
    /// For each false accept, the kind of distractor it overlaps, if any.
    pub false_accept_sources: Vec<Option<DistractorKind>>,
    pub false_rejects: Vec<usize>,
}

/// Greedy one-to-one matching by descending IoU. A pair is eligible when
/// both sit on the same line and their IoU reaches `iou_min`. Equal IoUs
/// are resolved by truth index, then detection index.
pub fn match_detections(
    detections: &[Detection],
    truth: &GroundTruth,
    opts: &MatchOptions,
) -> Result<MatchOutcome> {
    if !(opts.iou_min > 0.0 && opts.iou_min <= 1.0) {
        return Err(Error::validation(format!(
            "iou_min must lie in (0, 1], got {}",
            opts.iou_min
        )));
    }
    let counted: Vec<usize> = truth
        .dates
        .iter()
        .enumerate()
        .filter(|(_, t)| opts.include_expected_miss || !t.expected_miss)
        .map(|(i, _)| i)
        .collect();

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for &ti in &counted {
        let t = &truth.dates[ti];
        for (di, d) in detections.iter().enumerate() {
            if d.line_index != t.line_index {
                continue;
            }
            let iou = d.region.iou(&t.region);
            if iou >= opts.iou_min {
                pairs.push((iou, ti, di));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut det_used = vec![false; detections.len()];
    let mut truth_used = vec![false; truth.dates.len()];
    let mut matches = Vec::new();
    for (iou, ti, di) in pairs {
        if det_used[di] || truth_used[ti] {
            continue;
        }
        det_used[di] = true;
        truth_used[ti] = true;
        matches.push(MatchPair {
            detection: di,
            truth: ti,
            iou,
            class_correct: detections[di].class == truth.dates[ti].class,
        });
    }
    matches.sort_by_key(|m| m.detection);

    let false_accepts: Vec<usize> = (0..detections.len()).filter(|&i| !det_used[i]).collect();
    let false_accept_sources = false_accepts
        .iter()
        .map(|&di| overlapping_distractor(&detections[di], truth, opts.iou_min))
        .collect();
    let false_rejects = counted
        .iter()
        .copied()
        .filter(|&ti| !truth_used[ti])
        .collect();
    Ok(MatchOutcome {
        detections: detections.len(),
        true_dates: counted.len(),
        excluded_truths: truth.dates.len() - counted.len(),
        matches,
        false_accepts,
        false_accept_sources,
        false_rejects,
    })
}

fn overlapping_distractor(
    d: &Detection,
    truth: &GroundTruth,
    iou_min: f64,
) -> Option<DistractorKind> {
    truth
        .distractors
        .iter()
        .filter(|x| x.line_index == d.line_index)
        .map(|x| (x.region.iou(&d.region), x.kind))
        .filter(|(iou, _)| *iou >= iou_min)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, kind)| kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    pub true_dates: usize,
    pub detections: usize,
    pub matches: usize,
    pub class_correct: usize,
    pub false_accepts: usize,
    pub false_rejects: usize,
    pub excluded_truths: usize,
    pub far_pct: f64,
    pub frr_pct: f64,
    pub efficiency_pct: f64,
    pub documents_with_false_accepts: usize,
    pub documents_with_false_rejects: usize,
    pub documents_fully_correct: usize,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn report(outcomes: &[MatchOutcome]) -> EvalReport {
    let sum = |f: &dyn Fn(&MatchOutcome) -> usize| outcomes.iter().map(f).sum::<usize>();
    let true_dates = sum(&|o| o.true_dates);
    let detections = sum(&|o| o.detections);
    let matches = sum(&|o| o.matches.len());
    let class_correct = sum(&|o| o.matches.iter().filter(|m| m.class_correct).count());
    let false_accepts = sum(&|o| o.false_accepts.len());
    let false_rejects = sum(&|o| o.false_rejects.len());
    EvalReport {
        documents: outcomes.len(),
        true_dates,
        detections,
        matches,
        class_correct,
        false_accepts,
        false_rejects,
        excluded_truths: sum(&|o| o.excluded_truths),
        far_pct: pct(false_accepts, detections),
        frr_pct: pct(false_rejects, true_dates),
        efficiency_pct: pct(class_correct, true_dates),
        documents_with_false_accepts: sum(&|o| (!o.false_accepts.is_empty()) as usize),
        documents_with_false_rejects: sum(&|o| (!o.false_rejects.is_empty()) as usize),
        documents_fully_correct: sum(&|o| {
            (o.false_accepts.is_empty()
                && o.false_rejects.is_empty()
                && o.matches.iter().all(|m| m.class_correct)) as usize
        }),
    }
}

impl EvalReport {
    /// Aligned text table: one results row plus date-level counts.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>16}  {:>8}  {:>8}  {:>14}\n",
            "No. of Documents", "FAR (%)", "FRR (%)", "Efficiency (%)"
        ));
        out.push_str(&format!(
            "{:>16}  {:>8.2}  {:>8.2}  {:>14.2}\n",
            self.documents, self.far_pct, self.frr_pct, self.efficiency_pct
        ));
        out.push_str(&format!(
            "dates: {} true, {} detected, {} matched ({} correct class), {} false accepts, {} false rejects, {} excluded\n",
            self.true_dates,
            self.detections,
            self.matches,
            self.class_correct,
            self.false_accepts,
            self.false_rejects,
            self.excluded_truths
        ));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationOptions {
    /// Fraction trimmed from each tail before taking min and max.
    pub quantile: f64,
    /// Multiplicative widening: `hi * margin`, `lo / margin`.
    pub margin: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            quantile: 0.01,
            margin: 1.05,
        }
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Learn the six digit-pair ranges from positive windows.
pub fn calibrate_ranges(
    windows: &[(EcccWindow, bool)],
    opts: &CalibrationOptions,
) -> Result<NumericRangeConfig> {
    if !(0.0..0.5).contains(&opts.quantile) {
        return Err(Error::validation(format!(
            "quantile must lie in [0, 0.5), got {}",
            opts.quantile
        )));
    }
    if !(opts.margin >= 1.0 && opts.margin.is_finite()) {
        return Err(Error::validation(format!(
            "margin must be >= 1, got {}",
            opts.margin
        )));
    }
    let features: Vec<[f64; 6]> = windows
        .iter()
        .filter(|(_, positive)| *positive)
        .filter_map(|(w, _)| numeric_features(w))
        .map(|f| f.values())
        .collect();
    if features.is_empty() {
        return Err(Error::validation(
            "calibration needs at least one positive window",
        ));
    }
    let intervals = std::array::from_fn(|k| {
        let mut column: Vec<f64> = features.iter().map(|f| f[k]).collect();
        column.sort_by(f64::total_cmp);
        Interval::new(
            quantile(&column, opts.quantile) / opts.margin,
            quantile(&column, 1.0 - opts.quantile) * opts.margin,
        )
    });
    Ok(NumericRangeConfig::from_intervals(intervals))
}

/// Windows built from annotated component boxes: planted dates are
/// positives, eight-mark distractors are negatives. Boxes are treated as
/// solid components; only their geometry is used.
pub fn windows_from_truth(truth: &GroundTruth) -> Vec<(EcccWindow, bool)> {
    let window = |boxes: &[BBox]| -> Option<EcccWindow> {
        if boxes.len() != WINDOW_LEN {
            return None;
        }
        EcccWindow::new(0, std::array::from_fn(|i| ConnComp::from_bbox(i, boxes[i])))
    };
    let positives = truth
        .dates
        .iter()
        .filter(|d| !d.expected_miss)
        .filter_map(|d| window(&d.component_boxes).map(|w| (w, true)));
    let negatives = truth
        .distractors
        .iter()
        .filter(|d| d.kind != DistractorKind::Word)
        .filter_map(|d| window(&d.component_boxes).map(|w| (w, false)));
    positives.chain(negatives).collect()
}

/// A dash or dot date with its eight component boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCandidate {
    pub component_boxes: Vec<BBox>,
    pub label: SeparatorLabel,
}

pub fn extract_knn_samples(cands: &[LabeledCandidate]) -> Result<Vec<SeparatorSample>> {
    cands
        .iter()
        .map(|c| {
            if c.component_boxes.len() != WINDOW_LEN {
                return Err(Error::validation(format!(
                    "candidate needs {WINDOW_LEN} component boxes, got {}",
                    c.component_boxes.len()
                )));
            }
            Ok(SeparatorSample {
                w3: c.component_boxes[2].width(),
                w6: c.component_boxes[5].width(),
                label: c.label,
            })
        })
        .collect()
}

/// Dash and dot truth dates of a page as labeled candidates.
pub fn labeled_separators(truth: &GroundTruth) -> Vec<LabeledCandidate> {
    truth
        .dates
        .iter()
        .filter(|d| !d.expected_miss)
        .filter_map(|d| {
            let label = match d.class {
                DateClass::Dash => SeparatorLabel::Dash,
                DateClass::Dot => SeparatorLabel::Dot,
                _ => return None,
            };
            Some(LabeledCandidate {
                component_boxes: d.component_boxes.clone(),
                label,
            })
        })
        .collect()
}
