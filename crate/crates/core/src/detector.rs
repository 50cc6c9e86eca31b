//! Date-field detection over windows of eight consecutive components.
//!
//! A numerical date `DD?MM?YY` is eight marks: six digits and two
//! separators at window positions 3 and 6 (1-based). Each window of eight
//! consecutive components on a line goes through four tests, in order:
//!
//! 1. ordering: `x_min` strictly increasing across the window,
//! 2. spacing: no gap wider than `spacing_multiplier * w_max`,
//! 3. digit pairs: height and vertical-center ratios of the pairs
//!    (1,2), (4,5), (7,8) fall inside learned ranges,
//! 4. separator layout: either the digits nest inside tall separators
//!    (slash) or the separators nest inside their digits (dash or dot).
//!
//! All tests are conjunctive, so their order only matters for speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{extract_lines, BBox, ConnComp, LayoutParams, TextLine};
use crate::raster::BinaryImage;

pub const WINDOW_LEN: usize = 8;
pub const DEFAULT_SPACING_MULTIPLIER: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Accepted ranges for the six digit-pair ratios.
///
/// `f1`, `f3`, `f5` are height ratios; `f2`, `f4`, `f6` are ratios of
/// vertical bbox centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericRangeConfig {
    pub f1: Interval,
    pub f2: Interval,
    pub f3: Interval,
    pub f4: Interval,
    pub f5: Interval,
    pub f6: Interval,
}

impl Default for NumericRangeConfig {
    fn default() -> Self {
        let height = Interval::new(0.5, 2.0);
        let center = Interval::new(0.9, 1.1);
        Self::from_intervals([height, center, height, center, height, center])
    }
}

impl NumericRangeConfig {
    pub fn from_intervals(iv: [Interval; 6]) -> Self {
        Self {
            f1: iv[0],
            f2: iv[1],
            f3: iv[2],
            f4: iv[3],
            f5: iv[4],
            f6: iv[5],
        }
    }

    pub fn intervals(&self) -> [Interval; 6] {
        [self.f1, self.f2, self.f3, self.f4, self.f5, self.f6]
    }

    pub fn validate(&self) -> Result<()> {
        for (k, iv) in self.intervals().iter().enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo > 0.0 && iv.lo <= iv.hi) {
                return Err(Error::validation(format!(
                    "range f{} = [{}, {}] must satisfy 0 < lo <= hi",
                    k + 1,
                    iv.lo,
                    iv.hi
                )));
            }
        }
        Ok(())
    }
}

/// Everything the detector needs besides the image. This is also the JSON
/// config-file schema; missing fields take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub ranges: NumericRangeConfig,
    pub spacing_multiplier: f64,
    pub layout: LayoutParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            ranges: NumericRangeConfig::default(),
            spacing_multiplier: DEFAULT_SPACING_MULTIPLIER,
            layout: LayoutParams::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        if !(self.spacing_multiplier.is_finite() && self.spacing_multiplier > 0.0) {
            return Err(Error::validation(format!(
                "spacing_multiplier must be positive, got {}",
                self.spacing_multiplier
            )));
        }
        if self.layout.min_gap == 0 || self.layout.min_ink == 0 {
            return Err(Error::validation("min_gap and min_ink must be at least 1"));
        }
        Ok(())
    }
}

/// Eight consecutive components of one line with strictly increasing `x_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct EcccWindow {
    /// Index of the first component within its line.
    pub start: usize,
    pub comps: [ConnComp; WINDOW_LEN],
    pub w_max: u32,
    /// Whitespace between consecutive bounding boxes; 0 when they overlap.
    pub gaps: [u32; WINDOW_LEN - 1],
}

impl EcccWindow {
    /// `None` when the ordering condition fails.
    pub fn new(start: usize, comps: [ConnComp; WINDOW_LEN]) -> Option<Self> {
        if comps.windows(2).any(|p| p[1].bbox.x_min <= p[0].bbox.x_min) {
            return None;
        }
        let w_max = comps
            .iter()
            .map(ConnComp::width)
            .max()
            .expect("eight components");
        let gaps = std::array::from_fn(|i| {
            (comps[i + 1].bbox.x_min as i64 - comps[i].bbox.x_max as i64 - 1).max(0) as u32
        });
        Some(Self {
            start,
            comps,
            w_max,
            gaps,
        })
    }

    /// Component at 1-based position `pos`, matching the C_1..C_8 naming.
    fn c(&self, pos: usize) -> &BBox {
        &self.comps[pos - 1].bbox
    }

    pub fn boxes(&self) -> [BBox; WINDOW_LEN] {
        self.comps.map(|c| c.bbox)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericFeatures {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    pub f5: f64,
    pub f6: f64,
}

impl NumericFeatures {
    pub fn values(&self) -> [f64; 6] {
        [self.f1, self.f2, self.f3, self.f4, self.f5, self.f6]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutClass {
    Slash,
    DashOrDot,
    NonDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateClass {
    Slash,
    Dash,
    Dot,
    /// Dash or dot, not yet split by the separator classifier.
    Unrefined,
}

impl std::fmt::Display for DateClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DateClass::Slash => "DD/MM/YY",
            DateClass::Dash => "DD-MM-YY",
            DateClass::Dot => "DD.MM.YY",
            DateClass::Unrefined => "DD-MM-YY|DD.MM.YY",
        })
    }
}

/// A registered date region.
#[derive(Debug, Clone, PartialEq)]
pub struct DateCandidate {
    pub line_index: usize,
    pub window: EcccWindow,
    pub layout_class: LayoutClass,
    pub final_class: DateClass,
    pub features: NumericFeatures,
    pub region: BBox,
}

impl DateCandidate {
    pub fn to_detection(&self) -> Detection {
        Detection {
            line_index: self.line_index,
            class: self.final_class,
            region: self.region,
            features: self.features,
            component_boxes: self.window.boxes().to_vec(),
        }
    }
}

/// Serialized form of a candidate, one element of a detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub line_index: usize,
    pub class: DateClass,
    pub region: BBox,
    pub features: NumericFeatures,
    pub component_boxes: Vec<BBox>,
}

/// Every run of eight consecutive components that passes the ordering
/// condition, sliding by one.
pub fn form_windows(line: &TextLine) -> Vec<EcccWindow> {
    line.components
        .windows(WINDOW_LEN)
        .enumerate()
        .filter_map(|(start, run)| {
            EcccWindow::new(start, run.try_into().expect("slice of window length"))
        })
        .collect()
}

/// True iff no gap exceeds `multiplier * w_max`; equality is accepted.
pub fn check_spacing(w: &EcccWindow, multiplier: f64) -> bool {
    let limit = multiplier * w.w_max as f64;
    w.gaps.iter().all(|&g| g as f64 <= limit)
}

/// Ratios of heights and vertical centers for the digit pairs (1,2), (4,5),
/// (7,8). `None` when a denominator center is 0, i.e. a component sits
/// entirely on the first image row.
pub fn numeric_features(w: &EcccWindow) -> Option<NumericFeatures> {
    let pair = |a: usize, b: usize| {
        let (first, second) = (&w.comps[a - 1], &w.comps[b - 1]);
        let h = second.height() as f64 / first.height() as f64;
        (first.centroid_y() > 0.0).then(|| (h, second.centroid_y() / first.centroid_y()))
    };
    let (f1, f2) = pair(1, 2)?;
    let (f3, f4) = pair(4, 5)?;
    let (f5, f6) = pair(7, 8)?;
    Some(NumericFeatures {
        f1,
        f2,
        f3,
        f4,
        f5,
        f6,
    })
}

pub fn verify_numeric(w: &EcccWindow, cfg: &NumericRangeConfig) -> (bool, Option<NumericFeatures>) {
    match numeric_features(w) {
        Some(f) => {
            let ok = f
                .values()
                .iter()
                .zip(cfg.intervals())
                .all(|(&v, iv)| iv.contains(v));
            (ok, Some(f))
        }
        None => (false, None),
    }
}

/// `inner`'s vertical extent lies within `outer`'s (both ends inclusive).
fn nested(inner: &BBox, outer: &BBox) -> bool {
    let within = |v: u32| outer.y_min <= v && v <= outer.y_max;
    within(inner.y_min) && within(inner.y_max)
}

/// Separator layout from vertical extents of C_2..C_7.
///
/// Slash: C_2, C_4 nest inside C_3 and C_5, C_7 inside C_6. Dash or dot:
/// C_3 nests inside both C_2 and C_4, C_6 inside both C_5 and C_7. Both
/// hold only when C_2..C_7 share one vertical extent; that case is
/// reported as dash-or-dot.
pub fn classify_separator_layout(w: &EcccWindow) -> LayoutClass {
    let dash_or_dot = nested(w.c(3), w.c(2))
        && nested(w.c(3), w.c(4))
        && nested(w.c(6), w.c(5))
        && nested(w.c(6), w.c(7));
    if dash_or_dot {
        return LayoutClass::DashOrDot;
    }
    let slash = nested(w.c(2), w.c(3))
        && nested(w.c(4), w.c(3))
        && nested(w.c(5), w.c(6))
        && nested(w.c(7), w.c(6));
    if slash {
        LayoutClass::Slash
    } else {
        LayoutClass::NonDate
    }
}

/// Union of all eight bounding boxes. The separator can be the vertical
/// extremum, so the two end components alone do not bound the date.
pub fn register_date(w: &EcccWindow) -> BBox {
    w.comps
        .iter()
        .skip(1)
        .fold(w.comps[0].bbox, |acc, c| acc.union(&c.bbox))
}

/// A window that passed every stage, before overlap suppression.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedWindow {
    pub window: EcccWindow,
    pub layout_class: LayoutClass,
    pub features: NumericFeatures,
}

/// Evaluate one window through spacing, digit-pair and layout stages.
pub fn evaluate_window(
    w: &EcccWindow,
    cfg: &DetectorConfig,
) -> Option<(LayoutClass, NumericFeatures)> {
    if !check_spacing(w, cfg.spacing_multiplier) {
        return None;
    }
    let (ok, features) = verify_numeric(w, &cfg.ranges);
    if !ok {
        return None;
    }
    match classify_separator_layout(w) {
        LayoutClass::NonDate => None,
        class => Some((class, features.expect("verified features exist"))),
    }
}

pub fn accepted_windows(line: &TextLine, cfg: &DetectorConfig) -> Vec<AcceptedWindow> {
    form_windows(line)
        .into_iter()
        .filter_map(|window| {
            evaluate_window(&window, cfg).map(|(layout_class, features)| AcceptedWindow {
                window,
                layout_class,
                features,
            })
        })
        .collect()
}

/// Scan one line. Of accepted windows sharing components, only the
/// leftmost survives: any window starting within seven components of a
/// kept one is dropped.
pub fn scan_line(line: &TextLine, line_index: usize, cfg: &DetectorConfig) -> Vec<DateCandidate> {
    let mut out: Vec<DateCandidate> = Vec::new();
    for acc in accepted_windows(line, cfg) {
        if let Some(last) = out.last() {
            if acc.window.start < last.window.start + WINDOW_LEN {
                continue;
            }
        }
        let final_class = match acc.layout_class {
            LayoutClass::Slash => DateClass::Slash,
            _ => DateClass::Unrefined,
        };
        out.push(DateCandidate {
            line_index,
            region: register_date(&acc.window),
            window: acc.window,
            layout_class: acc.layout_class,
            final_class,
            features: acc.features,
        });
    }
    out
}

pub fn scan_lines(lines: &[TextLine], cfg: &DetectorConfig) -> Vec<DateCandidate> {
    lines
        .iter()
        .enumerate()
        .flat_map(|(i, line)| scan_line(line, i, cfg))
        .collect()
}

/// Segment the page into lines and scan each, top to bottom.
pub fn scan_document(img: &BinaryImage, cfg: &DetectorConfig) -> Result<Vec<DateCandidate>> {
    cfg.validate()?;
    let lines = extract_lines(img, &cfg.layout);
    Ok(scan_lines(&lines, cfg))
}
