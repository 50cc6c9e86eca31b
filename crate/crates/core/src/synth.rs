//! Deterministic synthetic pages with exact ground truth.
//!
//! Glyphs are solid rectangles: the detector only ever sees bounding-box
//! geometry, so glyph shapes would add nothing it could observe. A page is
//! a stack of text lines; each line is a left-to-right sequence of groups
//! (distractor words, planted dates, stressors) separated by gaps wider
//! than the spacing limit of any window that could straddle two groups.
//! Distractor words have at most seven letters, so on a clean page the
//! only windows that survive the spacing test are the planted dates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{
    classify_separator_layout, evaluate_window, DateClass, DetectorConfig, EcccWindow, LayoutClass,
    DEFAULT_SPACING_MULTIPLIER, WINDOW_LEN,
};
use crate::error::{Error, Result};
use crate::layout::{BBox, ConnComp};
use crate::raster::BinaryImage;

/// Inclusive integer range `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub lo: u32,
    pub hi: u32,
}

impl Span {
    pub const fn new(lo: u32, hi: u32) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        rng.gen_range(self.lo..=self.hi)
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.lo == 0 || self.lo > self.hi {
            return Err(Error::validation(format!(
                "{name} range [{}, {}] must be non-empty and start at 1 or more",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMix {
    pub slash: f64,
    pub dash: f64,
    pub dot: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        Self {
            slash: 1.0 / 3.0,
            dash: 1.0 / 3.0,
            dot: 1.0 / 3.0,
        }
    }
}

impl ClassMix {
    fn sample(&self, rng: &mut impl Rng) -> DateClass {
        let r: f64 = rng.gen::<f64>() * (self.slash + self.dash + self.dot);
        if r < self.slash {
            DateClass::Slash
        } else if r < self.slash + self.dash {
            DateClass::Dash
        } else {
            DateClass::Dot
        }
    }
}

/// Per-page stressor counts; zero disables a stressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stressors {
    /// Dates whose first two digits touch and merge into one component.
    pub double_digits: usize,
    /// Eight-mark sequences shaped like dates.
    pub date_like_text: usize,
    /// Fraction of `date_like_text` that passes every detector stage; the
    /// rest break both separator-nesting systems.
    pub date_like_false_accept_fraction: f64,
    /// Salt specks of 1 to 3 pixels, below the default noise threshold.
    pub specks: usize,
}

impl Default for Stressors {
    fn default() -> Self {
        Self {
            double_digits: 0,
            date_like_text: 0,
            date_like_false_accept_fraction: 0.0,
            specks: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub page_width: u32,
    pub page_height: u32,
    pub margin: u32,
    pub lines: usize,
    pub dates_per_page: usize,
    pub class_mix: ClassMix,
    pub digit_height: Span,
    pub digit_width: Span,
    /// Maximum vertical wobble of each digit inside its date's band.
    pub baseline_jitter: u32,
    /// Horizontal whitespace between marks of one word or date.
    pub mark_gap: Span,
    /// Slash height relative to the digit band; must exceed 1.
    pub slash_height_factor: f64,
    pub slash_width: Span,
    pub dash_width: Span,
    pub dash_thickness: Span,
    pub dot_size: Span,
    /// Target fraction of each line's width filled by words and dates.
    pub distractor_density: f64,
    pub stressors: Stressors,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            page_width: 1000,
            page_height: 800,
            margin: 60,
            lines: 8,
            dates_per_page: 2,
            class_mix: ClassMix::default(),
            digit_height: Span::new(26, 34),
            digit_width: Span::new(11, 18),
            baseline_jitter: 2,
            mark_gap: Span::new(3, 8),
            slash_height_factor: 1.4,
            slash_width: Span::new(5, 9),
            dash_width: Span::new(15, 22),
            dash_thickness: Span::new(3, 5),
            dot_size: Span::new(3, 5),
            distractor_density: 0.7,
            stressors: Stressors::default(),
        }
    }
}

impl SynthSpec {
    fn line_pitch(&self) -> u32 {
        (self.page_height - 2 * self.margin) / self.lines.max(1) as u32
    }

    /// Tallest extent a line can need: slash overhang plus descenders.
    fn max_line_extent(&self) -> u32 {
        let band = self.digit_height.hi;
        let slash = (band as f64 * self.slash_height_factor).ceil() as u32;
        slash.max(band + band / 2) + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.page_width == 0 || self.page_height == 0 {
            return Err(Error::validation("page dimensions must be positive"));
        }
        if self.lines == 0 {
            return Err(Error::validation("a page needs at least one line"));
        }
        if 2 * self.margin >= self.page_width || 2 * self.margin >= self.page_height {
            return Err(Error::validation("margins leave no room on the page"));
        }
        let mix = [
            self.class_mix.slash,
            self.class_mix.dash,
            self.class_mix.dot,
        ];
        if mix.iter().any(|&p| !(0.0..=1.0).contains(&p))
            || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-6
        {
            return Err(Error::validation(
                "class_mix proportions must be in [0,1] and sum to 1",
            ));
        }
        for (name, span) in [
            ("digit_height", self.digit_height),
            ("digit_width", self.digit_width),
            ("mark_gap", self.mark_gap),
            ("slash_width", self.slash_width),
            ("dash_width", self.dash_width),
            ("dash_thickness", self.dash_thickness),
            ("dot_size", self.dot_size),
        ] {
            span.check(name)?;
        }
        if self.mark_gap.lo < 2 {
            return Err(Error::validation(
                "mark_gap must be at least 2 so marks stay separate",
            ));
        }
        if self.mark_gap.hi as f64 > 1.5 * self.digit_width.lo as f64 {
            return Err(Error::validation(
                "mark_gap upper bound must not exceed 1.5x the narrowest digit",
            ));
        }
        if !(self.slash_height_factor > 1.0 && self.slash_height_factor.is_finite()) {
            return Err(Error::validation("slash_height_factor must exceed 1"));
        }
        let core = self
            .digit_height
            .lo
            .saturating_sub(2 * self.baseline_jitter);
        if core < self.dash_thickness.hi + 2 || core < self.dot_size.hi + 2 {
            return Err(Error::validation(
                "digit height minus jitter must leave room for dash and dot separators",
            ));
        }
        if self.line_pitch() < self.max_line_extent() + 8 {
            return Err(Error::validation(format!(
                "{} lines of height {} do not fit a {}-pixel page",
                self.lines,
                self.max_line_extent(),
                self.page_height
            )));
        }
        if !(0.0..=1.0).contains(&self.distractor_density)
            || !(0.0..=1.0).contains(&self.stressors.date_like_false_accept_fraction)
        {
            return Err(Error::validation(
                "density and fractions must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDate {
    pub line_index: usize,
    pub class: DateClass,
    pub region: BBox,
    pub component_boxes: Vec<BBox>,
    /// Known failure case (merged digits); not counted as a rejection.
    #[serde(default)]
    pub expected_miss: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorKind {
    Word,
    /// Date-shaped text that fails the separator-nesting test.
    DateLikeReject,
    /// Date-shaped text that passes every stage.
    ExpectedFalseAccept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDistractor {
    pub line_index: usize,
    pub kind: DistractorKind,
    pub region: BBox,
    pub component_boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub page: PageSize,
    pub dates: Vec<TruthDate>,
    pub distractors: Vec<TruthDistractor>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GroupKind {
    Date {
        class: DateClass,
        double_digit: bool,
    },
    Distractor(DistractorKind),
}

/// Marks of one group with `x` relative to the group's left edge.
#[derive(Debug, Clone)]
struct Group {
    kind: GroupKind,
    rects: Vec<BBox>,
    /// Connected components the rects form; differs from `rects` only when
    /// marks touch.
    components: Vec<BBox>,
}

impl Group {
    fn width(&self) -> u32 {
        self.rects.iter().map(|r| r.x_max).max().unwrap_or(0) + 1
    }

    fn max_component_width(&self) -> u32 {
        self.components.iter().map(BBox::width).max().unwrap_or(0)
    }
}

struct Builder<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    /// Lay marks out left to right starting at x = 0.
    fn row(&mut self, marks: &[(u32, u32, u32)]) -> Vec<BBox> {
        let mut x = 0;
        let mut out = Vec::with_capacity(marks.len());
        for (i, &(width, top, bottom)) in marks.iter().enumerate() {
            if i > 0 {
                x += self.spec.mark_gap.sample(&mut self.rng);
            }
            out.push(BBox::new(x, top, x + width - 1, bottom));
            x += width;
        }
        out
    }

    fn digit(&mut self, band_top: u32, band_h: u32) -> (u32, u32, u32) {
        let j = self.spec.baseline_jitter;
        let top = band_top + self.rng.gen_range(0..=j);
        let bottom = band_top + band_h - 1 - self.rng.gen_range(0..=j);
        (self.spec.digit_width.sample(&mut self.rng), top, bottom)
    }

    /// Eight marks of a date in `class` layout centered on `center_y`.
    fn date_marks(&mut self, class: DateClass, center_y: u32) -> Vec<(u32, u32, u32)> {
        let band_h = self.spec.digit_height.sample(&mut self.rng);
        let band_top = center_y - band_h / 2;
        let mut digits: Vec<(u32, u32, u32)> =
            (0..6).map(|_| self.digit(band_top, band_h)).collect();
        let sep = |b: &mut Self, left: (u32, u32, u32), right: (u32, u32, u32)| match class {
            DateClass::Slash => {
                let over = (((b.spec.slash_height_factor - 1.0) * band_h as f64) / 2.0)
                    .round()
                    .max(1.0) as u32;
                let w = b.spec.slash_width.sample(&mut b.rng);
                (w, band_top - over, band_top + band_h - 1 + over)
            }
            DateClass::Dash | DateClass::Unrefined => {
                let w = b.spec.dash_width.sample(&mut b.rng);
                let t = b.spec.dash_thickness.sample(&mut b.rng);
                let top = band_top + band_h / 2 - t / 2;
                (w, top, top + t - 1)
            }
            DateClass::Dot => {
                let s = b.spec.dot_size.sample(&mut b.rng);
                let bottom = left.2.min(right.2);
                (s, bottom + 1 - s, bottom)
            }
        };
        let s1 = sep(self, digits[1], digits[2]);
        let s2 = sep(self, digits[3], digits[4]);
        digits.insert(2, s1);
        digits.insert(5, s2);
        digits
    }

    fn date(&mut self, class: DateClass, center_y: u32, double_digit: bool) -> Group {
        let marks = self.date_marks(class, center_y);
        let mut rects = self.row(&marks);
        let mut components = rects.clone();
        if double_digit {
            // Pull every mark after the first left so digits 1 and 2 touch.
            let shift = rects[1].x_min - rects[0].x_max - 1;
            for r in rects.iter_mut().skip(1) {
                r.x_min -= shift;
                r.x_max -= shift;
            }
            components = std::iter::once(rects[0].union(&rects[1]))
                .chain(rects[2..].iter().copied())
                .collect();
        }
        Group {
            kind: GroupKind::Date {
                class,
                double_digit,
            },
            rects,
            components,
        }
    }

    /// Date-shaped marks; the reject variant gives separators that straddle
    /// the digit band edge so neither nesting system can hold.
    fn date_like(&mut self, center_y: u32, false_accept: bool) -> Group {
        if false_accept {
            let class = if self.rng.gen_bool(0.5) {
                DateClass::Dash
            } else {
                DateClass::Dot
            };
            let mut g = self.date(class, center_y, false);
            g.kind = GroupKind::Distractor(DistractorKind::ExpectedFalseAccept);
            return g;
        }
        let mut marks = self.date_marks(DateClass::Slash, center_y);
        for pos in [2, 5] {
            let (w, top, bottom) = marks[pos];
            let mid = (top + bottom) / 2;
            marks[pos] = if self.rng.gen_bool(0.5) {
                (w, top, mid)
            } else {
                (w, mid, bottom)
            };
        }
        let rects = self.row(&marks);
        Group {
            kind: GroupKind::Distractor(DistractorKind::DateLikeReject),
            components: rects.clone(),
            rects,
        }
    }

    /// A word of 2 to 7 letters: x-height letters, ascenders and descenders.
    fn word(&mut self, center_y: u32) -> Group {
        let band_h = self.spec.digit_height.hi;
        let baseline = center_y - band_h / 2 + band_h - 1;
        let x_height = (band_h * 3 / 5).max(4);
        let len = self.rng.gen_range(2..=7);
        let marks: Vec<(u32, u32, u32)> = (0..len)
            .map(|_| {
                let w = self.spec.digit_width.sample(&mut self.rng);
                match self.rng.gen_range(0..4) {
                    0 => (w, baseline + 1 - band_h, baseline),
                    1 => (w, baseline + 1 - x_height, baseline + band_h / 3),
                    _ => (w, baseline + 1 - x_height, baseline),
                }
            })
            .collect();
        let rects = self.row(&marks);
        Group {
            kind: GroupKind::Distractor(DistractorKind::Word),
            components: rects.clone(),
            rects,
        }
    }
}

/// Render one page and its ground truth. Deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> Result<(BinaryImage, GroundTruth)> {
    spec.validate()?;
    let mut b = Builder {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let pitch = spec.line_pitch();
    let centers: Vec<u32> = (0..spec.lines as u32)
        .map(|i| spec.margin + i * pitch + pitch / 2)
        .collect();

    // Planted items first, each to a random line.
    let mut per_line: Vec<Vec<Group>> = vec![Vec::new(); spec.lines];
    let st = &spec.stressors;
    let false_accepts =
        (st.date_like_text as f64 * st.date_like_false_accept_fraction).round() as usize;
    let planted = spec.dates_per_page + st.double_digits + st.date_like_text;
    for i in 0..planted {
        let line = b.rng.gen_range(0..spec.lines);
        let cy = centers[line];
        let group = if i < spec.dates_per_page {
            let class = spec.class_mix.sample(&mut b.rng);
            b.date(class, cy, false)
        } else if i < spec.dates_per_page + st.double_digits {
            let class = spec.class_mix.sample(&mut b.rng);
            b.date(class, cy, true)
        } else {
            let k = i - spec.dates_per_page - st.double_digits;
            b.date_like(cy, k < false_accepts)
        };
        per_line[line].push(group);
    }

    let avail = spec.page_width - 2 * spec.margin;
    let mut img = BinaryImage::blank(spec.page_width, spec.page_height)?;
    let mut truth = GroundTruth {
        seed: spec.seed,
        page: PageSize {
            width: spec.page_width,
            height: spec.page_height,
        },
        dates: Vec::new(),
        distractors: Vec::new(),
    };
    let mut occupied: Vec<BBox> = Vec::new();
    let mut line_index = 0;

    for (line, mut groups) in per_line.into_iter().enumerate() {
        let target = (spec.distractor_density * avail as f64) as u32;
        let mut words = Vec::new();
        let mut used: u32 = groups.iter().map(Group::width).sum();
        while used < target {
            let w = b.word(centers[line]);
            used += w.width() + 60;
            words.push(w);
        }
        // Any window crossing a group boundary must see a gap above the
        // spacing limit of the widest component on the line.
        let widest = groups
            .iter()
            .chain(&words)
            .map(Group::max_component_width)
            .max()
            .unwrap_or(0);
        let min_gap = (DEFAULT_SPACING_MULTIPLIER * widest as f64).floor() as u32 + 1;
        let total = |gs: &[Group], ws: &[Group]| -> u32 {
            let n = (gs.len() + ws.len()) as u32;
            gs.iter().chain(ws).map(Group::width).sum::<u32>()
                + n.saturating_sub(1) * (min_gap + 12)
        };
        while total(&groups, &words) > avail {
            if words.pop().is_none() {
                return Err(Error::validation(format!(
                    "planted items on line {line} do not fit a {}-pixel page width",
                    spec.page_width
                )));
            }
        }
        groups.extend(words);
        if groups.is_empty() {
            continue;
        }
        groups.shuffle(&mut b.rng);

        let slack = avail - total(&groups, &[]);
        let mut x = spec.margin + b.rng.gen_range(0..=slack.min(40));
        for g in &groups {
            let place = |r: &BBox| r.translated(x as i64, 0);
            for r in &g.rects {
                let r = place(r);
                img.fill_rect(r.x_min, r.y_min, r.x_max, r.y_max);
                occupied.push(r);
            }
            let components: Vec<BBox> = g.components.iter().map(place).collect();
            let region = components[1..]
                .iter()
                .fold(components[0], |a, c| a.union(c));
            match g.kind {
                GroupKind::Date {
                    class,
                    double_digit,
                } => {
                    if !double_digit {
                        check_detectable(&components, class)?;
                    }
                    truth.dates.push(TruthDate {
                        line_index,
                        class,
                        region,
                        component_boxes: components,
                        expected_miss: double_digit,
                    })
                }
                GroupKind::Distractor(kind) => {
                    check_distractor(&components, kind)?;
                    truth.distractors.push(TruthDistractor {
                        line_index,
                        kind,
                        region,
                        component_boxes: components,
                    })
                }
            }
            x += g.width() + min_gap + b.rng.gen_range(0..=12);
        }
        line_index += 1;
    }

    scatter_specks(&mut b, &mut img, &occupied);
    Ok((img, truth))
}

/// Page `index` of a corpus uses seed `spec.seed + index`.
pub fn generate_page(spec: &SynthSpec, index: usize) -> Result<(BinaryImage, GroundTruth)> {
    generate(&SynthSpec {
        seed: spec.seed.wrapping_add(index as u64),
        ..*spec
    })
}

fn window_of(boxes: &[BBox]) -> Option<EcccWindow> {
    let comps: [ConnComp; WINDOW_LEN] = std::array::from_fn(|i| ConnComp::from_bbox(i, boxes[i]));
    EcccWindow::new(0, comps)
}

fn check_detectable(boxes: &[BBox], class: DateClass) -> Result<()> {
    let expected = match class {
        DateClass::Slash => LayoutClass::Slash,
        _ => LayoutClass::DashOrDot,
    };
    let got = window_of(boxes).and_then(|w| evaluate_window(&w, &DetectorConfig::default()));
    match got {
        Some((layout, _)) if layout == expected => Ok(()),
        other => Err(Error::Contract(format!(
            "planted {class:?} date is not detectable under default config: {other:?} for {boxes:?}"
        ))),
    }
}

fn check_distractor(boxes: &[BBox], kind: DistractorKind) -> Result<()> {
    let ok = match kind {
        DistractorKind::Word => boxes.len() < WINDOW_LEN,
        DistractorKind::DateLikeReject => {
            window_of(boxes).is_some_and(|w| classify_separator_layout(&w) == LayoutClass::NonDate)
        }
        DistractorKind::ExpectedFalseAccept => window_of(boxes)
            .and_then(|w| evaluate_window(&w, &DetectorConfig::default()))
            .is_some(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{kind:?} stressor does not have its intended geometry"
        )))
    }
}

/// Specks stay at least three pixels from every glyph so they never join
/// a glyph's component.
fn scatter_specks(b: &mut Builder<'_>, img: &mut BinaryImage, occupied: &[BBox]) {
    let mut taken = occupied.to_vec();
    const SHAPES: [&[(u32, u32)]; 4] = [
        &[(0, 0)],
        &[(0, 0), (1, 0)],
        &[(0, 0), (0, 1)],
        &[(0, 0), (1, 0), (1, 1)],
    ];
    let (w, h) = (img.width(), img.height());
    let mut placed = 0;
    let mut attempts = 0;
    while placed < b.spec.stressors.specks && attempts < 10_000 {
        attempts += 1;
        let x = b.rng.gen_range(0..w - 2);
        let y = b.rng.gen_range(0..h - 2);
        let clear = taken.iter().all(|r| {
            x + 1 + 3 < r.x_min || x > r.x_max + 3 || y + 1 + 3 < r.y_min || y > r.y_max + 3
        });
        if !clear {
            continue;
        }
        let shape = SHAPES[b.rng.gen_range(0..SHAPES.len())];
        for &(dx, dy) in shape {
            img.set(x + dx, y + dy, true);
        }
        taken.push(BBox::new(x, y, x + 1, y + 1));
        placed += 1;
    }
}
