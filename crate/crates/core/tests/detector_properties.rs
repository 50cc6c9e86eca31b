use datefield::detector::{
    accepted_windows, check_spacing, classify_separator_layout, evaluate_window, form_windows,
    register_date, scan_line, LayoutClass, WINDOW_LEN,
};
use datefield::{BBox, ConnComp, DetectorConfig, EcccWindow, TextLine};
use proptest::prelude::*;

/// Literal transcription of the two eight-inequality systems, with boxes
/// named C1..C8 and a chained `a <= b <= c` written out in full.
fn literal_layout(c: &[BBox; 8]) -> LayoutClass {
    let ymin = |i: usize| c[i - 1].y_min;
    let ymax = |i: usize| c[i - 1].y_max;
    let slash = ymin(3) <= ymin(2)
        && ymin(2) <= ymax(3)
        && ymin(3) <= ymax(2)
        && ymax(2) <= ymax(3)
        && ymin(3) <= ymin(4)
        && ymin(4) <= ymax(3)
        && ymin(3) <= ymax(4)
        && ymax(4) <= ymax(3)
        && ymin(6) <= ymin(5)
        && ymin(5) <= ymax(6)
        && ymin(6) <= ymax(5)
        && ymax(5) <= ymax(6)
        && ymin(6) <= ymin(7)
        && ymin(7) <= ymax(6)
        && ymin(6) <= ymax(7)
        && ymax(7) <= ymax(6);
    let dash_or_dot = ymin(2) <= ymin(3)
        && ymin(3) <= ymax(2)
        && ymin(2) <= ymax(3)
        && ymax(3) <= ymax(2)
        && ymin(4) <= ymin(3)
        && ymin(3) <= ymax(4)
        && ymin(4) <= ymax(3)
        && ymax(3) <= ymax(4)
        && ymin(5) <= ymin(6)
        && ymin(6) <= ymax(5)
        && ymin(5) <= ymax(6)
        && ymax(6) <= ymax(5)
        && ymin(7) <= ymin(6)
        && ymin(6) <= ymax(7)
        && ymin(7) <= ymax(6)
        && ymax(6) <= ymax(7);
    match (slash, dash_or_dot) {
        (_, true) => LayoutClass::DashOrDot,
        (true, false) => LayoutClass::Slash,
        _ => LayoutClass::NonDate,
    }
}

/// Vertical extents drawn from a small range so nesting and equality both
/// occur often.
fn window_strategy() -> impl Strategy<Value = EcccWindow> {
    prop::collection::vec((0u32..12, 0u32..12, 1u32..15, 0u32..6), WINDOW_LEN).prop_map(|v| {
        let mut x = 5;
        let comps = std::array::from_fn(|i| {
            let (a, b, w, gap) = v[i];
            let (top, bottom) = (a.min(b), a.max(b));
            let bbox = BBox::new(x, top + 1, x + w - 1, bottom + 1);
            x += w + gap;
            ConnComp::from_bbox(i, bbox)
        });
        EcccWindow::new(0, comps).expect("x increases")
    })
}

/// Digits share a band; separators are either tall (slash-like) or short
/// and inside the band, with small perturbations so the two systems are
/// exercised near their boundaries.
fn nested_window_strategy() -> impl Strategy<Value = EcccWindow> {
    (
        20u32..40,
        prop::collection::vec((0u32..4, 0u32..4), 8),
        prop::bool::ANY,
        0u32..6,
    )
        .prop_map(|(band, jitter, tall, bump)| {
            let top = 50;
            let comps = std::array::from_fn(|i| {
                let x = 10 + 20 * i as u32;
                let (y0, y1) = if i == 2 || i == 5 {
                    if tall {
                        (top - 5 - bump, top + band + 5)
                    } else {
                        (top + band / 2 - bump, top + band / 2 + 2)
                    }
                } else {
                    (top + jitter[i].0, top + band - jitter[i].1)
                };
                ConnComp::from_bbox(i, BBox::new(x, y0, x + 9, y1))
            });
            EcccWindow::new(0, comps).unwrap()
        })
}

fn line_strategy() -> impl Strategy<Value = TextLine> {
    prop::collection::vec((0u32..20, 1u32..25, 10u32..40, 1u32..30), 0..30).prop_map(|v| {
        let mut x = 0;
        let mut comps: Vec<ConnComp> = v
            .into_iter()
            .enumerate()
            .map(|(i, (advance, w, top, h))| {
                x += advance;
                ConnComp::from_bbox(i, BBox::new(x, top, x + w - 1, top + h))
            })
            .collect();
        comps.sort_by_key(|c| (c.bbox.x_min, c.bbox.y_min, c.id));
        TextLine {
            y_top: 0,
            y_bottom: 80,
            components: comps,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn layout_matches_literal_inequalities(w in window_strategy()) {
        prop_assert_eq!(classify_separator_layout(&w), literal_layout(&w.boxes()));
    }

    #[test]
    fn layout_matches_literal_on_nested_geometry(w in nested_window_strategy()) {
        prop_assert_eq!(classify_separator_layout(&w), literal_layout(&w.boxes()));
    }

    #[test]
    fn slash_and_dash_systems_are_exclusive(w in nested_window_strategy()) {
        let b = w.boxes();
        let extents: Vec<(u32, u32)> = b[1..7].iter().map(|x| (x.y_min, x.y_max)).collect();
        let identical = extents.windows(2).all(|p| p[0] == p[1]);
        if !identical {
            let ymin = |i: usize| b[i - 1].y_min;
            let ymax = |i: usize| b[i - 1].y_max;
            let nested = |inner: usize, outer: usize| ymin(outer) <= ymin(inner) && ymax(inner) <= ymax(outer);
            let slash = nested(2, 3) && nested(4, 3) && nested(5, 6) && nested(7, 6);
            let dash = nested(3, 2) && nested(3, 4) && nested(6, 5) && nested(6, 7);
            prop_assert!(!(slash && dash));
        }
    }

    #[test]
    fn emitted_candidates_are_ordered_and_spaced(line in line_strategy()) {
        let cfg = DetectorConfig::default();
        for c in scan_line(&line, 0, &cfg) {
            let w = &c.window;
            for p in w.comps.windows(2) {
                prop_assert!(p[0].bbox.x_min < p[1].bbox.x_min);
            }
            for (i, &g) in w.gaps.iter().enumerate() {
                let actual = (w.comps[i + 1].bbox.x_min as i64 - w.comps[i].bbox.x_max as i64 - 1).max(0);
                prop_assert_eq!(g as i64, actual);
                prop_assert!(g as f64 <= 1.5 * w.w_max as f64);
            }
            prop_assert_eq!(w.w_max, w.comps.iter().map(|c| c.width()).max().unwrap());
        }
    }

    #[test]
    fn scan_matches_brute_force_enumeration(line in line_strategy()) {
        let cfg = DetectorConfig::default();
        // Oracle: every start index, every stage re-checked from scratch.
        let mut expected = Vec::new();
        let n = line.components.len();
        for start in 0..n.saturating_sub(WINDOW_LEN - 1) {
            let run = &line.components[start..start + WINDOW_LEN];
            if !(1..WINDOW_LEN).all(|i| run[i].bbox.x_min > run[i - 1].bbox.x_min) {
                continue;
            }
            let w = EcccWindow::new(start, run.try_into().unwrap()).unwrap();
            if !check_spacing(&w, 1.5) {
                continue;
            }
            if evaluate_window(&w, &cfg).is_some() {
                expected.push(start);
            }
        }
        let got: Vec<usize> = accepted_windows(&line, &cfg).iter().map(|a| a.window.start).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn horizontal_shift_preserves_labels(line in line_strategy(), dx in 0u32..500) {
        let cfg = DetectorConfig::default();
        let shifted = TextLine {
            components: line.components.iter().map(|c| ConnComp { bbox: c.bbox.translated(dx as i64, 0), ..*c }).collect(),
            ..line.clone()
        };
        let a = scan_line(&line, 0, &cfg);
        let b = scan_line(&shifted, 0, &cfg);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.final_class, y.final_class);
            prop_assert_eq!(x.region.translated(dx as i64, 0), y.region);
        }
    }

    #[test]
    fn spacing_and_layout_are_vertically_invariant(w in window_strategy(), dx in 0u32..200, dy in 0u32..200) {
        let moved = EcccWindow::new(0, w.comps.map(|c| ConnComp { bbox: c.bbox.translated(dx as i64, dy as i64), ..c })).unwrap();
        prop_assert_eq!(check_spacing(&w, 1.5), check_spacing(&moved, 1.5));
        prop_assert_eq!(classify_separator_layout(&w), classify_separator_layout(&moved));
        prop_assert_eq!(register_date(&w).translated(dx as i64, dy as i64), register_date(&moved));
    }

    #[test]
    fn region_contains_every_component(w in window_strategy()) {
        let r = register_date(&w);
        for c in &w.comps {
            prop_assert_eq!(r.intersection(&c.bbox), Some(c.bbox));
        }
    }
}

#[test]
fn form_windows_on_short_line_is_empty() {
    let line = TextLine {
        y_top: 0,
        y_bottom: 10,
        components: (0..7)
            .map(|i| ConnComp::from_bbox(i, BBox::new(i as u32 * 10, 0, i as u32 * 10 + 5, 5)))
            .collect(),
    };
    assert!(form_windows(&line).is_empty());
}
