use datefield::detector::scan_document;
use datefield::eval::{
    extract_knn_samples, labeled_separators, match_detections, report, MatchOptions,
};
use datefield::raster::{binarize, load_image, rec601};
use datefield::synth::{generate, generate_page, ClassMix, SynthSpec};
use datefield::{DateClass, DetectorConfig, Error, KnnModel, LayoutClass};

fn spec(f: impl FnOnce(&mut SynthSpec)) -> SynthSpec {
    let mut s = SynthSpec::default();
    f(&mut s);
    s
}

fn train_knn(seed: u64, pages: usize) -> KnnModel {
    let train = spec(|s| {
        s.seed = seed;
        s.dates_per_page = 4;
        s.class_mix = ClassMix {
            slash: 0.0,
            dash: 0.5,
            dot: 0.5,
        };
    });
    let mut labeled = Vec::new();
    for i in 0..pages {
        let (_, truth) = generate_page(&train, i).unwrap();
        labeled.extend(labeled_separators(&truth));
    }
    KnnModel::train(extract_knn_samples(&labeled).unwrap(), 3).unwrap()
}

#[test]
fn pgm_round_trip_through_loader() {
    let dir = tempfile::tempdir().unwrap();
    let (img, _) = generate(&spec(|s| s.seed = 3)).unwrap();
    let path = dir.path().join("page.pgm");
    img.to_gray().save(&path).unwrap();
    let loaded = load_image(&path).unwrap();
    assert_eq!(binarize(&loaded, None), img);
}

#[test]
fn small_pgm_decodes_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("white.pgm");
    std::fs::write(&path, b"P5\n3 2\n255\n\xff\xff\xff\xff\xff\xff").unwrap();
    let g = load_image(&path).unwrap();
    assert_eq!((g.width(), g.height()), (3, 2));
    assert!(g.samples().iter().all(|&s| s == 255));

    let path = dir.path().join("black.pgm");
    std::fs::write(&path, b"P5\n1 1\n255\n\x00").unwrap();
    assert_eq!(load_image(&path).unwrap().samples(), &[0]);
}

#[test]
fn rgb_png_uses_rec601() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rgb.png");
    let img = image::RgbImage::from_fn(2, 1, |x, _| {
        if x == 0 {
            image::Rgb([200, 100, 50])
        } else {
            image::Rgb([10, 20, 30])
        }
    });
    img.save(&path).unwrap();
    let g = load_image(&path).unwrap();
    // 0.299*200 + 0.587*100 + 0.114*50 = 124.2
    assert_eq!(g.get(0, 0), 124);
    assert_eq!(g.get(1, 0), rec601(10, 20, 30));
}

#[test]
fn loader_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_image(&dir.path().join("missing.pgm")),
        Err(Error::Io { .. })
    ));
    let junk = dir.path().join("junk.pgm");
    std::fs::write(&junk, b"not an image at all").unwrap();
    assert!(matches!(load_image(&junk), Err(Error::Format { .. })));
    let deep = dir.path().join("deep.png");
    image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_pixel(2, 2, image::Luma([1000]))
        .save(&deep)
        .unwrap();
    assert!(matches!(load_image(&deep), Err(Error::Format { .. })));
}

#[test]
fn two_dates_on_different_lines_in_order() {
    let mut found = None;
    for seed in 0..50 {
        let s = spec(|s| {
            s.seed = seed;
            s.dates_per_page = 2;
        });
        let (img, truth) = generate(&s).unwrap();
        if truth.dates[0].line_index != truth.dates[1].line_index {
            found = Some((img, truth));
            break;
        }
    }
    let (img, truth) = found.expect("some seed puts the dates on separate lines");
    let cands = scan_document(&img, &DetectorConfig::default()).unwrap();
    assert_eq!(cands.len(), 2);
    assert!(cands[0].line_index < cands[1].line_index);
    let mut truth_regions: Vec<_> = truth
        .dates
        .iter()
        .map(|d| (d.line_index, d.region))
        .collect();
    truth_regions.sort_by_key(|(l, r)| (*l, r.x_min));
    let got: Vec<_> = cands.iter().map(|c| (c.line_index, c.region)).collect();
    assert_eq!(got, truth_regions);
}

#[test]
fn blank_page_has_no_candidates() {
    let img = datefield::BinaryImage::blank(300, 200).unwrap();
    assert!(scan_document(&img, &DetectorConfig::default())
        .unwrap()
        .is_empty());
}

#[test]
fn knn_refines_generated_separators() {
    let model = train_knn(1000, 20);
    assert!(model.samples().len() >= 60);
    let test = spec(|s| {
        s.seed = 77;
        s.dates_per_page = 4;
        s.class_mix = ClassMix {
            slash: 0.0,
            dash: 0.5,
            dot: 0.5,
        };
    });
    let (img, truth) = generate(&test).unwrap();
    let cands = scan_document(&img, &DetectorConfig::default()).unwrap();
    assert_eq!(cands.len(), truth.dates.len());
    let refined = model.refine_all(cands);
    let dets: Vec<_> = refined.iter().map(|c| c.to_detection()).collect();
    let r = report(&[match_detections(&dets, &truth, &MatchOptions::default()).unwrap()]);
    assert_eq!(r.efficiency_pct, 100.0);
    for c in &refined {
        let w3 = c.window.comps[2].width();
        match c.final_class {
            DateClass::Dash => assert!(w3 >= 15),
            DateClass::Dot => assert!(w3 <= 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn refining_a_slash_candidate_is_an_error() {
    let model = train_knn(2000, 5);
    let s = spec(|s| {
        s.dates_per_page = 1;
        s.class_mix = ClassMix {
            slash: 1.0,
            dash: 0.0,
            dot: 0.0,
        };
    });
    let (img, _) = generate(&s).unwrap();
    let cands = scan_document(&img, &DetectorConfig::default()).unwrap();
    assert_eq!(cands[0].layout_class, LayoutClass::Slash);
    assert!(matches!(model.refine(&cands[0]), Err(Error::Contract(_))));
    assert_eq!(model.refine_all(cands.clone()), cands);
}

#[test]
fn stressed_pages_still_find_clean_dates() {
    let s = spec(|s| {
        s.seed = 11;
        s.stressors.specks = 200;
        s.stressors.double_digits = 1;
        s.stressors.date_like_text = 2;
    });
    for i in 0..5 {
        let (img, truth) = generate_page(&s, i).unwrap();
        let cands = scan_document(&img, &DetectorConfig::default()).unwrap();
        let dets: Vec<_> = cands.iter().map(|c| c.to_detection()).collect();
        let o = match_detections(&dets, &truth, &MatchOptions::default()).unwrap();
        assert!(o.false_rejects.is_empty(), "page {i}: {o:?}");
        assert!(o.false_accepts.is_empty(), "page {i}: {o:?}");
    }
}
