//! Text-line segmentation and connected-component labeling.
//!
//! Lines come from the horizontal projection profile (ink count per row).
//! Components are 8-connected ink regions; each one is attached to the line
//! whose row band contains the vertical center of its bounding box.

use serde::{Deserialize, Serialize};

use crate::raster::BinaryImage;

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max);
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min <= x_max && y_min <= y_max).then_some(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn translated(&self, dx: i64, dy: i64) -> BBox {
        let shift = |v: u32, d: i64| (v as i64 + d) as u32;
        BBox {
            x_min: shift(self.x_min, dx),
            y_min: shift(self.y_min, dy),
            x_max: shift(self.x_max, dx),
            y_max: shift(self.y_max, dy),
        }
    }
}

/// One connected component and its minimum bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnComp {
    pub id: usize,
    pub bbox: BBox,
    pub pixel_count: usize,
}

impl ConnComp {
    /// A solid rectangle, for geometry built without a raster.
    pub fn from_bbox(id: usize, bbox: BBox) -> Self {
        Self {
            id,
            bbox,
            pixel_count: bbox.area() as usize,
        }
    }

    pub fn width(&self) -> u32 {
        self.bbox.width()
    }

    pub fn height(&self) -> u32 {
        self.bbox.height()
    }

    /// Vertical center of the bounding rectangle (not the ink centroid).
    pub fn centroid_y(&self) -> f64 {
        (self.bbox.y_min as f64 + self.bbox.y_max as f64) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    pub y_top: u32,
    pub y_bottom: u32,
    /// Sorted by `x_min`, then `y_min`, then `id`.
    pub components: Vec<ConnComp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    /// Bands separated by fewer blank rows than this are merged.
    pub min_gap: u32,
    /// Rows with fewer ink pixels than this count as blank.
    pub min_ink: u32,
    /// Components smaller than this are dropped as noise.
    pub noise_min_pixels: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            min_gap: 3,
            min_ink: 1,
            noise_min_pixels: 4,
        }
    }
}

/// Ink pixel count per row.
pub fn project_rows(img: &BinaryImage) -> Vec<u32> {
    img.bits()
        .chunks_exact(img.width() as usize)
        .map(|row| row.iter().map(|&b| b as u32).sum())
        .collect()
}

/// Row bands `(y_top, y_bottom)` of text, top to bottom.
pub fn segment_lines(img: &BinaryImage, min_gap: u32, min_ink: u32) -> Vec<(u32, u32)> {
    bands_from_profile(&project_rows(img), min_gap.max(1), min_ink.max(1))
}

fn bands_from_profile(profile: &[u32], min_gap: u32, min_ink: u32) -> Vec<(u32, u32)> {
    let mut bands: Vec<(u32, u32)> = Vec::new();
    let mut run_start: Option<u32> = None;
    let push = |bands: &mut Vec<(u32, u32)>, top: u32, bottom: u32| match bands.last_mut() {
        Some(last) if top - last.1 - 1 < min_gap => last.1 = bottom,
        _ => bands.push((top, bottom)),
    };
    for (row, &count) in profile.iter().enumerate() {
        let row = row as u32;
        match (count >= min_ink, run_start) {
            (true, None) => run_start = Some(row),
            (false, Some(top)) => {
                push(&mut bands, top, row - 1);
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(top) = run_start {
        push(&mut bands, top, profile.len() as u32 - 1);
    }
    bands
}

/// 8-connected labeling. Ids are dense from 0 in raster order of each
/// component's first pixel.
pub fn label_components(img: &BinaryImage) -> Vec<ConnComp> {
    const UNLABELED: u32 = u32::MAX;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let bits = img.bits();
    let mut labels = vec![UNLABELED; bits.len()];
    let mut comps = Vec::new();
    let mut stack = Vec::new();

    for start in 0..bits.len() {
        if bits[start] == 0 || labels[start] != UNLABELED {
            continue;
        }
        let id = comps.len();
        let (sx, sy) = ((start as i64 % w) as u32, (start as i64 / w) as u32);
        let mut bbox = BBox::new(sx, sy, sx, sy);
        let mut count = 0usize;
        labels[start] = id as u32;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            count += 1;
            let (x, y) = (idx as i64 % w, idx as i64 / w);
            bbox = bbox.union(&BBox::new(x as u32, y as u32, x as u32, y as u32));
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = (ny * w + nx) as usize;
                    if bits[n] == 1 && labels[n] == UNLABELED {
                        labels[n] = id as u32;
                        stack.push(n);
                    }
                }
            }
        }
        comps.push(ConnComp {
            id,
            bbox,
            pixel_count: count,
        });
    }
    comps
}

/// Attach each non-noise component to the line containing its `centroid_y`,
/// or the nearest line when none does. One output line per input band.
pub fn assign_to_lines(
    comps: &[ConnComp],
    lines: &[(u32, u32)],
    noise_min_pixels: usize,
) -> Vec<TextLine> {
    let mut out: Vec<TextLine> = lines
        .iter()
        .map(|&(y_top, y_bottom)| TextLine {
            y_top,
            y_bottom,
            components: Vec::new(),
        })
        .collect();
    if out.is_empty() {
        return out;
    }
    for comp in comps.iter().filter(|c| c.pixel_count >= noise_min_pixels) {
        let cy = comp.centroid_y();
        let distance = |&(top, bottom): &(u32, u32)| {
            if cy < top as f64 {
                top as f64 - cy
            } else if cy > bottom as f64 {
                cy - bottom as f64
            } else {
                0.0
            }
        };
        // min_by keeps the first of equal elements, so ties go to the upper line.
        let (best, _) = lines
            .iter()
            .enumerate()
            .min_by(|a, b| distance(a.1).total_cmp(&distance(b.1)))
            .expect("non-empty");
        out[best].components.push(*comp);
    }
    for line in &mut out {
        line.components
            .sort_by_key(|c| (c.bbox.x_min, c.bbox.y_min, c.id));
    }
    out
}

/// Full layout pass: segment, label, assign. Lines left without any
/// component after noise filtering are not text lines and are omitted, so
/// indices into the result count only lines that carry marks.
pub fn extract_lines(img: &BinaryImage, params: &LayoutParams) -> Vec<TextLine> {
    let bands = segment_lines(img, params.min_gap, params.min_ink);
    let comps = label_components(img);
    assign_to_lines(&comps, &bands, params.noise_min_pixels)
        .into_iter()
        .filter(|l| !l.components.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_with(width: u32, height: u32, ink: &[(u32, u32)]) -> BinaryImage {
        let mut img = BinaryImage::blank(width, height).unwrap();
        for &(x, y) in ink {
            img.set(x, y, true);
        }
        img
    }

    fn rows_image(width: u32, height: u32, rows: impl IntoIterator<Item = u32>) -> BinaryImage {
        let mut img = BinaryImage::blank(width, height).unwrap();
        for y in rows {
            img.set(0, y, true);
        }
        img
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project_rows(&BinaryImage::blank(4, 3).unwrap()),
            vec![0, 0, 0]
        );
        assert_eq!(project_rows(&image_with(5, 3, &[(2, 1)])), vec![0, 1, 0]);
        let mut full = BinaryImage::blank(7, 2).unwrap();
        full.fill_rect(0, 1, 6, 1);
        assert_eq!(project_rows(&full)[1], 7);
    }

    #[test]
    fn segment_examples() {
        assert!(segment_lines(&BinaryImage::blank(5, 5).unwrap(), 3, 1).is_empty());
        let img = rows_image(3, 15, (2..=5).chain(10..=12));
        assert_eq!(segment_lines(&img, 2, 1), vec![(2, 5), (10, 12)]);
        // One blank row (6) between bands, fewer than min_gap = 3.
        let img = rows_image(3, 15, (2..=5).chain(7..=9));
        assert_eq!(segment_lines(&img, 3, 1), vec![(2, 9)]);
    }

    #[test]
    fn segment_respects_min_ink() {
        let mut img = BinaryImage::blank(5, 6).unwrap();
        img.fill_rect(0, 1, 4, 2);
        img.set(0, 4, true);
        assert_eq!(segment_lines(&img, 1, 2), vec![(1, 2)]);
        assert_eq!(segment_lines(&img, 1, 1), vec![(1, 2), (4, 4)]);
    }

    #[test]
    fn band_touching_bottom_edge() {
        let img = rows_image(2, 4, [3]);
        assert_eq!(segment_lines(&img, 3, 1), vec![(3, 3)]);
    }

    #[test]
    fn single_blob() {
        let mut img = BinaryImage::blank(6, 6).unwrap();
        img.fill_rect(2, 3, 3, 4);
        let comps = label_components(&img);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].pixel_count, 4);
        assert_eq!(comps[0].bbox, BBox::new(2, 3, 3, 4));
        assert_eq!(comps[0].id, 0);
    }

    #[test]
    fn diagonal_contact_is_one_component() {
        // Two 2x2 blobs meeting only at the corner (1,1)-(2,2).
        let mut img = BinaryImage::blank(5, 5).unwrap();
        img.fill_rect(0, 0, 1, 1);
        img.fill_rect(2, 2, 3, 3);
        let comps = label_components(&img);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].pixel_count, 8);
        assert_eq!(comps[0].bbox, BBox::new(0, 0, 3, 3));
    }

    #[test]
    fn blank_column_separates() {
        let mut img = BinaryImage::blank(5, 3).unwrap();
        img.fill_rect(0, 0, 1, 2);
        img.fill_rect(3, 0, 4, 2);
        let comps = label_components(&img);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].bbox.x_min, 0);
        assert_eq!(comps[1].bbox.x_min, 3);
    }

    #[test]
    fn assignment_examples() {
        let c = |id, x, y| ConnComp::from_bbox(id, BBox::new(x, y, x + 2, y + 2));
        let lines = [(0, 10), (20, 30)];
        let out = assign_to_lines(&[c(0, 10, 3), c(1, 4, 4)], &lines, 4);
        assert_eq!(out.len(), 2);
        let xs: Vec<u32> = out[0].components.iter().map(|c| c.bbox.x_min).collect();
        assert_eq!(xs, vec![4, 10]);
        assert!(out[1].components.is_empty());

        let speck = ConnComp::from_bbox(0, BBox::new(5, 5, 5, 5));
        let out = assign_to_lines(&[speck], &lines, 4);
        assert!(out.iter().all(|l| l.components.is_empty()));
    }

    #[test]
    fn nearest_line_fallback() {
        // Centroid at 15.5: 5.5 below line 0, 4.5 above line 1.
        let comp = ConnComp::from_bbox(0, BBox::new(0, 14, 3, 17));
        let out = assign_to_lines(&[comp], &[(0, 10), (20, 30)], 1);
        assert_eq!(out[1].components.len(), 1);
    }

    #[test]
    fn equal_x_min_tie_break() {
        let a = ConnComp::from_bbox(0, BBox::new(5, 8, 6, 9));
        let b = ConnComp::from_bbox(1, BBox::new(5, 2, 6, 3));
        let out = assign_to_lines(&[a, b], &[(0, 10)], 1);
        let ids: Vec<usize> = out[0].components.iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![1, 0]);
    }

    #[test]
    fn extract_lines_drops_noise_only_bands() {
        let mut img = BinaryImage::blank(20, 30).unwrap();
        img.set(3, 2, true);
        img.fill_rect(2, 10, 6, 15);
        let lines = extract_lines(&img, &LayoutParams::default());
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].components[0].bbox, BBox::new(2, 10, 6, 15));
    }

    fn random_image() -> impl Strategy<Value = BinaryImage> {
        (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
            prop::collection::vec(prop::bool::weighted(0.35), (w * h) as usize).prop_map(move |v| {
                BinaryImage::new(w, h, v.into_iter().map(u8::from).collect()).unwrap()
            })
        })
    }

    /// Independent component oracle: union-find over 8-neighbor pairs.
    fn union_find_partition(img: &BinaryImage) -> Vec<Vec<usize>> {
        let w = img.width() as usize;
        let n = img.bits().len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for i in 0..n {
            if img.bits()[i] == 0 {
                continue;
            }
            let (x, y) = (i % w, i / w);
            for (dx, dy) in [(1i64, 0i64), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || nx >= w as i64 || ny >= img.height() as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if img.bits()[j] == 1 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in (0..n).filter(|&i| img.bits()[i] == 1) {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn projection_sum_is_ink_count(img in random_image()) {
            let total: u32 = project_rows(&img).iter().sum();
            prop_assert_eq!(total as usize, img.ink_count());
        }

        #[test]
        fn labeling_is_a_partition(img in random_image()) {
            let comps = label_components(&img);
            let total: usize = comps.iter().map(|c| c.pixel_count).sum();
            prop_assert_eq!(total, img.ink_count());
            let oracle = union_find_partition(&img);
            prop_assert_eq!(comps.len(), oracle.len());
            for (i, c) in comps.iter().enumerate() {
                prop_assert_eq!(c.id, i);
                prop_assert!(c.pixel_count as u64 <= c.bbox.area());
            }
            let mut sizes: Vec<usize> = comps.iter().map(|c| c.pixel_count).collect();
            let mut oracle_sizes: Vec<usize> = oracle.iter().map(Vec::len).collect();
            sizes.sort();
            oracle_sizes.sort();
            prop_assert_eq!(sizes, oracle_sizes);
        }

        #[test]
        fn labeling_is_translation_equivariant(img in random_image(), dx in 0u32..5, dy in 0u32..5) {
            let a = label_components(&img);
            let b = label_components(&img.padded(dx, dy));
            prop_assert_eq!(a.len(), b.len());
            let mut shifted: Vec<(BBox, usize)> = a.iter().map(|c| (c.bbox.translated(dx as i64, dy as i64), c.pixel_count)).collect();
            let mut got: Vec<(BBox, usize)> = b.iter().map(|c| (c.bbox, c.pixel_count)).collect();
            shifted.sort_by_key(|(b, n)| (b.y_min, b.x_min, b.y_max, b.x_max, *n));
            got.sort_by_key(|(b, n)| (b.y_min, b.x_min, b.y_max, b.x_max, *n));
            prop_assert_eq!(shifted, got);
        }

        #[test]
        fn bands_are_ordered_and_disjoint(img in random_image(), gap in 1u32..4) {
            let bands = segment_lines(&img, gap, 1);
            for w in bands.windows(2) {
                prop_assert!(w[0].1 + gap < w[1].0);
            }
            for &(top, bottom) in &bands {
                prop_assert!(top <= bottom);
            }
        }

        #[test]
        fn assignment_is_total_over_non_noise(img in random_image(), noise in 1usize..4) {
            let comps = label_components(&img);
            let bands = segment_lines(&img, 1, 1);
            let lines = assign_to_lines(&comps, &bands, noise);
            let assigned: usize = lines.iter().map(|l| l.components.len()).sum();
            let expected = if bands.is_empty() { 0 } else { comps.iter().filter(|c| c.pixel_count >= noise).count() };
            prop_assert_eq!(assigned, expected);
            for line in &lines {
                for c in &line.components {
                    prop_assert!(c.bbox.y_max >= line.y_top && c.bbox.y_min <= line.y_bottom);
                }
            }
        }
    }
}
