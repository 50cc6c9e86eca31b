//! Visual output for detections: a page with only date pixels kept, and a
//! page with each registered region outlined.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::detector::DateClass;
use crate::error::{Error, Result};
use crate::layout::BBox;
use crate::raster::BinaryImage;

/// Keep ink only inside the given regions.
pub fn retain_regions(img: &BinaryImage, regions: &[BBox]) -> BinaryImage {
    let mut out = BinaryImage::blank(img.width(), img.height()).expect("same dimensions");
    for r in regions {
        for y in r.y_min..=r.y_max.min(img.height() - 1) {
            for x in r.x_min..=r.x_max.min(img.width() - 1) {
                if img.get(x, y) == 1 {
                    out.set(x, y, true);
                }
            }
        }
    }
    out
}

fn class_color(class: DateClass) -> Rgb<u8> {
    match class {
        DateClass::Slash => Rgb([220, 30, 30]),
        DateClass::Dash => Rgb([30, 90, 220]),
        DateClass::Dot => Rgb([20, 160, 60]),
        DateClass::Unrefined => Rgb([200, 120, 0]),
    }
}

/// Black-on-white page with a colored outline around each region, drawn
/// one pixel outside the region where the page allows.
pub fn annotate(img: &BinaryImage, regions: &[(BBox, DateClass)]) -> RgbImage {
    let mut out = RgbImage::from_fn(img.width(), img.height(), |x, y| {
        if img.get(x, y) == 1 {
            Rgb([0, 0, 0])
        } else {
            Rgb([255, 255, 255])
        }
    });
    let (w, h) = (img.width(), img.height());
    for &(r, class) in regions {
        let color = class_color(class);
        let (x0, y0) = (r.x_min.saturating_sub(1), r.y_min.saturating_sub(1));
        let (x1, y1) = ((r.x_max + 1).min(w - 1), (r.y_max + 1).min(h - 1));
        for x in x0..=x1 {
            out.put_pixel(x, y0, color);
            out.put_pixel(x, y1, color);
        }
        for y in y0..=y1 {
            out.put_pixel(x0, y, color);
            out.put_pixel(x1, y, color);
        }
    }
    out
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
