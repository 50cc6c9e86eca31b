//! Localization of handwritten numerical date fields (DD/MM/YY, DD-MM-YY,
//! DD.MM.YY) in binarized document images.
//!
//! The pipeline never recognizes digits. It looks only at the bounding
//! rectangles of connected components:
//!
//! 1. **raster** – load a page and binarize it (ink = 1, background = 0).
//! 2. **layout** – split the page into text lines with a horizontal
//!    projection profile and label 8-connected components per line.
//! 3. **detector** – slide a window of eight consecutive components along
//!    each line and keep windows that pass the ordering, spacing,
//!    digit-pair and separator-nesting tests.
//! 4. **knn** – split dash dates from dot dates by the widths of the two
//!    separator components.
//!
//! `synth` and `eval` provide a synthetic corpus with exact ground truth and
//! the FAR / FRR / efficiency scoring used to measure the detector.

pub mod detector;
pub mod error;
pub mod eval;
pub mod knn;
pub mod layout;
pub mod overlay;
pub mod raster;
pub mod synth;

pub use detector::{
    DateCandidate, DateClass, Detection, DetectorConfig, EcccWindow, LayoutClass, NumericFeatures,
    NumericRangeConfig,
};
pub use error::{Error, Result};
pub use knn::{KnnModel, SeparatorLabel, SeparatorSample};
pub use layout::{BBox, ConnComp, LayoutParams, TextLine};
pub use raster::{BinaryImage, GrayImage};
