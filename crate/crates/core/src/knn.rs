//! Dash/dot separation by k-nearest neighbors over the widths of the two
//! separator components (window positions 3 and 6).
//!
//! Both layouts pass the same nesting test, so only the separator widths
//! tell them apart. The model is a plain list of labeled samples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{DateCandidate, DateClass, LayoutClass};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparatorLabel {
    Dash,
    Dot,
}

impl From<SeparatorLabel> for DateClass {
    fn from(l: SeparatorLabel) -> Self {
        match l {
            SeparatorLabel::Dash => DateClass::Dash,
            SeparatorLabel::Dot => DateClass::Dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatorSample {
    /// Width of the third component.
    pub w3: u32,
    /// Width of the sixth component.
    pub w6: u32,
    pub label: SeparatorLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    samples: Vec<SeparatorSample>,
    k: usize,
}

impl KnnModel {
    /// Lazy learner: validates and stores the samples.
    pub fn train(samples: Vec<SeparatorSample>, k: usize) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::validation(format!(
                "k must be odd and positive, got {k}"
            )));
        }
        if samples.len() < k {
            return Err(Error::validation(format!(
                "k = {k} needs at least {k} samples, got {}",
                samples.len()
            )));
        }
        if let Some(s) = samples.iter().find(|s| s.w3 == 0 || s.w6 == 0) {
            return Err(Error::validation(format!(
                "sample widths must be >= 1, got {s:?}"
            )));
        }
        let has = |l| samples.iter().any(|s| s.label == l);
        if !(has(SeparatorLabel::Dash) && has(SeparatorLabel::Dot)) {
            return Err(Error::validation(
                "training samples must contain both dash and dot",
            ));
        }
        Ok(Self { samples, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn samples(&self) -> &[SeparatorSample] {
        &self.samples
    }

    /// Majority label of the `k` nearest samples by Euclidean distance.
    /// Equal distances prefer the lower sample index.
    pub fn classify(&self, w3: u32, w6: u32) -> SeparatorLabel {
        classify_among(self.samples.iter().copied().enumerate(), self.k, w3, w6)
    }

    /// Leave-one-out accuracy in `[0, 1]`.
    pub fn leave_one_out_accuracy(&self) -> f64 {
        let correct = (0..self.samples.len())
            .filter(|&held| {
                let rest = self
                    .samples
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|&(i, _)| i != held);
                let s = self.samples[held];
                classify_among(rest, self.k, s.w3, s.w6) == s.label
            })
            .count();
        correct as f64 / self.samples.len() as f64
    }

    /// Set the final class of a dash-or-dot candidate.
    pub fn refine(&self, cand: &DateCandidate) -> Result<DateCandidate> {
        if cand.layout_class != LayoutClass::DashOrDot {
            return Err(Error::Contract(format!(
                "only dash-or-dot candidates can be refined, got {:?}",
                cand.layout_class
            )));
        }
        let comps = &cand.window.comps;
        let label = self.classify(comps[2].width(), comps[5].width());
        Ok(DateCandidate {
            final_class: label.into(),
            ..cand.clone()
        })
    }

    /// Refine dash-or-dot candidates and pass slash candidates through.
    pub fn refine_all(&self, cands: Vec<DateCandidate>) -> Vec<DateCandidate> {
        cands
            .into_iter()
            .map(|c| match c.layout_class {
                LayoutClass::DashOrDot => self.refine(&c).expect("dash-or-dot checked"),
                _ => c,
            })
            .collect()
    }

    /// Model files are a JSON array of samples; `k` is supplied by the caller.
    pub fn load(path: &Path, k: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let samples: Vec<SeparatorSample> = serde_json::from_str(&text)?;
        Self::train(samples, k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.samples).expect("samples serialize")
    }
}

fn classify_among(
    samples: impl Iterator<Item = (usize, SeparatorSample)>,
    k: usize,
    w3: u32,
    w6: u32,
) -> SeparatorLabel {
    // Squared distances on integer widths are exact, so ranking is
    // platform-independent.
    let mut ranked: Vec<(u64, usize, SeparatorLabel)> = samples
        .map(|(i, s)| {
            let d3 = s.w3 as i64 - w3 as i64;
            let d6 = s.w6 as i64 - w6 as i64;
            ((d3 * d3 + d6 * d6) as u64, i, s.label)
        })
        .collect();
    ranked.sort_unstable_by_key(|&(d, i, _)| (d, i));
    let dashes = ranked
        .iter()
        .take(k)
        .filter(|r| r.2 == SeparatorLabel::Dash)
        .count();
    if 2 * dashes > k.min(ranked.len()) {
        SeparatorLabel::Dash
    } else {
        SeparatorLabel::Dot
    }
}
