//! Water area, landscape division index, seasonal extrema and accuracy metrics.

use std::collections::BTreeMap;

use chrono::Datelike;

use crate::error::{Error, Result};
use crate::raster::{AreaRecord, ClassLabel, ClassMap, ConfusionMatrix, Mask};
use crate::timeseries::ClassStack;

/// Water area inside the region of interest, in km².
pub fn water_area(map: &ClassMap, roi: &Mask) -> Result<f64> {
    map.shape().ensure_eq(roi.shape())?;
    if roi.count() == 0 {
        return Err(Error::EmptyRoi);
    }
    let n = map
        .labels()
        .iter()
        .zip(roi.data())
        .filter(|&(&l, &inside)| inside && l == ClassLabel::Water)
        .count();
    Ok(n as f64 * map.pixel_area_km2())
}

/// 8-connected patches of a binary raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLabeling {
    pub width: usize,
    pub height: usize,
    /// Patch id per pixel, 0 for background, ids dense in `1..=M`.
    pub ids: Vec<u32>,
    /// Pixel count of patch `k` at index `k - 1`.
    pub sizes: Vec<u64>,
}

impl PatchLabeling {
    pub fn patch_count(&self) -> usize {
        self.sizes.len()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // slot 0 is the background
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let up = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = up;
            x = up;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass union-find labelling of `water ∩ roi` with 8-connectivity.
///
/// Patch ids are assigned in row-major order of each patch's first pixel.
pub fn connected_components(water: &Mask, roi: &Mask) -> Result<PatchLabeling> {
    water.shape().ensure_eq(roi.shape())?;
    let (w, h) = (water.width(), water.height());
    let fg = |i: usize| water.data()[i] && roi.data()[i];
    let mut provisional = vec![0u32; w * h];
    let mut sets = DisjointSet::new();

    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !fg(i) {
                continue;
            }
            // already-visited neighbours: W, NW, N, NE
            let mut label = 0;
            let mut neighbours = [0u32; 4];
            if c > 0 {
                neighbours[0] = provisional[i - 1];
            }
            if r > 0 {
                let up = i - w;
                if c > 0 {
                    neighbours[1] = provisional[up - 1];
                }
                neighbours[2] = provisional[up];
                if c + 1 < w {
                    neighbours[3] = provisional[up + 1];
                }
            }
            for &n in neighbours.iter().filter(|&&n| n != 0) {
                if label == 0 {
                    label = n;
                } else {
                    sets.union(label, n);
                }
            }
            if label == 0 {
                label = sets.make();
            }
            provisional[i] = label;
        }
    }

    let mut dense = vec![0u32; sets.parent.len()];
    let mut sizes = Vec::new();
    let mut ids = vec![0u32; w * h];
    for i in 0..w * h {
        let p = provisional[i];
        if p == 0 {
            continue;
        }
        let root = sets.find(p) as usize;
        if dense[root] == 0 {
            sizes.push(0);
            dense[root] = sizes.len() as u32;
        }
        let id = dense[root];
        ids[i] = id;
        sizes[id as usize - 1] += 1;
    }
    Ok(PatchLabeling {
        width: w,
        height: h,
        ids,
        sizes,
    })
}

/// `1 - Σ S_k² / S²` for the given patch sizes.
pub fn division_index_from_sizes(sizes: &[u64]) -> Result<f64> {
    let total: u128 = sizes.iter().map(|&s| u128::from(s)).sum();
    if total == 0 {
        return Err(Error::UndefinedIndex);
    }
    let squares: u128 = sizes.iter().map(|&s| u128::from(s) * u128::from(s)).sum();
    Ok(1.0 - squares as f64 / (total * total) as f64)
}

/// Landscape division index of the 8-connected water patches inside the ROI:
/// the probability that two random water pixels belong to different patches.
pub fn division_index(water: &Mask, roi: &Mask) -> Result<f64> {
    division_index_from_sizes(&connected_components(water, roi)?.sizes)
}

/// One record per date: area, division index (None without water) and the share
/// of ROI pixels holding a Water/Land label.
pub fn area_series(stack: &ClassStack, roi: &Mask) -> Result<Vec<AreaRecord>> {
    let roi_pixels = roi.count();
    if roi_pixels == 0 {
        return Err(Error::EmptyRoi);
    }
    stack
        .maps()
        .iter()
        .map(|m| {
            let water_area_km2 = water_area(m, roi)?;
            let division = match division_index(&m.mask_of(ClassLabel::Water), roi) {
                Ok(d) => Some(d),
                Err(Error::UndefinedIndex) => None,
                Err(e) => return Err(e),
            };
            let valid = m
                .labels()
                .iter()
                .zip(roi.data())
                .filter(|&(l, &inside)| inside && l.is_valid())
                .count();
            Ok(AreaRecord {
                date: m.date,
                water_area_km2,
                division_index: division,
                valid_fraction: valid as f64 / roi_pixels as f64,
            })
        })
        .collect()
}

/// Months (1-12) holding a year's largest and smallest water area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearExtrema {
    pub max_month: u32,
    pub min_month: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremaSummary {
    pub years: BTreeMap<i32, YearExtrema>,
    /// How many years peaked in each month, January first.
    pub max_counts: [u32; 12],
    pub min_counts: [u32; 12],
}

/// Per-year month of maximum and minimum area plus month histograms across years.
/// Ties go to the earliest date.
pub fn annual_extrema(records: &[AreaRecord]) -> Result<ExtremaSummary> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_year: BTreeMap<i32, Vec<&AreaRecord>> = BTreeMap::new();
    for r in records {
        by_year.entry(r.date.year()).or_default().push(r);
    }
    let mut years = BTreeMap::new();
    let mut max_counts = [0u32; 12];
    let mut min_counts = [0u32; 12];
    for (year, mut rs) in by_year {
        rs.sort_by_key(|r| r.date);
        let mut hi = rs[0];
        let mut lo = rs[0];
        for &r in &rs[1..] {
            if r.water_area_km2 > hi.water_area_km2 {
                hi = r;
            }
            if r.water_area_km2 < lo.water_area_km2 {
                lo = r;
            }
        }
        let e = YearExtrema {
            max_month: hi.date.month(),
            min_month: lo.date.month(),
        };
        max_counts[e.max_month as usize - 1] += 1;
        min_counts[e.min_month as usize - 1] += 1;
        years.insert(year, e);
    }
    Ok(ExtremaSummary {
        years,
        max_counts,
        min_counts,
    })
}

/// A validation point with its reference class (Water or Land).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub row: usize,
    pub col: usize,
    pub truth_water: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub matrix: ConfusionMatrix,
    /// Samples whose predicted label was neither Water nor Land.
    pub excluded: usize,
}

/// Confusion counts of the map against reference samples, Water positive.
pub fn confusion(map: &ClassMap, samples: &SampleSet) -> Result<Confusion> {
    let mut cm = ConfusionMatrix::default();
    let mut excluded = 0;
    for s in &samples.samples {
        if s.row >= map.height() || s.col >= map.width() {
            return Err(Error::SampleOutOfBounds {
                row: s.row,
                col: s.col,
                width: map.width(),
                height: map.height(),
            });
        }
        match (map.get(s.row, s.col), s.truth_water) {
            (ClassLabel::Water, true) => cm.tp += 1,
            (ClassLabel::Water, false) => cm.fp += 1,
            (ClassLabel::Land, true) => cm.fn_ += 1,
            (ClassLabel::Land, false) => cm.tn += 1,
            _ => excluded += 1,
        }
    }
    if cm.total() == 0 {
        return Err(Error::NoSamples);
    }
    Ok(Confusion {
        matrix: cm,
        excluded,
    })
}

fn percent(num: u64, den: u64, name: &'static str) -> Result<f64> {
    if den == 0 {
        Err(Error::UndefinedMetric(name))
    } else {
        Ok(100.0 * num as f64 / den as f64)
    }
}

/// Overall accuracy, percent.
pub fn oa(cm: &ConfusionMatrix) -> Result<f64> {
    percent(cm.tp + cm.tn, cm.total(), "overall accuracy")
}

/// Share of predicted water that is water, percent.
pub fn precision(cm: &ConfusionMatrix) -> Result<f64> {
    percent(cm.tp, cm.tp + cm.fp, "precision")
}

/// Share of true water that was predicted water, percent.
pub fn recall(cm: &ConfusionMatrix) -> Result<f64> {
    percent(cm.tp, cm.tp + cm.fn_, "recall")
}
