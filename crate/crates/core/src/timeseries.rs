//! Date-aligned label stacks and temporal gap filling.
//!
//! Cloud and IceSnow labels are replaced by the Water/Land label observed at the
//! nearest date (in calendar days) at the same pixel, preferring the earlier date
//! on ties.

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{ClassLabel, ClassMap, Grid, DEFAULT_NODATA};

/// Class maps for one footprint in strictly increasing date order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStack {
    maps: Vec<ClassMap>,
}

impl ClassStack {
    pub fn maps(&self) -> &[ClassMap] {
        &self.maps
    }

    pub fn into_maps(self) -> Vec<ClassMap> {
        self.maps
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.maps.iter().map(|m| m.date).collect()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn width(&self) -> usize {
        self.maps.first().map_or(0, ClassMap::width)
    }

    pub fn height(&self) -> usize {
        self.maps.first().map_or(0, ClassMap::height)
    }

    /// True when no map holds a Cloud or IceSnow label.
    pub fn is_gap_free(&self) -> bool {
        self.maps
            .iter()
            .all(|m| m.labels().iter().all(|l| !l.is_gap()))
    }

    /// Labels of one pixel across all dates.
    pub fn series(&self, index: usize) -> Vec<ClassLabel> {
        self.maps.iter().map(|m| m.labels()[index]).collect()
    }
}

/// Sorts maps by date. The maps are moved, never copied.
pub fn build_stack(mut maps: Vec<ClassMap>) -> Result<ClassStack> {
    maps.sort_by_key(|m| m.date);
    if let Some(first) = maps.first() {
        for m in &maps[1..] {
            first.shape().ensure_eq(m.shape())?;
            if m.pixel_size_m() != first.pixel_size_m() {
                return Err(Error::DimensionMismatch {
                    left: format!("{} m pixels", first.pixel_size_m()),
                    right: format!("{} m pixels", m.pixel_size_m()),
                });
            }
        }
    }
    for pair in maps.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(Error::DuplicateDate(pair[1].date));
        }
    }
    Ok(ClassStack { maps })
}

/// Fills one pixel series in place. `days` holds the date of each entry as a day
/// number, strictly increasing.
pub fn fill_series(days: &[i64], series: &mut [ClassLabel]) {
    let n = series.len();
    // nearest valid index at or before / at or after each position
    let mut prev = vec![None; n];
    let mut last = None;
    for i in 0..n {
        if series[i].is_valid() {
            last = Some(i);
        }
        prev[i] = last;
    }
    let mut next = vec![None; n];
    let mut upcoming = None;
    for i in (0..n).rev() {
        if series[i].is_valid() {
            upcoming = Some(i);
        }
        next[i] = upcoming;
    }
    if last.is_none() {
        // no valid observation at all
        for l in series.iter_mut() {
            *l = ClassLabel::NoData;
        }
        return;
    }
    for i in 0..n {
        if !series[i].is_gap() {
            continue;
        }
        let pick = match (prev[i], next[i]) {
            (Some(p), Some(q)) => {
                if days[i] - days[p] <= days[q] - days[i] {
                    p
                } else {
                    q
                }
            }
            (Some(p), None) => p,
            (None, Some(q)) => q,
            (None, None) => unreachable!("series has a valid entry"),
        };
        series[i] = series[pick];
    }
}

/// Replaces every Cloud/IceSnow label by the nearest-in-time valid label.
///
/// Pixels with no valid observation on any date become NoData on every date.
/// Water, Land and NoData labels and the dates are left untouched.
pub fn interpolate(stack: &ClassStack) -> ClassStack {
    let n = stack.len();
    if n == 0 {
        return stack.clone();
    }
    let days: Vec<i64> = stack
        .maps
        .iter()
        .map(|m| i64::from(m.date.num_days_from_ce()))
        .collect();
    let pixels = stack.maps[0].labels().len();
    const CHUNK: usize = 4096;

    // each chunk yields its slice of every map
    let chunks: Vec<Vec<Vec<ClassLabel>>> = (0..pixels.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(pixels);
            let mut out: Vec<Vec<ClassLabel>> = stack
                .maps
                .iter()
                .map(|m| m.labels()[start..end].to_vec())
                .collect();
            let mut series = vec![ClassLabel::NoData; n];
            for p in 0..end - start {
                if !out.iter().any(|m| m[p].is_gap()) {
                    continue;
                }
                for (t, m) in out.iter().enumerate() {
                    series[t] = m[p];
                }
                fill_series(&days, &mut series);
                for (t, m) in out.iter_mut().enumerate() {
                    m[p] = series[t];
                }
            }
            out
        })
        .collect();

    let maps = stack
        .maps
        .iter()
        .enumerate()
        .map(|(t, m)| {
            let mut labels = Vec::with_capacity(pixels);
            for chunk in &chunks {
                labels.extend_from_slice(&chunk[t]);
            }
            ClassMap::new(
                m.scene_id.clone(),
                m.date,
                m.width(),
                m.height(),
                m.pixel_size_m(),
                labels,
            )
            .expect("same shape as the source map")
        })
        .collect();
    ClassStack { maps }
}

/// Per-pixel share of valid dates observed as Water; nodata where a pixel has no
/// valid date. The stack must already be gap-free.
pub fn coverage_rate(stack: &ClassStack) -> Result<Grid> {
    if !stack.is_gap_free() {
        return Err(Error::NotInterpolated);
    }
    let first = stack.maps.first().ok_or(Error::EmptyInput)?;
    let pixels = first.labels().len();
    let mut water = vec![0u32; pixels];
    let mut valid = vec![0u32; pixels];
    for m in &stack.maps {
        for (i, &l) in m.labels().iter().enumerate() {
            if l.is_valid() {
                valid[i] += 1;
                if l == ClassLabel::Water {
                    water[i] += 1;
                }
            }
        }
    }
    let values = water
        .iter()
        .zip(&valid)
        .map(|(&w, &v)| {
            if v == 0 {
                DEFAULT_NODATA
            } else {
                (f64::from(w) / f64::from(v)) as f32
            }
        })
        .collect();
    Grid::new(
        first.width(),
        first.height(),
        first.pixel_size_m(),
        values,
        DEFAULT_NODATA,
    )
}
