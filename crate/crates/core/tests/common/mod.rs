//! Independent reference implementations used to check the library.
//!
//! These are deliberately naive: brute-force scans, grid searches and a
//! breadth-first flood fill, written without reference to the library's code.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use aquamap::{BandRole, ClassLabel, ClassMap, Grid, Mask, ReflectanceScene, SensorKind};
use chrono::NaiveDate;
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct Rng(Xoshiro256PlusPlus);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn spectrum(&mut self) -> [f64; 6] {
        std::array::from_fn(|_| self.range(0.0, 1.0))
    }
}

/// Sum of squared residuals of `r - (c*e_w + (1-c)*e_l)`.
pub fn residual(r: &[f64; 6], e_w: &[f64; 6], e_l: &[f64; 6], c: f64) -> f64 {
    (0..6)
        .map(|k| {
            let d = r[k] - (c * e_w[k] + (1.0 - c) * e_l[k]);
            d * d
        })
        .sum()
}

/// Grid point in `{0, step, 2*step, ..., 1}` with the smallest residual.
pub fn grid_search_abundance(r: &[f64; 6], e_w: &[f64; 6], e_l: &[f64; 6], step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let c = i as f64 / n as f64;
        let res = residual(r, e_w, e_l, c);
        if res < best.0 {
            best = (res, c);
        }
    }
    best.1
}

/// Exhaustive Otsu split: recomputes both classes from scratch for every edge and
/// compares between-class variances as exact rationals. Lowest edge wins ties.
pub fn brute_otsu_split(hist: &[u64]) -> Option<usize> {
    // between-class variance * N^2 = n0*n1*(m0 - m1)^2 = (n1*s0 - n0*s1)^2 / (n0*n1)
    let mut best: Option<(usize, u128, u128)> = None;
    for k in 1..hist.len() {
        let (mut n0, mut s0, mut n1, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for (i, &c) in hist.iter().enumerate() {
            let c = u128::from(c);
            if i < k {
                n0 += c;
                s0 += c * i as u128;
            } else {
                n1 += c;
                s1 += c * i as u128;
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = (n1 * s0).abs_diff(n0 * s1);
        let num = d * d;
        let den = n0 * n1;
        let better = match best {
            None => true,
            // num/den > bn/bd  <=>  num*bd > bn*den
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((k, num, den));
        }
    }
    best.map(|b| b.0)
}

/// Breadth-first 8-connected labelling of `water ∩ roi`; ids in row-major order
/// of each patch's first pixel, 0 for background.
pub fn flood_fill(water: &Mask, roi: &Mask) -> (Vec<u32>, Vec<u64>) {
    let (w, h) = (water.width(), water.height());
    let fg = |r: usize, c: usize| water.get(r, c) && roi.get(r, c);
    let mut ids = vec![0u32; w * h];
    let mut sizes = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !fg(r, c) || ids[r * w + c] != 0 {
                continue;
            }
            let id = sizes.len() as u32 + 1;
            let mut size = 0u64;
            let mut queue = VecDeque::from([(r, c)]);
            ids[r * w + c] = id;
            while let Some((y, x)) = queue.pop_front() {
                size += 1;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if fg(ny, nx) && ids[ny * w + nx] == 0 {
                            ids[ny * w + nx] = id;
                            queue.push_back((ny, nx));
                        }
                    }
                }
            }
            sizes.push(size);
        }
    }
    (ids, sizes)
}

/// Nearest-in-time gap filling written as a direct search per entry.
pub fn naive_fill(days: &[i64], labels: &[ClassLabel]) -> Vec<ClassLabel> {
    let valid: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_valid()).collect();
    if valid.is_empty() {
        return vec![ClassLabel::NoData; labels.len()];
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if !l.is_gap() {
                return l;
            }
            // smallest distance, earlier date first among equals
            let mut best = valid[0];
            for &j in &valid {
                let dj = (days[j] - days[i]).abs();
                let db = (days[best] - days[i]).abs();
                if dj < db || (dj == db && days[j] < days[best]) {
                    best = j;
                }
            }
            labels[best]
        })
        .collect()
}

pub fn random_label(rng: &mut Rng) -> ClassLabel {
    match rng.below(5) {
        0 => ClassLabel::Land,
        1 => ClassLabel::Water,
        2 => ClassLabel::Cloud,
        3 => ClassLabel::IceSnow,
        _ => ClassLabel::NoData,
    }
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Scene built from per-pixel spectra (one row).
pub fn scene_from_pixels(
    id: &str,
    sensor: SensorKind,
    width: usize,
    height: usize,
    pixels: &[[f64; 6]],
) -> ReflectanceScene {
    let bands = BandRole::ALL
        .iter()
        .map(|&role| {
            let v = pixels.iter().map(|p| p[role.index()] as f32).collect();
            (role, Grid::new(width, height, 30.0, v, -9999.0).unwrap())
        })
        .collect();
    ReflectanceScene::new(id, date(2000, 1, 1), sensor, bands).unwrap()
}

/// Share of pixels whose labels agree.
pub fn agreement(a: &ClassMap, b: &ClassMap) -> f64 {
    let same = a
        .labels()
        .iter()
        .zip(b.labels())
        .filter(|(x, y)| x == y)
        .count();
    same as f64 / a.labels().len() as f64
}

/// Every file below `root` with its bytes, keyed by relative path.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
