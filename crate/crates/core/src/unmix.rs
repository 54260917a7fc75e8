//! Sub-pixel refinement of the water/land boundary by local two-endmember
//! fully constrained unmixing.
//!
//! Each boundary pixel is modelled as `r = c_w * e_w + (1 - c_w) * e_L` with
//! `0 <= c_w <= 1`, where the endmembers are the darkest and brightest pixels in a
//! small window around it. Substituting the sum-to-one constraint leaves a 1-D
//! convex problem whose constrained minimiser is the clamped projection.

use rayon::prelude::*;

use crate::config::UnmixConfig;
use crate::error::{Error, Result};
use crate::raster::{total_reflectance, ClassLabel, ClassMap, Grid, Mask, ReflectanceScene, Spectrum, DEFAULT_NODATA};

/// Water abundance on mixed-region pixels; nodata elsewhere.
pub type AbundanceMap = Grid;

const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn opposite(label: ClassLabel) -> Option<ClassLabel> {
    match label {
        ClassLabel::Water => Some(ClassLabel::Land),
        ClassLabel::Land => Some(ClassLabel::Water),
        _ => None,
    }
}

/// Water or Land pixels with at least one 8-neighbour of the other class.
pub fn mixed_region(map: &ClassMap) -> Mask {
    let (w, h) = (map.width(), map.height());
    let labels = map.labels();
    Mask::from_fn(w, h, |i| {
        let Some(other) = opposite(labels[i]) else {
            return false;
        };
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        NEIGHBOURS.iter().any(|&(dr, dc)| {
            let (rr, cc) = (r + dr, c + dc);
            rr >= 0
                && cc >= 0
                && (rr as usize) < h
                && (cc as usize) < w
                && labels[rr as usize * w + cc as usize] == other
        })
    })
}

/// Darkest and brightest spectra (by six-band total) in the `window`-sized
/// neighbourhood of `(row, col)`, clipped at the image border.
///
/// The water endmember prefers non-mixed Water pixels and the land endmember
/// non-mixed Land pixels; when the window holds none of the preferred kind the
/// search falls back to every valid pixel. Ties keep the first pixel in row-major
/// order. Returns `(e_w, e_L)`.
pub fn find_endmembers(
    scene: &ReflectanceScene,
    map: &ClassMap,
    mixed: &Mask,
    row: usize,
    col: usize,
    window: usize,
) -> Result<(Spectrum, Spectrum)> {
    let half = window / 2;
    let (w, h) = (scene.width(), scene.height());
    let r0 = row.saturating_sub(half);
    let r1 = (row + half).min(h - 1);
    let c0 = col.saturating_sub(half);
    let c1 = (col + half).min(w - 1);

    let mut pure_water: Option<(f64, Spectrum)> = None;
    let mut pure_land: Option<(f64, Spectrum)> = None;
    let mut darkest: Option<(f64, Spectrum)> = None;
    let mut brightest: Option<(f64, Spectrum)> = None;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let i = r * w + c;
            let Some(s) = scene.spectrum(i) else { continue };
            let total = total_reflectance(&s);
            let keep_min = |slot: &mut Option<(f64, Spectrum)>| {
                if slot.is_none_or(|(t, _)| total < t) {
                    *slot = Some((total, s));
                }
            };
            let keep_max = |slot: &mut Option<(f64, Spectrum)>| {
                if slot.is_none_or(|(t, _)| total > t) {
                    *slot = Some((total, s));
                }
            };
            keep_min(&mut darkest);
            keep_max(&mut brightest);
            if !mixed.data()[i] {
                match map.labels()[i] {
                    ClassLabel::Water => keep_min(&mut pure_water),
                    ClassLabel::Land => keep_max(&mut pure_land),
                    _ => {}
                }
            }
        }
    }
    let water = pure_water.or(darkest).ok_or(Error::NoValidPixel { row, col })?;
    let land = pure_land.or(brightest).ok_or(Error::NoValidPixel { row, col })?;
    Ok((water.1, land.1))
}

/// Water abundance minimising `||r - c*e_w - (1-c)*e_L||^2` over `c` in `[0, 1]`.
pub fn fcls2(r: &Spectrum, e_w: &Spectrum, e_l: &Spectrum) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..6 {
        let d = e_w[k] - e_l[k];
        num += (r[k] - e_l[k]) * d;
        den += d * d;
    }
    if den == 0.0 {
        return Err(Error::DegenerateEndmembers);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Squared residual of the two-endmember model at abundance `c`.
pub fn mixing_residual(r: &Spectrum, e_w: &Spectrum, e_l: &Spectrum, c: f64) -> f64 {
    (0..6)
        .map(|k| {
            let d = r[k] - c * e_w[k] - (1.0 - c) * e_l[k];
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub map: ClassMap,
    pub abundance: AbundanceMap,
    /// Mixed pixels left unchanged because no endmembers could be resolved.
    pub unresolved: usize,
}

/// Relabels every mixed-region pixel by thresholding its water abundance.
///
/// Reads only the input map, so the outcome does not depend on processing order.
pub fn refine_boundary(
    scene: &ReflectanceScene,
    map: &ClassMap,
    cfg: &UnmixConfig,
) -> Result<Refinement> {
    cfg.validate()?;
    scene.shape().ensure_eq(map.shape())?;
    let mixed = mixed_region(map);
    let w = map.width();

    let rows: Vec<(Vec<ClassLabel>, Vec<f32>, usize)> = (0..map.height())
        .into_par_iter()
        .map(|r| {
            let mut labels = map.labels()[r * w..(r + 1) * w].to_vec();
            let mut abundance = vec![DEFAULT_NODATA; w];
            let mut unresolved = 0;
            for c in 0..w {
                let i = r * w + c;
                if !mixed.data()[i] {
                    continue;
                }
                let estimate = scene.spectrum(i).ok_or(Error::NoValidPixel { row: r, col: c }).and_then(|px| {
                    let (e_w, e_l) = find_endmembers(scene, map, &mixed, r, c, cfg.window)?;
                    fcls2(&px, &e_w, &e_l)
                });
                match estimate {
                    Ok(cw) => {
                        abundance[c] = cw as f32;
                        labels[c] = if cw >= cfg.abundance_threshold {
                            ClassLabel::Water
                        } else {
                            ClassLabel::Land
                        };
                    }
                    Err(_) => unresolved += 1,
                }
            }
            (labels, abundance, unresolved)
        })
        .collect();

    let mut labels = Vec::with_capacity(map.labels().len());
    let mut abundance = Vec::with_capacity(map.labels().len());
    let mut unresolved = 0;
    for (l, a, u) in rows {
        labels.extend(l);
        abundance.extend(a);
        unresolved += u;
    }
    if unresolved > 0 {
        log::warn!(
            "scene {}: {unresolved} mixed pixels left unrefined",
            map.scene_id
        );
    }
    Ok(Refinement {
        map: ClassMap::new(
            map.scene_id.clone(),
            map.date,
            map.width(),
            map.height(),
            map.pixel_size_m(),
            labels,
        )?,
        abundance: Grid::new(
            map.width(),
            map.height(),
            map.pixel_size_m(),
            abundance,
            DEFAULT_NODATA,
        )?,
        unresolved,
    })
}
