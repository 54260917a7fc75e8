//! Per-scene classification.
//!
//! Stage order: Tasseled Cap TC4 cloud test, max-VIS/max-SWIR water index on the
//! cloud-free pixels, terrain-slope shadow removal, then the visible-brightness
//! snow/ice test on what is left of the water set. Label precedence in the output
//! is NoData > Cloud > IceSnow > Water > Land.

use log::warn;

use crate::config::ClassifyConfig;
use crate::error::{Error, Result};
use crate::raster::{
    max_swir, max_vis, ClassLabel, ClassMap, Grid, Mask, ReflectanceScene, SensorKind,
    Spectrum, DEFAULT_NODATA,
};

/// TC4 weights for Landsat-5 TM, in Blue..SWIR2 order.
pub const TC4_TM: Spectrum = [-0.8242, 0.0849, 0.4392, -0.0580, 0.2012, -0.2768];

/// TC4 weights for Landsat-8 OLI, in Blue..SWIR2 order.
pub const TC4_OLI: Spectrum = [-0.8239, 0.0849, 0.4396, -0.0580, 0.2013, -0.2773];

pub fn tc4_coefficients(sensor: SensorKind) -> &'static Spectrum {
    match sensor {
        SensorKind::Tm => &TC4_TM,
        SensorKind::Oli => &TC4_OLI,
    }
}

/// Fourth Tasseled Cap component per pixel. Pixels with any invalid band are nodata.
pub fn tc4(scene: &ReflectanceScene) -> Grid {
    let coeffs = tc4_coefficients(scene.sensor());
    let values = (0..scene.shape().len())
        .map(|i| match scene.spectrum(i) {
            Some(s) => s.iter().zip(coeffs).map(|(v, c)| v * c).sum::<f64>() as f32,
            None => DEFAULT_NODATA,
        })
        .collect();
    Grid::new(
        scene.width(),
        scene.height(),
        scene.pixel_size_m(),
        values,
        DEFAULT_NODATA,
    )
    .expect("dimensions come from a valid scene")
}

/// Default histogram resolution for [`otsu_threshold`].
pub const OTSU_BINS: usize = 256;

/// Otsu threshold over `bins` uniform bins spanning the sample range.
///
/// The result is the bin edge `min + k * width` whose lower class (bins `< k`)
/// maximises between-class variance; ties go to the lowest `k`. Non-finite
/// samples are ignored.
pub fn otsu_threshold(samples: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidBinCount(bins));
    }
    let (lo, hi) = samples
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Err(Error::DegenerateHistogram);
    }
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0u64; bins];
    for &v in samples.iter().filter(|v| v.is_finite()) {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        hist[b] += 1;
    }
    let k = otsu_split(&hist).ok_or(Error::DegenerateHistogram)?;
    Ok(lo + k as f64 * width)
}

/// Index `k` in `1..len` splitting `hist` into `[0, k)` and `[k, len)` with maximal
/// between-class variance, lowest `k` on ties. `None` if no split has both
/// classes populated.
///
/// With bin indices as class values the between-class variance is proportional
/// to `(N*s0 - n0*S)^2 / (n0*n1)`; that ratio is compared exactly in integers
/// whenever `N*S` fits in 64 bits, which covers any raster that fits in memory.
pub fn otsu_split(hist: &[u64]) -> Option<usize> {
    let n: u128 = hist.iter().map(|&c| u128::from(c)).sum();
    let s: u128 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u128 * u128::from(c))
        .sum();
    let exact = n * s <= u128::from(u64::MAX);
    let mut n0: u128 = 0;
    let mut s0: u128 = 0;
    let mut best: Option<(usize, u128, u128)> = None;
    let mut best_f = f64::NEG_INFINITY;
    for k in 1..hist.len() {
        n0 += u128::from(hist[k - 1]);
        s0 += (k as u128 - 1) * u128::from(hist[k - 1]);
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (n * s0).abs_diff(n0 * s);
        let den = n0 * n1;
        if exact {
            let num = diff * diff;
            if best.is_none_or(|(_, bn, bd)| ratio_gt(num, den, bn, bd)) {
                best = Some((k, num, den));
            }
        } else {
            let score = (diff as f64).powi(2) / den as f64;
            if score > best_f {
                best_f = score;
                best = Some((k, 0, 1));
            }
        }
    }
    best.map(|(k, _, _)| k)
}

/// `a/b > c/d` for positive denominators, without overflowing.
fn ratio_gt(a: u128, b: u128, c: u128, d: u128) -> bool {
    let (qa, ra) = (a / b, a % b);
    let (qc, rc) = (c / d, c % d);
    if qa != qc {
        return qa > qc;
    }
    // remainders are below their denominators, each at most N^2/4 < 2^64
    ra * d > rc * b
}

/// Cloud where the pixel is valid and `tc4 <= threshold`.
pub fn cloud_mask(tc4: &Grid, threshold: f64) -> Mask {
    let t = threshold as f32;
    let values = tc4.values();
    Mask::from_fn(tc4.width(), tc4.height(), |i| {
        tc4.is_valid_at(i) && values[i] <= t
    })
}

/// Water where `max(Blue, Green, Red) > max(SWIR1, SWIR2)`.
///
/// Invalid pixels are reported as non-water; callers needing the distinction use
/// [`ReflectanceScene::valid_mask`].
pub fn water_index(scene: &ReflectanceScene) -> Mask {
    Mask::from_fn(scene.width(), scene.height(), |i| {
        scene.spectrum(i).is_some_and(|s| is_water_shaped(&s))
    })
}

/// Water-index test for a single spectrum. Equality counts as non-water.
pub fn is_water_shaped(s: &Spectrum) -> bool {
    max_vis(s) > max_swir(s)
}

/// Terrain slope in degrees using Horn's 3x3 kernel.
///
/// Neighbours outside the grid replicate the nearest edge pixel; nodata
/// neighbours take the centre elevation and nodata centres stay nodata.
pub fn slope_from_dem(dem: &Grid) -> Grid {
    let (w, h) = (dem.width(), dem.height());
    let cell = dem.pixel_size_m();
    let z = dem.values();
    let mut out = vec![DEFAULT_NODATA; w * h];
    for r in 0..h {
        for c in 0..w {
            let centre = z[r * w + c];
            if dem.is_nodata(centre) {
                continue;
            }
            let at = |dr: isize, dc: isize| -> f64 {
                let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                let v = z[rr * w + cc];
                if dem.is_nodata(v) {
                    f64::from(centre)
                } else {
                    f64::from(v)
                }
            };
            let (a, b, cc) = (at(-1, -1), at(-1, 0), at(-1, 1));
            let (d, f) = (at(0, -1), at(0, 1));
            let (g, hh, i) = (at(1, -1), at(1, 0), at(1, 1));
            let dzdx = ((cc + 2.0 * f + i) - (a + 2.0 * d + g)) / (8.0 * cell);
            let dzdy = ((g + 2.0 * hh + i) - (a + 2.0 * b + cc)) / (8.0 * cell);
            out[r * w + c] = dzdx.hypot(dzdy).atan().to_degrees() as f32;
        }
    }
    Grid::new(w, h, cell, out, DEFAULT_NODATA).expect("same shape as the DEM")
}

/// Clears water pixels on slopes steeper than `slope_threshold_deg`.
/// Nodata slope never clears a pixel.
pub fn shadow_filter(water: &Mask, slope: &Grid, slope_threshold_deg: f64) -> Result<Mask> {
    water.shape().ensure_eq(slope.shape())?;
    let t = slope_threshold_deg as f32;
    let s = slope.values();
    Ok(Mask::from_fn(water.width(), water.height(), |i| {
        water.data()[i] && !(slope.is_valid_at(i) && s[i] > t)
    }))
}

/// Moves water pixels whose max visible reflectance reaches `maxvis_threshold`
/// into an ice/snow set. Returns `(water, ice)`.
pub fn snow_ice_filter(
    water: &Mask,
    scene: &ReflectanceScene,
    maxvis_threshold: f64,
) -> Result<(Mask, Mask)> {
    water.shape().ensure_eq(scene.shape())?;
    let ice = Mask::from_fn(water.width(), water.height(), |i| {
        water.data()[i]
            && scene
                .spectrum(i)
                .is_some_and(|s| max_vis(&s) >= maxvis_threshold)
    });
    let kept = Mask::from_fn(water.width(), water.height(), |i| {
        water.data()[i] && !ice.data()[i]
    });
    Ok((kept, ice))
}

/// Runs every stage on one scene.
pub fn classify_scene(
    scene: &ReflectanceScene,
    slope: &Grid,
    cfg: &ClassifyConfig,
) -> Result<ClassMap> {
    scene.shape().ensure_eq(slope.shape())?;
    let valid = scene.valid_mask();
    let tc4_grid = tc4(scene);

    let threshold = if cfg.per_scene_otsu {
        let samples: Vec<f64> = tc4_grid
            .values()
            .iter()
            .enumerate()
            .filter(|&(i, _)| tc4_grid.is_valid_at(i))
            .map(|(_, &v)| f64::from(v))
            .collect();
        match otsu_threshold(&samples, OTSU_BINS) {
            Ok(t) => t,
            Err(_) => {
                warn!(
                    "scene {}: TC4 histogram is degenerate, using fixed threshold {}",
                    scene.id(),
                    cfg.tc4_threshold
                );
                cfg.tc4_threshold
            }
        }
    } else {
        cfg.tc4_threshold
    };
    let cloud = cloud_mask(&tc4_grid, threshold);

    let wi = water_index(scene);
    let candidate = Mask::from_fn(scene.width(), scene.height(), |i| {
        wi.data()[i] && !cloud.data()[i]
    });
    let no_shadow = shadow_filter(&candidate, slope, cfg.slope_threshold_deg)?;
    let (water, ice) = snow_ice_filter(&no_shadow, scene, cfg.maxvis_threshold)?;

    let labels = (0..scene.shape().len())
        .map(|i| {
            if !valid.data()[i] {
                ClassLabel::NoData
            } else if cloud.data()[i] {
                ClassLabel::Cloud
            } else if ice.data()[i] {
                ClassLabel::IceSnow
            } else if water.data()[i] {
                ClassLabel::Water
            } else {
                ClassLabel::Land
            }
        })
        .collect();
    ClassMap::new(
        scene.id(),
        scene.date(),
        scene.width(),
        scene.height(),
        scene.pixel_size_m(),
        labels,
    )
}

/// Share of region-of-interest pixels labelled Cloud.
pub fn cloud_fraction(map: &ClassMap, roi: &Mask) -> Result<f64> {
    map.shape().ensure_eq(roi.shape())?;
    let total = roi.count();
    if total == 0 {
        return Err(Error::EmptyRoi);
    }
    let cloudy = map
        .labels()
        .iter()
        .zip(roi.data())
        .filter(|&(&l, &inside)| inside && l == ClassLabel::Cloud)
        .count();
    Ok(cloudy as f64 / total as f64)
}
