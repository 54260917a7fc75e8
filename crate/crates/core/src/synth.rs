//! Deterministic synthetic scenes with known ground truth.
//!
//! A scene is a background surface class plus an ordered list of features
//! (disks, ellipses, thick line segments, lobed blobs). Surface features (water,
//! land, vegetation, terrain shadow) replace what lies beneath them; overlay
//! features (cloud, ice/snow) cover the surface. When mixing is on, pixels cut by
//! a feature edge receive an area-weighted spectrum, with coverage estimated on an
//! 8x8 sub-pixel lattice.
//!
//! Randomness comes from xoshiro256++ seeded through SplitMix64
//! (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`). Gaussian noise uses the
//! Box-Muller transform on 53-bit uniforms, drawn in row-major pixel order with the
//! six bands innermost. Both generators are fully specified, so a seed reproduces
//! the same scene in any implementation.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use serde::{Deserialize, Serialize};

use crate::analytics::{Sample, SampleSet};
use crate::classify::{is_water_shaped, tc4_coefficients};
use crate::error::{Error, Result};
use crate::raster::{
    max_swir, max_vis, BandRole, ClassLabel, ClassMap, Grid, ReflectanceScene, SensorKind,
    Spectrum, DEFAULT_NODATA, DEFAULT_PIXEL_SIZE_M,
};

/// Material of a synthetic feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    Water,
    Land,
    Vegetation,
    ShadowTerrain,
    Cloud,
    IceSnow,
}

impl FeatureClass {
    const SURFACE: [FeatureClass; 4] = [
        FeatureClass::Land,
        FeatureClass::Vegetation,
        FeatureClass::Water,
        FeatureClass::ShadowTerrain,
    ];

    fn is_overlay(self) -> bool {
        matches!(self, FeatureClass::Cloud | FeatureClass::IceSnow)
    }

    fn surface_slot(self) -> usize {
        match self {
            FeatureClass::Land => 0,
            FeatureClass::Vegetation => 1,
            FeatureClass::Water => 2,
            FeatureClass::ShadowTerrain => 3,
            FeatureClass::Cloud | FeatureClass::IceSnow => unreachable!("overlay class"),
        }
    }

    /// Default reflectance template.
    pub fn default_template(self) -> Spectrum {
        match self {
            FeatureClass::Water => [0.06, 0.08, 0.05, 0.03, 0.01, 0.008],
            FeatureClass::Land => [0.10, 0.14, 0.18, 0.25, 0.30, 0.28],
            FeatureClass::Vegetation => [0.04, 0.06, 0.04, 0.40, 0.22, 0.12],
            FeatureClass::IceSnow => [0.60, 0.55, 0.50, 0.40, 0.10, 0.08],
            FeatureClass::Cloud => [0.60, 0.60, 0.60, 0.60, 0.40, 0.30],
            FeatureClass::ShadowTerrain => [0.03, 0.035, 0.03, 0.025, 0.02, 0.018],
        }
    }
}

/// Geometry in pixel coordinates: `x` grows with the column, `y` with the row, and
/// the centre of pixel `(row, col)` is `(col + 0.5, row + 0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Geometry {
    Disk {
        cx: f64,
        cy: f64,
        radius: f64,
    },
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        #[serde(default)]
        angle_deg: f64,
    },
    /// Segment from `(x0, y0)` to `(x1, y1)` thickened to `width`.
    Line {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        width: f64,
    },
    /// Disk whose radius is modulated by three seeded harmonics.
    Blob {
        cx: f64,
        cy: f64,
        radius: f64,
        #[serde(default = "default_roughness")]
        roughness: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_roughness() -> f64 {
    0.25
}

/// Precomputed form of a [`Geometry`].
enum Shape {
    Disk { cx: f64, cy: f64, r: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64, cos: f64, sin: f64 },
    Line { x0: f64, y0: f64, dx: f64, dy: f64, len2: f64, half: f64 },
    Blob { cx: f64, cy: f64, r: f64, harmonics: [(f64, f64); 3] },
}

impl Shape {
    fn new(g: &Geometry) -> Result<Self> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} must be positive, got {v}")))
            }
        };
        Ok(match *g {
            Geometry::Disk { cx, cy, radius } => {
                positive(radius, "disk radius")?;
                Shape::Disk { cx, cy, r: radius }
            }
            Geometry::Ellipse {
                cx,
                cy,
                rx,
                ry,
                angle_deg,
            } => {
                positive(rx, "ellipse rx")?;
                positive(ry, "ellipse ry")?;
                let a = angle_deg.to_radians();
                Shape::Ellipse {
                    cx,
                    cy,
                    rx,
                    ry,
                    cos: a.cos(),
                    sin: a.sin(),
                }
            }
            Geometry::Line {
                x0,
                y0,
                x1,
                y1,
                width,
            } => {
                positive(width, "line width")?;
                let (dx, dy) = (x1 - x0, y1 - y0);
                Shape::Line {
                    x0,
                    y0,
                    dx,
                    dy,
                    len2: dx * dx + dy * dy,
                    half: width / 2.0,
                }
            }
            Geometry::Blob {
                cx,
                cy,
                radius,
                roughness,
                seed,
            } => {
                positive(radius, "blob radius")?;
                if !(0.0..0.9).contains(&roughness) {
                    return Err(Error::InvalidSpec(format!(
                        "blob roughness must lie in [0, 0.9), got {roughness}"
                    )));
                }
                let mut rng = SplitMix64::seed_from_u64(seed);
                let harmonics = std::array::from_fn(|k| {
                    let amp = roughness * unit(rng.next_u64()) / (k as f64 + 2.0);
                    let phase = 2.0 * PI * unit(rng.next_u64());
                    (amp, phase)
                });
                Shape::Blob {
                    cx,
                    cy,
                    r: radius,
                    harmonics,
                }
            }
        })
    }

    /// Signed distance estimate (negative inside), in pixels.
    fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Disk { cx, cy, r } => (x - cx).hypot(y - cy) - r,
            Shape::Ellipse {
                cx,
                cy,
                rx,
                ry,
                cos,
                sin,
            } => {
                let (px, py) = (x - cx, y - cy);
                let u = px * cos + py * sin;
                let v = -px * sin + py * cos;
                ((u / rx).hypot(v / ry) - 1.0) * rx.min(ry)
            }
            Shape::Line {
                x0,
                y0,
                dx,
                dy,
                len2,
                half,
            } => {
                let t = if len2 > 0.0 {
                    (((x - x0) * dx + (y - y0) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (x - x0 - t * dx).hypot(y - y0 - t * dy) - half
            }
            Shape::Blob {
                cx,
                cy,
                r,
                harmonics,
            } => {
                let (px, py) = (x - cx, y - cy);
                let theta = py.atan2(px);
                let scale = 1.0
                    + harmonics
                        .iter()
                        .enumerate()
                        .map(|(k, &(a, p))| a * ((k as f64 + 2.0) * theta + p).cos())
                        .sum::<f64>();
                px.hypot(py) - r * scale
            }
        }
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        self.distance(x, y) < 0.0
    }

    /// Fraction of pixel `(row, col)` covered.
    fn coverage(&self, row: usize, col: usize, mixing: bool) -> f64 {
        let (cx, cy) = (col as f64 + 0.5, row as f64 + 0.5);
        if !mixing {
            return if self.inside(cx, cy) { 1.0 } else { 0.0 };
        }
        let d = self.distance(cx, cy);
        // distance estimates for ellipses and blobs are not exact; keep a wide band
        if d >= 2.0 {
            return 0.0;
        }
        if d <= -2.0 {
            return 1.0;
        }
        const N: usize = 8;
        let mut hits = 0;
        for i in 0..N {
            for j in 0..N {
                let x = col as f64 + (j as f64 + 0.5) / N as f64;
                let y = row as f64 + (i as f64 + 0.5) / N as f64;
                if self.inside(x, y) {
                    hits += 1;
                }
            }
        }
        hits as f64 / (N * N) as f64
    }

    /// Column/row bounding box `(x_min, y_min, x_max, y_max)`.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Disk { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Shape::Ellipse { cx, cy, rx, ry, .. } => {
                let m = rx.max(ry);
                (cx - m, cy - m, cx + m, cy + m)
            }
            Shape::Line {
                x0, y0, dx, dy, half, ..
            } => (
                x0.min(x0 + dx) - half,
                y0.min(y0 + dy) - half,
                x0.max(x0 + dx) + half,
                y0.max(y0 + dy) + half,
            ),
            Shape::Blob { cx, cy, r, .. } => {
                let m = 2.0 * r;
                (cx - m, cy - m, cx + m, cy + m)
            }
        }
    }
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal deviates by Box-Muller, both outputs used.
struct Gaussian {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl Gaussian {
    fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - unit(self.rng.next_u64());
        let u2 = unit(self.rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(flatten)]
    pub geometry: Geometry,
    pub class: FeatureClass,
    /// Peak coverage of any pixel; below 1 models sub-pixel features and thin cloud.
    #[serde(default = "one")]
    pub fraction: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub template: Spectrum,
    /// Per-band noise standard deviation; the scene default when absent.
    #[serde(default)]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemSpec {
    #[serde(default = "default_dem_base")]
    pub base_m: f64,
    /// Inclination of the hillside placed under every terrain-shadow feature.
    #[serde(default = "default_ramp")]
    pub ramp_deg: f64,
}

impl Default for DemSpec {
    fn default() -> Self {
        Self {
            base_m: default_dem_base(),
            ramp_deg: default_ramp(),
        }
    }
}

fn default_dem_base() -> f64 {
    150.0
}

fn default_ramp() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_pixel_size")]
    pub pixel_size_m: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scene_id")]
    pub scene_id: String,
    #[serde(default = "default_date")]
    pub date: NaiveDate,
    #[serde(default = "default_sensor")]
    pub sensor: SensorKind,
    #[serde(default = "default_background")]
    pub background: FeatureClass,
    #[serde(default)]
    pub features: Vec<Feature>,
    /// Template overrides per class.
    #[serde(default)]
    pub spectra: BTreeMap<FeatureClass, SpectrumSpec>,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default = "default_true")]
    pub mixing: bool,
    #[serde(default)]
    pub dem: DemSpec,
}

fn default_pixel_size() -> f64 {
    DEFAULT_PIXEL_SIZE_M
}

fn default_scene_id() -> String {
    "synthetic".to_string()
}

fn default_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 9, 15).expect("valid date")
}

fn default_sensor() -> SensorKind {
    SensorKind::Oli
}

fn default_background() -> FeatureClass {
    FeatureClass::Land
}

fn default_noise() -> f64 {
    0.005
}

fn default_true() -> bool {
    true
}

impl SceneSpec {
    /// A featureless land scene with default templates and noise.
    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        Self {
            width,
            height,
            pixel_size_m: default_pixel_size(),
            seed,
            scene_id: default_scene_id(),
            date: default_date(),
            sensor: default_sensor(),
            background: default_background(),
            features: Vec::new(),
            spectra: BTreeMap::new(),
            noise_std: default_noise(),
            mixing: true,
            dem: DemSpec::default(),
        }
    }

    pub fn with_feature(mut self, class: FeatureClass, geometry: Geometry) -> Self {
        self.features.push(Feature {
            geometry,
            class,
            fraction: 1.0,
        });
        self
    }

    pub fn template(&self, class: FeatureClass) -> Spectrum {
        self.spectra
            .get(&class)
            .map_or_else(|| class.default_template(), |s| s.template)
    }

    pub fn noise_for(&self, class: FeatureClass) -> f64 {
        self.spectra
            .get(&class)
            .and_then(|s| s.noise_std)
            .unwrap_or(self.noise_std)
    }

    /// Checks sizes and that the templates keep the orderings the classifier
    /// relies on.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be positive".into());
        }
        if !(self.pixel_size_m.is_finite() && self.pixel_size_m > 0.0) {
            return bad("pixel_size_m must be positive".into());
        }
        if self.background.is_overlay() {
            return bad("background must be a surface class".into());
        }
        for (class, s) in &self.spectra {
            if s.template.iter().any(|v| !(0.0..=1.5).contains(v)) {
                return bad(format!("{class:?} template outside [0, 1.5]"));
            }
            if s.noise_std.is_some_and(|n| !(n >= 0.0)) {
                return bad(format!("{class:?} noise_std must be >= 0"));
            }
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be >= 0".into());
        }
        let water = self.template(FeatureClass::Water);
        if !(max_vis(&water) > max_swir(&water)) {
            return bad("water template must have maxVIS > maxSWIR".into());
        }
        for class in [FeatureClass::Land, FeatureClass::Vegetation] {
            let t = self.template(class);
            if !(max_swir(&t) > max_vis(&t)) {
                return bad(format!("{class:?} template must have maxSWIR > maxVIS"));
            }
        }
        let shadow = self.template(FeatureClass::ShadowTerrain);
        if !is_water_shaped(&shadow) {
            return bad("terrain shadow template must look like water".into());
        }
        if max_vis(&self.template(FeatureClass::IceSnow)) < 0.15 {
            return bad("ice/snow template must have maxVIS >= 0.15".into());
        }
        let cloud = self.template(FeatureClass::Cloud);
        let tc4: f64 = cloud
            .iter()
            .zip(tc4_coefficients(self.sensor))
            .map(|(v, c)| v * c)
            .sum();
        if tc4 > -0.046 {
            return bad(format!("cloud template TC4 {tc4:.4} exceeds -0.046"));
        }
        for f in &self.features {
            Shape::new(&f.geometry)?;
            if !(f.fraction > 0.0 && f.fraction <= 1.0) {
                return bad(format!("feature fraction {} outside (0, 1]", f.fraction));
            }
        }
        if !(0.0..90.0).contains(&self.dem.ramp_deg) {
            return bad("dem ramp_deg must lie in [0, 90)".into());
        }
        Ok(())
    }
}

/// Everything produced for one synthetic acquisition.
#[derive(Debug, Clone)]
pub struct Generated {
    pub scene: ReflectanceScene,
    /// Intended class per pixel: Cloud or IceSnow where an overlay covers at least
    /// half the pixel, otherwise Water or Land by majority water fraction.
    pub truth: ClassMap,
    /// Water/Land beneath any cloud or ice, by majority water fraction.
    pub surface: ClassMap,
    /// True surface water fraction per pixel.
    pub water_fraction: Grid,
    pub dem: Grid,
}

/// Renders a scene, its truth maps and a DEM. Later features win where they overlap.
pub fn generate(spec: &SceneSpec) -> Result<Generated> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let shapes: Vec<(Shape, &Feature)> = spec
        .features
        .iter()
        .map(|f| Ok((Shape::new(&f.geometry)?, f)))
        .collect::<Result<_>>()?;

    let surface_templates: [Spectrum; 4] = FeatureClass::SURFACE.map(|c| spec.template(c));
    let surface_noise: [f64; 4] = FeatureClass::SURFACE.map(|c| spec.noise_for(c));
    let cloud_t = spec.template(FeatureClass::Cloud);
    let ice_t = spec.template(FeatureClass::IceSnow);
    let (cloud_n, ice_n) = (
        spec.noise_for(FeatureClass::Cloud),
        spec.noise_for(FeatureClass::IceSnow),
    );

    let mut gauss = Gaussian::new(spec.seed);
    let mut bands = vec![Vec::with_capacity(w * h); 6];
    let mut truth = Vec::with_capacity(w * h);
    let mut surface = Vec::with_capacity(w * h);
    let mut water_fraction = Vec::with_capacity(w * h);

    for row in 0..h {
        for col in 0..w {
            let mut comp = [0.0f64; 4];
            comp[spec.background.surface_slot()] = 1.0;
            let (mut cloud, mut ice) = (0.0f64, 0.0f64);
            for (shape, f) in &shapes {
                let a = shape.coverage(row, col, spec.mixing) * f.fraction;
                if a == 0.0 {
                    continue;
                }
                if f.class.is_overlay() {
                    cloud *= 1.0 - a;
                    ice *= 1.0 - a;
                    if f.class == FeatureClass::Cloud {
                        cloud += a;
                    } else {
                        ice += a;
                    }
                } else {
                    for v in comp.iter_mut() {
                        *v *= 1.0 - a;
                    }
                    comp[f.class.surface_slot()] += a;
                }
            }
            let overlay = cloud + ice;
            let ground = 1.0 - overlay;
            let std = ground
                * comp
                    .iter()
                    .zip(&surface_noise)
                    .map(|(c, n)| c * n)
                    .sum::<f64>()
                + cloud * cloud_n
                + ice * ice_n;
            for (k, band) in bands.iter_mut().enumerate() {
                let clean = ground
                    * comp
                        .iter()
                        .zip(&surface_templates)
                        .map(|(c, t)| c * t[k])
                        .sum::<f64>()
                    + cloud * cloud_t[k]
                    + ice * ice_t[k];
                let v = (clean + std * gauss.next()).max(0.0);
                band.push(v as f32);
            }
            let wf = comp[FeatureClass::Water.surface_slot()];
            let under = if wf >= 0.5 {
                ClassLabel::Water
            } else {
                ClassLabel::Land
            };
            let label = if overlay >= 0.5 {
                if cloud >= ice {
                    ClassLabel::Cloud
                } else {
                    ClassLabel::IceSnow
                }
            } else {
                under
            };
            truth.push(label);
            surface.push(under);
            water_fraction.push(wf as f32);
        }
    }

    let grid = |values: Vec<f32>| Grid::new(w, h, spec.pixel_size_m, values, DEFAULT_NODATA);
    let scene = ReflectanceScene::new(
        spec.scene_id.clone(),
        spec.date,
        spec.sensor,
        BandRole::ALL
            .iter()
            .zip(bands)
            .map(|(&r, v)| Ok((r, grid(v)?)))
            .collect::<Result<_>>()?,
    )?;
    let map = |labels| ClassMap::new(spec.scene_id.clone(), spec.date, w, h, spec.pixel_size_m, labels);
    Ok(Generated {
        scene,
        truth: map(truth)?,
        surface: map(surface)?,
        water_fraction: grid(water_fraction)?,
        dem: synth_dem(spec, &shapes)?,
    })
}

/// Flat terrain plus an eastward-rising hillside under each terrain-shadow feature.
/// The hillside extends three pixels past the feature so the slope kernel never
/// straddles its edge for any covered pixel.
fn synth_dem(spec: &SceneSpec, shapes: &[(Shape, &Feature)]) -> Result<Grid> {
    let (w, h) = (spec.width, spec.height);
    let mut z = vec![spec.dem.base_m; w * h];
    let rise = spec.dem.ramp_deg.to_radians().tan() * spec.pixel_size_m;
    for (shape, f) in shapes {
        if f.class != FeatureClass::ShadowTerrain {
            continue;
        }
        let (x0, y0, x1, y1) = shape.bounds();
        let c0 = (x0.floor() - 3.0).max(0.0) as usize;
        let r0 = (y0.floor() - 3.0).max(0.0) as usize;
        let c1 = ((x1.ceil() + 3.0) as usize).min(w);
        let r1 = ((y1.ceil() + 3.0) as usize).min(h);
        for r in r0..r1 {
            for c in c0..c1 {
                z[r * w + c] += rise * (c - c0) as f64;
            }
        }
    }
    Grid::new(
        w,
        h,
        spec.pixel_size_m,
        z.into_iter().map(|v| v as f32).collect(),
        DEFAULT_NODATA,
    )
}

/// `n` distinct random pixels with Water/Land reference labels from `surface`.
pub fn sample_points(surface: &ClassMap, n: usize, seed: u64) -> Result<SampleSet> {
    let total = surface.labels().len();
    let eligible = surface.labels().iter().filter(|l| l.is_valid()).count();
    if n > eligible {
        return Err(Error::InvalidSpec(format!(
            "asked for {n} samples but only {eligible} pixels are labelled"
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let i = (rng.next_u64() % total as u64) as usize;
        let label = surface.labels()[i];
        if !label.is_valid() || !seen.insert(i) {
            continue;
        }
        samples.push(Sample {
            row: i / surface.width(),
            col: i % surface.width(),
            truth_water: label == ClassLabel::Water,
        });
    }
    Ok(SampleSet { samples })
}

/// A lake whose radius follows a skewed seasonal cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalSpec {
    /// Scene size, templates and extra features (drawn over the lake).
    pub base: SceneSpec,
    pub start_year: i32,
    pub years: u32,
    #[serde(default = "default_per_year")]
    pub scenes_per_year: u32,
    /// Lake centre in pixel coordinates; the scene centre when absent.
    #[serde(default)]
    pub center: Option<(f64, f64)>,
    pub mean_radius_px: f64,
    pub amplitude_px: f64,
    /// Day of year of the largest extent (258 = 15 September in common years).
    #[serde(default = "default_peak")]
    pub peak_day_of_year: u32,
    /// Day of year of the smallest extent (137 = 17 May in common years).
    #[serde(default = "default_trough")]
    pub trough_day_of_year: u32,
    /// Standard deviation of seeded per-scene radius jitter.
    #[serde(default)]
    pub radius_noise_px: f64,
}

fn default_per_year() -> u32 {
    12
}

fn default_peak() -> u32 {
    258
}

fn default_trough() -> u32 {
    137
}

impl SeasonalSpec {
    /// Acquisition dates: `scenes_per_year` evenly spaced days in every year.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let n = self.scenes_per_year.max(1);
        let mut out = Vec::new();
        for y in 0..self.years {
            let year = self.start_year + y as i32;
            for k in 0..n {
                let doy = ((f64::from(k) + 0.5) * 365.0 / f64::from(n)).floor() as u32 + 1;
                out.push(NaiveDate::from_yo_opt(year, doy).expect("day within year"));
            }
        }
        out
    }

    /// Noise-free lake radius on a given day of year. The cycle falls from the
    /// peak to the trough, then rises back, each leg a half cosine.
    pub fn radius_on(&self, day_of_year: u32) -> f64 {
        let period = 365.0;
        let peak = f64::from(self.peak_day_of_year);
        let fall = (f64::from(self.trough_day_of_year) - peak).rem_euclid(period);
        let rise = period - fall;
        let d = (f64::from(day_of_year) - peak).rem_euclid(period);
        let phase = if d < fall {
            d / fall
        } else {
            1.0 - (d - fall) / rise
        };
        self.mean_radius_px + self.amplitude_px * (PI * phase).cos()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.years == 0 || self.scenes_per_year == 0 {
            return bad("years and scenes_per_year must be positive");
        }
        if !(self.mean_radius_px > self.amplitude_px.abs() && self.amplitude_px >= 0.0) {
            return bad("need mean_radius_px > amplitude_px >= 0");
        }
        if self.peak_day_of_year == self.trough_day_of_year
            || !(1..=365).contains(&self.peak_day_of_year)
            || !(1..=365).contains(&self.trough_day_of_year)
        {
            return bad("peak and trough must be distinct days in 1..=365");
        }
        if !(self.radius_noise_px >= 0.0) {
            return bad("radius_noise_px must be >= 0");
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SeasonalScene {
    pub generated: Generated,
    pub radius_px: f64,
    /// Truth water pixels times pixel area.
    pub true_area_km2: f64,
}

/// One synthetic scene per date. Each scene's seed is the next output of a
/// SplitMix64 stream seeded with `base.seed`.
pub fn seasonal_stack(spec: &SeasonalSpec) -> Result<Vec<SeasonalScene>> {
    spec.validate()?;
    let base = &spec.base;
    let (cx, cy) = spec
        .center
        .unwrap_or((base.width as f64 / 2.0, base.height as f64 / 2.0));
    let mut seeds = SplitMix64::seed_from_u64(base.seed);
    let mut jitter = Gaussian::new(base.seed ^ 0x5EA5_0A11);
    spec.dates()
        .into_iter()
        .map(|date| {
            let mut radius = spec.radius_on(date.ordinal().min(365));
            if spec.radius_noise_px > 0.0 {
                radius += spec.radius_noise_px * jitter.next();
            }
            let mut s = base.clone();
            s.seed = seeds.next_u64();
            s.date = date;
            s.scene_id = format!("S{}", date.format("%Y%m%d"));
            s.features.insert(
                0,
                Feature {
                    geometry: Geometry::Disk {
                        cx,
                        cy,
                        radius: radius.max(0.5),
                    },
                    class: FeatureClass::Water,
                    fraction: 1.0,
                },
            );
            let generated = generate(&s)?;
            let true_area_km2 =
                generated.truth.count(ClassLabel::Water) as f64 * generated.truth.pixel_area_km2();
            Ok(SeasonalScene {
                generated,
                radius_px: radius,
                true_area_km2,
            })
        })
        .collect()
}

/// Input of the `synth` command: one scene, a dated series of one scene layout,
/// or a seasonal lake archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveSpec {
    #[serde(default)]
    pub scene: Option<SceneSpec>,
    /// Dates of a series sharing `scene`'s layout.
    #[serde(default)]
    pub dates: Vec<ArchiveDate>,
    #[serde(default)]
    pub seasonal: Option<SeasonalSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveDate {
    pub date: NaiveDate,
    #[serde(default)]
    pub scene_id: Option<String>,
    #[serde(default)]
    pub sensor: Option<SensorKind>,
    /// Extra features for this date only (clouds, ice); drawn after the shared ones.
    #[serde(default)]
    pub features: Vec<Feature>,
}

impl ArchiveSpec {
    /// Reads a JSON spec; parse errors carry the line and column.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Generates every scene of an archive. All scenes share the DEM of the base layout.
pub fn generate_archive(spec: &ArchiveSpec) -> Result<Vec<Generated>> {
    match (&spec.scene, &spec.seasonal) {
        (Some(_), Some(_)) | (None, None) => Err(Error::InvalidSpec(
            "give exactly one of 'scene' or 'seasonal'".into(),
        )),
        (None, Some(seasonal)) => {
            if !spec.dates.is_empty() {
                return Err(Error::InvalidSpec("'dates' only applies to 'scene'".into()));
            }
            Ok(seasonal_stack(seasonal)?
                .into_iter()
                .map(|s| s.generated)
                .collect())
        }
        (Some(scene), None) if spec.dates.is_empty() => Ok(vec![generate(scene)?]),
        (Some(scene), None) => {
            let mut seeds = SplitMix64::seed_from_u64(scene.seed);
            spec.dates
                .iter()
                .map(|d| {
                    if d
                        .features
                        .iter()
                        .any(|f| f.class == FeatureClass::ShadowTerrain)
                    {
                        return Err(Error::InvalidSpec(
                            "terrain shadow must be part of the shared layout".into(),
                        ));
                    }
                    let mut s = scene.clone();
                    s.seed = seeds.next_u64();
                    s.date = d.date;
                    s.scene_id = d
                        .scene_id
                        .clone()
                        .unwrap_or_else(|| format!("S{}", d.date.format("%Y%m%d")));
                    if let Some(sensor) = d.sensor {
                        s.sensor = sensor;
                    }
                    s.features.extend(d.features.iter().cloned());
                    generate(&s)
                })
                .collect()
        }
    }
}
