//! Raster grid, scene, label and analytics record types shared by every stage.
//!
//! All grids in one run are assumed pixel-aligned on the same footprint; there is
//! no projection or resampling support.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Landsat TM/OLI pixel edge length.
pub const DEFAULT_PIXEL_SIZE_M: f64 = 30.0;

/// Sentinel written into float grids for missing samples.
pub const DEFAULT_NODATA: f32 = -9999.0;

/// Tolerant upper bound for surface reflectance (calibration overshoot over bright targets).
pub const MAX_VALID_REFLECTANCE: f32 = 1.5;

/// Square kilometres covered by one square pixel of the given edge length.
pub fn pixel_area_km2(pixel_size_m: f64) -> f64 {
    pixel_size_m * pixel_size_m / 1.0e6
}

fn check_pixel_size(pixel_size_m: f64) -> Result<()> {
    if pixel_size_m.is_finite() && pixel_size_m > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPixelSize(pixel_size_m))
    }
}

fn check_len(width: usize, height: usize, actual: usize) -> Result<()> {
    let expected = width * height;
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            width,
            height,
            expected,
            actual,
        })
    }
}

/// Single-band raster of `f32` samples in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    pixel_size_m: f64,
    values: Vec<f32>,
    nodata: f32,
}

impl Grid {
    pub fn new(
        width: usize,
        height: usize,
        pixel_size_m: f64,
        values: Vec<f32>,
        nodata: f32,
    ) -> Result<Self> {
        check_pixel_size(pixel_size_m)?;
        check_len(width, height, values.len())?;
        Ok(Self {
            width,
            height,
            pixel_size_m,
            values,
            nodata,
        })
    }

    /// A grid with every sample set to `value`.
    pub fn filled(width: usize, height: usize, pixel_size_m: f64, value: f32) -> Result<Self> {
        Self::new(
            width,
            height,
            pixel_size_m,
            vec![value; width * height],
            DEFAULT_NODATA,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn pixel_size_m(&self) -> f64 {
        self.pixel_size_m
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    /// NaN and the nodata sentinel both count as missing.
    pub fn is_nodata(&self, value: f32) -> bool {
        value.is_nan() || value == self.nodata
    }

    pub fn is_valid_at(&self, index: usize) -> bool {
        !self.is_nodata(self.values[index])
    }

    pub fn pixel_area_km2(&self) -> f64 {
        pixel_area_km2(self.pixel_size_m)
    }

    pub fn shape(&self) -> Shape {
        Shape {
            width: self.width,
            height: self.height,
        }
    }

    /// Same dimensions and pixel size.
    pub fn is_aligned_with(&self, other: &Grid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pixel_size_m == other.pixel_size_m
    }
}

/// Width and height, used for alignment checks and error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn ensure_eq(self, other: Shape) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Boolean raster (water set, cloud set, region of interest, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_len(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub(crate) fn from_fn(width: usize, height: usize, f: impl FnMut(usize) -> bool) -> Self {
        Self {
            width,
            height,
            data: (0..width * height).map(f).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> Shape {
        Shape {
            width: self.width,
            height: self.height,
        }
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Pixel-wise conjunction; shapes must match.
    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.shape().ensure_eq(other.shape())?;
        Ok(Mask::from_fn(self.width, self.height, |i| {
            self.data[i] && other.data[i]
        }))
    }
}

/// The six reflectance bands taking part in any computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BandRole {
    Blue,
    Green,
    Red,
    Nir,
    Swir1,
    Swir2,
}

impl BandRole {
    /// Canonical band order for spectra and band-sequential files.
    pub const ALL: [BandRole; 6] = [
        BandRole::Blue,
        BandRole::Green,
        BandRole::Red,
        BandRole::Nir,
        BandRole::Swir1,
        BandRole::Swir2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BandRole::Blue => "blue",
            BandRole::Green => "green",
            BandRole::Red => "red",
            BandRole::Nir => "nir",
            BandRole::Swir1 => "swir1",
            BandRole::Swir2 => "swir2",
        }
    }
}

impl fmt::Display for BandRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BandRole::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownBand(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    /// Landsat-5 Thematic Mapper.
    Tm,
    /// Landsat-8 Operational Land Imager.
    Oli,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Tm => "TM",
            SensorKind::Oli => "OLI",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TM" => Ok(SensorKind::Tm),
            "OLI" => Ok(SensorKind::Oli),
            _ => Err(Error::UnknownSensor(s.to_string())),
        }
    }
}

impl Serialize for SensorKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SensorKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Reflectances in [`BandRole::ALL`] order.
pub type Spectrum = [f64; 6];

/// Sum over the six bands; used to rank pixels from darkest to brightest.
pub fn total_reflectance(s: &Spectrum) -> f64 {
    s.iter().sum()
}

/// Maximum of Blue, Green and Red.
pub fn max_vis(s: &Spectrum) -> f64 {
    s[0].max(s[1]).max(s[2])
}

/// Maximum of SWIR1 and SWIR2.
pub fn max_swir(s: &Spectrum) -> f64 {
    s[4].max(s[5])
}

/// One acquisition: six co-registered reflectance bands.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceScene {
    id: String,
    date: NaiveDate,
    sensor: SensorKind,
    bands: [Grid; 6],
}

impl ReflectanceScene {
    /// Builds a scene from `(role, grid)` pairs in any order. Every role must be
    /// present exactly once and all grids must share dimensions and pixel size.
    pub fn new(
        id: impl Into<String>,
        date: NaiveDate,
        sensor: SensorKind,
        bands: Vec<(BandRole, Grid)>,
    ) -> Result<Self> {
        let mut slots: [Option<Grid>; 6] = Default::default();
        for (role, grid) in bands {
            if slots[role.index()].replace(grid).is_some() {
                return Err(Error::DuplicateBand(role));
            }
        }
        for role in BandRole::ALL {
            if slots[role.index()].is_none() {
                return Err(Error::MissingBand(role));
            }
        }
        let bands = slots.map(|g| g.expect("checked above"));
        let first = &bands[0];
        for b in &bands[1..] {
            first.shape().ensure_eq(b.shape())?;
            if b.pixel_size_m() != first.pixel_size_m() {
                return Err(Error::DimensionMismatch {
                    left: format!("{} m pixels", first.pixel_size_m()),
                    right: format!("{} m pixels", b.pixel_size_m()),
                });
            }
        }
        Ok(Self {
            id: id.into(),
            date,
            sensor,
            bands,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn sensor(&self) -> SensorKind {
        self.sensor
    }

    pub fn band(&self, role: BandRole) -> &Grid {
        &self.bands[role.index()]
    }

    pub fn bands(&self) -> &[Grid; 6] {
        &self.bands
    }

    pub fn width(&self) -> usize {
        self.bands[0].width()
    }

    pub fn height(&self) -> usize {
        self.bands[0].height()
    }

    pub fn shape(&self) -> Shape {
        self.bands[0].shape()
    }

    pub fn pixel_size_m(&self) -> f64 {
        self.bands[0].pixel_size_m()
    }

    /// Spectrum at a pixel, or `None` when any band is nodata or outside
    /// `[0, MAX_VALID_REFLECTANCE]`.
    pub fn spectrum(&self, index: usize) -> Option<Spectrum> {
        let mut out = [0.0; 6];
        for (slot, band) in out.iter_mut().zip(&self.bands) {
            let v = band.values()[index];
            if band.is_nodata(v) || !(0.0..=MAX_VALID_REFLECTANCE).contains(&v) {
                return None;
            }
            *slot = f64::from(v);
        }
        Some(out)
    }

    /// Pixels whose spectrum is complete and in range.
    pub fn valid_mask(&self) -> Mask {
        Mask::from_fn(self.width(), self.height(), |i| self.spectrum(i).is_some())
    }
}

/// Per-pixel class with its fixed 8-bit file code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ClassLabel {
    Land = 0,
    Water = 1,
    Cloud = 2,
    IceSnow = 3,
    NoData = 255,
}

impl ClassLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ClassLabel::Land),
            1 => Ok(ClassLabel::Water),
            2 => Ok(ClassLabel::Cloud),
            3 => Ok(ClassLabel::IceSnow),
            255 => Ok(ClassLabel::NoData),
            other => Err(Error::UnknownLabelCode(other)),
        }
    }

    /// Land and Water are observations; everything else is not.
    pub fn is_valid(self) -> bool {
        matches!(self, ClassLabel::Land | ClassLabel::Water)
    }

    /// Cloud and IceSnow are gaps to be filled from neighbouring dates.
    pub fn is_gap(self) -> bool {
        matches!(self, ClassLabel::Cloud | ClassLabel::IceSnow)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassLabel::Land => "land",
            ClassLabel::Water => "water",
            ClassLabel::Cloud => "cloud",
            ClassLabel::IceSnow => "ice_snow",
            ClassLabel::NoData => "nodata",
        };
        f.write_str(s)
    }
}

/// Classification result for one date.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    pub scene_id: String,
    pub date: NaiveDate,
    width: usize,
    height: usize,
    pixel_size_m: f64,
    labels: Vec<ClassLabel>,
}

impl ClassMap {
    pub fn new(
        scene_id: impl Into<String>,
        date: NaiveDate,
        width: usize,
        height: usize,
        pixel_size_m: f64,
        labels: Vec<ClassLabel>,
    ) -> Result<Self> {
        check_pixel_size(pixel_size_m)?;
        check_len(width, height, labels.len())?;
        Ok(Self {
            scene_id: scene_id.into(),
            date,
            width,
            height,
            pixel_size_m,
            labels,
        })
    }

    pub fn filled(
        scene_id: impl Into<String>,
        date: NaiveDate,
        width: usize,
        height: usize,
        pixel_size_m: f64,
        label: ClassLabel,
    ) -> Result<Self> {
        Self::new(
            scene_id,
            date,
            width,
            height,
            pixel_size_m,
            vec![label; width * height],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> Shape {
        Shape {
            width: self.width,
            height: self.height,
        }
    }

    pub fn pixel_size_m(&self) -> f64 {
        self.pixel_size_m
    }

    pub fn pixel_area_km2(&self) -> f64 {
        pixel_area_km2(self.pixel_size_m)
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [ClassLabel] {
        &mut self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> ClassLabel {
        self.labels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, label: ClassLabel) {
        self.labels[row * self.width + col] = label;
    }

    /// Pixels labelled `label`.
    pub fn mask_of(&self, label: ClassLabel) -> Mask {
        Mask::from_fn(self.width, self.height, |i| self.labels[i] == label)
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Two-class validation counts with Water as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// One row of the per-date analytics series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaRecord {
    pub date: NaiveDate,
    pub water_area_km2: f64,
    /// `None` when the date has no water pixels in the region of interest.
    pub division_index: Option<f64>,
    pub valid_fraction: f64,
}
