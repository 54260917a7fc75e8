//! File formats.
//!
//! Every raster is a raw little-endian, row-major data file with a JSON sidecar
//! next to it (`<data path>.json`):
//!
//! ```json
//! {"width": 2, "height": 2, "pixel_size_m": 30.0, "nodata_value": -9999.0,
//!  "bands": ["blue", "green", "red", "nir", "swir1", "swir2"],
//!  "sensor": "OLI", "date": "2018-06-01", "scene_id": "LC08_0601"}
//! ```
//!
//! * scenes: `f32` samples, band-sequential in the order listed in `bands`
//! * float grids (DEM, coverage, abundance, patch ids): one `f32` band
//! * class maps: one byte per pixel holding the label code, `bands: ["class"]`
//! * masks (region of interest): one byte per pixel, 0 or 1, `bands: ["mask"]`
//!
//! Tables are CSV: the scene manifest (`scene_id,date,sensor,path`), validation
//! samples (`row,col,truth`) and the area series
//! (`date,water_area_km2,division_index,valid_fraction`).

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::analytics::{Sample, SampleSet};
use crate::error::{Error, Result};
use crate::raster::{
    AreaRecord, BandRole, ClassLabel, ClassMap, Grid, Mask, ReflectanceScene, SensorKind,
};

/// Extension of a scene's data file relative to its path prefix.
pub const SCENE_EXT: &str = "f32";

const CLASS_BAND: &str = "class";
const MASK_BAND: &str = "mask";
const CLASS_NODATA: f32 = 255.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    width: usize,
    height: usize,
    pixel_size_m: f64,
    nodata_value: f32,
    bands: Vec<String>,
    sensor: Option<String>,
    date: Option<NaiveDate>,
    scene_id: Option<String>,
}

/// Path of the JSON sidecar for a data file.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Data file of the scene stored under `prefix`.
pub fn scene_data_path(prefix: &Path) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(SCENE_EXT);
    PathBuf::from(s)
}

/// Writes via a temporary sibling and a rename so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_header(data: &Path, header: &Header) -> Result<()> {
    let mut text = serde_json::to_string_pretty(header)?;
    text.push('\n');
    write_atomic(&sidecar_path(data), text.as_bytes())
}

fn read_header(data: &Path) -> Result<Header> {
    let path = sidecar_path(data);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

fn check_finite_nodata(path: &Path, nodata: f32) -> Result<()> {
    if nodata.is_finite() {
        Ok(())
    } else {
        Err(Error::format(path, "nodata value must be finite to be stored"))
    }
}

fn f32_bytes<'a>(values: impl Iterator<Item = &'a f32>) -> Vec<u8> {
    values.flat_map(|v| v.to_le_bytes()).collect()
}

fn decode_f32(path: &Path, bytes: &[u8], width: usize, height: usize, bands: usize) -> Result<Vec<f32>> {
    let expected = width * height * bands;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(
            path,
            format!("{} bytes is not a whole number of f32 samples", bytes.len()),
        ));
    }
    if bytes.len() / 4 != expected {
        return Err(Error::LengthMismatch {
            width,
            height,
            expected,
            actual: bytes.len() / 4,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn check_len_bytes(width: usize, height: usize, actual: usize) -> Result<()> {
    if width * height == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            width,
            height,
            expected: width * height,
            actual,
        })
    }
}

/// Writes the six bands of `scene` under `prefix` (`<prefix>.f32` + sidecar).
pub fn write_scene(prefix: &Path, scene: &ReflectanceScene) -> Result<()> {
    let data = scene_data_path(prefix);
    let nodata = scene.band(BandRole::Blue).nodata();
    for role in BandRole::ALL {
        check_finite_nodata(&data, scene.band(role).nodata())?;
        if scene.band(role).nodata() != nodata {
            return Err(Error::format(&data, "bands disagree on the nodata value"));
        }
    }
    let bytes = f32_bytes(BandRole::ALL.iter().flat_map(|&r| scene.band(r).values()));
    write_atomic(&data, &bytes)?;
    write_header(
        &data,
        &Header {
            width: scene.width(),
            height: scene.height(),
            pixel_size_m: scene.pixel_size_m(),
            nodata_value: nodata,
            bands: BandRole::ALL.iter().map(|r| r.as_str().to_string()).collect(),
            sensor: Some(scene.sensor().as_str().to_string()),
            date: Some(scene.date()),
            scene_id: Some(scene.id().to_string()),
        },
    )
}

/// Reads a scene written by [`write_scene`]. A `coastal` band is skipped.
pub fn read_scene(prefix: &Path) -> Result<ReflectanceScene> {
    let data = scene_data_path(prefix);
    let h = read_header(&data)?;
    let sensor: SensorKind = h
        .sensor
        .as_deref()
        .ok_or_else(|| Error::format(sidecar_path(&data), "missing sensor"))?
        .parse()?;
    let date = h
        .date
        .ok_or_else(|| Error::format(sidecar_path(&data), "missing date"))?;
    let id = h.scene_id.clone().unwrap_or_else(|| {
        prefix
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let samples = decode_f32(&data, &read_bytes(&data)?, h.width, h.height, h.bands.len())?;
    let n = h.width * h.height;
    let mut bands = Vec::with_capacity(6);
    for (k, name) in h.bands.iter().enumerate() {
        if name.eq_ignore_ascii_case("coastal") {
            continue;
        }
        let role: BandRole = name.parse()?;
        let grid = Grid::new(
            h.width,
            h.height,
            h.pixel_size_m,
            samples[k * n..(k + 1) * n].to_vec(),
            h.nodata_value,
        )?;
        bands.push((role, grid));
    }
    ReflectanceScene::new(id, date, sensor, bands)
}

/// Writes a single-band float grid. `band` names the quantity in the sidecar.
pub fn write_grid(path: &Path, grid: &Grid, band: &str) -> Result<()> {
    check_finite_nodata(path, grid.nodata())?;
    write_atomic(path, &f32_bytes(grid.values().iter()))?;
    write_header(
        path,
        &Header {
            width: grid.width(),
            height: grid.height(),
            pixel_size_m: grid.pixel_size_m(),
            nodata_value: grid.nodata(),
            bands: vec![band.to_string()],
            sensor: None,
            date: None,
            scene_id: None,
        },
    )
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    let h = read_header(path)?;
    if h.bands.len() != 1 {
        return Err(Error::format(
            sidecar_path(path),
            format!("expected one band, found {}", h.bands.len()),
        ));
    }
    let values = decode_f32(path, &read_bytes(path)?, h.width, h.height, 1)?;
    Grid::new(h.width, h.height, h.pixel_size_m, values, h.nodata_value)
}

pub fn write_classmap(path: &Path, map: &ClassMap) -> Result<()> {
    let bytes: Vec<u8> = map.labels().iter().map(|l| l.code()).collect();
    write_atomic(path, &bytes)?;
    write_header(
        path,
        &Header {
            width: map.width(),
            height: map.height(),
            pixel_size_m: map.pixel_size_m(),
            nodata_value: CLASS_NODATA,
            bands: vec![CLASS_BAND.to_string()],
            sensor: None,
            date: Some(map.date),
            scene_id: Some(map.scene_id.clone()),
        },
    )
}

pub fn read_classmap(path: &Path) -> Result<ClassMap> {
    let h = read_header(path)?;
    if h.bands != [CLASS_BAND] {
        return Err(Error::format(sidecar_path(path), "not a class map"));
    }
    let bytes = read_bytes(path)?;
    check_len_bytes(h.width, h.height, bytes.len())?;
    let labels = bytes
        .iter()
        .map(|&b| ClassLabel::from_code(b))
        .collect::<Result<Vec<_>>>()?;
    let date = h
        .date
        .ok_or_else(|| Error::format(sidecar_path(path), "missing date"))?;
    let id = h.scene_id.unwrap_or_default();
    ClassMap::new(id, date, h.width, h.height, h.pixel_size_m, labels)
}

pub fn write_mask(path: &Path, mask: &Mask, pixel_size_m: f64) -> Result<()> {
    let bytes: Vec<u8> = mask.data().iter().map(|&b| u8::from(b)).collect();
    write_atomic(path, &bytes)?;
    write_header(
        path,
        &Header {
            width: mask.width(),
            height: mask.height(),
            pixel_size_m,
            nodata_value: CLASS_NODATA,
            bands: vec![MASK_BAND.to_string()],
            sensor: None,
            date: None,
            scene_id: None,
        },
    )
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    let h = read_header(path)?;
    if h.bands != [MASK_BAND] {
        return Err(Error::format(sidecar_path(path), "not a mask"));
    }
    let bytes = read_bytes(path)?;
    check_len_bytes(h.width, h.height, bytes.len())?;
    let bits = bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(path, format!("mask byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Mask::new(h.width, h.height, bits)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub date: NaiveDate,
    pub sensor: SensorKind,
    /// Scene path prefix; relative entries are resolved against the manifest's directory.
    pub path: PathBuf,
}

/// Scene archive listing, ordered by date.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SceneManifest {
    pub entries: Vec<ManifestEntry>,
    pub dem_path: Option<PathBuf>,
    pub roi_path: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    scene_id: String,
    date: NaiveDate,
    sensor: String,
    path: String,
}

impl SceneManifest {
    /// Sorts by date and rejects repeated scene ids.
    pub fn new(mut entries: Vec<ManifestEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.date);
        let mut ids: Vec<&str> = entries.iter().map(|e| e.scene_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(pair) = ids.windows(2).find(|p| p[0] == p[1]) {
            return Err(Error::DuplicateScene(pair[0].to_string()));
        }
        Ok(Self {
            entries,
            dem_path: None,
            roi_path: None,
        })
    }
}

pub fn read_manifest(path: &Path) -> Result<SceneManifest> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["scene_id", "date", "sensor", "path"] {
        return Err(Error::format(path, "header must be scene_id,date,sensor,path"));
    }
    let mut entries = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row?;
        let p = PathBuf::from(&row.path);
        entries.push(ManifestEntry {
            scene_id: row.scene_id,
            date: row.date,
            sensor: row.sensor.parse()?,
            path: if p.is_absolute() { p } else { base.join(p) },
        });
    }
    SceneManifest::new(entries)
}

/// Writes the manifest; entry paths are stored as given.
pub fn write_manifest(path: &Path, manifest: &SceneManifest) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &manifest.entries {
        w.serialize(ManifestRow {
            scene_id: e.scene_id.clone(),
            date: e.date,
            sensor: e.sensor.as_str().to_string(),
            path: e.path.to_string_lossy().into_owned(),
        })?;
    }
    if manifest.entries.is_empty() {
        w.write_record(["scene_id", "date", "sensor", "path"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Area series as CSV; dates must be strictly increasing. An undefined division
/// index is written as an empty field.
pub fn write_area_csv(path: &Path, records: &[AreaRecord]) -> Result<()> {
    for pair in records.windows(2) {
        if pair[1].date <= pair[0].date {
            return Err(Error::Unsorted(pair[1].date, pair[0].date));
        }
    }
    let mut out = String::from("date,water_area_km2,division_index,valid_fraction\n");
    for r in records {
        let division = r
            .division_index
            .map(|d| format!("{d:.6}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{:.6},{},{:.6}\n",
            r.date.format("%Y-%m-%d"),
            r.water_area_km2,
            division,
            r.valid_fraction
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_area_csv(path: &Path) -> Result<Vec<AreaRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::format(path, format!("bad number '{}'", field(i))))
        };
        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d")
            .map_err(|e| Error::format(path, e.to_string()))?;
        out.push(AreaRecord {
            date,
            water_area_km2: num(1)?,
            division_index: if field(2).is_empty() { None } else { Some(num(2)?) },
            valid_fraction: num(3)?,
        });
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut samples = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::format(path, format!("row {}: {what}", n + 2));
        if row.len() != 3 {
            return Err(bad("expected row,col,truth"));
        }
        let r: usize = row[0].parse().map_err(|_| bad("bad row index"))?;
        let c: usize = row[1].parse().map_err(|_| bad("bad column index"))?;
        let truth_water = match row[2].to_ascii_lowercase().as_str() {
            "water" | "w" | "1" => true,
            "land" | "l" | "0" => false,
            _ => return Err(bad("truth must be water or land")),
        };
        samples.push(Sample {
            row: r,
            col: c,
            truth_water,
        });
    }
    Ok(SampleSet { samples })
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut out = String::from("row,col,truth\n");
    for s in &samples.samples {
        let truth = if s.truth_water { "water" } else { "land" };
        out.push_str(&format!("{},{},{truth}\n", s.row, s.col));
    }
    write_atomic(path, out.as_bytes())
}
