//! Python bindings: scenes, class maps and the main processing steps.
//!
//! Build with `cargo build -p aquamap-python --release` and copy
//! `libaquamap_py.so` to `aquamap.so` somewhere on `sys.path`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use aquamap::analytics;
use aquamap::classify;
use aquamap::io;
use aquamap::pipeline;
use aquamap::synth::{self, ArchiveSpec, SceneSpec};
use aquamap::unmix;
use aquamap::{ClassLabel, PipelineConfig, SensorKind, Spectrum};

fn to_py(e: aquamap::Error) -> PyErr {
    match e {
        aquamap::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn spectrum(v: Vec<f64>) -> PyResult<Spectrum> {
    v.try_into()
        .map_err(|v: Vec<f64>| PyValueError::new_err(format!("expected 6 bands, got {}", v.len())))
}

/// A single-band float raster (DEM, coverage rate, abundance).
#[pyclass(name = "Grid", module = "aquamap", from_py_object)]
#[derive(Clone)]
struct PyGrid(aquamap::Grid);

#[pymethods]
impl PyGrid {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        io::read_grid(&path).map(Self).map_err(to_py)
    }

    fn write(&self, path: PathBuf, band: &str) -> PyResult<()> {
        io::write_grid(&path, &self.0, band).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn nodata(&self) -> f32 {
        self.0.nodata()
    }

    /// Row-major samples.
    fn values(&self) -> Vec<f32> {
        self.0.values().to_vec()
    }

    fn get(&self, row: usize, col: usize) -> f32 {
        self.0.get(row, col)
    }

    /// Terrain slope in degrees.
    fn slope(&self) -> Self {
        Self(classify::slope_from_dem(&self.0))
    }
}

/// A six-band reflectance scene.
#[pyclass(name = "Scene", module = "aquamap", from_py_object)]
#[derive(Clone)]
struct PyScene(aquamap::ReflectanceScene);

#[pymethods]
impl PyScene {
    /// Reads the scene stored under a path prefix (`<prefix>.f32` + sidecar).
    #[staticmethod]
    fn read(prefix: PathBuf) -> PyResult<Self> {
        io::read_scene(&prefix).map(Self).map_err(to_py)
    }

    fn write(&self, prefix: PathBuf) -> PyResult<()> {
        io::write_scene(&prefix, &self.0).map_err(to_py)
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id().to_string()
    }

    /// ISO-8601 acquisition date.
    #[getter]
    fn date(&self) -> String {
        self.0.date().to_string()
    }

    #[getter]
    fn sensor(&self) -> &'static str {
        self.0.sensor().as_str()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    /// The six reflectances of a pixel, or None when it is nodata.
    fn spectrum(&self, row: usize, col: usize) -> PyResult<Option<Vec<f64>>> {
        if row >= self.0.height() || col >= self.0.width() {
            return Err(PyValueError::new_err("pixel outside the scene"));
        }
        Ok(self.0.spectrum(row * self.0.width() + col).map(|s| s.to_vec()))
    }

    /// Per-pixel TC4 component.
    fn tc4(&self) -> PyGrid {
        PyGrid(classify::tc4(&self.0))
    }
}

/// Per-pixel labels: 0 land, 1 water, 2 cloud, 3 ice/snow, 255 nodata.
#[pyclass(name = "ClassMap", module = "aquamap", from_py_object)]
#[derive(Clone)]
struct PyClassMap(aquamap::ClassMap);

#[pymethods]
impl PyClassMap {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        io::read_classmap(&path).map(Self).map_err(to_py)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        io::write_classmap(&path, &self.0).map_err(to_py)
    }

    #[getter]
    fn scene_id(&self) -> String {
        self.0.scene_id.clone()
    }

    #[getter]
    fn date(&self) -> String {
        self.0.date.to_string()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    /// Row-major label codes.
    fn codes(&self) -> Vec<u8> {
        self.0.labels().iter().map(|l| l.code()).collect()
    }

    fn get(&self, row: usize, col: usize) -> u8 {
        self.0.get(row, col).code()
    }

    /// Number of pixels holding a label code.
    fn count(&self, code: u8) -> PyResult<usize> {
        let label = ClassLabel::from_code(code).map_err(to_py)?;
        Ok(self.0.count(label))
    }

    /// Water area in km² over the whole map.
    fn water_area_km2(&self) -> PyResult<f64> {
        let roi = aquamap::Mask::full(self.0.width(), self.0.height());
        analytics::water_area(&self.0, &roi).map_err(to_py)
    }

    /// Landscape division index of the water patches, None without water.
    fn division_index(&self) -> PyResult<Option<f64>> {
        let roi = aquamap::Mask::full(self.0.width(), self.0.height());
        match analytics::division_index(&self.0.mask_of(ClassLabel::Water), &roi) {
            Ok(d) => Ok(Some(d)),
            Err(aquamap::Error::UndefinedIndex) => Ok(None),
            Err(e) => Err(to_py(e)),
        }
    }

    /// Confusion counts `(tp, fp, fn, tn)` against `(row, col, is_water)` samples.
    fn confusion(&self, samples: Vec<(usize, usize, bool)>) -> PyResult<(u64, u64, u64, u64)> {
        let set = analytics::SampleSet {
            samples: samples
                .into_iter()
                .map(|(row, col, truth_water)| analytics::Sample {
                    row,
                    col,
                    truth_water,
                })
                .collect(),
        };
        let m = analytics::confusion(&self.0, &set).map_err(to_py)?.matrix;
        Ok((m.tp, m.fp, m.fn_, m.tn))
    }
}

/// TC4 coefficients for "TM" or "OLI".
#[pyfunction]
fn tc4_coefficients(sensor: &str) -> PyResult<Vec<f64>> {
    let s: SensorKind = sensor.parse().map_err(to_py)?;
    Ok(classify::tc4_coefficients(s).to_vec())
}

#[pyfunction]
#[pyo3(signature = (samples, bins = classify::OTSU_BINS))]
fn otsu_threshold(samples: Vec<f64>, bins: usize) -> PyResult<f64> {
    classify::otsu_threshold(&samples, bins).map_err(to_py)
}

/// Water abundance of `r` between a water and a land endmember, in [0, 1].
#[pyfunction]
fn fcls2(r: Vec<f64>, e_w: Vec<f64>, e_l: Vec<f64>) -> PyResult<f64> {
    unmix::fcls2(&spectrum(r)?, &spectrum(e_w)?, &spectrum(e_l)?).map_err(to_py)
}

#[pyfunction]
fn division_index_from_sizes(sizes: Vec<u64>) -> PyResult<f64> {
    analytics::division_index_from_sizes(&sizes).map_err(to_py)
}

/// `(oa, precision, recall)` in percent from confusion counts.
#[pyfunction]
#[pyo3(signature = (tp, fp, fn_, tn))]
fn metrics(tp: u64, fp: u64, fn_: u64, tn: u64) -> PyResult<(f64, f64, f64)> {
    let cm = aquamap::ConfusionMatrix::new(tp, fp, fn_, tn);
    Ok((
        analytics::oa(&cm).map_err(to_py)?,
        analytics::precision(&cm).map_err(to_py)?,
        analytics::recall(&cm).map_err(to_py)?,
    ))
}

#[pyfunction]
fn pixel_area_km2(pixel_size_m: f64) -> f64 {
    aquamap::raster::pixel_area_km2(pixel_size_m)
}

/// Classifies a scene given its DEM, with default or `config_text` settings.
#[pyfunction]
#[pyo3(signature = (scene, dem, config_text = None))]
fn classify_scene(scene: &PyScene, dem: &PyGrid, config_text: Option<&str>) -> PyResult<PyClassMap> {
    let cfg: PipelineConfig = config_text.unwrap_or("").parse().map_err(to_py)?;
    let slope = classify::slope_from_dem(&dem.0);
    classify::classify_scene(&scene.0, &slope, &cfg.classify)
        .map(PyClassMap)
        .map_err(to_py)
}

/// Boundary refinement; returns the refined map and the abundance grid.
#[pyfunction]
#[pyo3(signature = (scene, classmap, config_text = None))]
fn refine_boundary(
    scene: &PyScene,
    classmap: &PyClassMap,
    config_text: Option<&str>,
) -> PyResult<(PyClassMap, PyGrid)> {
    let cfg: PipelineConfig = config_text.unwrap_or("").parse().map_err(to_py)?;
    let r = unmix::refine_boundary(&scene.0, &classmap.0, &cfg.unmix).map_err(to_py)?;
    Ok((PyClassMap(r.map), PyGrid(r.abundance)))
}

/// Generates one synthetic scene from a JSON scene spec; returns
/// `(scene, truth, dem)`.
#[pyfunction]
fn generate_scene(spec_json: &str) -> PyResult<(PyScene, PyClassMap, PyGrid)> {
    let spec: SceneSpec =
        serde_json::from_str(spec_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let g = synth::generate(&spec).map_err(to_py)?;
    Ok((PyScene(g.scene), PyClassMap(g.truth), PyGrid(g.dem)))
}

/// Writes a synthetic archive described by a JSON spec file; returns the scene count.
#[pyfunction]
fn synth_archive(spec_path: PathBuf, out: PathBuf) -> PyResult<usize> {
    let spec = ArchiveSpec::load(&spec_path).map_err(to_py)?;
    let archive = synth::generate_archive(&spec).map_err(to_py)?;
    let manifest = pipeline::write_archive(&out, &archive).map_err(to_py)?;
    Ok(manifest.entries.len())
}

/// Full pipeline over a manifest; returns `(processed, skipped)` scene counts.
#[pyfunction]
#[pyo3(signature = (manifest, dem, out, roi = None, config = None))]
fn run_pipeline(
    py: Python<'_>,
    manifest: PathBuf,
    dem: PathBuf,
    out: PathBuf,
    roi: Option<PathBuf>,
    config: Option<PathBuf>,
) -> PyResult<(usize, usize)> {
    py.detach(|| {
        let cfg = match &config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let manifest = io::read_manifest(&manifest)?;
        let dem = io::read_grid(&dem)?;
        let roi = roi.as_deref().map(io::read_mask).transpose()?;
        let run = pipeline::run_pipeline(&manifest, &dem, roi.as_ref(), &cfg)?;
        pipeline::write_pipeline_run(&out, &run, &cfg)?;
        Ok((run.classified.len(), run.skipped.len()))
    })
    .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "aquamap")]
fn aquamap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyClassMap>()?;
    m.add_function(wrap_pyfunction!(tc4_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(otsu_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(fcls2, m)?)?;
    m.add_function(wrap_pyfunction!(division_index_from_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(pixel_area_km2, m)?)?;
    m.add_function(wrap_pyfunction!(classify_scene, m)?)?;
    m.add_function(wrap_pyfunction!(refine_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(synth_archive, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
