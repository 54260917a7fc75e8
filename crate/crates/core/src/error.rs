use std::path::PathBuf;

use crate::raster::BandRole;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("buffer length {actual} does not match {width}x{height} = {expected}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("grid dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("pixel size must be positive and finite, got {0}")]
    InvalidPixelSize(f64),
    #[error("scene is missing band {0}")]
    MissingBand(BandRole),
    #[error("band {0} supplied more than once")]
    DuplicateBand(BandRole),
    #[error("unknown band role '{0}'")]
    UnknownBand(String),
    #[error("unknown sensor '{0}' (expected TM or OLI)")]
    UnknownSensor(String),
    #[error("unknown class code {0:#04x}")]
    UnknownLabelCode(u8),
    #[error("histogram is degenerate: need at least two distinct finite samples")]
    DegenerateHistogram,
    #[error("invalid bin count {0}: need at least 2")]
    InvalidBinCount(usize),
    #[error("water and land endmembers are identical")]
    DegenerateEndmembers,
    #[error("window around ({row}, {col}) contains no valid pixel")]
    NoValidPixel { row: usize, col: usize },
    #[error("region of interest is empty")]
    EmptyRoi,
    #[error("division index undefined: no water pixels in the region of interest")]
    UndefinedIndex,
    #[error("{0} undefined: zero denominator")]
    UndefinedMetric(&'static str),
    #[error("no samples fall on Water or Land labels")]
    NoSamples,
    #[error("sample ({row}, {col}) lies outside the {width}x{height} grid")]
    SampleOutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },
    #[error("duplicate date {0}")]
    DuplicateDate(chrono::NaiveDate),
    #[error("duplicate scene id '{0}'")]
    DuplicateScene(String),
    #[error("records are not sorted by date ({0} follows {1})")]
    Unsorted(chrono::NaiveDate, chrono::NaiveDate),
    #[error("stack still contains Cloud or IceSnow labels; interpolate first")]
    NotInterpolated,
    #[error("no input records")]
    EmptyInput,
    #[error("no usable scenes")]
    NoUsableScenes,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("scene '{scene_id}': {source}")]
    Scene {
        scene_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_scene(self, scene_id: &str) -> Self {
        Error::Scene {
            scene_id: scene_id.to_string(),
            source: Box::new(self),
        }
    }
}
