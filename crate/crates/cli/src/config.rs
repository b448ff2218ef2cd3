use std::path::Path;

use fibertrack::bench::BenchConfig;
use fibertrack::error::Error;
use fibertrack::nn::{SyntheticSpec, TrainConfig};
use fibertrack::tract::TrackerConfig;
use serde::Deserialize;

/// Contents of the `--config` file; every table is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub tracker: TrackerConfig,
    pub train: TrainConfig,
    pub dataset: SyntheticSpec,
    pub bench: BenchConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}
