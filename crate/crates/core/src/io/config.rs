use std::fs;
use std::path::Path;

use crate::augment::AugmentConfig;
use crate::error::Result;

pub fn read_config(path: impl AsRef<Path>) -> Result<AugmentConfig> {
    AugmentConfig::from_json(&fs::read_to_string(path)?)
}

pub fn write_config(path: impl AsRef<Path>, cfg: &AugmentConfig) -> Result<()> {
    fs::write(path, cfg.to_json())?;
    Ok(())
}
