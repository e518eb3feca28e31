//! Prime the on-disk basis cache for the configured parameters and print the
//! cache file path.

use std::path::Path;

use micrem_core::error::{Error, Result};
use micrem_core::io::{basis_cache_file, load_or_build_basis};

use crate::config::ExperimentConfig;

pub fn run(cfg: &ExperimentConfig, cache: Option<&Path>) -> Result<i32> {
    let dir = cache.ok_or_else(|| {
        Error::validation("no cache directory: pass --cache-dir or set MICREM_CACHE_DIR")
    })?;
    let params = cfg.params()?;
    load_or_build_basis(&params, Some(dir))?;
    println!("{}", dir.join(basis_cache_file(&params)).display());
    Ok(0)
}
