use std::path::PathBuf;

use anyhow::{bail, Result};
use cmtrace_core::TraceConfig;

/// Environment variable naming the default cache directory.
pub const CACHE_ENV: &str = "CMTRACE_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub precision_bits: Option<usize>,
    pub terms: Option<usize>,
    pub guard_bits: usize,
    pub cache_dir: Option<PathBuf>,
    pub format: Format,
    pub relocation: bool,
    pub deterministic_sum: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision_bits: None,
            terms: None,
            guard_bits: 32,
            cache_dir: None,
            format: Format::Text,
            relocation: false,
            deterministic_sum: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.precision_bits == Some(0) {
            bail!("--prec-bits must be positive");
        }
        if self.terms == Some(0) {
            bail!("--terms must be positive");
        }
        if let Some(dir) = &self.cache_dir {
            std::fs::create_dir_all(dir)
                .map_err(|e| anyhow::anyhow!("cache dir {} is not writable: {e}", dir.display()))?;
            let probe = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| anyhow::anyhow!("cache dir {} is not writable: {e}", dir.display()))?;
            drop(probe);
        }
        Ok(())
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            relocation: self.relocation,
            deterministic_sum: self.deterministic_sum,
            guard_bits: self.guard_bits,
            precision_bits: self.precision_bits,
            terms: self.terms,
            ..TraceConfig::default()
        }
    }
}

/// `$CMTRACE_CACHE_DIR`, else `$XDG_CACHE_HOME/cmtrace`, else `~/.cache/cmtrace`.
pub fn default_cache_dir() -> Option<PathBuf> {
    let env = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty()).map(PathBuf::from);
    env(CACHE_ENV)
        .or_else(|| env("XDG_CACHE_HOME").map(|p| p.join("cmtrace")))
        .or_else(|| env("HOME").map(|p| p.join(".cache").join("cmtrace")))
}
