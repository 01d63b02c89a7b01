//! Command-line driver: configuration, JSON/text rendering and the on-disk
//! coefficient cache.

pub mod cache;
pub mod commands;
pub mod config;
pub mod output;

pub use cache::{cache_read, cache_write, CacheError, DiskCachedSource};
pub use config::{default_cache_dir, Format, RunConfig, CACHE_ENV};
