//! Diagnostics on stderr, gated by the `KILLCHAIN_LOG` environment variable:
//! `quiet`, `info` (the default), or `debug`. Results always go to stdout or
//! to files; this stream is commentary only, so piping stays clean.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verbosity {
    Quiet,
    Info,
    Debug,
}

static LEVEL: OnceLock<Verbosity> = OnceLock::new();

/// Resolved once per process; unrecognized values fall back to `info`.
pub fn verbosity() -> Verbosity {
    *LEVEL.get_or_init(|| match std::env::var("KILLCHAIN_LOG").as_deref() {
        Ok("quiet") => Verbosity::Quiet,
        Ok("debug") => Verbosity::Debug,
        _ => Verbosity::Info,
    })
}

pub fn info(msg: &str) {
    if verbosity() >= Verbosity::Info {
        eprintln!("{msg}");
    }
}

pub fn debug(msg: &str) {
    if verbosity() >= Verbosity::Debug {
        eprintln!("{msg}");
    }
}
