//! Shared plumbing behind the `killchain` binary: run manifests, the budget
//! sweep, scenario files, and renderers for the result documents. Lives in a
//! library so the integration and acceptance tests can drive the same code.

pub mod logging;
pub mod manifest;
pub mod report;
pub mod scenario;
pub mod sweep;
