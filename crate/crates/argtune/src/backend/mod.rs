//! Completion backends: HTTP endpoints, replay fixtures and a simulator.

mod http;
mod replay;
mod sim;

use std::path::Path;

use argtune_core::backend::CompletionBackend;

pub use http::{backoff_delay, parse_completion, BackendConfig, HttpBackend};
pub use replay::{prompt_hash, FixtureRecord, RecordingBackend, ReplayBackend};
pub use sim::SimulatedBackend;

pub type DynBackend = Box<dyn CompletionBackend + Send + Sync>;

/// Builds a backend from a locator:
///
/// * `mock:<path>` replays a fixture file,
/// * `sim` or `sim:<seed>` uses [`SimulatedBackend`],
/// * anything else is an HTTP endpoint root, with the remaining settings
///   taken from `config`.
pub fn open_backend(locator: &str, config: &BackendConfig) -> Result<DynBackend, String> {
    if let Some(path) = locator.strip_prefix("mock:") {
        let b = ReplayBackend::load(Path::new(path)).map_err(|e| e.to_string())?;
        return Ok(Box::new(b));
    }
    if locator == "sim" {
        return Ok(Box::new(SimulatedBackend::new(0)));
    }
    if let Some(seed) = locator.strip_prefix("sim:") {
        let seed = seed
            .parse()
            .map_err(|_| format!("invalid simulator seed {seed:?}"))?;
        return Ok(Box::new(SimulatedBackend::new(seed)));
    }
    let mut c = config.clone();
    c.base_url = locator.to_string();
    Ok(Box::new(HttpBackend::new(c)?))
}
