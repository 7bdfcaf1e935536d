//! Multi-station processing: ingestion, forecasts, transit masking, the
//! global fade check and the per-station tracker/detector chain.

pub mod engine;
pub mod fade;
pub mod forecast;
pub mod ingest;
pub mod output;
pub mod registry;
pub mod transit;

pub use engine::{Engine, EngineOutput, EngineState};
pub use fade::{global_fade_check, FadeClass, GlobalFadePolicy};
pub use forecast::IsothermForecast;
pub use ingest::{ingest, Diagnostics, Ingested, SnrSample};
pub use output::{EstimateLine, EventRecord, OutputRecord, Quality};
pub use registry::StationRecord;
pub use transit::{TransitSchedule, TransitWindow};
