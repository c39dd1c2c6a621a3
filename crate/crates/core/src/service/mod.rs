//! Dataset registry, persisted job queue and the HTTP API.

mod api;
mod config;
mod dataset;
mod jobs;
pub mod store;

pub use api::{router, serve};
pub use config::{execute, SimulationConfig};
pub use dataset::{Dataset, DatasetSource, DatasetSummary, HeatmapCell, SyntheticDatasetRequest, WorkplaceHeatmap};
pub use jobs::{JobRecord, JobStatus, Service, ServiceOptions, SubmitResponse, DEFAULT_CAPACITY};
pub use store::Store;
