pub mod analytics;
pub mod api;
pub mod cache;
pub mod captions;
pub mod config;
pub mod dataset;
pub mod domain;
pub mod fixtures;
pub mod index;
pub mod ingest;
pub mod store;
pub mod textproc;
