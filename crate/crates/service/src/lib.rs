//! Backend of the mouse-contingent viewing experiment.
//!
//! Participants report their screen and rendering capability, receive a
//! playlist of the least-watched videos, upload one cursor trace per video
//! and finally receive a completion code for the crowdsourcing platform.
//! All state changes go through an append-only log, so the service can be
//! killed at any point and restarted from disk.

pub mod allocation;
pub mod catalog;
pub mod config;
pub mod error;
pub mod http;
pub mod service;
pub mod storage;

pub use catalog::VideoCatalogEntry;
pub use config::ServiceConfig;
pub use error::ServiceError;
pub use service::{
    Capability, CollectionService, ExportArchive, IngestAck, ManifestEntry, SessionRecord, SessionStatus,
    TraceUpload,
};
