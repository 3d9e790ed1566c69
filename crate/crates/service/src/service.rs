//! Session lifecycle, trace ingestion and export.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use hmac::{Hmac, Mac};
use mousesal_core::trace_format::write_traces;
use mousesal_core::types::TimedPoint;
use mousesal_core::{FixationTrace, Source};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::Sha256;

use crate::allocation::allocate_playlist;
use crate::catalog::{check_catalog, VideoCatalogEntry};
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::storage::{Event, EventLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub screen_width: u32,
    pub screen_height: u32,
    pub measured_fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Completed,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    /// Unix time in milliseconds.
    pub created_at: u64,
    pub screen_width: u32,
    pub screen_height: u32,
    pub measured_fps: f64,
    pub playlist: Vec<String>,
    pub completed_videos: BTreeSet<String>,
    pub status: SessionStatus,
    pub completion_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_reason: Option<String>,
}

impl SessionRecord {
    pub fn missing_videos(&self) -> Vec<String> {
        self.playlist.iter().filter(|v| !self.completed_videos.contains(*v)).cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UploadSample {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceUpload {
    /// Optional in the body; must match the URL when present.
    #[serde(default)]
    pub session_id: Option<String>,
    pub video_id: String,
    pub samples: Vec<UploadSample>,
    pub client_fps_report: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrace {
    pub samples: Vec<TimedPoint>,
    pub client_fps_report: f64,
    pub received_at: u64,
    /// Number of uploads for this (session, video); above 1 means the
    /// participant re-watched and only the latest viewing is kept.
    pub uploads: u32,
    pub excluded_session: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestAck {
    pub accepted: bool,
    pub samples_stored: usize,
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub observers: usize,
    pub observer_ids: Vec<String>,
    /// Observers whose session failed the capability checks.
    pub excluded_observers: Vec<String>,
    /// Observers who uploaded this video more than once.
    pub rewatched: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportArchive {
    pub manifest: Vec<ManifestEntry>,
    /// Trace file text, grouped by video.
    pub traces: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub playlist_size: usize,
    pub min_screen_width: u32,
    pub min_fps: f64,
    pub secret: String,
    pub fsync: bool,
    pub seed: Option<u64>,
}

impl From<&ServiceConfig> for Settings {
    fn from(c: &ServiceConfig) -> Self {
        Settings {
            playlist_size: c.playlist_size,
            min_screen_width: c.min_screen_width,
            min_fps: c.min_fps,
            secret: c.secret.clone(),
            fsync: c.fsync,
            seed: c.seed,
        }
    }
}

struct Inner {
    catalog: Vec<VideoCatalogEntry>,
    by_id: HashMap<String, usize>,
    sessions: HashMap<String, SessionRecord>,
    session_order: Vec<String>,
    traces: BTreeMap<(String, String), StoredTrace>,
    log: EventLog,
    rng: StdRng,
}

impl Inner {
    fn apply(&mut self, event: Event) -> Result<(), ServiceError> {
        match event {
            Event::SessionCreated { session } => {
                for v in &session.playlist {
                    let idx = self.video_index(v)?;
                    self.catalog[idx].view_count += 1;
                }
                if !self.sessions.contains_key(&session.session_id) {
                    self.session_order.push(session.session_id.clone());
                }
                self.sessions.insert(session.session_id.clone(), session);
            }
            Event::TraceStored { session_id, video_id, trace } => {
                let s = self.session_mut(&session_id)?;
                if s.playlist.contains(&video_id) {
                    s.completed_videos.insert(video_id.clone());
                }
                self.traces.insert((video_id, session_id), trace);
            }
            Event::SessionCompleted { session_id, completion_code } => {
                let s = self.session_mut(&session_id)?;
                s.status = SessionStatus::Completed;
                s.completion_code = Some(completion_code);
            }
        }
        Ok(())
    }

    fn video_index(&self, id: &str) -> Result<usize, ServiceError> {
        self.by_id.get(id).copied().ok_or_else(|| ServiceError::NotFound { what: "video", id: id.into() })
    }

    fn session_mut(&mut self, id: &str) -> Result<&mut SessionRecord, ServiceError> {
        self.sessions.get_mut(id).ok_or_else(|| ServiceError::NotFound { what: "session", id: id.into() })
    }

    fn live_events(&self) -> Vec<Event> {
        let mut events = Vec::new();
        for id in &self.session_order {
            let mut created = self.sessions[id].clone();
            created.completion_code = None;
            created.completed_videos.clear();
            if created.status == SessionStatus::Completed {
                created.status = SessionStatus::Active;
            }
            events.push(Event::SessionCreated { session: created });
        }
        for ((video_id, session_id), trace) in &self.traces {
            events.push(Event::TraceStored {
                session_id: session_id.clone(),
                video_id: video_id.clone(),
                trace: trace.clone(),
            });
        }
        for id in &self.session_order {
            if let Some(code) = &self.sessions[id].completion_code {
                events.push(Event::SessionCompleted { session_id: id.clone(), completion_code: code.clone() });
            }
        }
        events
    }

    fn persist(&mut self, event: Event) -> Result<(), ServiceError> {
        self.log.append(&event)?;
        self.apply(event)
    }
}

/// The experiment backend. All mutations are serialized through one lock
/// that also owns the log writer, so view counts and session transitions
/// are never computed from stale state.
pub struct CollectionService {
    settings: Settings,
    inner: Mutex<Inner>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl CollectionService {
    /// Opens the service over `data_dir`, replaying any existing log on top
    /// of the catalog's base view counts.
    pub fn open(
        catalog: Vec<VideoCatalogEntry>,
        data_dir: &Path,
        settings: Settings,
    ) -> Result<CollectionService, ServiceError> {
        check_catalog(&catalog)?;
        let (log, events) = EventLog::open(data_dir, settings.fsync)?;
        let by_id = catalog.iter().enumerate().map(|(i, e)| (e.video_id.clone(), i)).collect();
        let rng = match settings.seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_entropy(),
        };
        let mut inner = Inner {
            catalog,
            by_id,
            sessions: HashMap::new(),
            session_order: Vec::new(),
            traces: BTreeMap::new(),
            log,
            rng,
        };
        for ev in events {
            inner.apply(ev)?;
        }
        let service = CollectionService { settings, inner: Mutex::new(inner) };
        service.compact_if_stale()?;
        Ok(service)
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn completion_code(&self, session_id: &str) -> String {
        let mut mac = Hmac::<Sha256>::new_from_slice(self.settings.secret.as_bytes()).expect("hmac accepts any key");
        mac.update(session_id.as_bytes());
        hex::encode_upper(&mac.finalize().into_bytes()[..10])
    }

    pub fn create_session(&self, capability: Capability) -> Result<SessionRecord, ServiceError> {
        if !(capability.measured_fps.is_finite() && capability.measured_fps >= 0.0) {
            return Err(ServiceError::validation(
                "measured_fps must be a non-negative number",
                json!({ "measured_fps": capability.measured_fps }),
            ));
        }
        let mut inner = self.lock();
        if inner.catalog.is_empty() {
            return Err(ServiceError::State("the video catalog is empty".into()));
        }
        let mut reasons = Vec::new();
        if capability.screen_width < self.settings.min_screen_width {
            reasons.push(format!(
                "screen width {} < {}",
                capability.screen_width, self.settings.min_screen_width
            ));
        }
        if capability.measured_fps < self.settings.min_fps {
            reasons.push(format!("render rate {} fps < {}", capability.measured_fps, self.settings.min_fps));
        }
        let (status, playlist) = if reasons.is_empty() {
            let counts: Vec<(String, u64)> =
                inner.catalog.iter().map(|e| (e.video_id.clone(), e.view_count)).collect();
            let size = self.settings.playlist_size;
            let Inner { rng, .. } = &mut *inner;
            (SessionStatus::Active, allocate_playlist(&counts, size, rng)?)
        } else {
            (SessionStatus::Excluded, Vec::new())
        };
        let session = SessionRecord {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            created_at: now_ms(),
            screen_width: capability.screen_width,
            screen_height: capability.screen_height,
            measured_fps: capability.measured_fps,
            playlist,
            completed_videos: BTreeSet::new(),
            status,
            completion_code: None,
            exclusion_reason: (!reasons.is_empty()).then(|| reasons.join("; ")),
        };
        inner.persist(Event::SessionCreated { session: session.clone() })?;
        Ok(session)
    }

    pub fn session(&self, session_id: &str) -> Result<SessionRecord, ServiceError> {
        self.lock()
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound { what: "session", id: session_id.into() })
    }

    pub fn video(&self, video_id: &str) -> Result<VideoCatalogEntry, ServiceError> {
        let inner = self.lock();
        let idx = inner.video_index(video_id)?;
        Ok(inner.catalog[idx].clone())
    }

    /// Catalog with live view counts.
    pub fn catalog(&self) -> Vec<VideoCatalogEntry> {
        self.lock().catalog.clone()
    }

    /// Validates and stores one viewing. Nothing is written unless every
    /// check passes.
    pub fn ingest_trace(&self, session_id: &str, upload: TraceUpload) -> Result<IngestAck, ServiceError> {
        if let Some(body_id) = &upload.session_id {
            if body_id != session_id {
                return Err(ServiceError::validation(
                    "session id in body does not match the URL",
                    json!({ "body": body_id, "url": session_id }),
                ));
            }
        }
        if !(upload.client_fps_report.is_finite() && upload.client_fps_report >= 0.0) {
            return Err(ServiceError::validation(
                "client_fps_report must be a non-negative number",
                json!({ "client_fps_report": upload.client_fps_report }),
            ));
        }
        for (i, s) in upload.samples.iter().enumerate() {
            if !((0.0..=1.0).contains(&s.x) && (0.0..=1.0).contains(&s.y)) {
                return Err(ServiceError::validation(
                    format!("sample {i} has coordinates outside [0, 1]"),
                    json!({ "index": i, "t_ms": s.t_ms, "x": s.x, "y": s.y }),
                ));
            }
            if i > 0 && upload.samples[i - 1].t_ms > s.t_ms {
                return Err(ServiceError::validation(
                    format!("sample {i} goes back in time"),
                    json!({ "index": i, "t_ms": s.t_ms, "previous_t_ms": upload.samples[i - 1].t_ms }),
                ));
            }
        }
        let samples: Vec<TimedPoint> =
            upload.samples.iter().map(|s| TimedPoint { t_ms: s.t_ms, x: s.x, y: s.y }).collect();

        let mut inner = self.lock();
        let session = inner
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound { what: "session", id: session_id.into() })?;
        let video = inner.catalog[inner.video_index(&upload.video_id)?].clone();
        match session.status {
            SessionStatus::Completed => {
                return Err(ServiceError::Precondition {
                    message: "session is already completed".into(),
                    detail: json!({ "session_id": session_id }),
                })
            }
            SessionStatus::Active if !session.playlist.contains(&upload.video_id) => {
                return Err(ServiceError::validation(
                    format!("video `{}` is not in this session's playlist", upload.video_id),
                    json!({ "video_id": upload.video_id, "playlist": session.playlist }),
                ));
            }
            _ => {}
        }
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.t_ms > video.duration_ms) {
            return Err(ServiceError::validation(
                format!("sample {i} at {} ms is past the end of the video", s.t_ms),
                json!({ "index": i, "t_ms": s.t_ms, "duration_ms": video.duration_ms }),
            ));
        }

        let key = (upload.video_id.clone(), session_id.to_string());
        let previous = inner.traces.get(&key).map(|t| t.uploads).unwrap_or(0);
        let excluded = session.status == SessionStatus::Excluded;
        let stored = samples.len();
        inner.persist(Event::TraceStored {
            session_id: session_id.to_string(),
            video_id: upload.video_id,
            trace: StoredTrace {
                samples,
                client_fps_report: upload.client_fps_report,
                received_at: now_ms(),
                uploads: previous + 1,
                excluded_session: excluded,
            },
        })?;
        if excluded {
            // Kept for auditing, never part of a default export.
            return Err(ServiceError::Excluded { session_id: session_id.into(), retained_samples: stored });
        }
        Ok(IngestAck { accepted: true, samples_stored: stored, duplicate: previous > 0 })
    }

    /// Issues the completion code once every playlist video has a trace.
    /// Returns the code and whether this call completed the session.
    pub fn complete_session(&self, session_id: &str) -> Result<(String, bool), ServiceError> {
        let mut inner = self.lock();
        let session = inner
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound { what: "session", id: session_id.into() })?;
        match session.status {
            SessionStatus::Completed => {
                return Ok((session.completion_code.expect("completed sessions carry a code"), false))
            }
            SessionStatus::Excluded => {
                return Err(ServiceError::Excluded { session_id: session_id.into(), retained_samples: 0 })
            }
            SessionStatus::Active => {}
        }
        let missing = session.missing_videos();
        if !missing.is_empty() {
            return Err(ServiceError::Precondition {
                message: format!("{} playlist video(s) have no trace yet", missing.len()),
                detail: json!({ "missing_video_ids": missing }),
            });
        }
        let code = self.completion_code(session_id);
        inner.persist(Event::SessionCompleted { session_id: session_id.into(), completion_code: code.clone() })?;
        Ok((code, true))
    }

    /// Stored traces as a trace file plus per-video observer counts.
    pub fn export_dataset(&self, include_excluded: bool) -> ExportArchive {
        let inner = self.lock();
        let mut traces = Vec::new();
        let mut manifest: BTreeMap<&str, ManifestEntry> = BTreeMap::new();
        for ((video_id, session_id), stored) in &inner.traces {
            let excluded = stored.excluded_session
                || inner.sessions.get(session_id).is_some_and(|s| s.status == SessionStatus::Excluded);
            if excluded && !include_excluded {
                continue;
            }
            let trace = FixationTrace::new(session_id.clone(), video_id.clone(), Source::Mouse, stored.samples.clone())
                .expect("stored samples were validated on ingest");
            traces.push(trace);
            let entry = manifest.entry(video_id).or_insert_with(|| ManifestEntry {
                video_id: video_id.clone(),
                observers: 0,
                observer_ids: Vec::new(),
                excluded_observers: Vec::new(),
                rewatched: Vec::new(),
            });
            entry.observers += 1;
            entry.observer_ids.push(session_id.clone());
            if excluded {
                entry.excluded_observers.push(session_id.clone());
            }
            if stored.uploads > 1 {
                entry.rewatched.push(session_id.clone());
            }
        }
        ExportArchive { manifest: manifest.into_values().collect(), traces: write_traces(&traces) }
    }

    /// Rewrites the log with live records only.
    pub fn compact(&self) -> Result<(), ServiceError> {
        let mut inner = self.lock();
        let events = inner.live_events();
        inner.log.rewrite(&events)
    }

    fn compact_if_stale(&self) -> Result<(), ServiceError> {
        let stale = {
            let inner = self.lock();
            inner.log.len() > inner.live_events().len()
        };
        if stale {
            self.compact()?;
        }
        Ok(())
    }

    /// Flushes and compacts; called on shutdown.
    pub fn shutdown(&self) -> Result<(), ServiceError> {
        self.compact()?;
        self.lock().log.flush()
    }
}
