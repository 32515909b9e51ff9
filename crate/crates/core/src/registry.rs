//! Gate-pass registry: enroll people from face images, identify probe frames
//! against them and raise alerts for anyone not recognized.
//!
//! The store is an append-only JSON-lines file. Each line is one enrollment
//! event; loading replays the events in order. An enrollment is written and
//! flushed before the in-memory store changes.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::DetectError;
use crate::encoding::{euclidean_distance, FaceEncoding, MatchResult, MatcherConfig};
use crate::imageio::RgbImage;
use crate::pipeline::FacePipeline;

pub const STORE_SCHEMA: u32 = 1;

/// An enrolled person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PersonRecord {
    pub person_id: String,
    pub display_name: String,
    pub info: BTreeMap<String, String>,
    /// Never empty; all from `provider`.
    pub encodings: Vec<FaceEncoding>,
    pub provider: String,
    /// Time of the first enrollment.
    pub enrolled_at: DateTime<Utc>,
}

/// One line of the store file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EnrollEvent {
    schema: u32,
    person_id: String,
    display_name: String,
    info: BTreeMap<String, String>,
    provider: String,
    encodings: Vec<FaceEncoding>,
    at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("no face found in the enrollment image")]
    NoFace,
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("person {person_id} is enrolled with provider {existing}, not {found}")]
    ProviderMismatch { person_id: String, existing: String, found: String },
    #[error("person id must not be empty")]
    EmptyId,
    #[error("store {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("store {path}, line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

/// What to enroll.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnrollRequest {
    /// Existing or new id; a fresh `pNNNN` id is assigned when absent.
    pub person_id: Option<String>,
    /// Replaces the stored name of an existing person.
    pub display_name: String,
    /// Merged into the stored info; new values win.
    pub info: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentificationStatus {
    Recognized,
    Unknown,
    NoFace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentificationResult {
    pub status: IdentificationStatus,
    /// The recognized person, or the nearest one when unknown.
    pub person_id: Option<String>,
    pub similarity_pct: Option<f64>,
    pub d_face: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlertReason {
    UnknownPerson,
    NoFace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertEvent {
    pub timestamp: DateTime<Utc>,
    pub frame_ref: String,
    pub best_similarity: Option<f64>,
    pub reason: AlertReason,
}

/// Result of [`Registry::identify`]; `alert` is set exactly when the status
/// is not `Recognized`.
#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub result: IdentificationResult,
    pub alert: Option<AlertEvent>,
}

/// People in enrollment order, backed by a store file.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    path: PathBuf,
    people: Vec<PersonRecord>,
}

impl Registry {
    /// Loads the store at `path`; a missing file is an empty store.
    ///
    /// A corrupt last line (typically a write cut short) is dropped with a
    /// warning and cut from the file so later appends start on a clean
    /// line. Corruption before the last line is an error.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, RegistryError> {
        let path = path.into();
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(source) => return Err(RegistryError::Io { path, source }),
        };
        let mut registry = Registry { path, people: Vec::new() };
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < bytes.len() {
            line_no += 1;
            let end = bytes[offset..].iter().position(|&b| b == b'\n').map(|i| offset + i);
            let line = &bytes[offset..end.unwrap_or(bytes.len())];
            let next = end.map_or(bytes.len(), |e| e + 1);
            let is_last = next >= bytes.len();
            if line.iter().all(u8::is_ascii_whitespace) {
                offset = next;
                continue;
            }
            match parse_event(line).and_then(|ev| registry.apply(ev).map_err(|e| e.to_string())) {
                Ok(()) => {}
                Err(message) if is_last => {
                    log::warn!(
                        "{}: dropping corrupt trailing line {line_no} ({} bytes): {message}",
                        registry.path.display(),
                        line.len()
                    );
                    registry.truncate_to(offset as u64)?;
                    break;
                }
                Err(message) => return Err(RegistryError::Corrupt { path: registry.path, line: line_no, message }),
            }
            offset = next;
        }
        Ok(registry)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn people(&self) -> &[PersonRecord] {
        &self.people
    }

    pub fn get(&self, person_id: &str) -> Option<&PersonRecord> {
        self.people.iter().find(|p| p.person_id == person_id)
    }

    fn truncate_to(&self, len: u64) -> Result<(), RegistryError> {
        let file = OpenOptions::new().write(true).open(&self.path).map_err(|source| self.io(source))?;
        file.set_len(len).map_err(|source| self.io(source))
    }

    fn io(&self, source: std::io::Error) -> RegistryError {
        RegistryError::Io { path: self.path.clone(), source }
    }

    fn apply(&mut self, ev: EnrollEvent) -> Result<(), RegistryError> {
        if ev.person_id.is_empty() {
            return Err(RegistryError::EmptyId);
        }
        match self.people.iter_mut().find(|p| p.person_id == ev.person_id) {
            Some(p) => {
                if p.provider != ev.provider {
                    return Err(RegistryError::ProviderMismatch {
                        person_id: ev.person_id,
                        existing: p.provider.clone(),
                        found: ev.provider,
                    });
                }
                p.display_name = ev.display_name;
                p.info.extend(ev.info);
                p.encodings.extend(ev.encodings);
            }
            None => self.people.push(PersonRecord {
                person_id: ev.person_id,
                display_name: ev.display_name,
                info: ev.info,
                encodings: ev.encodings,
                provider: ev.provider,
                enrolled_at: ev.at,
            }),
        }
        Ok(())
    }

    fn append(&self, ev: &EnrollEvent) -> Result<(), RegistryError> {
        let mut line = serde_json::to_vec(ev).expect("events serialize");
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|s| self.io(s))?;
        file.write_all(&line).map_err(|s| self.io(s))?;
        file.sync_data().map_err(|s| self.io(s))
    }

    fn fresh_id(&self) -> String {
        (self.people.len() + 1..)
            .map(|n| format!("p{n:04}"))
            .find(|id| self.get(id).is_none())
            .expect("unbounded range")
    }

    /// Adds an already computed encoding. The event is persisted before the
    /// store changes.
    pub fn enroll_encoding(
        &mut self,
        request: EnrollRequest,
        encoding: FaceEncoding,
        provider: &str,
        at: DateTime<Utc>,
    ) -> Result<&PersonRecord, RegistryError> {
        let person_id = match request.person_id {
            Some(id) if id.is_empty() => return Err(RegistryError::EmptyId),
            Some(id) => id,
            None => self.fresh_id(),
        };
        if let Some(p) = self.get(&person_id) {
            if p.provider != provider {
                return Err(RegistryError::ProviderMismatch {
                    person_id,
                    existing: p.provider.clone(),
                    found: provider.to_string(),
                });
            }
        }
        let ev = EnrollEvent {
            schema: STORE_SCHEMA,
            person_id: person_id.clone(),
            display_name: request.display_name,
            info: request.info,
            provider: provider.to_string(),
            encodings: vec![encoding],
            at,
        };
        self.append(&ev)?;
        self.apply(ev)?;
        Ok(self.get(&person_id).expect("just enrolled"))
    }

    /// Detects and encodes the face in `image` and enrolls it.
    pub fn enroll(
        &mut self,
        pipeline: &FacePipeline,
        request: EnrollRequest,
        image: &RgbImage,
        at: DateTime<Utc>,
    ) -> Result<&PersonRecord, RegistryError> {
        let (_, encoding) = pipeline.encode(image)?.ok_or(RegistryError::NoFace)?;
        self.enroll_encoding(request, encoding, pipeline.provider().id(), at)
    }

    /// Nearest enrolled person to `encoding`, with ties on distance going to
    /// the earliest enrollment and then the smaller id.
    pub fn nearest(&self, encoding: &FaceEncoding) -> Option<(&PersonRecord, f64)> {
        self.people
            .iter()
            .map(|p| {
                let d = p.encodings.iter().map(|e| euclidean_distance(encoding, e)).fold(f64::INFINITY, f64::min);
                (p, d)
            })
            .min_by(|(a, da), (b, db)| {
                da.total_cmp(db).then(a.enrolled_at.cmp(&b.enrolled_at)).then(a.person_id.cmp(&b.person_id))
            })
    }

    /// Identification for an encoding, or for a frame without a face when
    /// `encoding` is `None`.
    pub fn identify_encoding(
        &self,
        encoding: Option<&FaceEncoding>,
        cfg: &MatcherConfig,
        frame_ref: &str,
        now: DateTime<Utc>,
    ) -> Identification {
        let Some(encoding) = encoding else {
            let result = IdentificationResult {
                status: IdentificationStatus::NoFace,
                person_id: None,
                similarity_pct: None,
                d_face: None,
            };
            let alert = AlertEvent {
                timestamp: now,
                frame_ref: frame_ref.to_string(),
                best_similarity: None,
                reason: AlertReason::NoFace,
            };
            return Identification { result, alert: Some(alert) };
        };
        let best = self.nearest(encoding).map(|(p, d)| (p, MatchResult::from_distance(d, cfg)));
        let result = IdentificationResult {
            status: match best {
                Some((_, m)) if m.is_match => IdentificationStatus::Recognized,
                _ => IdentificationStatus::Unknown,
            },
            person_id: best.map(|(p, _)| p.person_id.clone()),
            similarity_pct: best.map(|(_, m)| m.similarity_pct),
            d_face: best.map(|(_, m)| m.d_face),
        };
        let alert = (result.status != IdentificationStatus::Recognized).then(|| AlertEvent {
            timestamp: now,
            frame_ref: frame_ref.to_string(),
            best_similarity: result.similarity_pct,
            reason: AlertReason::UnknownPerson,
        });
        Identification { result, alert }
    }

    /// Encodes `frame` and identifies it. Does not modify the store.
    pub fn identify(
        &self,
        pipeline: &FacePipeline,
        frame: &RgbImage,
        cfg: &MatcherConfig,
        frame_ref: &str,
        now: DateTime<Utc>,
    ) -> Result<Identification, DetectError> {
        let encoding = pipeline.encode(frame)?.map(|(_, e)| e);
        Ok(self.identify_encoding(encoding.as_ref(), cfg, frame_ref, now))
    }

    /// Writes the whole store as a fresh log at `path`, one event per person.
    /// Loading the result gives back an equal store.
    pub fn save_snapshot(&self, path: &Path) -> Result<(), RegistryError> {
        let io = |source| RegistryError::Io { path: path.to_path_buf(), source };
        let mut file = File::create(path).map_err(io)?;
        for p in &self.people {
            let ev = EnrollEvent {
                schema: STORE_SCHEMA,
                person_id: p.person_id.clone(),
                display_name: p.display_name.clone(),
                info: p.info.clone(),
                provider: p.provider.clone(),
                encodings: p.encodings.clone(),
                at: p.enrolled_at,
            };
            let mut line = serde_json::to_vec(&ev).expect("events serialize");
            line.push(b'\n');
            file.write_all(&line).map_err(io)?;
        }
        file.sync_all().map_err(io)
    }
}

fn parse_event(line: &[u8]) -> Result<EnrollEvent, String> {
    let ev: EnrollEvent = serde_json::from_slice(line).map_err(|e| e.to_string())?;
    if ev.schema != STORE_SCHEMA {
        return Err(format!("unsupported store schema {}", ev.schema));
    }
    if ev.encodings.is_empty() {
        return Err("enrollment without encodings".into());
    }
    Ok(ev)
}

/// Where alerts go: always an append-only JSON-lines log, optionally also
/// an HTTP endpoint that receives each event as a JSON POST.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertSink {
    pub log_path: PathBuf,
    pub callback_url: Option<String>,
    pub timeout: Duration,
}

/// Environment variable naming the alert callback URL.
pub const ALERT_URL_ENV: &str = "GATEPASS_ALERT_URL";

#[derive(Debug, Error)]
pub enum AlertError {
    #[error("alert log {path}: {source}")]
    Log { path: PathBuf, source: std::io::Error },
    #[error("alert callback {url}: {message}")]
    Callback { url: String, message: String },
}

impl AlertSink {
    pub fn new(log_path: impl Into<PathBuf>, callback_url: Option<String>) -> Self {
        AlertSink { log_path: log_path.into(), callback_url, timeout: Duration::from_secs(5) }
    }

    /// Appends the event to the log and posts it to the callback, once,
    /// without retrying. Failures are logged and returned; one failing
    /// transport does not stop the other.
    pub fn emit(&self, event: &AlertEvent) -> Vec<AlertError> {
        let mut errors = Vec::new();
        if let Err(source) = self.append_log(event) {
            errors.push(AlertError::Log { path: self.log_path.clone(), source });
        }
        if let Some(url) = &self.callback_url {
            let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
            if let Err(e) = agent.post(url).send_json(event) {
                errors.push(AlertError::Callback { url: url.clone(), message: e.to_string() });
            }
        }
        for e in &errors {
            log::error!("{e}");
        }
        errors
    }

    fn append_log(&self, event: &AlertEvent) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(event).expect("alerts serialize");
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&self.log_path)?;
        file.write_all(&line)?;
        file.sync_data()
    }
}
