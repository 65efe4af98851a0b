//! Dataset manifests (JSON).
//!
//! ```json
//! {
//!   "generator": "optional free text",
//!   "entries": [
//!     { "video_path": "s01/video.rppg", "ppg_path": "s01/ppg.csv",
//!       "subject_id": "s01", "illumination": "controlled",
//!       "roi": "full", "ppg_rate_hz": 256 }
//!   ],
//!   "split": { "train": ["s02"], "validation": [], "test": ["s01"] }
//! }
//! ```
//!
//! `roi` (`"full"` or `{x, y, width, height}`), `ppg_rate_hz` (default 256),
//! `fps_override`, `generator` and `split` are optional. Relative paths are
//! resolved against the manifest's directory. `video_path` may name either
//! an `RPPGRAW1` container or a `t,r,g,b` trace CSV.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ingest::{write_atomic, DEFAULT_PPG_RATE_HZ};
use crate::trace::RoiSelection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Illumination {
    Controlled,
    Natural,
}

impl fmt::Display for Illumination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Illumination::Controlled => "controlled",
            Illumination::Natural => "natural",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Resolved path of the video container or trace CSV.
    pub video_path: PathBuf,
    pub ppg_path: PathBuf,
    pub subject_id: String,
    pub illumination: Illumination,
    #[serde(default)]
    pub roi: RoiSelection,
    #[serde(default = "default_ppg_rate")]
    pub ppg_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps_override: Option<f64>,
    /// `video_path` exactly as written in the manifest; used as origin id.
    #[serde(skip)]
    pub origin: String,
    /// `ppg_path` exactly as written in the manifest.
    #[serde(skip)]
    pub ppg_origin: String,
}

fn default_ppg_rate() -> f64 {
    DEFAULT_PPG_RATE_HZ
}

impl ManifestEntry {
    pub fn origin_id(&self) -> String {
        if self.origin.is_empty() {
            self.video_path.display().to_string()
        } else {
            self.origin.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectSplit {
    #[serde(rename = "train")]
    pub train_ids: BTreeSet<String>,
    #[serde(rename = "validation")]
    pub validation_ids: BTreeSet<String>,
    #[serde(rename = "test")]
    pub test_ids: BTreeSet<String>,
}

impl SubjectSplit {
    /// Checks pairwise disjointness and that every manifest subject is
    /// assigned to some part.
    pub fn validate<'a>(&self, subjects: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let parts = [
            ("train", &self.train_ids),
            ("validation", &self.validation_ids),
            ("test", &self.test_ids),
        ];
        for (i, (name_a, a)) in parts.iter().enumerate() {
            for (name_b, b) in &parts[i + 1..] {
                if let Some(id) = a.intersection(b).next() {
                    return Err(Error::Manifest(format!(
                        "subject `{id}` is in both {name_a} and {name_b} splits"
                    )));
                }
            }
        }
        for s in subjects {
            if !parts.iter().any(|(_, p)| p.contains(s)) {
                return Err(Error::Manifest(format!(
                    "subject `{s}` is not assigned to any split"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub split: Option<SubjectSplit>,
    pub generator: Option<String>,
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, index: usize) -> Result<&'a Value> {
    match obj.get(name) {
        Some(Value::Null) | None => Err(Error::ManifestField {
            field: name.into(),
            index,
        }),
        Some(v) => Ok(v),
    }
}

fn string_field(obj: &Map<String, Value>, name: &str, index: usize) -> Result<String> {
    match field(obj, name, index)?.as_str() {
        Some(s) if !s.trim().is_empty() => Ok(s.to_string()),
        _ => Err(Error::ManifestField {
            field: name.into(),
            index,
        }),
    }
}

fn typed_field<T: serde::de::DeserializeOwned>(
    obj: &Map<String, Value>,
    name: &str,
    index: usize,
) -> Result<Option<T>> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|_| Error::ManifestField {
                field: name.into(),
                index,
            }),
    }
}

impl DatasetManifest {
    /// Parses and validates manifest JSON, resolving relative paths against
    /// `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let root: Value = serde_json::from_str(text)
            .map_err(|e| Error::Manifest(format!("invalid JSON: {e}")))?;
        let root = root
            .as_object()
            .ok_or_else(|| Error::Manifest("top level must be an object".into()))?;
        let raw_entries = root
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Manifest("missing `entries` array".into()))?;

        let mut entries = Vec::with_capacity(raw_entries.len());
        let mut seen = HashSet::new();
        for (index, raw) in raw_entries.iter().enumerate() {
            let obj = raw.as_object().ok_or_else(|| Error::ManifestField {
                field: "entry".into(),
                index,
            })?;
            let video = string_field(obj, "video_path", index)?;
            let ppg = string_field(obj, "ppg_path", index)?;
            let subject_id = string_field(obj, "subject_id", index)?;
            field(obj, "illumination", index)?;
            let illumination: Illumination =
                typed_field(obj, "illumination", index)?.ok_or(Error::ManifestField {
                    field: "illumination".into(),
                    index,
                })?;
            let roi = typed_field(obj, "roi", index)?.unwrap_or_default();
            let ppg_rate_hz: f64 =
                typed_field(obj, "ppg_rate_hz", index)?.unwrap_or(DEFAULT_PPG_RATE_HZ);
            if !(ppg_rate_hz > 0.0) {
                return Err(Error::ManifestField {
                    field: "ppg_rate_hz".into(),
                    index,
                });
            }
            let fps_override: Option<f64> = typed_field(obj, "fps_override", index)?;
            if fps_override.is_some_and(|f| !(f > 0.0)) {
                return Err(Error::ManifestField {
                    field: "fps_override".into(),
                    index,
                });
            }
            let video_path = base_dir.join(&video);
            let ppg_path = base_dir.join(&ppg);
            for p in [&video_path, &ppg_path] {
                if !seen.insert(p.clone()) {
                    return Err(Error::Manifest(format!(
                        "entry {index}: path `{}` appears more than once",
                        p.display()
                    )));
                }
            }
            entries.push(ManifestEntry {
                video_path,
                ppg_path,
                subject_id,
                illumination,
                roi,
                ppg_rate_hz,
                fps_override,
                origin: video,
                ppg_origin: ppg,
            });
        }

        let split: Option<SubjectSplit> = match root.get("split") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value(v.clone())
                    .map_err(|e| Error::Manifest(format!("invalid split: {e}")))?,
            ),
        };
        let manifest = DatasetManifest {
            entries,
            split,
            generator: root
                .get("generator")
                .and_then(Value::as_str)
                .map(String::from),
        };
        if let Some(split) = &manifest.split {
            split.validate(manifest.subjects())?;
        }
        Ok(manifest)
    }

    pub fn subjects(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.subject_id.as_str())
    }

    /// Serializes the manifest using each entry's original (unresolved) path.
    pub fn to_json(&self) -> Result<String> {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                let mut v = serde_json::to_value(e)?;
                let obj = v.as_object_mut().expect("entry serializes to an object");
                obj.insert("video_path".into(), Value::String(e.origin_id()));
                let ppg = if e.ppg_origin.is_empty() {
                    e.ppg_path.display().to_string()
                } else {
                    e.ppg_origin.clone()
                };
                obj.insert("ppg_path".into(), Value::String(ppg));
                Ok(v)
            })
            .collect::<Result<_>>()?;
        let mut root = Map::new();
        if let Some(g) = &self.generator {
            root.insert("generator".into(), Value::String(g.clone()));
        }
        root.insert("entries".into(), Value::Array(entries));
        if let Some(split) = &self.split {
            root.insert("split".into(), serde_json::to_value(split)?);
        }
        Ok(serde_json::to_string_pretty(&Value::Object(root))? + "\n")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_json()?;
        write_atomic(path, |w| {
            w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
        })
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    DatasetManifest::from_json(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Roi;

    const TWO: &str = r#"{
        "entries": [
            {"video_path": "a/v.rppg", "ppg_path": "a/ppg.csv", "subject_id": "s1", "illumination": "controlled"},
            {"video_path": "b/v.csv", "ppg_path": "b/ppg.csv", "subject_id": "s2", "illumination": "natural",
             "roi": {"x": 1, "y": 2, "width": 3, "height": 4}, "ppg_rate_hz": 128}
        ]
    }"#;

    #[test]
    fn parses_two_entries() {
        let m = DatasetManifest::from_json(TWO, Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].video_path, PathBuf::from("/data/a/v.rppg"));
        assert_eq!(m.entries[0].roi, RoiSelection::Full);
        assert_eq!(m.entries[0].ppg_rate_hz, 256.0);
        assert_eq!(m.entries[0].origin_id(), "a/v.rppg");
        assert_eq!(m.entries[1].illumination, Illumination::Natural);
        assert_eq!(
            m.entries[1].roi,
            RoiSelection::Rect(Roi {
                x: 1,
                y: 2,
                width: 3,
                height: 4
            })
        );
        assert_eq!(m.entries[1].ppg_rate_hz, 128.0);
    }

    #[test]
    fn missing_ppg_path_names_field_and_index() {
        let text =
            r#"{"entries": [{"video_path": "v", "subject_id": "s", "illumination": "natural"}]}"#;
        match DatasetManifest::from_json(text, Path::new(".")) {
            Err(Error::ManifestField { field, index }) => {
                assert_eq!(field, "ppg_path");
                assert_eq!(index, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"entries": [{"video_path": "v", "ppg_path": "p", "subject_id": "s", "illumination": "dim"}]}"#;
        assert!(matches!(
            DatasetManifest::from_json(text, Path::new(".")),
            Err(Error::ManifestField { ref field, index: 0 }) if field == "illumination"
        ));
        let text = r#"{"entries": [{"video_path": "v", "ppg_path": "p", "subject_id": "", "illumination": "natural"}]}"#;
        assert!(matches!(
            DatasetManifest::from_json(text, Path::new(".")),
            Err(Error::ManifestField { ref field, .. }) if field == "subject_id"
        ));
    }

    #[test]
    fn duplicate_paths_are_rejected() {
        let text = r#"{"entries": [
            {"video_path": "v", "ppg_path": "p1", "subject_id": "s", "illumination": "natural"},
            {"video_path": "v", "ppg_path": "p2", "subject_id": "t", "illumination": "natural"}
        ]}"#;
        assert!(matches!(
            DatasetManifest::from_json(text, Path::new(".")),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn split_is_validated() {
        let with_split = |split: &str| {
            let mut v: Value = serde_json::from_str(TWO).unwrap();
            v["split"] = serde_json::from_str(split).unwrap();
            DatasetManifest::from_json(&v.to_string(), Path::new("."))
        };
        let ok = with_split(r#"{"train": ["s1"], "validation": [], "test": ["s2"]}"#).unwrap();
        assert!(ok.split.unwrap().test_ids.contains("s2"));
        assert!(
            with_split(r#"{"train": ["s1"], "validation": [], "test": ["s1", "s2"]}"#).is_err()
        );
        assert!(with_split(r#"{"train": ["s1"], "validation": [], "test": []}"#).is_err());
    }

    #[test]
    fn json_round_trip_preserves_entries() {
        let m = DatasetManifest::from_json(TWO, Path::new("/data")).unwrap();
        let again = DatasetManifest::from_json(&m.to_json().unwrap(), Path::new("/data")).unwrap();
        assert_eq!(m, again);
    }
}
