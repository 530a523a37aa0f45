use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "path\tclip_id\tspeaker_id\tscore";

/// Three-way intelligibility level derived from a 0–100 score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntelligibilityClass {
    Low,
    Medium,
    High,
}

impl IntelligibilityClass {
    pub const ALL: [IntelligibilityClass; 3] = [Self::Low, Self::Medium, Self::High];
    pub const COUNT: usize = 3;

    /// Low is 0–33, medium 34–66, high 67–100.
    pub fn from_score(score: u8) -> Result<Self> {
        match score {
            0..=33 => Ok(Self::Low),
            34..=66 => Ok(Self::Medium),
            67..=100 => Ok(Self::High),
            _ => Err(Error::Validation(format!("score {score} outside [0,100]"))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// A representative score inside the class interval.
    pub fn nominal_score(self) -> u8 {
        match self {
            Self::Low => 15,
            Self::Medium => 50,
            Self::High => 85,
        }
    }
}

impl fmt::Display for IntelligibilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        })
    }
}

impl std::str::FromStr for IntelligibilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::Usage(format!("unknown class '{s}' (expected low, medium or high)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub clip_id: String,
    pub speaker_id: String,
    pub score: u8,
    pub class: IntelligibilityClass,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative clip paths are resolved against.
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    /// Distinct speakers in first-appearance order.
    pub fn speakers(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.speaker_id.as_str()))
            .map(|e| e.speaker_id.clone())
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.path.display(),
                e.clip_id,
                e.speaker_id,
                e.score
            ));
        }
        out
    }
}

/// Parses manifest text. `root` is used to resolve relative clip paths.
pub fn parse_manifest_str(text: &str, root: impl Into<PathBuf>) -> Result<CorpusManifest> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == MANIFEST_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {MANIFEST_HEADER:?}, found {h:?}"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty manifest".into(),
            })
        }
    }
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in lines {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let field = |idx: usize, name: &str| -> Result<&str> {
            let v = fields[idx].trim();
            if v.is_empty() {
                Err(Error::Parse {
                    line,
                    msg: format!("missing {name}"),
                })
            } else {
                Ok(v)
            }
        };
        let path = field(0, "path")?;
        let clip_id = field(1, "clip_id")?;
        let speaker_id = field(2, "speaker_id")?;
        let score_txt = field(3, "score")?;
        let score: i64 = score_txt.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("score {score_txt:?} is not an integer"),
        })?;
        if !(0..=100).contains(&score) {
            return Err(Error::Validation(format!(
                "line {line}: score {score} outside [0,100]"
            )));
        }
        let score = score as u8;
        if !ids.insert(clip_id.to_string()) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate clip_id {clip_id:?}"
            )));
        }
        entries.push(ManifestEntry {
            path: PathBuf::from(path),
            clip_id: clip_id.to_string(),
            speaker_id: speaker_id.to_string(),
            score,
            class: IntelligibilityClass::from_score(score)?,
        });
    }
    Ok(CorpusManifest {
        entries,
        root: root.into(),
    })
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<CorpusManifest> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound {
            what: "manifest",
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest_str(&text, root)
}
