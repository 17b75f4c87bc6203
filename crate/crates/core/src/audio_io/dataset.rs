use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::{Error, Result};
use crate::rng;

pub const BACKGROUND_NOISE_DIR: &str = "_background_noise_";
/// Path prefix of synthesized silence entries.
pub const SILENCE_PREFIX: &str = "_silence_";

/// `2^27 - 1`, the bucket count of the canonical hash split.
const MAX_NUM_WAVS_PER_CLASS: u64 = (1 << 27) - 1;

/// The twelve output classes; the discriminant is the class id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Yes = 0,
    No,
    Up,
    Down,
    Left,
    Right,
    On,
    Off,
    Stop,
    Go,
    Silence,
    Unknown,
}

impl Label {
    pub const COUNT: usize = 12;
    pub const ALL: [Label; 12] = [
        Label::Yes,
        Label::No,
        Label::Up,
        Label::Down,
        Label::Left,
        Label::Right,
        Label::On,
        Label::Off,
        Label::Stop,
        Label::Go,
        Label::Silence,
        Label::Unknown,
    ];
    pub const TARGETS: [Label; 10] = [
        Label::Yes,
        Label::No,
        Label::Up,
        Label::Down,
        Label::Left,
        Label::Right,
        Label::On,
        Label::Off,
        Label::Stop,
        Label::Go,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Yes => "yes",
            Label::No => "no",
            Label::Up => "up",
            Label::Down => "down",
            Label::Left => "left",
            Label::Right => "right",
            Label::On => "on",
            Label::Off => "off",
            Label::Stop => "stop",
            Label::Go => "go",
            Label::Silence => "silence",
            Label::Unknown => "unknown",
        }
    }

    /// The target word a directory name denotes, if any.
    pub fn target(word: &str) -> Option<Self> {
        Self::TARGETS.iter().copied().find(|l| l.name() == word)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Index(format!("unknown label {s:?}")))
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Index(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub path: String,
    pub label: Label,
    pub split: Split,
}

impl DatasetEntry {
    pub fn is_synthetic_silence(&self) -> bool {
        self.path.starts_with(SILENCE_PREFIX)
    }
}

/// Deterministic, speaker-consistent split of one file.
///
/// The directory and everything from `_nohash_` on are stripped, the rest is
/// SHA-1 hashed and the digest (read as a big integer) is bucketed modulo `2^27`.
pub fn assign_split(filename: &str, val_pct: f64, test_pct: f64) -> Split {
    let pct = split_percentage(filename);
    if pct < val_pct {
        Split::Validation
    } else if pct < val_pct + test_pct {
        Split::Test
    } else {
        Split::Train
    }
}

/// The `[0, 100]` bucket position `assign_split` compares against.
pub fn split_percentage(filename: &str) -> f64 {
    let base = filename.rsplit(['/', '\\']).next().unwrap_or(filename);
    let stem = match base.find("_nohash_") {
        Some(i) => &base[..i],
        None => base,
    };
    let digest = Sha1::digest(stem.as_bytes());
    // The modulus is a power of two, so only the low 27 bits of the digest matter.
    let tail = u64::from_be_bytes(digest[12..20].try_into().expect("8 bytes"));
    let bucket = tail % (MAX_NUM_WAVS_PER_CLASS + 1);
    bucket as f64 * (100.0 / MAX_NUM_WAVS_PER_CLASS as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub val_pct: f64,
    pub test_pct: f64,
    pub unknown_pct: f64,
    pub silence_pct: f64,
    pub seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            val_pct: 10.0,
            test_pct: 10.0,
            unknown_pct: 10.0,
            silence_pct: 10.0,
            seed: 59185,
        }
    }
}

impl IndexConfig {
    fn validate(&self) -> Result<()> {
        let pcts = [self.val_pct, self.test_pct, self.unknown_pct, self.silence_pct];
        if pcts.iter().any(|p| !(0.0..=100.0).contains(p)) || self.val_pct + self.test_pct > 100.0 {
            return Err(Error::Index(format!("invalid percentages {self:?}")));
        }
        Ok(())
    }
}

/// Every utterance under `root` as `word/file.wav`, sorted. Background noise is excluded.
pub fn list_utterances(root: &Path) -> Result<Vec<String>> {
    if !root.is_dir() {
        return Err(Error::Index(format!("{} is not a directory", root.display())));
    }
    if !root.join(BACKGROUND_NOISE_DIR).is_dir() {
        return Err(Error::Index(format!(
            "{} has no {BACKGROUND_NOISE_DIR} directory",
            root.display()
        )));
    }
    let mut words: Vec<String> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|name| name != BACKGROUND_NOISE_DIR && !name.starts_with('.'))
        .collect();
    words.sort();
    let mut out = Vec::new();
    for word in words {
        let mut files: Vec<String> = fs::read_dir(root.join(&word))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.to_ascii_lowercase().ends_with(".wav"))
            .collect();
        files.sort();
        out.extend(files.into_iter().map(|f| format!("{word}/{f}")));
    }
    Ok(out)
}

/// Background-noise files under `root`, sorted by name.
pub fn list_noise_files(root: &Path) -> Result<Vec<String>> {
    let dir = root.join(BACKGROUND_NOISE_DIR);
    let mut files: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| Error::Index(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.to_ascii_lowercase().ends_with(".wav"))
        .map(|n| format!("{BACKGROUND_NOISE_DIR}/{n}"))
        .collect();
    files.sort();
    Ok(files)
}

/// Builds the 12-class index from a listing of `word/file.wav` paths.
///
/// Target words keep their labels. Per split, a seeded sample of the
/// non-target utterances sized `ceil(targets * unknown_pct / 100)` becomes
/// `unknown`, and `ceil(targets * silence_pct / 100)` silence entries are appended.
pub fn index_from_listing(paths: &[String], cfg: &IndexConfig) -> Result<Vec<DatasetEntry>> {
    cfg.validate()?;
    let mut targets: [Vec<DatasetEntry>; 3] = Default::default();
    let mut others: [Vec<String>; 3] = Default::default();
    for path in paths {
        let word = path.rsplit(['/', '\\']).nth(1).unwrap_or("");
        if word == BACKGROUND_NOISE_DIR {
            continue;
        }
        let split = assign_split(path, cfg.val_pct, cfg.test_pct);
        let slot = split as usize;
        match Label::target(word) {
            Some(label) => targets[slot].push(DatasetEntry {
                path: path.clone(),
                label,
                split,
            }),
            None => others[slot].push(path.clone()),
        }
    }

    let mut out = Vec::new();
    for split in Split::ALL {
        let slot = split as usize;
        let set_size = targets[slot].len() as f64;
        let n_unknown = (set_size * cfg.unknown_pct / 100.0).ceil() as usize;
        let n_silence = (set_size * cfg.silence_pct / 100.0).ceil() as usize;

        out.append(&mut targets[slot]);

        let pool = &mut others[slot];
        pool.sort();
        pool.shuffle(&mut rng::stream(cfg.seed, 0x756e6b, slot as u64));
        out.extend(pool.iter().take(n_unknown).map(|p| DatasetEntry {
            path: p.clone(),
            label: Label::Unknown,
            split,
        }));

        out.extend((0..n_silence).map(|i| DatasetEntry {
            path: format!("{SILENCE_PREFIX}/{split}/{i}"),
            label: Label::Silence,
            split,
        }));
    }
    Ok(out)
}

pub fn build_dataset_index(root: &Path, cfg: &IndexConfig) -> Result<Vec<DatasetEntry>> {
    let listing = list_utterances(root)?;
    index_from_listing(&listing, cfg)
}

/// Writes `path,label,split` CSV with a header row.
pub fn write_index_csv<W: Write>(entries: &[DatasetEntry], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    for e in entries {
        w.serialize(e).map_err(|e| Error::Index(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index_csv<R: Read>(source: R) -> Result<Vec<DatasetEntry>> {
    csv::Reader::from_reader(source)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Index(e.to_string())))
        .collect()
}
