use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::audio_io::{
    augment, build_dataset_index, decode_wav, list_noise_files, make_silence, pad_or_trim,
    AudioClip, AugmentConfig, DatasetEntry, IndexConfig, Label, Split, CLIP_LEN,
};
use crate::error::{Error, Result};
use crate::features::{MfccExtractor, MfccMatrix};
use crate::nn_core::par::map_indices;
use crate::rng;

enum ClipStore {
    Disk(PathBuf),
    /// One clip per entry, in entry order.
    Memory(Vec<AudioClip>),
}

/// An indexed dataset plus the background noise used for augmentation and
/// silence synthesis.
pub struct Corpus {
    entries: Vec<DatasetEntry>,
    store: ClipStore,
    noise: Vec<AudioClip>,
}

impl Corpus {
    /// Indexes a Speech Commands style directory and loads its background noise.
    pub fn open(root: &Path, cfg: &IndexConfig) -> Result<Self> {
        let entries = build_dataset_index(root, cfg)?;
        Self::from_index(root, entries)
    }

    /// Uses an existing index; clips are read from `root` on demand.
    pub fn from_index(root: &Path, entries: Vec<DatasetEntry>) -> Result<Self> {
        let noise = list_noise_files(root)?
            .iter()
            .map(|p| read_wav(&root.join(p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            entries,
            store: ClipStore::Disk(root.to_path_buf()),
            noise,
        })
    }

    /// In-memory corpus; `clips[i]` belongs to `entries[i]` (ignored for silence entries).
    pub fn in_memory(entries: Vec<DatasetEntry>, clips: Vec<AudioClip>, noise: Vec<AudioClip>) -> Result<Self> {
        if entries.len() != clips.len() {
            return Err(Error::Train(format!(
                "{} entries but {} clips",
                entries.len(),
                clips.len()
            )));
        }
        Ok(Self {
            entries,
            store: ClipStore::Memory(clips),
            noise,
        })
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn noise(&self) -> &[AudioClip] {
        &self.noise
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.entries[i].split == split).collect()
    }

    /// The stored clip, padded or trimmed to one second. Silence entries yield zeros.
    pub fn raw_clip(&self, index: usize) -> Result<AudioClip> {
        let entry = &self.entries[index];
        if entry.is_synthetic_silence() {
            return Ok(AudioClip::silent(CLIP_LEN));
        }
        let clip = match &self.store {
            ClipStore::Disk(root) => read_wav(&root.join(&entry.path))?,
            ClipStore::Memory(clips) => clips[index].clone(),
        };
        Ok(pad_or_trim(&clip, CLIP_LEN))
    }

    /// Deterministic evaluation clip: no augmentation; silence entries are
    /// synthesized from the stream `(seed, index)`.
    pub fn eval_clip(&self, index: usize, aug: &AugmentConfig) -> Result<AudioClip> {
        if self.entries[index].is_synthetic_silence() {
            let mut r = rng::stream(aug.rng_seed, SILENCE_EVAL_STREAM, index as u64);
            return self.silence(aug, &mut r);
        }
        self.raw_clip(index)
    }

    /// Augmented training clip for draw `draw` of entry `index`.
    pub fn train_clip(&self, index: usize, draw: u64, aug: &AugmentConfig) -> Result<AudioClip> {
        let mut r = rng::stream(aug.rng_seed, draw, index as u64);
        if self.entries[index].is_synthetic_silence() {
            return self.silence(aug, &mut r);
        }
        augment(&self.raw_clip(index)?, &self.noise, aug, &mut r)
    }

    fn silence<R: Rng>(&self, aug: &AugmentConfig, r: &mut R) -> Result<AudioClip> {
        if self.noise.is_empty() {
            return Ok(AudioClip::silent(CLIP_LEN));
        }
        let coeff = r.gen::<f64>() * aug.noise_coeff_max;
        let offset = r.gen::<u32>() as usize;
        make_silence(&self.noise, coeff, offset, r)
    }

    /// Evaluation features and labels for `indices`.
    pub fn eval_features(
        &self,
        indices: &[usize],
        extractor: &MfccExtractor,
        aug: &AugmentConfig,
    ) -> Result<Vec<(MfccMatrix, Label)>> {
        map_indices(indices.len(), |k| {
            let i = indices[k];
            let clip = self.eval_clip(i, aug)?;
            Ok((extractor.compute(&clip)?, self.entries[i].label))
        })
        .into_iter()
        .collect()
    }
}

const SILENCE_EVAL_STREAM: u64 = u64::MAX - 1;

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = fs::read(path).map_err(|e| Error::Index(format!("{}: {e}", path.display())))?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Decode { field, detail } => Error::Decode {
            field,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}
