//! Audio decoding, dataset indexing with hash-based splits, and augmentation.

mod augment;
mod dataset;
mod wav;

pub use augment::{augment, make_silence, mix_background, pad_or_trim, time_shift, AugmentConfig, CLIP_LEN};
pub use dataset::{
    assign_split, build_dataset_index, index_from_listing, list_noise_files, list_utterances,
    read_index_csv, split_percentage, write_index_csv, DatasetEntry, IndexConfig, Label, Split,
    BACKGROUND_NOISE_DIR, SILENCE_PREFIX,
};
pub use wav::{decode_wav, encode_wav, AudioClip, SAMPLE_RATE};
