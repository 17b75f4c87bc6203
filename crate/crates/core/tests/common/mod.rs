#![allow(dead_code)]

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcresnet::audio_io::{AudioClip, DatasetEntry, Label, Split, CLIP_LEN, SAMPLE_RATE};
use tcresnet::train::Corpus;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tone(freq: f64, amp: f32, len: usize) -> AudioClip {
    let samples = (0..len)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / SAMPLE_RATE as f64).sin() as f32)
        .collect();
    AudioClip::new(samples, SAMPLE_RATE)
}

pub fn white_noise(seed: u64, amp: f32, len: usize) -> AudioClip {
    let mut r = rng(seed);
    AudioClip::new((0..len).map(|_| r.gen_range(-amp..amp)).collect(), SAMPLE_RATE)
}

/// A tone whose pitch and on/off pattern depend on the label, with a little noise.
pub fn keyword_clip(label: Label, variant: u64) -> AudioClip {
    let base = 300.0 + 250.0 * label.id() as f64;
    let noise = white_noise(variant * 31 + label.id() as u64, 0.02, CLIP_LEN);
    let gate_period = 1_000 + 400 * label.id();
    let samples = tone(base, 0.4, CLIP_LEN)
        .samples
        .iter()
        .zip(&noise.samples)
        .enumerate()
        .map(|(i, (&s, &z))| if (i / gate_period) % 2 == 0 { s + z } else { z })
        .collect();
    AudioClip::new(samples, SAMPLE_RATE)
}

pub fn entry(label: Label, split: Split, i: usize) -> DatasetEntry {
    let path = if label == Label::Silence {
        format!("_silence_/{}/{i}", split.name())
    } else {
        format!("{}/{i:08x}_nohash_0.wav", label.name())
    };
    DatasetEntry { path, label, split }
}

/// `per_class` train and validation clips for each of `labels`, with one second-long noise file.
pub fn toy_corpus(labels: &[Label], per_class: usize) -> Corpus {
    let mut entries = Vec::new();
    let mut clips = Vec::new();
    for split in [Split::Train, Split::Validation] {
        for &label in labels {
            for v in 0..per_class {
                let i = entries.len();
                entries.push(entry(label, split, i));
                clips.push(keyword_clip(label, i as u64 + v as u64 * 7));
            }
        }
    }
    Corpus::in_memory(entries, clips, vec![white_noise(99, 0.5, 2 * CLIP_LEN)]).unwrap()
}

/// Writes a miniature Speech Commands tree: `per_word` clips for each target
/// word plus `bed` and `cat`, and two noise files.
pub fn write_toy_tree(root: &std::path::Path, per_word: usize) {
    use tcresnet::audio_io::encode_wav;
    let words: Vec<String> = Label::TARGETS
        .iter()
        .map(|l| l.name().to_string())
        .chain(["bed".to_string(), "cat".to_string()])
        .collect();
    for (w, word) in words.iter().enumerate() {
        let dir = root.join(word);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..per_word {
            let label = Label::target(word).unwrap_or(Label::Unknown);
            let clip = keyword_clip(label, (w * 100 + i) as u64);
            let name = format!("{:08x}_nohash_{}.wav", (w * 7919 + i * 104_729) as u32, i % 3);
            std::fs::write(dir.join(name), encode_wav(&clip).unwrap()).unwrap();
        }
    }
    let noise = root.join("_background_noise_");
    std::fs::create_dir_all(&noise).unwrap();
    for (i, len) in [(0u64, 3 * CLIP_LEN), (1, CLIP_LEN / 2)] {
        let bytes = encode_wav(&white_noise(500 + i, 0.3, len)).unwrap();
        std::fs::write(noise.join(format!("noise_{i}.wav")), bytes).unwrap();
    }
}
