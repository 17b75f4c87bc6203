//! Browser bindings: MFCC heatmaps of synthesized audio, per-layer model cost
//! and temporal receptive fields. Every export returns a JSON string.

use serde::Serialize;
use tcresnet::audio_io::{AudioClip, CLIP_LEN, SAMPLE_RATE};
use tcresnet::features::{FeatureConfig, MfccExtractor};
use tcresnet::models::ModelSpec;
use tcresnet::profiler::{cost_report, temporal_receptive_field, CostRow};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct Heatmap {
    pub t: usize,
    pub f: usize,
    /// Row-major, one row per frame.
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Serialize)]
pub struct CostSummary {
    pub model: String,
    pub rows: Vec<CostRow>,
    pub total_params: u64,
    pub trainable_params: u64,
    pub total_flops: u64,
}

#[derive(Serialize)]
pub struct FieldRow {
    pub layer: String,
    pub frames: usize,
    /// Frames converted to milliseconds of audio (10 ms hop, 30 ms window).
    pub ms: f64,
}

/// One second of audio: `tone` (a sine at `freq_hz`), `chirp` (sweep up to
/// `freq_hz`) or `noise` (white, from `seed`), gated to its middle half
/// second and with light background noise.
pub fn synthesize(kind: &str, freq_hz: f64, seed: u32) -> Result<AudioClip, String> {
    let mut s = (seed as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let sr = SAMPLE_RATE as f64;
    let (on, off) = (CLIP_LEN / 4, 3 * CLIP_LEN / 4);
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(CLIP_LEN);
    for i in 0..CLIP_LEN {
        let bg = 0.01 * next();
        let voiced = if (on..off).contains(&i) {
            let frac = (i - on) as f64 / (off - on) as f64;
            let env = (std::f64::consts::PI * frac).sin();
            match kind {
                "tone" => 0.5 * env * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / sr).sin(),
                "chirp" => {
                    phase += 2.0 * std::f64::consts::PI * (100.0 + (freq_hz - 100.0) * frac) / sr;
                    0.5 * env * phase.sin()
                }
                "noise" => 0.3 * env * next(),
                other => return Err(format!("unknown signal kind {other:?}")),
            }
        } else {
            0.0
        };
        out.push((bg + voiced) as f32);
    }
    Ok(AudioClip::new(out, SAMPLE_RATE))
}

pub fn heatmap(clip: &AudioClip) -> Result<Heatmap, String> {
    let m = MfccExtractor::new(FeatureConfig::default())
        .and_then(|x| x.compute(clip))
        .map_err(|e| e.to_string())?;
    let min = m.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = m.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Heatmap {
        t: m.t,
        f: m.f,
        values: m.values,
        min,
        max,
    })
}

pub fn cost_summary(model: &str) -> Result<CostSummary, String> {
    let spec: ModelSpec = model.parse().map_err(|e: tcresnet::Error| e.to_string())?;
    let r = cost_report(&spec);
    Ok(CostSummary {
        total_params: r.total_params(),
        trainable_params: r.trainable_params(),
        total_flops: r.total_flops(),
        model: r.model,
        rows: r.rows,
    })
}

pub fn field_rows(model: &str) -> Result<Vec<FieldRow>, String> {
    let spec: ModelSpec = model.parse().map_err(|e: tcresnet::Error| e.to_string())?;
    Ok(temporal_receptive_field(&spec)
        .into_iter()
        .map(|(layer, frames)| FieldRow {
            layer,
            frames,
            ms: 30.0 + 10.0 * (frames - 1) as f64,
        })
        .collect())
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// MFCC heatmap JSON of a synthesized clip.
#[wasm_bindgen]
pub fn mfcc_heatmap(kind: &str, freq_hz: f64, seed: u32) -> Result<String, JsError> {
    json(synthesize(kind, freq_hz, seed).and_then(|c| heatmap(&c)))
}

/// MFCC heatmap JSON of caller-provided 16 kHz samples (padded or trimmed to one second).
#[wasm_bindgen]
pub fn mfcc_of_samples(samples: &[f32]) -> Result<String, JsError> {
    let clip = tcresnet::audio_io::pad_or_trim(&AudioClip::new(samples.to_vec(), SAMPLE_RATE), CLIP_LEN);
    json(heatmap(&clip))
}

/// Per-layer parameters and FLOPs for a model name such as `tc-resnet8`.
#[wasm_bindgen]
pub fn model_cost(model: &str) -> Result<String, JsError> {
    json(cost_summary(model))
}

/// Temporal receptive field after each convolution on the longest path.
#[wasm_bindgen]
pub fn receptive_field(model: &str) -> Result<String, JsError> {
    json(field_rows(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_shape() {
        let h = heatmap(&synthesize("tone", 440.0, 1).unwrap()).unwrap();
        assert_eq!((h.t, h.f, h.values.len()), (98, 40, 98 * 40));
        assert!(h.min < h.max);
        assert!(synthesize("square", 440.0, 1).is_err());
    }

    #[test]
    fn cost_totals() {
        let c = cost_summary("tc-resnet8").unwrap();
        assert_eq!((c.total_params, c.total_flops), (65_824, 3_045_120));
        assert!(cost_summary("mlp").is_err());
    }

    #[test]
    fn field_grows() {
        let rows = field_rows("tc-resnet8").unwrap();
        assert_eq!(rows[0].frames, 3);
        assert!(rows.windows(2).all(|w| w[1].frames > w[0].frames));
    }
}
