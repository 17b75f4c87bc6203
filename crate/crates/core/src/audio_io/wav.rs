use std::io::Cursor;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono waveform with amplitudes in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn silent(len: usize) -> Self {
        Self::new(vec![0.0; len], SAMPLE_RATE)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Decodes a 16-bit PCM, mono, 16 kHz RIFF/WAVE file. Each sample `s` becomes `s / 32768`.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(Error::Decode {
            field: "header",
            detail: format!("{} bytes is too short for a RIFF header", bytes.len()),
        });
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::Decode {
            field: "magic",
            detail: format!("expected \"RIFF\", found {:?}", String::from_utf8_lossy(&bytes[0..4])),
        });
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::Decode {
            field: "format",
            detail: format!("expected \"WAVE\", found {:?}", String::from_utf8_lossy(&bytes[8..12])),
        });
    }
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| Error::Decode {
        field: "header",
        detail: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Decode {
            field: "sample_format",
            detail: "only integer PCM is supported".into(),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::Decode {
            field: "bits_per_sample",
            detail: format!("expected 16, found {}", spec.bits_per_sample),
        });
    }
    if spec.channels != 1 {
        return Err(Error::Decode {
            field: "channels",
            detail: format!("expected 1, found {}", spec.channels),
        });
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Decode {
            field: "sample_rate",
            detail: format!("expected {SAMPLE_RATE}, found {}", spec.sample_rate),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Decode {
            field: "data",
            detail: e.to_string(),
        })?;
    Ok(AudioClip::new(samples, SAMPLE_RATE))
}

/// Encodes a clip as 16-bit PCM mono WAV, rounding and saturating each sample.
pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    let to_io = |e: hound::Error| Error::Io(std::io::Error::other(e.to_string()));
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec).map_err(to_io)?;
        for &s in &clip.samples {
            let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v).map_err(to_io)?;
        }
        writer.finalize().map_err(to_io)?;
    }
    Ok(buf.into_inner())
}
