//! MFCC frontend: framing, Hann-windowed power spectrum, triangular mel
//! filterbank, log compression and an orthonormal DCT-II.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioClip;
use crate::error::{Error, Result};
use crate::nn_core::Tensor;

pub const MFC_MAGIC: &[u8; 4] = b"MFC1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub window_len_s: f64,
    pub hop_len_s: f64,
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub fft_size: usize,
    pub mel_fmin: f64,
    pub mel_fmax: f64,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_len_s: 0.030,
            hop_len_s: 0.010,
            n_mfcc: 40,
            n_mels: 40,
            fft_size: 512,
            mel_fmin: 20.0,
            mel_fmax: 4000.0,
            log_floor: 1e-12,
        }
    }
}

impl FeatureConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_len_s * self.sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_len_s * self.sample_rate as f64).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced from `n` samples, or `None` when `n` is shorter than a window.
    pub fn frame_count(&self, n: usize) -> Option<usize> {
        let w = self.window_samples();
        (n >= w).then(|| 1 + (n - w) / self.hop_samples())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Feature(m));
        if self.window_samples() == 0 || self.hop_samples() == 0 {
            return bad("window and hop must be at least one sample".into());
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!("n_mfcc {} must be in 1..={}", self.n_mfcc, self.n_mels));
        }
        if self.fft_size < self.window_samples() {
            return bad(format!(
                "fft_size {} shorter than the {}-sample window",
                self.fft_size,
                self.window_samples()
            ));
        }
        if !(self.mel_fmin >= 0.0 && self.mel_fmin < self.mel_fmax && self.mel_fmax <= self.sample_rate as f64 / 2.0) {
            return bad(format!("mel range {}..{} Hz is invalid", self.mel_fmin, self.mel_fmax));
        }
        Ok(())
    }
}

/// A `t x f` grid of cepstral coefficients, one row per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccMatrix {
    pub t: usize,
    pub f: usize,
    pub values: Vec<f64>,
}

impl MfccMatrix {
    pub fn new(t: usize, f: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != t * f {
            return Err(Error::Feature(format!("{t}x{f} matrix with {} values", values.len())));
        }
        Ok(Self { t, f, values })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.f..(i + 1) * self.f]
    }

    /// `t x 1 x f`: each frame's coefficients become input channels.
    pub fn to_temporal_input(&self) -> Tensor<f32> {
        self.to_tensor(vec![self.t, 1, self.f])
    }

    /// `t x f x 1`: the matrix as a single-channel image.
    pub fn to_image_input(&self) -> Tensor<f32> {
        self.to_tensor(vec![self.t, self.f, 1])
    }

    fn to_tensor(&self, shape: Vec<usize>) -> Tensor<f32> {
        Tensor::new(shape, self.values.iter().map(|&v| v as f32).collect()).expect("t * f values")
    }

    /// Little-endian `MFC1` file: magic, u32 t, u32 f, u32 reserved, then `t * f` f32 values.
    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        sink.write_all(MFC_MAGIC)?;
        for v in [self.t as u32, self.f as u32, 0u32] {
            sink.write_all(&v.to_le_bytes())?;
        }
        for &v in &self.values {
            sink.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut source: R) -> Result<Self> {
        let mut header = [0u8; 16];
        source
            .read_exact(&mut header)
            .map_err(|_| Error::Feature("truncated MFC1 header".into()))?;
        if &header[0..4] != MFC_MAGIC {
            return Err(Error::Feature("bad MFC1 magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (t, f) = (word(4), word(8));
        let mut payload = vec![0u8; t * f * 4];
        source
            .read_exact(&mut payload)
            .map_err(|_| Error::Feature("truncated MFC1 payload".into()))?;
        let values = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        Self::new(t, f, values)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Splits a clip into `window`-sample frames every `hop` samples, without padding.
pub fn frame_signal(clip: &AudioClip, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    let (w, hop) = (cfg.window_samples(), cfg.hop_samples());
    let count = cfg.frame_count(clip.len()).ok_or_else(|| {
        Error::Feature(format!("{} samples is shorter than one {w}-sample window", clip.len()))
    })?;
    Ok((0..count)
        .map(|i| clip.samples[i * hop..i * hop + w].iter().map(|&s| s as f64).collect())
        .collect())
}

/// `|DFT|^2` of the Hann-windowed, zero-padded frame, bins `0..=fft_size/2`.
pub fn power_spectrum(frame: &[f64], cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let window = hann_window(frame.len());
    spectrum_with(frame, &window, fft.as_ref(), cfg.fft_size)
}

fn spectrum_with(frame: &[f64], window: &[f64], fft: &dyn Fft<f64>, fft_size: usize) -> Result<Vec<f64>> {
    if frame.len() > fft_size {
        return Err(Error::Feature(format!(
            "frame of {} samples exceeds fft_size {fft_size}",
            frame.len()
        )));
    }
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(window) {
        b.re = s * w;
    }
    fft.process(&mut buf);
    Ok(buf[..fft_size / 2 + 1].iter().map(|c| c.norm_sqr()).collect())
}

/// The `n_mels + 2` filter edge/center frequencies, uniform on the mel scale.
pub fn mel_points_hz(cfg: &FeatureConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.mel_fmin), hz_to_mel(cfg.mel_fmax));
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect()
}

/// `n_mels x (fft_size/2 + 1)` triangular filters, row-major. Filter edges
/// and centers are uniform on the mel scale; each triangle peaks at 1.0 at its center.
pub fn mel_filterbank(cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let points = mel_points_hz(cfg);
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;
    let mut bank = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, center, right) = (points[m], points[m + 1], points[m + 2]);
        let row: Vec<f64> = (0..cfg.n_bins())
            .map(|k| {
                let f = k as f64 * bin_hz;
                if f <= left || f >= right {
                    0.0
                } else if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                }
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            return Err(Error::Feature(format!(
                "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; too many mel bands for the range"
            )));
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Orthonormal DCT-II basis, `n_out x n_in`.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    let n = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..n_in)
                .map(|i| scale * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                .collect()
        })
        .collect()
}

/// Reusable MFCC pipeline with the window, filterbank, DCT basis and FFT plan precomputed.
pub struct MfccExtractor {
    cfg: FeatureConfig,
    window: Vec<f64>,
    bank: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        let bank = mel_filterbank(&cfg)?;
        Ok(Self {
            window: hann_window(cfg.window_samples()),
            dct: dct_matrix(cfg.n_mfcc, cfg.n_mels),
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_size),
            bank,
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<MfccMatrix> {
        if clip.sample_rate != self.cfg.sample_rate {
            return Err(Error::Feature(format!(
                "clip is {} Hz, frontend expects {} Hz",
                clip.sample_rate, self.cfg.sample_rate
            )));
        }
        let frames = frame_signal(clip, &self.cfg)?;
        let mut values = Vec::with_capacity(frames.len() * self.cfg.n_mfcc);
        let mut log_mel = vec![0.0; self.cfg.n_mels];
        for frame in &frames {
            let power = spectrum_with(frame, &self.window, self.fft.as_ref(), self.cfg.fft_size)?;
            for (lm, filt) in log_mel.iter_mut().zip(&self.bank) {
                let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                *lm = (e + self.cfg.log_floor).ln();
            }
            values.extend(
                self.dct
                    .iter()
                    .map(|basis| basis.iter().zip(&log_mel).map(|(b, l)| b * l).sum::<f64>()),
            );
        }
        MfccMatrix::new(frames.len(), self.cfg.n_mfcc, values)
    }
}

pub fn compute_mfcc(clip: &AudioClip, cfg: &FeatureConfig) -> Result<MfccMatrix> {
    MfccExtractor::new(*cfg)?.compute(clip)
}
