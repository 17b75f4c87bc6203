use rand::Rng;
use serde::{Deserialize, Serialize};

use super::wav::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};

/// One second at 16 kHz.
pub const CLIP_LEN: usize = SAMPLE_RATE as usize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Shifts are drawn from `U(-shift_range_s, shift_range_s)`.
    pub shift_range_s: f64,
    /// Noise coefficients are drawn from `U(0, noise_coeff_max)`.
    pub noise_coeff_max: f64,
    /// Probability that a clip is mixed with background noise.
    pub noise_prob: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shift_range_s: 0.1,
            noise_coeff_max: 0.1,
            noise_prob: 0.8,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..).contains(&self.shift_range_s)
            || !(0.0..).contains(&self.noise_coeff_max)
            || !(0.0..=1.0).contains(&self.noise_prob)
        {
            return Err(Error::Augment(format!("invalid augmentation config {self:?}")));
        }
        Ok(())
    }
}

/// Zero-pads or truncates at the end to exactly `target_len` samples.
pub fn pad_or_trim(clip: &AudioClip, target_len: usize) -> AudioClip {
    let mut samples = clip.samples.clone();
    samples.resize(target_len, 0.0);
    AudioClip::new(samples, clip.sample_rate)
}

/// Shifts by `round(shift_s * sample_rate)` samples with zero fill. Positive
/// shifts delay the signal.
pub fn time_shift(clip: &AudioClip, shift_s: f64) -> AudioClip {
    let n = clip.len();
    let shift = (shift_s * clip.sample_rate as f64).round() as i64;
    let shift = shift.clamp(-(n as i64), n as i64);
    let mut out = vec![0.0f32; n];
    if shift >= 0 {
        let s = shift as usize;
        out[s..].copy_from_slice(&clip.samples[..n - s]);
    } else {
        let s = (-shift) as usize;
        out[..n - s].copy_from_slice(&clip.samples[s..]);
    }
    AudioClip::new(out, clip.sample_rate)
}

/// `out[i] = clamp(clip[i] + coeff * noise[crop_offset + i], -1, 1)`.
pub fn mix_background(clip: &AudioClip, noise: &AudioClip, coeff: f64, crop_offset: usize) -> Result<AudioClip> {
    let needed = clip.len() + crop_offset;
    if noise.len() < needed {
        return Err(Error::Augment(format!(
            "noise has {} samples, need {needed}",
            noise.len()
        )));
    }
    let crop = &noise.samples[crop_offset..needed];
    let samples = clip
        .samples
        .iter()
        .zip(crop)
        .map(|(&s, &z)| (s as f64 + coeff * z as f64).clamp(-1.0, 1.0) as f32)
        .collect();
    Ok(AudioClip::new(samples, clip.sample_rate))
}

/// A one-second silence sample: a crop of a randomly chosen noise file scaled by `coeff`.
///
/// Noise shorter than one second is zero-padded; `crop_offset` is reduced
/// modulo the number of valid crop positions.
pub fn make_silence<R: Rng + ?Sized>(
    noise_files: &[AudioClip],
    coeff: f64,
    crop_offset: usize,
    rng: &mut R,
) -> Result<AudioClip> {
    if noise_files.is_empty() {
        return Err(Error::Augment("no background noise files to synthesize silence from".into()));
    }
    let chosen = &noise_files[rng.gen_range(0..noise_files.len())];
    let noise = if chosen.len() < CLIP_LEN {
        pad_or_trim(chosen, CLIP_LEN)
    } else {
        chosen.clone()
    };
    let offset = crop_offset % (noise.len() - CLIP_LEN + 1);
    mix_background(&AudioClip::silent(CLIP_LEN), &noise, coeff, offset)
}

/// Random shift followed, with probability `noise_prob`, by mixing a random
/// crop of a random noise file. Silence clips (all-zero input) get the same treatment.
pub fn augment<R: Rng + ?Sized>(
    clip: &AudioClip,
    noise_files: &[AudioClip],
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<AudioClip> {
    let shift = if cfg.shift_range_s > 0.0 {
        rng.gen_range(-cfg.shift_range_s..=cfg.shift_range_s)
    } else {
        0.0
    };
    let shifted = time_shift(clip, shift);
    let noisy = !noise_files.is_empty() && rng.gen::<f64>() < cfg.noise_prob;
    if !noisy {
        return Ok(shifted);
    }
    let coeff = rng.gen::<f64>() * cfg.noise_coeff_max;
    let noise = &noise_files[rng.gen_range(0..noise_files.len())];
    let noise = if noise.len() < shifted.len() {
        pad_or_trim(noise, shifted.len())
    } else {
        noise.clone()
    };
    let offset = rng.gen_range(0..=noise.len() - shifted.len());
    mix_background(&shifted, &noise, coeff, offset)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn clip(samples: Vec<f32>) -> AudioClip {
        AudioClip::new(samples, SAMPLE_RATE)
    }

    fn random_clip(rng: &mut ChaCha8Rng, n: usize) -> AudioClip {
        clip((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn pad_trim_cases() {
        let short = pad_or_trim(&clip(vec![0.5; 15_000]), 16_000);
        assert_eq!(short.len(), 16_000);
        assert!(short.samples[15_000..].iter().all(|&s| s == 0.0));
        let exact = clip((0..16_000).map(|i| i as f32 / 16_000.0).collect());
        assert_eq!(pad_or_trim(&exact, 16_000), exact);
        let long = clip((0..17_000).map(|i| i as f32 / 17_000.0).collect());
        assert_eq!(pad_or_trim(&long, 16_000).samples, long.samples[..16_000]);
    }

    #[test]
    fn shift_moves_impulse() {
        let mut s = vec![0.0; 16_000];
        s[0] = 1.0;
        let shifted = time_shift(&clip(s.clone()), 0.1);
        assert_eq!(shifted.samples[1600], 1.0);
        assert_eq!(shifted.samples.iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(time_shift(&clip(s.clone()), 0.0).samples, s);

        let mut s = vec![0.0; 16_000];
        s[1600] = 1.0;
        let back = time_shift(&clip(s), -0.1);
        assert_eq!(back.samples[0], 1.0);
        assert_eq!(back.len(), 16_000);
    }

    #[test]
    fn mix_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_clip(&mut rng, 1000);
        let noise = random_clip(&mut rng, 3000);
        assert_eq!(mix_background(&c, &noise, 0.0, 17).unwrap(), c);

        let zero = clip(vec![0.0; 100]);
        let ones = clip(vec![1.0; 100]);
        let mixed = mix_background(&zero, &ones, 0.1, 0).unwrap();
        assert!(mixed.samples.iter().all(|&v| (v - 0.1).abs() < 1e-7));

        assert!(mix_background(&c, &noise, 0.1, 2001).is_err());
    }

    #[test]
    fn mix_matches_elementwise_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = random_clip(&mut rng, 500);
            let noise = random_clip(&mut rng, 900);
            let coeff: f64 = rng.gen_range(0.0..2.0);
            let off = rng.gen_range(0..=400);
            let got = mix_background(&c, &noise, coeff, off).unwrap();
            for i in 0..c.len() {
                let mut v = c.samples[i] as f64 + coeff * noise.samples[off + i] as f64;
                if v > 1.0 {
                    v = 1.0;
                }
                if v < -1.0 {
                    v = -1.0;
                }
                assert!((got.samples[i] as f64 - v).abs() < 1e-12 + f32::EPSILON as f64);
            }
        }
    }

    #[test]
    fn silence_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = vec![random_clip(&mut rng, 40_000), random_clip(&mut rng, 8_000)];
        let zero = make_silence(&noise, 0.0, 123, &mut rng).unwrap();
        assert_eq!(zero.len(), CLIP_LEN);
        assert!(zero.samples.iter().all(|&s| s == 0.0));
        let a = make_silence(&noise, 0.3, 999, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = make_silence(&noise, 0.3, 999, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), CLIP_LEN);
        assert!(make_silence(&[], 0.1, 0, &mut rng).is_err());
    }

    #[test]
    fn zero_augmentation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_clip(&mut rng, CLIP_LEN);
        let noise = vec![random_clip(&mut rng, 20_000)];
        let cfg = AugmentConfig {
            shift_range_s: 0.0,
            noise_coeff_max: 0.0,
            noise_prob: 1.0,
            rng_seed: 0,
        };
        assert_eq!(augment(&c, &noise, &cfg, &mut rng).unwrap(), c);
    }
}
