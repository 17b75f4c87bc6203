use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ModelInstance;
use crate::nn_core::{Mode, Tensor};

pub const DEFAULT_RUNS: usize = 50;
pub const DEFAULT_WARMUP: usize = 5;

/// Wall-clock inference times, serialized as the `bench` JSON document.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatencyReport {
    pub model: String,
    pub runs: usize,
    pub warmup: usize,
    pub times_ms: Vec<f64>,
    pub mean_ms: f64,
    /// Population standard deviation of `times_ms`.
    pub stddev_ms: f64,
    pub threads: usize,
}

impl LatencyReport {
    fn from_times(model: String, warmup: usize, times_ms: Vec<f64>) -> Self {
        let n = times_ms.len() as f64;
        let mean_ms = times_ms.iter().sum::<f64>() / n;
        let var = times_ms.iter().map(|t| (t - mean_ms).powi(2)).sum::<f64>() / n;
        Self {
            model,
            runs: times_ms.len(),
            warmup,
            times_ms,
            mean_ms,
            stddev_ms: var.sqrt(),
            threads: 1,
        }
    }
}

/// Times `runs` forward passes of one MFCC input after `warmup` untimed passes,
/// on a single thread. Feature extraction is not included.
pub fn benchmark_latency(
    instance: &ModelInstance<f32>,
    input: &Tensor<f32>,
    runs: usize,
    warmup: usize,
) -> Result<LatencyReport> {
    if runs == 0 {
        return Err(Error::Model("benchmark needs at least one run".into()));
    }
    if instance.mode() != Mode::Infer {
        return Err(Error::Model("benchmark needs an infer-mode instance".into()));
    }
    let measure = || -> Result<Vec<f64>> {
        for _ in 0..warmup {
            std::hint::black_box(instance.forward(input)?);
        }
        let mut times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let start = Instant::now();
            std::hint::black_box(instance.forward(std::hint::black_box(input))?);
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        Ok(times)
    };
    let times = on_one_thread(measure)?;
    Ok(LatencyReport::from_times(instance.spec().name(), warmup, times))
}

#[cfg(feature = "parallel")]
fn on_one_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn on_one_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    f()
}
