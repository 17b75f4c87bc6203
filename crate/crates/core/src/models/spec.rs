use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base channel schedule at width multiplier 1: stem, then one entry per stage.
pub const BASE_CHANNELS: [usize; 4] = [16, 24, 32, 48];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Temporal convolutions over a `t x 1 x f` input.
    TcResnet,
    /// The same topology with 3x3 convolutions over a `t x f x 1` input.
    #[serde(rename = "2d_resnet")]
    Resnet2d,
    /// `Resnet2d` with a 4x4/4 average pool after the stem.
    #[serde(rename = "2d_resnet_pool")]
    Resnet2dPool,
}

impl Family {
    pub fn is_temporal(self) -> bool {
        self == Family::TcResnet
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub depth: usize,
    pub width_multiplier: f64,
    pub n_classes: usize,
    pub input_t: usize,
    pub input_f: usize,
}

impl ModelSpec {
    pub fn new(family: Family, depth: usize, width_multiplier: f64) -> Result<Self> {
        let spec = Self {
            family,
            depth,
            width_multiplier,
            n_classes: 12,
            input_t: 98,
            input_f: 40,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tc_resnet8() -> Self {
        Self::new(Family::TcResnet, 8, 1.0).expect("valid")
    }

    pub fn tc_resnet14() -> Self {
        Self::new(Family::TcResnet, 14, 1.0).expect("valid")
    }

    pub fn resnet2d8() -> Self {
        Self::new(Family::Resnet2d, 8, 1.0).expect("valid")
    }

    pub fn resnet2d8_pool() -> Self {
        Self::new(Family::Resnet2dPool, 8, 1.0).expect("valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth != 8 && self.depth != 14 {
            return Err(Error::Model(format!("depth must be 8 or 14, got {}", self.depth)));
        }
        if !(self.width_multiplier.is_finite() && self.width_multiplier > 0.0) {
            return Err(Error::Model(format!(
                "width multiplier must be positive, got {}",
                self.width_multiplier
            )));
        }
        if self.n_classes == 0 || self.input_t == 0 || self.input_f == 0 {
            return Err(Error::Model("class count and input dims must be positive".into()));
        }
        if self.channels().contains(&0) {
            return Err(Error::Model(format!(
                "width multiplier {} rounds a layer to zero channels",
                self.width_multiplier
            )));
        }
        Ok(())
    }

    /// `round(k * {16, 24, 32, 48})`, halves rounded up.
    pub fn channels(&self) -> [usize; 4] {
        BASE_CHANNELS.map(|c| (c as f64 * self.width_multiplier + 0.5).floor() as usize)
    }

    /// Residual blocks as `(stride, out_channels)`.
    pub fn block_schedule(&self) -> Vec<(usize, usize)> {
        let [_, c1, c2, c3] = self.channels();
        match self.depth {
            8 => vec![(2, c1), (2, c2), (2, c3)],
            _ => vec![(2, c1), (1, c1), (2, c2), (1, c2), (2, c3), (1, c3)],
        }
    }

    /// Input tensor shape (without batch axis) the family consumes.
    pub fn input_shape(&self) -> [usize; 3] {
        if self.family.is_temporal() {
            [self.input_t, 1, self.input_f]
        } else {
            [self.input_t, self.input_f, 1]
        }
    }

    pub fn name(&self) -> String {
        let base = match self.family {
            Family::TcResnet => format!("tc-resnet{}", self.depth),
            Family::Resnet2d => format!("2d-resnet{}", self.depth),
            Family::Resnet2dPool => format!("2d-resnet{}-pool", self.depth),
        };
        if self.width_multiplier == 1.0 {
            base
        } else {
            format!("{base}-{}", self.width_multiplier)
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses names such as `tc-resnet8`, `tc-resnet14-1.5`, `2d-resnet8` and `2d-resnet8-pool`.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Model(format!("unrecognized model name {s:?}"));
        let (family, rest) = if let Some(r) = s.strip_prefix("tc-resnet") {
            (Family::TcResnet, r)
        } else if let Some(r) = s.strip_prefix("2d-resnet") {
            (Family::Resnet2d, r)
        } else {
            return Err(bad());
        };
        let mut parts = rest.split('-');
        let depth: usize = parts.next().and_then(|d| d.parse().ok()).ok_or_else(bad)?;
        let mut family = family;
        let mut width = 1.0;
        for part in parts {
            if part == "pool" && family == Family::Resnet2d {
                family = Family::Resnet2dPool;
            } else {
                width = part.parse().map_err(|_| bad())?;
            }
        }
        Self::new(family, depth, width)
    }
}
