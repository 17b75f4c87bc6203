//! Layer plan derived from a [`ModelSpec`].

use super::spec::{Family, ModelSpec};

/// Dropout applied between global pooling and the classifier.
pub const HEAD_DROPOUT: f64 = 0.5;
pub const POOL_WINDOW: usize = 4;
pub const POOL_STRIDE: usize = 4;

/// A bias-free convolution followed by batch norm and optionally ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvUnit {
    /// Parameter-name prefix, e.g. `block2/conv1`.
    pub name: String,
    pub k_h: usize,
    pub k_w: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub stride: (usize, usize),
    pub relu: bool,
}

impl ConvUnit {
    pub fn weight_shape(&self) -> Vec<usize> {
        vec![self.k_h, self.k_w, self.c_in, self.c_out]
    }

    pub fn param(&self, suffix: &str) -> String {
        format!("{}/{suffix}", self.name)
    }
}

/// Two stacked units plus a shortcut; `shortcut` is `None` for the identity path.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPlan {
    pub name: String,
    pub first: ConvUnit,
    pub second: ConvUnit,
    pub shortcut: Option<ConvUnit>,
}

impl BlockPlan {
    pub fn units(&self) -> impl Iterator<Item = &ConvUnit> {
        [&self.first, &self.second].into_iter().chain(self.shortcut.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub input_shape: [usize; 3],
    pub stem: ConvUnit,
    pub pool: Option<(usize, usize)>,
    pub blocks: Vec<BlockPlan>,
    pub fc_in: usize,
    pub n_classes: usize,
}

impl Architecture {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        let temporal = spec.family.is_temporal();
        let kernel = |k: usize| if temporal { (k, 1) } else { (3, 3) };
        let stride = |s: usize| if temporal { (s, 1) } else { (s, s) };
        let unit = |name: String, k: (usize, usize), c_in, c_out, s: (usize, usize), relu| ConvUnit {
            name,
            k_h: k.0,
            k_w: k.1,
            c_in,
            c_out,
            stride: s,
            relu,
        };

        let input_shape = spec.input_shape();
        let channels = spec.channels();
        let stem = unit("stem".into(), kernel(3), input_shape[2], channels[0], (1, 1), true);
        let pool = (spec.family == Family::Resnet2dPool).then_some((POOL_WINDOW, POOL_STRIDE));

        let mut blocks = Vec::new();
        let mut c_in = channels[0];
        for (i, (s, c_out)) in spec.block_schedule().into_iter().enumerate() {
            let name = format!("block{}", i + 1);
            let first = unit(format!("{name}/conv1"), kernel(9), c_in, c_out, stride(s), true);
            let second = unit(format!("{name}/conv2"), kernel(9), c_out, c_out, (1, 1), false);
            let shortcut = (s != 1 || c_in != c_out)
                .then(|| unit(format!("{name}/shortcut"), (1, 1), c_in, c_out, stride(s), true));
            blocks.push(BlockPlan {
                name,
                first,
                second,
                shortcut,
            });
            c_in = c_out;
        }

        Self {
            input_shape,
            stem,
            pool,
            blocks,
            fc_in: c_in,
            n_classes: spec.n_classes,
        }
    }

    /// Every conv unit in topological order.
    pub fn units(&self) -> impl Iterator<Item = &ConvUnit> {
        std::iter::once(&self.stem).chain(self.blocks.iter().flat_map(|b| b.units()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tc_resnet8_plan() {
        let a = Architecture::from_spec(&ModelSpec::tc_resnet8());
        assert_eq!(a.input_shape, [98, 1, 40]);
        assert_eq!(a.stem.weight_shape(), vec![3, 1, 40, 16]);
        assert_eq!(a.blocks.len(), 3);
        assert!(a.blocks.iter().all(|b| b.shortcut.is_some()));
        assert_eq!(a.blocks[0].first.weight_shape(), vec![9, 1, 16, 24]);
        assert_eq!(a.blocks[0].first.stride, (2, 1));
        assert_eq!(a.blocks[0].second.stride, (1, 1));
        assert_eq!(a.fc_in, 48);
    }

    #[test]
    fn tc_resnet14_identity_shortcuts() {
        let a = Architecture::from_spec(&ModelSpec::tc_resnet14());
        let identity: Vec<bool> = a.blocks.iter().map(|b| b.shortcut.is_none()).collect();
        assert_eq!(identity, vec![false, true, false, true, false, true]);
    }

    #[test]
    fn resnet2d_plan() {
        let a = Architecture::from_spec(&ModelSpec::resnet2d8());
        assert_eq!(a.stem.weight_shape(), vec![3, 3, 1, 16]);
        assert_eq!(a.blocks[2].second.weight_shape(), vec![3, 3, 48, 48]);
        assert_eq!(a.blocks[0].first.stride, (2, 2));
        assert!(a.pool.is_none());
        assert_eq!(Architecture::from_spec(&ModelSpec::resnet2d8_pool()).pool, Some((4, 4)));
    }
}
