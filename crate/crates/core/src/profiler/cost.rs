//! Analytic parameter and FLOP accounting.
//!
//! Conventions: a convolution costs `2 * k_h * k_w * c_in * c_out` FLOPs per
//! output position and the classifier `2 * c_in * c_out`; batch norm, ReLU,
//! pooling, residual adds and softmax are free. Batch norm owns four
//! parameters per channel, two of them (the moving statistics) not trainable.

use std::fmt::{self, Write as _};
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::models::{Architecture, ConvUnit, ModelSpec};
use crate::nn_core::same_padding;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostRow {
    pub layer: String,
    pub out_shape: Vec<usize>,
    pub params_all: u64,
    pub params_trainable: u64,
    pub flops: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub model: String,
    pub rows: Vec<CostRow>,
}

impl CostReport {
    pub fn total_params(&self) -> u64 {
        self.rows.iter().map(|r| r.params_all).sum()
    }

    pub fn trainable_params(&self) -> u64 {
        self.rows.iter().map(|r| r.params_trainable).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.rows.iter().map(|r| r.flops).sum()
    }

    /// `layer,out_shape,params_all,params_trainable,flops`; shapes are `x`-joined.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "layer,out_shape,params_all,params_trainable,flops")?;
        for r in &self.rows {
            writeln!(
                sink,
                "{},{},{},{},{}",
                r.layer,
                shape_str(&r.out_shape),
                r.params_all,
                r.params_trainable,
                r.flops
            )?;
        }
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let headers = ["layer", "out_shape", "params_all", "params_trainable", "flops"];
        let mut cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.layer.clone(),
                    shape_str(&r.out_shape),
                    r.params_all.to_string(),
                    r.params_trainable.to_string(),
                    r.flops.to_string(),
                ]
            })
            .collect();
        cells.push([
            "total".into(),
            String::new(),
            self.total_params().to_string(),
            self.trainable_params().to_string(),
            self.total_flops().to_string(),
        ]);
        let mut widths = headers.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: [&str; 5]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}  {:>w4$}",
                row[0],
                row[1],
                row[2],
                row[3],
                row[4],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
                w4 = widths[4]
            );
        };
        line(&mut out, headers);
        let rule = widths.map(|w| "-".repeat(w));
        line(&mut out, [&rule[0], &rule[1], &rule[2], &rule[3], &rule[4]]);
        let n = cells.len();
        for (i, row) in cells.iter().enumerate() {
            if i == n - 1 {
                line(&mut out, [&rule[0], &rule[1], &rule[2], &rule[3], &rule[4]]);
            }
            line(&mut out, [&row[0], &row[1], &row[2], &row[3], &row[4]]);
        }
        out
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_table())
    }
}

fn shape_str(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn conv_rows(unit: &ConvUnit, input: [usize; 3], rows: &mut Vec<CostRow>) -> [usize; 3] {
    let out_h = same_padding(input[0], unit.k_h, unit.stride.0).out;
    let out_w = same_padding(input[1], unit.k_w, unit.stride.1).out;
    let macs_per_position = (unit.k_h * unit.k_w * unit.c_in * unit.c_out) as u64;
    let out = [out_h, out_w, unit.c_out];
    rows.push(CostRow {
        layer: format!("{}/conv", unit.name),
        out_shape: out.to_vec(),
        params_all: macs_per_position,
        params_trainable: macs_per_position,
        flops: 2 * macs_per_position * (out_h * out_w) as u64,
    });
    let c = unit.c_out as u64;
    rows.push(CostRow {
        layer: format!("{}/bn", unit.name),
        out_shape: out.to_vec(),
        params_all: 4 * c,
        params_trainable: 2 * c,
        flops: 0,
    });
    out
}

/// Per-layer cost of `spec` under the declared conventions.
pub fn cost_report(spec: &ModelSpec) -> CostReport {
    let arch = Architecture::from_spec(spec);
    let mut rows = Vec::new();
    let mut shape = conv_rows(&arch.stem, arch.input_shape, &mut rows);
    if let Some((window, stride)) = arch.pool {
        shape = [
            same_padding(shape[0], window, stride).out,
            same_padding(shape[1], window, stride).out,
            shape[2],
        ];
        rows.push(CostRow {
            layer: "stem/avg_pool".into(),
            out_shape: shape.to_vec(),
            params_all: 0,
            params_trainable: 0,
            flops: 0,
        });
    }
    for block in &arch.blocks {
        let input = shape;
        let mid = conv_rows(&block.first, input, &mut rows);
        shape = conv_rows(&block.second, mid, &mut rows);
        if let Some(sc) = &block.shortcut {
            let s = conv_rows(sc, input, &mut rows);
            debug_assert_eq!(s, shape);
        }
    }
    rows.push(CostRow {
        layer: "global_avg_pool".into(),
        out_shape: vec![1, 1, shape[2]],
        params_all: 0,
        params_trainable: 0,
        flops: 0,
    });
    let fc = (arch.fc_in * arch.n_classes) as u64;
    rows.push(CostRow {
        layer: "fc".into(),
        out_shape: vec![arch.n_classes],
        params_all: fc,
        params_trainable: fc,
        flops: 2 * fc,
    });
    CostReport {
        model: spec.name(),
        rows,
    }
}

/// All parameters, including batch-norm moving statistics.
pub fn count_params(spec: &ModelSpec) -> u64 {
    cost_report(spec).total_params()
}

pub fn count_flops(spec: &ModelSpec) -> u64 {
    cost_report(spec).total_flops()
}

/// Receptive field in input frames after each layer, given `(kernel, stride)`
/// pairs: `r += (k - 1) * jump; jump *= s`, from `r = jump = 1`.
pub fn receptive_field(layers: &[(usize, usize)]) -> Vec<usize> {
    let (mut r, mut jump) = (1usize, 1usize);
    layers
        .iter()
        .map(|&(k, s)| {
            r += (k - 1) * jump;
            jump *= s;
            r
        })
        .collect()
}

/// Receptive field along time after each layer on the longest path of `spec`
/// (stem, then both convolutions of every block).
pub fn temporal_receptive_field(spec: &ModelSpec) -> Vec<(String, usize)> {
    let arch = Architecture::from_spec(spec);
    let units: Vec<&ConvUnit> = std::iter::once(&arch.stem)
        .chain(arch.blocks.iter().flat_map(|b| [&b.first, &b.second]))
        .collect();
    let mut layers: Vec<(usize, usize)> = Vec::new();
    let mut names = Vec::new();
    for (i, u) in units.iter().enumerate() {
        layers.push((u.k_h, u.stride.0));
        names.push(u.name.clone());
        if i == 0 {
            if let Some((window, stride)) = arch.pool {
                layers.push((window, stride));
                names.push("stem/avg_pool".into());
            }
        }
    }
    names.into_iter().zip(receptive_field(&layers)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fc_alone() {
        let r = cost_report(&ModelSpec::tc_resnet8());
        assert_eq!(r.rows.last().unwrap().flops, 1_152);
    }

    #[test]
    fn tc_resnet8_time_axis() {
        let r = cost_report(&ModelSpec::tc_resnet8());
        let lens: Vec<usize> = r
            .rows
            .iter()
            .filter(|row| row.layer.ends_with("conv1/conv") || row.layer == "stem/conv")
            .map(|row| row.out_shape[0])
            .collect();
        assert_eq!(lens, vec![98, 49, 25, 13]);
    }

    #[test]
    fn totals_are_row_sums() {
        let r = cost_report(&ModelSpec::tc_resnet14());
        assert!(r.total_params() >= r.trainable_params());
        assert_eq!(r.total_params(), r.rows.iter().map(|x| x.params_all).sum::<u64>());
    }

    #[test]
    fn receptive_fields() {
        for n in 1..10 {
            assert_eq!(*receptive_field(&vec![(3, 1); n]).last().unwrap(), 2 * n + 1);
        }
        assert_eq!(receptive_field(&[(9, 1)]), vec![9]);
        assert_eq!(receptive_field(&[(3, 1), (9, 2), (9, 1)]), vec![3, 11, 27]);
    }

    #[test]
    fn csv_and_table() {
        let r = cost_report(&ModelSpec::tc_resnet8());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("layer,out_shape,params_all,params_trainable,flops\nstem/conv,98x1x16,1920,1920,376320\n"));
        let table = r.to_table();
        assert!(table.contains("65824") && table.contains("3045120"));
    }
}
