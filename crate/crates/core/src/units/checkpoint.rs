//! Plain-text checkpoints.
//!
//! ```text
//! layer_index,kind,param_name,rows,cols
//! 0,npu,Wr,2,3
//! 0.1,0.2,0.3
//! 0.4,0.5,0.6
//! 0,npu,g,1,3
//! ...
//! ```
//!
//! Every block starts with a descriptor line followed by `rows` lines of
//! row-major values. Values use Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces parameters bit for bit.

use std::io::{BufRead, Write};

use super::{Activation, Chain, DenseParams, Layer, LayerKind, NaluParams, NauParams, NmuParams, NpuParams};
use crate::tensor::Tensor;
use crate::{Error, Result};

const HEADER: &str = "layer_index,kind,param_name,rows,cols";

pub fn write_checkpoint(chain: &Chain, mut w: impl Write) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    for (i, layer) in chain.layers().iter().enumerate() {
        for (name, t) in layer.params() {
            writeln!(w, "{i},{},{name},{},{}", layer.kind(), t.rows(), t.cols())?;
            for r in 0..t.rows() {
                let line: Vec<String> = t.row_slice(r).iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", line.join(","))?;
            }
        }
    }
    Ok(())
}

struct Block {
    layer: usize,
    kind: LayerKind,
    name: String,
    tensor: Tensor,
}

pub fn read_checkpoint(r: impl BufRead) -> Result<Chain> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, reason: &str| Error::Checkpoint {
        line: line + 1,
        reason: reason.to_string(),
    };
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == HEADER => {}
        _ => return Err(bad(0, "missing header")),
    }
    let mut blocks = Vec::new();
    while let Some((ln, line)) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(ln, "expected 5 descriptor fields"));
        }
        let layer: usize = f[0].parse().map_err(|_| bad(ln, "layer index"))?;
        let kind: LayerKind = f[1].parse()?;
        let rows: usize = f[3].parse().map_err(|_| bad(ln, "rows"))?;
        let cols: usize = f[4].parse().map_err(|_| bad(ln, "cols"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) = lines.next().ok_or_else(|| bad(ln, "truncated block"))?;
            let row = row?;
            for v in row.split(',') {
                data.push(v.trim().parse::<f64>().map_err(|_| bad(ln, "bad value"))?);
            }
        }
        let tensor = Tensor::new(rows, cols, data).map_err(|e| bad(ln, &e.to_string()))?;
        blocks.push(Block {
            layer,
            kind,
            name: f[2].to_string(),
            tensor,
        });
    }

    let mut layers = Vec::new();
    let mut idx = 0;
    while idx < blocks.len() {
        let li = blocks[idx].layer;
        if li != layers.len() {
            return Err(bad(0, "layer indices must be consecutive"));
        }
        let kind = blocks[idx].kind;
        let end = blocks[idx..]
            .iter()
            .position(|b| b.layer != li)
            .map_or(blocks.len(), |p| idx + p);
        let take = |name: &str| -> Option<Tensor> {
            blocks[idx..end]
                .iter()
                .find(|b| b.name == name)
                .map(|b| b.tensor.clone())
        };
        let missing = |name: &str| bad(0, &format!("layer {li}: missing {name}"));
        let layer = match kind {
            LayerKind::Nau => Layer::Nau(NauParams {
                a: take("A").ok_or_else(|| missing("A"))?,
            }),
            LayerKind::Nmu => Layer::Nmu(NmuParams {
                m: take("M").ok_or_else(|| missing("M"))?,
            }),
            LayerKind::Nalu => Layer::Nalu(NaluParams {
                w: take("W").ok_or_else(|| missing("W"))?,
                m: take("M").ok_or_else(|| missing("M"))?,
                g: take("G").ok_or_else(|| missing("G"))?,
            }),
            LayerKind::NaiveNpu | LayerKind::Npu | LayerKind::RealNpu => {
                let wr = take("Wr").ok_or_else(|| missing("Wr"))?;
                let (o, i) = wr.shape();
                let wi = if kind == LayerKind::RealNpu {
                    Tensor::zeros(o, i)
                } else {
                    take("Wi").ok_or_else(|| missing("Wi"))?
                };
                let g = if kind == LayerKind::NaiveNpu {
                    Tensor::full(1, i, 0.5)
                } else {
                    take("g").ok_or_else(|| missing("g"))?
                };
                Layer::Npu(NpuParams {
                    wr,
                    wi,
                    g,
                    gated: kind != LayerKind::NaiveNpu,
                    real_only: kind == LayerKind::RealNpu,
                })
            }
            LayerKind::Dense | LayerKind::DenseSigmoid => Layer::Dense(DenseParams {
                w: take("W").ok_or_else(|| missing("W"))?,
                b: take("b").ok_or_else(|| missing("b"))?,
                activation: if kind == LayerKind::Dense {
                    Activation::Identity
                } else {
                    Activation::Sigmoid
                },
            }),
        };
        layers.push(layer);
        idx = end;
    }
    Chain::new(layers)
}
