//! Arithmetic layers and sequential chains of them.

mod checkpoint;
mod layers;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use layers::{
    dense_forward, nalu_forward, nalu_paths, nau_forward, nmu_forward, npu_forward, Activation,
    EPS,
};

use crate::tensor::{Graph, Tensor, Var};
use crate::{Error, Result};

/// Magnitude above which a parameter counts as non-zero.
pub const DEFAULT_NONZERO_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct NauParams {
    pub a: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmuParams {
    pub m: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaluParams {
    pub w: Tensor,
    pub m: Tensor,
    pub g: Tensor,
}

/// Parameters shared by the three power-unit variants.
///
/// `gated = false` is the naive unit (no relevance gate); `real_only = true`
/// drops the imaginary weights, which then stay at zero and are neither
/// trained nor counted.
#[derive(Debug, Clone, PartialEq)]
pub struct NpuParams {
    pub wr: Tensor,
    pub wi: Tensor,
    /// `1 × in` relevance gate, clamped to `[0, 1]` in the forward pass.
    pub g: Tensor,
    pub gated: bool,
    pub real_only: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Tensor,
    /// `1 × out`
    pub b: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    Nau,
    Nmu,
    Nalu,
    NaiveNpu,
    Npu,
    RealNpu,
    Dense,
    DenseSigmoid,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Nau => "nau",
            LayerKind::Nmu => "nmu",
            LayerKind::Nalu => "nalu",
            LayerKind::NaiveNpu => "naive_npu",
            LayerKind::Npu => "npu",
            LayerKind::RealNpu => "real_npu",
            LayerKind::Dense => "dense",
            LayerKind::DenseSigmoid => "dense_sigmoid",
        }
    }

    /// Draws initial parameters for an `inp → out` layer.
    pub fn init(self, inp: usize, out: usize, rng: &mut impl Rng) -> Result<Layer> {
        if inp == 0 || out == 0 {
            return Err(Error::invalid("layer size", format!("{inp}x{out}")));
        }
        Ok(match self {
            LayerKind::Nau => {
                let a = glorot(out, inp, rng).map(|v| v.clamp(-1.0, 1.0));
                Layer::Nau(NauParams { a })
            }
            LayerKind::Nmu => {
                let c = (6.0 / (inp + out) as f64).sqrt().min(0.25);
                let m = uniform(out, inp, 0.5 - c, 0.5 + c, rng);
                Layer::Nmu(NmuParams { m })
            }
            LayerKind::Nalu => Layer::Nalu(NaluParams {
                w: glorot(out, inp, rng),
                m: glorot(out, inp, rng),
                g: glorot(out, inp, rng),
            }),
            LayerKind::NaiveNpu | LayerKind::Npu | LayerKind::RealNpu => Layer::Npu(NpuParams {
                wr: glorot(out, inp, rng),
                wi: Tensor::zeros(out, inp),
                g: Tensor::full(1, inp, 0.5),
                gated: self != LayerKind::NaiveNpu,
                real_only: self == LayerKind::RealNpu,
            }),
            LayerKind::Dense | LayerKind::DenseSigmoid => Layer::Dense(DenseParams {
                w: glorot(out, inp, rng),
                b: Tensor::zeros(1, out),
                activation: if self == LayerKind::Dense {
                    Activation::Identity
                } else {
                    Activation::Sigmoid
                },
            }),
        })
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nau" => LayerKind::Nau,
            "nmu" => LayerKind::Nmu,
            "nalu" => LayerKind::Nalu,
            "naive_npu" | "naivenpu" => LayerKind::NaiveNpu,
            "npu" => LayerKind::Npu,
            "real_npu" | "realnpu" => LayerKind::RealNpu,
            "dense" | "dense_identity" => LayerKind::Dense,
            "dense_sigmoid" => LayerKind::DenseSigmoid,
            _ => {
                return Err(Error::Unknown {
                    what: "layer kind",
                    name: s.to_string(),
                })
            }
        })
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rows, cols, -limit, limit, rng)
}

fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(rows, cols, data).expect("length matches")
}

/// Initial parameters for a single layer, deterministic in `seed`.
pub fn init_params(kind: LayerKind, inp: usize, out: usize, seed: u64) -> Result<Layer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kind.init(inp, out, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Nau(NauParams),
    Nmu(NmuParams),
    Nalu(NaluParams),
    Npu(NpuParams),
    Dense(DenseParams),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Nau(_) => LayerKind::Nau,
            Layer::Nmu(_) => LayerKind::Nmu,
            Layer::Nalu(_) => LayerKind::Nalu,
            Layer::Npu(p) if !p.gated => LayerKind::NaiveNpu,
            Layer::Npu(p) if p.real_only => LayerKind::RealNpu,
            Layer::Npu(_) => LayerKind::Npu,
            Layer::Dense(p) => match p.activation {
                Activation::Identity => LayerKind::Dense,
                Activation::Sigmoid => LayerKind::DenseSigmoid,
            },
        }
    }

    /// `(in, out)` widths.
    pub fn widths(&self) -> (usize, usize) {
        let w = match self {
            Layer::Nau(p) => &p.a,
            Layer::Nmu(p) => &p.m,
            Layer::Nalu(p) => &p.w,
            Layer::Npu(p) => &p.wr,
            Layer::Dense(p) => &p.w,
        };
        (w.cols(), w.rows())
    }

    /// Trainable parameters by name. Frozen tensors (the imaginary weights
    /// of a real-only unit, the unused gate of a naive unit) are left out.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Nau(p) => vec![("A", &p.a)],
            Layer::Nmu(p) => vec![("M", &p.m)],
            Layer::Nalu(p) => vec![("W", &p.w), ("M", &p.m), ("G", &p.g)],
            Layer::Npu(p) => {
                let mut v = vec![("Wr", &p.wr)];
                if !p.real_only {
                    v.push(("Wi", &p.wi));
                }
                if p.gated {
                    v.push(("g", &p.g));
                }
                v
            }
            Layer::Dense(p) => vec![("W", &p.w), ("b", &p.b)],
        }
    }

    /// Same order as [`Layer::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Nau(p) => vec![&mut p.a],
            Layer::Nmu(p) => vec![&mut p.m],
            Layer::Nalu(p) => vec![&mut p.w, &mut p.m, &mut p.g],
            Layer::Npu(p) => {
                let mut v = vec![&mut p.wr];
                if !p.real_only {
                    v.push(&mut p.wi);
                }
                if p.gated {
                    v.push(&mut p.g);
                }
                v
            }
            Layer::Dense(p) => vec![&mut p.w, &mut p.b],
        }
    }

    /// Applies the layer given graph handles for its parameters, in
    /// [`Layer::params`] order.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], x: Var) -> Result<Var> {
        match self {
            Layer::Nau(_) => nau_forward(g, vars[0], x),
            Layer::Nmu(_) => nmu_forward(g, vars[0], x),
            Layer::Nalu(_) => nalu_forward(g, vars[0], vars[1], vars[2], x),
            Layer::Npu(p) => {
                let mut it = vars.iter().copied();
                let wr = it.next().expect("Wr bound");
                let wi = if p.real_only { None } else { it.next() };
                let gate = if p.gated { it.next() } else { None };
                npu_forward(g, wr, wi, gate, x)
            }
            Layer::Dense(p) => dense_forward(g, vars[0], vars[1], p.activation, x),
        }
    }

    pub fn is_nau_or_nmu(&self) -> bool {
        matches!(self, Layer::Nau(_) | Layer::Nmu(_))
    }
}

/// Number of values with magnitude strictly above `threshold`.
pub fn count_nonzero<'a>(values: impl IntoIterator<Item = &'a f64>, threshold: f64) -> usize {
    values.into_iter().filter(|v| v.abs() > threshold).count()
}

/// Graph handles for every trainable tensor of a [`Chain`], per layer.
#[derive(Debug, Clone)]
pub struct BoundChain {
    vars: Vec<Vec<Var>>,
}

impl BoundChain {
    pub fn layer(&self, i: usize) -> &[Var] {
        &self.vars[i]
    }

    /// All handles flattened in [`Chain::params`] order.
    pub fn all(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars.iter().flatten().copied()
    }
}

/// Layers applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    layers: Vec<Layer>,
}

impl Chain {
    /// Checks that adjacent widths agree.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyChain);
        }
        for i in 1..layers.len() {
            let prev_out = layers[i - 1].widths().1;
            let inp = layers[i].widths().0;
            if prev_out != inp {
                return Err(Error::WidthMismatch {
                    layer: i,
                    expected: inp,
                    got: prev_out,
                });
            }
        }
        Ok(Self { layers })
    }

    /// Initializes a chain from `(kind, in, out)` triples with one RNG stream.
    pub fn init(spec: &[(LayerKind, usize, usize)], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .iter()
            .map(|&(kind, inp, out)| kind.init(inp, out, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].widths().0
    }

    pub fn out_width(&self) -> usize {
        self.layers[self.layers.len() - 1].widths().1
    }

    /// Short description such as `npu(2,6)>nau(6,4)`.
    pub fn describe(&self) -> String {
        self.layers
            .iter()
            .map(|l| {
                let (i, o) = l.widths();
                format!("{}({i},{o})", l.kind())
            })
            .collect::<Vec<_>>()
            .join(">")
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| l.params().into_iter().map(|(_, t)| t))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn count_nonzero(&self, threshold: f64) -> usize {
        self.params()
            .iter()
            .map(|t| count_nonzero(t.data(), threshold))
            .sum()
    }

    /// Registers every trainable tensor as a parameter leaf.
    pub fn bind(&self, g: &mut Graph) -> BoundChain {
        self.bind_with(g, true)
    }

    fn bind_with(&self, g: &mut Graph, trainable: bool) -> BoundChain {
        let vars = self
            .layers
            .iter()
            .map(|l| {
                l.params()
                    .into_iter()
                    .map(|(_, t)| {
                        if trainable {
                            g.param(t.clone())
                        } else {
                            g.constant(t.clone())
                        }
                    })
                    .collect()
            })
            .collect();
        BoundChain { vars }
    }

    pub fn forward(&self, g: &mut Graph, bound: &BoundChain, x: Var) -> Result<Var> {
        let width = g.value(x).cols();
        if width != self.in_width() {
            return Err(Error::WidthMismatch {
                layer: 0,
                expected: self.in_width(),
                got: width,
            });
        }
        self.layers
            .iter()
            .enumerate()
            .try_fold(x, |h, (i, layer)| layer.forward(g, bound.layer(i), h))
    }

    /// Forward pass without gradient tracking.
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind_with(&mut g, false);
        let xv = g.constant(x.clone());
        let y = self.forward(&mut g, &bound, xv)?;
        Ok(g.value(y).clone())
    }
}
