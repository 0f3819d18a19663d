//! Dataset generators for the arithmetic benchmarks and the identity toy task.

mod sobol;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use sobol::{sobol_points, Sobol, MAX_DIM as SOBOL_MAX_DIM};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Rows whose first subset sum is closer to zero than this are redrawn for
/// the reciprocal task.
pub const MIN_DIVISOR: f64 = 1e-3;

/// Index of the first validation point in the Sobol stream, far past any
/// training budget.
pub const VALIDATION_SOBOL_OFFSET: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Simple,
    LargeScale,
    IdentityToy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Mul,
    Div,
    Sqrt,
    /// All four outputs of the simple task at once.
    All4,
}

impl ArithOp {
    pub const FOUR: [ArithOp; 4] = [ArithOp::Add, ArithOp::Mul, ArithOp::Div, ArithOp::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            ArithOp::Add => "add",
            ArithOp::Mul => "mul",
            ArithOp::Div => "div",
            ArithOp::Sqrt => "sqrt",
            ArithOp::All4 => "all4",
        }
    }

    /// Output column of this op in the simple task.
    pub fn simple_index(self) -> Option<usize> {
        ArithOp::FOUR.iter().position(|&o| o == self)
    }
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArithOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "add" => ArithOp::Add,
            "mul" | "mult" => ArithOp::Mul,
            "div" => ArithOp::Div,
            "sqrt" => ArithOp::Sqrt,
            "all4" => ArithOp::All4,
            _ => {
                return Err(Error::Unknown {
                    what: "operation",
                    name: s.into(),
                })
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform,
    Sobol,
    Grid,
}

/// A sampling range: `U(lo, hi)`, `Sobol(lo, hi)` or the grid `lo:step:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerDesc {
    pub kind: SamplerKind,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SamplerDesc {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            kind: SamplerKind::Uniform,
            lo,
            hi,
            step: 0.0,
        }
    }

    pub fn sobol(lo: f64, hi: f64) -> Self {
        Self {
            kind: SamplerKind::Sobol,
            lo,
            hi,
            step: 0.0,
        }
    }

    pub fn grid(lo: f64, step: f64, hi: f64) -> Self {
        Self {
            kind: SamplerKind::Grid,
            lo,
            hi,
            step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(Error::invalid("sampler", format!("lo {} >= hi {}", self.lo, self.hi)));
        }
        if self.kind == SamplerKind::Grid && !(self.step > 0.0) {
            return Err(Error::invalid("sampler", "grid step must be positive"));
        }
        Ok(())
    }

    /// Affine map of a unit-interval value onto `[lo, hi)`.
    pub fn scale(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

/// Declarative description of a dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub op: ArithOp,
    pub input_size: usize,
    pub subset_ratio: f64,
    pub overlap_ratio: f64,
    pub train_range: SamplerDesc,
    pub test_range: SamplerDesc,
    pub seed: u64,
}

impl TaskSpec {
    /// Two inputs, four outputs; trained on `U(0.1, 2)`, tested on `-4.1:0.2:4`.
    pub fn simple() -> Self {
        Self {
            kind: TaskKind::Simple,
            op: ArithOp::All4,
            input_size: 2,
            subset_ratio: 0.0,
            overlap_ratio: 0.0,
            train_range: SamplerDesc::uniform(0.1, 2.0),
            test_range: SamplerDesc::grid(-4.1, 0.2, 4.0),
            seed: 0,
        }
    }

    /// The 100-input subset-sum task with the default ratios and ranges.
    pub fn large_scale(op: ArithOp) -> Self {
        let (train, test) = match op {
            ArithOp::Div => (SamplerDesc::sobol(0.0, 0.5), SamplerDesc::sobol(-0.5, 0.5)),
            ArithOp::Sqrt => (SamplerDesc::sobol(0.0, 2.0), SamplerDesc::sobol(0.0, 4.0)),
            _ => (SamplerDesc::sobol(-1.0, 1.0), SamplerDesc::sobol(-4.0, 4.0)),
        };
        Self {
            kind: TaskKind::LargeScale,
            op,
            input_size: 100,
            subset_ratio: 0.5,
            overlap_ratio: 0.25,
            train_range: train,
            test_range: test,
            seed: 0,
        }
    }

    pub fn identity_toy() -> Self {
        Self {
            kind: TaskKind::IdentityToy,
            op: ArithOp::Add,
            input_size: 2,
            subset_ratio: 0.0,
            overlap_ratio: 0.0,
            train_range: SamplerDesc::uniform(0.0, 2.0),
            test_range: SamplerDesc::uniform(0.0, 2.0),
            seed: 0,
        }
    }

    pub fn output_size(&self) -> usize {
        match self.kind {
            TaskKind::Simple => 4,
            _ => 1,
        }
    }

    /// Identifier used in output files, e.g. `large_scale-div`.
    pub fn id(&self) -> String {
        match self.kind {
            TaskKind::Simple => "simple".into(),
            TaskKind::LargeScale => format!("large_scale-{}", self.op),
            TaskKind::IdentityToy => "identity_toy".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_range.validate()?;
        self.test_range.validate()?;
        for r in [self.subset_ratio, self.overlap_ratio] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid("task", format!("ratio {r} outside [0, 1]")));
            }
        }
        if self.kind == TaskKind::LargeScale {
            subset_windows(self.input_size, self.subset_ratio, self.overlap_ratio)?;
        }
        Ok(())
    }
}

/// The four simple-task targets `(x + y, x y, x / y, √x)`.
pub fn simple_targets(x: f64, y: f64) -> [f64; 4] {
    assert!(y != 0.0, "division target needs a non-zero divisor");
    [x + y, x * y, x / y, x.sqrt()]
}

fn simple_from_pairs(pairs: &[(f64, f64)]) -> (Tensor, Tensor) {
    let mut xs = Vec::with_capacity(pairs.len() * 2);
    let mut ts = Vec::with_capacity(pairs.len() * 4);
    for &(x, y) in pairs {
        xs.extend_from_slice(&[x, y]);
        ts.extend_from_slice(&simple_targets(x, y));
    }
    let n = pairs.len();
    (
        Tensor::new(n, 2, xs).expect("2 columns"),
        Tensor::new(n, 4, ts).expect("4 columns"),
    )
}

/// `n` uniformly drawn `(x, y)` pairs and their four targets.
pub fn gen_simple_batch(n: usize, range: &SamplerDesc, seed: u64) -> (Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simple_batch_from(n, range, &mut rng)
}

pub(crate) fn simple_batch_from(n: usize, range: &SamplerDesc, rng: &mut impl Rng) -> (Tensor, Tensor) {
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(range.lo..range.hi), rng.gen_range(range.lo..range.hi)))
        .collect();
    simple_from_pairs(&pairs)
}

/// Every `(x, y)` combination of a grid (x varies slowest) with targets.
pub fn simple_grid(xs: &[f64], ys: &[f64]) -> (Tensor, Tensor) {
    let pairs: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    simple_from_pairs(&pairs)
}

/// Points `lo, lo + step, ...` not exceeding `hi`, rounded to 12 decimals.
pub fn grid_points(desc: &SamplerDesc) -> Vec<f64> {
    let count = ((desc.hi - desc.lo) / desc.step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| ((desc.lo + k as f64 * desc.step) * 1e12).round() / 1e12)
        .collect()
}

/// Test grid for the add/mul/div outputs.
pub fn simple_test_grid() -> SamplerDesc {
    SamplerDesc::grid(-4.1, 0.2, 4.0)
}

/// Test grid for the square-root output.
pub fn simple_sqrt_grid() -> SamplerDesc {
    SamplerDesc::grid(0.1, 0.1, 4.0)
}

/// Index windows of the two summed subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Windows {
    pub subset_len: usize,
    pub overlap: usize,
    pub first: Range<usize>,
    pub second: Range<usize>,
}

/// `L = round(ratio·N)`, `V = floor(overlap·L)`, `s₁ = [0, L)`, `s₂ = [L−V, 2L−V)`.
pub fn subset_windows(input_size: usize, subset_ratio: f64, overlap_ratio: f64) -> Result<Windows> {
    let len = (subset_ratio * input_size as f64).round() as usize;
    if len == 0 {
        return Err(Error::invalid("task", "subset is empty"));
    }
    let overlap = (overlap_ratio * len as f64).floor() as usize;
    let end = 2 * len - overlap;
    if end > input_size {
        return Err(Error::invalid(
            "task",
            format!("subsets need {end} inputs but only {input_size} exist"),
        ));
    }
    Ok(Windows {
        subset_len: len,
        overlap,
        first: 0..len,
        second: len - overlap..end,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

/// Target of the large-scale task for one input row.
pub fn large_scale_target(op: ArithOp, windows: &Windows, x: &[f64]) -> f64 {
    let a: f64 = x[windows.first.clone()].iter().sum();
    match op {
        ArithOp::Add | ArithOp::Mul => {
            let b: f64 = x[windows.second.clone()].iter().sum();
            if op == ArithOp::Add {
                a + b
            } else {
                a * b
            }
        }
        ArithOp::Div => 1.0 / a,
        ArithOp::Sqrt => a.sqrt(),
        ArithOp::All4 => panic!("all4 has no large-scale target"),
    }
}

/// Endless stream of large-scale rows drawn from the Sobol sequence.
#[derive(Debug, Clone)]
pub struct LargeScaleStream {
    op: ArithOp,
    range: SamplerDesc,
    windows: Windows,
    sobol: Sobol,
    buf: Vec<f64>,
}

impl LargeScaleStream {
    pub fn new(spec: &TaskSpec, split: Split) -> Result<Self> {
        if spec.kind != TaskKind::LargeScale {
            return Err(Error::invalid("task", "not a large-scale task"));
        }
        if spec.op == ArithOp::All4 {
            return Err(Error::invalid("task", "large-scale tasks take a single op"));
        }
        spec.validate()?;
        let windows = subset_windows(spec.input_size, spec.subset_ratio, spec.overlap_ratio)?;
        let (range, start) = match split {
            Split::Train => (spec.train_range, 1),
            Split::Validation => (spec.test_range, VALIDATION_SOBOL_OFFSET),
        };
        Ok(Self {
            op: spec.op,
            range,
            windows,
            sobol: Sobol::starting_at(spec.input_size, start)?,
            buf: vec![0.0; spec.input_size],
        })
    }

    pub fn windows(&self) -> &Windows {
        &self.windows
    }

    pub fn next_batch(&mut self, n: usize) -> (Tensor, Tensor) {
        let d = self.buf.len();
        let mut xs = Vec::with_capacity(n * d);
        let mut ys = Vec::with_capacity(n);
        while ys.len() < n {
            self.sobol.next_into(&mut self.buf);
            for v in self.buf.iter_mut() {
                *v = self.range.scale(*v);
            }
            if self.op == ArithOp::Div {
                let a: f64 = self.buf[self.windows.first.clone()].iter().sum();
                if a.abs() < MIN_DIVISOR {
                    continue;
                }
            }
            ys.push(large_scale_target(self.op, &self.windows, &self.buf));
            xs.extend_from_slice(&self.buf);
        }
        (
            Tensor::new(n, d, xs).expect("row width"),
            Tensor::column(&ys),
        )
    }
}

/// The first `n` rows of the training or validation stream.
pub fn gen_large_scale(spec: &TaskSpec, n: usize, split: Split) -> Result<(Tensor, Tensor)> {
    Ok(LargeScaleStream::new(spec, split)?.next_batch(n))
}

/// `x₁ ~ U(0, 2)`, `x₂ ~ U(0, 0.05)`; the target is `x₁`.
pub fn gen_identity_toy(n: usize, seed: u64) -> (Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(2 * n);
    let mut ts = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.gen_range(0.0..2.0);
        let x2 = rng.gen_range(0.0..0.05);
        xs.extend_from_slice(&[x1, x2]);
        ts.push(x1);
    }
    (Tensor::new(n, 2, xs).expect("2 columns"), Tensor::column(&ts))
}
