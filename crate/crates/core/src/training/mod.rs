//! Optimisation: Adam, the L1 schedule, losses and the generic training loop.

mod adam;
mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{adam_step, AdamState, Diverged, BETA1, BETA2, STABILIZER};
pub use stats::{median, median_mad};

use crate::analysis::simple_test_errors;
use crate::data::{self, ArithOp, LargeScaleStream, Split, TaskKind, TaskSpec};
use crate::tensor::{Graph, Tensor, Var};
use crate::units::{BoundChain, Chain, DEFAULT_NONZERO_THRESHOLD};
use crate::{Error, Result};

/// Optimiser hyperparameters and the stepwise L1 schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_step: usize,
    pub beta_growth: f64,
    pub clip_grad_norm: Option<f64>,
    /// Weight of the NAU/NMU attractor penalty, active for the second half of training.
    pub nau_nmu_reg_coeff: f64,
    /// Validation rows for generative tasks without a fixed test grid.
    pub validation_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::simple()
    }
}

impl TrainConfig {
    /// Simple arithmetic task: 20 000 Adam steps at 1e-3, batches of 100, no L1.
    pub fn simple() -> Self {
        Self {
            learning_rate: 1e-3,
            iterations: 20_000,
            batch_size: 100,
            seed: 0,
            beta_start: 0.0,
            beta_end: 0.0,
            beta_step: 10_000,
            beta_growth: 1.0,
            clip_grad_norm: None,
            nau_nmu_reg_coeff: 0.0,
            validation_size: 0,
        }
    }

    /// Large-scale task schedules, one row per operation.
    ///
    /// The multiplication row is stored with start and end swapped so the
    /// schedule can grow (see [`TrainConfig::large_scale_mul_transposed`]).
    pub fn large_scale(op: ArithOp) -> Self {
        let (lr, start, end) = match op {
            ArithOp::Add => (1e-2, 1e-5, 1e-4),
            ArithOp::Mul => (5e-3, 1e-7, 1e-5),
            ArithOp::Div => (5e-3, 1e-9, 1e-7),
            ArithOp::Sqrt | ArithOp::All4 => (5e-3, 1e-6, 1e-4),
        };
        Self {
            learning_rate: lr,
            iterations: 100_000,
            batch_size: 128,
            seed: 0,
            beta_start: start,
            beta_end: end,
            beta_step: 10_000,
            beta_growth: 10.0,
            clip_grad_norm: None,
            nau_nmu_reg_coeff: 0.01,
            validation_size: 5_000,
        }
    }

    /// The multiplication schedule is listed with its start above its end and a
    /// growth factor of 10; this flag marks that the defaults swap them.
    pub const fn large_scale_mul_transposed() -> bool {
        true
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("config", "learning rate must be positive"));
        }
        if self.beta_step == 0 {
            return Err(Error::invalid("config", "beta_step must be at least 1"));
        }
        if !(self.beta_growth > 0.0) {
            return Err(Error::invalid("config", "beta_growth must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("config", "batch size must be at least 1"));
        }
        Ok(())
    }
}

/// L1 weight at `iteration`: `start · growth^⌊iteration / step⌋`, saturated at `end`.
pub fn beta_at(config: &TrainConfig, iteration: usize) -> f64 {
    let k = (iteration / config.beta_step.max(1)) as i32;
    let raw = config.beta_start * config.beta_growth.powi(k);
    if config.beta_growth >= 1.0 {
        raw.min(config.beta_end)
    } else {
        raw.max(config.beta_end)
    }
}

/// Mean squared error between two equally shaped tensors.
pub fn mse(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    let d = g.sub(pred, target)?;
    let sq = g.mul(d, d)?;
    Ok(g.mean(sq))
}

/// `Σ |θ|` over the given parameters.
pub fn l1_norm(g: &mut Graph, params: impl IntoIterator<Item = Var>) -> Result<Var> {
    let mut total: Option<Var> = None;
    for p in params {
        let a = g.abs(p);
        let s = g.sum(a);
        total = Some(match total {
            Some(t) => g.add(t, s)?,
            None => s,
        });
    }
    Ok(total.unwrap_or_else(|| g.scalar(0.0)))
}

/// `MSE(pred, target) + β ‖θ‖₁`.
pub fn mse_l1(
    g: &mut Graph,
    pred: Var,
    target: Var,
    params: impl IntoIterator<Item = Var>,
    beta: f64,
) -> Result<Var> {
    let m = mse(g, pred, target)?;
    if beta == 0.0 {
        return Ok(m);
    }
    let l1 = l1_norm(g, params)?;
    let weighted = g.mul_scalar(l1, beta);
    Ok(g.add(m, weighted)?)
}

/// Forward pass plus [`mse_l1`] over every trainable parameter of `chain`.
pub fn loss_mse_l1(
    g: &mut Graph,
    chain: &Chain,
    bound: &BoundChain,
    x: Var,
    y: Var,
    beta: f64,
) -> Result<Var> {
    let pred = chain.forward(g, bound, x)?;
    mse_l1(g, pred, y, bound.all(), beta)
}

/// `Σ min(|w|, |1 - w|)`, pulling weights towards 0 or 1.
pub fn nau_nmu_regularizer(g: &mut Graph, w: Var) -> Result<Var> {
    let a = g.abs(w);
    let one_minus = g.rsub_scalar(1.0, w);
    let b = g.abs(one_minus);
    // min(a, b) = (a + b - |a - b|) / 2
    let s = g.add(a, b)?;
    let d = g.sub(a, b)?;
    let ad = g.abs(d);
    let m = g.sub(s, ad)?;
    let half = g.mul_scalar(m, 0.5);
    Ok(g.sum(half))
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub task: String,
    pub model: String,
    pub seed: u64,
    pub params: Chain,
    /// Data-term MSE per iteration.
    pub train_trace: Vec<f64>,
    pub val_mse: f64,
    /// Per-operation test MSE for multi-output tasks.
    pub op_mse: Vec<(ArithOp, f64)>,
    pub nonzero: usize,
    pub diverged: bool,
}

impl RunRecord {
    pub fn final_train_mse(&self) -> f64 {
        self.train_trace.last().copied().unwrap_or(f64::NAN)
    }
}

enum Source {
    Uniform {
        range: data::SamplerDesc,
        rng: ChaCha8Rng,
    },
    Large(LargeScaleStream),
    Identity {
        seed: u64,
        step: u64,
    },
    Fixed(Tensor, Tensor),
}

impl Source {
    fn next(&mut self, n: usize) -> (Tensor, Tensor) {
        match self {
            Source::Uniform { range, rng } => data::simple_batch_from(n, range, rng),
            Source::Large(s) => s.next_batch(n),
            Source::Identity { seed, step } => {
                *step += 1;
                data::gen_identity_toy(n, seed.wrapping_mul(1_000_003).wrapping_add(*step))
            }
            Source::Fixed(x, y) => (x.clone(), y.clone()),
        }
    }
}

/// Trains `chain` on a generative task with batches drawn on the fly.
pub fn train(chain: Chain, task: &TaskSpec, config: &TrainConfig, model: &str) -> Result<RunRecord> {
    task.validate()?;
    if chain.in_width() != task.input_size || chain.out_width() != task.output_size() {
        return Err(Error::invalid(
            "model",
            format!(
                "{} does not map {} inputs to {} outputs",
                chain.describe(),
                task.input_size,
                task.output_size()
            ),
        ));
    }
    let source = match task.kind {
        TaskKind::Simple => Source::Uniform {
            range: task.train_range,
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0000_0000),
        },
        TaskKind::LargeScale => Source::Large(LargeScaleStream::new(task, Split::Train)?),
        TaskKind::IdentityToy => Source::Identity {
            seed: config.seed,
            step: 0,
        },
    };
    let mut record = fit(chain, source, config)?;
    record.task = task.id();
    record.model = model.to_string();
    evaluate(&mut record, task, config)?;
    Ok(record)
}

/// Full-batch training on a fixed dataset.
pub fn train_fixed(chain: Chain, x: &Tensor, y: &Tensor, config: &TrainConfig) -> Result<RunRecord> {
    let mut record = fit(chain, Source::Fixed(x.clone(), y.clone()), config)?;
    record.task = "fixed".into();
    record.val_mse = record.final_train_mse();
    Ok(record)
}

fn fit(mut chain: Chain, mut source: Source, config: &TrainConfig) -> Result<RunRecord> {
    config.validate()?;
    let mut adam = AdamState::new(chain.params());
    let mut trace = Vec::with_capacity(config.iterations);
    let mut diverged = false;
    let reg_from = config.iterations / 2;

    for it in 0..config.iterations {
        let (x, y) = source.next(config.batch_size);
        let mut g = Graph::new();
        let bound = chain.bind(&mut g);
        let xv = g.constant(x);
        let yv = g.constant(y);
        let pred = chain.forward(&mut g, &bound, xv)?;
        let data_term = mse(&mut g, pred, yv)?;
        let mut loss = data_term;
        let beta = beta_at(config, it);
        if beta > 0.0 {
            let l1 = l1_norm(&mut g, bound.all())?;
            let l1 = g.mul_scalar(l1, beta);
            loss = g.add(loss, l1)?;
        }
        if config.nau_nmu_reg_coeff > 0.0 && it >= reg_from {
            for (i, layer) in chain.layers().iter().enumerate() {
                if layer.is_nau_or_nmu() {
                    let r = nau_nmu_regularizer(&mut g, bound.layer(i)[0])?;
                    let r = g.mul_scalar(r, config.nau_nmu_reg_coeff);
                    loss = g.add(loss, r)?;
                }
            }
        }
        let data_value = g.value(data_term).item();
        if !g.value(loss).item().is_finite() {
            diverged = true;
            break;
        }
        g.backward(loss)?;
        let mut grads: Vec<Tensor> = bound.all().map(|v| g.grad(v).expect("bound param").clone()).collect();
        if let Some(max_norm) = config.clip_grad_norm {
            clip_global_norm(&mut grads, max_norm);
        }
        if adam
            .step(&mut chain.params_mut(), &grads, config.learning_rate)
            .is_err()
        {
            diverged = true;
            break;
        }
        trace.push(data_value);
    }

    Ok(RunRecord {
        task: String::new(),
        model: String::new(),
        seed: config.seed,
        nonzero: chain.count_nonzero(DEFAULT_NONZERO_THRESHOLD),
        params: chain,
        train_trace: trace,
        val_mse: f64::NAN,
        op_mse: Vec::new(),
        diverged,
    })
}

/// Rescales gradients so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
}

fn evaluate(record: &mut RunRecord, task: &TaskSpec, config: &TrainConfig) -> Result<()> {
    match task.kind {
        TaskKind::Simple => {
            let errs = simple_test_errors(&record.params)?;
            record.val_mse = errs.iter().map(|(_, e)| e).sum::<f64>() / errs.len() as f64;
            record.op_mse = errs;
        }
        TaskKind::LargeScale => {
            let n = config.validation_size.max(1);
            let (x, y) = data::gen_large_scale(task, n, Split::Validation)?;
            record.val_mse = prediction_mse(&record.params, &x, &y)?;
        }
        TaskKind::IdentityToy => {
            let (x, y) = data::gen_identity_toy(config.validation_size.max(256), config.seed ^ 0xfeed);
            record.val_mse = prediction_mse(&record.params, &x, &y)?;
        }
    }
    Ok(())
}

/// Mean squared error of `chain(x)` against `y`.
pub fn prediction_mse(chain: &Chain, x: &Tensor, y: &Tensor) -> Result<f64> {
    let pred = chain.eval(x)?;
    if pred.shape() != y.shape() {
        return Err(crate::TensorError::ShapeMismatch {
            op: "mse",
            lhs: pred.shape(),
            rhs: y.shape(),
        }
        .into());
    }
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(y.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}
