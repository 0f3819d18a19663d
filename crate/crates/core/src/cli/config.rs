//! `section.key = value` experiment files.

use std::path::PathBuf;
use std::str::FromStr;

use crate::data::ArithOp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simple,
    LargeScale,
    Fsir,
    Gradsurf,
    Heatmap,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simple => "simple",
            Experiment::LargeScale => "large-scale",
            Experiment::Fsir => "fsir",
            Experiment::Gradsurf => "gradsurf",
            Experiment::Heatmap => "heatmap",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "simple" => Ok(Experiment::Simple),
            "large-scale" => Ok(Experiment::LargeScale),
            "fsir" => Ok(Experiment::Fsir),
            "gradsurf" => Ok(Experiment::Gradsurf),
            "heatmap" => Ok(Experiment::Heatmap),
            _ => Err(Error::Unknown {
                what: "experiment",
                name: s.to_string(),
            }),
        }
    }
}

/// Everything an experiment run needs. `None` overrides keep the per-task defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub models: Vec<String>,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,

    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub beta_step: Option<usize>,
    pub beta_growth: Option<f64>,
    pub clip_grad_norm: Option<f64>,
    pub nau_nmu_reg_coeff: Option<f64>,
    pub validation_size: Option<usize>,

    pub ops: Vec<ArithOp>,
    pub input_size: Option<usize>,
    pub subset_ratio: Option<f64>,
    pub overlap_ratio: Option<f64>,

    pub fsir_hidden: Vec<usize>,
    pub fsir_betas: Vec<f64>,
    /// Internal RK4 steps of the trained dynamics.
    pub fsir_steps: usize,
    pub finetune_iterations: Option<usize>,
    pub finetune_learning_rate: Option<f64>,
    pub readout_prune: f64,

    pub surface_points: usize,
    pub surface_lo: f64,
    pub surface_hi: f64,
    pub surface_batch: usize,
    pub surface_seed: u64,
}

impl ExperimentConfig {
    /// Defaults for `experiment` before any file or flag overrides.
    pub fn defaults(experiment: Experiment) -> Self {
        let (models, runs): (&[&str], usize) = match experiment {
            Experiment::Simple | Experiment::Heatmap => (&["npu", "real_npu", "nmu", "nalu", "dense"], 20),
            Experiment::LargeScale => (&["npu", "real_npu", "nalu", "nmu", "naive_npu"], 10),
            Experiment::Fsir => (&["npu", "real_npu", "dense"], 3),
            Experiment::Gradsurf => (&["naive_npu", "npu_g55", "npu_g10"], 1),
        };
        Self {
            experiment,
            models: models.iter().map(|s| s.to_string()).collect(),
            runs,
            seed: 0,
            out: PathBuf::from(format!("out/{}", experiment.name())),
            workers: None,
            iterations: None,
            learning_rate: None,
            batch_size: None,
            beta_start: None,
            beta_end: None,
            beta_step: None,
            beta_growth: None,
            clip_grad_norm: None,
            nau_nmu_reg_coeff: None,
            validation_size: None,
            ops: vec![ArithOp::Add, ArithOp::Mul, ArithOp::Div, ArithOp::Sqrt],
            input_size: None,
            subset_ratio: None,
            overlap_ratio: None,
            fsir_hidden: vec![6, 12],
            fsir_betas: vec![0.0, 0.1],
            fsir_steps: crate::ode::FSIR_STEPS,
            finetune_iterations: None,
            finetune_learning_rate: None,
            readout_prune: 1e-3,
            surface_points: 61,
            surface_lo: -1.0,
            surface_hi: 2.0,
            surface_batch: 512,
            surface_seed: 0,
        }
    }

    /// Applies every `section.key = value` line of `text`. Blank lines and
    /// `#` comments are skipped; unknown keys are an error.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                reason: "expected `section.key = value`".into(),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Config {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Sets one key. Keys are `section.name`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment.kind" => {
                let kind: Experiment = value.parse()?;
                if kind != self.experiment {
                    return Err(Error::invalid(
                        "config",
                        format!("file is for `{}`, not `{}`", kind.name(), self.experiment.name()),
                    ));
                }
            }
            "experiment.models" => self.models = list(value, |s| Ok(s.to_string()))?,
            "experiment.runs" => self.runs = parse(key, value)?,
            "experiment.seed" => self.seed = parse(key, value)?,
            "experiment.out" => self.out = PathBuf::from(value),
            "experiment.workers" => self.workers = Some(parse(key, value)?),
            "train.iterations" => self.iterations = Some(parse(key, value)?),
            "train.learning_rate" => self.learning_rate = Some(parse(key, value)?),
            "train.batch_size" => self.batch_size = Some(parse(key, value)?),
            "train.beta_start" => self.beta_start = Some(parse(key, value)?),
            "train.beta_end" => self.beta_end = Some(parse(key, value)?),
            "train.beta_step" => self.beta_step = Some(parse(key, value)?),
            "train.beta_growth" => self.beta_growth = Some(parse(key, value)?),
            "train.clip_grad_norm" => self.clip_grad_norm = Some(parse(key, value)?),
            "train.nau_nmu_reg_coeff" => self.nau_nmu_reg_coeff = Some(parse(key, value)?),
            "train.validation_size" => self.validation_size = Some(parse(key, value)?),
            "task.ops" => self.ops = list(value, |s| s.parse())?,
            "task.input_size" => self.input_size = Some(parse(key, value)?),
            "task.subset_ratio" => self.subset_ratio = Some(parse(key, value)?),
            "task.overlap_ratio" => self.overlap_ratio = Some(parse(key, value)?),
            "fsir.hidden" => self.fsir_hidden = list(value, |s| parse(key, s))?,
            "fsir.betas" => self.fsir_betas = list(value, |s| parse(key, s))?,
            "fsir.steps" => self.fsir_steps = parse(key, value)?,
            "fsir.finetune_iterations" => self.finetune_iterations = Some(parse(key, value)?),
            "fsir.finetune_learning_rate" => self.finetune_learning_rate = Some(parse(key, value)?),
            "fsir.prune" => self.readout_prune = parse(key, value)?,
            "surface.points" => self.surface_points = parse(key, value)?,
            "surface.lo" => self.surface_lo = parse(key, value)?,
            "surface.hi" => self.surface_hi = parse(key, value)?,
            "surface.batch" => self.surface_batch = parse(key, value)?,
            "surface.seed" => self.surface_seed = parse(key, value)?,
            _ => {
                return Err(Error::Unknown {
                    what: "config key",
                    name: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("config", "runs must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(Error::invalid("config", "no models selected"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("config", "workers must be at least 1"));
        }
        if self.surface_points < 2 || self.surface_batch == 0 {
            return Err(Error::invalid("config", "surface needs at least 2 points and a non-empty batch"));
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid("config", format!("bad value `{value}` for {key}")))
}

fn list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}
