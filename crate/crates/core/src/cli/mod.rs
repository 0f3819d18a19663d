//! Experiment runner behind the `npu` binary.
//!
//! Every subcommand starts from built-in defaults, applies an optional
//! config file and then the command-line flags, runs its seeded jobs on a
//! bounded worker pool and writes CSV/JSON results into the output
//! directory. Run `i` of a group uses seed `seed + i`.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

pub use config::{Experiment, ExperimentConfig};
pub use report::{pareto_by_task, summarize, write_pareto, write_runs, write_summary, RunRow, SummaryRow, SCHEMA_LINE};

use crate::analysis::{self, gradient_surface, heatmap_eval, linspace, SurfaceUnit};
use crate::data::{self, ArithOp, TaskSpec};
use crate::ode::{self, fsir_chain, node_train, readout_equations, FsirParams, NodeArch, NodeConfig, NodeModel};
use crate::training::{train, RunRecord, TrainConfig};
use crate::units::{write_checkpoint, Chain, LayerKind};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "npu", version, about = "Neural arithmetic experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two inputs, four arithmetic outputs, extrapolation grid test.
    Simple(CommonArgs),
    /// 100-input subset arithmetic with Sobol sampling.
    LargeScale(CommonArgs),
    /// Neural ODE fits of a fractional SIR trajectory.
    Fsir(CommonArgs),
    /// Gradient-norm surfaces of 1x2 power units.
    Gradsurf(CommonArgs),
    /// Simple-task training followed by per-op error maps of the best runs.
    Heatmap(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Seed of the first run.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `section.key = value` file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Operations for large-scale runs.
    #[arg(long, value_delimiter = ',')]
    pub ops: Option<Vec<String>>,
    /// Hidden widths for fsir.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// L1 weights for fsir.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
}

impl Command {
    pub fn experiment(&self) -> (Experiment, &CommonArgs) {
        match self {
            Command::Simple(a) => (Experiment::Simple, a),
            Command::LargeScale(a) => (Experiment::LargeScale, a),
            Command::Fsir(a) => (Experiment::Fsir, a),
            Command::Gradsurf(a) => (Experiment::Gradsurf, a),
            Command::Heatmap(a) => (Experiment::Heatmap, a),
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn build_config(command: &Command) -> Result<ExperimentConfig> {
    let (experiment, a) = command.experiment();
    let mut c = ExperimentConfig::defaults(experiment);
    if let Some(path) = &a.config {
        c.apply_file(&fs::read_to_string(path)?)?;
    }
    if let Some(m) = &a.models {
        c.models = m.clone();
    }
    if let Some(ops) = &a.ops {
        c.ops = ops.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    c.runs = a.runs.unwrap_or(c.runs);
    c.seed = a.seed.unwrap_or(c.seed);
    c.out = a.out.clone().unwrap_or(c.out);
    c.iterations = a.iterations.or(c.iterations);
    c.learning_rate = a.lr.or(c.learning_rate);
    c.workers = a.workers.or(c.workers);
    c.fsir_hidden = a.hidden.clone().unwrap_or(c.fsir_hidden);
    c.fsir_betas = a.betas.clone().unwrap_or(c.fsir_betas);
    c.validate()?;
    Ok(c)
}

/// Parses `args`, runs the experiment and maps errors onto exit codes:
/// 2 for usage and configuration problems, 1 for everything else.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match build_config(&cli.command).and_then(|c| run_experiment(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Unknown { .. } | Error::Invalid { .. } | Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Simple-task model: a power or product unit into an NAU, two NALUs, or a sigmoid MLP.
pub fn simple_model(kind: LayerKind, seed: u64) -> Result<Chain> {
    let spec: Vec<(LayerKind, usize, usize)> = match kind {
        LayerKind::Npu | LayerKind::RealNpu | LayerKind::NaiveNpu | LayerKind::Nmu => {
            vec![(kind, 2, 6), (LayerKind::Nau, 6, 4)]
        }
        LayerKind::Nalu => vec![(LayerKind::Nalu, 2, 6), (LayerKind::Nalu, 6, 4)],
        LayerKind::Dense | LayerKind::DenseSigmoid => vec![
            (LayerKind::DenseSigmoid, 2, 10),
            (LayerKind::DenseSigmoid, 10, 10),
            (LayerKind::Dense, 10, 4),
        ],
        LayerKind::Nau => return Err(Error::invalid("model", "nau alone cannot fit the simple task")),
    };
    Chain::init(&spec, seed)
}

/// Large-scale model: an NAU (NALU for the NALU baseline) feeding a single-output unit.
pub fn large_scale_model(kind: LayerKind, input_size: usize, seed: u64) -> Result<Chain> {
    match kind {
        LayerKind::Npu | LayerKind::RealNpu | LayerKind::NaiveNpu | LayerKind::Nmu => {
            Chain::init(&[(LayerKind::Nau, input_size, input_size), (kind, input_size, 1)], seed)
        }
        LayerKind::Nalu => Chain::init(&[(LayerKind::Nalu, input_size, input_size), (LayerKind::Nalu, input_size, 1)], seed),
        _ => Err(Error::invalid("model", format!("{kind} is not a large-scale model"))),
    }
}

fn train_config(c: &ExperimentConfig, base: TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: c.learning_rate.unwrap_or(base.learning_rate),
        iterations: c.iterations.unwrap_or(base.iterations),
        batch_size: c.batch_size.unwrap_or(base.batch_size),
        seed,
        beta_start: c.beta_start.unwrap_or(base.beta_start),
        beta_end: c.beta_end.unwrap_or(base.beta_end),
        beta_step: c.beta_step.unwrap_or(base.beta_step),
        beta_growth: c.beta_growth.unwrap_or(base.beta_growth),
        clip_grad_norm: c.clip_grad_norm.or(base.clip_grad_norm),
        nau_nmu_reg_coeff: c.nau_nmu_reg_coeff.unwrap_or(base.nau_nmu_reg_coeff),
        validation_size: c.validation_size.unwrap_or(base.validation_size),
    }
}

fn pool(c: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = c.workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::invalid("workers", e.to_string()))
}

fn save_checkpoint(dir: &Path, run_id: &str, chain: &Chain) -> Result<()> {
    let f = fs::File::create(dir.join(format!("{run_id}.csv")))?;
    write_checkpoint(chain, std::io::BufWriter::new(f))
}

/// Runs jobs on the pool and returns their results in job order.
fn run_jobs<J, F>(c: &ExperimentConfig, jobs: &[J], f: F) -> Result<Vec<RunRecord>>
where
    J: Sync,
    F: Fn(&J) -> Result<RunRecord> + Sync + Send,
{
    let total = jobs.len();
    pool(c)?.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(i, j)| {
                let r = f(j)?;
                eprintln!(
                    "[{}/{total}] {} {} seed={} mse={:e}{}",
                    i + 1,
                    r.task,
                    r.model,
                    r.seed,
                    r.val_mse,
                    if r.diverged { " (diverged)" } else { "" }
                );
                Ok(r)
            })
            .collect()
    })
}

fn parse_kinds(models: &[String]) -> Result<Vec<LayerKind>> {
    models.iter().map(|m| m.parse()).collect()
}

/// Runs one experiment and writes its outputs under `c.out`.
pub fn run_experiment(c: &ExperimentConfig) -> Result<()> {
    c.validate()?;
    fs::create_dir_all(&c.out)?;
    match c.experiment {
        Experiment::Simple => {
            run_simple(c)?;
        }
        Experiment::Heatmap => {
            let records = run_simple(c)?;
            write_heatmaps(c, &records)?;
        }
        Experiment::LargeScale => run_large_scale(c)?,
        Experiment::Fsir => run_fsir(c)?,
        Experiment::Gradsurf => run_gradsurf(c)?,
    }
    eprintln!("wrote results to {}", c.out.display());
    Ok(())
}

fn finish(c: &ExperimentConfig, labelled: &[(String, RunRecord)]) -> Result<()> {
    let ckpt = c.out.join("checkpoints");
    fs::create_dir_all(&ckpt)?;
    let mut rows = Vec::new();
    for (id, r) in labelled {
        save_checkpoint(&ckpt, id, &r.params)?;
        rows.extend(RunRow::from_record(r, id));
    }
    write_runs(&c.out.join("runs.csv"), &rows)?;
    write_summary(&c.out.join("summary.csv"), &summarize(&rows))?;
    write_pareto(&c.out.join("pareto.csv"), &pareto_by_task(&rows))?;
    Ok(())
}

fn run_simple(c: &ExperimentConfig) -> Result<Vec<(String, RunRecord)>> {
    let kinds = parse_kinds(&c.models)?;
    let task = TaskSpec::simple();
    let jobs: Vec<(LayerKind, String, u64)> = kinds
        .iter()
        .zip(&c.models)
        .flat_map(|(&k, name)| (0..c.runs as u64).map(move |i| (k, name.clone(), c.seed + i)))
        .collect();
    let records = run_jobs(c, &jobs, |(kind, name, seed)| {
        let cfg = train_config(c, TrainConfig::simple(), *seed);
        train(simple_model(*kind, *seed)?, &task, &cfg, name)
    })?;
    let labelled: Vec<(String, RunRecord)> = records
        .into_iter()
        .map(|r| (format!("simple-{}-s{}", r.model, r.seed), r))
        .collect();
    finish(c, &labelled)?;
    Ok(labelled)
}

fn write_heatmaps(c: &ExperimentConfig, records: &[(String, RunRecord)]) -> Result<()> {
    // best finished run per model
    let mut best: Vec<&RunRecord> = Vec::new();
    for name in &c.models {
        let pick = records
            .iter()
            .map(|(_, r)| r)
            .filter(|r| &r.model == name && !r.diverged && r.val_mse.is_finite())
            .min_by(|a, b| a.val_mse.total_cmp(&b.val_mse));
        best.extend(pick);
    }
    for op in ArithOp::FOUR {
        let grid = analysis::test_grid(op);
        let mut w = report::csv_writer(&c.out.join(format!("heatmap_{op}.csv")))?;
        w.write_record(["model", "x", "y", "abs_err"])?;
        for r in &best {
            let h = heatmap_eval(&r.params, op, &grid, &grid)?;
            for (i, x) in grid.iter().enumerate() {
                for (j, y) in grid.iter().enumerate() {
                    w.write_record([r.model.clone(), x.to_string(), y.to_string(), h[i][j].to_string()])?;
                }
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn run_large_scale(c: &ExperimentConfig) -> Result<()> {
    let kinds = parse_kinds(&c.models)?;
    if c.ops.contains(&ArithOp::Mul) && c.beta_start.is_none() && c.beta_end.is_none() && TrainConfig::large_scale_mul_transposed() {
        let m = TrainConfig::large_scale(ArithOp::Mul);
        eprintln!(
            "note: the mul L1 schedule runs from {:e} up to {:e} (start and end swapped so that growth 10 can reach the end)",
            m.beta_start, m.beta_end
        );
    }
    let mut jobs = Vec::new();
    for &op in &c.ops {
        if op == ArithOp::All4 {
            return Err(Error::invalid("task", "all4 is not a large-scale op"));
        }
        for (&k, name) in kinds.iter().zip(&c.models) {
            for i in 0..c.runs as u64 {
                jobs.push((op, k, name.clone(), c.seed + i));
            }
        }
    }
    let records = run_jobs(c, &jobs, |(op, kind, name, seed)| {
        let mut task = TaskSpec::large_scale(*op);
        task.input_size = c.input_size.unwrap_or(task.input_size);
        task.subset_ratio = c.subset_ratio.unwrap_or(task.subset_ratio);
        task.overlap_ratio = c.overlap_ratio.unwrap_or(task.overlap_ratio);
        let cfg = train_config(c, TrainConfig::large_scale(*op), *seed);
        train(large_scale_model(*kind, task.input_size, *seed)?, &task, &cfg, name)
    })?;
    let labelled: Vec<(String, RunRecord)> = records
        .into_iter()
        .map(|r| (format!("{}-{}-s{}", r.task, r.model, r.seed), r))
        .collect();
    finish(c, &labelled)
}

fn run_fsir(c: &ExperimentConfig) -> Result<()> {
    let params = FsirParams::default();
    let truth = ode::fsir_truth(&params, ode::FSIR_STEPS)?;
    {
        let f = fs::File::create(c.out.join("fsir_truth.csv"))?;
        let mut w = std::io::BufWriter::new(f);
        use std::io::Write;
        writeln!(w, "{SCHEMA_LINE}")?;
        truth.write_csv(&ode::FSIR_VARS, w)?;
    }
    let archs: Vec<NodeArch> = c.models.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for &arch in &archs {
        for &h in &c.fsir_hidden {
            for &beta in &c.fsir_betas {
                for i in 0..c.runs as u64 {
                    jobs.push((arch, h, beta, c.seed + i));
                }
            }
        }
    }
    let defaults = NodeConfig::default();
    let records = run_jobs(c, &jobs, |&(arch, h, beta, seed)| {
        let model = NodeModel::new(fsir_chain(arch, h, seed)?, c.fsir_steps)?;
        let cfg = NodeConfig {
            learning_rate: c.learning_rate.unwrap_or(defaults.learning_rate),
            iterations: c.iterations.unwrap_or(defaults.iterations),
            finetune_learning_rate: c.finetune_learning_rate.unwrap_or(defaults.finetune_learning_rate),
            finetune_iterations: c.finetune_iterations.unwrap_or(defaults.finetune_iterations),
            beta_l1: beta,
            seed,
        };
        node_train(model, &truth, &cfg, &format!("{}-h{h}-b{beta}", arch.name()))
    })?;
    let labelled: Vec<(String, RunRecord)> = records
        .into_iter()
        .map(|r| (format!("fsir-{}-s{}", r.model, r.seed), r))
        .collect();
    finish(c, &labelled)?;

    let best_real = labelled
        .iter()
        .map(|(_, r)| r)
        .filter(|r| r.model.starts_with("real_npu") && !r.diverged)
        .min_by(|a, b| a.val_mse.total_cmp(&b.val_mse));
    if let Some(r) = best_real {
        let eqs = readout_equations(&r.params, &ode::FSIR_VARS, c.readout_prune)?;
        let text: String = eqs.iter().map(|e| format!("{e}\n")).collect();
        fs::write(c.out.join("readout.txt"), format!("# {} seed {}\n{text}", r.model, r.seed))?;
        fs::write(c.out.join("readout.json"), serde_json::to_string_pretty(&eqs)? + "\n")?;
    }
    Ok(())
}

/// Named gradient-surface units: `naive_npu`, `npu_g55` (gates 0.5, 0.5), `npu_g10` (gates 1, 0).
pub fn surface_unit(name: &str) -> Result<SurfaceUnit> {
    match name {
        "naive_npu" | "naivenpu" => Ok(SurfaceUnit::NaiveNpu),
        "npu_g55" | "npu" => Ok(SurfaceUnit::Npu { gates: [0.5, 0.5] }),
        "npu_g10" => Ok(SurfaceUnit::Npu { gates: [1.0, 0.0] }),
        _ => Err(Error::Unknown {
            what: "surface unit",
            name: name.to_string(),
        }),
    }
}

fn run_gradsurf(c: &ExperimentConfig) -> Result<()> {
    let units: Vec<SurfaceUnit> = c.models.iter().map(|m| surface_unit(m)).collect::<Result<_>>()?;
    let batch = data::gen_identity_toy(c.surface_batch, c.surface_seed);
    let axis = linspace(c.surface_lo, c.surface_hi, c.surface_points);
    let surfaces: Vec<analysis::Surface> = pool(c)?.install(|| {
        units
            .par_iter()
            .map(|&u| gradient_surface(u, &axis, &axis, &batch))
            .collect::<Result<_>>()
    })?;

    let mut w = report::csv_writer(&c.out.join("surface.csv"))?;
    w.write_record(["unit", "w1", "w2", "gnorm"])?;
    for (name, s) in c.models.iter().zip(&surfaces) {
        for (i, w1) in s.w1_axis.iter().enumerate() {
            for (j, w2) in s.w2_axis.iter().enumerate() {
                w.write_record([name.clone(), w1.to_string(), w2.to_string(), s.values[i][j].to_string()])?;
            }
        }
    }
    w.flush()?;

    let mut w = report::csv_writer(&c.out.join("summary.csv"))?;
    w.write_record(["unit", "max_gnorm", "plateau_mean", "plateau_ratio", "max_w2_spread"])?;
    for (name, s) in c.models.iter().zip(&surfaces) {
        let max = s.max();
        let plateau = s.mean_where(|_, w2| w2 > 0.75);
        w.write_record([
            name.clone(),
            max.to_string(),
            plateau.to_string(),
            (plateau / max).to_string(),
            w2_spread(s).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Largest spread of a surface row, i.e. how far it is from constant in `w2`.
pub fn w2_spread(s: &analysis::Surface) -> f64 {
    s.values
        .iter()
        .map(|row| {
            let (lo, hi) = row
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max)
}
