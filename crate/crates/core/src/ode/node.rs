use super::{FsirParams, Trajectory};
use crate::tensor::{Graph, Tensor, Var};
use crate::training::{l1_norm, AdamState, RunRecord};
use crate::units::{BoundChain, Chain, Layer, LayerKind, NauParams, NpuParams, DEFAULT_NONZERO_THRESHOLD};
use crate::{Error, Result};

/// Autonomous dynamics `du/dt = chain(u)` integrated with fixed-step RK4.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub dynamics: Chain,
    pub step_count: usize,
}

impl NodeModel {
    pub fn new(dynamics: Chain, step_count: usize) -> Result<Self> {
        if dynamics.in_width() != dynamics.out_width() {
            return Err(Error::invalid(
                "node dynamics",
                format!("{} must map a state onto its derivative", dynamics.describe()),
            ));
        }
        if step_count == 0 {
            return Err(Error::invalid("node dynamics", "step_count must be positive"));
        }
        Ok(Self { dynamics, step_count })
    }
}

/// Dynamics architectures for the fSIR fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeArch {
    /// `NPU(3,h) → NAU(h,3)`
    Npu,
    /// `RealNPU(3,h) → NAU(h,3)`
    RealNpu,
    /// `Dense(3,h,σ) → Dense(h,h,σ) → Dense(h,3)`
    Dense,
}

impl NodeArch {
    pub fn name(self) -> &'static str {
        match self {
            NodeArch::Npu => "npu",
            NodeArch::RealNpu => "real_npu",
            NodeArch::Dense => "dense",
        }
    }
}

impl std::str::FromStr for NodeArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "npu" => Ok(NodeArch::Npu),
            "realnpu" | "npu_real" | "real_npu" => Ok(NodeArch::RealNpu),
            "dense" => Ok(NodeArch::Dense),
            _ => Err(Error::Unknown {
                what: "node model",
                name: s.to_string(),
            }),
        }
    }
}

/// Factor applied to the output layer's initial weights so that the
/// untrained dynamics stay slow enough to integrate over the whole horizon.
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

/// Freshly initialised dynamics for a 3-variable state with hidden width `h`.
pub fn fsir_chain(arch: NodeArch, h: usize, seed: u64) -> Result<Chain> {
    let spec: Vec<(LayerKind, usize, usize)> = match arch {
        NodeArch::Npu => vec![(LayerKind::Npu, 3, h), (LayerKind::Nau, h, 3)],
        NodeArch::RealNpu => vec![(LayerKind::RealNpu, 3, h), (LayerKind::Nau, h, 3)],
        NodeArch::Dense => vec![
            (LayerKind::DenseSigmoid, 3, h),
            (LayerKind::DenseSigmoid, h, h),
            (LayerKind::Dense, h, 3),
        ],
    };
    let mut chain = Chain::init(&spec, seed)?;
    let last = chain.layers().len() - 1;
    for t in chain.layers_mut()[last].params_mut() {
        t.data_mut().iter_mut().for_each(|v| *v *= OUTPUT_INIT_SCALE);
    }
    Ok(chain)
}

/// Adam phase followed by a low-learning-rate fine-tune phase.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub finetune_learning_rate: f64,
    pub finetune_iterations: usize,
    pub beta_l1: f64,
    pub seed: u64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            iterations: 3000,
            finetune_learning_rate: 5e-4,
            finetune_iterations: 1000,
            beta_l1: 0.0,
            seed: 0,
        }
    }
}

/// Unrolls RK4 on the graph and returns the observed states stacked as rows.
pub fn node_trajectory(g: &mut Graph, model: &NodeModel, bound: &BoundChain, data: &Trajectory) -> Result<Var> {
    let obs = data.len();
    if obs == 0 || !model.step_count.is_multiple_of(obs) {
        return Err(Error::invalid(
            "solver grid",
            format!("{} steps cannot be split into {obs} observations", model.step_count),
        ));
    }
    let t_end = data.times[obs - 1];
    let h = (t_end - data.t0) / model.step_count as f64;
    let every = model.step_count / obs;
    for (k, &t) in data.times.iter().enumerate() {
        let expect = data.t0 + ((k + 1) * every) as f64 * h;
        if (t - expect).abs() > 1e-9 * t_end.abs().max(1.0) {
            return Err(Error::invalid("trajectory", "observation times are not equally spaced"));
        }
    }
    let chain = &model.dynamics;
    let mut u = g.constant(Tensor::row(&data.u0));
    let mut observed = Vec::with_capacity(obs);
    for step in 0..model.step_count {
        let k1 = chain.forward(g, bound, u)?;
        let d = g.mul_scalar(k1, 0.5 * h);
        let u2 = g.add(u, d)?;
        let k2 = chain.forward(g, bound, u2)?;
        let d = g.mul_scalar(k2, 0.5 * h);
        let u3 = g.add(u, d)?;
        let k3 = chain.forward(g, bound, u3)?;
        let d = g.mul_scalar(k3, h);
        let u4 = g.add(u, d)?;
        let k4 = chain.forward(g, bound, u4)?;
        let k23 = g.add(k2, k3)?;
        let k23 = g.mul_scalar(k23, 2.0);
        let s = g.add(k1, k23)?;
        let s = g.add(s, k4)?;
        let d = g.mul_scalar(s, h / 6.0);
        u = g.add(u, d)?;
        if (step + 1) % every == 0 {
            observed.push(u);
        }
    }
    Ok(g.concat_rows(&observed)?)
}

/// `(loss, data MSE)` vars: `MSE(X, NODE(u₀)) + β ‖θ‖₁`.
pub fn node_loss(g: &mut Graph, model: &NodeModel, bound: &BoundChain, data: &Trajectory, beta_l1: f64) -> Result<(Var, Var)> {
    let pred = node_trajectory(g, model, bound, data)?;
    let target = g.constant(data.states.clone());
    let m = crate::training::mse(g, pred, target)?;
    if beta_l1 == 0.0 {
        return Ok((m, m));
    }
    let l1 = l1_norm(g, bound.all())?;
    let l1 = g.mul_scalar(l1, beta_l1);
    Ok((g.add(m, l1)?, m))
}

fn trajectory_mse(model: &NodeModel, data: &Trajectory) -> Result<f64> {
    let mut g = Graph::new();
    let bound = model.dynamics.bind(&mut g);
    let (_, m) = node_loss(&mut g, model, &bound, data, 0.0)?;
    Ok(g.value(m).item())
}

/// Fits the dynamics to `data` by backpropagating through every solver stage.
///
/// The returned record's `val_mse` is the unregularised trajectory MSE of the
/// final parameters; a non-finite loss or gradient stops training and flags
/// the run as diverged.
pub fn node_train(mut model: NodeModel, data: &Trajectory, config: &NodeConfig, name: &str) -> Result<RunRecord> {
    if data.len() < 2 {
        return Err(Error::invalid("trajectory", "need at least two observations"));
    }
    if data.dim() != model.dynamics.in_width() {
        return Err(Error::invalid(
            "node dynamics",
            format!("{} does not match a {}-dimensional state", model.dynamics.describe(), data.dim()),
        ));
    }
    let mut adam = AdamState::new(model.dynamics.params());
    let total = config.iterations + config.finetune_iterations;
    let mut trace = Vec::with_capacity(total);
    let mut diverged = false;
    for it in 0..total {
        let lr = if it < config.iterations {
            config.learning_rate
        } else {
            config.finetune_learning_rate
        };
        let mut g = Graph::new();
        let bound = model.dynamics.bind(&mut g);
        let (loss, m) = node_loss(&mut g, &model, &bound, data, config.beta_l1)?;
        if !g.value(loss).item().is_finite() {
            diverged = true;
            break;
        }
        let data_value = g.value(m).item();
        g.backward(loss)?;
        let grads: Vec<Tensor> = bound.all().map(|v| g.grad(v).expect("bound param").clone()).collect();
        if adam.step(&mut model.dynamics.params_mut(), &grads, lr).is_err() {
            diverged = true;
            break;
        }
        trace.push(data_value);
    }
    let val_mse = if diverged { f64::NAN } else { trajectory_mse(&model, data)? };
    if !val_mse.is_finite() {
        diverged = true;
    }
    Ok(RunRecord {
        task: "fsir".into(),
        model: name.to_string(),
        seed: config.seed,
        nonzero: model.dynamics.count_nonzero(DEFAULT_NONZERO_THRESHOLD),
        params: model.dynamics,
        train_trace: trace,
        val_mse,
        op_mse: Vec::new(),
        diverged,
    })
}

/// RealNPU(3,3) → NAU(3,3) whose hidden units are `S^κ I^γ`, `I` and `R`.
pub fn true_fsir_chain(p: &FsirParams) -> Result<Chain> {
    let npu = NpuParams {
        wr: Tensor::from_rows(&[vec![p.kappa, p.gamma, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]),
        wi: Tensor::zeros(3, 3),
        g: Tensor::ones(1, 3),
        gated: true,
        real_only: true,
    };
    let nau = NauParams {
        a: Tensor::from_rows(&[
            vec![-p.beta, 0.0, p.eta],
            vec![p.beta, -p.alpha, 0.0],
            vec![0.0, p.alpha, -p.eta],
        ]),
    };
    Chain::new(vec![Layer::Npu(npu), Layer::Nau(nau)])
}

#[cfg(test)]
mod tests {
    use super::super::{fsir_truth, FSIR_STEPS};
    use super::*;
    use crate::units::LayerKind;

    #[test]
    fn arch_shapes() {
        let d = fsir_chain(NodeArch::Dense, 6, 0).unwrap();
        assert_eq!(d.describe(), "dense_sigmoid(3,6)>dense_sigmoid(6,6)>dense(6,3)");
        assert_eq!(fsir_chain(NodeArch::RealNpu, 6, 0).unwrap().num_params(), 18 + 3 + 18);
        assert!("bogus".parse::<NodeArch>().is_err());
    }

    #[test]
    fn true_model_fits_without_training() {
        let p = FsirParams::default();
        let data = fsir_truth(&p, FSIR_STEPS).unwrap();
        let model = NodeModel::new(true_fsir_chain(&p).unwrap(), FSIR_STEPS).unwrap();
        let m = trajectory_mse(&model, &data).unwrap();
        assert!(m < 1e-6, "{m}");
    }

    #[test]
    fn zero_dynamics_on_constant_data() {
        let chain = Chain::init(&[(LayerKind::Nau, 2, 2)], 0).unwrap();
        let mut chain = chain;
        chain.params_mut()[0].data_mut().fill(0.0);
        let data = Trajectory {
            t0: 0.0,
            u0: vec![1.0, 2.0],
            times: vec![1.0, 2.0],
            states: Tensor::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]),
        };
        let model = NodeModel::new(chain, 4).unwrap();
        assert_eq!(trajectory_mse(&model, &data).unwrap(), 0.0);
    }

    #[test]
    fn short_training_reduces_loss() {
        let p = FsirParams::default();
        let data = fsir_truth(&p, FSIR_STEPS).unwrap();
        let model = NodeModel::new(fsir_chain(NodeArch::Npu, 4, 3).unwrap(), 80).unwrap();
        let cfg = NodeConfig {
            iterations: 30,
            finetune_iterations: 5,
            ..NodeConfig::default()
        };
        let r = node_train(model, &data, &cfg, "npu").unwrap();
        assert!(!r.diverged);
        assert_eq!(r.train_trace.len(), 35);
        assert!(r.val_mse < r.train_trace[0]);
    }
}
