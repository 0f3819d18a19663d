//! Fits a RealNPU neural ODE to a fractional SIR trajectory and prints the
//! equations it reads out, next to those of the exact model.
//!
//! `cargo run --release --example fsir_discovery -- 2000`

use npu::ode::{
    fsir_chain, fsir_truth, node_train, readout_equations, true_fsir_chain, FsirParams, NodeArch, NodeConfig,
    NodeModel, FSIR_STEPS, FSIR_VARS,
};

fn main() -> npu::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2_000);
    let p = FsirParams::default();
    let truth = fsir_truth(&p, FSIR_STEPS)?;

    println!("exact model:");
    for eq in readout_equations(&true_fsir_chain(&p)?, &FSIR_VARS, 1e-3)? {
        println!("  {eq}");
    }

    let model = NodeModel::new(fsir_chain(NodeArch::RealNpu, 6, 0)?, 400)?;
    let cfg = NodeConfig {
        iterations,
        beta_l1: 0.1,
        ..NodeConfig::default()
    };
    let r = node_train(model, &truth, &cfg, "real_npu")?;
    println!("\nlearned ({} nonzero params, trajectory mse {:.3e}):", r.nonzero, r.val_mse);
    for eq in readout_equations(&r.params, &FSIR_VARS, 1e-2)? {
        println!("  {eq}");
    }
    Ok(())
}
