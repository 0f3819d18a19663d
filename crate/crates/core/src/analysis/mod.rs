//! Gradient-norm surfaces, extrapolation heatmaps and Pareto fronts.

use crate::data::{self, ArithOp};
use crate::tensor::{Graph, Tensor};
use crate::units::{npu_forward, Chain};
use crate::Result;

/// Anything that maps a batch of inputs to a batch of outputs.
pub trait Predict {
    fn predict(&self, x: &Tensor) -> Result<Tensor>;
}

impl Predict for Chain {
    fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.eval(x)
    }
}

impl<F> Predict for F
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self(x)
    }
}

/// Which 1×2 power unit a surface is computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceUnit {
    NaiveNpu,
    /// Gated unit with the gate held fixed at the given values.
    Npu { gates: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub w1_axis: Vec<f64>,
    pub w2_axis: Vec<f64>,
    /// `values[i][j]` is the gradient norm at `(w1_axis[i], w2_axis[j])`.
    pub values: Vec<Vec<f64>>,
}

impl Surface {
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Mean over grid points selected by `keep(w1, w2)`.
    pub fn mean_where(&self, keep: impl Fn(f64, f64) -> bool) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, &w1) in self.w1_axis.iter().enumerate() {
            for (j, &w2) in self.w2_axis.iter().enumerate() {
                if keep(w1, w2) {
                    sum += self.values[i][j];
                    n += 1;
                }
            }
        }
        sum / n as f64
    }
}

/// `L = Σ |unit(x) - x₁|` for a 1×2 unit with `Wi = 0`.
pub fn identity_loss_and_grad(unit: SurfaceUnit, w: [f64; 2], x: &Tensor, t: &Tensor) -> Result<(f64, [f64; 2])> {
    let mut g = Graph::new();
    let wr = g.param(Tensor::row(&w));
    let wi = g.constant(Tensor::zeros(1, 2));
    let gate = match unit {
        SurfaceUnit::NaiveNpu => None,
        SurfaceUnit::Npu { gates } => Some(g.constant(Tensor::row(&gates))),
    };
    let xv = g.constant(x.clone());
    let tv = g.constant(t.clone());
    let y = npu_forward(&mut g, wr, Some(wi), gate, xv)?;
    let d = g.sub(y, tv)?;
    let a = g.abs(d);
    let loss = g.sum(a);
    g.backward(loss)?;
    let grad = g.grad(wr).expect("param");
    Ok((g.value(loss).item(), [grad.data()[0], grad.data()[1]]))
}

/// Gradient norm `‖∂L/∂Wr‖₂` of the identity task over a weight grid.
pub fn gradient_surface(unit: SurfaceUnit, w1_grid: &[f64], w2_grid: &[f64], batch: &(Tensor, Tensor)) -> Result<Surface> {
    let (x, t) = batch;
    let values = w1_grid
        .iter()
        .map(|&w1| {
            w2_grid
                .iter()
                .map(|&w2| {
                    let (_, d) = identity_loss_and_grad(unit, [w1, w2], x, t)?;
                    Ok((d[0] * d[0] + d[1] * d[1]).sqrt())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Surface {
        w1_axis: w1_grid.to_vec(),
        w2_axis: w2_grid.to_vec(),
        values,
    })
}

/// `n` evenly spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Absolute extrapolation error of output `op` over a `(x, y)` grid.
///
/// Row `i` corresponds to `x_grid[i]`, column `j` to `y_grid[j]`.
pub fn heatmap_eval(model: &impl Predict, op: ArithOp, x_grid: &[f64], y_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let col = op.simple_index().expect("single simple-task op");
    let (inputs, targets) = data::simple_grid(x_grid, y_grid);
    let pred = model.predict(&inputs)?;
    let ny = y_grid.len();
    Ok((0..x_grid.len())
        .map(|i| {
            (0..ny)
                .map(|j| {
                    let r = i * ny + j;
                    (pred.get(r, col) - targets.get(r, col)).abs()
                })
                .collect()
        })
        .collect())
}

/// Test grid for an op: the positive grid for square roots, the mixed-sign one otherwise.
pub fn test_grid(op: ArithOp) -> Vec<f64> {
    match op {
        ArithOp::Sqrt => data::grid_points(&data::simple_sqrt_grid()),
        _ => data::grid_points(&data::simple_test_grid()),
    }
}

/// Test MSE per output of the simple task over its extrapolation grids.
pub fn simple_test_errors(model: &impl Predict) -> Result<Vec<(ArithOp, f64)>> {
    ArithOp::FOUR
        .iter()
        .map(|&op| {
            let grid = test_grid(op);
            let errs = heatmap_eval(model, op, &grid, &grid)?;
            let n = (grid.len() * grid.len()) as f64;
            let mse = errs.iter().flatten().map(|e| e * e).sum::<f64>() / n;
            Ok((op, mse))
        })
        .collect()
}

/// A run placed in (non-zero parameters, test MSE) space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub nonzero_params: usize,
    pub mse: f64,
    pub run_id: String,
}

/// `a` weakly dominates `b`: no worse in both coordinates and better in one.
pub fn dominates(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    a.nonzero_params <= b.nonzero_params
        && a.mse <= b.mse
        && (a.nonzero_params < b.nonzero_params || a.mse < b.mse)
}

/// Non-dominated points sorted by parameter count. Exact ties are all kept;
/// points with non-finite MSE are dropped.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted: Vec<&ParetoPoint> = points.iter().filter(|p| p.mse.is_finite()).collect();
    sorted.sort_by(|a, b| {
        a.nonzero_params
            .cmp(&b.nonzero_params)
            .then(a.mse.total_cmp(&b.mse))
    });
    let mut front = Vec::new();
    let mut best_smaller = f64::INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        let nz = sorted[i].nonzero_params;
        let group_min = sorted[i].mse;
        let mut j = i;
        while j < sorted.len() && sorted[j].nonzero_params == nz {
            if sorted[j].mse == group_min && group_min < best_smaller {
                front.push(sorted[j].clone());
            }
            j += 1;
        }
        best_smaller = best_smaller.min(group_min);
        i = j;
    }
    front
}
