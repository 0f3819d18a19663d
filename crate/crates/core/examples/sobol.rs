//! Low-discrepancy points and the large-scale data stream built on them.

use npu::data::{gen_large_scale, sobol_points, ArithOp, Split, TaskSpec};

fn main() -> npu::Result<()> {
    let p = sobol_points(2, 8, 1)?;
    for r in 0..p.rows() {
        println!("{:?}", p.row_slice(r));
    }
    let task = TaskSpec::large_scale(ArithOp::Div);
    let (x, y) = gen_large_scale(&task, 4, Split::Validation)?;
    println!("\nvalidation batch: {}x{} inputs, targets {:?}", x.rows(), x.cols(), y.data());
    Ok(())
}
