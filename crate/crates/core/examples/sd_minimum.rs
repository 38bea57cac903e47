//! Spurious strict minimum of a two-layer linear net with a sparse first
//! layer: gradient, Hessian spectrum, probe verdict and a lower point.

use sparse_landscape::calculus::ProbeOptions;
use sparse_landscape::counterexamples::{build_sd_minimum, verify_sd_minimum};

fn main() -> sparse_landscape::Result<()> {
    let inst = build_sd_minimum()?;
    let v = verify_sd_minimum(&inst, &ProbeOptions::default())?;
    println!("theta        {:?}", inst.theta);
    println!("loss         {:.12} (221/360 = {:.12})", v.loss, 221.0 / 360.0);
    println!("grad norm    {:.2e}", v.report.grad_norm);
    println!("eigenvalues  {:.4?}", v.report.eigenvalues);
    println!("null space   {} directions, probe verdict {:?}", v.report.null_basis.len(), v.report.min_probe);
    println!("theta'       {:?} -> loss {:.6}", inst.theta_better, v.better_loss);
    let (r1, r2) = inst.residual_products(&inst.theta)?;
    println!("R Z1^T = {:?}", sparse_landscape::linalg::to_rows(&r1));
    println!("R Z2^T = {:?}", sparse_landscape::linalg::to_rows(&r2));
    println!("all checks pass: {}", v.all_pass());
    Ok(())
}
