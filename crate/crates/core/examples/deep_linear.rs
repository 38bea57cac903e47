//! Gradient descent on a deep sparse linear network with scalar output,
//! compared against the least-squares optimum.

use sparse_landscape::trainer::{
    gd_train, gen_synthetic, linear_regression_optimum, random_effective_net, seed_from_env, Init,
    LossKind, TrainConfig,
};
use sparse_landscape::Activation;

fn main() -> sparse_landscape::Result<()> {
    let seed = seed_from_env(0);
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let lr = args.first().copied().unwrap_or(0.01);
    let mult = args.get(1).copied().unwrap_or(1.0);
    let sparsity = args.get(2).copied().unwrap_or(0.4);
    let data = gen_synthetic(100, 20, 1, seed, 5.0, 1.0)?;
    let widths = [20, 100, 100, 100, 100, 1];
    let (net, _, used) = random_effective_net(&widths, &[sparsity, sparsity, sparsity, sparsity, 0.0], Activation::Linear, seed, 50)?;
    let config = TrainConfig {
        learning_rate: lr,
        max_epochs: 20_000,
        loss: LossKind::Mse,
        init: Init::Scaled { multiplier: mult },
        seed,
        rank_every: 1000,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let trace = gd_train(&net, &data, &config)?;
    let opt = linear_regression_optimum(&data, LossKind::Mse);
    println!("least-squares optimum {opt:.10}, final gradient norm {:.2e}", trace.final_grad_norm);
    println!("mask seed {used}, realized sparsity {:.3}", net.sparsity());
    for (k, l) in trace.losses.iter().enumerate().step_by(1000) {
        println!("epoch {k:>6}  loss {l:.8}  gap {:.3e}", l - opt);
    }
    println!(
        "stop {:?} after {} epochs ({:.1}s); final gap {:.3e}; monotone violation {:.3e}",
        trace.stop,
        trace.epochs,
        t0.elapsed().as_secs_f64(),
        trace.final_loss - opt,
        trace.monotone_violation()
    );
    Ok(())
}
