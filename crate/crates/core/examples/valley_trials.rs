//! Repeated gradient descent on the sparse-sparse valley instance, one
//! table row per activation.

use sparse_landscape::counterexamples::SS_EXPERIMENT_Y;
use sparse_landscape::trainer::{run_ss_trials, seed_from_env, TrainConfig, TrialClass};
use sparse_landscape::Activation;

fn main() -> sparse_landscape::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let config = TrainConfig {
        seed: seed_from_env(0),
        ..TrainConfig::default()
    };
    println!("{:<16} {:>7} {:>8} {:>6} {:>9}", "activation", "valley", "escaped", "other", "clusters");
    for act in [Activation::ShiftedSigmoid, Activation::Tanh, Activation::Relu] {
        let t0 = std::time::Instant::now();
        let stats = run_ss_trials(act.clone(), SS_EXPERIMENT_Y, n, &config)?;
        println!(
            "{:<16} {:>7} {:>8} {:>6} {:>9}   ({:.1}s)",
            act.name(),
            stats.count(TrialClass::Valley),
            stats.count(TrialClass::Escaped),
            stats.count(TrialClass::Other),
            stats.clusters.len(),
            t0.elapsed().as_secs_f64()
        );
        for c in &stats.clusters {
            println!("    {:?} loss {:.6} x{}", c.classification, c.center_loss, c.count);
        }
    }
    Ok(())
}
