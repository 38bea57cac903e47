//! How often a square random sparse hidden layer has full rank.

use sparse_landscape::landscape::{activation_admissible, full_rank_trial};
use sparse_landscape::trainer::seed_from_env;
use sparse_landscape::Activation;

fn main() -> sparse_landscape::Result<()> {
    let seed = seed_from_env(0);
    for act in [Activation::Sigmoid, Activation::Tanh, Activation::Relu, Activation::Polynomial { coeffs: vec![0.0, 1.0, 1.0] }] {
        for n in [6, 8, 12] {
            let full = (0..100)
                .map(|s| full_rank_trial(&act, n, 4, 0.7, seed + s))
                .collect::<sparse_landscape::Result<Vec<_>>>()?
                .iter()
                .filter(|t| t.rank == n)
                .count();
            let adm = activation_admissible(&act, n);
            println!("{:<10} n = {n:>2}: full rank {full:>3}/100, admissible {}", act.name(), adm.admissible);
        }
    }
    Ok(())
}
