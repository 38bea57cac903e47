//! Sparse-sparse valley: the valley point, its escape, and random
//! perturbations that never go below the valley level.

use sparse_landscape::counterexamples::{build_ss_valley, verify_ss_valley, SS_COMPLIANT_Y, SS_EXPERIMENT_Y};
use sparse_landscape::Activation;

fn main() -> sparse_landscape::Result<()> {
    for act in [Activation::Tanh, Activation::ShiftedSigmoid] {
        for y in [SS_COMPLIANT_Y, SS_EXPERIMENT_Y] {
            let inst = build_ss_valley(y, act.clone())?;
            let v = verify_ss_valley(&inst, 1000, 0.05, 0);
            println!(
                "{:<16} y={y:?}  valley {:.6}  escape {:.6}  constraints {}  probe {}/{} below",
                act.name(),
                v.valley_loss,
                v.escape_loss,
                inst.constraints.all(),
                v.probe.falsifications,
                v.probe.n_perturb
            );
        }
    }
    Ok(())
}
