//! Single-filter SAME convolution with a spurious valley at loss 1/2.

use sparse_landscape::counterexamples::{build_cnn_same_valley, probe_cnn_same_valley};

fn main() {
    let v = build_cnn_same_valley();
    for a in [0.5, 1.0, 2.0, 4.0] {
        let r = probe_cnn_same_valley(&v, a, 2000, 1);
        println!("a = {a:<4} valley {}  lowest perturbed {:.8}  below 1/2: {}", r.valley_loss, r.min_loss, r.falsifications);
    }
    let (u, w) = v.global_witness();
    println!("witness w = {w:?}, loss {:e}", v.loss(&u, w));
}
