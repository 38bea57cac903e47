//! Removing connections that lie on no input-to-output path.

use sparse_landscape::net::{effective_subnetwork, node_label, prune_useless, useless_connection_demo_net, NodeId};
use sparse_landscape::Activation;

fn main() -> sparse_landscape::Result<()> {
    let net = useless_connection_demo_net(Activation::Tanh);
    let levels = net.layers.len() + 1;
    let (reduced, rep) = prune_useless(&net);
    println!("widths {:?}, {} connections", net.widths(), net.nnz());
    for e in &rep.removed_edges {
        let from = node_label(NodeId { level: e.layer, index: e.col }, levels);
        let to = node_label(NodeId { level: e.layer + 1, index: e.row }, levels);
        println!("  remove {from} -> {to}");
    }
    let names: Vec<_> = rep.neutered.iter().map(|&n| node_label(n, levels)).collect();
    println!("neutered {names:?} after {} sweeps", rep.sweeps);
    println!("kept {} connections, sparsity {:.3} -> {:.3}", reduced.nnz(), net.sparsity(), reduced.sparsity());
    match effective_subnetwork(&net) {
        Ok((eff, _)) => println!("strict reduction widths {:?}", eff.widths()),
        Err(e) => println!("strict reduction refused: {e}"),
    }
    Ok(())
}
