//! Masked layers and networks, forward evaluation, pattern decomposition and
//! removal of connections that cannot influence the output.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{shape_err, Error, Result};

/// Binary connectivity pattern; `true` means the weight is trainable.
pub type Mask = DMatrix<bool>;

pub fn full_mask(rows: usize, cols: usize) -> Mask {
    Mask::from_element(rows, cols, true)
}

pub fn mask_from_rows(rows: &[Vec<u8>]) -> Mask {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    Mask::from_fn(r, c, |i, j| rows[i][j] != 0)
}

/// Dense weights paired with a mask. Entries where the mask is off are held
/// at exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLayer {
    weights: DMatrix<f64>,
    mask: Mask,
    bias: Option<DVector<f64>>,
    bias_mask: Option<Vec<bool>>,
}

impl SparseLayer {
    /// Rejects any nonzero weight sitting on a masked-off entry.
    pub fn new(weights: DMatrix<f64>, mask: Mask) -> Result<Self> {
        if weights.shape() != mask.shape() {
            return Err(shape_err(
                "SparseLayer::new",
                format!("{:?}", weights.shape()),
                format!("{:?}", mask.shape()),
            ));
        }
        for j in 0..weights.ncols() {
            for i in 0..weights.nrows() {
                if !mask[(i, j)] && weights[(i, j)] != 0.0 {
                    return Err(Error::MaskViolation {
                        layer: 0,
                        row: i,
                        col: j,
                        value: weights[(i, j)],
                    });
                }
            }
        }
        Ok(SparseLayer {
            weights,
            mask,
            bias: None,
            bias_mask: None,
        })
    }

    /// Zeroes the masked-off entries of `weights` instead of rejecting them.
    pub fn masked(mut weights: DMatrix<f64>, mask: Mask) -> Result<Self> {
        if weights.shape() != mask.shape() {
            return Err(shape_err(
                "SparseLayer::masked",
                format!("{:?}", weights.shape()),
                format!("{:?}", mask.shape()),
            ));
        }
        weights.zip_apply(&mask, |w, m| {
            if !m {
                *w = 0.0
            }
        });
        SparseLayer::new(weights, mask)
    }

    pub fn dense(weights: DMatrix<f64>) -> Self {
        let mask = full_mask(weights.nrows(), weights.ncols());
        SparseLayer {
            weights,
            mask,
            bias: None,
            bias_mask: None,
        }
    }

    pub fn with_bias(mut self, bias: DVector<f64>, bias_mask: Vec<bool>) -> Result<Self> {
        if bias.len() != self.out_dim() || bias_mask.len() != self.out_dim() {
            return Err(shape_err(
                "SparseLayer::with_bias",
                format!("length {}", self.out_dim()),
                format!("{} / {}", bias.len(), bias_mask.len()),
            ));
        }
        for (i, (&b, &m)) in bias.iter().zip(&bias_mask).enumerate() {
            if !m && b != 0.0 {
                return Err(Error::MaskViolation {
                    layer: 0,
                    row: i,
                    col: usize::MAX,
                    value: b,
                });
            }
        }
        self.bias = Some(bias);
        self.bias_mask = Some(bias_mask);
        Ok(self)
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn bias(&self) -> Option<&DVector<f64>> {
        self.bias.as_ref()
    }

    pub fn bias_mask(&self) -> Option<&[bool]> {
        self.bias_mask.as_deref()
    }

    pub fn has_live_bias(&self, row: usize) -> bool {
        self.bias_mask.as_ref().is_some_and(|m| m[row])
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Number of trainable weights (bias entries included).
    pub fn nnz(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
            + self
                .bias_mask
                .as_ref()
                .map_or(0, |m| m.iter().filter(|&&b| b).count())
    }

    /// Replaces the weights, re-applying the mask so pruned entries stay 0.
    pub fn set_weights(&mut self, mut w: DMatrix<f64>) -> Result<()> {
        if w.shape() != self.weights.shape() {
            return Err(shape_err(
                "SparseLayer::set_weights",
                format!("{:?}", self.weights.shape()),
                format!("{:?}", w.shape()),
            ));
        }
        w.zip_apply(&self.mask, |x, m| {
            if !m {
                *x = 0.0
            }
        });
        self.weights = w;
        Ok(())
    }

    pub fn set_bias(&mut self, mut b: DVector<f64>) -> Result<()> {
        let Some(mask) = &self.bias_mask else {
            return Err(Error::InvalidArgument("layer has no bias".into()));
        };
        if b.len() != mask.len() {
            return Err(shape_err(
                "SparseLayer::set_bias",
                mask.len().to_string(),
                b.len().to_string(),
            ));
        }
        for (x, &m) in b.iter_mut().zip(mask) {
            if !m {
                *x = 0.0;
            }
        }
        self.bias = Some(b);
        Ok(())
    }

    /// Pre-activation `W X (+ b 1ᵀ)`.
    pub fn linear(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.in_dim() {
            return Err(shape_err(
                "SparseLayer::linear",
                format!("{} input rows", self.in_dim()),
                x.nrows().to_string(),
            ));
        }
        let mut z = &self.weights * x;
        if let Some(b) = &self.bias {
            for mut col in z.column_iter_mut() {
                col += b;
            }
        }
        Ok(z)
    }
}

/// Feed-forward network: hidden layers share one activation, the last layer
/// is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseNet {
    pub layers: Vec<SparseLayer>,
    pub activation: Activation,
}

/// Output of [`SparseNet::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    pub output: DMatrix<f64>,
    /// Post-activation output of each hidden layer.
    pub hidden: Vec<DMatrix<f64>>,
    /// Pre-activation of each hidden layer.
    pub pre: Vec<DMatrix<f64>>,
}

impl SparseNet {
    pub fn new(layers: Vec<SparseLayer>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a network needs at least 2 layers, got {}",
                layers.len()
            )));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(shape_err(
                    "SparseNet::new",
                    format!("layer {} in-dim {}", k + 1, pair[0].out_dim()),
                    pair[1].in_dim().to_string(),
                ));
            }
        }
        Ok(SparseNet { layers, activation })
    }

    /// Two-layer net `U σ(W X)` with dense second layer.
    pub fn two_layer(w: SparseLayer, u: DMatrix<f64>, activation: Activation) -> Result<Self> {
        SparseNet::new(vec![w, SparseLayer::dense(u)], activation)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    /// `[d_0, d_1, ..., d_L]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.in_dim()];
        w.extend(self.layers.iter().map(|l| l.out_dim()));
        w
    }

    pub fn nnz(&self) -> usize {
        self.layers.iter().map(|l| l.nnz()).sum()
    }

    /// Fraction of weight entries (biases excluded) that are masked off.
    pub fn sparsity(&self) -> f64 {
        let total: usize = self.layers.iter().map(|l| l.mask.len()).sum();
        let on: usize = self
            .layers
            .iter()
            .map(|l| l.mask.iter().filter(|&&m| m).count())
            .sum();
        1.0 - on as f64 / total as f64
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<Forward> {
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.linear(&a)?;
            if k == last {
                return Ok(Forward {
                    output: z,
                    hidden,
                    pre,
                });
            }
            a = z.map(|v| self.activation.eval(v));
            pre.push(z);
            hidden.push(a.clone());
        }
        unreachable!("network has at least two layers")
    }

    pub fn output(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// `½‖f(X) − Y‖²_F`.
    pub fn loss(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        let out = self.output(x)?;
        if out.shape() != y.shape() {
            return Err(shape_err(
                "SparseNet::loss",
                format!("{:?}", out.shape()),
                format!("{:?}", y.shape()),
            ));
        }
        Ok(0.5 * (out - y).norm_squared())
    }

    /// True when every masked-off weight and bias is exactly zero.
    pub fn respects_masks(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().zip(l.mask.iter()).all(|(&w, &m)| m || w == 0.0)
                && match (&l.bias, &l.bias_mask) {
                    (Some(b), Some(m)) => b.iter().zip(m).all(|(&x, &on)| on || x == 0.0),
                    _ => true,
                }
        })
    }
}

/// Hidden rows grouped by identical mask row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDecomposition {
    /// Distinct mask rows, in order of first occurrence.
    pub patterns: Vec<Vec<bool>>,
    /// Row indices belonging to each pattern.
    pub groups: Vec<Vec<usize>>,
    /// Input coordinates switched on by each pattern.
    pub supports: Vec<Vec<usize>>,
    /// Rows of `X` selected by each pattern, `d_i × n`.
    #[serde(skip)]
    pub slices: Vec<DMatrix<f64>>,
}

impl PatternDecomposition {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// `p_i`.
    pub fn widths(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }

    /// `d_i`.
    pub fn support_sizes(&self) -> Vec<usize> {
        self.supports.iter().map(|s| s.len()).collect()
    }

    pub fn hidden_width(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.patterns.first().map_or(0, |p| p.len())
    }

    /// Splits `U` (d_y × p) and `W` (p × d) into per-group blocks `U_i`
    /// (d_y × p_i) and `W_i` (p_i × d_i).
    pub fn split(
        &self,
        u: &DMatrix<f64>,
        w: &DMatrix<f64>,
    ) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
        let p = self.hidden_width();
        if u.ncols() != p || w.nrows() != p || w.ncols() != self.input_dim() {
            return Err(shape_err(
                "PatternDecomposition::split",
                format!("U ·×{p}, W {p}×{}", self.input_dim()),
                format!("U {:?}, W {:?}", u.shape(), w.shape()),
            ));
        }
        let mut us = Vec::with_capacity(self.len());
        let mut ws = Vec::with_capacity(self.len());
        for (g, sup) in self.groups.iter().zip(&self.supports) {
            us.push(u.select_columns(g));
            ws.push(w.select_rows(g).select_columns(sup));
        }
        Ok((us, ws))
    }

    /// Inverse of [`split`](Self::split).
    pub fn assemble(
        &self,
        us: &[DMatrix<f64>],
        ws: &[DMatrix<f64>],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if us.len() != self.len() || ws.len() != self.len() {
            return Err(shape_err(
                "PatternDecomposition::assemble",
                format!("{} groups", self.len()),
                format!("{} / {}", us.len(), ws.len()),
            ));
        }
        let dy = us.first().map_or(0, |u| u.nrows());
        let p = self.hidden_width();
        let mut u = DMatrix::zeros(dy, p);
        let mut w = DMatrix::zeros(p, self.input_dim());
        for (i, (g, sup)) in self.groups.iter().zip(&self.supports).enumerate() {
            if us[i].shape() != (dy, g.len()) || ws[i].shape() != (g.len(), sup.len()) {
                return Err(shape_err(
                    "PatternDecomposition::assemble",
                    format!("U_{i} {dy}×{}, W_{i} {}×{}", g.len(), g.len(), sup.len()),
                    format!("{:?}, {:?}", us[i].shape(), ws[i].shape()),
                ));
            }
            for (a, &row) in g.iter().enumerate() {
                u.set_column(row, &us[i].column(a));
                for (b, &col) in sup.iter().enumerate() {
                    w[(row, col)] = ws[i][(a, b)];
                }
            }
        }
        Ok((u, w))
    }
}

/// Groups the rows of `mask` by equality and slices `X` accordingly.
pub fn decompose_mask(mask: &Mask, x: &DMatrix<f64>) -> Result<PatternDecomposition> {
    if x.nrows() != mask.ncols() {
        return Err(shape_err(
            "decompose_patterns",
            format!("{} data rows", mask.ncols()),
            x.nrows().to_string(),
        ));
    }
    let mut patterns: Vec<Vec<bool>> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for r in 0..mask.nrows() {
        let row: Vec<bool> = mask.row(r).iter().copied().collect();
        if !row.iter().any(|&b| b) {
            return Err(Error::IneffectiveNeuron { row: r });
        }
        match patterns.iter().position(|p| *p == row) {
            Some(k) => groups[k].push(r),
            None => {
                patterns.push(row);
                groups.push(vec![r]);
            }
        }
    }
    let supports: Vec<Vec<usize>> = patterns
        .iter()
        .map(|p| (0..p.len()).filter(|&j| p[j]).collect())
        .collect();
    let slices = supports.iter().map(|s| x.select_rows(s)).collect();
    Ok(PatternDecomposition {
        patterns,
        groups,
        supports,
        slices,
    })
}

pub fn decompose_patterns(layer: &SparseLayer, x: &DMatrix<f64>) -> Result<PatternDecomposition> {
    decompose_mask(layer.mask(), x)
}

/// A neuron position: `level` 0 is the input, `level` L the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

/// A weight position: entry `(row, col)` of layer `layer` (0-based), joining
/// node `col` at level `layer` to node `row` at level `layer + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RemovalReport {
    pub removed_edges: Vec<EdgeId>,
    /// Biases switched off because their neuron reaches no output.
    pub removed_biases: Vec<NodeId>,
    /// Hidden neurons left with no connection at all.
    pub neutered: Vec<NodeId>,
    pub isolated_inputs: Vec<usize>,
    pub isolated_outputs: Vec<usize>,
    pub sweeps: usize,
}

impl RemovalReport {
    pub fn is_empty(&self) -> bool {
        self.removed_edges.is_empty() && self.removed_biases.is_empty()
    }
}

/// Human-readable neuron label: `x3`, `h2_1`, `y1` (1-based indices).
pub fn node_label(node: NodeId, n_levels: usize) -> String {
    if node.level == 0 {
        format!("x{}", node.index + 1)
    } else if node.level + 1 == n_levels {
        format!("y{}", node.index + 1)
    } else {
        format!("h{}_{}", node.level, node.index + 1)
    }
}

/// Removes every connection that lies on no input-to-output path.
///
/// Works to a fixed point by alternately dropping edges into non-output
/// nodes with zero out-degree and edges out of non-input nodes with zero
/// in-degree. A node with an unmasked bias keeps its outgoing edges even
/// without inputs, since the bias still propagates forward. Inputs or
/// outputs that end up disconnected are listed in the report rather than
/// treated as errors; see [`effective_subnetwork`] for the strict variant.
pub fn prune_useless(net: &SparseNet) -> (SparseNet, RemovalReport) {
    let mut masks: Vec<Mask> = net.layers.iter().map(|l| l.mask.clone()).collect();
    let mut bias_masks: Vec<Option<Vec<bool>>> =
        net.layers.iter().map(|l| l.bias_mask.clone()).collect();
    let n_layers = masks.len();
    let mut report = RemovalReport::default();

    loop {
        report.sweeps += 1;
        let mut changed = false;
        // in-degree of each node at level k+1 counts edges of layer k plus a live bias
        let indeg: Vec<Vec<usize>> = (0..n_layers)
            .map(|k| {
                (0..masks[k].nrows())
                    .map(|i| {
                        masks[k].row(i).iter().filter(|&&m| m).count()
                            + bias_masks[k].as_ref().map_or(0, |b| b[i] as usize)
                    })
                    .collect()
            })
            .collect();
        let outdeg: Vec<Vec<usize>> = (0..n_layers)
            .map(|k| {
                (0..masks[k].ncols())
                    .map(|j| masks[k].column(j).iter().filter(|&&m| m).count())
                    .collect()
            })
            .collect();
        for k in 0..n_layers {
            let (rows, cols) = masks[k].shape();
            for j in 0..cols {
                for i in 0..rows {
                    if !masks[k][(i, j)] {
                        continue;
                    }
                    // source node j lives at level k; it is hidden when k > 0
                    let dead_source = k > 0 && indeg[k - 1][j] == 0;
                    // target node i lives at level k+1; it is hidden unless k is last
                    let dead_target = k + 1 < n_layers && outdeg[k + 1][i] == 0;
                    if dead_source || dead_target {
                        masks[k][(i, j)] = false;
                        report.removed_edges.push(EdgeId { layer: k, row: i, col: j });
                        changed = true;
                    }
                }
            }
            if k + 1 < n_layers {
                if let Some(bm) = bias_masks[k].as_mut() {
                    for (i, b) in bm.iter_mut().enumerate() {
                        if *b && outdeg[k + 1][i] == 0 {
                            *b = false;
                            report.removed_biases.push(NodeId { level: k + 1, index: i });
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    report.removed_edges.sort();

    let levels = n_layers + 1;
    for k in 1..n_layers {
        for i in 0..masks[k - 1].nrows() {
            let has_in = masks[k - 1].row(i).iter().any(|&m| m)
                || bias_masks[k - 1].as_ref().is_some_and(|b| b[i]);
            let has_out = masks[k].column(i).iter().any(|&m| m);
            if !has_in && !has_out {
                report.neutered.push(NodeId { level: k, index: i });
            }
        }
    }
    report.isolated_inputs = (0..masks[0].ncols())
        .filter(|&j| !masks[0].column(j).iter().any(|&m| m))
        .collect();
    let last = n_layers - 1;
    report.isolated_outputs = (0..masks[last].nrows())
        .filter(|&i| {
            !masks[last].row(i).iter().any(|&m| m)
                && !bias_masks[last].as_ref().is_some_and(|b| b[i])
        })
        .collect();
    debug_assert!(levels >= 3);

    let layers = net
        .layers
        .iter()
        .zip(masks)
        .zip(bias_masks)
        .map(|((l, m), bm)| {
            let mut weights = l.weights.clone();
            weights.zip_apply(&m, |w, on| {
                if !on {
                    *w = 0.0
                }
            });
            let bias = l.bias.as_ref().map(|b| {
                let bm = bm.as_ref().expect("bias mask present with bias");
                DVector::from_iterator(b.len(), b.iter().zip(bm).map(|(&x, &on)| if on { x } else { 0.0 }))
            });
            SparseLayer {
                weights,
                mask: m,
                bias,
                bias_mask: bm,
            }
        })
        .collect();
    (
        SparseNet {
            layers,
            activation: net.activation.clone(),
        },
        report,
    )
}

/// [`prune_useless`], failing when an input or output neuron is left
/// without any connection.
pub fn effective_subnetwork(net: &SparseNet) -> Result<(SparseNet, RemovalReport)> {
    let (reduced, report) = prune_useless(net);
    if !report.isolated_inputs.is_empty() || !report.isolated_outputs.is_empty() {
        return Err(Error::NotEffective(format!(
            "isolated inputs {:?}, isolated outputs {:?}",
            report.isolated_inputs, report.isolated_outputs
        )));
    }
    Ok((reduced, report))
}

/// Whether every neuron lies on an input-to-output path.
pub fn is_effective(net: &SparseNet) -> bool {
    let (_, report) = prune_useless(net);
    report.is_empty() && report.isolated_inputs.is_empty() && report.isolated_outputs.is_empty()
}

/// Three-input, two-output network with two hidden layers of width four in
/// which several connections are useless: `x1` feeds only `h1_1`, whose sole
/// successor `h2_1` has no output; `h1_4` has no inputs and only feeds
/// `h2_3`, which in turn only feeds `y1`; `h2_4` has no inputs.
pub fn useless_connection_demo_net(activation: Activation) -> SparseNet {
    let m1 = mask_from_rows(&[
        vec![1, 1, 1],
        vec![0, 1, 1],
        vec![0, 1, 1],
        vec![0, 0, 0],
    ]);
    let m2 = mask_from_rows(&[
        vec![1, 1, 1, 0],
        vec![0, 1, 1, 1],
        vec![0, 0, 0, 1],
        vec![0, 0, 0, 0],
    ]);
    let m3 = mask_from_rows(&[vec![0, 1, 1, 1], vec![0, 1, 0, 1]]);
    let layer = |m: Mask, seed: f64| {
        let (r, c) = m.shape();
        let w = DMatrix::from_fn(r, c, |i, j| ((i * c + j) as f64 + seed).sin());
        SparseLayer::masked(w, m).expect("shapes agree")
    };
    SparseNet::new(vec![layer(m1, 0.3), layer(m2, 1.1), layer(m3, 2.7)], activation)
        .expect("chain is consistent")
}

/// First-layer mask with two disjoint filters over four inputs:
/// rows `[1,1,0,0]` and `[0,0,1,1]`.
pub fn non_overlapping_two_filter_mask() -> Mask {
    mask_from_rows(&[vec![1, 1, 0, 0], vec![0, 0, 1, 1]])
}

/// First-layer mask with two overlapping filters over four inputs:
/// rows `[1,1,1,0]` and `[0,1,1,1]`.
pub fn overlapping_two_filter_mask() -> Mask {
    mask_from_rows(&[vec![1, 1, 1, 0], vec![0, 1, 1, 1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeMap, BTreeSet};

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rand_mask(r: usize, c: usize, keep: f64, rng: &mut ChaCha8Rng) -> Mask {
        Mask::from_fn(r, c, |_, _| rng.random_bool(keep))
    }

    fn random_net(widths: &[usize], keep: f64, act: Activation, rng: &mut ChaCha8Rng) -> SparseNet {
        let layers = widths
            .windows(2)
            .map(|w| {
                let m = rand_mask(w[1], w[0], keep, rng);
                SparseLayer::masked(rand_mat(w[1], w[0], rng), m).unwrap()
            })
            .collect();
        SparseNet::new(layers, act).unwrap()
    }

    #[test]
    fn mask_violation_rejected() {
        let w = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let m = mask_from_rows(&[vec![1, 0]]);
        assert!(matches!(SparseLayer::new(w.clone(), m.clone()), Err(Error::MaskViolation { col: 1, .. })));
        let l = SparseLayer::masked(w, m).unwrap();
        assert_eq!(l.weights()[(0, 1)], 0.0);
    }

    #[test]
    fn set_weights_keeps_pruned_zero() {
        let mut l = SparseLayer::masked(DMatrix::zeros(2, 2), mask_from_rows(&[vec![1, 0], vec![0, 1]])).unwrap();
        l.set_weights(DMatrix::from_element(2, 2, 3.0)).unwrap();
        assert_eq!(l.weights(), &DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 3.0]));
    }

    #[test]
    fn too_few_layers() {
        let l = SparseLayer::dense(DMatrix::zeros(2, 2));
        assert!(SparseNet::new(vec![l], Activation::Linear).is_err());
    }

    #[test]
    fn disjoint_filter_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_mat(4, 5, &mut rng);
        let d = decompose_mask(&non_overlapping_two_filter_mask(), &x).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.widths(), vec![1, 1]);
        assert_eq!(d.support_sizes(), vec![2, 2]);
        assert_eq!(d.slices[0], x.rows(0, 2).into_owned());
        assert_eq!(d.slices[1], x.rows(2, 2).into_owned());
    }

    #[test]
    fn dense_mask_single_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_mat(3, 4, &mut rng);
        let d = decompose_mask(&full_mask(5, 3), &x).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.widths(), vec![5]);
        assert_eq!(d.slices[0], x);
    }

    #[test]
    fn zero_row_is_ineffective() {
        let m = mask_from_rows(&[vec![1, 0], vec![0, 0]]);
        let x = DMatrix::zeros(2, 3);
        assert!(matches!(decompose_mask(&m, &x), Err(Error::IneffectiveNeuron { row: 1 })));
    }

    #[test]
    fn grouping_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_mat(5, 7, &mut rng);
        for _ in 0..50 {
            // three distinct nonzero rows, six hidden rows drawn from them
            let mut base: Vec<Vec<bool>> = Vec::new();
            while base.len() < 3 {
                let r: Vec<bool> = (0..5).map(|_| rng.random_bool(0.5)).collect();
                if r.iter().any(|&b| b) && !base.contains(&r) {
                    base.push(r);
                }
            }
            let picks: Vec<usize> = (0..6).map(|i| if i < 3 { i } else { rng.random_range(0..3) }).collect();
            let m = Mask::from_fn(6, 5, |i, j| base[picks[i]][j]);
            let d = decompose_mask(&m, &x).unwrap();
            let mut oracle: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
            for i in 0..6 {
                oracle.entry(m.row(i).iter().copied().collect()).or_default().push(i);
            }
            assert_eq!(d.len(), oracle.len());
            for (p, g) in d.patterns.iter().zip(&d.groups) {
                assert_eq!(&oracle[p], g);
            }
            let firsts: Vec<usize> = d.groups.iter().map(|g| g[0]).collect();
            assert!(firsts.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn split_assemble_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = rand_mask(6, 4, 0.6, &mut rng).map(|b| b);
        let m = Mask::from_fn(6, 4, |i, j| m[(i, j)] || j == i % 4);
        let x = rand_mat(4, 3, &mut rng);
        let d = decompose_mask(&m, &x).unwrap();
        let w = SparseLayer::masked(rand_mat(6, 4, &mut rng), m).unwrap();
        let u = rand_mat(2, 6, &mut rng);
        let (us, ws) = d.split(&u, w.weights()).unwrap();
        let (u2, w2) = d.assemble(&us, &ws).unwrap();
        assert_eq!(u2, u);
        assert_eq!(&w2, w.weights());
    }

    #[test]
    fn linear_forward_is_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = rand_mat(4, 3, &mut rng);
        let u = rand_mat(2, 4, &mut rng);
        let x = rand_mat(3, 6, &mut rng);
        let net = SparseNet::two_layer(SparseLayer::dense(w.clone()), u.clone(), Activation::Linear).unwrap();
        let out = net.output(&x).unwrap();
        assert!((out - &u * &w * &x).amax() < 1e-14);
    }

    fn scalar_forward(net: &SparseNet, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.ncols();
        let mut a: Vec<Vec<f64>> = (0..x.nrows()).map(|i| (0..n).map(|c| x[(i, c)]).collect()).collect();
        let last = net.layers.len() - 1;
        for (k, l) in net.layers.iter().enumerate() {
            let mut next = vec![vec![0.0; n]; l.out_dim()];
            for (i, row) in next.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    let mut s = l.bias().map_or(0.0, |b| b[i]);
                    for j in 0..l.in_dim() {
                        s += l.weights()[(i, j)] * a[j][c];
                    }
                    *v = if k == last { s } else { net.activation.eval(s) };
                }
            }
            a = next;
        }
        DMatrix::from_fn(a.len(), n, |i, c| a[i][c])
    }

    #[test]
    fn relu_forward_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let net = random_net(&[4, 5, 3, 2], 0.7, Activation::Relu, &mut rng);
            let x = rand_mat(4, 7, &mut rng);
            let fast = net.output(&x).unwrap();
            assert!((fast - scalar_forward(&net, &x)).amax() < 1e-12);
        }
    }

    #[test]
    fn loss_matches_entrywise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = random_net(&[3, 4, 2], 0.8, Activation::Tanh, &mut rng);
        let x = rand_mat(3, 5, &mut rng);
        let y = rand_mat(2, 5, &mut rng);
        let out = scalar_forward(&net, &x);
        let mut s = 0.0;
        for i in 0..2 {
            for c in 0..5 {
                s += (out[(i, c)] - y[(i, c)]).powi(2);
            }
        }
        assert!((net.loss(&x, &y).unwrap() - s / 2.0).abs() < 1e-12);
        let zero = SparseNet::two_layer(SparseLayer::dense(DMatrix::zeros(4, 3)), DMatrix::zeros(2, 4), Activation::Tanh).unwrap();
        assert_eq!(zero.loss(&x, &DMatrix::zeros(2, 5)).unwrap(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let net = SparseNet::two_layer(SparseLayer::dense(DMatrix::zeros(4, 3)), DMatrix::zeros(2, 4), Activation::Tanh).unwrap();
        assert!(net.output(&DMatrix::zeros(2, 5)).is_err());
        assert!(net.loss(&DMatrix::zeros(3, 5), &DMatrix::zeros(3, 5)).is_err());
    }

    #[test]
    fn demo_net_reduction() {
        let net = useless_connection_demo_net(Activation::Tanh);
        assert!(effective_subnetwork(&net).is_err());
        let (reduced, report) = prune_useless(&net);
        let kept = |k: usize| -> BTreeSet<(usize, usize)> {
            let m = reduced.layers[k].mask();
            (0..m.nrows())
                .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                .filter(|&(i, j)| m[(i, j)])
                .collect()
        };
        assert_eq!(kept(0), [(1, 1), (1, 2), (2, 1), (2, 2)].into_iter().collect());
        assert_eq!(kept(1), [(1, 1), (1, 2)].into_iter().collect());
        assert_eq!(kept(2), [(0, 1), (1, 1)].into_iter().collect());
        let labels: Vec<String> = report.neutered.iter().map(|&n| node_label(n, 4)).collect();
        assert_eq!(labels, ["h1_1", "h1_4", "h2_1", "h2_3", "h2_4"]);
        assert_eq!(report.isolated_inputs, vec![0]);
        assert!(report.isolated_outputs.is_empty());
        assert_eq!(report.removed_edges.len(), 3 + 5 + 3);
    }

    #[test]
    fn dense_net_is_already_effective() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = random_net(&[3, 4, 4, 2], 1.0, Activation::Relu, &mut rng);
        let (reduced, report) = effective_subnetwork(&net).unwrap();
        assert!(report.is_empty());
        assert!(report.neutered.is_empty());
        assert_eq!(reduced, net);
        assert!(is_effective(&net));
    }

    #[test]
    fn bias_keeps_sourceless_neuron() {
        // h1_2 has no inputs but a live bias, so its edge to y1 survives
        let m1 = mask_from_rows(&[vec![1, 1], vec![0, 0]]);
        let w1 = SparseLayer::masked(DMatrix::from_element(2, 2, 0.5), m1)
            .unwrap()
            .with_bias(DVector::from_vec(vec![0.0, 0.7]), vec![false, true])
            .unwrap();
        let w2 = SparseLayer::dense(DMatrix::from_element(1, 2, 1.0));
        let net = SparseNet::new(vec![w1.clone(), w2.clone()], Activation::Tanh).unwrap();
        let (_, report) = effective_subnetwork(&net).unwrap();
        assert!(report.is_empty());

        let w1_nobias = SparseLayer::masked(DMatrix::from_element(2, 2, 0.5), mask_from_rows(&[vec![1, 1], vec![0, 0]])).unwrap();
        let net = SparseNet::new(vec![w1_nobias, w2], Activation::Tanh).unwrap();
        let (_, report) = effective_subnetwork(&net).unwrap();
        assert_eq!(report.removed_edges, vec![EdgeId { layer: 1, row: 0, col: 1 }]);
    }

    #[test]
    fn dead_end_bias_is_dropped() {
        let w1 = SparseLayer::dense(DMatrix::from_element(2, 2, 0.5))
            .with_bias(DVector::from_vec(vec![0.1, 0.2]), vec![true, true])
            .unwrap();
        let w2 = SparseLayer::masked(DMatrix::from_element(1, 2, 1.0), mask_from_rows(&[vec![1, 0]])).unwrap();
        let net = SparseNet::new(vec![w1, w2], Activation::Tanh).unwrap();
        let (reduced, report) = effective_subnetwork(&net).unwrap();
        assert_eq!(report.removed_biases, vec![NodeId { level: 1, index: 1 }]);
        assert_eq!(reduced.layers[0].bias().unwrap()[1], 0.0);
    }

    // every edge lying on some input→output path, found by exhaustive DFS
    fn path_edges(net: &SparseNet) -> Vec<BTreeSet<(usize, usize)>> {
        let n_layers = net.layers.len();
        let mut on_path: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); n_layers];
        fn dfs(net: &SparseNet, level: usize, node: usize, stack: &mut Vec<(usize, usize, usize)>, out: &mut Vec<BTreeSet<(usize, usize)>>) {
            if level == net.layers.len() {
                for &(k, i, j) in stack.iter() {
                    out[k].insert((i, j));
                }
                return;
            }
            let m = net.layers[level].mask();
            for i in 0..m.nrows() {
                if m[(i, node)] {
                    stack.push((level, i, node));
                    dfs(net, level + 1, i, stack, out);
                    stack.pop();
                }
            }
        }
        for j in 0..net.in_dim() {
            dfs(net, 0, j, &mut Vec::new(), &mut on_path);
        }
        on_path
    }

    fn edge_sets(net: &SparseNet) -> Vec<BTreeSet<(usize, usize)>> {
        net.layers
            .iter()
            .map(|l| {
                let m = l.mask();
                (0..m.nrows())
                    .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                    .filter(|&(i, j)| m[(i, j)])
                    .collect()
            })
            .collect()
    }

    #[test]
    fn reduction_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let widths: Vec<usize> = (0..5).map(|_| rng.random_range(1..=6)).collect();
            let keep = rng.random_range(0.2..0.8);
            let net = random_net(&widths, keep, Activation::Relu, &mut rng);
            let (reduced, _) = prune_useless(&net);
            assert_eq!(edge_sets(&reduced), path_edges(&net));
        }
    }

    #[test]
    fn demo_net_reduced_output_unchanged() {
        let net = useless_connection_demo_net(Activation::Tanh);
        let (reduced, _) = prune_useless(&net);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = rand_mat(3, 8, &mut rng);
        assert!((net.output(&x).unwrap() - reduced.output(&x).unwrap()).amax() <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reduction_is_idempotent(seed in any::<u64>(), keep in 0.2f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let widths: Vec<usize> = (0..4).map(|_| rng.random_range(1..=6)).collect();
            let net = random_net(&widths, keep, Activation::Tanh, &mut rng);
            let (once, _) = prune_useless(&net);
            let (twice, report) = prune_useless(&once);
            prop_assert_eq!(&once, &twice);
            prop_assert!(report.is_empty());
        }

        #[test]
        fn reduction_preserves_output(seed in any::<u64>(), keep in 0.2f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let widths: Vec<usize> = (0..4).map(|_| rng.random_range(1..=6)).collect();
            // biases on hidden layers to exercise the bias rule
            let mut net = random_net(&widths, keep, Activation::Tanh, &mut rng);
            for k in 0..net.layers.len() - 1 {
                let p = net.layers[k].out_dim();
                let bm: Vec<bool> = (0..p).map(|_| rng.random_bool(0.3)).collect();
                let b = DVector::from_fn(p, |i, _| if bm[i] { rng.random_range(-1.0..1.0) } else { 0.0 });
                net.layers[k] = net.layers[k].clone().with_bias(b, bm).unwrap();
            }
            let x = rand_mat(widths[0], 5, &mut rng);
            let (reduced, _) = prune_useless(&net);
            prop_assert!(reduced.respects_masks());
            let diff = (net.output(&x).unwrap() - reduced.output(&x).unwrap()).amax();
            prop_assert!(diff <= 1e-12, "diff {}", diff);
        }

        #[test]
        fn block_form_reproduces_linear_forward(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (d, p, n, dy) = (5, 6, 4, 3);
            let m = Mask::from_fn(p, d, |i, j| j == i % d || rng.random_bool(0.4));
            let w = SparseLayer::masked(rand_mat(p, d, &mut rng), m).unwrap();
            let u = rand_mat(dy, p, &mut rng);
            let x = rand_mat(d, n, &mut rng);
            let dec = decompose_patterns(&w, &x).unwrap();
            let (us, ws) = dec.split(&u, w.weights()).unwrap();
            let mut sum = DMatrix::zeros(dy, n);
            for i in 0..dec.len() {
                sum += &us[i] * &ws[i] * &dec.slices[i];
            }
            let net = SparseNet::two_layer(w, u, Activation::Linear).unwrap();
            prop_assert!((net.output(&x).unwrap() - sum).amax() <= 1e-12);
        }
    }
}
