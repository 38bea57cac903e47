//! Derivatives of the squared loss: closed forms for two-layer linear
//! networks in block form, backpropagation and central differences for
//! general masked networks, and a numeric classifier for stationary points.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::sym_eig;
use crate::net::{Forward, SparseNet};

/// Central-difference step for gradients.
pub const FD_GRAD_STEP: f64 = 1e-5;
/// Central-difference step for Hessians.
pub const FD_HESS_STEP: f64 = 1e-4;

/// `½‖Σ_i U_i W_i Z_i − Y‖²_F` with per-group blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerLinearInstance {
    /// `d_y × p_i`.
    pub us: Vec<DMatrix<f64>>,
    /// `p_i × d_i`.
    pub ws: Vec<DMatrix<f64>>,
    /// `d_i × n`.
    pub zs: Vec<DMatrix<f64>>,
    /// `d_y × n`.
    pub y: DMatrix<f64>,
}

/// Gradient blocks for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupGrad {
    pub du: DMatrix<f64>,
    pub dw: DMatrix<f64>,
}

impl TwoLayerLinearInstance {
    pub fn new(
        us: Vec<DMatrix<f64>>,
        ws: Vec<DMatrix<f64>>,
        zs: Vec<DMatrix<f64>>,
        y: DMatrix<f64>,
    ) -> Result<Self> {
        let inst = TwoLayerLinearInstance { us, ws, zs, y };
        inst.validate()?;
        Ok(inst)
    }

    /// Rank-one groups from vectors: `u_i ∈ R^{d_y}`, `w_i ∈ R^{d_i}`.
    pub fn rank_one(
        us: &[DVector<f64>],
        ws: &[DVector<f64>],
        zs: Vec<DMatrix<f64>>,
        y: DMatrix<f64>,
    ) -> Result<Self> {
        let us = us.iter().map(|u| DMatrix::from_column_slice(u.len(), 1, u.as_slice())).collect();
        let ws = ws.iter().map(|w| DMatrix::from_row_slice(1, w.len(), w.as_slice())).collect();
        TwoLayerLinearInstance::new(us, ws, zs, y)
    }

    fn validate(&self) -> Result<()> {
        let s = self.zs.len();
        if self.us.len() != s || self.ws.len() != s {
            return Err(shape_err(
                "TwoLayerLinearInstance",
                format!("{s} groups"),
                format!("{} U blocks, {} W blocks", self.us.len(), self.ws.len()),
            ));
        }
        let (dy, n) = self.y.shape();
        for i in 0..s {
            let (u, w, z) = (&self.us[i], &self.ws[i], &self.zs[i]);
            if u.nrows() != dy || u.ncols() != w.nrows() || w.ncols() != z.nrows() || z.ncols() != n {
                return Err(shape_err(
                    "TwoLayerLinearInstance",
                    format!("U_{i} {dy}×p, W_{i} p×d, Z_{i} d×{n}"),
                    format!("{:?}, {:?}, {:?}", u.shape(), w.shape(), z.shape()),
                ));
            }
        }
        Ok(())
    }

    pub fn groups(&self) -> usize {
        self.zs.len()
    }

    pub fn prediction(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.y.nrows(), self.y.ncols());
        for i in 0..self.groups() {
            out += &self.us[i] * (&self.ws[i] * &self.zs[i]);
        }
        out
    }

    /// `R = Σ U_i W_i Z_i − Y`.
    pub fn residual(&self) -> DMatrix<f64> {
        self.prediction() - &self.y
    }

    pub fn loss(&self) -> f64 {
        0.5 * self.residual().norm_squared()
    }

    /// Parameter count: `Σ (d_y p_i + p_i d_i)`.
    pub fn dim(&self) -> usize {
        self.us.iter().zip(&self.ws).map(|(u, w)| u.len() + w.len()).sum()
    }

    /// Flattens as `(U_1, W_1, U_2, W_2, ...)`, each block column-major.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (u, w) in self.us.iter().zip(&self.ws) {
            out.extend_from_slice(u.as_slice());
            out.extend_from_slice(w.as_slice());
        }
        out
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(shape_err("set_params", self.dim().to_string(), theta.len().to_string()));
        }
        let mut k = 0;
        for (u, w) in self.us.iter_mut().zip(self.ws.iter_mut()) {
            let a = u.len();
            u.as_mut_slice().copy_from_slice(&theta[k..k + a]);
            k += a;
            let b = w.len();
            w.as_mut_slice().copy_from_slice(&theta[k..k + b]);
            k += b;
        }
        Ok(())
    }

    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_params(theta)?;
        Ok(out)
    }

    /// Whether every group is a single hidden neuron (`p_i = 1`).
    pub fn is_rank_one(&self) -> bool {
        self.ws.iter().all(|w| w.nrows() == 1)
    }
}

/// `∇_{U_i} = R (W_i Z_i)ᵀ`, `∇_{W_i} = U_iᵀ R Z_iᵀ`.
pub fn grad_two_layer_linear(inst: &TwoLayerLinearInstance) -> Result<Vec<GroupGrad>> {
    inst.validate()?;
    let r = inst.residual();
    Ok((0..inst.groups())
        .map(|i| {
            let wz = &inst.ws[i] * &inst.zs[i];
            GroupGrad {
                du: &r * wz.transpose(),
                dw: inst.us[i].transpose() * &r * inst.zs[i].transpose(),
            }
        })
        .collect())
}

/// Gradient flattened in [`TwoLayerLinearInstance::params`] order.
pub fn flat_grad(grads: &[GroupGrad]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(g.du.as_slice());
        out.extend_from_slice(g.dw.as_slice());
    }
    out
}

/// Exact Hessian for instances whose groups are all rank one, in
/// `(u_1, w_1, u_2, w_2, ...)` order. Other shapes are rejected; use
/// [`hessian_fd`] for those.
pub fn hessian_two_layer_linear(inst: &TwoLayerLinearInstance) -> Result<DMatrix<f64>> {
    inst.validate()?;
    if !inst.is_rank_one() {
        return Err(Error::Unsupported(
            "closed-form Hessian needs one hidden neuron per group; use hessian_fd".into(),
        ));
    }
    let s = inst.groups();
    let dy = inst.y.nrows();
    let r = inst.residual();
    let u: Vec<DVector<f64>> = inst.us.iter().map(|m| m.column(0).into_owned()).collect();
    let w: Vec<DVector<f64>> = inst.ws.iter().map(|m| m.row(0).transpose()).collect();
    let a: Vec<DVector<f64>> = (0..s).map(|i| inst.zs[i].transpose() * &w[i]).collect();
    let mut offs = Vec::with_capacity(s);
    let mut total = 0;
    for i in 0..s {
        offs.push((total, total + dy));
        total += dy + w[i].len();
    }
    let mut h = DMatrix::zeros(total, total);
    for i in 0..s {
        let (ui, wi) = offs[i];
        let di = w[i].len();
        for j in 0..s {
            let (uj, wj) = offs[j];
            let dj = w[j].len();
            let zz = &inst.zs[i] * inst.zs[j].transpose();
            // [u_i, u_j]
            let uu = DMatrix::identity(dy, dy) * a[j].dot(&a[i]);
            h.view_mut((ui, uj), (dy, dy)).copy_from(&uu);
            // [u_i, w_j]
            let uw = if i == j {
                &r * inst.zs[i].transpose() + &u[i] * (w[i].transpose() * &zz)
            } else {
                &u[j] * (w[i].transpose() * &zz)
            };
            h.view_mut((ui, wj), (dy, dj)).copy_from(&uw);
            h.view_mut((wj, ui), (dj, dy)).copy_from(&uw.transpose());
            // [w_i, w_j]
            let ww = zz * u[j].dot(&u[i]);
            h.view_mut((wi, wj), (di, dj)).copy_from(&ww);
        }
    }
    Ok(h)
}

/// Central-difference gradient of `f` at `x`.
pub fn grad_fd_fn(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let fp = f(&p);
            p[i] = x[i] - h;
            let fm = f(&p);
            p[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian of `f` at `x`, symmetrized.
pub fn hessian_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut p = x.to_vec();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut eval = |si: f64, sj: f64| {
                p[i] += si * h;
                p[j] += sj * h;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// A scalar function of a flat parameter vector. Derivatives default to
/// central differences.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        grad_fd_fn(|p| self.value(p), x, FD_GRAD_STEP)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        hessian_fd(|p| self.value(p), x, FD_HESS_STEP)
    }
}

/// Wraps a closure as an [`Objective`] with finite-difference derivatives.
pub struct FnObjective<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

impl Objective for TwoLayerLinearInstance {
    fn dim(&self) -> usize {
        TwoLayerLinearInstance::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.with_params(x).map_or(f64::NAN, |i| i.loss())
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let inst = self.with_params(x).expect("parameter length");
        flat_grad(&grad_two_layer_linear(&inst).expect("validated"))
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let inst = self.with_params(x).expect("parameter length");
        hessian_two_layer_linear(&inst)
            .unwrap_or_else(|_| hessian_fd(|p| self.value(p), x, FD_HESS_STEP))
    }
}

/// Per-layer gradient of a [`SparseNet`] loss; masked positions are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrad {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<Option<DVector<f64>>>,
}

impl NetGrad {
    pub fn norm_squared(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_squared()).sum::<f64>()
            + self.biases.iter().flatten().map(|b| b.norm_squared()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            *w *= c;
        }
        for b in self.biases.iter_mut().flatten() {
            *b *= c;
        }
    }
}

/// Trainable entries of `net` in layer order: unmasked weights
/// (column-major) followed by the unmasked bias entries of the same layer.
pub fn net_params(net: &SparseNet) -> Vec<f64> {
    let mut out = Vec::new();
    for l in &net.layers {
        for (w, &m) in l.weights().iter().zip(l.mask().iter()) {
            if m {
                out.push(*w);
            }
        }
        if let (Some(b), Some(bm)) = (l.bias(), l.bias_mask()) {
            out.extend(b.iter().zip(bm).filter(|(_, &m)| m).map(|(x, _)| *x));
        }
    }
    out
}

/// Inverse of [`net_params`].
pub fn set_net_params(net: &mut SparseNet, theta: &[f64]) -> Result<()> {
    if theta.len() != net.nnz() {
        return Err(shape_err("set_net_params", net.nnz().to_string(), theta.len().to_string()));
    }
    let mut k = 0;
    for l in &mut net.layers {
        let mut w = l.weights().clone();
        for (x, &m) in w.iter_mut().zip(l.mask().iter()) {
            if m {
                *x = theta[k];
                k += 1;
            }
        }
        l.set_weights(w)?;
        if let (Some(b), Some(bm)) = (l.bias(), l.bias_mask()) {
            let mut b = b.clone();
            for (x, &m) in b.iter_mut().zip(bm) {
                if m {
                    *x = theta[k];
                    k += 1;
                }
            }
            l.set_bias(b)?;
        }
    }
    Ok(())
}

fn unflatten_grad(net: &SparseNet, g: &[f64]) -> NetGrad {
    let mut k = 0;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in &net.layers {
        let mut w = DMatrix::zeros(l.out_dim(), l.in_dim());
        for (x, &m) in w.iter_mut().zip(l.mask().iter()) {
            if m {
                *x = g[k];
                k += 1;
            }
        }
        weights.push(w);
        biases.push(l.bias_mask().map(|bm| {
            DVector::from_iterator(
                bm.len(),
                bm.iter().map(|&m| {
                    if m {
                        k += 1;
                        g[k - 1]
                    } else {
                        0.0
                    }
                }),
            )
        }));
    }
    NetGrad { weights, biases }
}

/// `½‖f(X) − Y‖²` as an [`Objective`] over the trainable entries of `net`.
pub struct NetObjective<'a> {
    pub net: &'a SparseNet,
    pub x: &'a DMatrix<f64>,
    pub y: &'a DMatrix<f64>,
}

impl Objective for NetObjective<'_> {
    fn dim(&self) -> usize {
        self.net.nnz()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut net = self.net.clone();
        if set_net_params(&mut net, theta).is_err() {
            return f64::NAN;
        }
        net.loss(self.x, self.y).unwrap_or(f64::NAN)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut net = self.net.clone();
        set_net_params(&mut net, theta).expect("parameter length");
        let g = backprop(&net, self.x, self.y).expect("shapes checked by caller");
        let mut out = Vec::with_capacity(theta.len());
        for (l, (w, b)) in net.layers.iter().zip(g.weights.iter().zip(&g.biases)) {
            out.extend(w.iter().zip(l.mask().iter()).filter(|(_, &m)| m).map(|(x, _)| *x));
            if let (Some(b), Some(bm)) = (b, l.bias_mask()) {
                out.extend(b.iter().zip(bm).filter(|(_, &m)| m).map(|(x, _)| *x));
            }
        }
        out
    }
}

/// Central-difference gradient of `½‖f(X) − Y‖²` over every unmasked
/// weight and bias; masked coordinates report 0.
pub fn grad_fd(net: &SparseNet, x: &DMatrix<f64>, y: &DMatrix<f64>, h: f64) -> Result<NetGrad> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    net.loss(x, y)?;
    let obj = NetObjective { net, x, y };
    let theta = net_params(net);
    let g = grad_fd_fn(|p| obj.value(p), &theta, h);
    Ok(unflatten_grad(net, &g))
}

/// Exact gradient of `½‖f(X) − Y‖²` by backpropagation, masked.
pub fn backprop(net: &SparseNet, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<NetGrad> {
    Ok(forward_backward(net, x, y)?.1)
}

/// Forward pass together with the masked gradient.
pub fn forward_backward(net: &SparseNet, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(Forward, NetGrad)> {
    let fwd = net.forward(x)?;
    if fwd.output.shape() != y.shape() {
        return Err(shape_err(
            "backprop",
            format!("{:?}", fwd.output.shape()),
            format!("{:?}", y.shape()),
        ));
    }
    let n_layers = net.layers.len();
    let mut weights = vec![DMatrix::zeros(0, 0); n_layers];
    let mut biases = vec![None; n_layers];
    let mut delta = &fwd.output - y;
    for k in (0..n_layers).rev() {
        let layer = &net.layers[k];
        let input = if k == 0 { x } else { &fwd.hidden[k - 1] };
        let mut gw = &delta * input.transpose();
        gw.zip_apply(layer.mask(), |g, m| {
            if !m {
                *g = 0.0
            }
        });
        weights[k] = gw;
        biases[k] = layer.bias_mask().map(|bm| {
            DVector::from_iterator(
                bm.len(),
                bm.iter().enumerate().map(|(i, &m)| if m { delta.row(i).sum() } else { 0.0 }),
            )
        });
        if k > 0 {
            let mut back = layer.weights().transpose() * &delta;
            back.zip_apply(&fwd.pre[k - 1], |b, z| *b *= net.activation.derivative(z));
            delta = back;
        }
    }
    Ok((fwd, NetGrad { weights, biases }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinProbe {
    StrictLocalMin,
    LocalMinNonstrict,
    Saddle,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Eigenvalues with `|λ| < null_tol · max|λ|` count as zero.
    pub null_tol: f64,
    pub probe_radius: f64,
    pub n_probes: usize,
    pub seed: u64,
    /// Gradient norm above which the point is not treated as stationary.
    pub grad_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            null_tol: 1e-6,
            probe_radius: 1e-2,
            n_probes: 500,
            seed: 0,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub grad_norm: f64,
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal basis of the numerical Hessian kernel.
    pub null_basis: Vec<Vec<f64>>,
    pub min_probe: MinProbe,
    /// Smallest `L(θ + r d) − L(θ)` seen over all probes.
    pub probe_evidence: f64,
    pub probes_evaluated: usize,
}

/// Decrease tolerated before a probe counts as a descent direction.
pub const PROBE_FLOOR: f64 = -1e-12;

/// Classifies a candidate stationary point from its gradient, its Hessian
/// spectrum and direct loss probes.
///
/// Probes are random unit directions at radii `r` and `r/10`, plus random
/// unit directions drawn inside the numerical kernel of the Hessian, where
/// second-order information says nothing. The verdict is strict only when
/// every probe increases the loss.
pub fn classify_stationary(obj: &dyn Objective, point: &[f64], opts: &ProbeOptions) -> Result<StationaryReport> {
    if point.len() != obj.dim() {
        return Err(shape_err("classify_stationary", obj.dim().to_string(), point.len().to_string()));
    }
    let n = point.len();
    let g = obj.gradient(point);
    let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = obj.hessian(point);
    let eig = sym_eig(&((&h + h.transpose()) * 0.5))?;
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = opts.null_tol * scale;
    let null_idx: Vec<usize> = (0..n).filter(|&k| eig.values[k].abs() <= cutoff).collect();
    let null_basis: Vec<Vec<f64>> = null_idx.iter().map(|&k| eig.vector(k).as_slice().to_vec()).collect();

    let base = obj.value(point);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    let radii = [opts.probe_radius, opts.probe_radius / 10.0];
    let mut probe = |d: &DVector<f64>, worst: &mut f64| {
        for r in radii {
            let p: Vec<f64> = point.iter().zip(d.iter()).map(|(x, di)| x + r * di).collect();
            let delta = obj.value(&p) - base;
            *worst = worst.min(if delta.is_nan() { f64::NEG_INFINITY } else { delta });
            count += 1;
        }
    };
    for _ in 0..opts.n_probes {
        let d = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let d = d.normalize();
        probe(&d, &mut worst);
    }
    if !null_basis.is_empty() {
        for v in &null_basis {
            let v = DVector::from_column_slice(v);
            probe(&v, &mut worst);
            probe(&(-v), &mut worst);
        }
        for _ in 0..opts.n_probes {
            let mut d = DVector::zeros(n);
            for &k in &null_idx {
                let c: f64 = StandardNormal.sample(&mut rng);
                d += eig.vector(k) * c;
            }
            probe(&d.normalize(), &mut worst);
        }
    }
    if n == 0 {
        worst = 0.0;
    }

    let min_eig = eig.values.first().copied().unwrap_or(0.0);
    let min_probe = if grad_norm > opts.grad_tol {
        MinProbe::Inconclusive
    } else if min_eig < -cutoff {
        MinProbe::Saddle
    } else if worst > 0.0 {
        MinProbe::StrictLocalMin
    } else if worst >= PROBE_FLOOR {
        MinProbe::LocalMinNonstrict
    } else {
        MinProbe::Inconclusive
    };
    Ok(StationaryReport {
        grad_norm,
        eigenvalues: eig.values,
        null_basis,
        min_probe,
        probe_evidence: worst,
        probes_evaluated: count,
    })
}
