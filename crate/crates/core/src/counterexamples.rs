//! Explicit instances with bad landscapes, and their verifiers:
//!
//! * a two-group sparse-dense linear network with a strict local minimum
//!   that is not global,
//! * a sparse-sparse three-output network with a spurious valley for any
//!   activation vanishing at 0,
//! * a single-channel SAME-mode linear CNN with a spurious valley.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::calculus::{
    classify_stationary, grad_two_layer_linear, flat_grad, hessian_two_layer_linear, MinProbe,
    ProbeOptions, StationaryReport, TwoLayerLinearInstance,
};
use crate::conv::{conv_matrix, ConvMode, ConvSpec};
use crate::error::{Error, Result};
use crate::linalg::from_rows;
use crate::net::{mask_from_rows, SparseLayer, SparseNet};

/// `(u₁, w₁, u₂, w₂)` at the strict minimum.
pub const SD_THETA: [f64; 8] = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 2.0];
/// A point with lower loss.
pub const SD_THETA_BETTER: [f64; 8] = [0.25, 1.0, 0.65, 2.2, 0.8, 1.0, 2.2, 2.9];
/// Loss at [`SD_THETA`].
pub const SD_LOSS: f64 = 221.0 / 360.0;
/// Upper bound on the loss at [`SD_THETA_BETTER`].
pub const SD_BETTER_BOUND: f64 = 0.572;
pub const SD_RESIDUAL_Z1: [[f64; 2]; 2] = [[-0.4, 0.4], [0.4, -0.4]];
pub const SD_RESIDUAL_Z2: [[f64; 2]; 2] = [[-0.8, 0.4], [0.4, -0.2]];
/// Hessian spectrum at [`SD_THETA`], four decimals.
pub const SD_EIGENVALUES: [f64; 8] = [0.0, 0.0, 0.0997, 1.2886, 1.8647, 5.2568, 7.1369, 12.3533];
pub const SD_HESSIAN: [[f64; 8]; 8] = [
    [2.0, 0.0, 0.6, 1.4, 2.2, 0.0, 0.6, 0.8],
    [0.0, 2.0, 1.4, 0.6, 0.0, 2.2, 1.2, 1.6],
    [0.6, 1.4, 2.0, 0.0, 0.6, 0.6, 1.8, 0.0],
    [1.4, 0.6, 0.0, 2.0, 1.6, 1.6, 0.0, 2.4],
    [2.2, 0.0, 0.6, 1.6, 5.0, 0.0, 0.2, 2.4],
    [0.0, 2.2, 0.6, 1.6, 0.0, 5.0, 2.4, 3.8],
    [0.6, 1.2, 1.8, 0.0, 0.2, 2.4, 5.0, 0.0],
    [0.8, 1.6, 0.0, 2.4, 2.4, 3.8, 0.0, 5.0],
];

const SD_IDENTITY_TOL: f64 = 1e-12;

fn mat2(rows: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
}

/// Two disjoint filters over four inputs, one hidden neuron each, two
/// outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SdMinimumInstance {
    pub z1: DMatrix<f64>,
    pub z2: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    /// `A₁Z₁ + A₂Z₂`.
    pub y: DMatrix<f64>,
    pub theta: Vec<f64>,
    pub theta_better: Vec<f64>,
}

impl SdMinimumInstance {
    /// Block-form objective with parameters set to `theta`.
    pub fn instance_at(&self, theta: &[f64]) -> Result<TwoLayerLinearInstance> {
        if theta.len() != 8 {
            return Err(crate::error::shape_err("SdMinimumInstance", "8 parameters", theta.len().to_string()));
        }
        let v = |k: usize| DVector::from_column_slice(&theta[k..k + 2]);
        TwoLayerLinearInstance::rank_one(
            &[v(0), v(4)],
            &[v(2), v(6)],
            vec![self.z1.clone(), self.z2.clone()],
            self.y.clone(),
        )
    }

    pub fn instance(&self) -> TwoLayerLinearInstance {
        self.instance_at(&self.theta).expect("eight parameters")
    }

    pub fn loss_at(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.instance_at(theta)?.loss())
    }

    /// `(R Z₁ᵀ, R Z₂ᵀ)` at `theta`.
    pub fn residual_products(&self, theta: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let r = self.instance_at(theta)?.residual();
        Ok((&r * self.z1.transpose(), &r * self.z2.transpose()))
    }

    /// Data matrix `X` stacking `Z₁` over `Z₂`.
    pub fn x(&self) -> DMatrix<f64> {
        crate::linalg::vstack(&[self.z1.clone(), self.z2.clone()])
    }

    /// The same objective as a masked network `U W X` with the two disjoint
    /// filters.
    pub fn network_at(&self, theta: &[f64]) -> Result<SparseNet> {
        let w = DMatrix::from_row_slice(2, 4, &[theta[2], theta[3], 0.0, 0.0, 0.0, 0.0, theta[6], theta[7]]);
        let u = DMatrix::from_row_slice(2, 2, &[theta[0], theta[4], theta[1], theta[5]]);
        let layer = SparseLayer::new(w, crate::net::non_overlapping_two_filter_mask())?;
        SparseNet::two_layer(layer, u, Activation::Linear)
    }
}

/// Builds the instance and checks it against every reference identity.
pub fn build_sd_minimum() -> Result<SdMinimumInstance> {
    let (a, b, c, d) = (0.9f64.sqrt(), 0.1f64.sqrt(), 0.8f64.sqrt(), 0.2f64.sqrt());
    let z1 = DMatrix::from_row_slice(2, 4, &[a, 0.0, b, 0.0, 0.0, c, 0.0, d]);
    let z2 = DMatrix::from_row_slice(2, 4, &[b, 0.0, a, 0.0, 0.0, d, 0.0, c]);
    let a1 = mat2([[7.0 / 8.0, 7.0 / 9.0], [3.0 / 4.0, 5.0 / 3.0]]);
    let a2 = mat2([[15.0 / 8.0, 16.0 / 9.0], [7.0 / 4.0, 11.0 / 3.0]]);
    let y = &a1 * &z1 + &a2 * &z2;
    let inst = SdMinimumInstance {
        z1,
        z2,
        a1,
        a2,
        y,
        theta: SD_THETA.to_vec(),
        theta_better: SD_THETA_BETTER.to_vec(),
    };
    validate_sd(&inst)?;
    Ok(inst)
}

fn validate_sd(inst: &SdMinimumInstance) -> Result<()> {
    let mut problems = Vec::new();
    let eye = DMatrix::<f64>::identity(2, 2);
    let checks = [
        ("Z1 Z1ᵀ", &inst.z1 * inst.z1.transpose(), eye.clone()),
        ("Z2 Z2ᵀ", &inst.z2 * inst.z2.transpose(), eye),
        ("Z1 Z2ᵀ", &inst.z1 * inst.z2.transpose(), mat2([[0.6, 0.0], [0.0, 0.8]])),
    ];
    let (rz1, rz2) = inst.residual_products(&inst.theta)?;
    let checks = checks.into_iter().chain([
        ("R Z1ᵀ", rz1, mat2(SD_RESIDUAL_Z1)),
        ("R Z2ᵀ", rz2, mat2(SD_RESIDUAL_Z2)),
    ]);
    for (name, got, want) in checks {
        let err = (&got - &want).amax();
        if err > SD_IDENTITY_TOL {
            problems.push(format!("{name} off by {err:e}: {got}"));
        }
    }
    let loss = inst.loss_at(&inst.theta)?;
    if (loss - SD_LOSS).abs() > SD_IDENTITY_TOL {
        problems.push(format!("loss {loss} differs from 221/360"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Construction(problems.join("; ")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdVerification {
    pub report: StationaryReport,
    pub loss: f64,
    pub better_loss: f64,
    pub hessian_max_error: f64,
    pub grad_zero: bool,
    pub hessian_psd: bool,
    pub hessian_matches: bool,
    pub eigs_match: bool,
    pub strict_probe_pass: bool,
    pub better_point_exists: bool,
}

impl SdVerification {
    pub fn all_pass(&self) -> bool {
        self.grad_zero
            && self.hessian_psd
            && self.hessian_matches
            && self.eigs_match
            && self.strict_probe_pass
            && self.better_point_exists
    }
}

/// Runs the derivative, spectrum and probe checks at `inst.theta`.
pub fn verify_sd_minimum(inst: &SdMinimumInstance, opts: &ProbeOptions) -> Result<SdVerification> {
    let obj = inst.instance();
    let grad_norm = flat_grad(&grad_two_layer_linear(&obj)?)
        .iter()
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    let h = hessian_two_layer_linear(&obj)?;
    let reference = DMatrix::from_fn(8, 8, |i, j| SD_HESSIAN[i][j]);
    let hessian_max_error = (&h - reference).amax();
    let report = classify_stationary(&obj, &inst.theta, opts)?;
    let top = report.eigenvalues.last().copied().unwrap_or(0.0);
    let eigs_match = report.eigenvalues.len() == 8
        && report
            .eigenvalues
            .iter()
            .zip(SD_EIGENVALUES)
            .all(|(a, b)| (a - b).abs() <= 1e-3);
    let loss = obj.loss();
    let better_loss = inst.loss_at(&inst.theta_better)?;
    Ok(SdVerification {
        grad_zero: grad_norm < 1e-10,
        hessian_psd: report.eigenvalues[0] >= -opts.null_tol * top,
        hessian_matches: hessian_max_error < 1e-12,
        eigs_match,
        strict_probe_pass: report.min_probe == MinProbe::StrictLocalMin,
        better_point_exists: better_loss < loss,
        report,
        loss,
        better_loss,
        hessian_max_error,
    })
}

/// Sparse-sparse network `U σ(W X)` with `X = I₃` and masks
/// `U: [[1,0],[1,1],[0,1]]`, `W: [[1,1,0],[0,1,1]]`. Parameters are
/// `(w₁, ..., w₈)` = `(U₁₁, U₂₁, U₂₂, U₃₂, W₁₁, W₁₂, W₂₂, W₂₃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsValleyInstance {
    pub y_vals: [f64; 4],
    pub activation: Activation,
    /// `[[y₁, y₁, 0], [y₂, y₂+y₃, 0], [0, 0, y₄]]`.
    pub target: Vec<Vec<f64>>,
    pub constraints: SsConstraints,
    /// Scale `a` (with `b = a`) used by the reference points.
    pub scale: f64,
    pub valley_point: [f64; 8],
    pub escape_point: [f64; 8],
}

/// The strict inequalities the valley argument relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsConstraints {
    /// `y₃ > 4 y₄`
    pub y3_gt_4y4: bool,
    /// `y₄ > y₁`
    pub y4_gt_y1: bool,
    /// `y₁ > 0`
    pub y1_positive: bool,
    /// `y₂ > 0`
    pub y2_positive: bool,
}

impl SsConstraints {
    pub fn of(y: [f64; 4]) -> Self {
        SsConstraints {
            y3_gt_4y4: y[2] > 4.0 * y[3],
            y4_gt_y1: y[3] > y[0],
            y1_positive: y[0] > 0.0,
            y2_positive: y[1] > 0.0,
        }
    }

    pub fn all(&self) -> bool {
        self.y3_gt_4y4 && self.y4_gt_y1 && self.y1_positive && self.y2_positive
    }
}

/// `(y₁, y₂, y₃, y₄)` satisfying every constraint.
pub const SS_COMPLIANT_Y: [f64; 4] = [1.0, 2.0, 9.0, 2.0];
/// Values behind the target `[[1,1,0],[2,8,0],[0,0,2]]`; `y₃ = 6 < 8 = 4y₄`.
pub const SS_EXPERIMENT_Y: [f64; 4] = [1.0, 2.0, 6.0, 2.0];

pub fn ss_target(y: [f64; 4]) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[y[0], y[0], 0.0, y[1], y[1] + y[2], 0.0, 0.0, 0.0, y[3]])
}

/// Reads `(y₁, y₂, y₃, y₄)` back from a target of the expected pattern.
pub fn ss_y_from_target(t: &DMatrix<f64>) -> Result<[f64; 4]> {
    if t.shape() != (3, 3) {
        return Err(crate::error::shape_err("ss_y_from_target", "3×3", format!("{:?}", t.shape())));
    }
    let y = [t[(0, 0)], t[(1, 0)], t[(1, 1)] - t[(1, 0)], t[(2, 2)]];
    if ss_target(y) != *t {
        return Err(Error::InvalidArgument(format!("target does not follow the valley pattern: {t}")));
    }
    Ok(y)
}

pub fn ss_masks() -> (crate::net::Mask, crate::net::Mask) {
    (
        mask_from_rows(&[vec![1, 1, 0], vec![0, 1, 1]]),
        mask_from_rows(&[vec![1, 0], vec![1, 1], vec![0, 1]]),
    )
}

/// The network at parameters `(w₁, ..., w₈)`.
pub fn ss_network(params: &[f64; 8], activation: Activation) -> SparseNet {
    let (mw, mu) = ss_masks();
    let w = DMatrix::from_row_slice(2, 3, &[params[4], params[5], 0.0, 0.0, params[6], params[7]]);
    let u = DMatrix::from_row_slice(3, 2, &[params[0], 0.0, params[1], params[2], 0.0, params[3]]);
    SparseNet::new(
        vec![
            SparseLayer::new(w, mw).expect("pattern respects mask"),
            SparseLayer::new(u, mu).expect("pattern respects mask"),
        ],
        activation,
    )
    .expect("2-3-2-3 chain")
}

/// Inverse of [`ss_network`].
pub fn ss_params(net: &SparseNet) -> [f64; 8] {
    let w = net.layers[0].weights();
    let u = net.layers[1].weights();
    [u[(0, 0)], u[(1, 0)], u[(1, 1)], u[(2, 1)], w[(0, 0)], w[(0, 1)], w[(1, 1)], w[(1, 2)]]
}

/// Unhalved squared error `‖U σ(W) − Y‖²_F`, the scale on which the
/// valley sits at `y₄²`.
pub fn ss_sse(params: &[f64; 8], activation: &Activation, target: &DMatrix<f64>) -> f64 {
    let net = ss_network(params, activation.clone());
    let x = DMatrix::identity(3, 3);
    2.0 * net.loss(&x, target).expect("3×3 shapes")
}

const PREIMAGE_RANGE: f64 = 20.0;

// Solves σ(z) = t on [0, ±20] by bisection, given σ(0) = 0 and t between 0
// and σ(±20).
fn preimage(act: &Activation, t: f64) -> Option<f64> {
    if t == 0.0 {
        return Some(0.0);
    }
    let end = PREIMAGE_RANGE * t.signum();
    let g = |z: f64| act.eval(z) - t;
    let (mut lo, mut hi) = (0.0, end);
    if g(lo).signum() == g(hi).signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid).signum() == g(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Picks `a` with `1/a` inside the activation's range near the origin.
fn choose_scale(act: &Activation) -> Option<f64> {
    let up = act.eval(PREIMAGE_RANGE);
    if up > 0.0 {
        return Some(1.0 / (up / 2.0).min(1.0));
    }
    let down = act.eval(-PREIMAGE_RANGE);
    if down < 0.0 {
        return Some(1.0 / (down / 2.0).max(-1.0));
    }
    None
}

/// Builds the valley instance with a point inside the valley and a point
/// of lower loss outside it. Constraint violations are recorded in
/// `constraints`; only an activation without the needed preimages is an
/// error.
pub fn build_ss_valley(y: [f64; 4], activation: Activation) -> Result<SsValleyInstance> {
    if activation.eval(0.0) != 0.0 {
        return Err(Error::ConditionViolated(format!("{} does not vanish at 0", activation.name())));
    }
    let a = choose_scale(&activation).ok_or_else(|| {
        Error::Construction(format!("{} is zero on [-20, 20]", activation.name()))
    })?;
    let inv = |t: f64| {
        preimage(&activation, t).ok_or_else(|| {
            Error::Construction(format!("no preimage of {t} under {}", activation.name()))
        })
    };
    let s_a = inv(1.0 / a)?;
    let b = a;
    let valley_point = [y[0] * a, y[1] * a, y[2] * b, 0.0, s_a, s_a, inv(1.0 / b)?, 0.0];
    let escape_point = [
        y[0] * a,
        (y[1] + y[2]) * a,
        0.0,
        y[3] * a,
        inv(y[1] / ((y[1] + y[2]) * a))?,
        s_a,
        0.0,
        s_a,
    ];
    let target = ss_target(y);
    Ok(SsValleyInstance {
        y_vals: y,
        constraints: SsConstraints::of(y),
        target: crate::linalg::to_rows(&target),
        activation,
        scale: a,
        valley_point,
        escape_point,
    })
}

impl SsValleyInstance {
    pub fn target_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.target)
    }

    /// `y₄²`.
    pub fn valley_level(&self) -> f64 {
        self.y_vals[3] * self.y_vals[3]
    }

    /// `y₁² (y₃/(y₂+y₃))²`.
    pub fn escape_level(&self) -> f64 {
        let y = self.y_vals;
        (y[0] * y[2] / (y[1] + y[2])).powi(2)
    }

    pub fn sse(&self, params: &[f64; 8]) -> f64 {
        ss_sse(params, &self.activation, &self.target_matrix())
    }

    pub fn residual(&self, params: &[f64; 8]) -> DMatrix<f64> {
        let net = ss_network(params, self.activation.clone());
        net.output(&DMatrix::identity(3, 3)).expect("3×3") - self.target_matrix()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsProbeReport {
    pub n_perturb: usize,
    pub radius: f64,
    /// Probes whose loss fell below `y₄² − 1e−10`.
    pub falsifications: usize,
    /// Probes with `|δ₄| ≥ 1e−6` whose loss did not exceed `y₄²`.
    pub strictness_failures: usize,
    /// Smallest `L − y₄²` observed.
    pub min_excess: f64,
}

impl SsProbeReport {
    pub fn passed(&self) -> bool {
        self.falsifications == 0 && self.strictness_failures == 0
    }
}

/// Random perturbations of the valley point within the proof's bounds:
/// every coordinate moves by at most `radius`, `|δ₃| ≤ |w₃|/2`, and `δ₇` is
/// shrunk until `σ(w₇ + δ₇)` stays within half of `σ(w₇)`.
pub fn probe_ss_valley(inst: &SsValleyInstance, n_perturb: usize, radius: f64, seed: u64) -> SsProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = inst.valley_point;
    let level = inst.valley_level();
    let s7 = inst.activation.eval(base[6]);
    let mut report = SsProbeReport {
        n_perturb,
        radius,
        falsifications: 0,
        strictness_failures: 0,
        min_excess: f64::INFINITY,
    };
    for _ in 0..n_perturb {
        let mut delta = [0.0; 8];
        for d in delta.iter_mut() {
            *d = rng.random_range(-radius..=radius);
        }
        delta[2] = delta[2].clamp(-base[2].abs() / 2.0, base[2].abs() / 2.0);
        while (inst.activation.eval(base[6] + delta[6]) - s7).abs() > s7.abs() / 2.0 {
            delta[6] /= 2.0;
        }
        let p: [f64; 8] = std::array::from_fn(|i| base[i] + delta[i]);
        let excess = inst.sse(&p) - level;
        report.min_excess = report.min_excess.min(excess);
        if excess < -1e-10 {
            report.falsifications += 1;
        }
        if delta[3].abs() >= 1e-6 && excess <= 0.0 {
            report.strictness_failures += 1;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsVerification {
    pub instance: SsValleyInstance,
    pub valley_loss: f64,
    pub escape_loss: f64,
    pub rows_fit_exactly: bool,
    pub valley_at_level: bool,
    pub escape_matches: bool,
    pub escape_below_valley: bool,
    pub constraints_hold: bool,
    pub probe: SsProbeReport,
}

impl SsVerification {
    pub fn all_pass(&self) -> bool {
        self.rows_fit_exactly
            && self.valley_at_level
            && self.escape_matches
            && self.escape_below_valley
            && self.constraints_hold
            && self.probe.passed()
    }
}

pub fn verify_ss_valley(inst: &SsValleyInstance, n_perturb: usize, radius: f64, seed: u64) -> SsVerification {
    let r = inst.residual(&inst.valley_point);
    let rows_fit_exactly = r.rows(0, 2).amax() <= 1e-12;
    let valley_loss = inst.sse(&inst.valley_point);
    let escape_loss = inst.sse(&inst.escape_point);
    let level = inst.valley_level();
    let y1sq = inst.y_vals[0] * inst.y_vals[0];
    SsVerification {
        rows_fit_exactly,
        valley_at_level: (valley_loss - level).abs() <= 1e-12 * level.max(1.0),
        escape_matches: (escape_loss - inst.escape_level()).abs() <= 1e-10 * level.max(1.0),
        escape_below_valley: escape_loss < y1sq && y1sq < level,
        constraints_hold: inst.constraints.all(),
        probe: probe_ss_valley(inst, n_perturb, radius, seed),
        valley_loss,
        escape_loss,
        instance: inst.clone(),
    }
}

/// `½‖U f_S(w) − diag(1, 4)‖²` with a single length-2 kernel and `X = I₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnSameValley {
    pub target: DMatrix<f64>,
}

pub fn build_cnn_same_valley() -> CnnSameValley {
    CnnSameValley {
        target: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
    }
}

impl CnnSameValley {
    pub fn loss(&self, u: &DMatrix<f64>, w: [f64; 2]) -> f64 {
        let f = conv_matrix(&ConvSpec::new(w.to_vec(), 2, ConvMode::Same).expect("valid spec")).expect("valid spec");
        0.5 * (u * f - &self.target).norm_squared()
    }

    /// `w = (0, a)`, `U = [[0, 0], [4/a, 0]]`.
    pub fn valley_point(&self, a: f64) -> (DMatrix<f64>, [f64; 2]) {
        (DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 4.0 / a, 0.0]), [0.0, a])
    }

    /// `w = (1, 0)` makes `f_S(w) = I`, so `U = diag(1, 4)` fits exactly.
    pub fn global_witness(&self) -> (DMatrix<f64>, [f64; 2]) {
        (self.target.clone(), [1.0, 0.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnProbeReport {
    pub a: f64,
    pub n_perturb: usize,
    pub valley_loss: f64,
    pub min_loss: f64,
    pub falsifications: usize,
}

/// Perturbs the valley point at scale `a` with `|εᵢ|, |δᵢ| ≤ 0.1`,
/// `|ε₂| ≤ 0.25/a`, `|ε₃| ≤ 0.5/a` and `|δ₂| ≤ 0.1 a`.
pub fn probe_cnn_same_valley(v: &CnnSameValley, a: f64, n_perturb: usize, seed: u64) -> CnnProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u0, w0) = v.valley_point(a);
    let valley_loss = v.loss(&u0, w0);
    let bounds_u = [0.1, 0.1f64.min(0.25 / a), 0.1f64.min(0.5 / a), 0.1];
    let bounds_w = [0.1, 0.1f64.min(0.1 * a)];
    let mut min_loss = f64::INFINITY;
    let mut falsifications = 0;
    for _ in 0..n_perturb {
        let mut u = u0.clone();
        // row-major order ε₁..ε₄
        for (k, &bnd) in bounds_u.iter().enumerate() {
            u[(k / 2, k % 2)] += rng.random_range(-bnd..=bnd);
        }
        let w = [w0[0] + rng.random_range(-bounds_w[0]..=bounds_w[0]), w0[1] + rng.random_range(-bounds_w[1]..=bounds_w[1])];
        let l = v.loss(&u, w);
        min_loss = min_loss.min(l);
        if l < 0.5 - 1e-12 {
            falsifications += 1;
        }
    }
    CnnProbeReport {
        a,
        n_perturb,
        valley_loss,
        min_loss,
        falsifications,
    }
}
