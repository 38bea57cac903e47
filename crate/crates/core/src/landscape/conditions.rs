//! Sufficient-condition checks, rank certificates and data/activation
//! assumptions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::intrinsic_dim_bound;
use crate::activation::{Activation, MAX_TAYLOR_ORDER};
use crate::error::Result;
use crate::linalg::{numerical_rank, RANK_TOL};
use crate::net::{decompose_mask, Mask, SparseLayer, SparseNet};

/// Relative tolerance for `Z_i Z_jᵀ = 0`.
pub const ORTHOGONAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `p_i` per pattern group of the first layer.
    pub group_widths: Vec<usize>,
    /// `d_i` per pattern group.
    pub support_sizes: Vec<usize>,
    /// `p_i ≥ d_i` for every group.
    pub cond_overparam: bool,
    /// `Z_i Z_jᵀ = 0` for every pair of groups.
    pub cond_orthogonal: bool,
    /// `d_y = 1`.
    pub cond_scalar: bool,
    /// First hidden width `p ≥ n`.
    pub width_vs_n: bool,
    /// Every output neuron has at least `n` unmasked inputs.
    pub fanin_ok: bool,
    /// Upper bounds on the intrinsic dimension of each group, `None` when
    /// the activation is not a polynomial.
    pub intrinsic_dims: Vec<Option<usize>>,
    /// `p_i ≥` the bound, for every group with a bound.
    pub cond_intrinsic: bool,
}

impl ConditionReport {
    /// At least one of the three two-layer linear conditions holds.
    pub fn any_linear_condition(&self) -> bool {
        self.cond_overparam || self.cond_orthogonal || self.cond_scalar
    }
}

pub fn check_conditions(net: &SparseNet, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<ConditionReport> {
    let first = &net.layers[0];
    let decomp = decompose_mask(first.mask(), x)?;
    let widths = decomp.widths();
    let sizes = decomp.support_sizes();
    let cond_overparam = widths.iter().zip(&sizes).all(|(p, d)| p >= d);
    let mut cond_orthogonal = true;
    for i in 0..decomp.len() {
        for j in i + 1..decomp.len() {
            let (zi, zj) = (&decomp.slices[i], &decomp.slices[j]);
            if (zi * zj.transpose()).norm() > ORTHOGONAL_TOL * zi.norm() * zj.norm() {
                cond_orthogonal = false;
            }
        }
    }
    let n = x.ncols();
    let last = net.layers.last().expect("at least two layers");
    let fanin_ok = (0..last.out_dim()).all(|r| last.mask().row(r).iter().filter(|&&m| m).count() >= n);
    let intrinsic_dims: Vec<Option<usize>> = decomp
        .slices
        .iter()
        .map(|z| intrinsic_dim_bound(&net.activation, z))
        .collect();
    let cond_intrinsic = intrinsic_dims
        .iter()
        .zip(&widths)
        .all(|(b, &p)| b.is_none_or(|b| p >= b));
    Ok(ConditionReport {
        cond_overparam,
        cond_orthogonal,
        cond_scalar: y.nrows() == 1,
        width_vs_n: first.out_dim() >= n,
        fanin_ok,
        intrinsic_dims,
        cond_intrinsic,
        group_widths: widths,
        support_sizes: sizes,
    })
}

/// Numerical rank of every hidden-layer output on `x`.
pub fn hidden_rank_certificate(net: &SparseNet, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    Ok(net
        .forward(x)?
        .hidden
        .iter()
        .map(|h| numerical_rank(h, RANK_TOL))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `(coordinate, sample i, sample j)` with `|x_ik| = |x_jk|`.
    pub duplicate_magnitudes: Vec<(usize, usize, usize)>,
    /// `(coordinate, sample)` with `x_ik = 0`.
    pub zero_entries: Vec<(usize, usize)>,
    /// Mask rows with nothing switched on.
    pub empty_mask_rows: Vec<usize>,
}

impl AssumptionReport {
    pub fn data_ok(&self) -> bool {
        self.duplicate_magnitudes.is_empty() && self.zero_entries.is_empty()
    }

    pub fn ok(&self) -> bool {
        self.data_ok() && self.empty_mask_rows.is_empty()
    }
}

pub fn check_assumptions(x: &DMatrix<f64>, mask: &Mask) -> AssumptionReport {
    let mut duplicate_magnitudes = Vec::new();
    let mut zero_entries = Vec::new();
    for k in 0..x.nrows() {
        for i in 0..x.ncols() {
            if x[(k, i)] == 0.0 {
                zero_entries.push((k, i));
            }
            for j in i + 1..x.ncols() {
                if x[(k, i)].abs() == x[(k, j)].abs() {
                    duplicate_magnitudes.push((k, i, j));
                }
            }
        }
    }
    let empty_mask_rows = (0..mask.nrows())
        .filter(|&r| !mask.row(r).iter().any(|&m| m))
        .collect();
    AssumptionReport {
        duplicate_magnitudes,
        zero_entries,
        empty_mask_rows,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// Derivative orders `l_1 < ... < l_n` with `σ^{(l_i)}(0) ≠ 0`.
    pub orders: Vec<usize>,
}

/// Searches arithmetic progressions of derivative orders (step 1..=4,
/// start 0..=6, orders up to 64) on which every derivative at 0 is nonzero.
pub fn activation_admissible(act: &Activation, n: usize) -> Admissibility {
    let none = Admissibility {
        admissible: false,
        orders: Vec::new(),
    };
    let Some(c) = act.taylor_coefficients(MAX_TAYLOR_ORDER) else {
        return none;
    };
    for step in 1..=4 {
        for start in 0..=6 {
            let orders: Vec<usize> = (0..n).map(|i| start + i * step).collect();
            if orders.iter().all(|&l| l <= MAX_TAYLOR_ORDER && c[l] != 0.0) {
                return Admissibility {
                    admissible: true,
                    orders,
                };
            }
        }
    }
    none
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRankTrial {
    pub seed: u64,
    pub rank: usize,
    pub n: usize,
    pub assumptions_ok: bool,
    pub admissible: bool,
}

/// One draw of `σ(W̃X)` with `p = n` hidden neurons: Gaussian data and
/// weights, live biases, and a random mask keeping each weight with
/// probability `keep` (at least one per row).
pub fn full_rank_trial(act: &Activation, n: usize, d_x: usize, keep: f64, seed: u64) -> Result<FullRankTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(d_x, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut mask = DMatrix::from_fn(n, d_x, |_, _| rng.random_bool(keep));
    for r in 0..n {
        if !mask.row(r).iter().any(|&m| m) {
            let c = rng.random_range(0..d_x);
            mask[(r, c)] = true;
        }
    }
    let w = DMatrix::from_fn(n, d_x, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let layer = SparseLayer::masked(w, mask.clone())?.with_bias(b, vec![true; n])?;
    let net = SparseNet::two_layer(layer, DMatrix::zeros(1, n), act.clone())?;
    let rank = hidden_rank_certificate(&net, &x)?[0];
    Ok(FullRankTrial {
        seed,
        rank,
        n,
        assumptions_ok: check_assumptions(&x, &mask).ok(),
        admissible: activation_admissible(act, n).admissible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexamples::build_sd_minimum;
    use crate::net::{full_mask, mask_from_rows};

    #[test]
    fn sd_instance_fails_all_linear_conditions() {
        let inst = build_sd_minimum().unwrap();
        let net = inst.network_at(&inst.theta).unwrap();
        let rep = check_conditions(&net, &inst.x(), &inst.y).unwrap();
        assert_eq!(rep.group_widths, vec![1, 1]);
        assert_eq!(rep.support_sizes, vec![2, 2]);
        assert!(!rep.cond_overparam);
        assert!(!rep.cond_orthogonal);
        assert!(!rep.cond_scalar);
        assert!(!rep.any_linear_condition());
        let z12 = &inst.z1 * inst.z2.transpose();
        assert!((z12 - DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.8])).amax() < 1e-12);
    }

    #[test]
    fn wide_dense_net() {
        let x = DMatrix::from_fn(3, 5, |i, j| ((i * 5 + j) as f64).powi(2) + 1.0);
        let net = SparseNet::two_layer(SparseLayer::dense(DMatrix::zeros(6, 3)), DMatrix::zeros(2, 6), Activation::Linear).unwrap();
        let rep = check_conditions(&net, &x, &DMatrix::zeros(2, 5)).unwrap();
        assert!(rep.width_vs_n && rep.fanin_ok && rep.cond_overparam);
        assert_eq!(rep.intrinsic_dims, vec![Some(3)]);
    }

    #[test]
    fn orthogonal_disjoint_slices() {
        let x = DMatrix::<f64>::identity(4, 4);
        let mask = mask_from_rows(&[vec![1, 1, 0, 0], vec![1, 1, 0, 0], vec![0, 0, 1, 1]]);
        let net = SparseNet::two_layer(SparseLayer::masked(DMatrix::zeros(3, 4), mask).unwrap(), DMatrix::zeros(1, 3), Activation::Linear).unwrap();
        let rep = check_conditions(&net, &x, &DMatrix::zeros(1, 4)).unwrap();
        assert!(rep.cond_orthogonal && rep.cond_scalar);
        assert!(!rep.width_vs_n);
        assert!(!rep.fanin_ok);
    }

    #[test]
    fn rank_certificate_linear_and_dead_relu() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(3, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = DMatrix::from_fn(8, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lin = SparseNet::two_layer(SparseLayer::dense(w.clone()), DMatrix::zeros(1, 8), Activation::Linear).unwrap();
        assert!(hidden_rank_certificate(&lin, &x).unwrap()[0] <= 3);
        let xp = x.map(|v| v.abs());
        let neg = SparseNet::two_layer(SparseLayer::dense(w.map(|v| -v.abs())), DMatrix::zeros(1, 8), Activation::Relu).unwrap();
        assert_eq!(hidden_rank_certificate(&neg, &xp).unwrap(), vec![0]);
    }

    #[test]
    fn assumptions_flag_duplicates_and_empty_rows() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 2.0, 0.5, 0.7, 0.9]);
        let rep = check_assumptions(&x, &full_mask(2, 2));
        assert_eq!(rep.duplicate_magnitudes, vec![(0, 0, 1)]);
        assert!(!rep.ok());
        let mask = mask_from_rows(&[vec![1, 0], vec![0, 0]]);
        let rep = check_assumptions(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), &mask);
        assert!(rep.data_ok());
        assert_eq!(rep.empty_mask_rows, vec![1]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = DMatrix::from_fn(5, 40, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert!(check_assumptions(&g, &full_mask(3, 5)).ok());
    }

    #[test]
    fn admissibility_witnesses() {
        let t = activation_admissible(&Activation::Tanh, 3);
        assert!(t.admissible);
        assert_eq!(t.orders, vec![1, 3, 5]);
        let s = activation_admissible(&Activation::Sigmoid, 4);
        assert!(s.admissible);
        assert_eq!(s.orders, vec![1, 3, 5, 7]);
        assert!(activation_admissible(&Activation::Softplus, 6).admissible);
        assert!(!activation_admissible(&Activation::Relu, 1).admissible);
        // a quadratic has only three nonzero derivatives
        let q = Activation::Polynomial { coeffs: vec![1.0, 1.0, 1.0] };
        assert!(activation_admissible(&q, 3).admissible);
        assert!(!activation_admissible(&q, 4).admissible);
    }

    // Oracle: even-order derivatives of tanh vanish and odd ones do not.
    #[test]
    fn tanh_derivative_parity() {
        for k in 0..20 {
            let d = Activation::Tanh.taylor_at_zero(k).unwrap();
            assert_eq!(d == 0.0, k % 2 == 0, "order {k}");
        }
    }

    #[test]
    fn full_rank_sigmoid_eight() {
        let full = (0..100)
            .filter(|&s| full_rank_trial(&Activation::Sigmoid, 8, 4, 0.7, s).unwrap().rank == 8)
            .count();
        assert!(full >= 99, "{full}");
    }
}
