//! Monomial feature maps for polynomial activations:
//! `σ(wᵀx + b) = ⟨ψ(w, b), φ(x)⟩`.

use nalgebra::{DMatrix, DVector};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, RANK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFeatureMap {
    /// `c_0, ..., c_t`.
    pub coeffs: Vec<f64>,
    pub input_dim: usize,
    /// Exponent vectors `α` with `|α| ≤ t`.
    pub exponents: Vec<Vec<usize>>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

// All exponent vectors of total degree `deg` in `d` variables, lexicographic
// descending.
fn compositions(d: usize, deg: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return if deg == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=deg).rev() {
        for mut rest in compositions(d - 1, deg - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Degree-descending; inside a degree the pure powers come first, then the
/// mixed monomials in lexicographic descending order.
pub fn monomial_exponents(d: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for deg in (0..=t).rev() {
        let all = compositions(d, deg);
        let pure = |a: &Vec<usize>| a.iter().filter(|&&e| e > 0).count() <= 1;
        out.extend(all.iter().filter(|a| pure(a)).cloned());
        out.extend(all.iter().filter(|a| !pure(a)).cloned());
    }
    out
}

/// `C(d + t, t)`.
pub fn feature_dim(d: usize, t: usize) -> usize {
    binomial(d + t, t)
}

impl PolyFeatureMap {
    pub fn new(coeffs: Vec<f64>, input_dim: usize) -> Self {
        let t = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        let coeffs = coeffs[..=t].to_vec();
        PolyFeatureMap {
            exponents: monomial_exponents(input_dim, t),
            coeffs,
            input_dim,
        }
    }

    pub fn from_activation(act: &Activation, input_dim: usize) -> Result<Self> {
        let t = act
            .polynomial_degree()
            .ok_or_else(|| Error::Unsupported(format!("{} is not a polynomial", act.name())))?;
        let coeffs = act.taylor_coefficients(t).expect("polynomials are analytic");
        Ok(PolyFeatureMap::new(coeffs, input_dim))
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn feature_dim(&self) -> usize {
        self.exponents.len()
    }

    /// `ψ_α(w, b) = Σ_{k ≥ |α|} c_k k!/(α!(k−|α|)!) w^α b^{k−|α|}`.
    pub fn psi(&self, w: &[f64], b: f64) -> DVector<f64> {
        assert_eq!(w.len(), self.input_dim, "weight length");
        DVector::from_iterator(
            self.exponents.len(),
            self.exponents.iter().map(|a| {
                let deg: usize = a.iter().sum();
                let alpha_fact: f64 = a.iter().map(|&e| factorial(e)).product();
                let wa: f64 = w.iter().zip(a).map(|(x, &e)| x.powi(e as i32)).product();
                (deg..self.coeffs.len())
                    .map(|k| {
                        self.coeffs[k] * factorial(k) / (alpha_fact * factorial(k - deg)) * b.powi((k - deg) as i32)
                    })
                    .sum::<f64>()
                    * wa
            }),
        )
    }

    /// `φ_α(x) = x^α`.
    pub fn phi(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.input_dim, "input length");
        DVector::from_iterator(
            self.exponents.len(),
            self.exponents
                .iter()
                .map(|a| x.iter().zip(a).map(|(v, &e)| v.powi(e as i32)).product()),
        )
    }

    /// `φ` applied to every column of `z`.
    pub fn phi_matrix(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = z
            .column_iter()
            .map(|c| self.phi(c.as_slice()))
            .collect();
        DMatrix::from_columns(&cols)
    }
}

/// Upper bound on `dim span{σ(wᵀZ) : w}` for a polynomial activation
/// without bias: the rank of the monomial features of the degrees `σ`
/// actually uses, capped at the number of samples. `None` for
/// non-polynomial activations.
pub fn intrinsic_dim_bound(act: &Activation, z: &DMatrix<f64>) -> Option<usize> {
    let map = PolyFeatureMap::from_activation(act, z.nrows()).ok()?;
    let rows: Vec<usize> = map
        .exponents
        .iter()
        .enumerate()
        .filter(|(_, a)| {
            let deg: usize = a.iter().sum();
            deg > 0 && map.coeffs[deg] != 0.0
        })
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() || z.ncols() == 0 {
        return Some(0);
    }
    let feats = map.phi_matrix(z).select_rows(&rows);
    Some(numerical_rank(&feats, RANK_TOL).min(z.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_two_inputs_with_bias() {
        let m = PolyFeatureMap::new(vec![0.0, 0.0, 1.0], 2);
        assert_eq!(m.feature_dim(), 6);
        assert_eq!(
            m.exponents,
            vec![vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0]]
        );
        let (w1, w2, b) = (0.7, -1.3, 0.4);
        let psi = m.psi(&[w1, w2], b);
        let expect = [w1 * w1, w2 * w2, 2.0 * w1 * w2, 2.0 * b * w1, 2.0 * b * w2, b * b];
        for (a, e) in psi.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        let phi = m.phi(&[2.0, 3.0]);
        assert_eq!(phi.as_slice(), &[4.0, 9.0, 6.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn linear_is_identity_with_bias() {
        let m = PolyFeatureMap::from_activation(&Activation::Linear, 3).unwrap();
        assert_eq!(m.feature_dim(), 4);
        assert_eq!(m.psi(&[1.0, 2.0, 3.0], 5.0).as_slice(), &[1.0, 2.0, 3.0, 5.0]);
        assert_eq!(m.phi(&[4.0, 5.0, 6.0]).as_slice(), &[4.0, 5.0, 6.0, 1.0]);
    }

    #[test]
    fn cubic_order_three_inputs() {
        let e = monomial_exponents(3, 3);
        assert_eq!(&e[..4], &[vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3], vec![2, 1, 0]]);
        assert_eq!(e.len(), feature_dim(3, 3));
        assert_eq!(feature_dim(3, 3), 20);
    }

    #[test]
    fn inner_product_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (coeffs, d) in [(vec![0.3, -1.0, 0.5], 2), (vec![0.1, 0.4, -0.7, 0.25], 3), (vec![0.0, 1.0, 0.0, 2.0], 4)] {
            let act = Activation::Polynomial { coeffs: coeffs.clone() };
            let m = PolyFeatureMap::new(coeffs, d);
            assert_eq!(m.feature_dim(), feature_dim(d, m.degree()));
            for _ in 0..1000 {
                let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let b = rng.random_range(-2.0..2.0);
                let z: f64 = w.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>() + b;
                let lhs = m.psi(&w, b).dot(&m.phi(&x));
                assert!((lhs - act.eval(z)).abs() <= 1e-10 * act.eval(z).abs().max(1.0));
            }
        }
    }

    #[test]
    fn intrinsic_bound_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = DMatrix::from_fn(2, 10, |_, _| rng.random_range(-1.0..1.0));
        let sq = Activation::Polynomial { coeffs: vec![0.0, 0.0, 1.0] };
        // span of (wᵀx)² over 2 inputs is 3-dimensional
        assert_eq!(intrinsic_dim_bound(&sq, &z), Some(3));
        assert_eq!(intrinsic_dim_bound(&Activation::Linear, &z), Some(2));
        assert_eq!(intrinsic_dim_bound(&sq, &z.columns(0, 2).into_owned()), Some(2));
        assert_eq!(intrinsic_dim_bound(&Activation::Tanh, &z), None);
    }
}
