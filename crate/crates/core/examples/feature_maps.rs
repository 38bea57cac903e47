//! Polynomial activations as inner products of finite feature maps, and
//! the resulting bound on the span of hidden outputs.

use nalgebra::DMatrix;
use sparse_landscape::landscape::{feature_dim, intrinsic_dim_bound, PolyFeatureMap};
use sparse_landscape::Activation;

fn main() -> sparse_landscape::Result<()> {
    let act = Activation::Polynomial { coeffs: vec![0.0, 1.0, 0.5, -0.2] };
    let map = PolyFeatureMap::from_activation(&act, 3)?;
    let (w, x) = ([0.3, -1.2, 0.8], [1.0, 0.5, -2.0]);
    let z: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
    println!("degree {}, feature dim {}", map.degree(), map.feature_dim());
    println!("<psi(w), phi(x)> = {:.12}", map.psi(&w, 0.0).dot(&map.phi(&x)));
    println!("sigma(w.x)       = {:.12}", act.eval(z));
    for t in 1..=4 {
        println!("C(3+{t}, {t}) = {}", feature_dim(3, t));
    }
    let data = DMatrix::from_fn(3, 40, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    println!("span bound on 40 samples: {:?}", intrinsic_dim_bound(&act, &data));
    println!("tanh: {:?}", intrinsic_dim_bound(&Activation::Tanh, &data));
    Ok(())
}
