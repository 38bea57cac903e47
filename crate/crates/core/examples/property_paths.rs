//! Non-increasing paths to the global minimum for an over-parameterized
//! sparse first layer and for a scalar output. Writes path_cond1.csv and
//! path_cond3.csv to the working directory.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_landscape::landscape::{
    block_least_squares_optimum, property_p_path_cond1, property_p_path_cond3, PathTrace, PATH_SAMPLES,
};
use sparse_landscape::net::{decompose_mask, mask_from_rows};
use sparse_landscape::trainer::seed_from_env;

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn report(name: &str, trace: &PathTrace, opt: f64) -> sparse_landscape::Result<()> {
    println!("{name}: {:.6} -> {:.10} (optimum {opt:.10}), violation {:.1e}", trace.samples[0].loss, trace.end_loss, trace.monotone_violation);
    for s in &trace.segments {
        println!("  t in [{:.3}, {:.3}]  {}", s.t_start, s.t_end, s.name);
    }
    trace.write_csv(std::fs::File::create(format!("path_{name}.csv"))?)
}

fn main() -> sparse_landscape::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env(0));

    let mut rows = vec![vec![1u8, 1, 0, 0, 0]; 3];
    rows.extend(vec![vec![0u8, 0, 1, 1, 1]; 3]);
    let mask = mask_from_rows(&rows);
    let x = gauss(&mut rng, 5, 10);
    let y = gauss(&mut rng, 2, 10);
    let decomp = decompose_mask(&mask, &x)?;
    let w = gauss(&mut rng, 6, 5).zip_map(&mask, |v, m| if m { v } else { 0.0 });
    let u = gauss(&mut rng, 2, 6);
    let trace = property_p_path_cond1(&decomp, &u, &w, &y, PATH_SAMPLES)?;
    report("cond1", &trace, block_least_squares_optimum(&decomp, &y))?;

    let mask = mask_from_rows(&[vec![1, 1, 0, 0], vec![0, 1, 1, 0], vec![0, 0, 1, 1]]);
    let x = gauss(&mut rng, 4, 10);
    let y = gauss(&mut rng, 1, 10);
    let decomp = decompose_mask(&mask, &x)?;
    let w = gauss(&mut rng, 3, 4).zip_map(&mask, |v, m| if m { v } else { 0.0 });
    let u = DMatrix::zeros(1, 3);
    let trace = property_p_path_cond3(&decomp, &u, &w, &y, PATH_SAMPLES)?;
    let proj = DMatrix::identity(10, 10) - sparse_landscape::linalg::pinv(&x) * &x;
    report("cond3", &trace, 0.5 * (&y * proj).norm_squared())
}
