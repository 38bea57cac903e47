//! Rank of 1-D convolution matrices in each padding mode, including kernels
//! with leading zeros.

use sparse_landscape::conv::{conv_matrix, conv_rank_expected, ConvMode, ConvSpec};
use sparse_landscape::linalg::{numerical_rank, RANK_TOL};

fn main() -> sparse_landscape::Result<()> {
    let kernels = [vec![1.0, -2.0, 0.5], vec![0.0, 3.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]];
    for mode in ConvMode::ALL {
        for k in &kernels {
            let spec = ConvSpec::new(k.clone(), 4, mode)?;
            let m = conv_matrix(&spec)?;
            println!(
                "{mode:<5} d=4 kernel {k:?}: {}x{} matrix, expected rank {}, numeric {}",
                m.nrows(),
                m.ncols(),
                conv_rank_expected(&spec),
                numerical_rank(&m, RANK_TOL)
            );
        }
    }
    Ok(())
}
