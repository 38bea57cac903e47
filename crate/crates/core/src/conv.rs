//! One-dimensional stride-1 convolution written as a sparse matrix acting
//! on the input, for the FULL, SAME (right padding only) and VALID modes.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{shape_err, Error, Result};
use crate::linalg::vstack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConvMode {
    /// Pads `d₁ − 1` zeros on both sides; `d + d₁ − 1` outputs.
    Full,
    /// Pads `d₁ − 1` zeros on the right only; `d` outputs.
    Same,
    /// No padding; `d − d₁ + 1` outputs.
    Valid,
}

impl ConvMode {
    pub const ALL: [ConvMode; 3] = [ConvMode::Full, ConvMode::Same, ConvMode::Valid];

    pub fn output_len(self, d: usize, d1: usize) -> usize {
        match self {
            ConvMode::Full => d + d1 - 1,
            ConvMode::Same => d,
            ConvMode::Valid => (d + 1).saturating_sub(d1),
        }
    }

    fn left_pad(self, d1: usize) -> usize {
        match self {
            ConvMode::Full => d1 - 1,
            _ => 0,
        }
    }
}

impl fmt::Display for ConvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvMode::Full => "FULL",
            ConvMode::Same => "SAME",
            ConvMode::Valid => "VALID",
        })
    }
}

impl FromStr for ConvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FULL" => Ok(ConvMode::Full),
            "SAME" => Ok(ConvMode::Same),
            "VALID" => Ok(ConvMode::Valid),
            _ => Err(Error::InvalidArgument(format!("unknown convolution mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: Vec<f64>,
    /// Input length.
    pub d: usize,
    pub mode: ConvMode,
}

impl ConvSpec {
    pub fn new(kernel: Vec<f64>, d: usize, mode: ConvMode) -> Result<Self> {
        let spec = ConvSpec { kernel, d, mode };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.kernel.is_empty() || self.d == 0 {
            return Err(Error::InvalidArgument("kernel and input must be non-empty".into()));
        }
        if self.mode == ConvMode::Valid && self.d < self.kernel.len() {
            return Err(Error::InvalidArgument(format!(
                "VALID mode needs d ≥ d₁, got d = {} < {}",
                self.d,
                self.kernel.len()
            )));
        }
        Ok(())
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel.len()
    }

    /// Number of output positions `s`.
    pub fn output_len(&self) -> usize {
        self.mode.output_len(self.d, self.kernel.len())
    }
}

/// The `s × d` matrix `f(w)` with `f(w) x` the mode's correlation of `x`
/// with `w`.
pub fn conv_matrix(spec: &ConvSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d1 = spec.kernel.len();
    let shift = spec.mode.left_pad(d1) as isize;
    Ok(DMatrix::from_fn(spec.output_len(), spec.d, |r, c| {
        let k = c as isize - r as isize + shift;
        if (0..d1 as isize).contains(&k) {
            spec.kernel[k as usize]
        } else {
            0.0
        }
    }))
}

/// Closed-form rank of [`conv_matrix`].
pub fn conv_rank_expected(spec: &ConvSpec) -> usize {
    let Some(first) = spec.kernel.iter().position(|&w| w != 0.0) else {
        return 0;
    };
    match spec.mode {
        ConvMode::Full => spec.d,
        // first is 0-based, so d − (first + 1) + 1; kernels whose leading
        // zeros run past the input have nothing left to act on
        ConvMode::Same => spec.d.saturating_sub(first),
        ConvMode::Valid => spec.output_len(),
    }
}

/// Sliding windows of `x` (`d × n`, one sample per column): position `k`
/// gives the `d₁ × n` block of entries that meet the kernel at output `k`.
pub fn patches(x: &DMatrix<f64>, d1: usize, mode: ConvMode) -> Result<Vec<DMatrix<f64>>> {
    let d = x.nrows();
    ConvSpec::new(vec![0.0; d1], d, mode)?;
    let s = mode.output_len(d, d1);
    let pad = mode.left_pad(d1) as isize;
    Ok((0..s)
        .map(|k| {
            DMatrix::from_fn(d1, x.ncols(), |m, c| {
                let src = k as isize + m as isize - pad;
                if (0..d as isize).contains(&src) {
                    x[(src as usize, c)]
                } else {
                    0.0
                }
            })
        })
        .collect())
}

/// `F(W)`: the per-channel convolution matrices stacked vertically,
/// `p₁ s × d`. Row `j s + k` is channel `j` at position `k`.
pub fn stacked_conv_matrix(kernels: &[Vec<f64>], d: usize, mode: ConvMode) -> Result<DMatrix<f64>> {
    let d1 = kernels.first().map_or(0, |k| k.len());
    let mut blocks = Vec::with_capacity(kernels.len());
    for k in kernels {
        if k.len() != d1 {
            return Err(shape_err("stacked_conv_matrix", format!("kernel length {d1}"), k.len().to_string()));
        }
        blocks.push(conv_matrix(&ConvSpec::new(k.clone(), d, mode)?)?);
    }
    Ok(vstack(&blocks))
}

/// `F(W) X`.
pub fn stack_channels(kernels: &[Vec<f64>], x: &DMatrix<f64>, mode: ConvMode) -> Result<DMatrix<f64>> {
    Ok(stacked_conv_matrix(kernels, x.nrows(), mode)? * x)
}

/// Loss `½‖U σ(F(W) X) − Y‖²` with `U` of shape `d_y × p₁ s`.
pub fn conv_loss_stacked(
    u: &DMatrix<f64>,
    kernels: &[Vec<f64>],
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mode: ConvMode,
    act: &Activation,
) -> Result<f64> {
    let h = stack_channels(kernels, x, mode)?.map(|v| act.eval(v));
    if u.ncols() != h.nrows() || u.nrows() != y.nrows() || y.ncols() != x.ncols() {
        return Err(shape_err(
            "conv_loss_stacked",
            format!("U {}×{}", y.nrows(), h.nrows()),
            format!("{:?}", u.shape()),
        ));
    }
    Ok(0.5 * (u * h - y).norm_squared())
}

/// The same loss written patch by patch: `½‖Σ_k U_k σ(W Z_k) − Y‖²` where
/// `W` stacks the kernels as rows and `U_k` collects the columns of `U`
/// belonging to position `k`.
pub fn conv_loss_patches(
    u: &DMatrix<f64>,
    kernels: &[Vec<f64>],
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mode: ConvMode,
    act: &Activation,
) -> Result<f64> {
    let p1 = kernels.len();
    let d1 = kernels.first().map_or(0, |k| k.len());
    let w = DMatrix::from_fn(p1, d1, |j, m| kernels[j][m]);
    let zs = patches(x, d1, mode)?;
    let s = zs.len();
    if u.ncols() != p1 * s || u.nrows() != y.nrows() {
        return Err(shape_err("conv_loss_patches", format!("U ·×{}", p1 * s), format!("{:?}", u.shape())));
    }
    let mut out = -y.clone();
    for (k, z) in zs.iter().enumerate() {
        let cols: Vec<usize> = (0..p1).map(|j| j * s + k).collect();
        out += u.select_columns(&cols) * (&w * z).map(|v| act.eval(v));
    }
    Ok(0.5 * out.norm_squared())
}
