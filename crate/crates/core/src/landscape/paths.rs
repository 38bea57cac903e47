//! Piecewise-linear, non-increasing paths from an initialization to a global
//! minimum of the two-layer sparse linear objective.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calculus::TwoLayerLinearInstance;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{pinv, svd, vstack, RANK_TOL};
use crate::net::PatternDecomposition;

/// Default number of uniform samples along a path.
pub const PATH_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub params: Vec<f64>,
    pub loss: f64,
}

/// Linear piece of a path, occupying `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub name: String,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub samples: Vec<PathSample>,
    pub segments: Vec<PathSegment>,
    pub end_loss: f64,
    /// Largest increase of the loss between consecutive samples, 0 if none.
    pub monotone_violation: f64,
}

impl PathTrace {
    /// Samples `n_samples` uniform values of `t ∈ [0, 1]` plus every segment
    /// endpoint along the polyline through `waypoints`.
    pub fn sample(
        waypoints: &[(String, Vec<f64>)],
        n_samples: usize,
        loss: impl Fn(&[f64]) -> f64,
    ) -> Result<PathTrace> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidArgument("a path needs a start and at least one segment".into()));
        }
        let dim = waypoints[0].1.len();
        if let Some((name, w)) = waypoints.iter().find(|(_, w)| w.len() != dim) {
            return Err(shape_err("PathTrace::sample", format!("{dim} parameters"), format!("{} at {name}", w.len())));
        }
        let n_seg = waypoints.len() - 1;
        let segments: Vec<PathSegment> = (0..n_seg)
            .map(|k| PathSegment {
                name: waypoints[k + 1].0.clone(),
                t_start: k as f64 / n_seg as f64,
                t_end: (k + 1) as f64 / n_seg as f64,
            })
            .collect();
        let mut ts: Vec<f64> = (0..n_samples.max(2))
            .map(|i| i as f64 / (n_samples.max(2) - 1) as f64)
            .chain(segments.iter().flat_map(|s| [s.t_start, s.t_end]))
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let samples: Vec<PathSample> = ts
            .into_iter()
            .map(|t| {
                let k = ((t * n_seg as f64).floor() as usize).min(n_seg - 1);
                let s = t * n_seg as f64 - k as f64;
                let (a, b) = (&waypoints[k].1, &waypoints[k + 1].1);
                let params: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
                let l = loss(&params);
                PathSample { t, params, loss: l }
            })
            .collect();
        let monotone_violation = samples
            .windows(2)
            .map(|w| w[1].loss - w[0].loss)
            .fold(0.0, f64::max);
        Ok(PathTrace {
            end_loss: samples.last().map_or(f64::NAN, |s| s.loss),
            samples,
            segments,
            monotone_violation,
        })
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.monotone_violation <= tol
    }

    /// Writes `t,loss` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "loss"])?;
        for s in &self.samples {
            w.write_record([s.t.to_string(), s.loss.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of rewriting `U` so that `U₀W = UW` with one zero column per
/// dependent row of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPathTransform {
    pub u0: DMatrix<f64>,
    /// Rows of `W` forming a basis of its row space, in increasing order.
    pub basis_rows: Vec<usize>,
    /// Remaining rows; the matching columns of `u0` are zero.
    pub dependent_rows: Vec<usize>,
    /// `basis_rows` followed by `dependent_rows`.
    pub permutation: Vec<usize>,
    /// `W_D = Q W_B`.
    pub q: DMatrix<f64>,
}

impl ZeroPathTransform {
    pub fn rank(&self) -> usize {
        self.basis_rows.len()
    }

    pub fn zero_columns(&self) -> usize {
        (0..self.u0.ncols())
            .filter(|&j| self.u0.column(j).iter().all(|&v| v == 0.0))
            .count()
    }
}

// Greedy scan keeping each row that is not in the span of those kept so far.
fn greedy_basis_rows(w: &DMatrix<f64>) -> Vec<usize> {
    let scale = (0..w.nrows()).map(|i| w.row(i).norm()).fold(0.0, f64::max);
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut rows = Vec::new();
    for i in 0..w.nrows() {
        let mut r = w.row(i).transpose();
        // two Gram-Schmidt passes keep the residual honest
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r -= q * c;
            }
        }
        let n = r.norm();
        if n > RANK_TOL * scale && scale > 0.0 {
            basis.push(r / n);
            rows.push(i);
        }
    }
    rows
}

/// Finds a row basis of `W` and folds the dependent rows' columns of `U`
/// into the basis columns.
pub fn zero_path_transform(u: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<ZeroPathTransform> {
    if u.ncols() != w.nrows() {
        return Err(shape_err("zero_path_transform", format!("U ·×{}", w.nrows()), format!("{:?}", u.shape())));
    }
    let basis_rows = greedy_basis_rows(w);
    let dependent_rows: Vec<usize> = (0..w.nrows()).filter(|i| !basis_rows.contains(i)).collect();
    let wb = w.select_rows(&basis_rows);
    let wd = w.select_rows(&dependent_rows);
    let q = if basis_rows.is_empty() {
        DMatrix::zeros(dependent_rows.len(), 0)
    } else {
        &wd * pinv(&wb)
    };
    let mut u0 = u.clone();
    for (a, &b) in basis_rows.iter().enumerate() {
        let mut col = u.column(b).into_owned();
        for (k, &d) in dependent_rows.iter().enumerate() {
            col += u.column(d) * q[(k, a)];
        }
        u0.set_column(b, &col);
    }
    for &d in &dependent_rows {
        u0.column_mut(d).fill(0.0);
    }
    let mut permutation = basis_rows.clone();
    permutation.extend(&dependent_rows);
    Ok(ZeroPathTransform {
        u0,
        basis_rows,
        dependent_rows,
        permutation,
        q,
    })
}

/// Orthonormal basis (as rows) of the orthogonal complement of the row space
/// of `m` in `R^d`.
fn row_space_complement(m: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    // pad to at least d rows so the right singular vectors span R^d
    let padded = if m.nrows() >= d {
        m.clone()
    } else {
        vstack(&[m.clone(), DMatrix::zeros(d - m.nrows(), d)])
    };
    let s = svd(&padded);
    let top = s.singular_values.first().copied().unwrap_or(0.0);
    let r = s.singular_values.iter().filter(|&&x| x > RANK_TOL * top && top > 0.0).count();
    let cols: Vec<_> = (r..d).map(|k| s.v.column(k).transpose()).collect();
    if cols.is_empty() {
        DMatrix::zeros(0, d)
    } else {
        DMatrix::from_rows(&cols)
    }
}

fn validate_blocks(decomp: &PatternDecomposition, us: &[DMatrix<f64>], y: &DMatrix<f64>) -> Result<()> {
    if decomp.slices.len() != decomp.len() {
        return Err(Error::InvalidArgument("pattern decomposition carries no data slices".into()));
    }
    if let Some(u) = us.first() {
        if u.nrows() != y.nrows() {
            return Err(shape_err("path", format!("{} output rows", y.nrows()), u.nrows().to_string()));
        }
    }
    let n = decomp.slices.first().map_or(0, |z| z.ncols());
    if y.ncols() != n {
        return Err(shape_err("path", format!("{n} samples in Y"), y.ncols().to_string()));
    }
    Ok(())
}

fn flat(decomp: &PatternDecomposition, us: &[DMatrix<f64>], ws: &[DMatrix<f64>], y: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(TwoLayerLinearInstance::new(us.to_vec(), ws.to_vec(), decomp.slices.clone(), y.clone())?.params())
}

fn trace_loss(decomp: &PatternDecomposition, us: &[DMatrix<f64>], ws: &[DMatrix<f64>], y: &DMatrix<f64>) -> Result<impl Fn(&[f64]) -> f64> {
    let proto = TwoLayerLinearInstance::new(us.to_vec(), ws.to_vec(), decomp.slices.clone(), y.clone())?;
    Ok(move |theta: &[f64]| proto.with_params(theta).expect("path keeps the block shapes").loss())
}

/// `½‖Y Z⁺ Z − Y‖²_F` with `Z` the stacked data slices: the infimum of the
/// two-layer linear objective once every group can realize any linear map.
pub fn block_least_squares_optimum(decomp: &PatternDecomposition, y: &DMatrix<f64>) -> f64 {
    let z = vstack(&decomp.slices);
    0.5 * (y * pinv(&z) * &z - y).norm_squared()
}

/// Path under `p_i ≥ d_i` for every group: fold `U` onto a row basis of each
/// `W_i`, complete each `W_i` to full column rank using the freed rows, then
/// move `U` straight to a global minimizer.
pub fn property_p_path_cond1(
    decomp: &PatternDecomposition,
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    y: &DMatrix<f64>,
    n_samples: usize,
) -> Result<PathTrace> {
    let (us, ws) = decomp.split(u, w)?;
    validate_blocks(decomp, &us, y)?;
    for (i, (p, d)) in decomp.widths().into_iter().zip(decomp.support_sizes()).enumerate() {
        if p < d {
            return Err(Error::ConditionViolated(format!("group {i} has p_i = {p} < d_i = {d}")));
        }
    }
    let mut u0s = Vec::with_capacity(us.len());
    let mut w1s = Vec::with_capacity(us.len());
    for (ui, wi) in us.iter().zip(&ws) {
        let zp = zero_path_transform(ui, wi)?;
        let comp = row_space_complement(&wi.select_rows(&zp.basis_rows), wi.ncols());
        let mut w1 = wi.clone();
        for (k, &row) in zp.dependent_rows.iter().enumerate() {
            if k < comp.nrows() {
                w1.set_row(row, &comp.row(k));
            }
        }
        u0s.push(zp.u0);
        w1s.push(w1);
    }
    // U*_i = (Y Z⁺)_i W_i⁺, so U*_i W_i = (Y Z⁺)_i
    let z = vstack(&decomp.slices);
    let v = y * pinv(&z);
    let mut offset = 0;
    let mut ustar = Vec::with_capacity(us.len());
    for (d, w1) in decomp.support_sizes().into_iter().zip(&w1s) {
        ustar.push(v.columns(offset, d) * pinv(w1));
        offset += d;
    }
    let waypoints = vec![
        ("start".to_string(), flat(decomp, &us, &ws, y)?),
        ("fold U onto row basis".to_string(), flat(decomp, &u0s, &ws, y)?),
        ("complete W".to_string(), flat(decomp, &u0s, &w1s, y)?),
        ("solve U".to_string(), flat(decomp, &ustar, &w1s, y)?),
    ];
    PathTrace::sample(&waypoints, n_samples, trace_loss(decomp, &us, &ws, y)?)
}

/// Path for scalar output: revive every zero `u_j` (first zero its weights,
/// then raise it to 1), then move `W` along the least-squares segment with
/// `U` fixed.
pub fn property_p_path_cond3(
    decomp: &PatternDecomposition,
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    y: &DMatrix<f64>,
    n_samples: usize,
) -> Result<PathTrace> {
    if y.nrows() != 1 {
        return Err(Error::ConditionViolated(format!("output dimension is {}, not 1", y.nrows())));
    }
    let (us, ws) = decomp.split(u, w)?;
    validate_blocks(decomp, &us, y)?;
    let mut ws_a = ws.clone();
    let mut us_b = us.clone();
    for (ui, (wa, ub)) in us.iter().zip(ws_a.iter_mut().zip(us_b.iter_mut())) {
        for j in 0..ui.ncols() {
            if ui[(0, j)] == 0.0 {
                wa.row_mut(j).fill(0.0);
                ub[(0, j)] = 1.0;
            }
        }
    }
    // with u fixed the prediction is Σ_j w_jᵀ (u_j Z_g(j)), linear in w
    let mut blocks = Vec::new();
    for (ui, zi) in us_b.iter().zip(&decomp.slices) {
        for j in 0..ui.ncols() {
            blocks.push(zi * ui[(0, j)]);
        }
    }
    let f = vstack(&blocks);
    let wstar = y * pinv(&f);
    let mut ws_c = Vec::with_capacity(ws.len());
    let mut offset = 0;
    for (ui, zi) in us_b.iter().zip(&decomp.slices) {
        let d = zi.nrows();
        let mut wi = DMatrix::zeros(ui.ncols(), d);
        for j in 0..ui.ncols() {
            wi.set_row(j, &wstar.row(0).columns(offset, d));
            offset += d;
        }
        ws_c.push(wi);
    }
    let waypoints = vec![
        ("start".to_string(), flat(decomp, &us, &ws, y)?),
        ("zero W at dead u".to_string(), flat(decomp, &us, &ws_a, y)?),
        ("revive u".to_string(), flat(decomp, &us_b, &ws_a, y)?),
        ("least-squares W".to_string(), flat(decomp, &us_b, &ws_c, y)?),
    ];
    PathTrace::sample(&waypoints, n_samples, trace_loss(decomp, &us, &ws, y)?)
}

/// Per-group losses `L_i = ½‖U_i W_i Z_i − Y‖²_F` and the separated total
/// `Σ L_i − (s−1)/2 ‖Y‖²_F`, which equals the loss when the slices are
/// mutually orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedLoss {
    pub total: f64,
    pub parts: Vec<f64>,
    pub separated: f64,
}

pub fn separated_loss(inst: &TwoLayerLinearInstance) -> SeparatedLoss {
    let parts: Vec<f64> = inst
        .us
        .iter()
        .zip(&inst.ws)
        .zip(&inst.zs)
        .map(|((u, w), z)| 0.5 * (u * w * z - &inst.y).norm_squared())
        .collect();
    let s = parts.len() as f64;
    SeparatedLoss {
        total: inst.loss(),
        separated: parts.iter().sum::<f64>() - 0.5 * (s - 1.0) * inst.y.norm_squared(),
        parts,
    }
}
