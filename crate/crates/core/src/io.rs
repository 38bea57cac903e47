//! JSON network specs, run manifests and small file helpers.
//!
//! A spec looks like
//!
//! ```json
//! {
//!   "layers": [
//!     {"weights": [["7/8", 0.5], [0, "-1.25"]], "mask": [[1, 1], [0, 1]]},
//!     {"weights": [[1, 2]], "mask": [[1, 1]], "bias": [0.1], "bias_mask": [1]}
//!   ],
//!   "activation": {"kind": "tanh"}
//! }
//! ```
//!
//! Numbers may be JSON numbers or strings holding a decimal or a fraction
//! `p/q`. Masks accept `0/1` or booleans.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::net::{SparseLayer, SparseNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Float(v) => Ok(*v),
            Number::Text(s) => parse_number(s),
        }
    }
}

/// Parses `"0.9"`, `"-3"`, `"7/8"`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::InvalidSpec(format!("cannot read {s:?} as a number"));
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| bad())?;
        let q: f64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0.0 {
            return Err(Error::InvalidSpec(format!("zero denominator in {s:?}")));
        }
        return Ok(p / q);
    }
    s.parse().map_err(|_| bad())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bit {
    Bool(bool),
    Int(u8),
}

impl Bit {
    fn on(&self) -> Result<bool> {
        match self {
            Bit::Bool(b) => Ok(*b),
            Bit::Int(0) => Ok(false),
            Bit::Int(1) => Ok(true),
            Bit::Int(v) => Err(Error::InvalidSpec(format!("mask entries must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub weights: Vec<Vec<Number>>,
    pub mask: Vec<Vec<Bit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_mask: Option<Vec<Bit>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub layers: Vec<LayerSpec>,
    pub activation: Activation,
}

fn matrix(rows: &[Vec<Number>], field: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return Err(Error::InvalidSpec(format!("{field} is empty")));
    }
    let mut m = DMatrix::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::InvalidSpec(format!("{field}[{i}] has {} entries, expected {c}", row.len())));
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = v
                .value()
                .map_err(|e| Error::InvalidSpec(format!("{field}[{i}][{j}]: {e}")))?;
        }
    }
    Ok(m)
}

fn mask(rows: &[Vec<Bit>], field: &str, shape: (usize, usize)) -> Result<DMatrix<bool>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::InvalidSpec(format!("{field} must be {}×{} like the weights", shape.0, shape.1)));
    }
    let mut m = DMatrix::from_element(shape.0, shape.1, false);
    for (i, row) in rows.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            m[(i, j)] = b.on().map_err(|e| Error::InvalidSpec(format!("{field}[{i}][{j}]: {e}")))?;
        }
    }
    Ok(m)
}

impl NetSpec {
    pub fn to_net(&self) -> Result<SparseNet> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.iter().enumerate() {
            let f = |name: &str| format!("layers[{k}].{name}");
            let w = matrix(&l.weights, &f("weights"))?;
            let m = mask(&l.mask, &f("mask"), w.shape())?;
            let mut layer = SparseLayer::new(w, m).map_err(|e| Error::InvalidSpec(format!("{}: {e}", f("weights"))))?;
            match (&l.bias, &l.bias_mask) {
                (None, None) => {}
                (Some(b), bm) => {
                    let b: Vec<f64> = b
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v.value().map_err(|e| Error::InvalidSpec(format!("{}[{i}]: {e}", f("bias")))))
                        .collect::<Result<_>>()?;
                    let bm: Vec<bool> = match bm {
                        Some(bm) => bm.iter().map(Bit::on).collect::<Result<_>>()?,
                        None => vec![true; b.len()],
                    };
                    layer = layer
                        .with_bias(DVector::from_vec(b), bm)
                        .map_err(|e| Error::InvalidSpec(format!("{}: {e}", f("bias"))))?;
                }
                (None, Some(_)) => return Err(Error::InvalidSpec(format!("{} given without bias", f("bias_mask")))),
            }
            layers.push(layer);
        }
        SparseNet::new(layers, self.activation.clone()).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn from_net(net: &SparseNet) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| {
                let w = l.weights();
                LayerSpec {
                    weights: (0..w.nrows())
                        .map(|i| w.row(i).iter().map(|&v| Number::Float(v)).collect())
                        .collect(),
                    mask: (0..w.nrows())
                        .map(|i| l.mask().row(i).iter().map(|&b| Bit::Int(b as u8)).collect())
                        .collect(),
                    bias: l.bias().map(|b| b.iter().map(|&v| Number::Float(v)).collect()),
                    bias_mask: l.bias_mask().map(|m| m.iter().map(|&b| Bit::Int(b as u8)).collect()),
                }
            })
            .collect();
        NetSpec {
            layers,
            activation: net.activation.clone(),
        }
    }
}

/// Parses a spec; JSON errors carry line and column.
pub fn parse_net_spec(text: &str) -> Result<SparseNet> {
    let spec: NetSpec = serde_json::from_str(text)
        .map_err(|e| Error::InvalidSpec(format!("line {} column {}: {e}", e.line(), e.column())))?;
    spec.to_net()
}

pub fn read_net_spec(path: &Path) -> Result<SparseNet> {
    parse_net_spec(&fs::read_to_string(path)?)
}

pub fn write_net_spec(path: &Path, net: &SparseNet) -> Result<()> {
    write_json(path, &NetSpec::from_net(net))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Record of one command run: enough to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Command line arguments after the program name.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub result: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            argv,
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            result: serde_json::Value::Null,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }
}
