//! Reduced model data and its on-disk form.
//!
//! The model file is JSON and holds everything the online stage needs. The
//! basis vectors are written to a separate binary sidecar since only
//! offline checks and reconstruction of full-order fields need them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{eval_thetas, ParamBox, SourceNorm, Theta};
use crate::scm::ScmModel;

pub const FORMAT_VERSION: u32 = 1;
const BASIS_MAGIC: &[u8; 8] = b"LSRBBAS1";

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseBlock {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseBlock {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }
}

/// `Σ θ_k B_k` as an nalgebra matrix.
pub(crate) fn combine_blocks(theta: &[f64], blocks: &[DenseBlock], rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for (t, b) in theta.iter().zip(blocks) {
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] += t * b.data[i * b.cols + j];
            }
        }
    }
    m
}

pub(crate) fn combine_vectors(theta: &[f64], vecs: &[Vec<f64>], len: usize) -> DVector<f64> {
    let mut v = DVector::zeros(len);
    for (t, f) in theta.iter().zip(vecs) {
        for (i, x) in f.iter().enumerate() {
            v[i] += t * x;
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingStep {
    pub iteration: usize,
    pub n_primal: usize,
    pub n_error: usize,
    /// Parameter whose snapshot was added in this iteration.
    pub snapshot_mu: Vec<f64>,
    /// Full-order indicator at `snapshot_mu`, if it was computable.
    pub snapshot_indicator: Option<f64>,
    pub delta_updated: bool,
    pub delta: f64,
    /// Largest bound over the training set after adding the snapshot.
    pub max_estimator: f64,
    /// Largest reduced indicator over the whole training set.
    pub max_indicator: f64,
    /// Same, restricted to parameters not yet selected.
    pub max_indicator_unselected: f64,
    /// Parameter chosen for the next snapshot, if any.
    pub chosen_mu: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxBasisSize,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbModel {
    pub version: u32,
    pub problem: String,
    /// Cells per side of the X mesh.
    pub mesh_n: usize,
    pub z_depth: usize,
    pub x_dim: usize,
    pub z_dim: usize,
    pub params: ParamBox,
    pub q_a: usize,
    pub q_f: usize,
    pub thetas_a: Vec<Theta>,
    pub thetas_f: Vec<Theta>,
    /// Primal basis size.
    pub n: usize,
    /// Error basis size; smaller than `n` only if error snapshots were dependent.
    pub n_error: usize,
    /// `a_k(ξ_j, ξ_i)`, `n × n` each.
    pub a_xx: Vec<DenseBlock>,
    /// `a_k(φ_j, φ_i)`, `n_error × n_error` each.
    pub a_pp: Vec<DenseBlock>,
    /// `a_k(ξ_j, φ_i)`, `n_error × n` each.
    pub a_px: Vec<DenseBlock>,
    pub f_x: Vec<Vec<f64>>,
    pub f_p: Vec<Vec<f64>>,
    pub source: SourceNorm,
    pub scm: ScmModel,
    pub delta0: f64,
    pub delta_final: f64,
    pub certified: bool,
    pub stop_reason: StopReason,
    pub selected: Vec<Vec<f64>>,
    pub training_size: usize,
    pub seed: u64,
    pub log: Vec<TrainingStep>,
}

/// Primal and error basis coefficient vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Basis {
    pub xi: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

impl Basis {
    /// `Σ c_i ξ_i`
    pub fn primal(&self, c: &[f64]) -> Vec<f64> {
        expand(&self.xi, c)
    }

    /// `Σ ĉ_i φ_i`
    pub fn error(&self, c: &[f64]) -> Vec<f64> {
        expand(&self.phi, c)
    }
}

fn expand(vs: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vs.first().map_or(0, Vec::len)];
    for (v, &ci) in vs.iter().zip(c) {
        crate::sparse::axpy(ci, v, &mut out);
    }
    out
}

impl RbModel {
    pub fn theta_a(&self, mu: &[f64]) -> Vec<f64> {
        eval_thetas(&self.thetas_a, mu)
    }

    pub fn theta_f(&self, mu: &[f64]) -> Vec<f64> {
        eval_thetas(&self.thetas_f, mu)
    }

    pub fn effectivity_ceiling(&self) -> Option<f64> {
        crate::certify::effectivity_ceiling(self.delta_final).ok()
    }

    /// Sidecar path used next to a model file.
    pub fn basis_path(model_path: &Path) -> PathBuf {
        let mut p = model_path.as_os_str().to_owned();
        p.push(".basis");
        PathBuf::from(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let model: Self = serde_json::from_reader(r)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model version {} (expected {FORMAT_VERSION})", self.version)));
        }
        let shape_ok = |bs: &[DenseBlock], r: usize, c: usize| bs.len() == self.q_a && bs.iter().all(|b| b.rows == r && b.cols == c && b.data.len() == r * c);
        if self.thetas_a.len() != self.q_a || self.thetas_f.len() != self.q_f {
            return Err(Error::Format("coefficient counts do not match Q_a/Q_f".into()));
        }
        if !shape_ok(&self.a_xx, self.n, self.n) || !shape_ok(&self.a_pp, self.n_error, self.n_error) || !shape_ok(&self.a_px, self.n_error, self.n) {
            return Err(Error::Format("reduced block shapes are inconsistent".into()));
        }
        if self.f_x.len() != self.q_f || self.f_p.len() != self.q_f || self.f_x.iter().any(|f| f.len() != self.n) || self.f_p.iter().any(|f| f.len() != self.n_error) {
            return Err(Error::Format("reduced vector shapes are inconsistent".into()));
        }
        Ok(())
    }
}

impl Basis {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(BASIS_MAGIC)?;
        for set in [&self.xi, &self.phi] {
            let len = set.first().map_or(0, Vec::len);
            w.write_all(&(set.len() as u64).to_le_bytes())?;
            w.write_all(&(len as u64).to_le_bytes())?;
            for v in set {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BASIS_MAGIC {
            return Err(Error::Format("not a basis file".into()));
        }
        let mut word = [0u8; 8];
        let mut read_set = |r: &mut BufReader<File>| -> Result<Vec<Vec<f64>>> {
            r.read_exact(&mut word)?;
            let count = u64::from_le_bytes(word) as usize;
            r.read_exact(&mut word)?;
            let len = u64::from_le_bytes(word) as usize;
            let mut set = Vec::with_capacity(count);
            for _ in 0..count {
                let mut v = Vec::with_capacity(len);
                for _ in 0..len {
                    r.read_exact(&mut word)?;
                    v.push(f64::from_le_bytes(word));
                }
                set.push(v);
            }
            Ok(set)
        };
        let xi = read_set(&mut r)?;
        let phi = read_set(&mut r)?;
        Ok(Self { xi, phi })
    }
}
