//! JSON cache of Stokes eigenpairs and lift operators, keyed by SHA-256 of
//! everything they depend on.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{build_basis_with, DivFreeBasis};
use crate::geometry::ChannelGeometry;
use crate::linalg::GeneralizedEigen;
use crate::operators::{assemble_operators_from, LiftField, OperatorSet};
use crate::{Error, Result};

const FORMAT: &str = "shearflow-cache-1";

pub fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn hex_digest<T: Serialize>(value: &T) -> String {
    hex::encode(digest(serde_json::to_string(value).expect("key serializes").as_bytes()))
}

pub fn basis_key(geometry: &ChannelGeometry, k: usize, m: usize) -> String {
    hex_digest(&(FORMAT, geometry, k, m))
}

/// Extends the basis key with the lift parameters.
pub fn operator_key(basis_key: &str, nu: f64, lift: &LiftField) -> String {
    hex_digest(&(basis_key, nu, lift.s, lift.lambda, lift.t0, "exp(1 - 1/(1 - t^2))"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Matrix {
    rows: usize,
    cols: usize,
    /// Column-major entries.
    data: Vec<f64>,
}

impl From<&DMatrix<f64>> for Matrix {
    fn from(m: &DMatrix<f64>) -> Self {
        Matrix { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }
    }
}

impl Matrix {
    fn to_dmatrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Cache("matrix shape does not match data".into()));
        }
        Ok(DMatrix::from_column_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BasisEntry {
    format: String,
    key: String,
    n_modes: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OperatorEntry {
    format: String,
    key: String,
    f_vector: Vec<f64>,
    g_bw: Matrix,
    g_wb: Matrix,
}

fn entry_path(dir: &Path, kind: &str, key: &str) -> PathBuf {
    dir.join(format!("{kind}-{}.json", &key[..16]))
}

fn read_entry<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_entry<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string(value).map_err(|e| Error::Cache(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Builds the basis, reusing cached Stokes eigenpairs from `dir` when present.
pub fn load_or_build_basis(
    dir: Option<&Path>,
    geometry: &ChannelGeometry,
    k: usize,
    m: usize,
) -> Result<(DivFreeBasis, CacheStatus)> {
    let Some(dir) = dir else {
        return Ok((build_basis_with(geometry, k, m, None)?, CacheStatus::Disabled));
    };
    let key = basis_key(geometry, k, m);
    let path = entry_path(dir, "basis", &key);
    if let Some(e) = read_entry::<BasisEntry>(&path).filter(|e| e.key == key && e.format == FORMAT) {
        let stokes = GeneralizedEigen { values: DVector::from_vec(e.eigenvalues), vectors: e.eigenvectors.to_dmatrix()? };
        if stokes.values.len() == e.n_modes {
            return Ok((build_basis_with(geometry, k, m, Some(stokes))?, CacheStatus::Hit));
        }
    }
    let basis = build_basis_with(geometry, k, m, None)?;
    let entry = BasisEntry {
        format: FORMAT.into(),
        key,
        n_modes: basis.n_modes(),
        eigenvalues: basis.stokes.values.iter().copied().collect(),
        eigenvectors: (&basis.stokes.vectors).into(),
    };
    write_entry(&path, &entry)?;
    Ok((basis, CacheStatus::Miss))
}

/// Assembles operators, reusing cached lift parts from `dir` when present.
pub fn load_or_assemble_operators(
    dir: Option<&Path>,
    basis: &DivFreeBasis,
    nu: f64,
    lift: &LiftField,
    dense_limit: usize,
) -> Result<(OperatorSet, CacheStatus)> {
    let Some(dir) = dir else {
        return Ok((assemble_operators_from(basis, nu, lift, dense_limit, None)?, CacheStatus::Disabled));
    };
    let key = operator_key(&basis_key(basis.geometry(), basis.k_max, basis.m_count), nu, lift);
    let path = entry_path(dir, "operators", &key);
    if let Some(e) = read_entry::<OperatorEntry>(&path).filter(|e| e.key == key && e.format == FORMAT) {
        let parts = (DVector::from_vec(e.f_vector), e.g_bw.to_dmatrix()?, e.g_wb.to_dmatrix()?);
        return Ok((assemble_operators_from(basis, nu, lift, dense_limit, Some(parts))?, CacheStatus::Hit));
    }
    let ops = assemble_operators_from(basis, nu, lift, dense_limit, None)?;
    let entry = OperatorEntry {
        format: FORMAT.into(),
        key,
        f_vector: ops.f_vector.iter().copied().collect(),
        g_bw: (&ops.g_bw).into(),
        g_wb: (&ops.g_wb).into(),
    };
    write_entry(&path, &entry)?;
    Ok((ops, CacheStatus::Miss))
}
