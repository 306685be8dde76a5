//! `TPCA` container for a fitted [`PcaModel`].
//!
//! Little-endian: `TPCA`, version `u32` = 1, input dim `D` as `u32`, output
//! dim `d` as `u32`, then `f64` values: the mean (`D`), the components
//! row-major (`d x D`), and the explained variance (`d`).

use std::path::Path;

use riskstop_core::pca::PcaModel;

use crate::error::{Error, Result};

pub const PCA_MAGIC: &[u8; 4] = b"TPCA";
pub const PCA_VERSION: u32 = 1;

pub fn save_pca(model: &PcaModel, path: &Path) -> Result<()> {
    let (big_d, d) = (model.input_dim(), model.output_dim());
    let mut bytes = Vec::with_capacity(16 + 8 * (big_d + d * big_d + d));
    bytes.extend_from_slice(PCA_MAGIC);
    bytes.extend_from_slice(&PCA_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(big_d as u32).to_le_bytes());
    bytes.extend_from_slice(&(d as u32).to_le_bytes());
    for v in model
        .mean()
        .iter()
        .chain(model.components())
        .chain(model.explained_variance())
    {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_pca(path: &Path) -> Result<PcaModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != PCA_MAGIC {
        return Err(Error::container(path, "not a TPCA file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    if u32_at(4) != PCA_VERSION as usize {
        return Err(Error::container(path, format!("unsupported TPCA version {}", u32_at(4))));
    }
    let (big_d, d) = (u32_at(8), u32_at(12));
    let values = big_d + d * big_d + d;
    if bytes.len() != 16 + 8 * values {
        return Err(Error::container(path, "TPCA length does not match its header"));
    }
    let mut floats = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mean: Vec<f64> = floats.by_ref().take(big_d).collect();
    let components: Vec<f64> = floats.by_ref().take(d * big_d).collect();
    let explained: Vec<f64> = floats.collect();
    Ok(PcaModel::from_parts(mean, components, d, explained)?)
}
