//! Binary parameter files.
//!
//! Layout, little-endian: 8-byte magic, `u32` version, `u32` network count;
//! per network a `u32` layer count; per layer the weight then the bias, each
//! as `u64` rows, `u64` cols and `rows·cols` row-major `f64` values. Biases
//! are stored as a single row.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{Dense, DiffusionError, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SWSPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_tensor<W: Write>(w: &mut W, rows: usize, cols: usize, data: &[f64]) -> std::io::Result<()> {
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut w: W, nets: &[&Mlp]) -> Result<(), DiffusionError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(nets.len() as u32).to_le_bytes())?;
    for net in nets {
        w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
        for layer in &net.layers {
            let (r, c) = layer.weight.dim();
            write_tensor(&mut w, r, c, layer.weight.as_slice().expect("standard layout"))?;
            write_tensor(&mut w, 1, layer.bias.len(), layer.bias.as_slice().expect("standard layout"))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DiffusionError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DiffusionError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_tensor<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<f64>), DiffusionError> {
    let rows = read_u64(r)? as usize;
    let cols = read_u64(r)? as usize;
    let n = rows
        .checked_mul(cols)
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| DiffusionError::Checkpoint(format!("tensor {rows}x{cols} is too large")))?;
    let mut data = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        data.push(f64::from_le_bytes(b));
    }
    Ok((rows, cols, data))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<Mlp>, DiffusionError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(DiffusionError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(DiffusionError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut nets = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let num_layers = read_u32(&mut r)?;
        let mut layers = Vec::with_capacity(num_layers as usize);
        for _ in 0..num_layers {
            let (rows, cols, data) = read_tensor(&mut r)?;
            let weight = Array2::from_shape_vec((rows, cols), data).expect("length checked");
            let (brows, bcols, bias) = read_tensor(&mut r)?;
            if brows != 1 || bcols != cols {
                return Err(DiffusionError::Checkpoint(format!(
                    "bias shape {brows}x{bcols} does not match {cols} outputs"
                )));
            }
            layers.push(Dense {
                weight,
                bias: Array1::from_vec(bias),
            });
        }
        if layers.windows(2).any(|w| w[0].weight.ncols() != w[1].weight.nrows()) {
            return Err(DiffusionError::Checkpoint("layer shapes do not chain".into()));
        }
        if layers.is_empty() {
            return Err(DiffusionError::Checkpoint("network without layers".into()));
        }
        nets.push(Mlp { layers });
    }
    Ok(nets)
}
