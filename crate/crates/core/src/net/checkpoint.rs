//! Versioned flat binary network checkpoints.
//!
//! Layout: magic `VBTK`, version u32, layer-dim count u32, dims u32 each,
//! then little-endian f64 parameters in layer order, weights before
//! biases. Activations are not stored; they are part of the pipeline
//! architecture and are supplied at load time.

use super::{Activation, Layer, ToyNet};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"VBTK";
pub const VERSION: u32 = 1;

pub fn save_toynet(net: &ToyNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dims = net.dims();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for layer in &net.layers {
        for &w in &layer.w {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for &b in &layer.b {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a checkpoint, reconstructing the net with `hidden` activations on
/// hidden layers and a linear output layer.
pub fn load_toynet(path: impl AsRef<Path>, hidden: Activation) -> Result<ToyNet> {
    let path = path.as_ref();
    let bad = |msg: &str| Error::Checkpoint {
        path: path.display().to_string(),
        msg: msg.to_string(),
    };
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    if data.len() < 12 || &data[..4] != MAGIC {
        return Err(bad("missing VBTK magic"));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n_dims = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
    if n_dims < 2 {
        return Err(bad("need at least 2 layer dims"));
    }
    let mut pos = 12;
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        if pos + 4 > data.len() {
            return Err(bad("truncated dim list"));
        }
        dims.push(u32::from_le_bytes(data[pos..pos + 4].try_into().unwrap()) as usize);
        pos += 4;
    }
    let expected_params: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if data.len() - pos != expected_params * 8 {
        return Err(bad(&format!(
            "parameter payload {} bytes, expected {}",
            data.len() - pos,
            expected_params * 8
        )));
    }
    let read_f64 = |pos: &mut usize| -> f64 {
        let v = f64::from_le_bytes(data[*pos..*pos + 8].try_into().unwrap());
        *pos += 8;
        v
    };
    let n_layers = n_dims - 1;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (cols, rows) = (dims[l], dims[l + 1]);
        let w = (0..rows * cols).map(|_| read_f64(&mut pos)).collect();
        let b = (0..rows).map(|_| read_f64(&mut pos)).collect();
        layers.push(Layer {
            w,
            b,
            rows,
            cols,
            act: if l + 1 == n_layers {
                Activation::Linear
            } else {
                hidden
            },
        });
    }
    Ok(ToyNet { layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let net = ToyNet::new(&[5, 8, 3], Activation::Tanh, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.vbtk");
        save_toynet(&net, &path).unwrap();
        let back = load_toynet(&path, Activation::Tanh).unwrap();
        assert_eq!(net, back);
        // Header sanity.
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[..4], b"VBTK");
        assert_eq!(u32::from_le_bytes(raw[4..8].try_into().unwrap()), 1);
    }

    #[test]
    fn corrupt_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vbtk");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(load_toynet(&path, Activation::Tanh).is_err());
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let net = ToyNet::new(&[4, 2], Activation::Tanh, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.vbtk");
        save_toynet(&net, &path).unwrap();
        let mut raw = std::fs::read(&path).unwrap();
        raw.truncate(raw.len() - 8);
        std::fs::write(&path, raw).unwrap();
        assert!(load_toynet(&path, Activation::Tanh).is_err());
    }
}
