use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::config::ModelConfig;
use super::network::Vae;
use super::params::Parameters;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FVAE0001";

fn u32_le(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::BadCheckpoint(format!("dimension {v} exceeds u32")))
}

/// Magic, tensor count, every shape, then every tensor as little-endian f32.
pub fn write_checkpoint(w: &mut impl Write, params: &Parameters<f32>) -> Result<()> {
    let io = |e| Error::io("<checkpoint>", e);
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&u32_le(params.specs().len())?).map_err(io)?;
    for s in params.specs() {
        w.write_all(&u32_le(s.shape.len())?).map_err(io)?;
        for &d in &s.shape {
            w.write_all(&u32_le(d)?).map_err(io)?;
        }
    }
    let bytes: Vec<u8> = params.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    w.write_all(&bytes).map_err(io)
}

/// Read parameters and check their shapes against `config`.
pub fn read_checkpoint(r: &mut impl Read, config: &ModelConfig) -> Result<Parameters<f32>> {
    let bad = |m: &str| Error::BadCheckpoint(m.to_string());
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::io("<checkpoint>", e))?;
    if buf.len() < 8 || &buf[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing FVAE0001 magic"));
    }
    let mut pos = 8;
    let mut next = || -> Result<usize> {
        let b = buf.get(pos..pos + 4).ok_or_else(|| bad("truncated header"))?;
        pos += 4;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    };
    let count = next()?;
    let expect = Parameters::<f32>::zeros(config);
    if count != expect.specs().len() {
        return Err(bad("tensor count does not match the configuration"));
    }
    for s in expect.specs() {
        let ndim = next()?;
        let shape = (0..ndim).map(|_| next()).collect::<Result<Vec<_>>>()?;
        if shape != s.shape {
            return Err(Error::BadCheckpoint(format!("{}: shape {:?}, expected {:?}", s.name, shape, s.shape)));
        }
    }
    let payload = &buf[pos..];
    if payload.len() != expect.len() * 4 {
        return Err(Error::LengthMismatch { expected: expect.len() * 4, found: payload.len() });
    }
    let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Parameters::from_values(config, values)
}

/// Sidecar path holding the JSON model configuration.
pub fn config_sidecar(path: &Path) -> PathBuf {
    path.with_extension("config.json")
}

/// Write the checkpoint and its configuration sidecar.
pub fn save_model(path: &Path, vae: &Vae<f32>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, vae.params())?;
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = config_sidecar(path);
    std::fs::write(&side, serde_json::to_string_pretty(vae.config())?).map_err(|e| Error::io(&side, e))
}

pub fn load_model(path: &Path) -> Result<Vae<f32>> {
    let side = config_sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let config: ModelConfig = serde_json::from_str(&text)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let params = read_checkpoint(&mut BufReader::new(file), &config)?;
    Vae::with_parameters(config, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig { input_dims: [8, 8, 16], channels: [2, 3, 4], latent_dim: 3, seed: 2, ..Default::default() }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let vae = Vae::<f32>::new(small()).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, vae.params()).unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let back = read_checkpoint(&mut bytes.as_slice(), &small()).unwrap();
        assert_eq!(&back, vae.params());
    }

    #[test]
    fn rejects_mismatches() {
        let vae = Vae::<f32>::new(small()).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, vae.params()).unwrap();
        let other = ModelConfig { latent_dim: 4, ..small() };
        assert!(matches!(read_checkpoint(&mut bytes.as_slice(), &other), Err(Error::BadCheckpoint(_))));
        let truncated = &bytes[..bytes.len() - 2];
        assert!(read_checkpoint(&mut &truncated[..], &small()).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(read_checkpoint(&mut wrong.as_slice(), &small()).is_err());
    }

    #[test]
    fn save_and_load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.fvae");
        let vae = Vae::<f32>::new(small()).unwrap();
        save_model(&path, &vae).unwrap();
        assert!(dir.path().join("model.config.json").exists());
        let back = load_model(&path).unwrap();
        assert_eq!(back.params(), vae.params());
        assert_eq!(back.config(), vae.config());
    }
}
