//! Versioned binary checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "LHVAECKP"
//! 8       4     format version (u32, currently 1)
//! 12      4     header length H in bytes (u32)
//! 16      H     UTF-8 JSON header: {"arch", "config", "norm", "param_count"}
//! 16+H    8*N   N = param_count parameters as f64
//! ```
//!
//! Parameters follow `VaeParams::param_slices`: for each trunk layer its
//! weights (row-major, out x in) then bias, then the mu head, the logvar
//! head and finally each decoder layer, input side first.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::vae::{TrainConfig, VaeArch, VaeParams};

pub const MAGIC: &[u8; 8] = b"LHVAECKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: VaeParams,
    pub config: TrainConfig,
    pub norm: NormStats,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: VaeArch,
    config: TrainConfig,
    norm: NormStats,
    param_count: usize,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let flat = self.params.flatten();
        let header = serde_json::to_vec(&Header {
            arch: self.params.arch().clone(),
            config: self.config,
            norm: self.norm,
            param_count: flat.len(),
        })?;
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::Checkpoint("header too large".into()))?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * flat.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    /// Decodes a checkpoint and insists on the `expected` architecture.
    pub fn from_bytes(bytes: &[u8], expected: &VaeArch) -> Result<Self> {
        let truncated = || Error::Checkpoint("truncated file".into());
        if bytes.len() < 16 {
            return Err(truncated());
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + header_len).ok_or_else(truncated)?;
        let header: Header = serde_json::from_slice(body)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;

        header.arch.validate()?;
        if &header.arch != expected {
            return Err(Error::Architecture(format!(
                "checkpoint declares ladder {:?} with latent {}, expected {:?} with latent {}",
                header.arch.encoder_sizes, header.arch.latent_dim, expected.encoder_sizes, expected.latent_dim
            )));
        }
        if header.param_count != header.arch.param_count() {
            return Err(Error::Checkpoint(format!(
                "header lists {} parameters, architecture needs {}",
                header.param_count,
                header.arch.param_count()
            )));
        }
        header
            .config
            .validate()
            .and_then(|_| NormStats::new(header.norm.mean, header.norm.std))
            .map_err(|e| Error::Checkpoint(e.to_string()))?;

        let payload = &bytes[16 + header_len..];
        let want = 8 * header.param_count;
        if payload.len() < want {
            return Err(truncated());
        }
        if payload.len() > want {
            return Err(Error::Checkpoint(format!("{} trailing bytes", payload.len() - want)));
        }
        let flat: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = VaeParams::from_flat(header.arch, &flat)?;
        Ok(Self {
            params,
            config: header.config,
            norm: header.norm,
        })
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint of the standard architecture.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint_with_arch(path, &VaeArch::default())
}

pub fn load_checkpoint_with_arch(path: &Path, expected: &VaeArch) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let arch = VaeArch::new(vec![6, 4, 3], 2).unwrap();
        let mut params = VaeParams::init(arch, 11).unwrap();
        for (i, s) in params.param_slices_mut().into_iter().enumerate() {
            for (j, v) in s.iter_mut().enumerate() {
                *v += (i * 31 + j) as f64 * 1e-3 + 1.0 / 3.0;
            }
        }
        Checkpoint {
            params,
            config: TrainConfig {
                epochs: 3,
                seed: 9,
                ..TrainConfig::default()
            },
            norm: NormStats::new(0.25, 1.5).unwrap(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes, ck.params.arch()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_other_latent_width() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let wanted = VaeArch::new(vec![6, 4, 3], 4).unwrap();
        assert!(matches!(Checkpoint::from_bytes(&bytes, &wanted), Err(Error::Architecture(_))));
    }

    #[test]
    fn rejects_declared_latent_four() {
        let arch = VaeArch::new(vec![256, 128, 32, 8], 4).unwrap();
        let ck = Checkpoint {
            params: VaeParams::init(arch, 0).unwrap(),
            ..sample()
        };
        let bytes = ck.to_bytes().unwrap();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes, &VaeArch::default()),
            Err(Error::Architecture(_))
        ));
    }

    #[test]
    fn rejects_nan_truncation_and_version() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let arch = ck.params.arch().clone();

        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(Checkpoint::from_bytes(&nan, &arch).is_err());

        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3], &arch).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..10], &arch).is_err());

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra, &arch).is_err());

        let mut version = bytes.clone();
        version[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(Checkpoint::from_bytes(&version, &arch), Err(Error::Checkpoint(_))));

        let mut magic = bytes;
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic, &arch).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let arch = VaeArch::default();
        let ck = Checkpoint {
            params: VaeParams::init(arch.clone(), 5).unwrap(),
            ..sample()
        };
        save_checkpoint(&path, &ck).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
        assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
