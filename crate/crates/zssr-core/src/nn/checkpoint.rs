//! Parameter checkpoint file: magic "ZSSRNET1", five u32 LE config
//! fields (hidden_layers, channels, kernel_size, in_channels,
//! out_channels), then every parameter as f64 LE in layer order, weights
//! before bias.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{NetworkConfig, NetworkParams, Scalar};

const MAGIC: &[u8; 8] = b"ZSSRNET1";

pub fn save_checkpoint<S: Scalar>(params: &NetworkParams<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let cfg = &params.config;
    let mut bytes = Vec::with_capacity(8 + 20 + params.flat_len() * 8);
    bytes.extend_from_slice(MAGIC);
    for field in [
        cfg.hidden_layers,
        cfg.channels,
        cfg.kernel_size,
        cfg.in_channels,
        cfg.out_channels,
    ] {
        let v = u32::try_from(field).map_err(|_| Error::Checkpoint {
            path: path.into(),
            reason: format!("config field {field} exceeds u32"),
        })?;
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for slice in params.flat_slices() {
        for &v in slice {
            bytes.extend_from_slice(&v.to_f64().to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: impl AsRef<Path>) -> Result<NetworkParams<S>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |reason: String| Error::Checkpoint {
        path: path.into(),
        reason,
    };
    if bytes.len() < 8 + 20 {
        return Err(fail("file too short for header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(fail("bad magic, not a network checkpoint".into()));
    }
    let mut ints = [0usize; 5];
    for (i, slot) in ints.iter_mut().enumerate() {
        let off = 8 + i * 4;
        *slot = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    }
    let cfg = NetworkConfig {
        hidden_layers: ints[0],
        channels: ints[1],
        kernel_size: ints[2],
        in_channels: ints[3],
        out_channels: ints[4],
    };
    let mut params = NetworkParams::<S>::zeros(&cfg)
        .map_err(|e| fail(format!("invalid stored config: {e}")))?;
    let expected = 8 + 20 + params.flat_len() * 8;
    if bytes.len() != expected {
        return Err(fail(format!(
            "expected {expected} bytes for this config, file has {}",
            bytes.len()
        )));
    }
    let mut off = 28;
    for slice in params.flat_slices_mut() {
        for v in slice.iter_mut() {
            let raw = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            if !raw.is_finite() {
                return Err(fail(format!("non-finite parameter at byte {off}")));
            }
            *v = S::from_f64(raw);
            off += 8;
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_network;

    #[test]
    fn round_trip_is_exact_for_f64() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let cfg = NetworkConfig {
            hidden_layers: 2,
            channels: 5,
            in_channels: 3,
            out_channels: 3,
            ..NetworkConfig::default()
        };
        let p: NetworkParams<f64> = init_network(&cfg, 123).unwrap();
        save_checkpoint(&p, &path).unwrap();
        let q: NetworkParams<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn f32_round_trips_through_f64_storage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net32.ckpt");
        let cfg = NetworkConfig {
            hidden_layers: 1,
            channels: 3,
            in_channels: 1,
            out_channels: 1,
            ..NetworkConfig::default()
        };
        let p: NetworkParams<f32> = init_network(&cfg, 9).unwrap();
        save_checkpoint(&p, &path).unwrap();
        let q: NetworkParams<f32> = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn bad_magic_and_truncation_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let cfg = NetworkConfig {
            hidden_layers: 1,
            channels: 2,
            in_channels: 1,
            out_channels: 1,
            ..NetworkConfig::default()
        };
        let p: NetworkParams<f64> = init_network(&cfg, 1).unwrap();
        save_checkpoint(&p, &path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.ckpt");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(load_checkpoint::<f64>(&bad).is_err());

        let short = dir.path().join("short.ckpt");
        let orig = std::fs::read(&path).unwrap();
        std::fs::write(&short, &orig[..orig.len() - 4]).unwrap();
        assert!(load_checkpoint::<f64>(&short).is_err());
    }
}
