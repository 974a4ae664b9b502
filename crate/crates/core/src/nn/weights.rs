//! Binary weights file.
//!
//! Little-endian layout: magic `ESRW`, format version `u32` = 1, tensor
//! count `u32`; then per tensor: name length `u16`, UTF-8 name, rank `u8`,
//! dims as `u32`s, raw `f32` data. Tensors appear in the network's
//! canonical parameter order, so save → load → save is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::network::{BlockKind, Network, NetworkConfig, NetworkOf};
use crate::tensor::Tensor;

use crate::edge::EdgeMode;

const MAGIC: &[u8; 4] = b"ESRW";
const VERSION: u32 = 1;

pub fn save_weights(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, encode_weights(net))?;
    Ok(())
}

pub fn encode_weights(net: &Network) -> Vec<u8> {
    let names = net.param_names();
    let params = net.params();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(names.len() as u32).to_le_bytes());
    for (name, tensor) in names.iter().zip(params) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Reads a weights file, inferring the network configuration from the
/// stored tensors and validating that the full expected tensor set is
/// present with matching shapes.
pub fn load_weights(path: &Path) -> Result<Network> {
    decode_weights(&fs::read(path)?)
}

pub fn decode_weights(bytes: &[u8]) -> Result<Network> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {:?}", magic)));
    }
    let version_at = cur.pos as u64;
    let version = cur.u32("format version")?;
    if version != VERSION {
        return Err(Error::format(
            version_at,
            format!("unsupported format version {version}"),
        ));
    }
    let count = cur.u32("tensor count")? as usize;

    let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
    for _ in 0..count {
        let name_at = cur.pos as u64;
        let name_len = cur.u16("name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "tensor name")?)
            .map_err(|_| Error::format(name_at, "tensor name is not UTF-8"))?
            .to_string();
        let rank = cur.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32("dimension")? as usize);
        }
        let len: usize = dims.iter().product();
        let data_at = cur.pos as u64;
        let raw = cur.take(len * 4, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let tensor = Tensor::from_vec(&dims, data)
            .map_err(|e| Error::format(data_at, format!("tensor {name:?}: {e}")))?;
        if tensors.insert(name.clone(), tensor).is_some() {
            return Err(Error::format(name_at, format!("duplicate tensor {name:?}")));
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(
            cur.pos as u64,
            format!("{} trailing bytes", bytes.len() - cur.pos),
        ));
    }

    let config = infer_config(&tensors)?;
    let mut net = NetworkOf::zeroed(config)?;
    let expected = net.param_names();
    for name in &expected {
        if !tensors.contains_key(name) {
            return Err(Error::config(format!(
                "missing tensor {name:?} for inferred {:?} network with {} blocks",
                config.block_kind, config.n_blocks
            )));
        }
    }
    for name in tensors.keys() {
        if !expected.contains(name) {
            return Err(Error::config(format!("unexpected tensor {name:?}")));
        }
    }
    for (name, tensor) in tensors {
        net.set_param(&name, tensor)?;
    }
    Ok(net)
}

fn infer_config(tensors: &BTreeMap<String, Tensor>) -> Result<NetworkConfig> {
    let sfe = tensors
        .get("sfe.w")
        .ok_or_else(|| Error::config("missing tensor \"sfe.w\"".to_string()))?;
    let (filters, in_ch) = match sfe.shape() {
        [f, c, 3, 3] => (*f, *c),
        s => {
            return Err(Error::config(format!(
                "sfe.w must be filters×in×3×3, got {:?}",
                s
            )))
        }
    };
    let edge_mode = match in_ch {
        3 => EdgeMode::None,
        4 => EdgeMode::Canny,
        5 => EdgeMode::Sobel,
        c => {
            return Err(Error::config(format!(
                "sfe.w has {c} input channels; expected 3, 4 or 5"
            )))
        }
    };
    let n_blocks = tensors
        .keys()
        .filter_map(|name| {
            name.strip_prefix("block")
                .and_then(|rest| rest.split('.').next())
                .and_then(|idx| idx.parse::<usize>().ok())
        })
        .max()
        .ok_or_else(|| Error::config("no block tensors present".to_string()))?;
    let block_kind = if tensors.contains_key("body.w") {
        BlockKind::EdsrBaseline
    } else {
        BlockKind::ResCat
    };
    Ok(NetworkConfig {
        n_blocks,
        filters,
        scale: 4,
        edge_mode,
        block_kind,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.bytes.len() as u64,
                format!(
                    "unexpected end of file reading {what} ({} of {} bytes available)",
                    self.bytes.len() - self.pos,
                    n
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::NetworkConfig;
    use tempfile::tempdir;

    fn toy_net(seed: u64) -> Network {
        let cfg = NetworkConfig {
            n_blocks: 2,
            filters: 4,
            scale: 4,
            edge_mode: EdgeMode::Canny,
            block_kind: BlockKind::ResCat,
        };
        Network::build_seeded(cfg, seed).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempdir().unwrap();
        let net = toy_net(5);
        let p1 = dir.path().join("a.esrw");
        save_weights(&net, &p1).unwrap();
        let loaded = load_weights(&p1).unwrap();
        assert_eq!(loaded.config(), net.config());
        let p2 = dir.path().join("b.esrw");
        save_weights(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn edsr_weights_round_trip() {
        let cfg = NetworkConfig {
            n_blocks: 3,
            filters: 4,
            ..NetworkConfig::edsr_baseline()
        };
        let net = Network::build_seeded(cfg, 9).unwrap();
        let loaded = decode_weights(&encode_weights(&net)).unwrap();
        assert_eq!(loaded.config(), net.config());
        assert_eq!(encode_weights(&loaded), encode_weights(&net));
    }

    #[test]
    fn wrong_magic_rejected() {
        let mut bytes = encode_weights(&toy_net(1));
        bytes[0] = b'X';
        let err = decode_weights(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
    }

    #[test]
    fn wrong_version_rejected() {
        let mut bytes = encode_weights(&toy_net(1));
        bytes[4] = 9;
        let err = decode_weights(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 4, .. }), "{err}");
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_weights(&toy_net(1));
        let cut = &bytes[..bytes.len() - 7];
        let err = decode_weights(cut).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset, cut.len() as u64);
                assert!(message.contains("unexpected end of file"), "{message}");
            }
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn missing_tensor_named_in_error() {
        let net = toy_net(2);
        let names = net.param_names();
        let params = net.params();
        // rebuild the file without block2.conv2.b
        let keep: Vec<(String, &Tensor)> = names
            .iter()
            .cloned()
            .zip(params)
            .filter(|(n, _)| n != "block2.conv2.b")
            .collect();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(keep.len() as u32).to_le_bytes());
        for (name, tensor) in keep {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(tensor.shape().len() as u8);
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let err = decode_weights(&out).unwrap_err();
        assert!(err.to_string().contains("block2.conv2.b"), "{err}");
    }

    #[test]
    fn non_finite_weights_rejected() {
        let mut bytes = encode_weights(&toy_net(4));
        // corrupt the last four bytes (inside final.b's data) into a NaN
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode_weights(&bytes).unwrap_err();
        assert!(
            matches!(err, Error::Format { .. }) && err.to_string().contains("non-finite"),
            "{err}"
        );
    }

    #[test]
    fn shape_mismatch_names_parameter() {
        let net = toy_net(6);
        let names = net.param_names();
        let params = net.params();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(names.len() as u32).to_le_bytes());
        for (name, tensor) in names.iter().zip(params) {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            if name == "up1.b" {
                // wrong length bias
                out.push(1);
                out.extend_from_slice(&3u32.to_le_bytes());
                out.extend_from_slice(&[0u8; 12]);
                continue;
            }
            out.push(tensor.shape().len() as u8);
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let err = decode_weights(&out).unwrap_err();
        assert!(err.to_string().contains("up1.b"), "{err}");
    }

    #[test]
    fn loaded_network_matches_forward() {
        let net = toy_net(3);
        let loaded = decode_weights(&encode_weights(&net)).unwrap();
        let x = Tensor::filled(&[4, 6, 6], 0.25);
        assert_eq!(
            net.forward(&x).unwrap().data(),
            loaded.forward(&x).unwrap().data()
        );
    }
}
