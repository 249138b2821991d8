//! Parameter checkpoint container ("AHA1"): a dims header followed by the
//! parameter blocks in declared order, all little-endian f64.

use std::fs;
use std::path::Path;

use crate::error::{LionError, Result};
use crate::mag::io::{push_f64_slice, push_u32, push_u64, Cursor};

use super::{AhaDims, AhaParams};

const MAGIC: &[u8; 4] = b"AHA1";
const VERSION: u32 = 1;

pub fn encode_params(params: &AhaParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, VERSION);
    push_u64(&mut out, params.n_channels as u64);
    push_u64(&mut out, params.d as u64);
    push_u64(&mut out, params.dim as u64);
    push_u64(&mut out, params.n_layers as u64);
    push_u64(&mut out, params.d_f as u64);
    push_u64(&mut out, params.h as u64);
    for (_, block) in params.blocks() {
        push_f64_slice(&mut out, block);
    }
    out
}

pub fn decode_params(data: &[u8]) -> Result<AhaParams> {
    let mut cur = Cursor::new(data);
    let magic = cur.bytes4("magic")?;
    if &magic != MAGIC {
        return Err(LionError::Format(format!(
            "magic: expected \"AHA1\", got {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(LionError::Format(format!("version: unsupported {version}")));
    }
    let dims = AhaDims {
        n_channels: cur.u64("n_channels")? as usize,
        d: cur.u64("d")? as usize,
        dim: cur.u64("dim")? as usize,
        n_layers: cur.u64("n_layers")? as usize,
        d_f: cur.u64("d_f")? as usize,
        h: cur.u64("h")? as usize,
    };
    let mut params = AhaParams::zeros(dims);
    for (name, block) in params.blocks_mut() {
        let vals = cur.f64_vec(block.len(), &name)?;
        block.copy_from_slice(&vals);
    }
    Ok(params)
}

pub fn save_params(params: &AhaParams, path: &Path) -> Result<()> {
    fs::write(path, encode_params(params))?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<AhaParams> {
    let data = fs::read(path)?;
    decode_params(&data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aha::init_params;

    #[test]
    fn checkpoint_round_trips_bit_exact() {
        let dims = AhaDims {
            n_channels: 4,
            d: 6,
            dim: 4,
            n_layers: 3,
            d_f: 8,
            h: 16,
        };
        let params = init_params(9, dims);
        let bytes = encode_params(&params);
        let back = decode_params(&bytes).unwrap();
        assert_eq!(back, params);
        assert_eq!(encode_params(&back), bytes);
    }

    #[test]
    fn truncated_checkpoint_is_a_format_error() {
        let dims = AhaDims {
            n_channels: 4,
            d: 2,
            dim: 4,
            n_layers: 2,
            d_f: 4,
            h: 8,
        };
        let params = init_params(1, dims);
        let bytes = encode_params(&params);
        let err = decode_params(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, LionError::Format(_)));
    }
}
