//! Stack cache container ("CGP1").
//!
//! Precompute writes the full propagation stack here; training reads it back
//! without touching the graph again. The header carries the propagation
//! settings and a dataset hash so a stale cache is rejected instead of
//! silently reused.
//!
//! ```text
//! magic "CGP1" | version u32 | K u32 | rotor_mode u32 | literal_eq3 u32
//! n_nodes u64 | d u64 | L u64 | blocks (K x u64)
//! damping f64 | epsilon f64 | graph_hash u64
//! layer-major f64 coefficients: [l][node][channel][blade]
//! ```

use std::fs;
use std::path::Path;

use crate::clifford::{BladeTable, MultivectorBatch};
use crate::error::{LionError, Result};
use crate::mag::io::{push_f64, push_u32, push_u64, Cursor};
use crate::mag::MagDataset;

use super::{CgpConfig, PropagationStack, RotorAngleMode};

const MAGIC: &[u8; 4] = b"CGP1";
const VERSION: u32 = 1;

/// FNV-1a over the dataset's structural content (modalities, dims, topology,
/// feature bytes). Splits and labels do not affect propagation, so they are
/// not hashed.
pub fn dataset_hash(ds: &MagDataset) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&(ds.n_modalities() as u64).to_le_bytes());
    eat(&(ds.n_nodes() as u64).to_le_bytes());
    for &d in &ds.feature_dims {
        eat(&(d as u64).to_le_bytes());
    }
    for &p in ds.csr.row_ptr() {
        eat(&(p as u64).to_le_bytes());
    }
    for &c in ds.csr.col_idx() {
        eat(&(c as u64).to_le_bytes());
    }
    for feat in &ds.features {
        for &x in feat {
            eat(&x.to_le_bytes());
        }
    }
    h
}

/// Serializes a stack with its provenance header.
pub fn encode_stack(stack: &PropagationStack, cfg: &CgpConfig, graph_hash: u64) -> Vec<u8> {
    let blocks = stack.layers[0][0].blocks().to_vec();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, VERSION);
    push_u32(&mut out, stack.k as u32);
    push_u32(
        &mut out,
        match cfg.rotor_angle_mode {
            RotorAngleMode::Squared => 0,
            RotorAngleMode::Linear => 1,
        },
    );
    push_u32(&mut out, cfg.literal_eq3 as u32);
    push_u64(&mut out, stack.n_nodes() as u64);
    push_u64(&mut out, stack.d as u64);
    push_u64(&mut out, stack.depth as u64);
    for &b in &blocks {
        push_u64(&mut out, b as u64);
    }
    push_f64(&mut out, stack.damping);
    push_f64(&mut out, cfg.epsilon);
    push_u64(&mut out, graph_hash);
    for layer in &stack.layers {
        for state in layer {
            for &c in state.coeffs() {
                push_f64(&mut out, c);
            }
        }
    }
    out
}

/// Stack plus the settings it was produced under.
#[derive(Debug)]
pub struct CachedStack {
    pub stack: PropagationStack,
    pub config: CgpConfig,
    pub graph_hash: u64,
}

/// Parses a CGP1 blob. When `expected_hash` is given, a mismatch is a
/// stale-cache error.
pub fn decode_stack(data: &[u8], expected_hash: Option<u64>) -> Result<CachedStack> {
    let mut cur = Cursor::new(data);
    let magic = cur.bytes4("magic")?;
    if &magic != MAGIC {
        return Err(LionError::Format(format!(
            "magic: expected \"CGP1\", got {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(LionError::Format(format!("version: unsupported {version}")));
    }
    let k = cur.u32("K")? as usize;
    let table = BladeTable::new(k)?;
    let rotor_angle_mode = match cur.u32("rotor_mode")? {
        0 => RotorAngleMode::Squared,
        1 => RotorAngleMode::Linear,
        other => return Err(LionError::Format(format!("rotor_mode: unknown value {other}"))),
    };
    let literal_eq3 = cur.u32("literal_eq3")? != 0;
    let n = cur.u64("n_nodes")? as usize;
    let d = cur.u64("d")? as usize;
    let depth = cur.u64("L")? as usize;
    let mut blocks = Vec::with_capacity(k);
    for m in 0..k {
        blocks.push(cur.u64(&format!("blocks[{m}]"))? as usize);
    }
    if blocks.iter().sum::<usize>() != d {
        return Err(LionError::Format(format!(
            "blocks: sum {} does not match d={d}",
            blocks.iter().sum::<usize>()
        )));
    }
    let damping = cur.f64("damping")?;
    let epsilon = cur.f64("epsilon")?;
    let graph_hash = cur.u64("graph_hash")?;
    if let Some(expect) = expected_hash {
        if expect != graph_hash {
            return Err(LionError::StaleCache(format!(
                "cache was built for dataset hash {graph_hash:#018x}, current dataset hashes to {expect:#018x}; rerun precompute"
            )));
        }
    }
    let dim = table.dim();
    let mut layers = Vec::with_capacity(depth + 1);
    for l in 0..=depth {
        let mut layer = Vec::with_capacity(n);
        for u in 0..n {
            let coeffs = cur.f64_vec(d * dim, &format!("layer[{l}] node[{u}]"))?;
            let mut state = MultivectorBatch::zero(blocks.clone(), &table)?;
            state.coeffs_mut().copy_from_slice(&coeffs);
            layer.push(state);
        }
        layers.push(layer);
    }
    Ok(CachedStack {
        stack: PropagationStack {
            layers,
            depth,
            damping,
            k,
            d,
        },
        config: CgpConfig {
            depth,
            damping,
            epsilon,
            rotor_angle_mode,
            literal_eq3,
        },
        graph_hash,
    })
}

pub fn save_stack(stack: &PropagationStack, cfg: &CgpConfig, graph_hash: u64, path: &Path) -> Result<()> {
    fs::write(path, encode_stack(stack, cfg, graph_hash))?;
    Ok(())
}

pub fn load_stack(path: &Path, expected_hash: Option<u64>) -> Result<CachedStack> {
    let data = fs::read(path)?;
    decode_stack(&data, expected_hash)
}
