//! Adaptive holographic aggregation: the learnable fusion head.
//!
//! Consumes a cached propagation stack and produces one fused Euclidean
//! vector per node through four stages: energy-aware grade gating
//! (per-interaction-channel sigmoid gates driven by squared Clifford norms),
//! a normalized consensus profile over all scales, resonance attention of
//! each scale against that profile, and an affine output projection.
//!
//! The forward pass records every intermediate on a [`ForwardTape`]
//! (`forward` module); `backward` consumes the tape and returns analytic
//! gradients for every parameter block. No gradient flows into the stack —
//! propagation is training-free.

pub mod backward;
pub mod checkpoint;
pub mod forward;

use crate::clifford::BladeTable;
use crate::error::{LionError, Result};
use crate::rng::Rng;

/// Zero guard for the L1 normalization of the gate's energy input.
pub const ENERGY_NORM_EPS: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Interaction layout
// ---------------------------------------------------------------------------

/// One gated interaction channel: the coefficients of a single grade inside
/// one modality block.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionChannel {
    pub grade: usize,
    pub block: usize,
    /// Channel range `[start, end)` of the block.
    pub channel_range: (usize, usize),
    /// Blade indices of the grade.
    pub blades: Vec<usize>,
}

/// The (grade x modality-block) partition of gated coefficients.
///
/// For K=2 this is the four-channel layout — (grade-0, block-1),
/// (grade-0, block-2), (grade-2, block-1), (grade-2, block-2) — whose masks
/// are disjoint and cover the grade-0 and grade-2 coefficients; grade-1
/// coefficients belong to no gated channel and pass through unchanged. For
/// K=3 the same construction over grades {0, 2, 3} yields nine channels.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionLayout {
    pub k: usize,
    pub d: usize,
    pub dim: usize,
    pub blocks: Vec<usize>,
    pub channels: Vec<InteractionChannel>,
    offsets: Vec<Vec<usize>>,
}

impl InteractionLayout {
    pub fn new(table: &BladeTable, blocks: &[usize]) -> Result<Self> {
        if blocks.len() != table.k() {
            return Err(LionError::Dimension(format!(
                "layout: {} blocks for K={}",
                blocks.len(),
                table.k()
            )));
        }
        let gated_grades: &[usize] = if table.k() == 2 { &[0, 2] } else { &[0, 2, 3] };
        let mut channels = Vec::new();
        for &grade in gated_grades {
            let mut start = 0;
            for (block, &width) in blocks.iter().enumerate() {
                channels.push(InteractionChannel {
                    grade,
                    block,
                    channel_range: (start, start + width),
                    blades: table.blades_of_grade(grade),
                });
                start += width;
            }
        }
        let dim = table.dim();
        let offsets = channels
            .iter()
            .map(|ch| {
                let mut offs =
                    Vec::with_capacity((ch.channel_range.1 - ch.channel_range.0) * ch.blades.len());
                for row in ch.channel_range.0..ch.channel_range.1 {
                    for &blade in &ch.blades {
                        offs.push(row * dim + blade);
                    }
                }
                offs
            })
            .collect();
        Ok(InteractionLayout {
            k: table.k(),
            d: blocks.iter().sum(),
            dim,
            blocks: blocks.to_vec(),
            channels,
            offsets,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Flattened (channel-row, blade) coefficient offsets of channel `c`
    /// within a `d x 2^K` state stored row-major.
    pub fn mask_offsets(&self, c: usize) -> &[usize] {
        &self.offsets[c]
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// All learnable tensors of the aggregation head.
///
/// Shapes: `w_gate` is n_ch x n_ch over L1-normalized channel energies;
/// `w_tau`/`b_tau` are per-layer length-d channel affines broadcast over
/// blades; `w_score` is h x 2*d*2^K applied to `[H_ctx | H_tilde^(l)]` with
/// projection vector `a_score`; `w_out` maps the flattened fused state to
/// `d_f` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct AhaParams {
    pub n_channels: usize,
    pub d: usize,
    pub dim: usize,
    /// Stack scales, L + 1.
    pub n_layers: usize,
    pub d_f: usize,
    pub h: usize,
    pub w_gate: Vec<f64>,
    pub b_gate: Vec<f64>,
    pub w_tau: Vec<Vec<f64>>,
    pub b_tau: Vec<Vec<f64>>,
    pub w_score: Vec<f64>,
    pub a_score: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

/// Dimensions needed to allocate a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhaDims {
    pub n_channels: usize,
    pub d: usize,
    pub dim: usize,
    pub n_layers: usize,
    pub d_f: usize,
    pub h: usize,
}

impl AhaDims {
    pub fn from_layout(layout: &InteractionLayout, n_layers: usize, d_f: usize, h: usize) -> Self {
        AhaDims {
            n_channels: layout.n_channels(),
            d: layout.d,
            dim: layout.dim,
            n_layers,
            d_f,
            h,
        }
    }
}

impl AhaParams {
    pub fn zeros(dims: AhaDims) -> Self {
        AhaParams {
            n_channels: dims.n_channels,
            d: dims.d,
            dim: dims.dim,
            n_layers: dims.n_layers,
            d_f: dims.d_f,
            h: dims.h,
            w_gate: vec![0.0; dims.n_channels * dims.n_channels],
            b_gate: vec![0.0; dims.n_channels],
            w_tau: vec![vec![0.0; dims.d]; dims.n_layers],
            b_tau: vec![vec![0.0; dims.d]; dims.n_layers],
            w_score: vec![0.0; dims.h * 2 * dims.d * dims.dim],
            a_score: vec![0.0; dims.h],
            w_out: vec![0.0; dims.d_f * dims.d * dims.dim],
            b_out: vec![0.0; dims.d_f],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    pub fn dims(&self) -> AhaDims {
        AhaDims {
            n_channels: self.n_channels,
            d: self.d,
            dim: self.dim,
            n_layers: self.n_layers,
            d_f: self.d_f,
            h: self.h,
        }
    }

    /// Named views of every parameter block, in declared order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("w_gate".into(), &self.w_gate[..]),
            ("b_gate".into(), &self.b_gate[..]),
        ];
        for l in 0..self.n_layers {
            out.push((format!("w_tau[{l}]"), &self.w_tau[l][..]));
            out.push((format!("b_tau[{l}]"), &self.b_tau[l][..]));
        }
        out.push(("w_score".into(), &self.w_score[..]));
        out.push(("a_score".into(), &self.a_score[..]));
        out.push(("w_out".into(), &self.w_out[..]));
        out.push(("b_out".into(), &self.b_out[..]));
        out
    }

    /// Mutable views of every parameter block, in declared order.
    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("w_gate".into(), &mut self.w_gate[..]),
            ("b_gate".into(), &mut self.b_gate[..]),
        ];
        for (l, (w, b)) in self.w_tau.iter_mut().zip(self.b_tau.iter_mut()).enumerate() {
            out.push((format!("w_tau[{l}]"), &mut w[..]));
            out.push((format!("b_tau[{l}]"), &mut b[..]));
        }
        out.push(("w_score".into(), &mut self.w_score[..]));
        out.push(("a_score".into(), &mut self.a_score[..]));
        out.push(("w_out".into(), &mut self.w_out[..]));
        out.push(("b_out".into(), &mut self.b_out[..]));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|x| x.is_finite()))
    }

    /// FNV-1a fingerprint of every coefficient; ties a tape to the exact
    /// parameters it was recorded under.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for (_, block) in self.blocks() {
            for &x in block {
                for b in x.to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }
}

/// Glorot-uniform init for the gate, score and output matrices; consensus
/// weights start at one and every bias (plus `a_score`) at zero, so the
/// initial head is a near-uniform pass-through: all gates 0.5, resonance
/// uniform.
pub fn init_params(seed: u64, dims: AhaDims) -> AhaParams {
    let mut rng = Rng::new(seed).fork(11);
    let mut params = AhaParams::zeros(dims);
    let glorot = |rng: &mut Rng, mat: &mut [f64], fan_in: usize, fan_out: usize| {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for x in mat.iter_mut() {
            *x = rng.uniform_in(-bound, bound);
        }
    };
    glorot(&mut rng, &mut params.w_gate, dims.n_channels, dims.n_channels);
    glorot(
        &mut rng,
        &mut params.w_score,
        2 * dims.d * dims.dim,
        dims.h,
    );
    glorot(&mut rng, &mut params.w_out, dims.d * dims.dim, dims.d_f);
    for w in &mut params.w_tau {
        w.fill(1.0);
    }
    params
}
