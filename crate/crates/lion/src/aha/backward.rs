//! Analytic backward pass of the aggregation head.
//!
//! Consumes a [`ForwardTape`] and the upstream output gradients and
//! accumulates parameter gradients node by node, walking the forward stages
//! in reverse: output projection, fusion weights, softmax, score network,
//! profile normalization, consensus affine, gate. Gated-state gradients are
//! accumulated from all three consumers (fusion, score concatenation,
//! consensus sum) before the gate sees them. Energies are functions of the
//! stack only, so nothing flows past the gate into the states.
//!
//! Accumulation runs in node order, so gradients are bit-reproducible.

use crate::error::{LionError, Result};

use super::forward::ForwardTape;
use super::{AhaParams, InteractionLayout};

/// Gradients for every parameter block, given `d_loss/d_z` per node.
pub fn backward(
    tape: &ForwardTape,
    params: &AhaParams,
    layout: &InteractionLayout,
    dz: &[Vec<f64>],
) -> Result<AhaParams> {
    if tape.params_fingerprint != params.fingerprint() {
        return Err(LionError::Contract(
            "stale tape: parameters changed since the forward pass".into(),
        ));
    }
    if dz.len() != tape.nodes.len() {
        return Err(LionError::Dimension(format!(
            "backward: {} gradient rows for {} taped nodes",
            dz.len(),
            tape.nodes.len()
        )));
    }
    let width = params.d * params.dim;
    let n_layers = params.n_layers;
    let h = params.h;
    let n_ch = params.n_channels;
    let ablation = tape.ablation;

    let mut grads = params.zeros_like();
    for (node, dz_node) in tape.nodes.iter().zip(dz) {
        if dz_node.len() != params.d_f {
            return Err(LionError::Dimension(format!(
                "backward: gradient width {} != d_f {}",
                dz_node.len(),
                params.d_f
            )));
        }

        // Output projection: z = w_out * fused + b_out.
        let mut d_fused = vec![0.0; width];
        for (i, &g) in dz_node.iter().enumerate() {
            grads.b_out[i] += g;
            let row = &params.w_out[i * width..(i + 1) * width];
            let grow = &mut grads.w_out[i * width..(i + 1) * width];
            for j in 0..width {
                grow[j] += g * node.fused[j];
                d_fused[j] += row[j] * g;
            }
        }

        // Fusion: fused = sum_l beta_l * h_tilde_l.
        let mut d_h_tilde = vec![vec![0.0; width]; n_layers];
        let mut d_beta = vec![0.0; n_layers];
        for l in 0..n_layers {
            let ht = &node.h_tilde[l];
            let dht = &mut d_h_tilde[l];
            let b = node.beta[l];
            let mut acc = 0.0;
            for j in 0..width {
                acc += d_fused[j] * ht[j];
                dht[j] += b * d_fused[j];
            }
            d_beta[l] = acc;
        }

        // Resonance attention (skipped entirely when beta is forced uniform).
        let mut d_h_ctx = vec![0.0; width];
        if !ablation.no_scale {
            // softmax backward
            let dot: f64 = node.beta.iter().zip(&d_beta).map(|(b, g)| b * g).sum();
            let d_scores: Vec<f64> = node
                .beta
                .iter()
                .zip(&d_beta)
                .map(|(b, g)| b * (g - dot))
                .collect();
            // The context half of every score row sees the same h_ctx, so
            // its gradient only needs the layer-summed du.
            let mut du_total = vec![0.0; h];
            for l in 0..n_layers {
                let ds = d_scores[l];
                if ds == 0.0 {
                    continue;
                }
                let t = &node.t[l];
                let ht = &node.h_tilde[l];
                for r in 0..h {
                    grads.a_score[r] += ds * t[r];
                    // u = atanh-preimage; d_u = ds * a_score[r] * (1 - t^2)
                    let du = ds * params.a_score[r] * (1.0 - t[r] * t[r]);
                    if du == 0.0 {
                        continue;
                    }
                    du_total[r] += du;
                    let row = r * 2 * width;
                    let wg_h = &mut grads.w_score[row + width..row + 2 * width];
                    let w_h = &params.w_score[row + width..row + 2 * width];
                    for j in 0..width {
                        wg_h[j] += du * ht[j];
                        d_h_tilde[l][j] += w_h[j] * du;
                    }
                }
            }
            for r in 0..h {
                let du = du_total[r];
                if du == 0.0 {
                    continue;
                }
                let row = r * 2 * width;
                let wg_ctx = &mut grads.w_score[row..row + width];
                let w_ctx = &params.w_score[row..row + width];
                for j in 0..width {
                    wg_ctx[j] += du * node.h_ctx[j];
                    d_h_ctx[j] += w_ctx[j] * du;
                }
            }
        }

        // Consensus profile backward.
        if ablation.no_consensus {
            // profile was the plain mean of gated scales
            let inv = 1.0 / n_layers as f64;
            for dht in d_h_tilde.iter_mut() {
                for j in 0..width {
                    dht[j] += inv * d_h_ctx[j];
                }
            }
        } else {
            // h_ctx = s / |s| (zero when s = 0)
            let mut d_s = vec![0.0; width];
            if node.s_norm > 0.0 {
                let proj: f64 = node.h_ctx.iter().zip(&d_h_ctx).map(|(c, g)| c * g).sum();
                for j in 0..width {
                    d_s[j] = (d_h_ctx[j] - node.h_ctx[j] * proj) / node.s_norm;
                }
            }
            // s = sum_l (w_tau[l] ⊙ h_tilde_l + b_tau[l] broadcast over blades)
            for l in 0..n_layers {
                let ht = &node.h_tilde[l];
                let w = &params.w_tau[l];
                let gw = &mut grads.w_tau[l];
                let gb = &mut grads.b_tau[l];
                let dht = &mut d_h_tilde[l];
                for ch in 0..params.d {
                    let base = ch * params.dim;
                    let mut gw_acc = 0.0;
                    let mut gb_acc = 0.0;
                    for blade in 0..params.dim {
                        let j = base + blade;
                        gw_acc += d_s[j] * ht[j];
                        gb_acc += d_s[j];
                        dht[j] += w[ch] * d_s[j];
                    }
                    gw[ch] += gw_acc;
                    gb[ch] += gb_acc;
                }
            }
        }

        // Energy gate backward (gates constant under the ablation).
        if !ablation.no_energy {
            for l in 0..n_layers {
                let raw = &node.raw[l];
                let dht = &d_h_tilde[l];
                let alpha = &node.alpha[l];
                let norm_e = &node.norm_energies[l];
                for c in 0..n_ch {
                    let mut d_alpha = 0.0;
                    for &off in layout.mask_offsets(c) {
                        d_alpha += dht[off] * raw[off];
                    }
                    let d_pre = d_alpha * alpha[c] * (1.0 - alpha[c]);
                    if d_pre == 0.0 {
                        continue;
                    }
                    grads.b_gate[c] += d_pre;
                    let grow = &mut grads.w_gate[c * n_ch..(c + 1) * n_ch];
                    for j in 0..n_ch {
                        grow[j] += d_pre * norm_e[j];
                    }
                }
            }
        }
    }
    Ok(grads)
}
