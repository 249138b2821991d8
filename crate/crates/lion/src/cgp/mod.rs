//! Training-free Clifford geometric propagation.
//!
//! The alignment phase: lift raw per-modality features onto grade-1 axes of
//! Cl(K,0) ([`lift`]), derive per-edge geometry — a curvature bivector, a unit
//! transport rotor and a decaying geometric potential — from the lifted states
//! ([`edge_geometry`]), row-normalize the potentials
//! ([`normalize_potentials`]), then run damped potential-gated parallel
//! transport for L steps, caching every scale ([`propagate`]).
//!
//! No parameters are learned here; rotors and potentials are computed once
//! from `H^(0)` and frozen. Everything is a pure function of its inputs, so
//! reruns are bit-identical.

pub mod cache;
pub mod spectrum;

use crate::clifford::{bivector_exp, BladeTable, Multivector, MultivectorBatch, Rotor};
use crate::error::{LionError, Result};
use crate::mag::{Csr, MagDataset};

/// Below this bivector norm the rotor formula divides by ~0; zero curvature
/// means no rotation, so the identity rotor is substituted.
pub const ROTOR_DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Potentials are clamped above this floor: the decay kernel underflows to
/// exactly 0.0 once the energy ratio exceeds ~745, which would break the
/// strictly-positive contract and the row normalization.
pub const PHI_FLOOR: f64 = 1e-300;

/// Default stability constant in the potential denominator.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// How the rotor exponent is scaled by the curvature magnitude.
///
/// `Squared` is the default `exp(-B / (2 |B|^2))`; `Linear` divides by
/// `2 |B|` instead, giving a bounded rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotorAngleMode {
    Squared,
    Linear,
}

impl std::fmt::Display for RotorAngleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RotorAngleMode::Squared => write!(f, "squared"),
            RotorAngleMode::Linear => write!(f, "linear"),
        }
    }
}

impl std::str::FromStr for RotorAngleMode {
    type Err = LionError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(RotorAngleMode::Squared),
            "linear" => Ok(RotorAngleMode::Linear),
            other => Err(LionError::Argument(format!(
                "rotor angle mode {other:?}: expected \"squared\" or \"linear\""
            ))),
        }
    }
}

/// Settings of the propagation phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CgpConfig {
    /// Propagation depth L.
    pub depth: usize,
    /// Damping of the convex update; 1.0 is the pure fixed-point iteration.
    pub damping: f64,
    /// Stability constant in the potential denominator.
    pub epsilon: f64,
    pub rotor_angle_mode: RotorAngleMode,
    /// Run the unscaled update (residual plus full neighbor sum)
    /// instead of the convex form.
    pub literal_eq3: bool,
}

impl Default for CgpConfig {
    fn default() -> Self {
        CgpConfig {
            depth: 5,
            damping: 0.5,
            epsilon: DEFAULT_EPSILON,
            rotor_angle_mode: RotorAngleMode::Squared,
            literal_eq3: false,
        }
    }
}

impl CgpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.damping && self.damping <= 1.0) {
            return Err(LionError::Config(format!(
                "damping {} not in (0, 1]",
                self.damping
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(LionError::Config(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lifting
// ---------------------------------------------------------------------------

/// Lifts raw features into the Clifford manifold: channels `[0, d_1)` carry
/// modality 1 in the e_1 coefficient, channels `[d_1, d_1+d_2)` modality 2 in
/// e_2, and so on; every other coefficient starts at zero. Each node is then
/// scaled to unit Clifford norm (all-zero nodes are left untouched).
pub fn lift(ds: &MagDataset, table: &BladeTable) -> Result<Vec<MultivectorBatch>> {
    if ds.n_modalities() != table.k() {
        return Err(LionError::Config(format!(
            "dataset has {} modalities but the algebra was built for K={}",
            ds.n_modalities(),
            table.k()
        )));
    }
    let n = ds.n_nodes();
    let mut states = Vec::with_capacity(n);
    for u in 0..n {
        let mut state = MultivectorBatch::zero(ds.feature_dims.clone(), table)?;
        let mut offset = 0;
        for m in 0..table.k() {
            let blade = table.vector_index(m);
            for (j, &x) in ds.feature_row(m, u).iter().enumerate() {
                state.set(offset + j, blade, x);
            }
            offset += ds.feature_dims[m];
        }
        let norm = state.clifford_norm();
        if norm > 0.0 {
            state.scale_in_place(1.0 / norm);
        }
        states.push(state);
    }
    Ok(states)
}

// ---------------------------------------------------------------------------
// Edge geometry
// ---------------------------------------------------------------------------

/// Per-edge transport geometry, aligned with the CSR position of each
/// directed edge: curvature bivector `B_uv`, unit rotor `R_uv`, raw potential
/// `phi` in (0, 1] and its row-normalized form `phi_norm`.
#[derive(Debug, Clone)]
pub struct EdgeGeometry {
    pub epsilon: f64,
    pub rotor_angle_mode: RotorAngleMode,
    pub bivectors: Vec<Multivector>,
    pub rotors: Vec<Rotor>,
    pub phi: Vec<f64>,
    pub phi_norm: Vec<f64>,
}

/// Sum of both endpoints' channels at the same within-block position.
///
/// The edge product contracts the two states position by position: position j
/// pairs modality-1 channel j with modality-2 channel j (shorter blocks pad
/// with zero), so the grade-0 part collects the intra-modality projections
/// and the grade-2 part the cross-modality wedge — the geometric product of
/// the nodes' vector-valued attribute multivectors.
fn overlay_channel(state: &MultivectorBatch, pos: usize, table: &BladeTable) -> Multivector {
    let mut mv = Multivector::zero(table);
    let mut offset = 0;
    for &block in state.blocks() {
        if pos < block {
            for blade in 0..table.dim() {
                let c = state.get(offset + pos, blade);
                if c != 0.0 {
                    mv.set_coeff(blade, mv.coeff(blade) + c);
                }
            }
        }
        offset += block;
    }
    mv
}

/// Builds rotors and raw potentials for every directed edge from the lifted
/// states. `phi_norm` is left zero; call [`normalize_potentials`] next.
pub fn edge_geometry(
    states: &[MultivectorBatch],
    ds: &MagDataset,
    table: &BladeTable,
    epsilon: f64,
    rotor_angle_mode: RotorAngleMode,
) -> Result<EdgeGeometry> {
    if epsilon <= 0.0 {
        return Err(LionError::Config(format!("epsilon {epsilon} must be positive")));
    }
    let csr = &ds.csr;
    let nnz = csr.nnz();
    let overlay_len = ds.feature_dims.iter().copied().max().unwrap_or(0);
    let mut bivectors = Vec::with_capacity(nnz);
    let mut rotors = Vec::with_capacity(nnz);
    let mut phi = Vec::with_capacity(nnz);
    for u in 0..csr.n_nodes() {
        for &v in csr.neighbors(u) {
            let mut scalar_sq = 0.0;
            let mut bivector_sq = 0.0;
            let mut edge_bivector = Multivector::zero(table);
            for pos in 0..overlay_len {
                let hu = overlay_channel(&states[u], pos, table);
                let hv = overlay_channel(&states[v], pos, table);
                let p = table.geometric_product(&hu, &hv)?;
                scalar_sq += p.coeff(0) * p.coeff(0);
                let p2 = p.grade_project(2, table)?;
                let b = p2.clifford_norm();
                bivector_sq += b * b;
                edge_bivector = edge_bivector.add(&p2);
            }
            if !scalar_sq.is_finite() || !bivector_sq.is_finite() || !edge_bivector.is_finite() {
                return Err(LionError::Numeric(format!(
                    "non-finite geometric product on edge ({u}, {v})"
                )));
            }
            let scalar_energy = scalar_sq.sqrt();
            let p = (-bivector_sq / (scalar_energy + epsilon)).exp().max(PHI_FLOOR);
            phi.push(p);

            let b_norm = edge_bivector.clifford_norm();
            let rotor = if b_norm > ROTOR_DEGENERACY_THRESHOLD {
                let denom = match rotor_angle_mode {
                    RotorAngleMode::Squared => 2.0 * b_norm * b_norm,
                    RotorAngleMode::Linear => 2.0 * b_norm,
                };
                bivector_exp(&edge_bivector.scaled(-1.0 / denom), table)?
            } else {
                Rotor::identity(table)
            };
            bivectors.push(edge_bivector);
            rotors.push(rotor);
        }
    }
    Ok(EdgeGeometry {
        epsilon,
        rotor_angle_mode,
        bivectors,
        rotors,
        phi,
        phi_norm: vec![0.0; nnz],
    })
}

/// Row-normalizes the potentials over each node's neighborhood so that
/// `sum_{v in N(u)} phi_norm(u, v) = 1`; isolated nodes keep an empty row.
pub fn normalize_potentials(geo: &mut EdgeGeometry, csr: &Csr) {
    for u in 0..csr.n_nodes() {
        let range = csr.row_range(u);
        let total: f64 = geo.phi[range.clone()].iter().sum();
        if total > 0.0 {
            for pos in range {
                geo.phi_norm[pos] = geo.phi[pos] / total;
            }
        }
    }
}

/// Convenience: geometry with potentials already normalized.
pub fn build_geometry(
    states: &[MultivectorBatch],
    ds: &MagDataset,
    table: &BladeTable,
    epsilon: f64,
    rotor_angle_mode: RotorAngleMode,
) -> Result<EdgeGeometry> {
    let mut geo = edge_geometry(states, ds, table, epsilon, rotor_angle_mode)?;
    normalize_potentials(&mut geo, &ds.csr);
    Ok(geo)
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

/// The cached sequence of node states `H^(0..L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationStack {
    /// `layers[l][u]` is node u at scale l; `layers.len() == depth + 1`.
    pub layers: Vec<Vec<MultivectorBatch>>,
    pub depth: usize,
    pub damping: f64,
    pub k: usize,
    pub d: usize,
}

impl PropagationStack {
    pub fn n_nodes(&self) -> usize {
        self.layers.first().map_or(0, |l| l.len())
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }
}

/// Runs L steps of potential-gated parallel transport:
///
/// ```text
/// H_u^(l) = (1 - alpha) H_u^(l-1) + alpha * sum_v phi_norm(u,v) R_uv H_v^(l-1) R_uv~
/// ```
///
/// (or the unscaled residual-plus-sum form under `literal_eq3`). Isolated
/// nodes carry their state forward unchanged. Rotors and potentials stay
/// frozen at their `H^(0)` values; neighbor sums run in fixed CSR order so
/// results are bit-reproducible.
pub fn propagate(
    h0: &[MultivectorBatch],
    geo: &EdgeGeometry,
    csr: &Csr,
    table: &BladeTable,
    cfg: &CgpConfig,
) -> Result<PropagationStack> {
    cfg.validate()?;
    let n = csr.n_nodes();
    if h0.len() != n {
        return Err(LionError::Dimension(format!(
            "propagate: {} states for {} nodes",
            h0.len(),
            n
        )));
    }
    let d = h0.first().map_or(0, |s| s.channels());

    // Transport matrices per directed edge: one blade-space matrix per rotor,
    // applied to all d channels at once.
    let transports: Vec<Vec<f64>> = geo
        .rotors
        .iter()
        .map(|r| r.sandwich_matrix(table))
        .collect::<Result<_>>()?;

    let mut layers = Vec::with_capacity(cfg.depth + 1);
    layers.push(h0.to_vec());
    for l in 1..=cfg.depth {
        let prev = &layers[l - 1];
        let mut next = Vec::with_capacity(n);
        for u in 0..n {
            let acc = if csr.degree(u) == 0 {
                // Isolated node: state carried forward unchanged.
                prev[u].clone()
            } else {
                let mut sum = prev[u].scaled(0.0);
                for (pos, &v) in csr.row_range(u).zip(csr.neighbors(u)) {
                    let transported = prev[v].apply_blade_matrix(&transports[pos]);
                    sum.axpy_in_place(geo.phi_norm[pos], &transported);
                }
                if cfg.literal_eq3 {
                    let mut out = prev[u].clone();
                    out.axpy_in_place(1.0, &sum);
                    out
                } else {
                    let mut out = prev[u].scaled(1.0 - cfg.damping);
                    out.axpy_in_place(cfg.damping, &sum);
                    out
                }
            };
            if !acc.is_finite() {
                return Err(LionError::Numeric(format!(
                    "non-finite state for node {u} at layer {l}"
                )));
            }
            debug_assert_eq!(acc.channels(), d);
            next.push(acc);
        }
        layers.push(next);
    }
    Ok(PropagationStack {
        layers,
        depth: cfg.depth,
        damping: cfg.damping,
        k: table.k(),
        d,
    })
}

// ---------------------------------------------------------------------------
// Dirichlet energy
// ---------------------------------------------------------------------------

/// Potential-gated Clifford Dirichlet energy:
/// `1/2 * sum over directed edges of phi(u,v) * |H_u - R_uv H_v R_uv~|^2`,
/// using the raw (un-normalized) potentials.
pub fn dirichlet_energy(
    states: &[MultivectorBatch],
    geo: &EdgeGeometry,
    csr: &Csr,
    table: &BladeTable,
) -> Result<f64> {
    let mut total = 0.0;
    for u in 0..csr.n_nodes() {
        for (pos, &v) in csr.row_range(u).zip(csr.neighbors(u)) {
            let transported = geo.rotors[pos].sandwich_batch(&states[v], table)?;
            let diff = states[u].sub(&transported);
            let norm = diff.clifford_norm();
            total += geo.phi[pos] * norm * norm;
        }
    }
    Ok(0.5 * total)
}

/// Per-layer Dirichlet energies of a propagation stack.
pub fn energy_trace(
    stack: &PropagationStack,
    geo: &EdgeGeometry,
    csr: &Csr,
    table: &BladeTable,
) -> Result<Vec<f64>> {
    stack
        .layers
        .iter()
        .map(|states| dirichlet_energy(states, geo, csr, table))
        .collect()
}
