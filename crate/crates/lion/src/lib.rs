//! Training-free Clifford geometric propagation with a learnable adaptive
//! holographic aggregation head, for multimodal-attributed graphs.
//!
//! The pipeline is decoupled into two phases:
//!
//! 1. **Alignment (no parameters).** Raw per-modality features are lifted
//!    onto orthogonal grade-1 axes of the Clifford algebra Cl(K,0)
//!    ([`cgp::lift`]). Each edge gets a curvature bivector, a unit transport
//!    rotor and a decaying geometric potential from the endpoints' geometric
//!    product ([`cgp::edge_geometry`]); damped potential-gated parallel
//!    transport then produces a cached stack of node states at every depth
//!    ([`cgp::propagate`]). This is a one-time precompute: each step descends
//!    the potential-gated Dirichlet energy ([`cgp::dirichlet_energy`]).
//!
//! 2. **Fusion (learned).** The head gates (grade x modality-block)
//!    interaction channels by their energies, forms a normalized consensus
//!    profile over all depths, attends each depth against that profile, and
//!    projects the weighted sum to a task representation
//!    ([`aha::forward::forward`]), with hand-derived analytic gradients
//!    ([`aha::backward::backward`]) driving Adam ([`train`]).
//!
//! [`mag`] holds the dataset model, a stochastic-block-model generator with
//! cross-modal structure, the corruption utilities and the on-disk
//! containers; [`verify`] bundles the property checks (algebra axioms,
//! isometries, energy decay against the dense spectral oracle, perturbation
//! stability, gradient finite differences, gate noise suppression).
//!
//! Everything is plain `f64`, single-threaded, and a deterministic function
//! of (configuration, seed).

pub mod aha;
pub mod cgp;
pub mod clifford;
pub mod error;
pub mod mag;
pub mod rng;
pub mod train;
pub mod verify;
