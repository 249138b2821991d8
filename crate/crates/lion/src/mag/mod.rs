//! Multimodal-attributed graph datasets.
//!
//! A [`MagDataset`] couples one undirected topology (CSR, symmetric, no
//! self-loops) with K per-modality feature matrices, optional labels, node
//! splits and optional positive-edge splits for link prediction. Datasets are
//! immutable after construction; corruption returns a new dataset.
//!
//! [`SynthConfig`] drives a stochastic-block-model generator whose class
//! evidence can be split across modalities with a controllable cross-modal
//! noise correlation, standing in for real embedding dumps.

pub mod io;

use crate::error::{LionError, Result};
use crate::rng::Rng;

// ---------------------------------------------------------------------------
// CSR adjacency
// ---------------------------------------------------------------------------

/// Compressed sparse row adjacency of an undirected simple graph.
///
/// Every stored (u, v) has its mirror (v, u); self-loops are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Csr {
    /// Builds a symmetric CSR from undirected edges. Duplicate edges collapse;
    /// self-loops are an error.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Csr> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u == v {
                return Err(LionError::Argument(format!("self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(LionError::Argument(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for nbrs in &mut adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            col_idx.extend_from_slice(nbrs);
            row_ptr.push(col_idx.len());
        }
        Ok(Csr { n, row_ptr, col_idx })
    }

    /// Builds directly from raw CSR arrays, validating shape, sortedness,
    /// range, absence of self-loops and symmetry.
    pub fn from_raw(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<Csr> {
        if row_ptr.len() != n + 1 {
            return Err(LionError::Format(format!(
                "csr row_ptr: expected {} entries, got {}",
                n + 1,
                row_ptr.len()
            )));
        }
        if row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(LionError::Format(
                "csr row_ptr: endpoints do not bracket col_idx".into(),
            ));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(LionError::Format("csr row_ptr: not monotonic".into()));
        }
        let csr = Csr { n, row_ptr, col_idx };
        for u in 0..n {
            let nbrs = csr.neighbors(u);
            if nbrs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LionError::Format(format!(
                    "csr col_idx: row {u} not strictly sorted"
                )));
            }
            for &v in nbrs {
                if v >= n {
                    return Err(LionError::Format(format!(
                        "csr col_idx: neighbor {v} of node {u} out of range"
                    )));
                }
                if v == u {
                    return Err(LionError::Format(format!("csr col_idx: self-loop at {u}")));
                }
                if csr.neighbors(v).binary_search(&u).is_err() {
                    return Err(LionError::Format(format!(
                        "csr col_idx: edge ({u}, {v}) has no mirror ({v}, {u})"
                    )));
                }
            }
        }
        Ok(csr)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[u]..self.row_ptr[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_ptr[u + 1] - self.row_ptr[u]
    }

    /// Number of stored directed entries (twice the undirected edge count).
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.nnz() / 2
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// CSR position range of node u's neighbor list.
    pub fn row_range(&self, u: usize) -> std::ops::Range<usize> {
        self.row_ptr[u]..self.row_ptr[u + 1]
    }

    /// Undirected edges with u < v.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_undirected_edges());
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Disjoint train/val/test node index sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Positive edge sets for link prediction (undirected, u < v).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeSplits {
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
}

/// A multimodal-attributed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MagDataset {
    pub csr: Csr,
    /// One row-major `n_nodes x d_m` matrix per modality.
    pub features: Vec<Vec<f64>>,
    pub feature_dims: Vec<usize>,
    pub labels: Option<Vec<usize>>,
    pub splits: Splits,
    pub edge_splits: Option<EdgeSplits>,
}

impl MagDataset {
    pub fn n_nodes(&self) -> usize {
        self.csr.n_nodes()
    }

    pub fn n_modalities(&self) -> usize {
        self.feature_dims.len()
    }

    /// Total channel count d = sum of per-modality dims.
    pub fn total_dim(&self) -> usize {
        self.feature_dims.iter().sum()
    }

    pub fn feature_row(&self, modality: usize, node: usize) -> &[f64] {
        let d = self.feature_dims[modality];
        &self.features[modality][node * d..(node + 1) * d]
    }

    pub fn n_classes(&self) -> usize {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
            .unwrap_or(0)
    }

    /// Validates the structural invariants; used after loads and imports.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.features.len() != self.feature_dims.len() {
            return Err(LionError::Format(
                "features: matrix count does not match feature_dims".into(),
            ));
        }
        for (m, feat) in self.features.iter().enumerate() {
            if feat.len() != n * self.feature_dims[m] {
                return Err(LionError::Format(format!(
                    "features[{m}]: expected {} values, got {}",
                    n * self.feature_dims[m],
                    feat.len()
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(LionError::Format(format!(
                    "labels: expected {n} entries, got {}",
                    labels.len()
                )));
            }
        }
        let mut seen = vec![false; n];
        for (name, set) in [
            ("splits.train", &self.splits.train),
            ("splits.val", &self.splits.val),
            ("splits.test", &self.splits.test),
        ] {
            for &i in set {
                if i >= n {
                    return Err(LionError::Format(format!("{name}: node {i} out of range")));
                }
                if seen[i] {
                    return Err(LionError::Format(format!(
                        "{name}: node {i} appears in more than one split"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(es) = &self.edge_splits {
            for (name, set) in [
                ("edge_splits.train", &es.train),
                ("edge_splits.val", &es.val),
                ("edge_splits.test", &es.test),
            ] {
                for &(u, v) in set {
                    if u >= n || v >= n {
                        return Err(LionError::Format(format!(
                            "{name}: edge ({u}, {v}) out of range"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

/// Stochastic-block-model generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub n_classes: usize,
    /// Modality count (2 or 3).
    pub k: usize,
    /// Per-modality feature dimension.
    pub d_m: Vec<usize>,
    /// Intra-class edge probability.
    pub p_in: f64,
    /// Inter-class edge probability.
    pub p_out: f64,
    /// Fraction of class-discriminative variance per modality; sums to 1.
    pub signal_split: Vec<f64>,
    /// Cross-modal noise correlation in [0, 1].
    pub rho: f64,
    /// Noise standard deviation.
    pub noise_scale: f64,
    /// Phase spacing (radians) between consecutive classes in the
    /// cross-modal plane. Zero draws independent class means per modality;
    /// nonzero modulates one shared magnitude pattern by cos/sin of the
    /// class phase, so class evidence lives in the relative phase of the two
    /// modalities (requires K = 2 and equal d_m).
    pub class_phase: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// The default heterophilous cross-modal benchmark: classes sit 45
    /// degrees apart in the cross-modal phase plane, so the evidence is
    /// split across both modalities and inter-class edges (comparable in
    /// count to intra-class ones) carry strong curvature.
    fn default() -> Self {
        SynthConfig {
            n_nodes: 300,
            n_classes: 4,
            k: 2,
            d_m: vec![8, 8],
            p_in: 0.05,
            p_out: 0.03,
            signal_split: vec![0.5, 0.5],
            rho: 0.2,
            noise_scale: 0.6,
            class_phase: std::f64::consts::FRAC_PI_4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.n_nodes < self.n_classes {
            return Err(LionError::Generation(format!(
                "need at least one node per class ({} nodes, {} classes)",
                self.n_nodes, self.n_classes
            )));
        }
        if self.d_m.len() != self.k || self.signal_split.len() != self.k {
            return Err(LionError::Generation(
                "d_m and signal_split must have one entry per modality".into(),
            ));
        }
        for p in [self.p_in, self.p_out] {
            if !(0.0..=1.0).contains(&p) {
                return Err(LionError::Generation(format!("edge probability {p} not in [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(LionError::Generation(format!("rho {} not in [0, 1]", self.rho)));
        }
        if self.p_in == 0.0 && self.p_out == 0.0 && self.n_nodes > 1 {
            return Err(LionError::Generation(
                "expected degree is zero: p_in and p_out are both 0".into(),
            ));
        }
        if self.class_phase != 0.0 && (self.k != 2 || self.d_m[0] != self.d_m[1]) {
            return Err(LionError::Generation(
                "class_phase needs K = 2 and equal per-modality dims".into(),
            ));
        }
        Ok(())
    }

    /// Class of each node: contiguous, as balanced as possible.
    pub fn class_of(&self, node: usize) -> usize {
        node * self.n_classes / self.n_nodes
    }

    /// Analytic expectation of the homophily ratio (fraction of intra-class
    /// edges) under this block model.
    pub fn expected_homophily(&self) -> f64 {
        let mut sizes = vec![0usize; self.n_classes];
        for u in 0..self.n_nodes {
            sizes[self.class_of(u)] += 1;
        }
        let intra_pairs: f64 = sizes.iter().map(|&s| (s * (s - 1) / 2) as f64).sum();
        let total_pairs = (self.n_nodes * (self.n_nodes - 1) / 2) as f64;
        let inter_pairs = total_pairs - intra_pairs;
        let e_intra = intra_pairs * self.p_in;
        let e_inter = inter_pairs * self.p_out;
        e_intra / (e_intra + e_inter)
    }
}

/// Generates a synthetic MAG: SBM topology plus per-modality features
/// `class_mean + correlated noise`. Deterministic in the seed; node splits
/// default to 60/20/20.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<MagDataset> {
    cfg.validate()?;
    let n = cfg.n_nodes;
    let root = Rng::new(cfg.seed);

    // Topology.
    let mut topo_rng = root.fork(1);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if cfg.class_of(u) == cfg.class_of(v) {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if topo_rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let csr = Csr::from_edges(n, &edges)?;

    // Class means: variance share per modality via sqrt(signal_split).
    // With a nonzero class phase, one shared magnitude pattern is modulated
    // per modality by the class's cross-modal phase, so the discriminative
    // signal sits in the relative phase of the two modalities.
    let mut mean_rng = root.fork(2);
    let mut class_means: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.k);
    if cfg.class_phase != 0.0 {
        let pattern: Vec<f64> = (0..cfg.d_m[0]).map(|_| mean_rng.normal()).collect();
        for m in 0..cfg.k {
            let scale = (2.0 * cfg.signal_split[m]).sqrt();
            class_means.push(
                (0..cfg.n_classes)
                    .map(|c| {
                        let phase = cfg.class_phase * c as f64;
                        let modulation = if m == 0 { phase.cos() } else { phase.sin() };
                        pattern.iter().map(|&r| scale * modulation * r).collect()
                    })
                    .collect(),
            );
        }
    } else {
        for m in 0..cfg.k {
            let scale = cfg.signal_split[m].sqrt();
            class_means.push(
                (0..cfg.n_classes)
                    .map(|_| (0..cfg.d_m[m]).map(|_| scale * mean_rng.normal()).collect())
                    .collect(),
            );
        }
    }

    // Features: shared latent drives the cross-modal noise correlation rho.
    let mut feat_rng = root.fork(3);
    let d_max = cfg.d_m.iter().copied().max().unwrap_or(0);
    let mut features: Vec<Vec<f64>> = cfg.d_m.iter().map(|&d| vec![0.0; n * d]).collect();
    for u in 0..n {
        let class = cfg.class_of(u);
        let shared: Vec<f64> = (0..d_max).map(|_| feat_rng.normal()).collect();
        for m in 0..cfg.k {
            let d = cfg.d_m[m];
            for j in 0..d {
                let noise =
                    cfg.rho.sqrt() * shared[j] + (1.0 - cfg.rho).sqrt() * feat_rng.normal();
                features[m][u * d + j] = class_means[m][class][j] + cfg.noise_scale * noise;
            }
        }
    }

    // Labels and 60/20/20 node splits.
    let labels: Vec<usize> = (0..n).map(|u| cfg.class_of(u)).collect();
    let mut split_rng = root.fork(4);
    let mut order: Vec<usize> = (0..n).collect();
    split_rng.shuffle(&mut order);
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };

    let ds = MagDataset {
        csr,
        features,
        feature_dims: cfg.d_m.clone(),
        labels: Some(labels),
        splits,
        edge_splits: None,
    };
    ds.validate()?;
    Ok(ds)
}

/// Splits edges for link prediction: val/test positives are removed from the
/// stored topology (no message-passing leakage); training positives remain.
pub fn split_edges(ds: &MagDataset, val_frac: f64, test_frac: f64, seed: u64) -> Result<MagDataset> {
    if val_frac < 0.0 || test_frac < 0.0 || val_frac + test_frac >= 1.0 {
        return Err(LionError::Argument(format!(
            "edge split fractions ({val_frac}, {test_frac}) must be nonnegative and sum below 1"
        )));
    }
    let mut edges = ds.csr.undirected_edges();
    let mut rng = Rng::new(seed).fork(5);
    rng.shuffle(&mut edges);
    let n_edges = edges.len();
    let n_val = (n_edges as f64 * val_frac).round() as usize;
    let n_test = (n_edges as f64 * test_frac).round() as usize;
    let val = edges[..n_val].to_vec();
    let test = edges[n_val..n_val + n_test].to_vec();
    let train = edges[n_val + n_test..].to_vec();
    let csr = Csr::from_edges(ds.n_nodes(), &train)?;
    Ok(MagDataset {
        csr,
        features: ds.features.clone(),
        feature_dims: ds.feature_dims.clone(),
        labels: ds.labels.clone(),
        splits: ds.splits.clone(),
        edge_splits: Some(EdgeSplits { train, val, test }),
    })
}

// ---------------------------------------------------------------------------
// Corruption
// ---------------------------------------------------------------------------

/// Sparsity-robustness corruption settings: dropped feature rows are zeroed,
/// dropped edges removed symmetrically.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    /// Per-modality probability of zeroing a node's feature row.
    pub feature_drop_rate: Vec<f64>,
    pub edge_drop_rate: f64,
    pub seed: u64,
}

/// Applies i.i.d. feature and edge dropout, returning a new dataset.
pub fn apply_corruption(ds: &MagDataset, spec: &CorruptionSpec) -> Result<MagDataset> {
    if spec.feature_drop_rate.len() != ds.n_modalities() {
        return Err(LionError::Argument(format!(
            "feature_drop_rate: expected {} rates, got {}",
            ds.n_modalities(),
            spec.feature_drop_rate.len()
        )));
    }
    for &r in spec.feature_drop_rate.iter().chain([&spec.edge_drop_rate]) {
        if !(0.0..=1.0).contains(&r) {
            return Err(LionError::Argument(format!("drop rate {r} not in [0, 1]")));
        }
    }
    let root = Rng::new(spec.seed);
    let n = ds.n_nodes();

    let mut feat_rng = root.fork(6);
    let mut features = ds.features.clone();
    for m in 0..ds.n_modalities() {
        let d = ds.feature_dims[m];
        for u in 0..n {
            if feat_rng.bernoulli(spec.feature_drop_rate[m]) {
                features[m][u * d..(u + 1) * d].fill(0.0);
            }
        }
    }

    let mut edge_rng = root.fork(7);
    let kept: Vec<(usize, usize)> = ds
        .csr
        .undirected_edges()
        .into_iter()
        .filter(|_| !edge_rng.bernoulli(spec.edge_drop_rate))
        .collect();
    let csr = Csr::from_edges(n, &kept)?;

    Ok(MagDataset {
        csr,
        features,
        feature_dims: ds.feature_dims.clone(),
        labels: ds.labels.clone(),
        splits: ds.splits.clone(),
        edge_splits: ds.edge_splits.clone(),
    })
}
