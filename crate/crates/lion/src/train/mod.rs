//! Training loop, task orchestration and the module-variant (ablation)
//! wiring.
//!
//! Training is full-batch: the stack is precomputed, so one epoch is a head
//! forward over every node, a task loss over the train split, the analytic
//! backward, and one optimizer step over the head-plus-task parameters.
//! Everything is a deterministic function of (config, seed).

pub mod adam;
pub mod baseline;
pub mod kmeans;
pub mod loss;
pub mod metrics;
pub mod retrieval;

use crate::aha::backward::backward;
use crate::aha::forward::{forward, AhaAblation};
use crate::aha::{init_params, AhaDims, AhaParams, InteractionLayout};
use crate::cgp::{
    build_geometry, lift, propagate, CgpConfig, EdgeGeometry, PropagationStack,
};
use crate::clifford::{BladeTable, Rotor};
use crate::error::{LionError, Result};
use crate::mag::MagDataset;
use crate::rng::Rng;

use adam::{AdamConfig, AdamState};
use loss::{classification_loss, link_loss, sample_negative_pairs, LinearHead};
use metrics::pessimistic_rank;

// ---------------------------------------------------------------------------
// Task and training configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    NodeClassification,
    LinkPrediction,
    NodeClustering,
    ModalityRetrieval,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Task::NodeClassification => "node_classification",
            Task::LinkPrediction => "link_prediction",
            Task::NodeClustering => "node_clustering",
            Task::ModalityRetrieval => "modality_retrieval",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Task {
    type Err = LionError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node_classification" => Ok(Task::NodeClassification),
            "link_prediction" => Ok(Task::LinkPrediction),
            "node_clustering" => Ok(Task::NodeClustering),
            "modality_retrieval" => Ok(Task::ModalityRetrieval),
            other => Err(LionError::Argument(format!("unknown task {other:?}"))),
        }
    }
}

/// Downstream task settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task: Task,
    /// Fused representation width.
    pub d_f: usize,
    /// Attention hidden width.
    pub h: usize,
    /// Negatives per positive for link training.
    pub negative_ratio: usize,
    /// Cluster count; 0 means "use the label count".
    pub n_clusters: usize,
    pub hits_k: usize,
    /// Candidate-set size for link ranking.
    pub n_candidates: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            task: Task::NodeClassification,
            d_f: 64,
            h: 64,
            negative_ratio: 1,
            n_clusters: 0,
            hits_k: 3,
            n_candidates: 100,
        }
    }
}

/// The five module variants, plus the full model when all are false.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AblationFlags {
    pub no_rotor: bool,
    pub no_potential: bool,
    pub no_energy: bool,
    pub no_consensus: bool,
    pub no_scale: bool,
}

impl AblationFlags {
    pub fn aha(&self) -> AhaAblation {
        AhaAblation {
            no_energy: self.no_energy,
            no_consensus: self.no_consensus,
            no_scale: self.no_scale,
        }
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.no_rotor {
            parts.push("no_rotor");
        }
        if self.no_potential {
            parts.push("no_potential");
        }
        if self.no_energy {
            parts.push("no_energy");
        }
        if self.no_consensus {
            parts.push("no_consensus");
        }
        if self.no_scale {
            parts.push("no_scale");
        }
        if parts.is_empty() {
            "full".to_string()
        } else {
            parts.join("+")
        }
    }

    /// Parses a single variant name as used by `--ablate`.
    pub fn from_variant(name: &str) -> Result<Self> {
        let mut f = AblationFlags::default();
        match name {
            "rotor" => f.no_rotor = true,
            "potential" => f.no_potential = true,
            "energy" => f.no_energy = true,
            "consensus" => f.no_consensus = true,
            "scale" => f.no_scale = true,
            other => {
                return Err(LionError::Argument(format!(
                    "unknown ablation {other:?}; expected rotor|potential|energy|consensus|scale"
                )))
            }
        }
        Ok(f)
    }

    pub fn all_variants() -> Vec<(String, AblationFlags)> {
        let mut out = vec![("full".to_string(), AblationFlags::default())];
        for name in ["rotor", "potential", "energy", "consensus", "scale"] {
            out.push((format!("no_{name}"), AblationFlags::from_variant(name).unwrap()));
        }
        out
    }
}

/// Optimizer and loop settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Recorded for provenance; training is full-batch since the stack is
    /// precomputed.
    pub batch_size: usize,
    pub seed: u64,
    /// Early-stop patience in epochs; 0 disables early stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub ablation: AblationFlags,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            lr: 5e-3,
            weight_decay: 1e-5,
            batch_size: 512,
            seed: 0,
            patience: 0,
            beta1: 0.9,
            beta2: 0.999,
            ablation: AblationFlags::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(LionError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            weight_decay: self.weight_decay,
        }
    }
}

// ---------------------------------------------------------------------------
// CGP-side ablation and stack preparation
// ---------------------------------------------------------------------------

/// Applies the propagation-side variants to a built geometry: `no_rotor`
/// replaces every transport with the identity, `no_potential` spreads each
/// row's normalized potential uniformly over its neighbors.
pub fn apply_cgp_ablation(
    geo: &mut EdgeGeometry,
    flags: AblationFlags,
    ds: &MagDataset,
    table: &BladeTable,
) {
    if flags.no_rotor {
        for r in geo.rotors.iter_mut() {
            *r = Rotor::identity(table);
        }
    }
    if flags.no_potential {
        for u in 0..ds.n_nodes() {
            let deg = ds.csr.degree(u);
            if deg > 0 {
                for pos in ds.csr.row_range(u) {
                    geo.phi_norm[pos] = 1.0 / deg as f64;
                }
            }
        }
    }
}

/// Lift, geometry (with ablations applied), propagation.
pub fn prepare_stack(
    ds: &MagDataset,
    table: &BladeTable,
    cfg: &CgpConfig,
    flags: AblationFlags,
) -> Result<(PropagationStack, EdgeGeometry)> {
    let states = lift(ds, table)?;
    let mut geo = build_geometry(&states, ds, table, cfg.epsilon, cfg.rotor_angle_mode)?;
    apply_cgp_ablation(&mut geo, flags, ds, table);
    let stack = propagate(&states, &geo, &ds.csr, table, cfg)?;
    Ok((stack, geo))
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// One line of the per-epoch history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy for classification, MRR for link prediction.
    pub val_metric: f64,
}

/// A trained head plus its trajectory.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: AhaParams,
    pub head: LinearHead,
    pub history: Vec<EpochRow>,
    pub best_val: f64,
}

fn optimizer_step(
    params: &mut AhaParams,
    head: &mut LinearHead,
    grads: &AhaParams,
    d_w: &[f64],
    d_b: &[f64],
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    let mut blocks = params.blocks_mut();
    let mut refs: Vec<&mut [f64]> = blocks.iter_mut().map(|(_, b)| &mut **b).collect();
    refs.push(&mut head.w);
    refs.push(&mut head.b);
    let gblocks = grads.blocks();
    let mut grefs: Vec<&[f64]> = gblocks.iter().map(|(_, b)| *b).collect();
    grefs.push(d_w);
    grefs.push(d_b);
    state.step(&mut refs, &grefs, cfg);
}

fn adam_state_for(params: &AhaParams, head: &LinearHead) -> AdamState {
    let mut sizes: Vec<usize> = params.blocks().iter().map(|(_, b)| b.len()).collect();
    sizes.push(head.w.len());
    sizes.push(head.b.len());
    AdamState::new(&sizes)
}

/// Trains the head for node classification with softmax cross-entropy on the
/// train split, tracking validation accuracy per epoch.
pub fn train_node_classification(
    stack: &PropagationStack,
    layout: &InteractionLayout,
    ds: &MagDataset,
    task: &TaskSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| LionError::Argument("node classification needs labels".into()))?;
    let n_classes = ds.n_classes().max(2);
    let dims = AhaDims::from_layout(layout, stack.n_layers(), task.d_f, task.h);
    let mut params = init_params(cfg.seed, dims);
    let mut head = LinearHead::init(cfg.seed, task.d_f, n_classes);
    let mut state = adam_state_for(&params, &head);
    let adam_cfg = cfg.adam();
    let ablation = cfg.ablation.aha();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::NEG_INFINITY;
    let mut best = (params.clone(), head.clone());
    let mut since_best = 0usize;
    for epoch in 0..cfg.epochs {
        let (z, tape) = forward(stack, &params, layout, ablation)?;
        let out = classification_loss(&z, &ds.splits.train, labels, &head)?;
        let grads = backward(&tape, &params, layout, &out.d_z)?;
        optimizer_step(&mut params, &mut head, &grads, &out.d_w, &out.d_b, &mut state, &adam_cfg);

        let (z_eval, _) = forward(stack, &params, layout, ablation)?;
        let val_acc = split_accuracy(&z_eval, &ds.splits.val, labels, &head)?;
        history.push(EpochRow {
            epoch,
            train_loss: out.loss,
            val_metric: val_acc,
        });
        if val_acc > best_val {
            best_val = val_acc;
            best = (params.clone(), head.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
    }
    let (params, head) = if cfg.epochs == 0 { (params, head) } else { best };
    Ok(TrainOutcome {
        params,
        head,
        history,
        best_val: if cfg.epochs == 0 { 0.0 } else { best_val },
    })
}

/// Accuracy of the head over a node split.
pub fn split_accuracy(
    z: &[Vec<f64>],
    split: &[usize],
    labels: &[usize],
    head: &LinearHead,
) -> Result<f64> {
    if split.is_empty() {
        return Ok(0.0);
    }
    let preds: Vec<usize> = split.iter().map(|&u| head.predict(&z[u])).collect();
    let truth: Vec<usize> = split.iter().map(|&u| labels[u]).collect();
    metrics::accuracy(&preds, &truth)
}

/// Trains the head for link prediction with sampled negatives, tracking
/// validation MRR per epoch.
pub fn train_link_prediction(
    stack: &PropagationStack,
    layout: &InteractionLayout,
    ds: &MagDataset,
    task: &TaskSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if task.negative_ratio == 0 {
        return Err(LionError::Argument("link prediction needs negative_ratio >= 1".into()));
    }
    let edge_splits = ds
        .edge_splits
        .as_ref()
        .ok_or_else(|| LionError::Argument("link prediction needs edge splits".into()))?;
    let dims = AhaDims::from_layout(layout, stack.n_layers(), task.d_f, task.h);
    let mut params = init_params(cfg.seed, dims);
    // dot-product scoring has no classifier head; keep a placeholder so the
    // optimizer layout stays uniform
    let mut head = LinearHead {
        in_dim: 0,
        out_dim: 0,
        w: Vec::new(),
        b: Vec::new(),
    };
    let mut state = adam_state_for(&params, &head);
    let adam_cfg = cfg.adam();
    let ablation = cfg.ablation.aha();
    let sampler_root = Rng::new(cfg.seed).fork(14);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::NEG_INFINITY;
    let mut best = params.clone();
    let mut since_best = 0usize;
    for epoch in 0..cfg.epochs {
        let (z, tape) = forward(stack, &params, layout, ablation)?;
        let mut rng = sampler_root.fork(epoch as u64);
        let negatives = sample_negative_pairs(
            &ds.csr,
            edge_splits.train.len() * task.negative_ratio,
            &mut rng,
        );
        let out = link_loss(&z, &edge_splits.train, &negatives)?;
        let grads = backward(&tape, &params, layout, &out.d_z)?;
        optimizer_step(&mut params, &mut head, &grads, &[], &[], &mut state, &adam_cfg);

        let (z_eval, _) = forward(stack, &params, layout, ablation)?;
        let (val_mrr, _) = rank_edges(&z_eval, &edge_splits.val, ds, task, cfg.seed)?;
        history.push(EpochRow {
            epoch,
            train_loss: out.loss,
            val_metric: val_mrr,
        });
        if val_mrr > best_val {
            best_val = val_mrr;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
    }
    let params = if cfg.epochs == 0 { params } else { best };
    Ok(TrainOutcome {
        params,
        head,
        history,
        best_val: if cfg.epochs == 0 { 0.0 } else { best_val },
    })
}

/// Owns one classification training state and advances it an epoch at a
/// time; used for per-epoch timing measurements and custom loops.
pub struct EpochRunner<'a> {
    stack: &'a PropagationStack,
    layout: &'a InteractionLayout,
    labels: &'a [usize],
    batch: Vec<usize>,
    ablation: AhaAblation,
    adam_cfg: AdamConfig,
    params: AhaParams,
    head: LinearHead,
    state: AdamState,
}

impl<'a> EpochRunner<'a> {
    /// One full-batch epoch: forward, loss, backward, optimizer step.
    /// Returns the train loss.
    pub fn step(&mut self) -> Result<f64> {
        let (z, tape) = forward(self.stack, &self.params, self.layout, self.ablation)?;
        let out = classification_loss(&z, &self.batch, self.labels, &self.head)?;
        let grads = backward(&tape, &self.params, self.layout, &out.d_z)?;
        optimizer_step(
            &mut self.params,
            &mut self.head,
            &grads,
            &out.d_w,
            &out.d_b,
            &mut self.state,
            &self.adam_cfg,
        );
        Ok(out.loss)
    }

    pub fn params(&self) -> &AhaParams {
        &self.params
    }
}

/// Builds an [`EpochRunner`] over a dataset's train split.
pub fn epoch_runner<'a>(
    stack: &'a PropagationStack,
    layout: &'a InteractionLayout,
    ds: &'a MagDataset,
    task: &TaskSpec,
    cfg: &TrainConfig,
) -> Result<EpochRunner<'a>> {
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| LionError::Argument("epoch runner needs labels".into()))?;
    let n_classes = ds.n_classes().max(2);
    let dims = AhaDims::from_layout(layout, stack.n_layers(), task.d_f, task.h);
    let params = init_params(cfg.seed, dims);
    let head = LinearHead::init(cfg.seed, task.d_f, n_classes);
    let state = adam_state_for(&params, &head);
    Ok(EpochRunner {
        stack,
        layout,
        labels,
        batch: ds.splits.train.clone(),
        ablation: cfg.ablation.aha(),
        adam_cfg: cfg.adam(),
        params,
        head,
        state,
    })
}

/// Ranks each positive edge's target against a seeded candidate set of
/// non-neighbors and returns (MRR, Hits@k).
pub fn rank_edges(
    z: &[Vec<f64>],
    positives: &[(usize, usize)],
    ds: &MagDataset,
    task: &TaskSpec,
    seed: u64,
) -> Result<(f64, f64)> {
    if positives.is_empty() {
        return Ok((0.0, 0.0));
    }
    let n = ds.n_nodes();
    let mut ranks = Vec::with_capacity(positives.len());
    let mut rng = Rng::new(seed).fork(15);
    for &(u, v) in positives {
        let target = loss::link_score(&z[u], &z[v]);
        let mut others = Vec::with_capacity(task.n_candidates);
        let mut guard = 0;
        while others.len() < task.n_candidates && guard < task.n_candidates * 1000 {
            guard += 1;
            let w = rng.below(n);
            if w != u && w != v && !ds.csr.has_edge(u, w) {
                others.push(loss::link_score(&z[u], &z[w]));
            }
        }
        ranks.push(pessimistic_rank(target, &others));
    }
    Ok((metrics::mrr(&ranks)?, metrics::hits_at_k(&ranks, task.hits_k)?))
}

// ---------------------------------------------------------------------------
// Modality probes for retrieval
// ---------------------------------------------------------------------------

/// Runs the full pipeline on a copy of the dataset where every modality
/// except `keep` is zeroed, then applies the trained head: the cross-modal
/// probe used for retrieval evaluation.
pub fn modality_probe(
    ds: &MagDataset,
    keep: usize,
    table: &BladeTable,
    cgp_cfg: &CgpConfig,
    flags: AblationFlags,
    params: &AhaParams,
    layout: &InteractionLayout,
) -> Result<Vec<Vec<f64>>> {
    if keep >= ds.n_modalities() {
        return Err(LionError::Argument(format!(
            "modality {keep} out of range for {} modalities",
            ds.n_modalities()
        )));
    }
    let mut probe = ds.clone();
    for m in 0..probe.n_modalities() {
        if m != keep {
            probe.features[m].fill(0.0);
        }
    }
    let (stack, _) = prepare_stack(&probe, table, cgp_cfg, flags)?;
    let (z, _) = forward(&stack, params, layout, flags.aha())?;
    Ok(z)
}
