//! Run configuration: defaults, key-value config file, environment, flags.
//!
//! Precedence is file < environment (`LION_<KEY>`) < command-line flags.
//! Unknown keys are rejected wherever they appear, and every resolved value
//! is echoed to `<out>/config.echo` for provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lion::cgp::RotorAngleMode;
use lion::error::{LionError, Result};
use lion::mag::SynthConfig;
use lion::train::{AblationFlags, TaskSpec, Task, TrainConfig};

/// Every tunable of every subcommand, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub dataset: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    // synthetic generation
    pub n_nodes: usize,
    pub n_classes: usize,
    pub k: usize,
    pub d_m: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub signal_split: Vec<f64>,
    pub rho: f64,
    pub noise_scale: f64,
    pub class_phase: f64,
    // corruption applied after generation/import
    pub feature_drop: Vec<f64>,
    pub edge_drop: f64,
    // text import
    pub from_text: Vec<PathBuf>,
    pub edges_file: Option<PathBuf>,
    pub labels_file: Option<PathBuf>,
    // propagation
    pub depth: usize,
    pub damping: f64,
    pub epsilon: f64,
    pub rotor_angle_mode: RotorAngleMode,
    pub literal_eq3: bool,
    // head and tasks
    pub d_f: usize,
    pub h: usize,
    pub negative_ratio: usize,
    pub n_clusters: usize,
    pub hits_k: usize,
    pub n_candidates: usize,
    pub retrieval_direction: String,
    pub edge_val_frac: f64,
    pub edge_test_frac: f64,
    // training
    pub epochs: usize,
    /// Unset means the task default (5e-3; 1e-3 for link prediction).
    pub lr: Option<f64>,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub ablate: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::NodeClassification,
            dataset: None,
            cache: None,
            model: None,
            out: PathBuf::from("lion_out"),
            seed: 0,
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
            feature_drop: Vec::new(),
            edge_drop: 0.0,
            from_text: Vec::new(),
            edges_file: None,
            labels_file: None,
            depth: 5,
            damping: 0.5,
            epsilon: 1e-6,
            rotor_angle_mode: RotorAngleMode::Squared,
            literal_eq3: false,
            d_f: 64,
            h: 64,
            negative_ratio: 1,
            n_clusters: 0,
            hits_k: 3,
            n_candidates: 100,
            retrieval_direction: "both".into(),
            edge_val_frac: 0.1,
            edge_test_frac: 0.1,
            epochs: 100,
            lr: None,
            weight_decay: 1e-5,
            batch_size: 512,
            patience: 0,
            beta1: 0.9,
            beta2: 0.999,
            ablate: Vec::new(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| LionError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| LionError::Config(format!("{key}: cannot parse element {s:?}")))
        })
        .collect()
}

impl RunConfig {
    /// Applies a single `key = value` pair from any source.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "task" => self.task = v.parse()?,
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "cache" => self.cache = Some(PathBuf::from(v)),
            "model" => self.model = Some(PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "n_nodes" => self.n_nodes = parse(key, v)?,
            "n_classes" => self.n_classes = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "d_m" => self.d_m = parse_list(key, v)?,
            "p_in" => self.p_in = parse(key, v)?,
            "p_out" => self.p_out = parse(key, v)?,
            "signal_split" => self.signal_split = parse_list(key, v)?,
            "rho" => self.rho = parse(key, v)?,
            "noise_scale" => self.noise_scale = parse(key, v)?,
            "class_phase" => self.class_phase = parse(key, v)?,
            "feature_drop" => self.feature_drop = parse_list(key, v)?,
            "edge_drop" => self.edge_drop = parse(key, v)?,
            "from_text" => {
                self.from_text = v.split(',').map(|s| PathBuf::from(s.trim())).collect()
            }
            "edges_file" => self.edges_file = Some(PathBuf::from(v)),
            "labels_file" => self.labels_file = Some(PathBuf::from(v)),
            "depth" => self.depth = parse(key, v)?,
            "damping" => self.damping = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "rotor_angle_mode" => self.rotor_angle_mode = v.parse()?,
            "literal_eq3" => self.literal_eq3 = parse(key, v)?,
            "d_f" => self.d_f = parse(key, v)?,
            "h" => self.h = parse(key, v)?,
            "negative_ratio" => self.negative_ratio = parse(key, v)?,
            "n_clusters" => self.n_clusters = parse(key, v)?,
            "hits_k" => self.hits_k = parse(key, v)?,
            "n_candidates" => self.n_candidates = parse(key, v)?,
            "retrieval_direction" => match v {
                "forward" | "backward" | "both" => self.retrieval_direction = v.into(),
                other => {
                    return Err(LionError::Config(format!(
                        "retrieval_direction: {other:?} is not forward|backward|both"
                    )))
                }
            },
            "edge_val_frac" => self.edge_val_frac = parse(key, v)?,
            "edge_test_frac" => self.edge_test_frac = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "lr" => self.lr = Some(parse(key, v)?),
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "beta1" => self.beta1 = parse(key, v)?,
            "beta2" => self.beta2 = parse(key, v)?,
            "ablate" => self.ablate = parse_list(key, v)?,
            other => {
                return Err(LionError::Config(format!("unknown configuration key {other:?}")))
            }
        }
        Ok(())
    }

    /// Parses a `key = value` file (# comments, blank lines allowed).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LionError::Config(format!(
                    "{}: line {}: expected key = value",
                    path.display(),
                    ln + 1
                ))
            })?;
            self.apply(key.trim(), value).map_err(|e| {
                LionError::Config(format!("{}: line {}: {e}", path.display(), ln + 1))
            })?;
        }
        Ok(())
    }

    /// Applies `LION_<KEY>` environment overrides.
    pub fn apply_env(&mut self) -> Result<()> {
        let mut pairs: Vec<(String, String)> = std::env::vars()
            .filter(|(k, _)| k.starts_with("LION_"))
            .collect();
        pairs.sort();
        for (key, value) in pairs {
            let name = key.trim_start_matches("LION_").to_ascii_lowercase();
            self.apply(&name, &value)
                .map_err(|e| LionError::Config(format!("environment {key}: {e}")))?;
        }
        Ok(())
    }

    /// Learning rate with the task-dependent default.
    pub fn effective_lr(&self) -> f64 {
        self.lr.unwrap_or(match self.task {
            Task::LinkPrediction => 1e-3,
            _ => 5e-3,
        })
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            n_nodes: self.n_nodes,
            n_classes: self.n_classes,
            k: self.k,
            d_m: self.d_m.clone(),
            p_in: self.p_in,
            p_out: self.p_out,
            signal_split: self.signal_split.clone(),
            rho: self.rho,
            noise_scale: self.noise_scale,
            class_phase: self.class_phase,
            seed: self.seed,
        }
    }

    pub fn cgp(&self) -> lion::cgp::CgpConfig {
        lion::cgp::CgpConfig {
            depth: self.depth,
            damping: self.damping,
            epsilon: self.epsilon,
            rotor_angle_mode: self.rotor_angle_mode,
            literal_eq3: self.literal_eq3,
        }
    }

    pub fn ablation_flags(&self) -> Result<AblationFlags> {
        let mut flags = AblationFlags::default();
        for name in &self.ablate {
            let f = AblationFlags::from_variant(name)?;
            flags.no_rotor |= f.no_rotor;
            flags.no_potential |= f.no_potential;
            flags.no_energy |= f.no_energy;
            flags.no_consensus |= f.no_consensus;
            flags.no_scale |= f.no_scale;
        }
        Ok(flags)
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec {
            task: self.task,
            d_f: self.d_f,
            h: self.h,
            negative_ratio: self.negative_ratio,
            n_clusters: self.n_clusters,
            hits_k: self.hits_k,
            n_candidates: self.n_candidates,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            lr: self.effective_lr(),
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            seed: self.seed,
            patience: self.patience,
            beta1: self.beta1,
            beta2: self.beta2,
            ablation: self.ablation_flags()?,
        })
    }

    /// All resolved values as sorted `key = value` lines.
    pub fn echo(&self) -> String {
        let mut map = BTreeMap::new();
        let opt_path = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        };
        let list_usize = |v: &[usize]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        let list_f64 = |v: &[f64]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        map.insert("task", self.task.to_string());
        map.insert("dataset", opt_path(&self.dataset));
        map.insert("cache", opt_path(&self.cache));
        map.insert("model", opt_path(&self.model));
        map.insert("out", self.out.display().to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("n_nodes", self.n_nodes.to_string());
        map.insert("n_classes", self.n_classes.to_string());
        map.insert("k", self.k.to_string());
        map.insert("d_m", list_usize(&self.d_m));
        map.insert("p_in", self.p_in.to_string());
        map.insert("p_out", self.p_out.to_string());
        map.insert("signal_split", list_f64(&self.signal_split));
        map.insert("rho", self.rho.to_string());
        map.insert("noise_scale", self.noise_scale.to_string());
        map.insert("class_phase", self.class_phase.to_string());
        map.insert("feature_drop", list_f64(&self.feature_drop));
        map.insert("edge_drop", self.edge_drop.to_string());
        map.insert(
            "from_text",
            self.from_text
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("edges_file", opt_path(&self.edges_file));
        map.insert("labels_file", opt_path(&self.labels_file));
        map.insert("depth", self.depth.to_string());
        map.insert("damping", self.damping.to_string());
        map.insert("epsilon", self.epsilon.to_string());
        map.insert("rotor_angle_mode", self.rotor_angle_mode.to_string());
        map.insert("literal_eq3", self.literal_eq3.to_string());
        map.insert("d_f", self.d_f.to_string());
        map.insert("h", self.h.to_string());
        map.insert("negative_ratio", self.negative_ratio.to_string());
        map.insert("n_clusters", self.n_clusters.to_string());
        map.insert("hits_k", self.hits_k.to_string());
        map.insert("n_candidates", self.n_candidates.to_string());
        map.insert("retrieval_direction", self.retrieval_direction.clone());
        map.insert("edge_val_frac", self.edge_val_frac.to_string());
        map.insert("edge_test_frac", self.edge_test_frac.to_string());
        map.insert("epochs", self.epochs.to_string());
        map.insert("lr", self.effective_lr().to_string());
        map.insert("weight_decay", self.weight_decay.to_string());
        map.insert("batch_size", self.batch_size.to_string());
        map.insert("patience", self.patience.to_string());
        map.insert("beta1", self.beta1.to_string());
        map.insert("beta2", self.beta2.to_string());
        map.insert("ablate", self.ablate.join(","));
        let mut out = String::new();
        for (k, v) in map {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// FNV-1a of the echo: the run hash recorded alongside results.
    pub fn run_hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.echo().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
