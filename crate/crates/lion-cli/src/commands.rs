//! Subcommand implementations.
//!
//! Every command resolves one [`RunConfig`], writes `config.echo` into the
//! output directory, and emits its artifacts there: `dataset.mag`,
//! `stack.cgp1` + `energies.csv`, `train.csv` + `metrics.json` + model
//! checkpoints, `ablate.csv`, `verify.json`.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use lion::aha::checkpoint::{load_params, save_params};
use lion::aha::forward::forward;
use lion::aha::{init_params, AhaDims, AhaParams, InteractionLayout};
use lion::cgp::cache::{dataset_hash, load_stack, save_stack};
use lion::cgp::{energy_trace, PropagationStack, RotorAngleMode};
use lion::clifford::BladeTable;
use lion::error::{LionError, Result};
use lion::mag::io::{import_text, load_mag, save_mag};
use lion::mag::{apply_corruption, generate_synthetic, split_edges, CorruptionSpec, MagDataset};
use lion::train::kmeans::kmeans;
use lion::train::loss::LinearHead;
use lion::train::metrics::{accuracy, ari, macro_f1, nmi};
use lion::train::retrieval::retrieval_eval;
use lion::train::{
    modality_probe, prepare_stack, rank_edges, split_accuracy, train_link_prediction,
    train_node_classification, AblationFlags, Task, TrainOutcome,
};
use lion::verify::{run_all, VerifyOptions};

use crate::config::RunConfig;

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.echo"), cfg.echo())?;
    Ok(())
}

fn dataset_path(cfg: &RunConfig) -> PathBuf {
    cfg.dataset.clone().unwrap_or_else(|| cfg.out.join("dataset.mag"))
}

fn cache_path(cfg: &RunConfig) -> PathBuf {
    cfg.cache.clone().unwrap_or_else(|| cfg.out.join("stack.cgp1"))
}

fn model_path(cfg: &RunConfig) -> PathBuf {
    cfg.model.clone().unwrap_or_else(|| cfg.out.join("model.aha1"))
}

fn head_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("head.bin")
}

fn load_dataset(cfg: &RunConfig) -> Result<MagDataset> {
    let path = dataset_path(cfg);
    if !path.exists() {
        return Err(LionError::Argument(format!(
            "dataset {} does not exist; run `lion gen-data` first",
            path.display()
        )));
    }
    load_mag(&path)
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

pub fn cmd_gen_data(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let mut ds = if cfg.from_text.is_empty() {
        generate_synthetic(&cfg.synth())?
    } else {
        let edges = cfg.edges_file.as_ref().ok_or_else(|| {
            LionError::Argument("text import needs edges_file alongside from_text".into())
        })?;
        import_text(&cfg.from_text, edges, cfg.labels_file.as_deref(), cfg.seed)?
    };
    if !cfg.feature_drop.is_empty() || cfg.edge_drop > 0.0 {
        let rates = if cfg.feature_drop.is_empty() {
            vec![0.0; ds.n_modalities()]
        } else {
            cfg.feature_drop.clone()
        };
        ds = apply_corruption(
            &ds,
            &CorruptionSpec {
                feature_drop_rate: rates,
                edge_drop_rate: cfg.edge_drop,
                seed: cfg.seed,
            },
        )?;
    }
    if cfg.task == Task::LinkPrediction {
        ds = split_edges(&ds, cfg.edge_val_frac, cfg.edge_test_frac, cfg.seed)?;
    }
    let path = dataset_path(cfg);
    save_mag(&ds, &path)?;
    println!(
        "wrote {} ({} nodes, {} undirected edges, {} modalities)",
        path.display(),
        ds.n_nodes(),
        ds.csr.num_undirected_edges(),
        ds.n_modalities()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// precompute
// ---------------------------------------------------------------------------

pub fn cmd_precompute(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let ds = load_dataset(cfg)?;
    let table = BladeTable::new(ds.n_modalities())?;
    let flags = cfg.ablation_flags()?;
    let cgp = cfg.cgp();
    let start = Instant::now();
    let (stack, geo) = prepare_stack(&ds, &table, &cgp, flags)?;
    let elapsed = start.elapsed().as_secs_f64();
    let hash = dataset_hash(&ds);
    save_stack(&stack, &cgp, hash, &cache_path(cfg))?;

    let trace = energy_trace(&stack, &geo, &ds.csr, &table)?;
    let mut csv = String::from("layer,dirichlet_energy\n");
    for (l, e) in trace.iter().enumerate() {
        csv.push_str(&format!("{l},{e}\n"));
    }
    fs::write(cfg.out.join("energies.csv"), csv)?;
    println!(
        "precompute wall-clock: {elapsed:.6} s ({} nodes, {} directed edges, L={})",
        ds.n_nodes(),
        ds.csr.nnz(),
        cgp.depth
    );
    println!("wrote {} and energies.csv", cache_path(cfg).display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train / eval
// ---------------------------------------------------------------------------

/// Stack acquisition for training: geometry-side ablations require a rebuild
/// (the cache stores full-model transport), head-side ablations reuse it.
fn obtain_stack(cfg: &RunConfig, ds: &MagDataset, table: &BladeTable) -> Result<PropagationStack> {
    let flags = cfg.ablation_flags()?;
    if flags.no_rotor || flags.no_potential {
        println!("geometry-side ablation requested; rebuilding the stack in memory");
        let (stack, _) = prepare_stack(ds, table, &cfg.cgp(), flags)?;
        return Ok(stack);
    }
    let path = cache_path(cfg);
    if !path.exists() {
        return Err(LionError::Argument(format!(
            "stack cache {} does not exist; run `lion precompute` first",
            path.display()
        )));
    }
    let cached = load_stack(&path, Some(dataset_hash(ds)))?;
    if cached.stack.depth != cfg.depth {
        println!(
            "note: cache was built with depth {} (configured {}); using the cache",
            cached.stack.depth, cfg.depth
        );
    }
    Ok(cached.stack)
}

struct TaskRun {
    outcome: TrainOutcome,
    metrics: Vec<(String, f64)>,
    train_seconds: f64,
}

fn run_task(
    cfg: &RunConfig,
    ds: &MagDataset,
    table: &BladeTable,
    stack: &PropagationStack,
    layout: &InteractionLayout,
) -> Result<TaskRun> {
    let task = cfg.task_spec();
    let train_cfg = cfg.train_config()?;
    let ablation = train_cfg.ablation.aha();
    let start = Instant::now();
    let outcome = match cfg.task {
        Task::LinkPrediction => train_link_prediction(stack, layout, ds, &task, &train_cfg)?,
        _ => train_node_classification(stack, layout, ds, &task, &train_cfg)?,
    };
    let train_seconds = start.elapsed().as_secs_f64();

    let (z, _) = forward(stack, &outcome.params, layout, ablation)?;
    let mut metrics: Vec<(String, f64)> = vec![
        ("best_val".into(), outcome.best_val),
        ("train_seconds".into(), train_seconds),
        ("epochs_run".into(), outcome.history.len() as f64),
    ];
    match cfg.task {
        Task::NodeClassification => {
            let labels = ds.labels.as_ref().unwrap();
            let preds: Vec<usize> = ds.splits.test.iter().map(|&u| outcome.head.predict(&z[u])).collect();
            let truth: Vec<usize> = ds.splits.test.iter().map(|&u| labels[u]).collect();
            metrics.push(("test_accuracy".into(), accuracy(&preds, &truth)?));
            metrics.push(("test_macro_f1".into(), macro_f1(&preds, &truth)?));
            metrics.push((
                "val_accuracy".into(),
                split_accuracy(&z, &ds.splits.val, labels, &outcome.head)?,
            ));
        }
        Task::LinkPrediction => {
            let es = ds.edge_splits.as_ref().unwrap();
            let (mrr, hits) = rank_edges(&z, &es.test, ds, &task, cfg.seed)?;
            metrics.push(("test_mrr".into(), mrr));
            metrics.push((format!("test_hits_at_{}", task.hits_k), hits));
        }
        Task::NodeClustering => {
            let labels = ds.labels.as_ref().ok_or_else(|| {
                LionError::Argument("node clustering needs labels for NMI/ARI".into())
            })?;
            let k = if task.n_clusters > 0 { task.n_clusters } else { ds.n_classes() };
            let assignments = kmeans(&z, k, cfg.seed)?;
            metrics.push(("nmi".into(), nmi(&assignments, labels)?));
            metrics.push(("ari".into(), ari(&assignments, labels)?));
        }
        Task::ModalityRetrieval => {
            let flags = cfg.ablation_flags()?;
            let cgp = cfg.cgp();
            let q0 = modality_probe(ds, 0, table, &cgp, flags, &outcome.params, layout)?;
            let q1 = modality_probe(ds, 1, table, &cgp, flags, &outcome.params, layout)?;
            let gt: Vec<usize> = (0..ds.n_nodes()).collect();
            let (m01, h01) = retrieval_eval(&q0, &q1, &gt, task.hits_k)?;
            let (m10, h10) = retrieval_eval(&q1, &q0, &gt, task.hits_k)?;
            metrics.push(("mrr_forward".into(), m01));
            metrics.push(("mrr_backward".into(), m10));
            metrics.push((format!("hits_at_{}_forward", task.hits_k), h01));
            metrics.push((format!("hits_at_{}_backward", task.hits_k), h10));
            let headline = match cfg.retrieval_direction.as_str() {
                "forward" => m01,
                "backward" => m10,
                _ => 0.5 * (m01 + m10),
            };
            metrics.push(("mrr".into(), headline));
        }
    }
    Ok(TaskRun {
        outcome,
        metrics,
        train_seconds,
    })
}

fn write_metrics_json(cfg: &RunConfig, rows: &[(String, f64)], extra: &[(&str, String)]) -> Result<()> {
    let mut obj = serde_json::Map::new();
    obj.insert("task".into(), serde_json::json!(cfg.task.to_string()));
    obj.insert("seed".into(), serde_json::json!(cfg.seed));
    obj.insert("run_hash".into(), serde_json::json!(cfg.run_hash()));
    let mut config_obj = serde_json::Map::new();
    for line in cfg.echo().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            config_obj.insert(k.into(), serde_json::json!(v));
        }
    }
    obj.insert("config".into(), serde_json::Value::Object(config_obj));
    obj.insert(
        "ablation".into(),
        serde_json::json!(cfg.ablation_flags()?.label()),
    );
    for (k, v) in extra {
        obj.insert((*k).into(), serde_json::json!(v));
    }
    let mut metric_obj = serde_json::Map::new();
    for (k, v) in rows {
        metric_obj.insert(k.clone(), serde_json::json!(v));
    }
    obj.insert("metrics".into(), serde_json::Value::Object(metric_obj));
    let json = serde_json::to_string_pretty(&serde_json::Value::Object(obj))
        .map_err(|e| LionError::Format(format!("metrics.json: {e}")))?;
    fs::write(cfg.out.join("metrics.json"), json)?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let ds = load_dataset(cfg)?;
    let table = BladeTable::new(ds.n_modalities())?;
    let stack = obtain_stack(cfg, &ds, &table)?;
    let layout = InteractionLayout::new(&table, &ds.feature_dims)?;
    let run = run_task(cfg, &ds, &table, &stack, &layout)?;

    let mut csv = String::from("epoch,train_loss,val_metric\n");
    for row in &run.outcome.history {
        csv.push_str(&format!("{},{},{}\n", row.epoch, row.train_loss, row.val_metric));
    }
    fs::write(cfg.out.join("train.csv"), csv)?;
    save_params(&run.outcome.params, &model_path(cfg))?;
    if run.outcome.head.in_dim > 0 {
        save_head(&run.outcome.head, &head_path(cfg))?;
    }
    write_metrics_json(cfg, &run.metrics, &[])?;
    for (k, v) in &run.metrics {
        println!("{k}: {v:.6}");
    }
    println!(
        "trained in {:.3} s; wrote train.csv, metrics.json, {}",
        run.train_seconds,
        model_path(cfg).display()
    );
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let ds = load_dataset(cfg)?;
    let table = BladeTable::new(ds.n_modalities())?;
    let stack = obtain_stack(cfg, &ds, &table)?;
    let layout = InteractionLayout::new(&table, &ds.feature_dims)?;
    let mpath = model_path(cfg);
    let task = cfg.task_spec();
    let params: AhaParams = if mpath.exists() {
        load_params(&mpath)?
    } else {
        println!("model {} not found; evaluating an initialized model", mpath.display());
        let dims = AhaDims::from_layout(&layout, stack.n_layers(), task.d_f, task.h);
        init_params(cfg.seed, dims)
    };
    let ablation = cfg.ablation_flags()?.aha();
    let (z, _) = forward(&stack, &params, &layout, ablation)?;

    let mut metrics: Vec<(String, f64)> = Vec::new();
    match cfg.task {
        Task::NodeClassification => {
            let labels = ds
                .labels
                .as_ref()
                .ok_or_else(|| LionError::Argument("classification eval needs labels".into()))?;
            let hpath = head_path(cfg);
            if !hpath.exists() {
                return Err(LionError::Argument(format!(
                    "head checkpoint {} missing; run `lion train` first",
                    hpath.display()
                )));
            }
            let head = load_head(&hpath)?;
            let preds: Vec<usize> = ds.splits.test.iter().map(|&u| head.predict(&z[u])).collect();
            let truth: Vec<usize> = ds.splits.test.iter().map(|&u| labels[u]).collect();
            metrics.push(("test_accuracy".into(), accuracy(&preds, &truth)?));
            metrics.push(("test_macro_f1".into(), macro_f1(&preds, &truth)?));
        }
        Task::LinkPrediction => {
            let es = ds.edge_splits.as_ref().ok_or_else(|| {
                LionError::Argument("link evaluation needs edge splits".into())
            })?;
            let (mrr, hits) = rank_edges(&z, &es.test, &ds, &task, cfg.seed)?;
            metrics.push(("test_mrr".into(), mrr));
            metrics.push((format!("test_hits_at_{}", task.hits_k), hits));
        }
        Task::NodeClustering => {
            let labels = ds
                .labels
                .as_ref()
                .ok_or_else(|| LionError::Argument("clustering eval needs labels".into()))?;
            let k = if task.n_clusters > 0 { task.n_clusters } else { ds.n_classes() };
            let assignments = kmeans(&z, k, cfg.seed)?;
            metrics.push(("nmi".into(), nmi(&assignments, labels)?));
            metrics.push(("ari".into(), ari(&assignments, labels)?));
        }
        Task::ModalityRetrieval => {
            let flags = cfg.ablation_flags()?;
            let cgp = cfg.cgp();
            let q0 = modality_probe(&ds, 0, &table, &cgp, flags, &params, &layout)?;
            let q1 = modality_probe(&ds, 1, &table, &cgp, flags, &params, &layout)?;
            let gt: Vec<usize> = (0..ds.n_nodes()).collect();
            let (m01, _) = retrieval_eval(&q0, &q1, &gt, task.hits_k)?;
            let (m10, _) = retrieval_eval(&q1, &q0, &gt, task.hits_k)?;
            metrics.push(("mrr_forward".into(), m01));
            metrics.push(("mrr_backward".into(), m10));
        }
    }
    write_metrics_json(cfg, &metrics, &[])?;
    for (k, v) in &metrics {
        println!("{k}: {v:.6}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

pub fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    ensure_out(cfg)?;
    let ds = load_dataset(cfg)?;
    let table = BladeTable::new(ds.n_modalities())?;
    let layout = InteractionLayout::new(&table, &ds.feature_dims)?;
    let cgp = cfg.cgp();
    let mut rows = Vec::new();
    for (label, flags) in AblationFlags::all_variants() {
        let (stack, _) = prepare_stack(&ds, &table, &cgp, flags)?;
        let mut variant_cfg = cfg.clone();
        variant_cfg.ablate = match label.as_str() {
            "full" => Vec::new(),
            other => vec![other.trim_start_matches("no_").to_string()],
        };
        let run = run_task(&variant_cfg, &ds, &table, &stack, &layout)?;
        let headline = run
            .metrics
            .iter()
            .find(|(k, _)| k.starts_with("test_") || k == "nmi" || k == "mrr")
            .map(|(_, v)| *v)
            .unwrap_or(0.0);
        println!(
            "{label:<14} best_val {:.4}  test {:.4}  ({:.2} s)",
            run.outcome.best_val, headline, run.train_seconds
        );
        rows.push((label, run.outcome.best_val, headline));
    }
    let mut csv = String::from("variant,best_val,test_metric\n");
    for (label, val, test) in &rows {
        csv.push_str(&format!("{label},{val},{test}\n"));
    }
    fs::write(cfg.out.join("ablate.csv"), csv)?;
    let metric_rows: Vec<(String, f64)> = rows
        .iter()
        .map(|(label, _, test)| (format!("test_{label}"), *test))
        .collect();
    write_metrics_json(cfg, &metric_rows, &[("mode", "ablate".into())])?;
    println!("wrote ablate.csv");
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    ensure_out(cfg)?;
    // passing a non-default rotor angle mode re-runs the mode-sensitive
    // checks under it in addition to the squared default
    let opts = VerifyOptions {
        seed: cfg.seed,
        rotor_angle_mode: match cfg.rotor_angle_mode {
            RotorAngleMode::Squared => None,
            other => Some(other),
        },
    };
    let report = run_all(&opts);
    print!("{}", report.table());
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| LionError::Format(format!("verify.json: {e}")))?;
    fs::write(cfg.out.join("verify.json"), json)?;
    Ok(report.passed)
}

// ---------------------------------------------------------------------------
// head checkpoint (tiny auxiliary container)
// ---------------------------------------------------------------------------

fn save_head(head: &LinearHead, path: &std::path::Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(b"LHD1");
    out.extend_from_slice(&(head.in_dim as u64).to_le_bytes());
    out.extend_from_slice(&(head.out_dim as u64).to_le_bytes());
    for &x in head.w.iter().chain(&head.b) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

fn load_head(path: &std::path::Path) -> Result<LinearHead> {
    let data = fs::read(path)?;
    if data.len() < 20 || &data[..4] != b"LHD1" {
        return Err(LionError::Format(format!("{}: not a head checkpoint", path.display())));
    }
    let in_dim = u64::from_le_bytes(data[4..12].try_into().unwrap()) as usize;
    let out_dim = u64::from_le_bytes(data[12..20].try_into().unwrap()) as usize;
    let need = 20 + (in_dim * out_dim + out_dim) * 8;
    if data.len() != need {
        return Err(LionError::Format(format!(
            "{}: expected {need} bytes, got {}",
            path.display(),
            data.len()
        )));
    }
    let mut vals = data[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let w: Vec<f64> = (&mut vals).take(in_dim * out_dim).collect();
    let b: Vec<f64> = vals.collect();
    Ok(LinearHead {
        in_dim,
        out_dim,
        w,
        b,
    })
}
