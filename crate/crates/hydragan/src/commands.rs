//! The subcommands as library functions. Each writes its artifacts and
//! returns a summary for the caller to print.

use std::fs;
use std::path::{Path, PathBuf};

use hydragan_core::datapipe::Dataset;
use hydragan_core::evaluator::{build_report, EvalConfig, EvaluationReport};
use hydragan_core::numcore::Tensor;
use hydragan_core::toy::{self, ToyKind};
use hydragan_core::trainer::{equilibrium_probe, sample_synthetic, HydraGame, ProbeReport, TrainData, Trainer};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, ClusteringSummary, Manifest};
use crate::config::{sha256_hex, RunConfig};
use crate::csv_io::{load_csv, read_table, write_table};
use crate::error::{CliError, CliResult};
use crate::trainlog::TrainLog;

pub const TRAIN_LOG: &str = "train_log.csv";
pub const CLUSTERING_FILE: &str = "clustering.json";
pub const REPORT_FILE: &str = "report.json";
pub const RADAR_FILE: &str = "radar.csv";

/// Provenance written next to CSV artifacts as `<file>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::output(path, e))
}

fn write_meta(path: &Path, command: &str, config_hash: &str, seed: u64) -> CliResult<()> {
    write_json(
        &meta_path(path),
        &ArtifactMeta {
            command: command.to_owned(),
            config_hash: config_hash.to_owned(),
            seed,
        },
    )
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::output(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub epochs: usize,
    pub n_heads: usize,
    pub cluster_sizes: Vec<usize>,
    pub reid_active: Vec<bool>,
    pub config_hash: String,
}

/// Clusters, trains and writes a checkpoint directory containing the agent
/// containers, `manifest.json`, `clustering.json` and the training log.
pub fn cmd_train(cfg: &RunConfig) -> CliResult<TrainOutcome> {
    cfg.validate()?;
    let dataset_path = cfg.require_dataset()?;
    let out = cfg.require_output()?;
    let raw = load_csv(dataset_path, cfg.require_sensitive()?)?;
    let data = raw.normalize();
    let hash = cfg.hash();
    create_dir(out)?;

    let mut trainer = Trainer::new(&data, cfg.train.clone())?;
    let sizes = trainer.data.sizes();
    log::info!("training {} heads, cluster sizes {:?}", trainer.clustering.k, sizes);
    let log_path = out.join(TRAIN_LOG);
    let mut log = TrainLog::create(&log_path, trainer.agents.n_heads(), trainer.agents.reids.len())?;
    while trainer.state.epoch < cfg.train.epochs {
        let rec = trainer.train_epoch();
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                log.finish()?;
                return Err(e.into());
            }
        };
        log.append(&rec)?;
        if (rec.epoch + 1) % 100 == 0 {
            log::info!(
                "epoch {} generator {:.5} em {:?} reid active {:?}",
                rec.epoch + 1,
                rec.generator_loss,
                rec.per_head_em,
                rec.reid_active
            );
        }
    }
    log.finish()?;
    write_meta(&log_path, "train", &hash, cfg.seed())?;

    let clustering = ClusteringSummary {
        k: trainer.clustering.k,
        cluster_sizes: sizes.clone(),
        inertia_curve: trainer.clustering.inertia_curve.clone(),
        assignments: trainer.clustering.assignments.clone(),
    };
    write_json(
        &out.join(CLUSTERING_FILE),
        &serde_json::json!({
            "config_hash": hash,
            "seed": cfg.seed(),
            "k": clustering.k,
            "inertia_curve": clustering.inertia_curve,
            "cluster_sizes": clustering.cluster_sizes,
        }),
    )?;
    let agents = checkpoint::save_agents(out, &trainer.agents)?;
    let dataset = fs::canonicalize(dataset_path).unwrap_or_else(|_| dataset_path.to_owned());
    let manifest = Manifest {
        format_version: checkpoint::FORMAT_VERSION,
        config_hash: hash.clone(),
        seed: cfg.seed(),
        config: cfg.to_map(),
        dataset: dataset.display().to_string(),
        feature_names: raw.feature_names().to_vec(),
        sensitive_index: raw.sensitive_index(),
        bounds: raw.bounds().to_vec(),
        clustering,
        epochs_trained: trainer.state.epoch,
        reid_active: trainer.state.reid_active.clone(),
        per_head_em: trainer
            .state
            .per_head_em
            .iter()
            .map(|&e| e.is_finite().then_some(e))
            .collect(),
        agents,
    };
    checkpoint::write_manifest(out, &manifest)?;
    Ok(TrainOutcome {
        checkpoint: out.to_owned(),
        epochs: trainer.state.epoch,
        n_heads: trainer.clustering.k,
        cluster_sizes: sizes,
        reid_active: trainer.state.reid_active,
        config_hash: hash,
    })
}

/// Draws `n_rows` rows, heads chosen in proportion to cluster sizes, and
/// writes them on the original scale under the original header. `seed`
/// defaults to the training seed.
pub fn cmd_generate(
    checkpoint_dir: &Path,
    n_rows: usize,
    seed: Option<u64>,
    output: &Path,
) -> CliResult<Option<Tensor>> {
    let manifest = checkpoint::read_manifest(checkpoint_dir)?;
    let seed = seed.unwrap_or(manifest.seed);
    let agents = checkpoint::load_agents(checkpoint_dir, &manifest.agents)?;
    if agents.generator.out_features() != manifest.feature_names.len() {
        return Err(CliError::Checkpoint("generator width does not match the manifest features".into()));
    }
    let rows = if n_rows == 0 {
        None
    } else {
        let synth = sample_synthetic(&agents.generator, &manifest.clustering.cluster_sizes, n_rows, seed)?;
        let scale = Dataset::from_parts(
            manifest.feature_names.clone(),
            synth.clone(),
            manifest.bounds.clone(),
            manifest.sensitive_index,
            true,
        )?;
        Some(scale.denormalize_matrix(&synth)?)
    };
    write_table(output, &manifest.feature_names, rows.as_ref())?;
    write_meta(output, "generate", &manifest.config_hash, seed)?;
    Ok(rows)
}

/// Scores `synth_csv` against `real_csv` and writes `report.json` and
/// `radar.csv` into `out_dir`. Synthetic values are scaled with the real
/// data's bounds.
pub fn cmd_evaluate(real_csv: &Path, synth_csv: &Path, cfg: &RunConfig, out_dir: &Path) -> CliResult<EvaluationReport> {
    cfg.validate()?;
    let real = load_csv(real_csv, cfg.require_sensitive()?)?;
    let synth = read_table(synth_csv)?;
    if synth.header != real.feature_names() {
        return Err(CliError::Data(format!(
            "schema mismatch: {} has columns {:?}, {} has {:?}",
            synth_csv.display(),
            synth.header,
            real_csv.display(),
            real.feature_names()
        )));
    }
    let synth_rows = synth
        .rows
        .ok_or_else(|| CliError::Data(format!("{}: no data rows", synth_csv.display())))?;
    let synth_norm = real.normalize_matrix(&synth_rows)?;
    let targets = if cfg.eval.targets.is_empty() {
        None
    } else {
        Some(
            cfg.eval
                .targets
                .iter()
                .map(|t| {
                    real.feature_names()
                        .iter()
                        .position(|n| n == t)
                        .ok_or_else(|| CliError::Config(format!("eval.targets: unknown column {t:?}")))
                })
                .collect::<CliResult<Vec<_>>>()?,
        )
    };
    let hash = cfg.hash();
    let eval = EvalConfig {
        seed: cfg.seed(),
        em_mode: cfg.eval.em_mode(),
        targets,
        config_hash: Some(hash.clone()),
    };
    let report = build_report(&real.normalize(), &synth_norm, &eval)?;
    create_dir(out_dir)?;
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    let radar = out_dir.join(RADAR_FILE);
    let io = |e: csv::Error| CliError::output(&radar, e.into());
    let mut w = csv::Writer::from_path(&radar).map_err(io)?;
    w.write_record(["axis", "value"]).map_err(io)?;
    for (axis, v) in report.radar_rows() {
        w.write_record([axis.to_owned(), v.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::output(&radar, e))?;
    write_meta(&radar, "evaluate", &hash, cfg.seed())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutput {
    pub config_hash: String,
    pub seed: u64,
    pub epochs_trained: usize,
    pub reid_active: Vec<bool>,
    pub report: ProbeReport,
}

/// Keys `cmd_probe` accepts as overrides.
pub const PROBE_KEYS: &[&str] = &["probe.gamma", "probe.epsilon", "probe.trials", "probe.batch_size", "seed"];

/// Rebuilds the trained game from a checkpoint and its training data and
/// runs the perturbation probe. `overrides` are `key=value` pairs restricted
/// to [`PROBE_KEYS`].
pub fn cmd_probe(checkpoint_dir: &Path, overrides: &[String], output: Option<&Path>) -> CliResult<ProbeOutput> {
    let manifest = checkpoint::read_manifest(checkpoint_dir)?;
    let mut cfg = RunConfig::from_map(&manifest.config).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    for pair in overrides {
        let key = pair.split_once('=').map_or(pair.as_str(), |(k, _)| k.trim());
        if !PROBE_KEYS.contains(&key) {
            return Err(CliError::Config(format!(
                "probe accepts only {} (got {key:?})",
                PROBE_KEYS.join(", ")
            )));
        }
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    let agents = checkpoint::load_agents(checkpoint_dir, &manifest.agents)?;

    let sensitive = &manifest.feature_names[manifest.sensitive_index];
    let raw = load_csv(Path::new(&manifest.dataset), sensitive)?;
    if raw.feature_names() != manifest.feature_names || raw.bounds() != manifest.bounds {
        return Err(CliError::Checkpoint(format!(
            "{} no longer matches the data the checkpoint was trained on",
            manifest.dataset
        )));
    }
    let c = &manifest.clustering;
    if c.assignments.len() != raw.n_samples() || c.cluster_sizes.len() != agents.n_heads() {
        return Err(CliError::Checkpoint("clustering does not match the dataset".into()));
    }
    let data = raw.normalize();
    let partitions = (0..c.k)
        .map(|h| {
            let idx: Vec<usize> = (0..c.assignments.len()).filter(|&i| c.assignments[i] == h).collect();
            data.matrix().select_rows(&idx)
        })
        .collect();
    let data = TrainData::new(partitions, data.sensitive_index())?;
    if manifest.reid_active.len() != agents.n_heads() {
        return Err(CliError::Checkpoint("reid_active length does not match the head count".into()));
    }
    let probe = cfg.probe_config();
    let mut game = HydraGame::new(&agents, &data, &cfg.train, &probe)?;
    let report = equilibrium_probe(&mut game, &probe)?;
    let out = ProbeOutput {
        config_hash: cfg.hash(),
        seed: cfg.seed(),
        epochs_trained: manifest.epochs_trained,
        reid_active: manifest.reid_active.clone(),
        report,
    };
    if let Some(path) = output {
        write_json(path, &out)?;
    }
    Ok(out)
}

/// Writes a synthetic fixture table. `n` is ignored for `heartlike`.
pub fn cmd_make_toy(kind: &str, n: usize, seed: u64, output: &Path) -> CliResult<toy::ToyData> {
    let kind = ToyKind::parse(kind).map_err(|e| CliError::Config(e.to_string()))?;
    let data = toy::make(kind, n, seed).map_err(|e| CliError::Config(e.to_string()))?;
    write_table(output, &data.names, Some(&data.rows))?;
    let hash = sha256_hex(format!("kind={}\nn={n}\nseed={seed}\n", kind.name()).as_bytes());
    write_meta(output, "make-toy", &hash, seed)?;
    Ok(data)
}
