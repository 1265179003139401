use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use super::{write_manifest, Baseline, Command, RunConfig};
use crate::baseline::{bpr_score, bpr_train, read_bpr_checkpoint, write_bpr_checkpoint};
use crate::data::{chrono_split, filter_min_activity, parse_interactions, ColumnMapping, InteractionSet, SplitDataset};
use crate::error::{RareError, Result};
use crate::eval::{evaluate, recommend_topk, EvalReport};
use crate::model::{read_checkpoint, train, write_checkpoint, write_training_log, ItemCatalog, TrainConfig};
use crate::prospect::AblationMode;
use crate::riskdist::{resolve_distribution, DistributionSource, RATING_LEVELS};
use crate::synthgen::{generate, write_interactions_csv};

/// Row order of the ablation table.
pub const ABLATION_ORDER: [AblationMode; 4] = [
    AblationMode::NoWeighting,
    AblationMode::NoValuePersonalization,
    AblationMode::NoReference,
    AblationMode::Full,
];

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Parses, filters and splits the configured interaction log.
pub fn load_split(config: &RunConfig) -> Result<(InteractionSet, SplitDataset)> {
    let path = config
        .data
        .as_ref()
        .ok_or_else(|| RareError::Config("`--data` is required".into()))?;
    let raw = parse_interactions(BufReader::new(File::open(path)?), &ColumnMapping::default(), config.price_fallback)?;
    if raw.malformed_rows() > 0 {
        log::warn!("{} malformed rows skipped", raw.malformed_rows());
    }
    if raw.dropped_missing_price() > 0 {
        log::warn!("{} rows without price dropped", raw.dropped_missing_price());
    }
    let filtered = filter_min_activity(&raw, config.min_count)?;
    log::info!(
        "{} interactions, {} users, {} items after filtering",
        filtered.len(),
        filtered.n_users(),
        filtered.n_items()
    );
    let split = chrono_split(&filtered)?;
    Ok((filtered, split))
}

/// Rating distributions from training ratings and mean prices over all
/// interactions of each item.
///
/// Items without training ratings fall back to the pooled training
/// distribution.
pub fn item_catalog(set: &InteractionSet, split: &SplitDataset) -> Result<(ItemCatalog, Vec<Option<DistributionSource>>)> {
    let counts = split.train.rating_counts();
    let mut pooled = [0u64; RATING_LEVELS];
    for c in &counts {
        for (p, x) in pooled.iter_mut().zip(c) {
            *p += x;
        }
    }
    let (fallback, _) = resolve_distribution(&pooled)?;
    let mut dists = Vec::with_capacity(counts.len());
    let mut sources = Vec::with_capacity(counts.len());
    for c in &counts {
        if c.iter().all(|&x| x == 0) {
            dists.push(fallback);
            sources.push(None);
        } else {
            let (d, source) = resolve_distribution(c)?;
            dists.push(d);
            sources.push(Some(source));
        }
    }
    let prices = set
        .mean_prices()
        .into_iter()
        .map(|p| p.ok_or_else(|| RareError::Config("item without interactions".into())))
        .collect::<Result<Vec<f64>>>()?;
    Ok((ItemCatalog::new(dists, prices)?, sources))
}

#[derive(Serialize)]
struct IngestSummary {
    interactions: usize,
    users: usize,
    items: usize,
    train_interactions: usize,
}

fn ingest(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, split) = load_split(config)?;
    let clean = config.out_path("interactions.csv");
    write_interactions_csv(&set, create(&clean)?)?;
    let manifest = config.out_path("split.csv");
    split.write_manifest(create(&manifest)?)?;
    let summary = config.out_path("ingest_summary.json");
    let info = IngestSummary {
        interactions: set.len(),
        users: set.n_users(),
        items: set.n_items(),
        train_interactions: split.train.len(),
    };
    serde_json::to_writer_pretty(create(&summary)?, &info)?;
    Ok(vec![clean, manifest, summary])
}

fn fit_dist(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, split) = load_split(config)?;
    let (catalog, sources) = item_catalog(&set, &split)?;
    let path = config.out_path("distributions.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["item_id", "source", "p1", "p2", "p3", "p4", "p5", "price"])?;
    for (v, source) in sources.iter().enumerate() {
        let mut row = vec![
            set.item_id(v).to_string(),
            source.map(|s| s.as_str()).unwrap_or("pooled").to_string(),
        ];
        row.extend(catalog.dists[v].probs().iter().map(f64::to_string));
        row.push(catalog.prices[v].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(vec![path])
}

fn train_command(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, split) = load_split(config)?;
    let checkpoint = config.out_path(config.default_checkpoint_name());
    let log_path = config.out_path("training_log.csv");
    let log = match config.baseline {
        Some(Baseline::Bpr) => {
            let outcome = bpr_train(&config.train, &split)?;
            write_bpr_checkpoint(&outcome.model, create(&checkpoint)?)?;
            log::info!("best epoch {}", outcome.best_epoch);
            outcome.log
        }
        None => {
            let (catalog, _) = item_catalog(&set, &split)?;
            let outcome = train(&config.train, &split, &catalog)?;
            write_checkpoint(&outcome.model, create(&checkpoint)?)?;
            log::info!("best epoch {}", outcome.best_epoch);
            outcome.log
        }
    };
    write_training_log(&log, create(&log_path)?)?;
    Ok(vec![checkpoint, log_path])
}

fn check_dims(model_users: usize, model_items: usize, split: &SplitDataset) -> Result<()> {
    if model_users != split.n_users() || model_items != split.n_items() {
        return Err(RareError::Config(format!(
            "checkpoint is {model_users}×{model_items} but the data has {} users and {} items",
            split.n_users(),
            split.n_items()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    model: String,
    variant: &'a str,
    report: &'a EvalReport,
}

fn write_report(config: &RunConfig, report: &EvalReport, variant: &str) -> Result<Vec<PathBuf>> {
    let metrics = config.out_path("metrics.csv");
    report.write_metrics_csv(create(&metrics)?)?;
    let summary = config.out_path("eval_summary.json");
    let body = EvalSummary {
        model: config.model_path().display().to_string(),
        variant,
        report,
    };
    serde_json::to_writer_pretty(create(&summary)?, &body)?;
    Ok(vec![metrics, summary])
}

fn evaluate_command(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, split) = load_split(config)?;
    let reader = BufReader::new(File::open(config.model_path())?);
    let seed = config.train.seed;
    match config.baseline {
        Some(Baseline::Bpr) => {
            let model = read_bpr_checkpoint(reader)?;
            check_dims(model.n_users(), model.n_items(), &split)?;
            let report = evaluate(|u, v| bpr_score(&model, u, v), &split, &config.cutoffs, seed)?;
            write_report(config, &report, "BPR-MF")
        }
        None => {
            let model = read_checkpoint(reader)?;
            check_dims(model.n_users(), model.n_items(), &split)?;
            let (catalog, _) = item_catalog(&set, &split)?;
            let report = evaluate(|u, v| model.score(u, v, &catalog), &split, &config.cutoffs, seed)?;
            write_report(config, &report, model.mode.label())
        }
    }
}

fn recommend_command(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, split) = load_split(config)?;
    let model = read_checkpoint(BufReader::new(File::open(config.model_path())?))?;
    check_dims(model.n_users(), model.n_items(), &split)?;
    let (catalog, _) = item_catalog(&set, &split)?;
    let users: Vec<usize> = match &config.user {
        Some(id) => vec![set
            .user_index(id)
            .ok_or_else(|| RareError::Config(format!("unknown user `{id}`")))?],
        None => (0..split.n_users()).collect(),
    };
    let path = config.out_path("recommendations.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["user_id", "rank", "item_id", "prospect_value"])?;
    for u in users {
        for (rank, (v, value)) in recommend_topk(&model, u, &split.candidate_pool[u], &catalog, config.topk)?
            .into_iter()
            .enumerate()
        {
            w.write_record([
                set.user_id(u).to_string(),
                (rank + 1).to_string(),
                set.item_id(v).to_string(),
                value.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(vec![path])
}

fn synth_command(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = generate(&config.synth)?;
    let interactions = config.out_path("interactions.csv");
    write_interactions_csv(&data.interactions, create(&interactions)?)?;
    let truth = config.out_path("ground_truth.json");
    let mut w = create(&truth)?;
    data.truth.write_json(&mut w)?;
    w.flush()?;
    Ok(vec![interactions, truth])
}

#[derive(Serialize)]
struct AblationRow {
    variant: &'static str,
    mode: &'static str,
    best_epoch: usize,
    report: EvalReport,
}

fn ablate_command(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (set, split) = load_split(config)?;
    let (catalog, _) = item_catalog(&set, &split)?;
    let mut rows = Vec::new();
    for mode in ABLATION_ORDER {
        let train_config = TrainConfig { mode, ..config.train.clone() };
        let outcome = train(&train_config, &split, &catalog)?;
        let model = outcome.model;
        let report = evaluate(|u, v| model.score(u, v, &catalog), &split, &config.cutoffs, config.train.seed)?;
        log::info!("{}: ndcg {:?}", mode.label(), report.per_k);
        rows.push(AblationRow {
            variant: mode.label(),
            mode: mode.as_str(),
            best_epoch: outcome.best_epoch,
            report,
        });
    }
    let table = config.out_path("ablation.csv");
    let mut w = csv::Writer::from_writer(create(&table)?);
    let mut header = vec!["variant".to_string()];
    header.extend(config.cutoffs.iter().map(|k| format!("f1@{k}")));
    header.extend(config.cutoffs.iter().map(|k| format!("ndcg@{k}")));
    w.write_record(&header)?;
    for row in &rows {
        let mut record = vec![row.variant.to_string()];
        record.extend(config.cutoffs.iter().map(|&k| row.report.f1(k).unwrap_or(0.0).to_string()));
        record.extend(config.cutoffs.iter().map(|&k| row.report.ndcg(k).unwrap_or(0.0).to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    let summary = config.out_path("ablation.json");
    serde_json::to_writer_pretty(create(&summary)?, &rows)?;
    Ok(vec![table, summary])
}

/// Executes `command` and returns the artifacts it wrote, manifest last.
pub fn run(command: Command, config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate(command)?;
    std::fs::create_dir_all(&config.out)?;
    let work = || match command {
        Command::Ingest => ingest(config),
        Command::FitDist => fit_dist(config),
        Command::Train => train_command(config),
        Command::Evaluate => evaluate_command(config),
        Command::Recommend => recommend_command(config),
        Command::Synth => synth_command(config),
        Command::Ablate => ablate_command(config),
    };
    let mut artifacts = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RareError::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    artifacts.push(write_manifest(config, command)?);
    for path in &artifacts {
        log::info!("wrote {}", path.display());
    }
    Ok(artifacts)
}
