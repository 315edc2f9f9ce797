//! The pipeline commands behind the `ppgstage` binary. Each returns a value
//! describing what it did and writes its artifacts; printing is left to the
//! caller.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{load_checkpoint_for, save_checkpoint, Checkpoint};
use super::config::{load_run_config, ResolvedRun, RunConfig};
use super::grid::{load_grid, save_grid};
use super::manifest::{base_dir, load_manifest, read_json, resolve, save_manifest, write_json, Manifest, ManifestEntry};
use super::report::{confusion_csv, render_eval, render_train_report, EvalDocument, TrainReport, REPORT_VERSION};
use super::signal::{load_labels, load_signal, save_labels, save_signal, SignalContainer};
use crate::datagen::{gen_dataset, SynthConfig};
use crate::model::init_params;
use crate::sigprep::{preprocess_with_stats, FilterSpec, PrepStats, Recording, WindowGrid};
use crate::superwin::{build_all, ConfigId, SuperWindowSpec};
use crate::traineval::{evaluate, kfold_split, run_fold, Confusion, CvSummary, EvalReport};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "PPGSTAGE_THREADS";

pub const PREP_SUMMARY: &str = "prep_summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl From<Error> for CliError {
    /// Configuration problems are the caller's to fix; everything else is a
    /// runtime failure.
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> CliResult<Option<usize>> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A pool that already exists (tests, repeated calls) is fine to keep.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

pub fn signal_file(id: &str) -> String {
    format!("{id}.ppgs")
}

pub fn labels_file(id: &str) -> String {
    format!("{id}.labels.csv")
}

pub fn grid_file(id: &str) -> String {
    format!("{id}.ppgw")
}

/// Writes a synthetic cohort (signals, label CSVs, manifest) into `out`.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> CliResult<Manifest> {
    let recordings = gen_dataset(cfg)?;
    let mut entries = Vec::with_capacity(recordings.len());
    for r in &recordings {
        let signal = PathBuf::from(signal_file(&r.subject_id));
        let labels = PathBuf::from(labels_file(&r.subject_id));
        save_signal(
            &out.join(&signal),
            &SignalContainer {
                sample_rate_hz: r.sample_rate_hz,
                samples: r.samples.clone(),
            },
        )?;
        save_labels(&out.join(&labels), &r.labels)?;
        entries.push(ManifestEntry {
            subject_id: r.subject_id.clone(),
            signal,
            labels,
        });
    }
    let manifest = Manifest::new(entries);
    save_manifest(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepEntry {
    pub subject_id: String,
    pub grid: PathBuf,
    pub stats: PrepStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepFailure {
    pub subject_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepSummary {
    pub format_version: u32,
    pub subjects: Vec<PrepEntry>,
    pub errors: Vec<PrepFailure>,
}

pub fn load_recording(base: &Path, entry: &ManifestEntry) -> crate::Result<Recording> {
    let signal = load_signal(&resolve(base, &entry.signal))?;
    let labels = load_labels(&resolve(base, &entry.labels))?;
    Ok(Recording {
        subject_id: entry.subject_id.clone(),
        samples: signal.samples,
        sample_rate_hz: signal.sample_rate_hz,
        labels,
    })
}

/// Preprocesses every manifest subject into `out/<id>.ppgw` and writes
/// `out/prep_summary.json`. A failing subject is recorded and skipped; the
/// command fails only when no subject succeeds.
pub fn cmd_prep(manifest_path: &Path, out: &Path, filter: &FilterSpec) -> CliResult<PrepSummary> {
    let manifest = load_manifest(manifest_path)?;
    if manifest.subjects.is_empty() {
        return Err(CliError::Usage(format!("{} lists no subjects", manifest_path.display())));
    }
    let base = base_dir(manifest_path);
    let results: Vec<_> = manifest
        .subjects
        .par_iter()
        .map(|entry| -> crate::Result<PrepEntry> {
            let rec = load_recording(&base, entry)?;
            let (grid, stats) = preprocess_with_stats(&rec, filter)?;
            let file = PathBuf::from(grid_file(&entry.subject_id));
            save_grid(&out.join(&file), &grid)?;
            Ok(PrepEntry {
                subject_id: entry.subject_id.clone(),
                grid: file,
                stats,
            })
        })
        .collect();
    let mut summary = PrepSummary {
        format_version: REPORT_VERSION,
        subjects: Vec::new(),
        errors: Vec::new(),
    };
    for (entry, r) in manifest.subjects.iter().zip(results) {
        match r {
            Ok(e) => summary.subjects.push(e),
            Err(e) => summary.errors.push(PrepFailure {
                subject_id: entry.subject_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    write_json(&out.join(PREP_SUMMARY), &summary)?;
    if summary.subjects.is_empty() {
        return Err(CliError::Runtime(Error::Parse(format!(
            "all {} subjects failed preprocessing; see {}",
            summary.errors.len(),
            out.join(PREP_SUMMARY).display()
        ))));
    }
    Ok(summary)
}

/// Loads the grids of `subjects` from `grid_dir`; subjects whose grid is
/// missing or unreadable are returned separately.
pub fn load_grids(grid_dir: &Path, subjects: &[String]) -> (Vec<WindowGrid>, Vec<String>) {
    let loaded: Vec<_> = subjects
        .par_iter()
        .map(|id| load_grid(&grid_dir.join(grid_file(id))).ok())
        .collect();
    let mut grids = Vec::new();
    let mut skipped = Vec::new();
    for (id, g) in subjects.iter().zip(loaded) {
        match g {
            Some(g) => grids.push(g),
            None => skipped.push(id.clone()),
        }
    }
    (grids, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperWindowEntry {
    pub subject_id: String,
    pub source_indices: Vec<i64>,
    pub valid_positions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperWindowIndex {
    pub format_version: u32,
    pub config: ConfigId,
    pub spec: SuperWindowSpec,
    pub items: Vec<SuperWindowEntry>,
}

/// Builds the super-window index of one configuration over every grid
/// listed in the prep summary of `grid_dir`.
pub fn cmd_windows(grid_dir: &Path, config: ConfigId, out: &Path) -> CliResult<SuperWindowIndex> {
    let summary: PrepSummary = read_json(&grid_dir.join(PREP_SUMMARY))?;
    let ids: Vec<String> = summary.subjects.iter().map(|s| s.subject_id.clone()).collect();
    let (grids, skipped) = load_grids(grid_dir, &ids);
    if let Some(id) = skipped.first() {
        return Err(CliError::Runtime(Error::Parse(format!("grid for {id} is missing or unreadable"))));
    }
    let set = build_all(&grids, &config.spec())?;
    let index = SuperWindowIndex {
        format_version: REPORT_VERSION,
        config,
        spec: set.spec,
        items: set
            .items
            .iter()
            .map(|sw| SuperWindowEntry {
                subject_id: sw.subject_id.clone(),
                source_indices: sw.source_indices.clone(),
                valid_positions: sw.valid_count(),
            })
            .collect(),
    };
    write_json(out, &index)?;
    Ok(index)
}

fn load_run(path: &Path, seed: Option<u64>) -> CliResult<(RunConfig, ResolvedRun)> {
    let (mut cfg, base) = load_run_config(path)?;
    if let Some(s) = seed {
        cfg.train.seed = Some(s);
    }
    let run = cfg.resolve(&base)?;
    Ok((cfg, run))
}

fn run_subjects(run: &ResolvedRun) -> CliResult<(Vec<WindowGrid>, Vec<String>)> {
    let manifest = load_manifest(&run.manifest)?;
    let (grids, skipped) = load_grids(&run.grid_dir, &manifest.subject_ids());
    if grids.is_empty() {
        return Err(CliError::Runtime(Error::Parse(format!(
            "no preprocessed grids for {} in {}",
            run.manifest.display(),
            run.grid_dir.display()
        ))));
    }
    Ok((grids, skipped))
}

/// Cross-validated training. Writes per-fold checkpoints and reports plus
/// the merged `report.json`, `report.txt` and `confusion.csv` under the
/// configured output directory. `seed` overrides the config's seed.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, log: &mut dyn FnMut(&str)) -> CliResult<TrainReport> {
    let (cfg, run) = load_run(config_path, seed)?;
    let (grids, skipped) = run_subjects(&run)?;
    let subjects: Vec<String> = grids.iter().map(|g| g.subject_id.clone()).collect();
    let folds = kfold_split(&subjects, run.train.folds, run.train.seed)?;
    let set = build_all(&grids, &run.config.spec())?;
    drop(grids);
    let num_params = init_params::<f32>(&run.spec, run.train.seed)?.num_scalars();
    log(&format!(
        "{} subjects, {} super-windows ({}), {} parameters",
        subjects.len(),
        set.len(),
        run.config,
        num_params
    ));

    let mut reports = Vec::new();
    let mut pooled = Confusion::new();
    for &k in &run.run_folds {
        let (report, params) = run_fold::<f32>(&run.train, &run.spec, &set, k, &folds[k], &mut |e, loss| {
            log(&format!("fold {k} epoch {} loss {loss:.5}", e + 1))
        })?;
        let ckpt = Checkpoint {
            spec: run.spec.clone(),
            params,
            adam: run.train.adam(),
            seed: run.train.seed,
            epoch: run.train.epochs as u64,
        };
        save_checkpoint(&run.output.join(format!("fold{k}.ckpt")), &ckpt)?;
        write_json(&run.output.join(format!("fold{k}.report.json")), &report)?;
        std::fs::write(run.output.join(format!("fold{k}.confusion.csv")), confusion_csv(&report.val.confusion))
            .map_err(|e| Error::io(run.output.join(format!("fold{k}.confusion.csv")), e))?;
        log(&format!(
            "fold {k} val acc {:.4} kappa {:.4}",
            report.val.metrics.acc, report.val.metrics.kappa
        ));
        pooled.merge(&report.val.confusion);
        reports.push(report);
    }

    let report = TrainReport {
        format_version: REPORT_VERSION,
        run_config: cfg,
        config_id: run.config,
        batch_size: run.train.batch_size,
        model_spec: run.spec.clone(),
        train_config: run.train.clone(),
        num_params,
        subjects,
        skipped_subjects: skipped,
        summary: CvSummary::from_folds(reports),
        pooled: EvalReport::from_confusion(pooled)?,
    };
    write_json(&run.output.join("report.json"), &report)?;
    write_text(&run.output.join("report.txt"), &render_train_report(&report))?;
    write_text(&run.output.join("confusion.csv"), &confusion_csv(&report.pooled.confusion))?;
    Ok(report)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    super::binfmt::write_file(path, text.as_bytes()).map_err(CliError::from)
}

/// Scores a checkpoint on `subjects` (all manifest subjects with grids when
/// empty) under the run config's super-window configuration. Writes
/// `<out>.json` and `<out>.confusion.csv` when `out` is given.
pub fn cmd_eval(
    config_path: &Path,
    checkpoint: &Path,
    subjects: &[String],
    out: Option<&Path>,
) -> CliResult<EvalDocument> {
    let (cfg, run) = load_run(config_path, None)?;
    let ckpt = load_checkpoint_for(checkpoint, &run.spec)?;
    let (mut grids, _) = run_subjects(&run)?;
    if !subjects.is_empty() {
        if let Some(missing) = subjects.iter().find(|s| !grids.iter().any(|g| &&g.subject_id == s)) {
            return Err(CliError::Usage(format!("subject {missing:?} has no grid")));
        }
        grids.retain(|g| subjects.contains(&g.subject_id));
    }
    let set = build_all(&grids, &run.config.spec())?;
    let report = evaluate(&ckpt.params, &run.spec, &set)?;
    let doc = EvalDocument {
        format_version: REPORT_VERSION,
        run_config: cfg,
        checkpoint: checkpoint.display().to_string(),
        subjects: grids.iter().map(|g| g.subject_id.clone()).collect(),
        report,
    };
    if let Some(out) = out {
        write_json(&out.with_extension("json"), &doc)?;
        write_text(&out.with_extension("confusion.csv"), &confusion_csv(&doc.report.confusion))?;
    }
    Ok(doc)
}

/// Renders a training or evaluation report file as text.
pub fn cmd_report(path: &Path) -> CliResult<String> {
    if let Ok(r) = read_json::<TrainReport>(path) {
        return Ok(render_train_report(&r));
    }
    let doc: EvalDocument = read_json(path)?;
    Ok(render_eval(&doc.report))
}
