//! Replication driver: runs one sampler configuration across independent
//! replications, computes per-run mESS reports, and aggregates medians into a
//! benchmark table row.
//!
//! Replications are embarrassingly parallel and run on rayon by default
//! (bounded by `jobs`); building without the `parallel` feature, or passing
//! `jobs = Some(1)`, uses the sequential path. Each replication owns its RNG
//! streams seeded as `base_seed ⊕ replication index`, so results do not
//! depend on scheduling and aggregation is order-independent.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::diagnostics::{self, MessReport};
use crate::error::{Error, Result};
use crate::io::{self, BenchmarkTable, ColumnMapping, TableCell, TableKey};
use crate::moment::MomentModel;
use crate::prior::PriorSpec;
use crate::samplers::{run_chain, RunResult, SamplerConfig};
use crate::synth::{self, SynthConfig};

fn default_replications() -> usize {
    100
}

/// Data source for an experiment: a synthetic design regenerated per
/// replication, or a CSV file with a role mapping (shared across
/// replications, chains differing only by seed).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Synthetic(SynthConfig),
    Csv {
        path: PathBuf,
        mapping: ColumnMapping,
    },
}

impl Scenario {
    pub fn label(&self) -> String {
        match self {
            Scenario::Synthetic(_) => "synthetic".into(),
            Scenario::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
        }
    }
}

/// One experiment: scenario × prior × sampler, replicated `replications`
/// times with per-replication seed `base_seed ⊕ index`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Upper bound on worker threads; `Some(1)` forces the sequential path.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidArgument("replications must be >= 1".into()));
        }
        if let Scenario::Synthetic(sc) = &self.scenario {
            sc.validate()?;
        }
        self.sampler.validate()
    }
}

/// One completed replication.
#[derive(Debug)]
pub struct RunArtifact {
    pub replication: usize,
    pub result: RunResult,
    pub mess: MessReport,
}

/// A replication that aborted, recorded rather than fatal.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub algorithm: String,
    pub message: String,
}

/// Everything an experiment produced: the table row(s) over completed
/// replications plus any recorded failures.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub table: BenchmarkTable,
    pub artifacts: Vec<RunArtifact>,
    pub failures: Vec<ReplicationFailure>,
}

fn run_one(
    config: &ExperimentConfig,
    shared_model: Option<&MomentModel>,
    replication: usize,
) -> Result<RunArtifact> {
    let seed = config.base_seed ^ replication as u64;
    let mut sampler = config.sampler;
    sampler.seed = seed;

    let result = match (&config.scenario, shared_model) {
        (Scenario::Synthetic(sc), _) => {
            let data_cfg = SynthConfig::new(sc.n, sc.k, seed);
            let (data, _) = synth::generate(&data_cfg)?;
            let model = MomentModel::new(data)?;
            run_chain(&model, config.prior, &sampler)?
        }
        (Scenario::Csv { .. }, Some(model)) => run_chain(model, config.prior, &sampler)?,
        (Scenario::Csv { path, mapping }, None) => {
            let model = MomentModel::new(io::ingest_csv(path, mapping)?)?;
            run_chain(&model, config.prior, &sampler)?
        }
    };
    let mess = diagnostics::mess(&result.draws, result.sampling_seconds)?;
    Ok(RunArtifact {
        replication,
        result,
        mess,
    })
}

#[cfg(feature = "parallel")]
fn map_replications<F>(reps: usize, jobs: Option<usize>, f: F) -> Result<Vec<Result<RunArtifact>>>
where
    F: Fn(usize) -> Result<RunArtifact> + Sync,
{
    match jobs {
        Some(1) => Ok((0..reps).map(f).collect()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(|| (0..reps).into_par_iter().map(&f).collect()))
        }
        None => Ok((0..reps).into_par_iter().map(&f).collect()),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_replications<F>(reps: usize, _jobs: Option<usize>, f: F) -> Result<Vec<Result<RunArtifact>>>
where
    F: Fn(usize) -> Result<RunArtifact> + Sync,
{
    Ok((0..reps).map(f).collect())
}

/// Runs the experiment: per replication, generate or load data, run the
/// chain, compute the mESS report; aggregate the medians over completed
/// replications into a table row. When `out_dir` is given, writes one JSON
/// artifact per completed run under `out_dir/runs/`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutcome> {
    config.validate()?;

    // CSV data is immutable and shared across replications
    let shared_model = match &config.scenario {
        Scenario::Csv { path, mapping } => Some(MomentModel::new(io::ingest_csv(path, mapping)?)?),
        Scenario::Synthetic(_) => None,
    };

    let outcomes = map_replications(config.replications, config.jobs, |r| {
        run_one(config, shared_model.as_ref(), r)
    })?;

    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(a) => artifacts.push(a),
            Err(e) => failures.push(ReplicationFailure {
                replication: r,
                algorithm: config.sampler.algorithm.label().into(),
                message: e.to_string(),
            }),
        }
    }
    if artifacts.is_empty() {
        return Err(Error::ChainDegenerate(format!(
            "all {} replications failed (first: {})",
            config.replications,
            failures
                .first()
                .map(|f| f.message.as_str())
                .unwrap_or("unknown")
        )));
    }

    if let Some(dir) = out_dir {
        let runs_dir = dir.join("runs");
        fs::create_dir_all(&runs_dir)?;
        let label = config.scenario.label();
        for a in &artifacts {
            let name = format!(
                "{label}_{}_rep{:03}.json",
                config.sampler.algorithm.label(),
                a.replication
            );
            io::write_results(&a.result, &a.mess, &runs_dir.join(name), None)?;
        }
    }

    let reports: Vec<MessReport> = artifacts.iter().map(|a| a.mess).collect();
    let median = diagnostics::median_across_runs(&reports)?;
    let first = &artifacts[0].result;
    let mut table = BenchmarkTable::new();
    table.insert(
        TableKey {
            scenario: config.scenario.label(),
            n: first.n,
            k: first.k,
            algorithm: config.sampler.algorithm,
        },
        TableCell {
            mess_per_iter: median.mess_per_iter,
            mess_per_sec: median.mess_per_sec,
            completed: artifacts.len(),
        },
    );

    Ok(ExperimentOutcome {
        table,
        artifacts,
        failures,
    })
}
