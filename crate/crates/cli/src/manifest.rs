//! Run manifests: a training run (or a batch of seeds) fully described by
//! one document, with CSV metrics and JSON checkpoints as outputs.

use std::fs;
use std::path::{Path, PathBuf};

use alb_rl::train::{train, Algo, EpisodeRecord, Masking, Mode, RunConfig, TrainOutcome};
use alb_sim::{solve, FactoryConfig, Solved};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// A reproducible batch: one instance, one configuration, many seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub instance: PathBuf,
    pub algo: Algo,
    pub mode: Mode,
    pub masking: Masking,
    pub seeds: Vec<u64>,
    pub episodes: u32,
    pub out_dir: PathBuf,
    /// Solve the instance first and record the optimum alongside the runs.
    #[serde(default = "default_true")]
    pub solve_oracle: bool,
    #[serde(default)]
    pub stop_on_convergence: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes_run: u32,
    pub convergence_episode: Option<u32>,
    pub best_k_end: u32,
    pub infeasible_executed: u64,
    pub infeasible_attempts: u64,
    pub sfc_invocations: u64,
    pub metrics_csv: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub k_opt: Option<u32>,
    pub seeds: Vec<SeedSummary>,
}

/// Environment override for episode budgets.
pub const EPISODE_BUDGET_ENV: &str = "ALB_EPISODE_BUDGET";
/// Environment override for exact-solver node budgets.
pub const NODE_BUDGET_ENV: &str = "ALB_NODE_BUDGET";

pub fn episode_budget_override() -> Option<u32> {
    std::env::var(EPISODE_BUDGET_ENV).ok().and_then(|v| v.parse().ok())
}

pub fn node_budget_override() -> Option<u64> {
    std::env::var(NODE_BUDGET_ENV).ok().and_then(|v| v.parse().ok())
}

/// Executes every seed of the manifest sequentially, writing one metrics CSV
/// and two checkpoints per seed plus a batch summary JSON.
pub fn run_training(manifest: &RunManifest, config: &FactoryConfig) -> Result<BatchSummary> {
    fs::create_dir_all(&manifest.out_dir)
        .with_context(|| format!("creating {}", manifest.out_dir.display()))?;

    let episodes = episode_budget_override().unwrap_or(manifest.episodes);

    let k_opt = if manifest.solve_oracle {
        match solve(config, node_budget_override())? {
            Solved::Optimal(r) => Some(r.k_opt),
            Solved::InfeasibleWithinHorizon { .. } => None,
        }
    } else {
        None
    };

    let mut seeds = Vec::new();
    for &seed in &manifest.seeds {
        let mut run = RunConfig::new(manifest.algo, manifest.mode);
        run.masking = manifest.masking;
        run.seed = seed;
        run.episodes = episodes;
        run.target_k_end = k_opt;
        run.stop_on_convergence = manifest.stop_on_convergence;

        let outcome = train(config, &run)?;
        let summary = write_seed_artifacts(&manifest.out_dir, &run, &outcome, k_opt)?;
        seeds.push(summary);
    }

    let batch = BatchSummary { k_opt, seeds };
    let summary_path = manifest.out_dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&batch)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    let manifest_path = manifest.out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(manifest)?)?;
    Ok(batch)
}

fn run_stem(run: &RunConfig) -> String {
    format!("{}_{}_mask_{}_seed{}", run.algo, run.mode, run.masking, run.seed)
}

pub fn write_seed_artifacts(
    out_dir: &Path,
    run: &RunConfig,
    outcome: &TrainOutcome,
    k_opt: Option<u32>,
) -> Result<SeedSummary> {
    let stem = run_stem(run);
    let metrics_csv = out_dir.join(format!("{stem}.csv"));
    fs::write(&metrics_csv, metrics_to_csv(&outcome.records, run, k_opt))?;

    let run_config_path = out_dir.join(format!("{stem}.run.json"));
    fs::write(&run_config_path, serde_json::to_string_pretty(run)?)?;

    let final_checkpoint = out_dir.join(format!("{stem}.final.json"));
    fs::write(&final_checkpoint, serde_json::to_string(&outcome.final_policy.to_checkpoint(run))?)?;
    let best_checkpoint = out_dir.join(format!("{stem}.best.json"));
    fs::write(&best_checkpoint, serde_json::to_string(&outcome.best_policy.to_checkpoint(run))?)?;

    Ok(SeedSummary {
        seed: run.seed,
        episodes_run: outcome.episodes_run,
        convergence_episode: outcome.convergence_episode,
        best_k_end: outcome.best_k_end,
        infeasible_executed: outcome.infeasible_executed,
        infeasible_attempts: outcome.infeasible_attempts,
        sfc_invocations: outcome.sfc_invocations,
        metrics_csv,
        final_checkpoint,
        best_checkpoint,
    })
}

/// Per-episode metrics as CSV. The optimum, when known, is repeated in its
/// own column so plots can draw the reference line directly.
pub fn metrics_to_csv(records: &[EpisodeRecord], run: &RunConfig, k_opt: Option<u32>) -> String {
    let loss_columns = records.first().map_or(1, |r| r.losses.len());
    let mut header = String::from("episode,k_end,k_opt,cumulative_reward");
    if loss_columns == 1 {
        header.push_str(",loss");
    } else {
        for i in 0..loss_columns {
            header.push_str(&format!(",loss_agent{i}"));
        }
    }
    header.push_str(match run.algo {
        Algo::Dqn => ",epsilon",
        Algo::Ppo => ",entropy",
    });
    header.push_str(",wall_ms\n");

    let mut out = header;
    let k_opt_cell = k_opt.map_or(String::new(), |k| k.to_string());
    for r in records {
        out.push_str(&format!("{},{},{},{}", r.episode, r.k_end, k_opt_cell, r.cumulative_reward));
        for l in &r.losses {
            out.push_str(&format!(",{l}"));
        }
        out.push_str(&format!(",{},{:.3}\n", r.explore, r.wall_ms));
    }
    out
}
