use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use rayon::prelude::*;
use rift_core::log::{EpisodeLog, Role};
use rift_core::metrics::{collision_events, MetricsReport};
use rift_core::policy::{Checkpoint, ScoringParams};
use rift_core::reward::Style;
use rift_core::sim::run_episode;
use rift_core::trainer::{initial_params, run_training, snapshot_hash};
use rift_core::worldmap::{LoadedScenario, Scenario};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const SUMMARY_SCHEMA: &str = "rift-sim-summary-v1";

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn pretty_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value).map_err(rift_core::Error::from)?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn load_scenario(cfg: &RunConfig) -> CliResult<LoadedScenario> {
    match &cfg.scenario {
        Some(p) => Scenario::from_path(p).map_err(|e| CliError::input(p, e)),
        None => Ok(Scenario::four_way_default(0, Style::Normal).load()?),
    }
}

pub fn load_checkpoint(path: &Path) -> CliResult<ScoringParams> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    ck.to_params().map_err(|e| CliError::input(path, e))
}

fn policy(cfg: &RunConfig) -> CliResult<ScoringParams> {
    let params = match &cfg.checkpoint {
        Some(p) => load_checkpoint(p)?,
        None => initial_params(&cfg.sim, &cfg.train, cfg.seed),
    };
    if params.input_dim != cfg.sim.features.dim() {
        return Err(CliError::Usage(format!(
            "checkpoint expects {} features but the simulator produces {}",
            params.input_dim,
            cfg.sim.features.dim()
        )));
    }
    Ok(params)
}

pub fn cmd_scenario(out: &Path, seed: u64, style: Style) -> CliResult<()> {
    let sc = Scenario::four_way_default(seed, style);
    sc.clone().load()?;
    let mut text = sc.to_json()?;
    text.push('\n');
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(out, text.as_bytes())
}

#[derive(Debug, Serialize)]
struct EpisodeSummary {
    id: u64,
    file: String,
    steps: usize,
    cbv: Vec<u32>,
    decisions: usize,
    mean_executed_return: Option<f64>,
    collisions: usize,
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    schema: &'static str,
    scenario: String,
    seed: u64,
    style: Style,
    policy: String,
    episodes: Vec<EpisodeSummary>,
}

pub fn episode_file(id: u64) -> String {
    format!("episode_{id}.csv")
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    if cfg.episodes == 0 {
        return Err(CliError::Usage("episodes must be positive".into()));
    }
    let sc = load_scenario(cfg)?;
    let params = policy(cfg)?;
    let reward = cfg.train.reward_for(sc.scenario.style);
    let outcomes = (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|ep| run_episode(&sc, &cfg.sim, &reward, &params, ep, cfg.seed))
        .collect::<rift_core::Result<Vec<_>>>()?;
    create_dir(out)?;
    let mut episodes = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        let file = episode_file(o.log.episode);
        write_file(&out.join(&file), o.log.to_csv_string()?.as_bytes())?;
        let executed: Vec<f64> = o.decisions.iter().map(|d| d.returns[d.selected]).collect();
        episodes.push(EpisodeSummary {
            id: o.log.episode,
            file,
            steps: o.log.steps.len(),
            cbv: o.log.ids_with_role(Role::Cbv),
            decisions: o.decisions.len(),
            mean_executed_return: (!executed.is_empty())
                .then(|| executed.iter().sum::<f64>() / executed.len() as f64),
            collisions: collision_events(&o.log),
        });
    }
    let summary = SimulationSummary {
        schema: SUMMARY_SCHEMA,
        scenario: sc.scenario.name.clone(),
        seed: cfg.seed,
        style: reward.style,
        policy: if cfg.checkpoint.is_some() {
            snapshot_hash(&params)
        } else {
            "uniform".into()
        },
        episodes,
    };
    write_file(&out.join("summary.json"), &pretty_json(&summary)?)
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let sc = load_scenario(cfg)?;
    let init = match &cfg.checkpoint {
        Some(_) => Some(policy(cfg)?),
        None => None,
    };
    let outcome = run_training(
        std::slice::from_ref(&sc),
        &cfg.sim,
        &cfg.train,
        cfg.seed,
        init,
    )?;
    create_dir(out)?;
    let ck = Checkpoint::from_params(&outcome.params);
    write_file(&out.join("checkpoint.json"), &pretty_json(&ck)?)?;
    let mut stats = Vec::new();
    outcome.write_stats_jsonl(&mut stats)?;
    write_file(&out.join("train_stats.jsonl"), &stats)
}

/// Episode CSV files in `dir`, ordered by episode id.
pub fn episode_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::input(dir, e))?.path();
        let id = path.file_name().and_then(|n| n.to_str()).and_then(|n| {
            n.strip_prefix("episode_")?
                .strip_suffix(".csv")?
                .parse::<u64>()
                .ok()
        });
        if let Some(id) = id {
            files.push((id, path));
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

pub fn read_logs(dir: &Path) -> CliResult<Vec<EpisodeLog>> {
    let files = episode_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no episode_<id>.csv files in {}",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|p| EpisodeLog::from_path(p).map_err(|e| CliError::input(p, e)))
        .collect()
}

pub fn cmd_metrics(cfg: &RunConfig, logs: &Path, out: &Path) -> CliResult<()> {
    let logs = read_logs(logs)?;
    let report = MetricsReport::from_logs(&logs, &cfg.metrics)?;
    create_dir(out)?;
    let mut json = report.to_json()?;
    json.push('\n');
    write_file(&out.join("metrics.json"), json.as_bytes())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&out.join("metrics.csv"), &csv)
}

pub fn write_pair(out: &Path, stem: &str, svg: &str, csv: &str) -> CliResult<()> {
    write_file(&out.join(format!("{stem}.svg")), svg.as_bytes())?;
    write_file(&out.join(format!("{stem}.csv")), csv.as_bytes())
}

pub fn prepare_out(out: &Path) -> CliResult<()> {
    create_dir(out)
}
