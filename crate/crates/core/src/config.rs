//! Config parsing and the `solve`, `run` and `experiment` commands.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{run_observed, LearnerState, RunSpec};
use crate::error::{Error, Result};
use crate::experiment::{
    escape_statistics, stability_experiment, total_fenchel, EscapeSummary, ExperimentConfig,
    RegretTracker, StabilityReport,
};
use crate::game::{EquilibriumClass, Game, MixedProfile, DEFAULT_TOL};
use crate::output::to_json_pretty;

/// Process exit code for success.
pub const EXIT_OK: i32 = 0;
/// Process exit code for bad input.
pub const EXIT_VALIDATION: i32 = 2;
/// Process exit code for a run that failed after starting.
pub const EXIT_RUNTIME: i32 = 3;

pub fn exit_code(error: &Error) -> i32 {
    if error.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub replicas: Option<u64>,
    pub stride: Option<u64>,
}

pub fn parse_game(text: &str) -> Result<Game> {
    Game::from_json(text)
}

fn syntax(e: serde_json::Error) -> Error {
    Error::config("$", e.to_string())
}

/// Parses and validates an experiment config. `game`, when given, replaces
/// the config's own `game` field (which may then be omitted).
pub fn parse_experiment(
    text: &str,
    game: Option<&Game>,
    overrides: &Overrides,
) -> Result<ExperimentConfig> {
    let mut value: Value = serde_json::from_str(text).map_err(syntax)?;
    let map = value
        .as_object_mut()
        .ok_or_else(|| Error::config("$", "expected a JSON object"))?;
    if let Some(g) = game {
        map.insert("game".into(), serde_json::to_value(g)?);
    }
    let mut config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    if let Some(seed) = overrides.seed {
        config.seed = Some(seed);
        config.defaults_applied.retain(|d| d != "seed");
    }
    if let Some(h) = overrides.horizon {
        config.horizon = h;
    }
    if let Some(r) = overrides.replicas {
        config.replicas = r;
    }
    if let Some(s) = overrides.stride {
        config.stride = Some(s);
        config.defaults_applied.retain(|d| d != "stride");
    }
    config.resolve();
    config.validate()?;
    Ok(config)
}

/// Parses `"p1:0.5,0.5;p2:0.5,0.5"`; the `pN:` labels are optional but, when
/// present, must be `p1`, `p2`, … in order.
pub fn parse_candidate(text: &str) -> Result<MixedProfile> {
    let mut strategies = Vec::new();
    for (i, part) in text.split(';').map(str::trim).enumerate() {
        let path = format!("candidate[{i}]");
        let body = match part.split_once(':') {
            Some((label, body)) => {
                if label.trim() != format!("p{}", i + 1) {
                    return Err(Error::config(path, format!("expected label p{}", i + 1)));
                }
                body
            }
            None => part,
        };
        let probs = body
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(path.clone(), format!("`{}`: {e}", v.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        strategies.push(probs);
    }
    MixedProfile::new(strategies).map_err(|e| Error::config("candidate", e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedProfile {
    pub profile: MixedProfile,
    pub class: EquilibriumClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub players: usize,
    pub actions: Vec<usize>,
    pub pure_equilibria: Vec<ClassifiedProfile>,
    pub candidates: Vec<ClassifiedProfile>,
}

impl SolveReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "game: {} players, actions {:?}\npure Nash equilibria: {}\n",
            self.players,
            self.actions,
            self.pure_equilibria.len()
        );
        let describe = |c: &ClassifiedProfile| {
            let k = &c.class;
            format!(
                "  {:?}: nash={} pure={} fully_mixed={} quasi_strict={} strict={}{}\n",
                c.profile.strategies,
                k.is_nash,
                k.is_pure,
                k.is_fully_mixed,
                k.is_quasi_strict,
                k.is_strict,
                if k.degenerate { " (degenerate)" } else { "" }
            )
        };
        self.pure_equilibria.iter().for_each(|c| out += &describe(c));
        if !self.candidates.is_empty() {
            out += "candidates:\n";
            self.candidates.iter().for_each(|c| out += &describe(c));
        }
        out
    }
}

/// Enumerates pure equilibria and classifies `candidates`.
pub fn cmd_solve(game: &Game, candidates: &[MixedProfile]) -> Result<SolveReport> {
    let classify = |profile: MixedProfile| -> Result<ClassifiedProfile> {
        let class = game.classify(&profile, DEFAULT_TOL)?;
        Ok(ClassifiedProfile { profile, class })
    };
    let pure_equilibria = game
        .enumerate_pure_nash()?
        .iter()
        .map(|p| classify(MixedProfile::from_pure(game, p)?))
        .collect::<Result<_>>()?;
    let candidates = candidates
        .iter()
        .map(|c| {
            c.check(game).map_err(|e| Error::config("candidate", e.to_string()))?;
            classify(c.clone())
        })
        .collect::<Result<_>>()?;
    Ok(SolveReport {
        players: game.num_players(),
        actions: game.action_counts().to_vec(),
        pure_equilibria,
        candidates,
    })
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_digest: String,
    pub trajectory_digest: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub final_state: LearnerState,
    /// Exact external regret of each player over the whole horizon.
    pub regret: Vec<f64>,
    /// Fenchel coupling to the config's target at the final scores.
    pub final_fenchel: f64,
    pub snapshots: usize,
}

/// The single run described by `config` (replica seeding is not applied).
pub fn single_run_spec(config: &ExperimentConfig) -> RunSpec {
    RunSpec {
        seed: config.seed(),
        ..config.run_spec(0)
    }
}

/// Runs `config` once, writing `trajectory.csv` and `run.json` into `out`.
pub fn cmd_run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let mut config = config.clone();
    config.resolve();
    config.validate()?;
    let spec = single_run_spec(&config);
    let game = &config.game;
    let mut trackers = (0..game.num_players())
        .map(|i| RegretTracker::new(game, i))
        .collect::<Result<Vec<_>>>()?;
    let trajectory = run_observed(&spec, |view| {
        trackers
            .iter_mut()
            .for_each(|t| t.record(game, view.strategies, 1.0));
    })?;
    let summary = RunSummary {
        config_digest: config.digest(),
        trajectory_digest: trajectory.digest(),
        seed: config.seed(),
        final_fenchel: total_fenchel(
            &spec.kernels,
            &config.target,
            &trajectory.final_state.scores.scores,
        )?,
        regret: trackers.iter().map(RegretTracker::value).collect(),
        final_state: trajectory.final_state.clone(),
        snapshots: trajectory.snapshots.len(),
        config,
    };
    fs::create_dir_all(out)?;
    trajectory.write_csv(BufWriter::new(fs::File::create(out.join("trajectory.csv"))?))?;
    fs::write(out.join("run.json"), to_json_pretty(&summary)?)?;
    Ok(summary)
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    #[serde(flatten)]
    pub report: StabilityReport,
    pub escape_summary: EscapeSummary,
}

/// Runs the stability experiment and writes `report.json` into `out`.
pub fn cmd_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    let report = stability_experiment(config)?;
    let output = ExperimentOutput {
        escape_summary: escape_statistics(&report),
        report,
    };
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), to_json_pretty(&output)?)?;
    Ok(output)
}

/// Reads a file, mapping failures to a config error naming the path.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

/// Default output directory.
pub fn default_out() -> PathBuf {
    PathBuf::from("out")
}
