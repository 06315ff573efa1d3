//! Regret and Fenchel diagnostics, and the Monte-Carlo stability harness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{
    default_stride, simulate, InitSpec, LearnerState, RunEnd, RunSpec, Trajectory,
};
use crate::error::{Error, Result};
use crate::feedback::{replica_seed, rng_from_seed, FeedbackMode, Schedule};
use crate::game::{l1_distance, Game, MixedProfile};
use crate::output::digest_of;
use crate::regularizer::{Kernel, KernelKind};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "FTRL_LAB_WORKERS";

/// Running external regret of one player.
#[derive(Debug, Clone)]
pub struct RegretTracker {
    player: usize,
    fixed: Vec<f64>,
    realized: f64,
    buffer: Vec<f64>,
}

impl RegretTracker {
    pub fn new(game: &Game, player: usize) -> Result<Self> {
        if player >= game.num_players() {
            return Err(Error::IndexOutOfBounds(format!("player {player}")));
        }
        let n = game.num_actions(player);
        Ok(RegretTracker {
            player,
            fixed: vec![0.0; n],
            realized: 0.0,
            buffer: vec![0.0; n],
        })
    }

    /// Adds `weight` rounds played at `strategies`.
    pub fn record(&mut self, game: &Game, strategies: &[Vec<f64>], weight: f64) {
        game.payoff_vector_into(strategies, self.player, &mut self.buffer);
        let own = &strategies[self.player];
        let mut earned = 0.0;
        for ((total, &v), &x) in self.fixed.iter_mut().zip(&self.buffer).zip(own) {
            *total += weight * v;
            earned += v * x;
        }
        self.realized += weight * earned;
    }

    /// `max_a Σ u_i(a; X_{-i,n}) − Σ u_i(X_n)` so far.
    pub fn value(&self) -> f64 {
        self.fixed.iter().copied().fold(f64::NEG_INFINITY, f64::max) - self.realized
    }
}

/// Cumulative regret after each snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSeries {
    /// Number of rounds covered by each value.
    pub rounds: Vec<u64>,
    pub values: Vec<f64>,
    /// True when snapshots were thinned, so each stands in for `stride` rounds.
    pub subsampled: bool,
}

impl RegretSeries {
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Regret of `player` along `trajectory`; exact for stride 1.
pub fn regret(trajectory: &Trajectory, game: &Game, player: usize) -> Result<RegretSeries> {
    let mut tracker = RegretTracker::new(game, player)?;
    let weight = trajectory.stride as f64;
    let mut series = RegretSeries {
        rounds: Vec::with_capacity(trajectory.snapshots.len()),
        values: Vec::with_capacity(trajectory.snapshots.len()),
        subsampled: trajectory.stride > 1,
    };
    for s in &trajectory.snapshots {
        if s.strategies.len() != game.num_players() {
            return Err(Error::DimensionMismatch("snapshot does not match the game".into()));
        }
        MixedProfile::new(s.strategies.clone())?.check(game)?;
        tracker.record(game, &s.strategies, weight);
        series.rounds.push(s.step + trajectory.stride);
        series.values.push(tracker.value());
    }
    Ok(series)
}

/// `Σ_i F_{h_i}(x*_i, Y_i)`.
pub fn total_fenchel(kernels: &[Kernel], x_star: &MixedProfile, scores: &[Vec<f64>]) -> Result<f64> {
    if kernels.len() != x_star.num_players() || scores.len() != kernels.len() {
        return Err(Error::DimensionMismatch("kernels, target and scores disagree".into()));
    }
    kernels
        .iter()
        .zip(&x_star.strategies)
        .zip(scores)
        .map(|((k, p), y)| k.fenchel(p, y))
        .sum()
}

/// Fenchel coupling to `x_star` at every snapshot.
pub fn fenchel_trace(
    trajectory: &Trajectory,
    kernels: &[Kernel],
    x_star: &MixedProfile,
) -> Result<Vec<f64>> {
    trajectory
        .snapshots
        .iter()
        .map(|s| total_fenchel(kernels, x_star, &s.scores))
        .collect()
}

/// Either one kernel for everybody or one per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelChoice {
    Shared(KernelKind),
    PerPlayer(Vec<KernelKind>),
}

impl KernelChoice {
    pub fn resolve(&self, players: usize) -> Vec<Kernel> {
        match self {
            KernelChoice::Shared(k) => vec![Kernel::from(*k); players],
            KernelChoice::PerPlayer(ks) => ks.iter().map(|&k| Kernel::from(k)).collect(),
        }
    }
}

/// A stability experiment (also used, with one replica, for single runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: Game,
    pub kernels: KernelChoice,
    pub feedback: FeedbackMode,
    pub schedule: Schedule,
    pub horizon: u64,
    #[serde(default = "one")]
    pub replicas: u64,
    /// The equilibrium `x*` the neighbourhoods are centred on.
    pub target: MixedProfile,
    /// Where runs start; defaults to `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_target: Option<MixedProfile>,
    #[serde(default)]
    pub init_radius: f64,
    /// L1 radius of the neighbourhood replicas must stay in.
    pub stay_radius: f64,
    /// L1 radius counted as convergence at the horizon.
    pub converge_radius: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stride: Option<u64>,
    /// Worker threads; does not affect results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Fields that were filled with defaults during [`ExperimentConfig::resolve`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub defaults_applied: Vec<String>,
}

fn one() -> u64 {
    1
}

impl ExperimentConfig {
    /// Fills a missing seed (0) and stride, recording each default.
    pub fn resolve(&mut self) {
        if self.seed.is_none() {
            self.seed = Some(0);
            self.defaults_applied.push("seed".into());
        }
        if self.stride.is_none() {
            self.stride = Some(default_stride(self.horizon));
            self.defaults_applied.push("stride".into());
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn stride(&self) -> u64 {
        self.stride.unwrap_or_else(|| default_stride(self.horizon))
    }

    pub fn kernels(&self) -> Vec<Kernel> {
        self.kernels.resolve(self.game.num_players())
    }

    /// Checks every invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let players = self.game.num_players();
        if let KernelChoice::PerPlayer(ks) = &self.kernels {
            if ks.len() != players {
                return Err(Error::config(
                    "kernels",
                    format!("expected {players} entries, found {}", ks.len()),
                ));
            }
        }
        self.schedule
            .check_fields()
            .map_err(|e| Error::config("schedule", e.to_string()))?;
        if let FeedbackMode::Noisy(noise) = &self.feedback {
            noise
                .validate()
                .map_err(|e| Error::config("feedback", e.to_string()))?;
        }
        let report = self.schedule.validate(&self.feedback);
        if !report.passed {
            return Err(Error::config(
                "schedule",
                format!(
                    "inadmissible for {} feedback: {}",
                    self.feedback.name(),
                    report.failures.join("; ")
                ),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.replicas < 1 {
            return Err(Error::config("replicas", "must be at least 1"));
        }
        if self.stride == Some(0) {
            return Err(Error::config("stride", "must be at least 1"));
        }
        self.target
            .check(&self.game)
            .map_err(|e| Error::config("target", e.to_string()))?;
        if let Some(init) = &self.init_target {
            init.check(&self.game)
                .map_err(|e| Error::config("init_target", e.to_string()))?;
        }
        if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            return Err(Error::config("init_radius", "must be finite and nonnegative"));
        }
        for (name, r) in [("stay_radius", self.stay_radius), ("converge_radius", self.converge_radius)] {
            if !(r > 0.0) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if self.converge_radius > self.stay_radius {
            return Err(Error::config("converge_radius", "must not exceed stay_radius"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        Ok(())
    }

    /// Hash of everything that influences results (worker count excluded).
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("workers");
            map.insert("seed".into(), json!(self.seed()));
            map.insert("stride".into(), json!(self.stride()));
        }
        digest_of(&value)
    }

    /// The run of replica `index`.
    pub fn run_spec(&self, index: u64) -> RunSpec {
        RunSpec {
            game: self.game.clone(),
            kernels: self.kernels(),
            mode: self.feedback.clone(),
            schedule: self.schedule,
            horizon: self.horizon,
            init: InitSpec {
                target: self.init_target.clone().unwrap_or_else(|| self.target.clone()),
                radius: self.init_radius,
            },
            stride: self.stride(),
            seed: replica_seed(self.seed(), index),
        }
    }
}

/// Worker count: `requested` (or the available parallelism), capped by
/// [`WORKERS_ENV`] when that is set.
pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    let base = requested.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    match std::env::var(WORKERS_ENV) {
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(cap) if cap >= 1 => Ok(base.min(cap)),
            _ => Err(Error::param(WORKERS_ENV, format!("`{text}` is not a positive integer"))),
        },
        Err(_) => Ok(base.max(1)),
    }
}

/// Outcome of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOutcome {
    pub index: u64,
    pub seed: u64,
    pub stayed: bool,
    pub converged: bool,
    /// First recorded step outside the stay neighbourhood.
    pub escape_step: Option<u64>,
    pub final_distance: f64,
    pub final_fenchel: f64,
    /// Divergence diagnostic when the run aborted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

/// Empirical stability estimates over all replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config_digest: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub stay_fraction: f64,
    pub converge_fraction: f64,
    pub final_distances: Vec<f64>,
    pub final_fenchel: Vec<f64>,
    /// First escape step per replica, `null` when it never left.
    pub escape_steps: Vec<Option<u64>>,
    /// Replicas whose scores diverged; they count as escaped and not converged.
    pub aborted: u64,
    pub replicas: Vec<ReplicaOutcome>,
}

/// Runs one replica of `config` without recording a trajectory.
pub fn run_replica(config: &ExperimentConfig, index: u64) -> Result<ReplicaOutcome> {
    let spec = config.run_spec(index);
    let target = &config.target.strategies;
    let stride = spec.stride;
    let mut rng = rng_from_seed(spec.seed);
    let mut escape_step = None;
    let end = simulate(&spec, &mut rng, |view| {
        if escape_step.is_none()
            && view.step % stride == 0
            && l1_distance(view.strategies, target) > config.stay_radius
        {
            escape_step = Some(view.step);
        }
    })?;
    let (state, aborted): (LearnerState, Option<String>) = match end {
        RunEnd::Completed(state) => (state, None),
        RunEnd::Aborted { state, step, detail } => {
            escape_step = Some(escape_step.map_or(step, |e: u64| e.min(step)));
            (state, Some(detail))
        }
    };
    let final_distance = l1_distance(&state.strategies.strategies, target);
    if escape_step.is_none() && final_distance > config.stay_radius {
        escape_step = Some(state.step);
    }
    let final_fenchel = total_fenchel(&spec.kernels, &config.target, &state.scores.scores)?;
    Ok(ReplicaOutcome {
        index,
        seed: spec.seed,
        stayed: escape_step.is_none(),
        converged: aborted.is_none() && final_distance <= config.converge_radius,
        escape_step,
        final_distance,
        final_fenchel,
        aborted,
    })
}

/// Runs all replicas in parallel and aggregates them in replica order.
pub fn stability_experiment(config: &ExperimentConfig) -> Result<StabilityReport> {
    let mut config = config.clone();
    config.resolve();
    config.validate()?;
    let workers = worker_count(config.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    let outcomes: Vec<ReplicaOutcome> = pool.install(|| {
        (0..config.replicas)
            .into_par_iter()
            .map(|i| run_replica(&config, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let total = outcomes.len() as f64;
    let count = |f: fn(&ReplicaOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64;
    Ok(StabilityReport {
        config_digest: config.digest(),
        seed: config.seed(),
        stay_fraction: count(|o| o.stayed) / total,
        converge_fraction: count(|o| o.converged) / total,
        final_distances: outcomes.iter().map(|o| o.final_distance).collect(),
        final_fenchel: outcomes.iter().map(|o| o.final_fenchel).collect(),
        escape_steps: outcomes.iter().map(|o| o.escape_step).collect(),
        aborted: outcomes.iter().filter(|o| o.aborted.is_some()).count() as u64,
        replicas: outcomes,
        config,
    })
}

/// One histogram bin `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: u64,
    pub end: u64,
    pub count: u64,
}

/// Summary of first-escape times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeSummary {
    pub escaped: u64,
    pub never_escape_fraction: f64,
    pub median: Option<f64>,
    pub lower_quartile: Option<f64>,
    pub upper_quartile: Option<f64>,
    /// Power-of-two bins `[0,1), [1,2), [2,4), …`; empty bins omitted.
    pub histogram: Vec<HistogramBin>,
}

fn quantile(sorted: &[u64], q: f64) -> Option<f64> {
    let last = sorted.len().checked_sub(1)?;
    let pos = q * last as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] as f64 + frac * (sorted[hi] as f64 - sorted[lo] as f64))
}

/// Median, quartiles and histogram of escape steps among escaping replicas.
pub fn escape_statistics(report: &StabilityReport) -> EscapeSummary {
    let mut steps: Vec<u64> = report.escape_steps.iter().flatten().copied().collect();
    steps.sort_unstable();
    let total = report.escape_steps.len().max(1) as f64;
    let mut histogram: Vec<HistogramBin> = Vec::new();
    for &s in &steps {
        let (start, end) = if s == 0 {
            (0, 1)
        } else {
            let start = 1u64 << (63 - s.leading_zeros());
            (start, start.saturating_mul(2))
        };
        match histogram.last_mut() {
            Some(bin) if bin.start == start => bin.count += 1,
            _ => histogram.push(HistogramBin { start, end, count: 1 }),
        }
    }
    EscapeSummary {
        escaped: steps.len() as u64,
        never_escape_fraction: (report.escape_steps.len() - steps.len()) as f64 / total,
        median: quantile(&steps, 0.5),
        lower_quartile: quantile(&steps, 0.25),
        upper_quartile: quantile(&steps, 0.75),
        histogram,
    }
}
