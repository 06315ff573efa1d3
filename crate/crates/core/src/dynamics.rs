//! The FTRL recursion: scores accumulate payoff estimates,
//! `Y_{n+1} = Y_n + γ_n v̂_n`, and play follows the choice map, `X_n = Q(Y_n)`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feedback::{draw_into, rng_from_seed, FeedbackMode, FeedbackSignal, Schedule};
use crate::game::{support, Game, MixedProfile, DEFAULT_TOL};
use crate::output::{digest_of, fmt_f64};
use crate::regularizer::{DualVector, Kernel, PREIMAGE_FLOOR};

/// Scores are recentred (max component subtracted) once a component exceeds this magnitude.
pub const RECENTER_THRESHOLD: f64 = 1e3;
/// Runs abort once a recentred score component exceeds this magnitude.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// Snapshot budget used by [`default_stride`].
pub const DEFAULT_SNAPSHOTS: u64 = 10_000;

/// Current scores, the strategies they induce, and the round counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub scores: DualVector,
    pub strategies: MixedProfile,
    pub step: u64,
}

fn check_kernels(game: &Game, kernels: &[Kernel]) -> Result<()> {
    if kernels.len() != game.num_players() {
        return Err(Error::DimensionMismatch(format!(
            "{} kernels for {} players",
            kernels.len(),
            game.num_players()
        )));
    }
    Ok(())
}

fn project_all(kernels: &[Kernel], scores: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    kernels
        .iter()
        .zip(scores)
        .map(|(k, y)| k.choice_map(y))
        .collect()
}

/// Initial state `Y_0 = g + η`, where `g` is a preimage of (a floored copy of)
/// `target` and `η` is uniform on `[-radius, radius]` per component.
pub fn init_state<R: Rng + ?Sized>(
    game: &Game,
    kernels: &[Kernel],
    target: &MixedProfile,
    radius: f64,
    rng: &mut R,
) -> Result<LearnerState> {
    check_kernels(game, kernels)?;
    target.check(game)?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::param("radius", "must be finite and nonnegative"));
    }
    let scores: Vec<Vec<f64>> = kernels
        .iter()
        .zip(&target.strategies)
        .map(|(k, x)| {
            let mut y = k.preimage(x, PREIMAGE_FLOOR);
            if radius > 0.0 {
                y.iter_mut()
                    .for_each(|v| *v += rng.random_range(-radius..=radius));
            }
            y
        })
        .collect();
    let strategies = project_all(kernels, &scores)?;
    Ok(LearnerState {
        scores: DualVector { scores },
        strategies: MixedProfile { strategies },
        step: 0,
    })
}

/// One FTRL update: `Y' = Y + γ·v̂`, `X' = Q(Y')`.
pub fn ftrl_step(
    kernels: &[Kernel],
    state: &LearnerState,
    signal: &FeedbackSignal,
    gamma: f64,
) -> Result<LearnerState> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", "must be positive and finite"));
    }
    let scores = &state.scores.scores;
    if kernels.len() != scores.len()
        || signal.vectors.len() != scores.len()
        || signal.vectors.iter().zip(scores).any(|(v, y)| v.len() != y.len())
    {
        return Err(Error::DimensionMismatch("signal does not match the scores".into()));
    }
    let mut next = state.clone();
    advance(kernels, &mut next, &signal.vectors, gamma)?;
    Ok(next)
}

fn advance(
    kernels: &[Kernel],
    state: &mut LearnerState,
    feedback: &[Vec<f64>],
    gamma: f64,
) -> Result<()> {
    let step = state.step;
    let diverged = |detail: String| Error::Divergence { step, detail };
    for (i, kernel) in kernels.iter().enumerate() {
        let y = &mut state.scores.scores[i];
        let mut largest = 0.0f64;
        for (score, v) in y.iter_mut().zip(&feedback[i]) {
            *score += gamma * v;
            largest = largest.max(score.abs());
        }
        if largest > RECENTER_THRESHOLD {
            let top = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            y.iter_mut().for_each(|v| *v -= top);
        }
        if let Some(bad) = y
            .iter()
            .find(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
        {
            return Err(diverged(format!("player {i} score component {bad:e}")));
        }
        kernel
            .choice_map_into(y, &mut state.strategies.strategies[i])
            .map_err(|e| diverged(e.to_string()))?;
    }
    state.step += 1;
    Ok(())
}

/// Residual of the per-step score identity for two actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub holds: bool,
    pub residual: f64,
}

/// Checks `[θ'(x'_a) − θ'(x_a)] − [θ'(x'_b) − θ'(x_b)] = γ·(v̂_a − v̂_b)` for
/// actions supported both before and after a step.
#[allow(clippy::too_many_arguments)]
pub fn step_identity_check(
    kernel: &Kernel,
    x_before: &[f64],
    x_after: &[f64],
    a: usize,
    b: usize,
    gamma: f64,
    vhat: &[f64],
    tol: f64,
) -> Result<IdentityCheck> {
    if x_before.len() != x_after.len() || vhat.len() != x_before.len() {
        return Err(Error::DimensionMismatch("strategy and feedback lengths differ".into()));
    }
    for action in [a, b] {
        if action >= x_before.len() {
            return Err(Error::IndexOutOfBounds(format!("action {action}")));
        }
        if !(x_before[action] > DEFAULT_TOL && x_after[action] > DEFAULT_TOL) {
            return Err(Error::Unsupported { action });
        }
    }
    let change = |c: usize| kernel.theta_prime(x_after[c]) - kernel.theta_prime(x_before[c]);
    let residual = ((change(a) - change(b)) - gamma * (vhat[a] - vhat[b])).abs();
    Ok(IdentityCheck {
        holds: residual <= tol,
        residual,
    })
}

/// Where a run starts: a target profile and a dual perturbation radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub target: MixedProfile,
    #[serde(default)]
    pub radius: f64,
}

/// Everything needed to reproduce a single run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub game: Game,
    pub kernels: Vec<Kernel>,
    pub mode: FeedbackMode,
    pub schedule: Schedule,
    pub horizon: u64,
    pub init: InitSpec,
    pub stride: u64,
    pub seed: u64,
}

/// `max(1, horizon / 10⁴)`.
pub fn default_stride(horizon: u64) -> u64 {
    (horizon / DEFAULT_SNAPSHOTS).max(1)
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        check_kernels(&self.game, &self.kernels)?;
        self.init.target.check(&self.game)?;
        self.schedule.check_fields()?;
        if self.horizon < 1 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        if self.stride < 1 {
            return Err(Error::param("stride", "must be at least 1"));
        }
        if let FeedbackMode::Noisy(noise) = &self.mode {
            noise.validate()?;
        }
        let report = self.schedule.validate(&self.mode);
        if !report.passed {
            return Err(Error::param(
                "schedule",
                format!("not admissible for {} feedback: {}", self.mode.name(), report.failures.join("; ")),
            ));
        }
        Ok(())
    }

    /// Hash of the run configuration (kernels enter by name).
    pub fn digest(&self) -> String {
        let kernels: Vec<&str> = self.kernels.iter().map(Kernel::name).collect();
        digest_of(&json!({
            "game": self.game,
            "kernels": kernels,
            "feedback": self.mode,
            "schedule": self.schedule,
            "horizon": self.horizon,
            "init": self.init,
            "stride": self.stride,
            "seed": self.seed,
        }))
    }
}

/// What a simulation loop exposes about round `n` before the update.
pub struct RoundView<'a> {
    pub step: u64,
    pub strategies: &'a [Vec<f64>],
    pub scores: &'a [Vec<f64>],
    pub signal: &'a FeedbackSignal,
    pub gamma: f64,
    pub eps: f64,
}

/// How a simulation ended.
#[derive(Debug, Clone)]
pub enum RunEnd {
    Completed(LearnerState),
    /// Scores diverged during round `step`; `state` is the last valid state.
    Aborted {
        state: LearnerState,
        step: u64,
        detail: String,
    },
}

/// Runs `spec.horizon` rounds from `state`, calling `observe` on every round.
pub fn simulate_from<R: Rng + ?Sized>(
    spec: &RunSpec,
    mut state: LearnerState,
    rng: &mut R,
    mut observe: impl FnMut(&RoundView<'_>),
) -> Result<RunEnd> {
    let mut signal = FeedbackSignal::zeros(&spec.game);
    let mut saved = state.scores.scores.clone();
    let bandit = matches!(spec.mode, FeedbackMode::Bandit);
    for n in 0..spec.horizon {
        let (gamma, eps) = spec.schedule.value(n);
        let eps = if bandit { eps } else { 0.0 };
        draw_into(
            &spec.game,
            &state.strategies.strategies,
            &spec.mode,
            n,
            eps,
            rng,
            &mut signal,
        );
        observe(&RoundView {
            step: state.step,
            strategies: &state.strategies.strategies,
            scores: &state.scores.scores,
            signal: &signal,
            gamma,
            eps,
        });
        for (keep, y) in saved.iter_mut().zip(&state.scores.scores) {
            keep.copy_from_slice(y);
        }
        if let Err(e) = advance(&spec.kernels, &mut state, &signal.vectors, gamma) {
            state.scores.scores.clone_from(&saved);
            state.strategies.strategies = project_all(&spec.kernels, &saved)?;
            return Ok(RunEnd::Aborted {
                state,
                step: n,
                detail: e.to_string(),
            });
        }
    }
    Ok(RunEnd::Completed(state))
}

/// Validates `spec`, initializes from `spec.init`, and simulates.
pub fn simulate<R: Rng + ?Sized>(
    spec: &RunSpec,
    rng: &mut R,
    observe: impl FnMut(&RoundView<'_>),
) -> Result<RunEnd> {
    spec.validate()?;
    let state = init_state(&spec.game, &spec.kernels, &spec.init.target, spec.init.radius, rng)?;
    simulate_from(spec, state, rng, observe)
}

/// One recorded round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub strategies: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
    pub feedback: Vec<Vec<f64>>,
    pub gamma: f64,
    pub eps: f64,
}

/// Recorded sequence of play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config_digest: String,
    pub seed: u64,
    pub stride: u64,
    pub snapshots: Vec<Snapshot>,
    pub final_state: LearnerState,
}

/// Runs `spec` with a stream seeded from `spec.seed`, recording every
/// `spec.stride`-th round.
pub fn run(spec: &RunSpec) -> Result<Trajectory> {
    run_observed(spec, |_| {})
}

/// Like [`run`], additionally passing every round to `observe`.
pub fn run_observed(
    spec: &RunSpec,
    mut observe: impl FnMut(&RoundView<'_>),
) -> Result<Trajectory> {
    let mut rng = rng_from_seed(spec.seed);
    let mut snapshots = Vec::new();
    let stride = spec.stride;
    let end = simulate(spec, &mut rng, |view| {
        observe(view);
        if view.step % stride == 0 {
            snapshots.push(Snapshot {
                step: view.step,
                strategies: view.strategies.to_vec(),
                scores: view.scores.to_vec(),
                feedback: view.signal.vectors.clone(),
                gamma: view.gamma,
                eps: view.eps,
            });
        }
    })?;
    match end {
        RunEnd::Completed(final_state) => Ok(Trajectory {
            config_digest: spec.digest(),
            seed: spec.seed,
            stride,
            snapshots,
            final_state,
        }),
        RunEnd::Aborted { step, detail, .. } => Err(Error::Divergence { step, detail }),
    }
}

impl Trajectory {
    /// SHA-256 over the configuration digest, seed and the bits of every recorded value.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config_digest.as_bytes());
        h.update(self.seed.to_le_bytes());
        let mut put = |rows: &[Vec<f64>]| {
            for v in rows.iter().flatten() {
                h.update(v.to_bits().to_le_bytes());
            }
        };
        for s in &self.snapshots {
            put(&s.strategies);
            put(&s.scores);
            put(&s.feedback);
            put(&[vec![s.gamma, s.eps, s.step as f64]]);
        }
        put(&self.final_state.scores.scores);
        put(&self.final_state.strategies.strategies);
        hex::encode(h.finalize())
    }

    /// CSV with one row per snapshot: step, γ, ε, strategies then feedback,
    /// both in player-major order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let shape: Vec<usize> = self
            .final_state
            .strategies
            .strategies
            .iter()
            .map(Vec::len)
            .collect();
        let mut header = vec!["step".to_string(), "gamma".into(), "eps".into()];
        for prefix in ["x", "v"] {
            for (i, &n) in shape.iter().enumerate() {
                header.extend((0..n).map(|a| format!("{prefix}_{i}_{a}")));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        for s in &self.snapshots {
            let mut row = vec![s.step.to_string(), fmt_f64(s.gamma), fmt_f64(s.eps)];
            row.extend(s.strategies.iter().flatten().map(|&v| fmt_f64(v)));
            row.extend(s.feedback.iter().flatten().map(|&v| fmt_f64(v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Supports (above the default tolerance) of every player's strategy.
pub fn supports(strategies: &[Vec<f64>]) -> Vec<Vec<usize>> {
    strategies.iter().map(|s| support(s, DEFAULT_TOL)).collect()
}
