//! Payoff feedback channels, step-size/exploration schedules and the
//! assumptions that tie them together.
//!
//! Three channels produce payoff-vector estimates `v̂`:
//!
//! - **oracle**: a pure profile is sampled from `X` and each player sees the
//!   pure payoff vector against the others' realized actions;
//! - **bandit**: actions are sampled from the explored mix
//!   `X̂ = (1-ε)X + ε/A` and each player only sees its realized payoff,
//!   turned into an importance-weighted estimate;
//! - **noisy**: the exact mixed payoff vector plus gaussian noise and an
//!   optional deterministic bias.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{validate_simplex, Game, MixedProfile, PureProfile};

/// Random stream used by simulations.
pub type SimRng = ChaCha8Rng;

/// Upper clip applied to the exploration parameter.
pub const MAX_EXPLORATION: f64 = 1.0 - 1e-9;

/// Admissibility inequalities are checked with this much slack above 1.
const STRICT_MARGIN: f64 = 1e-12;

const REPLICA_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

fn finalize_mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` derived from `master`.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    finalize_mix(master ^ index.wrapping_mul(REPLICA_SEED_STRIDE))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Feedback received in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSignal {
    /// Estimated payoff vector `v̂_i` per player.
    pub vectors: Vec<Vec<f64>>,
    /// The pure profile actually played.
    pub sampled: PureProfile,
    /// The distribution the profile was drawn from (`X̂` for bandit, `X` otherwise).
    pub sampling_mix: Vec<Vec<f64>>,
}

impl FeedbackSignal {
    /// Zeroed buffers shaped for `game`.
    pub fn zeros(game: &Game) -> Self {
        let shape = |_| game.action_counts().iter().map(|&a| vec![0.0; a]).collect();
        FeedbackSignal {
            vectors: shape(()),
            sampled: PureProfile::new(vec![0; game.num_players()]),
            sampling_mix: shape(()),
        }
    }
}

/// Gaussian observation noise plus an optional deterministic bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub kind: NoiseKind,
    /// Per-component standard deviation.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasSchedule>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Gaussian,
}

/// Bias `b_n = magnitude / (n+1)^exponent` added to every component in round `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSchedule {
    pub magnitude: f64,
    pub exponent: f64,
}

impl BiasSchedule {
    pub fn component(&self, round: u64) -> f64 {
        self.magnitude / ((round + 1) as f64).powf(self.exponent)
    }
}

impl NoiseModel {
    /// Exact payoff vectors.
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            sigma: 0.0,
            bias: None,
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        NoiseModel {
            kind: NoiseKind::Gaussian,
            sigma,
            bias: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::param("sigma", "must be finite and nonnegative"));
        }
        if self.kind == NoiseKind::None && self.sigma != 0.0 {
            return Err(Error::param("sigma", "must be 0 when kind is none"));
        }
        if let Some(b) = &self.bias {
            if !b.magnitude.is_finite() || b.magnitude < 0.0 {
                return Err(Error::param("bias.magnitude", "must be finite and nonnegative"));
            }
            if !b.exponent.is_finite() {
                return Err(Error::param("bias.exponent", "must be finite"));
            }
        }
        Ok(())
    }

    /// Declared bound `B_n` on the Euclidean norm of the bias over the whole profile.
    pub fn bias_bound(&self, game: &Game, round: u64) -> f64 {
        let dim: usize = game.action_counts().iter().sum();
        self.bias
            .map_or(0.0, |b| b.component(round) * (dim as f64).sqrt())
    }
}

/// How players observe their payoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FeedbackMode {
    Oracle,
    Bandit,
    Noisy(NoiseModel),
}

impl FeedbackMode {
    /// Exact mixed payoff vectors, no noise.
    pub fn exact() -> Self {
        FeedbackMode::Noisy(NoiseModel::none())
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeedbackMode::Oracle => "oracle",
            FeedbackMode::Bandit => "bandit",
            FeedbackMode::Noisy(_) => "noisy",
        }
    }
}

/// Draws one action per player by inverse CDF over each strategy in index order.
pub fn sample_pure<R: Rng + ?Sized>(profile: &MixedProfile, rng: &mut R) -> Result<PureProfile> {
    let mut actions = Vec::with_capacity(profile.num_players());
    for (i, s) in profile.strategies.iter().enumerate() {
        validate_simplex(s).map_err(|e| Error::InvalidProfile(format!("player {i}: {e}")))?;
        actions.push(sample_index(s, rng));
    }
    Ok(PureProfile::new(actions))
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (a, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cumulative += w;
            last_positive = a;
            if u < cumulative {
                return a;
            }
        }
    }
    // Rounding left the cumulative sum just under u.
    last_positive
}

/// Oracle feedback for an already-sampled pure profile: `v̂_i = v_i(α)`.
pub fn oracle_feedback(game: &Game, pure: &PureProfile) -> Result<FeedbackSignal> {
    pure.check(game)?;
    let mut signal = FeedbackSignal::zeros(game);
    for i in 0..game.num_players() {
        game.pure_payoff_vector_into(&pure.actions, i, &mut signal.vectors[i]);
        signal.sampling_mix[i][pure.actions[i]] = 1.0;
    }
    signal.sampled = pure.clone();
    Ok(signal)
}

/// Bandit feedback with explicit exploration `eps` and importance weighting.
pub fn bandit_feedback<R: Rng + ?Sized>(
    game: &Game,
    profile: &MixedProfile,
    eps: f64,
    rng: &mut R,
) -> Result<FeedbackSignal> {
    profile.check(game)?;
    check_exploration(eps)?;
    let mut signal = FeedbackSignal::zeros(game);
    fill_bandit(game, &profile.strategies, eps, rng, &mut signal);
    Ok(signal)
}

/// Exact payoff vectors plus the configured noise and bias for round `round`.
pub fn noisy_oracle<R: Rng + ?Sized>(
    game: &Game,
    profile: &MixedProfile,
    noise: &NoiseModel,
    round: u64,
    rng: &mut R,
) -> Result<FeedbackSignal> {
    profile.check(game)?;
    noise.validate()?;
    let mut signal = FeedbackSignal::zeros(game);
    fill_noisy(game, &profile.strategies, noise, round, rng, &mut signal);
    Ok(signal)
}

fn check_exploration(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", format!("{eps} is outside (0, 1)")));
    }
    Ok(())
}

/// Explored mix `(1-ε)x + ε/A`.
pub fn explored_mix(strategy: &[f64], eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; strategy.len()];
    explored_mix_into(strategy, eps, &mut out);
    out
}

fn explored_mix_into(strategy: &[f64], eps: f64, out: &mut [f64]) {
    let floor = eps / strategy.len() as f64;
    for (o, &x) in out.iter_mut().zip(strategy) {
        *o = ((1.0 - eps) * x + floor).max(floor);
    }
}

fn fill_oracle<R: Rng + ?Sized>(
    game: &Game,
    strategies: &[Vec<f64>],
    rng: &mut R,
    signal: &mut FeedbackSignal,
) {
    for (i, s) in strategies.iter().enumerate() {
        signal.sampled.actions[i] = sample_index(s, rng);
        signal.sampling_mix[i].copy_from_slice(s);
    }
    for i in 0..game.num_players() {
        game.pure_payoff_vector_into(&signal.sampled.actions, i, &mut signal.vectors[i]);
    }
}

fn fill_bandit<R: Rng + ?Sized>(
    game: &Game,
    strategies: &[Vec<f64>],
    eps: f64,
    rng: &mut R,
    signal: &mut FeedbackSignal,
) {
    for (i, s) in strategies.iter().enumerate() {
        explored_mix_into(s, eps, &mut signal.sampling_mix[i]);
        signal.sampled.actions[i] = sample_index(&signal.sampling_mix[i], rng);
    }
    for i in 0..game.num_players() {
        let played = signal.sampled.actions[i];
        let realized = game.payoff_unchecked(i, &signal.sampled.actions);
        let v = &mut signal.vectors[i];
        v.iter_mut().for_each(|c| *c = 0.0);
        v[played] = realized / signal.sampling_mix[i][played];
    }
}

fn fill_noisy<R: Rng + ?Sized>(
    game: &Game,
    strategies: &[Vec<f64>],
    noise: &NoiseModel,
    round: u64,
    rng: &mut R,
    signal: &mut FeedbackSignal,
) {
    for (i, s) in strategies.iter().enumerate() {
        signal.sampled.actions[i] = sample_index(s, rng);
        signal.sampling_mix[i].copy_from_slice(s);
    }
    let bias = noise.bias.map_or(0.0, |b| b.component(round));
    for i in 0..game.num_players() {
        game.payoff_vector_into(strategies, i, &mut signal.vectors[i]);
        for c in signal.vectors[i].iter_mut() {
            if noise.kind == NoiseKind::Gaussian && noise.sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                *c += noise.sigma * z;
            }
            *c += bias;
        }
    }
}

/// Fills `signal` in place for round `round` with exploration `eps` (bandit only).
///
/// `strategies` must be valid for `game`; this is the allocation-free path
/// used inside simulation loops.
pub(crate) fn draw_into<R: Rng + ?Sized>(
    game: &Game,
    strategies: &[Vec<f64>],
    mode: &FeedbackMode,
    round: u64,
    eps: f64,
    rng: &mut R,
    signal: &mut FeedbackSignal,
) {
    match mode {
        FeedbackMode::Oracle => fill_oracle(game, strategies, rng, signal),
        FeedbackMode::Bandit => fill_bandit(game, strategies, eps, rng, signal),
        FeedbackMode::Noisy(noise) => fill_noisy(game, strategies, noise, round, rng, signal),
    }
}

/// One feedback draw under any channel.
pub fn draw_feedback<R: Rng + ?Sized>(
    game: &Game,
    profile: &MixedProfile,
    mode: &FeedbackMode,
    round: u64,
    eps: f64,
    rng: &mut R,
) -> Result<FeedbackSignal> {
    profile.check(game)?;
    match mode {
        FeedbackMode::Bandit => check_exploration(eps)?,
        FeedbackMode::Noisy(noise) => noise.validate()?,
        FeedbackMode::Oracle => {}
    }
    let mut signal = FeedbackSignal::zeros(game);
    draw_into(game, &profile.strategies, mode, round, eps, rng, &mut signal);
    Ok(signal)
}

/// Bias bound `B_n = C_b·ε_n` of the importance-weighted estimator, with
/// `C_b = max|u|·max_i A_i`.
pub fn bandit_bias_bound(game: &Game, eps: f64) -> f64 {
    let widest = game.action_counts().iter().copied().max().unwrap_or(1);
    game.max_abs_payoff() * widest as f64 * eps
}

/// Power-law schedules `γ_n = gamma0/(n+offset)^p`, `ε_n = eps0/(n+offset)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub gamma0: f64,
    pub p: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default = "default_offset")]
    pub offset: u64,
}

fn default_eps0() -> f64 {
    1.0
}

fn default_offset() -> u64 {
    1
}

/// Outcome of checking a schedule against the assumptions of a feedback mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl Schedule {
    pub fn new(gamma0: f64, p: f64, eps0: f64, q: f64, offset: u64) -> Result<Self> {
        let s = Schedule {
            gamma0,
            p,
            eps0,
            q,
            offset,
        };
        s.check_fields()?;
        Ok(s)
    }

    /// Step sizes only; exploration stays at its default.
    pub fn steps(gamma0: f64, p: f64) -> Result<Self> {
        Schedule::new(gamma0, p, 1.0, 0.0, 1)
    }

    pub fn check_fields(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::param("gamma0", "must be positive and finite"));
        }
        if !self.p.is_finite() {
            return Err(Error::param("p", "must be finite"));
        }
        if !(self.eps0 > 0.0 && self.eps0 <= 1.0) {
            return Err(Error::param("eps0", "must lie in (0, 1]"));
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(Error::param("q", "must be finite and nonnegative"));
        }
        if self.offset < 1 {
            return Err(Error::param("offset", "must be at least 1"));
        }
        Ok(())
    }

    /// `(γ_n, ε_n)`, with `ε_n` clipped to `1 - 1e-9`.
    pub fn value(&self, n: u64) -> (f64, f64) {
        let base = (n + self.offset) as f64;
        let gamma = self.gamma0 / base.powf(self.p);
        let eps = (self.eps0 / base.powf(self.q)).min(MAX_EXPLORATION);
        (gamma, eps)
    }

    /// Checks the bias/variance summability conditions for `mode`.
    pub fn validate(&self, mode: &FeedbackMode) -> ScheduleReport {
        let mut failures = Vec::new();
        let (p, q) = (self.p, self.q);
        if p > 1.0 {
            failures.push(format!("p ≤ 1 (so that Σγ_n = ∞) fails: p = {p}"));
        }
        match mode {
            FeedbackMode::Bandit => {
                if !(p + q > 1.0 + STRICT_MARGIN) {
                    failures.push(format!("p + q > 1 fails: p + q = {}", p + q));
                }
                if !(2.0 * p - q > 1.0 + STRICT_MARGIN) {
                    failures.push(format!("2p − q > 1 fails: 2p − q = {}", 2.0 * p - q));
                }
                if !(q > 0.0) {
                    failures.push(format!("q > 0 (so that ε_n → 0) fails: q = {q}"));
                }
            }
            FeedbackMode::Oracle | FeedbackMode::Noisy(_) => {
                if !(2.0 * p > 1.0 + STRICT_MARGIN) {
                    failures.push(format!("2p > 1 fails: 2p = {}", 2.0 * p));
                }
            }
        }
        if let FeedbackMode::Noisy(NoiseModel { bias: Some(b), .. }) = mode {
            if b.magnitude > 0.0 {
                if !(b.exponent > 0.0) {
                    failures.push(format!(
                        "bias must vanish (exponent > 0) fails: exponent = {}",
                        b.exponent
                    ));
                }
                if !(p + b.exponent > 1.0 + STRICT_MARGIN) {
                    failures.push(format!(
                        "Σγ_n·B_n < ∞ (p + bias exponent > 1) fails: {}",
                        p + b.exponent
                    ));
                }
            }
        }
        ScheduleReport {
            passed: failures.is_empty(),
            failures,
        }
    }
}

/// Monte-Carlo estimate of `P(|v̂_{i,a} − v̂_{i,b}| ≥ c)` at `profile`.
#[allow(clippy::too_many_arguments)]
pub fn a3_diagnostic<R: Rng + ?Sized>(
    game: &Game,
    profile: &MixedProfile,
    mode: &FeedbackMode,
    eps: f64,
    player: usize,
    (a, b): (usize, usize),
    c: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::param("samples", "must be positive"));
    }
    if !(c > 0.0) {
        return Err(Error::param("c", "must be positive"));
    }
    if player >= game.num_players() {
        return Err(Error::IndexOutOfBounds(format!("player {player}")));
    }
    let n = game.num_actions(player);
    if a >= n || b >= n {
        return Err(Error::IndexOutOfBounds(format!(
            "actions ({a}, {b}) for player {player} with {n} actions"
        )));
    }
    let mut signal = draw_feedback(game, profile, mode, 0, eps, rng)?;
    let mut hits = 0usize;
    for k in 0..samples {
        if k > 0 {
            draw_into(game, &profile.strategies, mode, 0, eps, rng, &mut signal);
        }
        let v = &signal.vectors[player];
        if (v[a] - v[b]).abs() >= c {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// Separation thresholds, as fractions of the payoff range, scanned by [`a3_grid`].
pub const A3_GRID: [f64; 3] = [0.5, 0.1, 0.01];

/// [`a3_diagnostic`] at `c ∈ {0.5, 0.1, 0.01}·(payoff range)`; returns `(c, estimate)` pairs.
#[allow(clippy::too_many_arguments)]
pub fn a3_grid<R: Rng + ?Sized>(
    game: &Game,
    profile: &MixedProfile,
    mode: &FeedbackMode,
    eps: f64,
    player: usize,
    pair: (usize, usize),
    samples: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let range = game.payoff_range();
    if !(range > 0.0) {
        return Err(Error::InvalidGame("constant payoffs have no separation scale".into()));
    }
    A3_GRID
        .iter()
        .map(|frac| {
            let c = frac * range;
            a3_diagnostic(game, profile, mode, eps, player, pair, c, samples, rng).map(|p| (c, p))
        })
        .collect()
}
