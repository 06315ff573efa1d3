//! Finite normal-form games, mixed and pure profiles, and Nash equilibrium checks.
//!
//! Payoff tensors are stored densely in row-major pure-profile order: the
//! action of the first player varies slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for payoff comparisons and supports.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest number of pure profiles [`Game::enumerate_pure_nash`] will visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Simplex membership tolerance on per-player sums.
const SIMPLEX_TOL: f64 = 1e-9;

/// A finite game in normal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameFile", into = "GameFile")]
pub struct Game {
    action_counts: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

/// On-disk layout: `{"players": N, "actions": [...], "payoffs": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub players: usize,
    pub actions: Vec<usize>,
    pub payoffs: Vec<Vec<f64>>,
}

impl TryFrom<GameFile> for Game {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        if file.actions.len() != file.players {
            return Err(Error::config(
                "actions",
                format!(
                    "expected {} entries (one per player), found {}",
                    file.players,
                    file.actions.len()
                ),
            ));
        }
        Game::new(file.actions, file.payoffs)
    }
}

impl From<Game> for GameFile {
    fn from(game: Game) -> Self {
        GameFile {
            players: game.num_players(),
            actions: game.action_counts,
            payoffs: game.payoffs,
        }
    }
}

impl Game {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(Error::InvalidGame("a game needs at least one player".into()));
        }
        if let Some(i) = action_counts.iter().position(|&a| a == 0) {
            return Err(Error::InvalidGame(format!("player {i} has no actions")));
        }
        if payoffs.len() != action_counts.len() {
            return Err(Error::InvalidGame(format!(
                "expected {} payoff tensors, found {}",
                action_counts.len(),
                payoffs.len()
            )));
        }
        let total = action_counts
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(a))
            .ok_or_else(|| Error::InvalidGame("pure profile count overflows".into()))?;
        for (i, tensor) in payoffs.iter().enumerate() {
            if tensor.len() != total {
                return Err(Error::InvalidGame(format!(
                    "payoffs[{i}] has {} entries, expected {total}",
                    tensor.len()
                )));
            }
            if let Some(k) = tensor.iter().position(|u| !u.is_finite()) {
                return Err(Error::InvalidGame(format!("payoffs[{i}][{k}] is not finite")));
            }
        }
        let mut strides = vec![1; action_counts.len()];
        for j in (0..action_counts.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * action_counts[j + 1];
        }
        Ok(Game {
            action_counts,
            payoffs,
            strides,
        })
    }

    /// Two-player game from row-major payoff matrices.
    pub fn bimatrix(row: &[&[f64]], col: &[&[f64]]) -> Result<Self> {
        let rows = row.len();
        let cols = row.first().map_or(0, |r| r.len());
        if col.len() != rows || row.iter().chain(col).any(|r| r.len() != cols) {
            return Err(Error::InvalidGame("bimatrix shapes disagree".into()));
        }
        let flat = |m: &[&[f64]]| m.iter().flat_map(|r| r.iter().copied()).collect();
        Game::new(vec![rows, cols], vec![flat(row), flat(col)])
    }

    /// Matching Pennies: `u1 = [[1,-1],[-1,1]]`, `u2 = -u1`.
    pub fn matching_pennies() -> Self {
        Game::bimatrix(&[&[1.0, -1.0], &[-1.0, 1.0]], &[&[-1.0, 1.0], &[1.0, -1.0]])
            .expect("static game")
    }

    /// Prisoner's Dilemma with actions `{C, D}` = `{0, 1}`.
    pub fn prisoners_dilemma() -> Self {
        Game::bimatrix(&[&[3.0, 0.0], &[5.0, 1.0]], &[&[3.0, 5.0], &[0.0, 1.0]])
            .expect("static game")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: GameFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        Game::try_from(file)
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.action_counts[player]
    }

    pub fn num_profiles(&self) -> usize {
        self.payoffs[0].len()
    }

    /// Player `i`'s flat payoff tensor.
    pub fn payoff_tensor(&self, player: usize) -> &[f64] {
        &self.payoffs[player]
    }

    /// Largest absolute payoff over all players and profiles.
    pub fn max_abs_payoff(&self) -> f64 {
        self.payoffs
            .iter()
            .flatten()
            .fold(0.0, |m: f64, u| m.max(u.abs()))
    }

    /// `max u - min u` over all players and profiles.
    pub fn payoff_range(&self) -> f64 {
        let (lo, hi) = self
            .payoffs
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
                (lo.min(u), hi.max(u))
            });
        hi - lo
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::IndexOutOfBounds(format!(
                "player {player} (game has {} players)",
                self.num_players()
            )));
        }
        Ok(())
    }

    fn flat_index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Payoff `u_i(α)` of a pure profile.
    pub fn payoff(&self, player: usize, pure: &PureProfile) -> Result<f64> {
        self.check_player(player)?;
        pure.check(self)?;
        Ok(self.payoffs[player][self.flat_index(&pure.actions)])
    }

    /// Unchecked payoff lookup for hot loops; `actions` must be valid.
    pub(crate) fn payoff_unchecked(&self, player: usize, actions: &[usize]) -> f64 {
        self.payoffs[player][self.flat_index(actions)]
    }

    /// Expected payoff `u_i(x)` of a mixed profile.
    pub fn expected_payoff(&self, profile: &MixedProfile, player: usize) -> Result<f64> {
        self.check_player(player)?;
        profile.check(self)?;
        let mut total = 0.0;
        self.for_each_profile(|flat, actions| {
            let w: f64 = actions
                .iter()
                .enumerate()
                .map(|(j, &a)| profile.strategies[j][a])
                .product();
            total += w * self.payoffs[player][flat];
        });
        Ok(total)
    }

    /// Mixed payoff vector `v_i(x)`: component `a` is `u_i(a; x_{-i})`.
    pub fn payoff_vector(&self, profile: &MixedProfile, player: usize) -> Result<Vec<f64>> {
        self.check_player(player)?;
        profile.check(self)?;
        let mut out = vec![0.0; self.action_counts[player]];
        self.payoff_vector_into(&profile.strategies, player, &mut out);
        Ok(out)
    }

    pub(crate) fn payoff_vector_into(&self, strategies: &[Vec<f64>], player: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.for_each_profile(|flat, actions| {
            let w: f64 = actions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != player)
                .map(|(j, &a)| strategies[j][a])
                .product();
            if w != 0.0 {
                out[actions[player]] += w * self.payoffs[player][flat];
            }
        });
    }

    /// Pure payoff vector `v_i(α)`: component `a` is `u_i(a; α_{-i})`.
    pub fn pure_payoff_vector(&self, pure: &PureProfile, player: usize) -> Result<Vec<f64>> {
        self.check_player(player)?;
        pure.check(self)?;
        let mut out = vec![0.0; self.action_counts[player]];
        self.pure_payoff_vector_into(&pure.actions, player, &mut out);
        Ok(out)
    }

    pub(crate) fn pure_payoff_vector_into(&self, actions: &[usize], player: usize, out: &mut [f64]) {
        let base = self.flat_index(actions) - actions[player] * self.strides[player];
        let stride = self.strides[player];
        for (a, slot) in out.iter_mut().enumerate() {
            *slot = self.payoffs[player][base + a * stride];
        }
    }

    fn for_each_profile(&self, mut f: impl FnMut(usize, &[usize])) {
        let mut actions = vec![0usize; self.num_players()];
        for flat in 0..self.num_profiles() {
            f(flat, &actions);
            for j in (0..actions.len()).rev() {
                actions[j] += 1;
                if actions[j] < self.action_counts[j] {
                    break;
                }
                actions[j] = 0;
            }
        }
    }

    /// Checks the variational characterization: every supported action earns
    /// within `tol` of the best payoff-vector component.
    pub fn is_nash(&self, profile: &MixedProfile, tol: f64) -> Result<bool> {
        Ok(self.classify(profile, tol)?.is_nash)
    }

    pub fn classify(&self, profile: &MixedProfile, tol: f64) -> Result<EquilibriumClass> {
        profile.check(self)?;
        if !(tol >= 0.0) {
            return Err(Error::param("tol", "must be nonnegative"));
        }
        let support_tol = if tol > 0.0 { tol } else { DEFAULT_TOL };
        let mut supports = Vec::with_capacity(self.num_players());
        let mut is_nash = true;
        let mut unsupported_strictly_worse = true;
        for i in 0..self.num_players() {
            let v = self.payoff_vector(profile, i)?;
            let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let supp = support(&profile.strategies[i], support_tol);
            for (a, &va) in v.iter().enumerate() {
                if supp.contains(&a) {
                    if va < best - tol {
                        is_nash = false;
                    }
                } else if !(va < best - tol) {
                    unsupported_strictly_worse = false;
                }
            }
            supports.push(supp);
        }
        let is_pure = supports.iter().all(|s| s.len() == 1);
        let is_fully_mixed = supports
            .iter()
            .zip(&self.action_counts)
            .all(|(s, &a)| s.len() == a);
        let is_quasi_strict = is_nash && unsupported_strictly_worse;
        Ok(EquilibriumClass {
            is_nash,
            is_pure,
            is_fully_mixed,
            is_quasi_strict,
            is_strict: is_quasi_strict && is_pure,
            degenerate: self.action_counts.iter().all(|&a| a == 1),
            supports,
        })
    }

    /// All pure profiles without a strictly improving unilateral pure deviation.
    pub fn enumerate_pure_nash(&self) -> Result<Vec<PureProfile>> {
        enumeration_guard(&self.action_counts)?;
        let mut found = Vec::new();
        self.for_each_profile(|_, actions| {
            let stable = (0..self.num_players()).all(|i| {
                let mut v = vec![0.0; self.action_counts[i]];
                self.pure_payoff_vector_into(actions, i, &mut v);
                let current = v[actions[i]];
                v.iter().all(|&alt| alt <= current)
            });
            if stable {
                found.push(PureProfile::new(actions.to_vec()));
            }
        });
        Ok(found)
    }

    /// Variational-stability margin `<v(x), x - x*>` summed over players.
    pub fn vs_margin(&self, x: &MixedProfile, x_star: &MixedProfile) -> Result<f64> {
        x.check(self)?;
        x_star.check(self)?;
        let mut total = 0.0;
        for i in 0..self.num_players() {
            let v = self.payoff_vector(x, i)?;
            total += v
                .iter()
                .zip(x.strategies[i].iter().zip(&x_star.strategies[i]))
                .map(|(vi, (a, b))| vi * (a - b))
                .sum::<f64>();
        }
        Ok(total)
    }

    /// Positive affine rescaling `u_i -> scale * u_i + shift` of one player's payoffs.
    pub fn rescaled(&self, player: usize, scale: f64, shift: f64) -> Result<Game> {
        self.check_player(player)?;
        if !(scale > 0.0) {
            return Err(Error::param("scale", "must be positive"));
        }
        let mut payoffs = self.payoffs.clone();
        payoffs[player].iter_mut().for_each(|u| *u = scale * *u + shift);
        Game::new(self.action_counts.clone(), payoffs)
    }
}

fn enumeration_guard(action_counts: &[usize]) -> Result<()> {
    let count: u128 = action_counts.iter().map(|&a| a as u128).product();
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            profiles: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Indices whose component exceeds `tol`, ascending.
pub fn support(strategy: &[f64], tol: f64) -> Vec<usize> {
    strategy
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > tol)
        .map(|(a, _)| a)
        .collect()
}

/// One action index per player.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PureProfile {
    pub actions: Vec<usize>,
}

impl PureProfile {
    pub fn new(actions: Vec<usize>) -> Self {
        PureProfile { actions }
    }

    pub fn check(&self, game: &Game) -> Result<()> {
        if self.actions.len() != game.num_players() {
            return Err(Error::DimensionMismatch(format!(
                "pure profile has {} actions, game has {} players",
                self.actions.len(),
                game.num_players()
            )));
        }
        for (i, (&a, &n)) in self.actions.iter().zip(game.action_counts()).enumerate() {
            if a >= n {
                return Err(Error::IndexOutOfBounds(format!(
                    "player {i} action {a} (has {n} actions)"
                )));
            }
        }
        Ok(())
    }
}

/// One probability vector per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedProfile {
    pub strategies: Vec<Vec<f64>>,
}

impl MixedProfile {
    /// Validates nonnegativity and unit sums (within `1e-9`).
    pub fn new(strategies: Vec<Vec<f64>>) -> Result<Self> {
        for (i, s) in strategies.iter().enumerate() {
            validate_simplex(s).map_err(|e| Error::InvalidProfile(format!("player {i}: {e}")))?;
        }
        Ok(MixedProfile { strategies })
    }

    pub fn uniform(game: &Game) -> Self {
        MixedProfile {
            strategies: game
                .action_counts()
                .iter()
                .map(|&a| vec![1.0 / a as f64; a])
                .collect(),
        }
    }

    pub fn from_pure(game: &Game, pure: &PureProfile) -> Result<Self> {
        pure.check(game)?;
        Ok(MixedProfile {
            strategies: pure
                .actions
                .iter()
                .zip(game.action_counts())
                .map(|(&a, &n)| {
                    let mut s = vec![0.0; n];
                    s[a] = 1.0;
                    s
                })
                .collect(),
        })
    }

    pub fn num_players(&self) -> usize {
        self.strategies.len()
    }

    pub fn check(&self, game: &Game) -> Result<()> {
        if self.strategies.len() != game.num_players() {
            return Err(Error::DimensionMismatch(format!(
                "profile has {} players, game has {}",
                self.strategies.len(),
                game.num_players()
            )));
        }
        for (i, (s, &n)) in self.strategies.iter().zip(game.action_counts()).enumerate() {
            if s.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "player {i} strategy has {} entries, game has {n} actions",
                    s.len()
                )));
            }
        }
        Ok(())
    }

    /// L1 distance summed over players.
    pub fn l1_distance(&self, other: &MixedProfile) -> f64 {
        l1_distance(&self.strategies, &other.strategies)
    }
}

pub(crate) fn l1_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .sum()
}

pub(crate) fn validate_simplex(s: &[f64]) -> std::result::Result<(), String> {
    if s.is_empty() {
        return Err("empty strategy".into());
    }
    if let Some(a) = s.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(format!("component {a} is negative or not finite"));
    }
    let sum: f64 = s.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("components sum to {sum}, expected 1"));
    }
    Ok(())
}

/// Equilibrium taxonomy of a profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumClass {
    pub is_nash: bool,
    pub is_pure: bool,
    pub is_fully_mixed: bool,
    pub is_quasi_strict: bool,
    pub is_strict: bool,
    /// Every player has a single action; strictness holds vacuously.
    pub degenerate: bool,
    pub supports: Vec<Vec<usize>>,
}
