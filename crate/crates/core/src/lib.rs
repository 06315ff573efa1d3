//! Follow-the-regularized-leader learning in finite normal-form games.
//!
//! Players keep cumulative payoff scores `Y` and play `X = Q(Y)`, where `Q`
//! is the choice map of a decomposable regularizer. The crate provides
//!
//! - [`game`]: payoff tensors, payoff vectors, Nash tests and equilibrium classification
//! - [`regularizer`]: kernels, choice maps, conjugates, Bregman divergence and Fenchel coupling
//! - [`feedback`]: oracle, bandit (importance-weighted) and noisy payoff estimates, step schedules
//! - [`dynamics`]: the learning recursion and trajectory recording
//! - [`experiment`]: regret, Fenchel traces and the replicated stability harness
//! - [`config`]: JSON configs and the commands behind the `ftrl-lab` binary
//!
//! Each capability has a runnable program under `examples/`:
//!
//! ```text
//! cargo run --release --example solve_games
//! cargo run --release --example choice_maps
//! cargo run --release --example feedback_channels
//! cargo run --release --example mwu_prisoners_dilemma
//! cargo run --release --example strict_stability
//! cargo run --release --example mixed_instability
//! ```
//!
//! ```
//! use ftrl_lab::prelude::*;
//!
//! let pd = Game::prisoners_dilemma();
//! let found = pd.enumerate_pure_nash().unwrap();
//! assert_eq!(found, vec![PureProfile::new(vec![1, 1])]);
//! let x = Kernel::Entropy.choice_map(&[0.0, 0.0]).unwrap();
//! assert_eq!(x, vec![0.5, 0.5]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod feedback;
pub mod game;
pub mod output;
pub mod regularizer;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::dynamics::{
        ftrl_step, init_state, run, simulate, step_identity_check, InitSpec, LearnerState,
        RunSpec, Trajectory,
    };
    pub use crate::error::{Error, Result};
    pub use crate::experiment::{
        escape_statistics, fenchel_trace, regret, stability_experiment, ExperimentConfig,
        KernelChoice, StabilityReport,
    };
    pub use crate::feedback::{
        bandit_feedback, draw_feedback, noisy_oracle, oracle_feedback, rng_from_seed,
        sample_pure, FeedbackMode, FeedbackSignal, NoiseModel, Schedule,
    };
    pub use crate::game::{EquilibriumClass, Game, MixedProfile, PureProfile};
    pub use crate::regularizer::{Divergence, DualVector, Kernel, KernelKind};
}
