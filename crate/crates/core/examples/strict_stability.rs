//! Replicated runs started near the strict equilibrium of the prisoner's
//! dilemma stay close and converge, with bandit and with oracle feedback.

use ftrl_lab::prelude::*;

fn main() -> Result<()> {
    let game = Game::prisoners_dilemma();
    let target = MixedProfile::new(vec![vec![0.0, 1.0]; 2])?;
    for (mode, schedule) in [
        (FeedbackMode::Bandit, Schedule::new(1.0, 0.75, 1.0, 0.35, 1)?),
        (FeedbackMode::Oracle, Schedule::steps(1.0, 0.6)?),
    ] {
        let config = ExperimentConfig {
            game: game.clone(),
            kernels: KernelChoice::Shared(KernelKind::Entropy),
            feedback: mode.clone(),
            schedule,
            horizon: 20_000,
            replicas: 50,
            target: target.clone(),
            init_target: None,
            init_radius: 0.1,
            stay_radius: 0.25,
            converge_radius: 1e-2,
            seed: Some(2024),
            stride: Some(1),
            workers: None,
            defaults_applied: vec![],
        };
        let report = stability_experiment(&config)?;
        let worst = report.final_distances.iter().copied().fold(0.0, f64::max);
        println!(
            "{:>6}: stay {:.2}  converge {:.2}  worst final distance {worst:.2e}",
            mode.name(),
            report.stay_fraction,
            report.converge_fraction
        );
    }
    Ok(())
}
