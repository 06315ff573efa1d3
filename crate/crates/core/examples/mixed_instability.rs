//! Runs started exactly at the mixed equilibrium of matching pennies leave
//! every small neighbourhood of it.

use ftrl_lab::prelude::*;

fn main() -> Result<()> {
    let game = Game::matching_pennies();
    let target = MixedProfile::uniform(&game);
    for kernel in [KernelKind::Entropy, KernelKind::Quadratic] {
        let config = ExperimentConfig {
            game: game.clone(),
            kernels: KernelChoice::Shared(kernel),
            feedback: FeedbackMode::Oracle,
            schedule: Schedule::steps(0.01, 0.6)?,
            horizon: 20_000,
            replicas: 100,
            target: target.clone(),
            init_target: None,
            init_radius: 0.0,
            stay_radius: 0.05,
            converge_radius: 0.01,
            seed: Some(9),
            stride: Some(1),
            workers: None,
            defaults_applied: vec![],
        };
        let report = stability_experiment(&config)?;
        let summary = escape_statistics(&report);
        println!(
            "{kernel:?}: stay {:.2}, never escaped {:.2}, escape step quartiles {:?} / {:?} / {:?}",
            report.stay_fraction,
            summary.never_escape_fraction,
            summary.lower_quartile,
            summary.median,
            summary.upper_quartile
        );
        let mean_fenchel: f64 = report.final_fenchel.iter().sum::<f64>() / report.final_fenchel.len() as f64;
        println!("  mean final Fenchel coupling to the equilibrium {mean_fenchel:.4}");
    }
    Ok(())
}
