//! Empirical bias and second moment of each feedback channel.

use ftrl_lab::feedback::{explored_mix, BiasSchedule};
use ftrl_lab::prelude::*;

fn main() -> Result<()> {
    let game = Game::prisoners_dilemma();
    let x = MixedProfile::new(vec![vec![0.3, 0.7]; 2])?;
    let target = game.payoff_vector(&x, 0)?;
    let mut rng = rng_from_seed(42);
    let n = 100_000;

    let noisy = NoiseModel {
        bias: Some(BiasSchedule { magnitude: 0.5, exponent: 1.0 }),
        ..NoiseModel::gaussian(1.0)
    };
    let channels = [
        ("oracle", FeedbackMode::Oracle, 0.0),
        ("bandit eps=0.1", FeedbackMode::Bandit, 0.1),
        ("bandit eps=0.01", FeedbackMode::Bandit, 0.01),
        ("noisy", FeedbackMode::Noisy(noisy), 0.0),
    ];
    println!("v_1(x) = {target:.4?}");
    for (name, mode, eps) in channels {
        let mut mean = [0.0; 2];
        let mut second = 0.0;
        for _ in 0..n {
            let s = draw_feedback(&game, &x, &mode, 10, eps, &mut rng)?;
            let v = &s.vectors[0];
            mean.iter_mut().zip(v).for_each(|(m, c)| *m += c / n as f64);
            second += v.iter().map(|c| c * c).sum::<f64>() / n as f64;
        }
        let reference = if eps > 0.0 {
            let explored = MixedProfile::new(x.strategies.iter().map(|s| explored_mix(s, eps)).collect())?;
            game.payoff_vector(&explored, 0)?
        } else {
            target.clone()
        };
        println!("{name:>16}: mean {mean:.4?} (reference {reference:.4?})  E|v|^2 = {second:.2}");
    }
    Ok(())
}
