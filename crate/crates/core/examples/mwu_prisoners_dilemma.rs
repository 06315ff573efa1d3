//! Multiplicative weights in the prisoner's dilemma: one trajectory, its
//! regret and its Fenchel coupling to the strict equilibrium.

use ftrl_lab::prelude::*;

fn main() -> Result<()> {
    let game = Game::prisoners_dilemma();
    let kernels = vec![Kernel::Entropy; 2];
    let spec = RunSpec {
        game: game.clone(),
        kernels: kernels.clone(),
        mode: FeedbackMode::Oracle,
        schedule: Schedule::steps(1.0, 0.6)?,
        horizon: 10_000,
        init: InitSpec { target: MixedProfile::uniform(&game), radius: 0.0 },
        stride: 1,
        seed: 5,
    };
    let trajectory = run(&spec)?;
    let star = MixedProfile::new(vec![vec![0.0, 1.0]; 2])?;
    let fenchel = fenchel_trace(&trajectory, &kernels, &star)?;
    for n in [0usize, 10, 100, 1000, 9999] {
        let s = &trajectory.snapshots[n];
        println!("n={n:>5}  x_1={:.6?}  F={:.6}", s.strategies[0], fenchel[n]);
    }
    for i in 0..2 {
        let r = regret(&trajectory, &game, i)?;
        println!("player {i}: regret {:.4}, per round {:.6}", r.last().unwrap(), r.last().unwrap() / 10_000.0);
    }
    println!("digest {}", trajectory.digest());
    Ok(())
}
