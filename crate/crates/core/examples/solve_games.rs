//! Pure equilibria and classification of a few classic games.

use ftrl_lab::prelude::*;

fn describe(name: &str, game: &Game, candidates: &[MixedProfile]) -> Result<()> {
    println!("{name}: actions {:?}", game.action_counts());
    for p in game.enumerate_pure_nash()? {
        let x = MixedProfile::from_pure(game, &p)?;
        let c = game.classify(&x, 1e-9)?;
        println!("  pure NE {:?}: strict={} quasi-strict={}", p.actions, c.is_strict, c.is_quasi_strict);
    }
    for x in candidates {
        let c = game.classify(x, 1e-9)?;
        println!(
            "  candidate {:?}: nash={} fully mixed={} quasi-strict={}",
            x.strategies, c.is_nash, c.is_fully_mixed, c.is_quasi_strict
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let mp = Game::matching_pennies();
    describe("matching pennies", &mp, &[MixedProfile::uniform(&mp)])?;
    describe("prisoner's dilemma", &Game::prisoners_dilemma(), &[])?;

    // Coordination: two strict equilibria and a mixed one that is not stable.
    let coord = Game::bimatrix(&[&[2.0, 0.0], &[0.0, 1.0]], &[&[2.0, 0.0], &[0.0, 1.0]])?;
    let mixed = MixedProfile::new(vec![vec![1.0 / 3.0, 2.0 / 3.0]; 2])?;
    describe("coordination", &coord, std::slice::from_ref(&mixed))?;

    let near = MixedProfile::new(vec![vec![0.5, 0.5]; 2])?;
    println!("  VS margin of coordination mixed NE vs uniform: {:.4}", coord.vs_margin(&near, &mixed)?);
    Ok(())
}
