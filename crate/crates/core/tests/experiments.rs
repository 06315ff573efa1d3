mod common;

use common::*;
use ftrl_lab::experiment::{run_replica, total_fenchel};
use ftrl_lab::feedback::NoiseModel;
use ftrl_lab::prelude::*;
use proptest::prelude::*;

fn mixed(s: &[&[f64]]) -> MixedProfile {
    MixedProfile::new(s.iter().map(|v| v.to_vec()).collect()).unwrap()
}

fn config(game: Game, target: MixedProfile, mode: FeedbackMode, schedule: Schedule) -> ExperimentConfig {
    ExperimentConfig {
        game,
        kernels: KernelChoice::Shared(KernelKind::Entropy),
        feedback: mode,
        schedule,
        horizon: 500,
        replicas: 8,
        target,
        init_target: None,
        init_radius: 0.1,
        stay_radius: 0.25,
        converge_radius: 0.01,
        seed: Some(5),
        stride: Some(1),
        workers: None,
        defaults_applied: vec![],
    }
}

fn mp_oracle() -> ExperimentConfig {
    let mp = Game::matching_pennies();
    let u = MixedProfile::uniform(&mp);
    ExperimentConfig {
        init_radius: 0.0,
        stay_radius: 0.05,
        ..config(mp, u, FeedbackMode::Oracle, Schedule::steps(0.05, 0.6).unwrap())
    }
}

#[test]
fn regret_matches_reference_on_recorded_play() {
    let pd = Game::prisoners_dilemma();
    let spec = RunSpec {
        game: pd.clone(),
        kernels: vec![Kernel::Entropy; 2],
        mode: FeedbackMode::Bandit,
        schedule: Schedule::new(0.5, 0.75, 1.0, 0.35, 1).unwrap(),
        horizon: 400,
        init: InitSpec { target: MixedProfile::uniform(&pd), radius: 0.3 },
        stride: 1,
        seed: 8,
    };
    let t = run(&spec).unwrap();
    let history: Vec<[[f64; 2]; 2]> = t
        .snapshots
        .iter()
        .map(|s| [[s.strategies[0][0], s.strategies[0][1]], [s.strategies[1][0], s.strategies[1][1]]])
        .collect();
    let row = [[3.0, 0.0], [5.0, 1.0]];
    let col = [[3.0, 5.0], [0.0, 1.0]];
    for (i, m) in [row, col].iter().enumerate() {
        let r = regret(&t, &pd, i).unwrap();
        assert_eq!(r.values.len(), 400);
        assert!((r.last().unwrap() - bimatrix_regret(m, i, &history)).abs() < 1e-9);
        for k in [0usize, 17, 199] {
            assert!((r.values[k] - bimatrix_regret(m, i, &history[..=k])).abs() < 1e-9);
        }
    }
}

#[test]
fn fenchel_trace_examples() {
    let pd = Game::prisoners_dilemma();
    let spec = RunSpec {
        game: pd.clone(),
        kernels: vec![Kernel::Entropy; 2],
        mode: FeedbackMode::Oracle,
        schedule: Schedule::steps(1.0, 0.6).unwrap(),
        horizon: 1,
        init: InitSpec { target: MixedProfile::uniform(&pd), radius: 0.0 },
        stride: 1,
        seed: 0,
    };
    let t = run(&spec).unwrap();
    let dd = mixed(&[&[0.0, 1.0], &[0.0, 1.0]]);
    let f = fenchel_trace(&t, &spec.kernels, &dd).unwrap();
    // Y_0 = (ln ½, ln ½) is a shift of (0, 0).
    assert!((f[0] - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    let u = MixedProfile::uniform(&pd);
    assert!(fenchel_trace(&t, &spec.kernels, &u).unwrap()[0].abs() < 1e-12);
    assert!(fenchel_trace(&t, &spec.kernels[..1], &u).is_err());
}

#[test]
fn fenchel_trace_is_nonnegative_along_runs() {
    let mp = Game::matching_pennies();
    for kernel in [Kernel::Entropy, Kernel::Quadratic] {
        let spec = RunSpec {
            game: mp.clone(),
            kernels: vec![kernel; 2],
            mode: FeedbackMode::Noisy(NoiseModel::gaussian(1.0)),
            schedule: Schedule::steps(0.5, 0.6).unwrap(),
            horizon: 500,
            init: InitSpec { target: MixedProfile::uniform(&mp), radius: 0.5 },
            stride: 1,
            seed: 3,
        };
        let t = run(&spec).unwrap();
        let star = mixed(&[&[1.0, 0.0], &[0.3, 0.7]]);
        assert!(fenchel_trace(&t, &spec.kernels, &star).unwrap().iter().all(|&f| f >= -1e-12));
    }
}

#[test]
fn stability_examples() {
    let pd = Game::prisoners_dilemma();
    let mut c = config(pd.clone(), MixedProfile::uniform(&pd), FeedbackMode::Oracle, Schedule::steps(1.0, 0.6).unwrap());
    c.replicas = 1;
    c.horizon = 1;
    c.stay_radius = 1e9;
    c.converge_radius = 1e9;
    assert_eq!(stability_experiment(&c).unwrap().stay_fraction, 1.0);

    let dd = mixed(&[&[0.0, 1.0], &[0.0, 1.0]]);
    let mut c = config(pd, dd, FeedbackMode::Noisy(NoiseModel::none()), Schedule::steps(1.0, 0.6).unwrap());
    c.init_radius = 0.0;
    let r = stability_experiment(&c).unwrap();
    assert_eq!((r.stay_fraction, r.converge_fraction), (1.0, 1.0));
    assert_eq!(r.final_distances.len(), 8);
    assert_eq!(escape_statistics(&r).never_escape_fraction, 1.0);
    assert!(escape_statistics(&r).histogram.is_empty());

    let mut c = mp_oracle();
    c.replicas = 40;
    c.horizon = 5000;
    let r = stability_experiment(&c).unwrap();
    assert!(r.stay_fraction < 0.5, "{}", r.stay_fraction);
    assert!(escape_statistics(&r).never_escape_fraction < 0.5);
}

#[test]
fn estimator_sanity() {
    let base = mp_oracle();
    let mut previous = -1.0;
    for radius in [0.02, 0.05, 0.1, 0.2, 0.5, 4.0] {
        let c = ExperimentConfig { stay_radius: radius, converge_radius: 0.01, ..base.clone() };
        let r = stability_experiment(&c).unwrap();
        assert!(r.stay_fraction >= previous);
        assert!(r.converge_fraction <= r.stay_fraction);
        previous = r.stay_fraction;
    }
    assert_eq!(previous, 1.0);
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let pd = Game::prisoners_dilemma();
    let dd = mixed(&[&[0.0, 1.0], &[0.0, 1.0]]);
    let c = config(pd, dd, FeedbackMode::Bandit, Schedule::new(1.0, 0.75, 1.0, 0.35, 1).unwrap());
    let one = stability_experiment(&ExperimentConfig { workers: Some(1), ..c.clone() }).unwrap();
    let many = stability_experiment(&ExperimentConfig { workers: Some(3), ..c.clone() }).unwrap();
    assert_eq!(one.config_digest, many.config_digest);
    assert_eq!(one.replicas, many.replicas);
    assert_eq!(one.final_distances, many.final_distances);
    let again = stability_experiment(&c).unwrap();
    assert_eq!(ftrl_lab::output::to_json_pretty(&again).unwrap(), ftrl_lab::output::to_json_pretty(&stability_experiment(&c).unwrap()).unwrap());
}

#[test]
fn converging_replicas_have_small_consistent_fenchel_coupling() {
    let pd = Game::prisoners_dilemma();
    let dd = mixed(&[&[0.0, 1.0], &[0.0, 1.0]]);
    let c = config(pd.clone(), dd.clone(), FeedbackMode::Oracle, Schedule::steps(1.0, 0.6).unwrap());
    let r = stability_experiment(&c).unwrap();
    let first = {
        let spec = c.run_spec(0);
        let state = init_state(&pd, &spec.kernels, &spec.init.target, spec.init.radius, &mut rng_from_seed(spec.seed)).unwrap();
        total_fenchel(&spec.kernels, &dd, &state.scores.scores).unwrap()
    };
    let o = &r.replicas[0];
    assert!(o.converged);
    assert!(o.final_fenchel <= first);
    // F ≥ (K/2)‖x − x*‖₂² and ‖·‖₂² ≥ ‖·‖₁² / 4 on two players with two actions.
    for (f, d) in r.final_fenchel.iter().zip(&r.final_distances) {
        assert!(*f >= 0.5 * d * d / 4.0 - 1e-9);
    }
    assert_eq!(run_replica(&r.config, 0).unwrap(), r.replicas[0]);
}

#[test]
fn divergent_replicas_count_as_escaped() {
    let g = Game::new(vec![2], vec![vec![1e300, -1e300]]).unwrap();
    let mut c = config(g.clone(), MixedProfile::uniform(&g), FeedbackMode::Oracle, Schedule::steps(1e10, 0.6).unwrap());
    c.replicas = 3;
    c.init_radius = 0.0;
    let r = stability_experiment(&c).unwrap();
    assert_eq!(r.aborted, 3);
    assert_eq!(r.stay_fraction, 0.0);
    assert_eq!(r.converge_fraction, 0.0);
    assert!(r.escape_steps.iter().all(|e| *e == Some(0)));
}

#[test]
fn invalid_configs_name_their_field() {
    let base = mp_oracle();
    let cases: Vec<(ExperimentConfig, &str)> = vec![
        (ExperimentConfig { horizon: 0, ..base.clone() }, "horizon"),
        (ExperimentConfig { replicas: 0, ..base.clone() }, "replicas"),
        (ExperimentConfig { stay_radius: 0.0, ..base.clone() }, "stay_radius"),
        (ExperimentConfig { converge_radius: 0.5, ..base.clone() }, "converge_radius"),
        (ExperimentConfig { init_radius: -1.0, ..base.clone() }, "init_radius"),
        (ExperimentConfig { feedback: FeedbackMode::Bandit, ..base.clone() }, "schedule"),
        (ExperimentConfig { kernels: KernelChoice::PerPlayer(vec![KernelKind::Entropy]), ..base.clone() }, "kernels"),
        (ExperimentConfig { target: mixed(&[&[1.0], &[1.0]]), ..base.clone() }, "target"),
    ];
    for (c, field) in cases {
        match stability_experiment(&c) {
            Err(Error::Config { path, .. }) => assert_eq!(path, field),
            other => panic!("{field}: {other:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fractions_are_probabilities(seed in any::<u64>(), radius in 0.01f64..2.0) {
        let c = ExperimentConfig {
            seed: Some(seed),
            stay_radius: radius,
            converge_radius: radius.min(0.01),
            horizon: 100,
            replicas: 5,
            ..mp_oracle()
        };
        let r = stability_experiment(&c).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.stay_fraction));
        prop_assert!((0.0..=1.0).contains(&r.converge_fraction));
        prop_assert!(r.converge_fraction <= r.stay_fraction);
        prop_assert_eq!(r.escape_steps.len(), 5);
        let s = escape_statistics(&r);
        prop_assert_eq!(s.escaped as usize, r.escape_steps.iter().flatten().count());
        if let (Some(lo), Some(mid), Some(hi)) = (s.lower_quartile, s.median, s.upper_quartile) {
            prop_assert!(lo <= mid && mid <= hi);
        }
    }
}
