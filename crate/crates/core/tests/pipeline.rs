use minerdyn_core::agents::{aggregate, run_ensemble, sup_norm_gap};
use minerdyn_core::controller::{synthesize, trade_off_metrics, validate};
use minerdyn_core::csv_io::{read_trajectory, write_trajectory};
use minerdyn_core::dynamics::{integrate, settle};
use minerdyn_core::equilibrium::{classify_equilibria, Interval};
use minerdyn_core::{MiningEnvironment, ModelParams, RewardPolicy};

fn base() -> ModelParams {
    ModelParams::new(2, 2, 100.0).unwrap()
}

#[test]
fn synthesized_feedback_rescues_a_collapsing_start() {
    let p = base();
    let open = settle(&p, &RewardPolicy::Constant(40.0), 0.1, 1e-6, 100.0).unwrap();
    assert!(open.settled && open.limit == 0.0);

    let spec = synthesize(&p, 40.0, 0.6, 0.5, 0.5).unwrap();
    assert!(validate(&spec).valid);
    let policy = RewardPolicy::Feedback(spec);
    let closed = settle(&p, &policy, 0.1, 1e-6, 100.0).unwrap();
    assert!(closed.settled && closed.limit == 1.0);

    let traj = integrate(&p, &policy, 0.1, 30.0, 1e-3).unwrap();
    let m = trade_off_metrics(&traj, &spec, 1e-3, 1e-9);
    assert!(m.reward_recovery_time.unwrap() < m.state_settle_time.unwrap());

    let bytes = write_trajectory(Vec::new(), &["pipeline".into()], &traj).unwrap();
    assert_eq!(read_trajectory(bytes.as_slice()).unwrap(), traj);
}

#[test]
fn basins_predict_limits() {
    let p = base();
    for reward in [20.0, 30.0, 40.0, 49.0, 60.0] {
        let rep = classify_equilibria(&p, reward).unwrap();
        for x0 in [0.05, 0.2, 0.3, 0.6, 0.95] {
            let s = settle(&p, &RewardPolicy::Constant(reward), x0, 1e-6, 1e4).unwrap();
            let inside = |b: Option<Interval>| b.is_some_and(|b| b.contains(x0));
            let expected = if inside(rep.basin_one) {
                1.0
            } else {
                assert!(inside(rep.basin_zero), "R={reward} x0={x0}");
                0.0
            };
            assert_eq!(s.limit, expected, "R={reward} x0={x0}");
        }
    }
}

#[test]
fn hash_environment_matches_direct_parameters() {
    let env = MiningEnvironment::new(10, 1.0, 10.24).unwrap();
    let p = env.model_params(2, 2).unwrap();
    assert!((p.d() - 100.0).abs() < 1e-12);
    assert_eq!(
        classify_equilibria(&p, 40.0).unwrap().region,
        classify_equilibria(&base(), 40.0).unwrap().region
    );
}

#[test]
fn ensemble_mean_tracks_the_flow() {
    let p = base();
    let policy = RewardPolicy::Constant(60.0);
    let seeds: Vec<u64> = (0..20).collect();
    let runs = run_ensemble(&p, &policy, 2000, 0.3, None, &seeds, 3.0, 0.1).unwrap();
    let agg = aggregate(&runs).unwrap();
    assert!(sup_norm_gap(&p, &policy, 0.3, &agg).unwrap() < 0.01);
}
