use balance_lab::dynamics::RobotState;
use balance_lab::harness::Termination;
use balance_lab::rl::{encode_model, load_model, run_rl_episode, save_model, train, TrainConfig};
use balance_lab::Config;

fn small(seed: u64, episodes: usize) -> TrainConfig {
    TrainConfig {
        n_episodes: episodes,
        horizon: 50,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_episodes_returns_the_initialisation() {
    let plant = Config::default().plant();
    let cfg = small(9, 0);
    let (model, log) = train(&plant, &cfg).unwrap();
    assert!(log.episodes.is_empty());
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
    let init = cfg.init_model(&mut rng).unwrap();
    assert_eq!(encode_model(&model), encode_model(&init));
}

#[test]
fn same_seed_gives_identical_training() {
    let plant = Config::default().plant();
    let (m1, l1) = train(&plant, &small(4, 20)).unwrap();
    let (m2, l2) = train(&plant, &small(4, 20)).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(encode_model(&m1), encode_model(&m2));
    let (m3, _) = train(&plant, &small(5, 20)).unwrap();
    assert_ne!(encode_model(&m1), encode_model(&m3));
}

#[test]
fn saved_model_replays_the_same_trajectory() {
    let plant = Config::default().plant();
    let cfg = small(2, 10);
    let (model, _) = train(&plant, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    let a = run_rl_episode(&model, RobotState::tilted(0.04), &plant, &cfg, 7).unwrap();
    let b = run_rl_episode(&back, RobotState::tilted(0.04), &plant, &cfg, 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn untrained_policy_falls() {
    let mut cfg = Config::default();
    cfg.sensor.noise_std_accel = 0.0;
    cfg.sensor.noise_std_gyro = 0.0;
    let plant = cfg.plant();
    let (model, _) = train(&plant, &small(0, 0)).unwrap();
    let traj = run_rl_episode(&model, RobotState::tilted(0.05), &plant, &cfg.rl, 0).unwrap();
    assert_eq!(traj.termination, Termination::Fell);
}
