use ndarray::{array, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffusion::{Mlp, NoiseSchedule};
use crate::scenario::tiny_scenario;

#[test]
fn td_target_hand_value() {
    assert!((td_target(1.0, false, 2.0, 0.9) - 2.8).abs() < 1e-12);
    assert_eq!(td_target(1.0, true, 2.0, 0.9), 1.0);
}

#[test]
fn soft_update_extremes_and_decay() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let online = Mlp::new(&[2, 3, 1], &mut rng);
    let start = Mlp::zeros(&[2, 3, 1]);

    let mut t = start.clone();
    soft_update(&mut t, &online, 0.0);
    assert_eq!(t, start);
    soft_update(&mut t, &online, 1.0);
    assert_eq!(t, online);

    // the gap to a fixed online net shrinks by (1 - tau) per update
    let mut t = start.clone();
    for _ in 0..50 {
        soft_update(&mut t, &online, 0.1);
    }
    let w = online.layers[0].weight[[0, 0]];
    let expected = w * (1.0 - 0.9f64.powi(50));
    assert!((t.layers[0].weight[[0, 0]] - expected).abs() < 1e-12);
}

fn critic_loss(critic: &Mlp, input: &Array2<f64>, y: &[f64]) -> f64 {
    let q = critic_forward(critic, input.view()).unwrap();
    q.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

#[test]
fn critic_step_follows_mse_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let critic = Mlp::new(&[4, 6, 1], &mut rng);
    let input = Array2::from_shape_fn((5, 4), |(i, j)| ((i * 4 + j) as f64 * 0.61).sin());
    let y = [0.2, -0.5, 1.0, 0.0, 0.7];
    let lr = 1e-6;
    let mut stepped = critic.clone();
    let mut opt = Optimizer::new(OptimizerKind::Sgd, lr, &stepped);
    let before = update_critic(&mut stepped, &mut opt, input.view(), &y, None).unwrap();
    assert!((before - critic_loss(&critic, &input, &y)).abs() < 1e-12);
    // the SGD step equals -lr times a finite-difference gradient
    let h = 1e-6;
    for (p, i) in [(0usize, 3usize), (1, 2), (2, 5), (3, 0)] {
        let mut up = critic.clone();
        up.params_mut()[p][i] += h;
        let mut down = critic.clone();
        down.params_mut()[p][i] -= h;
        let numeric = (critic_loss(&up, &input, &y) - critic_loss(&down, &input, &y)) / (2.0 * h);
        let analytic = (critic.params()[p][i] - stepped.params()[p][i]) / lr;
        assert!((numeric - analytic).abs() < 1e-6 * numeric.abs().max(1.0), "{numeric} vs {analytic}");
    }
}

/// `-mean Q` of the relaxed action for a diffusion actor with fixed chain
/// noise, as a function of the actor's parameters.
#[test]
fn actor_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let schedule = NoiseSchedule::linear(3, 0.01, 0.2).unwrap();
    let actor = Actor::diffusion(2, 3, &[5], 3, &mut rng);
    let critic = Mlp::new(&[2 + 3, 4, 1], &mut rng);
    let obs = array![[0.3, 0.9], [0.1, 0.4]];
    let masks = vec![vec![true, true, false], vec![true, true, true]];
    let critic_input = Array2::from_shape_fn((2, 5), |(i, j)| if j < 2 { obs[[i, j]] } else { 0.0 });
    let settings = ActorStepSettings {
        temperature: 0.8,
        noise_scale: 1.0,
        clip: None,
        logit_reg: 0.05,
    };
    let loss_of = |a: &Actor| {
        let mut r = ChaCha8Rng::seed_from_u64(77);
        let mut copy = a.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.0, copy.mlp());
        let batch = ActorBatch {
            obs: obs.view(),
            masks: &masks,
            critic_input: critic_input.view(),
            block: 2..5,
        };
        update_actor(&mut copy, &mut opt, &critic, &schedule, batch, settings, None, &mut r).unwrap()
    };
    let lr = 1e-6;
    let mut stepped = actor.clone();
    let mut opt = Optimizer::new(OptimizerKind::Sgd, lr, stepped.mlp());
    let batch = ActorBatch {
        obs: obs.view(),
        masks: &masks,
        critic_input: critic_input.view(),
        block: 2..5,
    };
    update_actor(&mut stepped, &mut opt, &critic, &schedule, batch, settings, None, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    let h = 1e-6;
    let num_params: Vec<usize> = actor.mlp().params().iter().map(|p| p.len()).collect();
    let mut worst: f64 = 0.0;
    for (p, &n) in num_params.iter().enumerate() {
        for i in 0..n {
            let mut up = actor.clone();
            up.mlp_mut().params_mut()[p][i] += h;
            let mut down = actor.clone();
            down.mlp_mut().params_mut()[p][i] -= h;
            let numeric = (loss_of(&up) - loss_of(&down)) / (2.0 * h);
            let analytic = (actor.mlp().params()[p][i] - stepped.mlp().params()[p][i]) / lr;
            worst = worst.max((numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-4));
        }
    }
    assert!(worst < 1e-4, "relative error {worst}");
}

#[test]
fn algorithm_names_round_trip() {
    for a in Algorithm::ALL {
        assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
    }
    assert!("ddpg".parse::<Algorithm>().is_err());
    assert!(!Algorithm::Maddpg.uses_planner());
    assert_eq!(Algorithm::Greedy.actor_kind(), None);
}

#[test]
fn config_overrides_parse_values() {
    let c = TrainConfig::default();
    let c = c.with_override("batch_size", "32").unwrap();
    let c = c.with_override("optimizer", "adam").unwrap();
    let c = c.with_override("hidden", "[8, 8]").unwrap();
    assert_eq!((c.batch_size, c.optimizer, c.hidden.clone()), (32, OptimizerKind::Adam, vec![8, 8]));
    assert!(c.with_override("nope", "1").is_err());
    assert!(c.with_override("batch_size", "-1").is_err());
    assert!(c.with_override("tau", "2.0").is_err());
}

#[test]
fn epsilon_schedule_decays_to_floor() {
    let c = TrainConfig::desk();
    assert_eq!(c.epsilon_at(0), c.epsilon_start);
    assert!(c.epsilon_at(100) < c.epsilon_at(10));
    assert_eq!(c.epsilon_at(1_000_000), c.epsilon_min);
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        episodes: 6,
        hidden: vec![8],
        batch_size: 4,
        diffusion_steps: 3,
        eval_every: 3,
        eval_episodes: 1,
        ..TrainConfig::desk()
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let s = tiny_scenario();
    let route = vec![1];
    for kind in [ActorKind::Diffusion, ActorKind::Direct] {
        let a = train(&s, &route, kind, &quick_config(), Some(0.5)).unwrap();
        let b = train(&s, &route, kind, &quick_config(), Some(0.5)).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.rows.len(), 6);
        assert!(a.log.rows[2].eval_utility.is_some());
        assert!(a.log.rows[1].eval_utility.is_none());
        assert!(a.log.rows.iter().any(|r| r.critic_loss.is_some()));
    }
}

#[test]
fn log_csv_has_header_and_blank_optionals() {
    let s = tiny_scenario();
    let out = train(&s, &[1], ActorKind::Direct, &quick_config(), None).unwrap();
    let mut bytes = Vec::new();
    out.log.write_csv(&mut bytes).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(TRAIN_LOG_CSV_HEADER));
    assert!(lines.next().unwrap().ends_with(",,"));
}

#[test]
fn oracle_baseline_replays_reference() {
    let s = tiny_scenario();
    let reference = oracle_reference(&s, crate::assignment::DEFAULT_ORACLE_LIMIT).unwrap().unwrap();
    let trace = oracle_baseline(&s, &[1], 0, crate::assignment::DEFAULT_ORACLE_LIMIT).unwrap();
    assert!((trace.mean_utility() - reference).abs() < 1e-12);
    let greedy = greedy_assignment_baseline(&s, &[1], 0).unwrap();
    assert!(greedy.mean_utility() <= reference + 1e-12);
}

#[test]
fn bandit_prefers_paying_arm() {
    let config = TrainConfig {
        hidden: vec![16],
        batch_size: 16,
        diffusion_steps: 3,
        epsilon_decay: 1e-2,
        ..TrainConfig::desk()
    };
    let out = run_bandit([0.0, 1.0], 300, ActorKind::Diffusion, &config).unwrap();
    assert_eq!(out.greedy_action, 1);
    assert!(out.q[1] > out.q[0]);
}
