use aam_core::policy::{Architecture, BatchInput, Observation, Policy};
use aam_core::sim::{Depot, PayloadRequest, Point, Vehicle, World};
use aam_core::train::{collect_rollouts, compute_gae, curve_csv, minibatch_loss, normalize, train, ControlOptions, PpoConfig, TrainConfig, Transition};
use aam_core::{run_world, EpisodeConfig, Error, FleetController};
use aam_nn::{Matrix, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn options(k_v: usize, k_d: usize) -> ControlOptions {
    ControlOptions {
        k_v,
        k_d,
        use_mask: false,
        greedy: false,
    }
}

fn small_env() -> EpisodeConfig {
    let mut env = EpisodeConfig::one_shot([1, 1, 1], 4, 4);
    env.k_v = 2;
    env.k_d = 3;
    env
}

/// Transitions over random observations, with behaviour log-probs taken
/// from `policy` and then shifted so ratios differ from 1.
fn synthetic_batch(policy: &Policy, n: usize, seed: u64) -> (Vec<Transition>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = small_env();
    let mut transitions = Vec::new();
    while transitions.len() < n {
        let world = World::new(&env, rng.random_range(0..1000)).unwrap();
        let v = rng.random_range(0..world.vehicles.len());
        let obs = Observation::new(&world, v, env.k_v, env.k_d, rng.random_bool(0.5)).unwrap();
        let out = policy.evaluate(&obs).unwrap();
        let action = loop {
            let a = rng.random_range(0..out.probabilities.len());
            if out.probabilities[a] > 0.0 {
                break a;
            }
        };
        transitions.push(Transition {
            obs,
            action,
            log_prob: out.probabilities[action].ln() + rng.random_range(-0.3..0.3),
            value: out.value,
            reward: 0.0,
            done: false,
            episode: 0,
            agent: v,
            step: 0,
            advantage: 0.0,
            ret: rng.random_range(-3.0..3.0),
        });
    }
    let advantages = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    (transitions, advantages)
}

#[test]
fn gae_examples() {
    let (a, r) = compute_gae(&[1.0], &[0.0], &[true], 0.0, 0.99, 0.95).unwrap();
    assert_eq!((a, r), (vec![1.0], vec![1.0]));
    let (a, _) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 0.0, 0.99, 0.95).unwrap();
    assert!((a[0] - 1.9405).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
    let (a, _) = compute_gae(&[0.0; 4], &[0.0; 4], &[false, false, false, true], 0.0, 0.99, 0.95).unwrap();
    assert!(a.iter().all(|&x| x == 0.0));
    assert!(compute_gae(&[1.0], &[0.0, 1.0], &[true], 0.0, 0.99, 0.95).is_err());

    let mut xs = vec![1.0, 2.0, 3.0, 6.0];
    normalize(&mut xs);
    let mean = xs.iter().sum::<f64>() / 4.0;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
    assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
}

#[test]
fn unit_ratio_gives_minus_mean_advantage() {
    let policy = Policy::new(Architecture::EncDec, 0).unwrap();
    let (mut batch, mut adv) = synthetic_batch(&policy, 12, 1);
    let input = BatchInput::new(&batch.iter().map(|t| &t.obs).collect::<Vec<_>>()).unwrap();
    let mut tape = Tape::new(&policy.params);
    let pass = policy.forward(&mut tape, &input).unwrap();
    let lp = tape.value(pass.log_probs).clone();
    for (i, t) in batch.iter_mut().enumerate() {
        t.log_prob = lp.get(i, t.action);
    }
    let refs: Vec<&Transition> = batch.iter().collect();
    let config = PpoConfig::default();
    let out = minibatch_loss(&lp, tape.value(pass.values), &refs, &adv, &config);
    let mean = adv.iter().sum::<f64>() / adv.len() as f64;
    assert!((out.policy_loss + mean).abs() < 1e-12);
    assert!((out.mean_ratio - 1.0).abs() < 1e-12);
    assert_eq!(out.clipped, 0);

    normalize(&mut adv);
    let out = minibatch_loss(&lp, tape.value(pass.values), &refs, &adv, &config);
    assert!(out.policy_loss.abs() < 1e-12);
}

#[test]
fn clipped_branch_blocks_the_policy_gradient() {
    let policy = Policy::new(Architecture::EncDec, 0).unwrap();
    let (mut batch, _) = synthetic_batch(&policy, 1, 2);
    let obs = &batch[0].obs;
    let out = policy.evaluate(obs).unwrap();
    let d = out.probabilities.len();
    let lp = Matrix::from_vec(1, d, out.probabilities.iter().map(|p| p.ln()).collect()).unwrap();
    let a = batch[0].action;
    batch[0].log_prob = lp.get(0, a) - 1.5f64.ln();
    let config = PpoConfig {
        entropy_coef: 0.0,
        ..PpoConfig::default()
    };
    let values = Matrix::filled(1, 1, 0.0);
    let loss = minibatch_loss(&lp, &values, &[&batch[0]], &[1.0], &config);
    assert_eq!(loss.clipped, 1);
    assert!((loss.mean_ratio - 1.5).abs() < 1e-12);
    assert!(loss.grad_log_probs.data().iter().all(|&g| g == 0.0));
    // negative advantage keeps the unclipped (smaller) branch
    let loss = minibatch_loss(&lp, &values, &[&batch[0]], &[-1.0], &config);
    assert!((loss.grad_log_probs.get(0, a) - 1.5).abs() < 1e-12);
}

#[test]
fn uniform_entropy_over_ten_depots() {
    let policy = Policy::new(Architecture::EncDec, 0).unwrap();
    let (batch, _) = synthetic_batch(&policy, 1, 3);
    let mut t = batch[0].clone();
    t.action = 0;
    t.log_prob = -(10f64.ln());
    let lp = Matrix::filled(1, 10, -(10f64.ln()));
    let loss = minibatch_loss(&lp, &Matrix::filled(1, 1, 0.0), &[&t], &[0.0], &PpoConfig::default());
    assert!((loss.entropy - 10f64.ln()).abs() < 1e-12);
    assert!((loss.entropy - std::f64::consts::LN_10).abs() < 1e-12);
}

#[test]
fn loss_gradients_match_finite_differences() {
    let policy = Policy::new(Architecture::EncDec, 0).unwrap();
    let (batch, adv) = synthetic_batch(&policy, 6, 4);
    let refs: Vec<&Transition> = batch.iter().collect();
    let input = BatchInput::new(&batch.iter().map(|t| &t.obs).collect::<Vec<_>>()).unwrap();
    let mut tape = Tape::new(&policy.params);
    let pass = policy.forward(&mut tape, &input).unwrap();
    let lp = tape.value(pass.log_probs).clone();
    let values = tape.value(pass.values).clone();
    let config = PpoConfig::default();
    let base = minibatch_loss(&lp, &values, &refs, &adv, &config);
    let eps = 1e-6;
    for r in 0..lp.rows() {
        for c in 0..lp.cols() {
            if lp.get(r, c) == f64::NEG_INFINITY {
                continue;
            }
            // the loss reads log-probs as independent inputs
            let (mut up, mut down) = (lp.clone(), lp.clone());
            up.set(r, c, lp.get(r, c) + eps);
            down.set(r, c, lp.get(r, c) - eps);
            let fd = (minibatch_loss(&up, &values, &refs, &adv, &config).loss
                - minibatch_loss(&down, &values, &refs, &adv, &config).loss)
                / (2.0 * eps);
            assert!((fd - base.grad_log_probs.get(r, c)).abs() < 1e-7, "({r},{c}) {fd} vs {}", base.grad_log_probs.get(r, c));
        }
        let (mut up, mut down) = (values.clone(), values.clone());
        up.set(r, 0, values.get(r, 0) + eps);
        down.set(r, 0, values.get(r, 0) - eps);
        let fd = (minibatch_loss(&lp, &up, &refs, &adv, &config).loss - minibatch_loss(&lp, &down, &refs, &adv, &config).loss) / (2.0 * eps);
        assert!((fd - base.grad_values.get(r, 0)).abs() < 1e-7);
    }
}

#[test]
fn rollouts_hold_exactly_the_requested_count() {
    let policy = Policy::new(Architecture::EncDec, 1).unwrap();
    let env = small_env();
    let opts = options(env.k_v, env.k_d);
    for count in [1, 6, 97] {
        let buffer = collect_rollouts(&env, &policy, opts, count, 0, 3, 0.99, 0.95).unwrap();
        assert_eq!(buffer.len(), count);
        for t in &buffer.transitions {
            assert!(t.step < env.max_decisions);
            assert!(t.advantage.is_finite() && t.ret.is_finite());
        }
    }
    let a = collect_rollouts(&env, &policy, opts, 50, 7, 3, 0.99, 0.95).unwrap();
    let b = collect_rollouts(&env, &policy, opts, 50, 7, 3, 0.99, 0.95).unwrap();
    let key = |buf: &aam_core::train::RolloutBuffer| {
        buf.transitions
            .iter()
            .map(|t| (t.agent, t.step, t.action, t.log_prob.to_bits(), t.reward.to_bits(), t.advantage.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(key(&a), key(&b));
}

#[test]
fn two_agents_three_decisions_each() {
    // two vehicles that each make exactly three decisions
    let mut config = EpisodeConfig::one_shot([2, 0, 0], 2, 1);
    config.max_decisions = 3;
    config.k_v = 2;
    config.k_d = 2;
    let depots = vec![
        Depot {
            id: 0,
            position: Point::new(2.0, 2.0),
            arrival_rate: 0.05,
            expected_size: 1.0,
            queue: [PayloadRequest {
                id: 0,
                origin: 0,
                destination: 2,
                capacity: 3,
                payoff: 5.0,
                arrival_tick: 0,
            }]
            .into(),
        },
        Depot {
            id: 1,
            position: Point::new(8.0, 2.0),
            arrival_rate: 0.05,
            expected_size: 1.0,
            queue: Default::default(),
        },
    ];
    let vehicles = (0..2)
        .map(|id| Vehicle {
            id,
            position: depots[id].position,
            capacity: 1,
            available: true,
            prev_stop: id,
            next_stop: id,
            job: None,
            decisions: 0,
        })
        .collect();
    let world = World::from_parts(&config, depots, vec![Point::new(20.0, 20.0)], vehicles, 0);
    let policy = Policy::new(Architecture::EncDec, 2).unwrap();
    let mut controller = aam_core::train::PolicyController::new(&policy, options(2, 2), 0);
    struct Count<'a, 'b>(&'a mut aam_core::train::PolicyController<'b>, usize);
    impl FleetController for Count<'_, '_> {
        fn decide(&mut self, world: &World, deciding: &[usize]) -> aam_core::Result<Vec<aam_core::Decision>> {
            self.1 += deciding.len();
            self.0.decide(world, deciding)
        }
    }
    let mut counter = Count(&mut controller, 0);
    let run = run_world(world, &mut counter).unwrap();
    assert_eq!(counter.1, 6);
    assert!(run.world.vehicles.iter().all(|v| v.decisions == 3));
}

#[test]
fn buffered_rewards_add_up_to_the_fleet_reward() {
    let policy = Policy::new(Architecture::HetGat, 4).unwrap();
    let env = small_env();
    let buffer = collect_rollouts(&env, &policy, options(env.k_v, env.k_d), 400, 100, 5, 0.99, 0.95).unwrap();
    let complete = buffer.episodes.len() - 1;
    for (e, metrics) in buffer.episodes.iter().enumerate().take(complete) {
        let total: f64 = buffer.transitions.iter().filter(|t| t.episode == e).map(|t| t.reward).sum();
        assert!((total - metrics.fleet_reward).abs() < 1e-9, "episode {e}: {total} vs {}", metrics.fleet_reward);
    }
}

#[test]
fn zero_budget_returns_the_initial_policy() {
    let config = TrainConfig::new(small_env(), Architecture::EncDec, false, 0, 3);
    let out = train(&config).unwrap();
    assert!(out.curve.is_empty());
    assert!(out.policy.params.values_equal(&Policy::new(Architecture::EncDec, 3).unwrap().params));
    assert_eq!(curve_csv(&out.curve).lines().count(), 1);
}

#[test]
fn short_training_is_reproducible_and_shared() {
    let mut config = TrainConfig::new(small_env(), Architecture::HetGcn, true, 96, 5);
    config.ppo.batch = 48;
    config.ppo.minibatch = 24;
    config.ppo.sgd_iters = 2;
    let a = train(&config).unwrap();
    let b = train(&config).unwrap();
    assert_eq!(a.curve.len(), 2);
    assert_eq!(a.curve, b.curve);
    assert!(a.policy.params.values_equal(&b.policy.params));
    assert!(!a.policy.params.values_equal(&Policy::new(Architecture::HetGcn, 5).unwrap().params));
    // one parameter set drives every vehicle, so any two agents with the
    // same observation act identically
    let world = World::new(&config.env, 0).unwrap();
    let obs = Observation::new(&world, 0, 2, 3, true).unwrap();
    assert_eq!(a.policy.evaluate(&obs).unwrap(), b.policy.evaluate(&obs).unwrap());
}

#[test]
fn mismatched_minibatch_is_rejected() {
    let mut config = TrainConfig::new(small_env(), Architecture::EncDec, false, 10, 0);
    config.ppo.minibatch = 7;
    assert!(matches!(train(&config), Err(Error::InvalidConfig(_))));
}
