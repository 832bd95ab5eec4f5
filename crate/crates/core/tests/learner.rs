use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simpleds_core::dqn::{
    argmax_over, run_training, select_action, td_target, train_step, Experience, HyperParams,
    ReplayBuffer, TargetPair,
};
use simpleds_core::neural::QNetwork;
use simpleds_core::simulator::NoiseConfig;
use simpleds_core::{Domain, EnvConfig, Session};

/// Two states, two actions, deterministic, rewards 0/1:
/// s0 -a0-> s0 (0), s0 -a1-> s1 (0), s1 -a0-> s0 (1), s1 -a1-> s1 (0).
fn toy_step(s: usize, a: usize) -> (usize, f64) {
    match (s, a) {
        (0, 0) => (0, 0.0),
        (0, _) => (1, 0.0),
        (_, 0) => (0, 1.0),
        _ => (1, 0.0),
    }
}

fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; 2];
    v[s] = 1.0;
    v
}

/// Value iteration on the enumerated MDP; returns (V, greedy policy).
fn value_iteration(gamma: f64) -> ([f64; 2], [usize; 2]) {
    let mut v = [0.0; 2];
    for _ in 0..500 {
        let mut next = [0.0; 2];
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = (0..2)
                .map(|a| {
                    let (t, r) = toy_step(s, a);
                    r + gamma * v[t]
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        v = next;
    }
    let mut policy = [0; 2];
    for (s, p) in policy.iter_mut().enumerate() {
        let q = |a| {
            let (t, r) = toy_step(s, a);
            r + gamma * v[t]
        };
        *p = if q(1) > q(0) { 1 } else { 0 };
    }
    (v, policy)
}

fn toy_hyperparams() -> HyperParams {
    HyperParams {
        hidden: vec![16, 16],
        epsilon_anneal_steps: 2_500,
        replay_warmup: 100,
        target_sync_period: 200,
        learning_rate: 0.01,
        ..HyperParams::default()
    }
}

/// Continuing task on the toy MDP with the 35-way net restricted to {0, 1}.
fn train_toy(seed: u64, steps: u64) -> QNetwork {
    let hp = toy_hyperparams();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = TargetPair::new(QNetwork::random(&hp.layer_dims(2), &mut rng).unwrap());
    let mut buffer = ReplayBuffer::new(hp.replay_capacity);
    let valid = vec![0, 1];
    let mut s = 0;
    for step in 0..steps {
        let a = select_action(
            &pair.online,
            &one_hot(s),
            &valid,
            hp.epsilon(step),
            &mut rng,
        )
        .unwrap();
        let (t, r) = toy_step(s, a);
        buffer.push(Experience {
            s: one_hot(s),
            a,
            r,
            s_next: one_hot(t),
            terminal: false,
            valid_next: valid.clone(),
        });
        train_step(&mut pair, &buffer, &hp, &mut rng).unwrap();
        s = t;
    }
    pair.online
}

#[test]
fn value_iteration_oracle() {
    let (v, policy) = value_iteration(0.7);
    assert!((v[1] - 1.0 / 0.51).abs() < 1e-9);
    assert!((v[0] - 0.7 / 0.51).abs() < 1e-9);
    assert_eq!(policy, [1, 0]);
}

#[test]
fn toy_mdp_policy_matches_value_iteration_for_ten_seeds() {
    let (v, policy) = value_iteration(0.7);
    for seed in 0..10 {
        let net = train_toy(seed, 5_000);
        for s in 0..2 {
            let q = net.forward(&one_hot(s)).unwrap();
            assert_eq!(
                argmax_over(&q, &[0, 1]),
                Some(policy[s]),
                "seed {seed} state {s}: {:?}",
                &q[..2]
            );
            assert!(
                (q[policy[s]] - v[s]).abs() < 0.3,
                "seed {seed} state {s}: {} vs {}",
                q[policy[s]],
                v[s]
            );
        }
    }
}

#[test]
fn td_target_cases() {
    let mut target = QNetwork::zeros(&[1, 3]).unwrap();
    target.layers_mut()[0]
        .biases_mut()
        .copy_from_slice(&[1.0, 5.0, -2.0]);
    let e = |r, terminal, valid_next: Vec<usize>| Experience {
        s: vec![0.0],
        a: 0,
        r,
        s_next: vec![0.0],
        terminal,
        valid_next,
    };
    assert_eq!(
        td_target(&target, &e(0.9, true, vec![0, 1]), 0.7).unwrap(),
        0.9
    );
    assert_eq!(
        td_target(&target, &e(0.43, false, vec![0, 1]), 0.0).unwrap(),
        0.43
    );
    // The bootstrap only looks at valid actions: 5.0 at index 1 is excluded.
    let y = td_target(&target, &e(-0.1, false, vec![0, 2]), 0.7).unwrap();
    assert!((y - 0.6).abs() < 1e-12);
}

#[test]
fn single_experience_loss_converges() {
    let hp = HyperParams {
        replay_warmup: 1,
        ..HyperParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s: Vec<f64> = (0..20)
        .map(|i| if i % 3 == 0 { 1.0 } else { 0.25 })
        .collect();
    let mut pair = TargetPair::new(QNetwork::random(&hp.layer_dims(20), &mut rng).unwrap());
    let mut buffer = ReplayBuffer::new(10);
    buffer.push(Experience {
        s: s.clone(),
        a: 4,
        r: 0.5,
        s_next: s,
        terminal: true,
        valid_next: vec![],
    });
    let mut last = f64::INFINITY;
    for step in 0..2_000 {
        let loss = train_step(&mut pair, &buffer, &hp, &mut rng)
            .unwrap()
            .unwrap();
        assert!(loss <= last + 1e-15, "step {step}: {loss} > {last}");
        last = loss;
    }
    assert!(last < 1e-6, "{last}");
}

#[test]
fn target_syncs_after_c_updates() {
    let hp = HyperParams {
        replay_warmup: 1,
        target_sync_period: 5,
        ..HyperParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut pair = TargetPair::new(QNetwork::random(&hp.layer_dims(3), &mut rng).unwrap());
    let mut buffer = ReplayBuffer::new(4);
    buffer.push(Experience {
        s: vec![1.0, 0.0, 1.0],
        a: 2,
        r: 0.9,
        s_next: vec![0.0; 3],
        terminal: true,
        valid_next: vec![],
    });
    for _ in 0..4 {
        train_step(&mut pair, &buffer, &hp, &mut rng).unwrap();
    }
    assert_eq!(pair.steps_since_sync, 4);
    assert_ne!(pair.target, pair.online);
    train_step(&mut pair, &buffer, &hp, &mut rng).unwrap();
    assert_eq!(pair.steps_since_sync, 0);
    assert_eq!(pair.target, pair.online);
}

#[test]
fn warmup_is_a_no_op() {
    let hp = HyperParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut pair = TargetPair::new(QNetwork::random(&hp.layer_dims(3), &mut rng).unwrap());
    let before = pair.clone();
    let buffer = ReplayBuffer::new(10);
    assert_eq!(train_step(&mut pair, &buffer, &hp, &mut rng).unwrap(), None);
    assert_eq!(pair, before);
}

#[test]
fn masked_update_leaves_orthogonal_states_untouched() {
    let hp = HyperParams {
        replay_warmup: 1,
        ..HyperParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Single linear layer; the batch only ever contains state e0 and action 1.
    let mut pair = TargetPair::new(QNetwork::random(&[3, 4], &mut rng).unwrap());
    let mut buffer = ReplayBuffer::new(2);
    buffer.push(Experience {
        s: vec![1.0, 0.0, 0.0],
        a: 1,
        r: 1.0,
        s_next: vec![0.0; 3],
        terminal: true,
        valid_next: vec![],
    });
    let probe = [0.0, 1.0, 0.0];
    let before = pair.online.forward(&probe).unwrap();
    for _ in 0..10 {
        train_step(&mut pair, &buffer, &hp, &mut rng).unwrap();
    }
    let after = pair.online.forward(&probe).unwrap();
    for a in [0, 2, 3] {
        assert_eq!(after[a], before[a]);
    }
}

#[test]
fn epsilon_uniform_branch_is_balanced() {
    let net = QNetwork::zeros(&[1, 35]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 10_000;
    let threes = (0..n)
        .filter(|_| select_action(&net, &[0.0], &[3, 7], 1.0, &mut rng).unwrap() == 3)
        .count();
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((threes as f64 - 5_000.0).abs() < 3.0 * sigma, "{threes}");
}

#[test]
fn training_is_deterministic_and_zero_steps_keeps_init() {
    let domain = Arc::new(Domain::english());
    let config = EnvConfig {
        noise: NoiseConfig {
            enabled: true,
            threshold: 0.5,
        },
        ..EnvConfig::default()
    };
    let hp = HyperParams {
        total_learning_steps: 1_500,
        ..HyperParams::default()
    };
    let run = || {
        let mut env = Session::new(domain.clone(), config.clone(), 21);
        run_training(&mut env, &hp, 21).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.net, b.net);
    assert_eq!(a.steps, 1_500);

    let zero = HyperParams {
        total_learning_steps: 0,
        ..HyperParams::default()
    };
    let mut env = Session::new(domain.clone(), config, 21);
    let out = run_training(&mut env, &zero, 21).unwrap();
    assert!(out.curve.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    assert_eq!(
        out.net,
        QNetwork::random(&zero.layer_dims(domain.vocab.len()), &mut rng).unwrap()
    );
}
