use std::sync::Arc;

use simpleds_core::constraints::{
    constrained_set, legitimate_actions, DemoTurn, DemonstrationCorpus, NaiveBayesModel,
};
use simpleds_core::domain::act::{ActType, DialogueAct, SlotSet, CATALOG};
use simpleds_core::env::context::DialogueContext;
use simpleds_core::simulator::{NoiseConfig, UserGoal};
use simpleds_core::{Domain, EnvConfig, Session, CATALOG_SIZE};

const G: DialogueAct = DialogueAct::Greeting;
const B: DialogueAct = DialogueAct::RequestHmihy;
const C: DialogueAct = DialogueAct::Closing;

fn dialogue(turns: &[(&[f64], DialogueAct)]) -> Vec<DemoTurn> {
    turns
        .iter()
        .map(|(s, a)| DemoTurn {
            state: s.to_vec(),
            action: *a,
        })
        .collect()
}

/// Three dialogues over four features; 0.5 counts as "on" (threshold 0).
fn toy_corpus() -> DemonstrationCorpus {
    DemonstrationCorpus {
        dialogues: vec![
            dialogue(&[(&[0.0, 0.0, 0.0, 0.0], G), (&[1.0, 0.0, 0.0, 0.0], B)]),
            dialogue(&[
                (&[0.0, 0.0, 0.0, 0.0], G),
                (&[1.0, 1.0, 0.0, 0.0], B),
                (&[0.0, 0.0, 1.0, 1.0], C),
            ]),
            dialogue(&[(&[0.0, 0.0, 0.0, 0.0], G), (&[0.0, 0.0, 1.0, 0.5], C)]),
        ],
    }
}

#[test]
fn posterior_matches_hand_computed_table() {
    let model = NaiveBayesModel::train(&toy_corpus(), 4).unwrap();
    // N = 7 turns; counts G 3, B 2, C 2, the other 32 acts 0.
    // Priors (c+1)/(N+35); Bernoulli on-probabilities (n+1)/(c+2).
    // For s = [1,0,0,0]:
    //   G: 4/42 * (1/5)(4/5)(4/5)(4/5)
    //   B: 3/42 * (3/4)(2/4)(3/4)(3/4)
    //   C: 3/42 * (1/4)(3/4)(1/4)(1/4)
    //   other: 1/42 * (1/2)^4 each
    let g = 4.0 / 42.0 * (1.0 / 5.0) * (4.0 / 5.0) * (4.0 / 5.0) * (4.0 / 5.0);
    let b = 3.0 / 42.0 * (3.0 / 4.0) * (2.0 / 4.0) * (3.0 / 4.0) * (3.0 / 4.0);
    let c = 3.0 / 42.0 * (1.0 / 4.0) * (3.0 / 4.0) * (1.0 / 4.0) * (1.0 / 4.0);
    let o = 1.0 / 42.0 / 16.0;
    let z = g + b + c + 32.0 * o;
    let post = model.posterior(&[1.0, 0.0, 0.0, 0.0]);
    assert!((post[G.index()] - g / z).abs() < 1e-12);
    assert!((post[B.index()] - b / z).abs() < 1e-12);
    assert!((post[C.index()] - c / z).abs() < 1e-12);
    for (i, p) in post.iter().enumerate() {
        if ![G.index(), B.index(), C.index()].contains(&i) {
            assert!((p - o / z).abs() < 1e-12);
        }
    }
}

/// Bayes rule by direct enumeration of smoothed counts, no logs.
fn brute_force(corpus: &DemonstrationCorpus, n_features: usize, s: &[f64]) -> Vec<f64> {
    let turns: Vec<&DemoTurn> = corpus.turns().collect();
    let n = turns.len() as f64;
    let joint: Vec<f64> = (0..CATALOG_SIZE)
        .map(|a| {
            let with_a: Vec<&&DemoTurn> = turns.iter().filter(|t| t.action.index() == a).collect();
            let c = with_a.len() as f64;
            let mut p = (c + 1.0) / (n + CATALOG_SIZE as f64);
            for (f, x) in s.iter().enumerate().take(n_features) {
                let on = with_a.iter().filter(|t| t.state[f] > 0.0).count() as f64;
                let theta = (on + 1.0) / (c + 2.0);
                p *= if *x > 0.0 { theta } else { 1.0 - theta };
            }
            p
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.iter().map(|j| j / z).collect()
}

#[test]
fn held_out_states_match_enumeration() {
    let corpus = toy_corpus();
    let model = NaiveBayesModel::train(&corpus, 4).unwrap();
    for s in [
        [0.0, 1.0, 1.0, 0.0],
        [0.3, 0.0, 0.0, 0.9],
        [1.0, 1.0, 1.0, 1.0],
    ] {
        let want = brute_force(&corpus, 4, &s);
        let got = model.posterior(&s);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{s:?}: {g} vs {w}");
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn single_observation_dominates() {
    let s0 = [1.0, 0.0, 1.0];
    let corpus = DemonstrationCorpus {
        dialogues: vec![dialogue(&[(&s0, G)])],
    };
    let post = NaiveBayesModel::train(&corpus, 3).unwrap().posterior(&s0);
    let best = (0..CATALOG_SIZE)
        .max_by(|a, b| post[*a].total_cmp(&post[*b]))
        .unwrap();
    assert_eq!(best, G.index());
    assert!(post
        .iter()
        .enumerate()
        .all(|(i, p)| i == best || *p < post[best]));
}

#[test]
fn symmetric_actions_get_equal_posteriors() {
    let s = [0.0, 1.0];
    let corpus = DemonstrationCorpus {
        dialogues: vec![dialogue(&[(&s, G), (&s, C)])],
    };
    let post = NaiveBayesModel::train(&corpus, 2).unwrap().posterior(&s);
    assert_eq!(post[G.index()], post[C.index()]);
}

#[test]
fn uniform_model_is_flat() {
    let post = NaiveBayesModel::uninformed(5, CATALOG_SIZE).posterior(&[0.0, 1.0, 0.5, 0.0, 0.0]);
    assert!(post.iter().all(|p| (p - 1.0 / 35.0).abs() < 1e-12));
}

#[test]
fn peaked_posterior_unites_with_legitimate_acts() {
    // Two probable acts (greeting and closing) over a fresh context whose
    // legitimate set is greeting plus the eight requests.
    let s = [1.0; 30];
    let corpus = DemonstrationCorpus {
        dialogues: vec![dialogue(&[(&s, G), (&s, C)]); 5],
    };
    let model = NaiveBayesModel::train(&corpus, 30).unwrap();
    let post = model.posterior(&s);
    let probable: Vec<usize> = (0..CATALOG_SIZE).filter(|a| post[*a] > 0.01).collect();
    assert_eq!(probable, vec![G.index(), C.index()]);
    let set = constrained_set(&model, &s, &DialogueContext::new(), 0.01, 0.5);
    assert_eq!(set.actions.len(), 10);
    assert!(!set.anomaly);
}

fn clean_session(goal: UserGoal) -> Session {
    let config = EnvConfig {
        noise: NoiseConfig {
            enabled: false,
            threshold: 0.5,
        },
        ..EnvConfig::default()
    };
    let mut session = Session::new(Arc::new(Domain::english()), config, 4);
    session.begin(Some(goal));
    session
}

fn goal() -> UserGoal {
    UserGoal {
        food: "mexican".into(),
        price: "reasonably priced".into(),
        area: "east".into(),
    }
}

fn act(name: &str) -> usize {
    name.parse::<DialogueAct>().unwrap().index()
}

#[test]
fn legitimacy_follows_the_dialogue() {
    let fresh = legitimate_actions(&DialogueContext::new(), 0.5);
    let requests: Vec<usize> = CATALOG
        .iter()
        .filter(|a| a.act_type() == ActType::Request)
        .map(|a| a.index())
        .collect();
    assert_eq!(requests.len(), 8);
    assert!(fresh.contains(&G.index()));
    assert!(requests.iter().all(|r| fresh.contains(r)));
    assert!(!fresh.iter().any(|a| matches!(
        CATALOG[*a],
        DialogueAct::ExpConfirm(_) | DialogueAct::ImpConfirm(_)
    )));

    let mut session = clean_session(goal());
    use simpleds_core::Environment;
    session.step(act("Salutation(greeting)")).unwrap();
    session.step(act("Request(food,price,area)")).unwrap();
    let legit = legitimate_actions(session.context(), 0.5);
    let confirmations = CATALOG
        .iter()
        .filter(|a| matches!(a, DialogueAct::ExpConfirm(_) | DialogueAct::ImpConfirm(_)))
        .count();
    assert_eq!(confirmations, 14);
    for a in CATALOG.iter() {
        match a {
            DialogueAct::ExpConfirm(_) | DialogueAct::ImpConfirm(_) => {
                assert!(legit.contains(&a.index()), "{a}")
            }
            DialogueAct::Request(_) | DialogueAct::RequestHmihy => {
                assert!(!legit.contains(&a.index()), "{a}")
            }
            _ => {}
        }
    }

    session.step(act("ImpConfirm(food,price,area)")).unwrap();
    assert_eq!(session.context().confirmed(), SlotSet::FULL);
    assert_eq!(
        legitimate_actions(session.context(), 0.5),
        vec![act("Retrieve(info)")]
    );
}

#[test]
fn constrained_sets_are_never_empty_along_rollouts() {
    use simpleds_core::eval::{run_episode, Expert};
    let domain = Arc::new(Domain::english());
    let mut session = Session::new(domain, EnvConfig::default(), 77);
    let mut expert = Expert {
        apology_threshold: 0.5,
    };
    for _ in 0..50 {
        let result = run_episode(&mut session, &mut expert, None).unwrap();
        assert!(result
            .valid_sizes
            .iter()
            .all(|n| (1..=CATALOG_SIZE).contains(n)));
    }
    assert_eq!(session.anomalies(), 0);
}
