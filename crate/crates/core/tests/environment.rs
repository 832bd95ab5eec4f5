use std::sync::Arc;

use simpleds_core::config::Config;
use simpleds_core::domain::act::DialogueAct;
use simpleds_core::domain::text::tokenize;
use simpleds_core::simulator::{NoiseConfig, UserGoal};
use simpleds_core::{Domain, EnvConfig, Environment, Session, CATALOG_SIZE};

fn quiet() -> EnvConfig {
    EnvConfig {
        noise: NoiseConfig {
            enabled: false,
            threshold: 0.5,
        },
        ..EnvConfig::default()
    }
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

/// The example dialogue: acts and what the system says for each.
const TRACE: [(&str, &str); 7] = [
    ("Salutation(greeting)", "Hello!"),
    (
        "Request(food,price,area)",
        "What type of food, price range, and area are you looking for?",
    ),
    (
        "ImpConfirm(food,price,area)",
        "Okay, reasonably priced mexican food in the east.",
    ),
    ("Retrieve(info)", "Let me see."),
    (
        "Provide(known)",
        "Restaurant X is an excellent choice. It is located in Y.",
    ),
    ("AskFor(more)", "Anything else?"),
    ("Salutation(closing)", "Okay, talk to you soon. Bye!"),
];

#[test]
fn scripted_example_dialogue() {
    let domain = Arc::new(Domain::english());
    let mut session = Session::new(domain.clone(), quiet(), 1);
    let first = session.reset(Some(goal())).unwrap();
    assert!(first.state.iter().all(|v| *v == 0.0));
    let mut rewards = Vec::new();
    let mut last = first;
    for (name, text) in TRACE {
        assert!(
            last.valid_actions.contains(&act(name)),
            "{name} not offered"
        );
        last = session.step(act(name)).unwrap();
        let want = text.replace('X', "pancho").replace('Y', "mill road");
        assert_eq!(tokenize(&last.system_text), tokenize(&want), "{name}");
        rewards.push(last.reward);
    }
    assert_eq!(session.context().turns(), 7);
    assert!(last.terminal && last.task_success);
    assert_eq!(session.context().confirmed().len(), 3);
    assert!(
        rewards.iter().all(|r| (-0.1..=0.9).contains(r)),
        "{rewards:?}"
    );
    // CR = 1 on the final transition: reward = 0.5 + 0.5 * DR - 0.1 >= 0.4.
    assert!(*rewards.last().unwrap() >= 0.4);
}

#[test]
fn user_turns_match_the_example() {
    let domain = Arc::new(Domain::english());
    let mut session = Session::new(domain, quiet(), 1);
    session.reset(Some(goal())).unwrap();
    let mut heard = Vec::new();
    for (name, _) in TRACE {
        heard.push(session.step(act(name)).unwrap().user_text);
    }
    assert_eq!(
        heard[1],
        "reasonably priced mexican food in the east of town"
    );
    assert_eq!(heard[5], "no");
    for i in [0, 2, 3, 4, 6] {
        assert_eq!(heard[i], "", "turn {i}");
    }
}

#[test]
fn greeting_reward_uses_posterior_at_zero_state() {
    let domain = Arc::new(Domain::english());
    let mut session = Session::new(domain.clone(), quiet(), 2);
    session.reset(None).unwrap();
    let obs = session.step(act("Salutation(greeting)")).unwrap();
    let dr = domain.model.posterior(&vec![0.0; domain.vocab.len()])[act("Salutation(greeting)")];
    assert!((obs.reward - (0.0 * 0.5 + dr * 0.5 - 0.1)).abs() < 1e-12);
    assert!(!obs.terminal);
}

#[test]
fn closing_ends_the_episode_and_later_steps_fail() {
    let domain = Arc::new(Domain::english());
    let mut session = Session::new(domain, quiet(), 3);
    session.reset(Some(goal())).unwrap();
    for (name, _) in TRACE {
        session.step(act(name)).unwrap();
    }
    let err = session.step(act("Salutation(greeting)")).unwrap_err();
    assert_eq!(err.reason(), "terminal");
}

#[test]
fn resets_are_seeded_and_discard_the_episode() {
    let domain = Arc::new(Domain::english());
    let goals = |seed| {
        let mut s = Session::new(domain.clone(), EnvConfig::default(), seed);
        (0..5)
            .map(|_| {
                s.reset(None).unwrap();
                s.goal().unwrap().clone()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(goals(9), goals(9));

    let mut s = Session::new(domain.clone(), quiet(), 4);
    s.reset(Some(goal())).unwrap();
    s.step(act("Salutation(greeting)")).unwrap();
    s.step(act("Request(food,price,area)")).unwrap();
    let obs = s.reset(None).unwrap();
    assert_eq!(s.context().turns(), 0);
    assert!(s.context().filled().is_empty());
    assert!(obs.state.iter().all(|v| *v == 0.0));
    assert!(obs.valid_actions.contains(&act("Salutation(greeting)")));
}

#[test]
fn scripted_runs_are_bit_identical() {
    let domain = Arc::new(Domain::english());
    let run = || {
        let mut s = Session::new(domain.clone(), EnvConfig::default(), 5);
        let mut out = vec![s.reset(None).unwrap()];
        for name in [
            "Salutation(greeting)",
            "Request(food,price,area)",
            "Request(hmihy)",
        ] {
            match s.step(act(name)) {
                Ok(o) => out.push(o),
                Err(e) => assert_eq!(e.reason(), "invalid_action"),
            }
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn episodes_never_exceed_max_turns() {
    let domain = Arc::new(Domain::english());
    let config = EnvConfig {
        max_turns: 6,
        ..EnvConfig::default()
    };
    let mut s = Session::new(domain, config, 6);
    let mut obs = s.reset(None).unwrap();
    let mut turns = 0;
    while !obs.terminal {
        assert!(!obs.valid_actions.is_empty());
        assert!(obs.valid_actions.iter().all(|a| *a < CATALOG_SIZE));
        // Always pick the last offered act; this never closes early.
        obs = s.step(*obs.valid_actions.last().unwrap()).unwrap();
        turns += 1;
    }
    assert!(turns <= 6);
}

#[test]
fn human_text_fills_slots_like_the_simulator() {
    let domain = Arc::new(Domain::english());
    let mut s = Session::new(domain.clone(), quiet(), 7);
    s.begin(None);
    s.system_turn(act("Salutation(greeting)")).unwrap();
    s.human_turn(None).unwrap();
    s.system_turn(act("Request(food,price,area)")).unwrap();
    let obs = s
        .human_turn(Some("cheap italian food in the north"))
        .unwrap();
    let values = s.context().values();
    assert_eq!(values[0].as_deref(), Some("italian"));
    assert_eq!(values[1].as_deref(), Some("cheap"));
    assert_eq!(values[2].as_deref(), Some("north"));
    let north = domain.vocab.index_of("north").unwrap();
    assert_eq!(obs.state[north], 1.0);

    s.system_turn(act("Request(hmihy)")).unwrap_err();
    let before = s.context().clone();
    s.system_turn(act("ExpConfirm(food)")).unwrap();
    let obs = s.human_turn(Some("zzz qqq")).unwrap();
    assert_eq!(s.context().values(), before.values());
    assert_eq!(s.context().turns(), before.turns() + 1);
    // Only the system's words remain visible.
    let system_only: Vec<usize> = (0..obs.state.len())
        .filter(|i| obs.state[*i] > 0.0)
        .collect();
    let said = tokenize("Did you say italian food?");
    assert!(system_only.iter().all(|i| said
        .iter()
        .any(|w| domain.vocab.word(*i) == Some(w.as_str()))));
}

#[test]
fn default_configuration_snapshot() {
    let c = Config::default();
    let hp = &c.learning;
    let domain = Domain::english();
    assert!(domain.vocab.len() <= 100);
    assert_eq!(
        hp.layer_dims(domain.vocab.len()),
        vec![domain.vocab.len(), 40, 40, 35]
    );
    assert_eq!(hp.replay_capacity, 10_000);
    assert_eq!(hp.gamma, 0.7);
    assert_eq!(hp.epsilon_min, 0.01);
    assert_eq!(hp.batch_size, 32);
    assert_eq!(hp.total_learning_steps, 20_000);
    assert_eq!(hp.max_episodes, 3_000);
    assert_eq!(c.reward.w, 0.5);
    assert_eq!(c.reward.dl, 0.1);
    assert_eq!(c.dialogue.probable_threshold, 0.01);
    assert_eq!(CATALOG_SIZE, 35);
    assert_eq!(c.noise.threshold, 0.5);
    assert_eq!(c.dialogue.max_turns, 30);
}

#[test]
fn vocabulary_is_pinned() {
    let fixture = include_str!("fixtures/vocabulary.txt");
    let want: Vec<&str> = fixture.lines().collect();
    let domain = Domain::english();
    assert_eq!(domain.vocab.words(), want.as_slice());
    assert_eq!(Domain::english().vocab, domain.vocab);
}
