#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use simpleds_core::neural::QNetwork;
use simpleds_core::simulator::{NoiseConfig, UserGoal};
use simpleds_core::{DialogueAct, Domain, EnvConfig, Policy, CATALOG_SIZE};
use simpleds_server::{Server, ServerState};

pub fn quiet() -> EnvConfig {
    EnvConfig {
        noise: NoiseConfig {
            enabled: false,
            threshold: 0.5,
        },
        ..EnvConfig::default()
    }
}

pub fn goal() -> UserGoal {
    UserGoal {
        food: "mexican".into(),
        price: "reasonably priced".into(),
        area: "east".into(),
    }
}

/// The example dialogue; X and Y stand for the restaurant name and street.
pub const TRACE: [(&str, &str); 7] = [
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

/// A policy that ignores the state and ranks acts by `order`, earliest first.
pub fn ranked_policy(domain: &Domain, order: &[DialogueAct]) -> Policy {
    let n = domain.vocab.len();
    let mut net = QNetwork::zeros(&[n, 4, 4, CATALOG_SIZE]).unwrap();
    let out = net.layers_mut().last_mut().unwrap().biases_mut();
    for (rank, act) in order.iter().enumerate() {
        out[act.index()] = (order.len() - rank) as f64;
    }
    Policy::new(net, &domain.vocab)
}

/// Runs a server on its own thread and runtime; returns (tcp, ws) addresses.
pub fn start(state: ServerState) -> (SocketAddr, SocketAddr) {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async {
            let any = "127.0.0.1:0".parse().unwrap();
            let server = Server::bind(state, any, any).await.unwrap();
            tx.send((server.tcp_addr().unwrap(), server.ws_addr().unwrap()))
                .unwrap();
            server.run().await.unwrap();
        });
    });
    rx.recv().unwrap()
}

pub fn english() -> Arc<Domain> {
    static DOMAIN: std::sync::OnceLock<Arc<Domain>> = std::sync::OnceLock::new();
    DOMAIN.get_or_init(|| Arc::new(Domain::english())).clone()
}
