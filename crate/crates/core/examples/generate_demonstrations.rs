//! Regenerates `data/en/demonstrations.json` from the expert policy.
//!
//! cargo run -p simpleds-core --example generate_demonstrations

use simpleds_core::data::DataPack;
use simpleds_core::expert::{generate_demonstrations, SHIPPED_CLEAN, SHIPPED_NOISY, SHIPPED_SEED};
use simpleds_core::Domain;

fn main() {
    let mut pack = DataPack::english();
    pack.demonstrations = None;
    let domain = Domain::new(pack).expect("English pack builds");
    eprintln!("vocabulary: {} words", domain.vocab.len());
    let corpus = generate_demonstrations(&domain, SHIPPED_CLEAN, SHIPPED_NOISY, SHIPPED_SEED);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/en/demonstrations.json");
    std::fs::write(path, corpus.to_json() + "\n").expect("write corpus");
    eprintln!(
        "{} dialogues, {} turns -> {path}",
        corpus.dialogues.len(),
        corpus.len()
    );
}
