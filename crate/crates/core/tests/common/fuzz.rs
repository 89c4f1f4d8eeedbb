//! Random question text for liveness runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &[
    "projects", "tickets", "researchers", "collaborators", "active", "completed", "open", "MySQL", "Neo4j",
    "Saba", "Attar", "assigned", "raised", "by", "the", "of", "list", "find", "show", "deadline", "domain",
    "DROP", "TABLE", "SELECT", "*", "';", "{", "}", "$gt", "MATCH", "()", "--", "null", "42", "2024-01-01",
    "é", "数据", "\t", "\\", "\"", "%", "weather", "banana",
];

/// `count` non-blank questions: corpus questions perturbed in various
/// ways, plus word salad and raw character noise.
pub fn questions(corpus: &[String], count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let base = &corpus[rng.random_range(0..corpus.len())];
        let q = match rng.random_range(0..6) {
            0 => base.clone(),
            1 => {
                let mut words: Vec<&str> = base.split_whitespace().collect();
                words.shuffle(&mut rng);
                words.join(" ")
            }
            2 => {
                let mut words: Vec<String> = base.split_whitespace().map(str::to_string).collect();
                for _ in 0..rng.random_range(1..4) {
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, WORDS[rng.random_range(0..WORDS.len())].to_string());
                }
                words.join(" ")
            }
            3 => (0..rng.random_range(1..12))
                .map(|_| WORDS[rng.random_range(0..WORDS.len())])
                .collect::<Vec<_>>()
                .join(" "),
            4 => (0..rng.random_range(1..80))
                .map(|_| char::from_u32(rng.random_range(0x20..0x2FF)).unwrap_or('?'))
                .collect(),
            _ => format!("{base} {}", "x".repeat(rng.random_range(0..2000))),
        };
        if !q.trim().is_empty() {
            out.push(q);
        }
    }
    out
}
