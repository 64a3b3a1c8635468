//! Deterministic synthetic review corpora for tests and demos.
//!
//! Ratings come from a latent item quality plus a user bias. Review text mixes
//! neutral filler with sentiment words that usually, but not always, agree with
//! the rating, so both the text and the user–item structure carry signal.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::ReviewRecord;
use crate::rng;

const POSITIVE: &[&str] = &[
    "great",
    "love",
    "excellent",
    "perfect",
    "sturdy",
    "soft",
    "recommend",
    "happy",
    "works",
    "adorable",
    "easy",
    "comfortable",
    "favorite",
    "durable",
    "cute",
    "quality",
];
const NEGATIVE: &[&str] = &[
    "broke",
    "cheap",
    "disappointed",
    "return",
    "leaks",
    "flimsy",
    "waste",
    "poor",
    "useless",
    "smells",
    "difficult",
    "ripped",
    "refund",
    "junk",
    "hard",
    "worst",
];
const NEUTRAL: &[&str] = &[
    "the", "baby", "this", "it", "for", "my", "and", "was", "with", "bottle", "stroller", "we",
    "daughter", "son", "bought", "use", "size", "month", "car", "seat", "blanket", "toy", "a",
    "is", "on", "after", "week", "old", "color", "price",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub reviews: usize,
    pub users: usize,
    pub items: usize,
    /// Share of words drawn from the sentiment lexicons.
    pub sentiment_rate: f64,
    /// Chance that a sentiment word contradicts the rating.
    pub text_noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Roughly five reviews per user and eight per item.
    pub fn new(reviews: usize, seed: u64) -> Self {
        Self {
            reviews,
            users: (reviews / 5).max(1),
            items: (reviews / 8).max(1),
            sentiment_rate: 0.5,
            text_noise: 0.1,
            seed,
        }
    }
}

pub fn generate(config: &SynthConfig) -> Vec<ReviewRecord> {
    let mut rng = rng::seeded(config.seed);
    let quality: Vec<f64> = (0..config.items)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let bias: Vec<f64> = (0..config.users)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.5 * z
        })
        .collect();
    (0..config.reviews)
        .map(|r| {
            let user = rng.random_range(0..config.users);
            let item = rng.random_range(0..config.items);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let latent = 3.75 + quality[item] + bias[user] + 0.6 * noise;
            let rating = latent.round().clamp(1.0, 5.0);
            let liked = rating >= 4.0;
            let len = rng.random_range(8..=20);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random::<f64>() < config.sentiment_rate {
                        let agree = rng.random::<f64>() >= config.text_noise;
                        let lexicon = if liked == agree { POSITIVE } else { NEGATIVE };
                        *lexicon.choose(&mut rng).expect("non-empty lexicon")
                    } else {
                        *NEUTRAL.choose(&mut rng).expect("non-empty lexicon")
                    }
                })
                .collect();
            ReviewRecord {
                user_id: format!("U{user:05}"),
                item_id: format!("B{item:05}"),
                rating,
                text: words.join(" "),
                timestamp: Some(1_400_000_000 + r as i64 * 3600),
            }
        })
        .collect()
}
