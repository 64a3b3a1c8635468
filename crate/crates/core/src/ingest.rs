//! Review parsing, text cleaning, labeling and train/test splitting.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Ratings at or above this value mark a recommended product.
pub const POSITIVE_RATING: f64 = 4.0;

/// One user–item review.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRecord {
    pub user_id: String,
    pub item_id: String,
    /// In `[1, 5]`.
    pub rating: f64,
    pub text: String,
    pub timestamp: Option<i64>,
}

/// A review with its binary recommendation label (1 = recommended).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub record: ReviewRecord,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub train_fraction: f64,
    pub seed: u64,
}

/// Wire form of one line of an Amazon review dump. Extra fields are ignored.
#[derive(Debug, Serialize, Deserialize)]
struct RawReview {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    overall: f64,
    #[serde(rename = "reviewText")]
    review_text: String,
    #[serde(
        rename = "unixReviewTime",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    unix_review_time: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

impl ReviewRecord {
    fn from_raw(raw: RawReview) -> Option<Self> {
        if raw.reviewer_id.is_empty() || raw.asin.is_empty() || !(1.0..=5.0).contains(&raw.overall)
        {
            return None;
        }
        Some(ReviewRecord {
            user_id: raw.reviewer_id,
            item_id: raw.asin,
            rating: raw.overall,
            text: raw.review_text,
            timestamp: raw.unix_review_time,
        })
    }

    fn to_raw(&self, label: Option<u8>) -> RawReview {
        RawReview {
            reviewer_id: self.user_id.clone(),
            asin: self.item_id.clone(),
            overall: self.rating,
            review_text: self.text.clone(),
            unix_review_time: self.timestamp,
            label,
        }
    }
}

/// Parses newline-delimited JSON reviews.
///
/// Lines that are not valid UTF-8 JSON objects, lack a required field, or
/// carry an out-of-range rating or empty id are skipped and counted. Only a
/// failing reader aborts.
pub fn parse_reviews<R: BufRead>(mut source: R) -> Result<(Vec<ReviewRecord>, usize)> {
    let mut records = Vec::new();
    let mut skipped = 0;
    let mut line = Vec::new();
    loop {
        line.clear();
        if source.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        let parsed = serde_json::from_slice::<RawReview>(&line)
            .ok()
            .and_then(ReviewRecord::from_raw);
        match parsed {
            Some(r) => records.push(r),
            None => skipped += 1,
        }
    }
    Ok((records, skipped))
}

/// Writes examples in the input line format, with cleaned text and an extra
/// `label` field. The output parses back with [`parse_reviews`].
pub fn write_examples<W: Write>(mut out: W, examples: &[LabeledExample]) -> Result<()> {
    for ex in examples {
        let line = serde_json::to_string(&ex.record.to_raw(Some(ex.label)))
            .map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_reviews<W: Write>(mut out: W, records: &[ReviewRecord]) -> Result<()> {
    for r in records {
        let line =
            serde_json::to_string(&r.to_raw(None)).map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Lowercases and keeps only `[a-z0-9 ]`, collapsing whitespace runs.
///
/// Any whitespace character becomes a separator; every other codepoint
/// (punctuation, emoji, emoticon glyphs, accented letters) is dropped.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_ascii_lowercase() || c.is_ascii_digit() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

/// 1 iff `rating >= 4`.
pub fn derive_label(rating: f64) -> Result<u8> {
    if !(1.0..=5.0).contains(&rating) {
        return Err(Error::domain(format!("rating {rating} outside [1, 5]")));
    }
    Ok(u8::from(rating >= POSITIVE_RATING))
}

/// Cleans each review's text and attaches its label.
pub fn label_records(records: Vec<ReviewRecord>) -> Result<Vec<LabeledExample>> {
    records
        .into_iter()
        .map(|mut record| {
            let label = derive_label(record.rating)?;
            record.text = clean_text(&record.text);
            Ok(LabeledExample { record, label })
        })
        .collect()
}

/// Seeded uniform shuffle; the first `round(fraction * n)` examples train.
pub fn split(examples: &[LabeledExample], train_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if examples.is_empty() {
        return Err(Error::domain("cannot split an empty example list"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut shuffled = examples.to_vec();
    shuffled.shuffle(&mut rng::seeded(seed));
    let n_train = (train_fraction * examples.len() as f64).round() as usize;
    let test = shuffled.split_off(n_train);
    Ok(DatasetSplit {
        train: shuffled,
        test,
        train_fraction,
        seed,
    })
}
