//! Fitted text + graph featurizer.
//!
//! Both halves are fitted on training reviews only; applying the pipeline to
//! an unseen review never changes it.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::graph::{self, EmbeddingTable};
use crate::ingest::{clean_text, LabeledExample};
use crate::scalar::Scalar;
use crate::tfidf::{self, tokenize, FeatureVector, TfidfModel};

pub use crate::graph::concat_features;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub max_terms: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub rank: usize,
    pub iterations: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            max_terms: tfidf::DEFAULT_MAX_TERMS,
            walks_per_node: graph::DEFAULT_WALKS_PER_NODE,
            walk_length: graph::DEFAULT_WALK_LENGTH,
            window: graph::DEFAULT_WINDOW,
            rank: graph::DEFAULT_RANK,
            iterations: graph::DEFAULT_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePipeline<T> {
    pub tfidf: TfidfModel<T>,
    pub embeddings: EmbeddingTable<T>,
    /// Width reserved for the TF-IDF block. Vocabularies smaller than the cap
    /// are zero-padded so every pipeline emits the same dimension.
    pub text_width: usize,
}

impl<T: Scalar> FeaturePipeline<T> {
    /// Fits the vocabulary, idf and graph embedding on `train`.
    ///
    /// Graphs with fewer nodes than `config.rank` are factorized at their full
    /// size and zero-padded to `rank`.
    pub fn fit(train: &[LabeledExample], config: &FeatureConfig, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::domain(
                "cannot fit features on an empty training set",
            ));
        }
        let corpus: Vec<Vec<String>> = train
            .iter()
            .map(|ex| tokenize(&clean_text(&ex.record.text)))
            .collect();
        let tfidf = TfidfModel::fit(&corpus, config.max_terms)?;

        let records: Vec<_> = train.iter().map(|ex| ex.record.clone()).collect();
        let g = graph::build_interaction_graph(&records);
        let walks = graph::sample_walks(&g, config.walks_per_node, config.walk_length, seed)?;
        let ppmi = graph::cooccurrence_ppmi::<T>(&walks, config.window)?;
        let rank = config.rank.min(g.node_count());
        let embeddings = if rank == 0 {
            EmbeddingTable::new(0)
        } else {
            graph::factorize_ppmi(&ppmi, g.nodes(), rank, config.iterations, seed)?
        }
        .padded(config.rank)?;
        Ok(Self {
            tfidf,
            embeddings,
            text_width: config.max_terms,
        })
    }

    pub fn dimension(&self) -> usize {
        self.text_width + self.embeddings.rank()
    }

    pub fn transform(&self, example: &LabeledExample) -> Result<FeatureVector<T>> {
        let tokens = tokenize(&clean_text(&example.record.text));
        let mut text = tfidf::tfidf_vector(&tokens, &self.tfidf);
        text.values.resize(self.text_width, T::zero());
        let item = graph::item_feature(
            &example.record.item_id,
            &self.embeddings,
            self.embeddings.rank(),
        )?;
        Ok(concat_features(&text, &item))
    }

    pub fn transform_all(
        &self,
        examples: &[LabeledExample],
    ) -> Result<Vec<(FeatureVector<T>, u8)>> {
        examples
            .iter()
            .map(|ex| Ok((self.transform(ex)?, ex.label)))
            .collect()
    }
}

/// Writes labeled feature vectors in a sparse text format: a header
/// `features v1 <n> <dim>`, then one `<label>\t<index>:<value> ...` row per
/// example listing nonzero entries with 17 significant digits.
pub fn save_features<T: Scalar, W: Write>(
    mut out: W,
    rows: &[(FeatureVector<T>, u8)],
    dimension: usize,
) -> Result<()> {
    writeln!(out, "features v1 {} {}", rows.len(), dimension)?;
    for (fv, label) in rows {
        if fv.dimension() != dimension {
            return Err(Error::shape(format!(
                "feature of dimension {} in a {dimension}-wide file",
                fv.dimension()
            )));
        }
        let entries: Vec<String> = fv
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| format!("{i}:{}", sig(v.as_f64(), 17)))
            .collect();
        writeln!(out, "{label}\t{}", entries.join(" "))?;
    }
    Ok(())
}

pub fn load_features<T: Scalar, R: BufRead>(
    input: R,
) -> Result<(Vec<(FeatureVector<T>, u8)>, usize)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty features file"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, dim) = match fields.as_slice() {
        ["features", "v1", n, d] => (
            n.parse::<usize>()
                .map_err(|_| Error::parse("bad row count"))?,
            d.parse::<usize>()
                .map_err(|_| Error::parse("bad dimension"))?,
        ),
        _ => return Err(Error::parse(format!("bad features header {header:?}"))),
    };
    let mut rows = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        let (label, entries) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        let label: u8 = match label {
            "0" => 0,
            "1" => 1,
            _ => return Err(Error::parse(format!("bad label {label:?}"))),
        };
        let mut values = vec![T::zero(); dim];
        for entry in entries.split_whitespace() {
            let (i, v) = entry
                .split_once(':')
                .ok_or_else(|| Error::parse(format!("bad entry {entry:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(format!("bad index {i:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(format!("bad value {v:?}")))?;
            *values
                .get_mut(i)
                .ok_or_else(|| Error::parse(format!("index {i} ≥ dimension {dim}")))? = T::lit(v);
        }
        rows.push((FeatureVector::new(values), label));
    }
    if rows.len() != n {
        return Err(Error::parse(format!(
            "features header says {n} rows, found {}",
            rows.len()
        )));
    }
    Ok((rows, dim))
}
