//! Capped vocabulary and TF-IDF weighting.
//!
//! `tf(w, doc) = count(w, doc) / (in-vocabulary tokens in doc)`,
//! `idf(w) = ln(|corpus| / df(w))`, and the feature weight is their product.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::scalar::Scalar;

/// Default vocabulary cap; with a 64-wide graph embedding the concatenated
/// feature is 2000 wide.
pub const DEFAULT_MAX_TERMS: usize = 1936;

/// Dense real feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(dimension: usize) -> Self {
        Self {
            values: vec![T::zero(); dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    document_frequency: Vec<usize>,
    corpus_size: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    fn from_parts(terms: Vec<String>, document_frequency: Vec<usize>, corpus_size: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms,
            index,
            document_frequency,
            corpus_size,
        }
    }
}

/// Keeps the `max_terms` terms with the highest document frequency
/// (ties broken lexicographically) and indexes them in that rank order.
pub fn build_vocabulary(corpus: &[Vec<String>], max_terms: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::domain("vocabulary needs a nonempty corpus"));
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for term in distinct {
            *df.entry(term).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::domain("corpus contains no tokens"));
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_terms);
    let (terms, dfs) = ranked.into_iter().map(|(t, d)| (t.to_owned(), d)).unzip();
    Ok(Vocabulary::from_parts(terms, dfs, corpus.len()))
}

/// Relative frequency of each vocabulary term among the document's
/// in-vocabulary tokens. All zeros when there are none.
pub fn term_frequency<T: Scalar>(doc: &[String], vocab: &Vocabulary) -> Vec<T> {
    let mut counts = vec![0usize; vocab.len()];
    let mut total = 0usize;
    for token in doc {
        if let Some(i) = vocab.index_of(token) {
            counts[i] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return vec![T::zero(); vocab.len()];
    }
    let total = T::lit(total as f64);
    counts
        .into_iter()
        .map(|c| T::lit(c as f64) / total)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel<T> {
    pub vocabulary: Vocabulary,
    pub idf: Vec<T>,
}

/// `idf[i] = ln(|corpus| / df_i)`, with document frequencies recounted from
/// `corpus`.
pub fn fit_idf<T: Scalar>(corpus: &[Vec<String>], vocab: Vocabulary) -> Result<TfidfModel<T>> {
    let mut df = vec![0usize; vocab.len()];
    for doc in corpus {
        let distinct: HashSet<usize> = doc.iter().filter_map(|t| vocab.index_of(t)).collect();
        for i in distinct {
            df[i] += 1;
        }
    }
    let n = T::lit(corpus.len() as f64);
    let idf = df
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d == 0 {
                Err(Error::Internal(format!(
                    "term {:?} never occurs in the corpus",
                    vocab.term(i)
                )))
            } else {
                Ok((n / T::lit(d as f64)).ln())
            }
        })
        .collect::<Result<Vec<T>>>()?;
    let vocabulary = Vocabulary::from_parts(vocab.terms, df, corpus.len());
    Ok(TfidfModel { vocabulary, idf })
}

impl<T: Scalar> TfidfModel<T> {
    /// Tokenized corpus → capped vocabulary → idf in one call.
    pub fn fit(corpus: &[Vec<String>], max_terms: usize) -> Result<Self> {
        fit_idf(corpus, build_vocabulary(corpus, max_terms)?)
    }

    pub fn dimension(&self) -> usize {
        self.idf.len()
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let v = &self.vocabulary;
        writeln!(out, "tfidf v1 {} {}", v.len(), v.corpus_size())?;
        for (i, idf) in self.idf.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                v.term(i),
                i,
                v.document_frequency(i),
                sig(idf.as_f64(), 17)
            )?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("empty tfidf file"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (size, corpus_size) = match fields.as_slice() {
            ["tfidf", "v1", v, q] => (parse_usize(v)?, parse_usize(q)?),
            _ => return Err(Error::parse(format!("bad tfidf header {header:?}"))),
        };
        let mut terms = Vec::with_capacity(size);
        let mut dfs = Vec::with_capacity(size);
        let mut idf = Vec::with_capacity(size);
        for (expected, line) in lines.enumerate() {
            let line = line?;
            let cols: Vec<&str> = line.split('\t').collect();
            let [term, index, df, value] = cols.as_slice() else {
                return Err(Error::parse(format!("bad tfidf row {line:?}")));
            };
            if parse_usize(index)? != expected {
                return Err(Error::parse(format!(
                    "tfidf row {expected} has index {index}"
                )));
            }
            terms.push((*term).to_owned());
            dfs.push(parse_usize(df)?);
            let value: f64 = value
                .parse()
                .map_err(|_| Error::parse(format!("bad idf {value:?}")))?;
            idf.push(T::lit(value));
        }
        if terms.len() != size {
            return Err(Error::parse(format!(
                "tfidf header says {size} terms, found {}",
                terms.len()
            )));
        }
        Ok(Self {
            vocabulary: Vocabulary::from_parts(terms, dfs, corpus_size),
            idf,
        })
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(format!("expected an integer, got {s:?}")))
}

/// Elementwise `tf × idf`.
pub fn tfidf_vector<T: Scalar>(doc: &[String], model: &TfidfModel<T>) -> FeatureVector<T> {
    let tf = term_frequency::<T>(doc, &model.vocabulary);
    FeatureVector::new(
        tf.into_iter()
            .zip(&model.idf)
            .map(|(t, &i)| t * i)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|d| d.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("a b"), ["a", "b"]);
        assert_eq!(tokenize("don't stop"), ["don", "t", "stop"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("  Hello,WORLD!! 42"), ["hello", "world", "42"]);
    }

    #[test]
    fn vocabulary_ranks_by_document_frequency() {
        let corpus = docs(&[&["a", "b"], &["a"]]);
        let v = build_vocabulary(&corpus, 10).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.index_of("a"), Some(0));
        assert_eq!(v.document_frequency(0), 2);
        assert_eq!(v.document_frequency(v.index_of("b").unwrap()), 1);

        let v = build_vocabulary(&corpus, 1).unwrap();
        assert_eq!(v.terms(), ["a"]);

        let v = build_vocabulary(&docs(&[&["a"]]), 10).unwrap();
        assert_eq!(
            (v.len(), v.document_frequency(0), v.corpus_size()),
            (1, 1, 1)
        );
    }

    #[test]
    fn vocabulary_ties_are_lexicographic() {
        let v = build_vocabulary(&docs(&[&["c", "b", "a", "b"]]), 10).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
    }

    #[test]
    fn vocabulary_errors() {
        assert!(build_vocabulary(&[], 10).is_err());
        assert!(build_vocabulary(&docs(&[&[], &[]]), 10).is_err());
    }

    #[test]
    fn term_frequency_examples() {
        let v = build_vocabulary(&docs(&[&["a", "b"]]), 10).unwrap();
        let tf = term_frequency::<f64>(&docs(&[&["a", "a", "b"]])[0], &v);
        assert_eq!(tf, [2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(term_frequency::<f64>(&[], &v), [0.0, 0.0]);
        let v = build_vocabulary(&docs(&[&["a"]]), 10).unwrap();
        assert_eq!(term_frequency::<f64>(&docs(&[&["a"]])[0], &v), [1.0]);
    }

    #[test]
    fn out_of_vocabulary_tokens_leave_the_denominator() {
        let v = build_vocabulary(&docs(&[&["a"]]), 10).unwrap();
        assert_eq!(
            term_frequency::<f64>(&docs(&[&["a", "zzz", "q"]])[0], &v),
            [1.0]
        );
    }

    #[test]
    fn idf_examples() {
        let corpus = docs(&[&["a", "b"], &["a"]]);
        let m = TfidfModel::<f64>::fit(&corpus, 10).unwrap();
        assert_eq!(m.idf[0], 0.0);
        assert!((m.idf[1] - 2f64.ln()).abs() < 1e-15);

        let corpus = docs(&[&["a", "x"], &["a"], &["y"], &["z"]]);
        let m = TfidfModel::<f64>::fit(&corpus, 10).unwrap();
        let a = m.vocabulary.index_of("a").unwrap();
        assert!((m.idf[a] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn fit_idf_rejects_foreign_vocabulary() {
        let vocab = build_vocabulary(&docs(&[&["a"]]), 10).unwrap();
        let err = fit_idf::<f64>(&docs(&[&["b"]]), vocab).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }

    #[test]
    fn tfidf_examples() {
        let corpus = docs(&[&["a", "b"], &["a", "c"]]);
        let m = TfidfModel::<f64>::fit(&corpus, 10).unwrap();
        let v = tfidf_vector(&corpus[0], &m);
        let a = m.vocabulary.index_of("a").unwrap();
        let b = m.vocabulary.index_of("b").unwrap();
        let c = m.vocabulary.index_of("c").unwrap();
        assert_eq!(v.values[a], 0.0);
        assert!((v.values[b] - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((v.values[b] - 0.34657359).abs() < 1e-8);
        assert_eq!(v.values[c], 0.0);

        assert!(tfidf_vector(&[], &m).values.iter().all(|&x| x == 0.0));
        let oov = docs(&[&["q", "r"]]);
        assert!(tfidf_vector(&oov[0], &m).values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn save_load_round_trip() {
        let corpus = docs(&[&["a", "b"], &["a", "c"], &["d"]]);
        let m = TfidfModel::<f64>::fit(&corpus, 10).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tfidf v1 4 3\na\t0\t2\t"));
        assert_eq!(TfidfModel::<f64>::load(&buf[..]).unwrap(), m);
    }

    #[test]
    fn works_in_single_precision() {
        let corpus = docs(&[&["a", "b"], &["a", "c"]]);
        let m = TfidfModel::<f32>::fit(&corpus, 10).unwrap();
        let v = tfidf_vector(&corpus[0], &m);
        assert!((v.values[1] - 0.5 * 2f32.ln()).abs() < 1e-6);
    }
}
