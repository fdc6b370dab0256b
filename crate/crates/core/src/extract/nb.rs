//! Gaussian Naive Bayes over TF-IDF features, built from scratch so the
//! training and scoring pipeline is fully specified and reproducible.
//!
//! Feature pipeline: whitespace tokens of cleaned text, smoothed IDF
//! `ln((1+N)/(1+df)) + 1`, per-row `tf * idf` vectors L2-normalized.
//! Scoring sums Gaussian log-likelihoods over the tokens present in the
//! row, so a row of only out-of-vocabulary tokens falls back to the priors.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ExtractError, Label, LabeledRow, RowLabeler};
use crate::ingest::clean_text;
use crate::real::Real;

pub const MODEL_VERSION: &str = "nb-v1";

/// Trained classifier state. The vocabulary is sorted, so term lookup is a
/// binary search and serialization is canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel<R: Real = f64> {
    /// Classes present in the training corpus, in label enum order.
    pub classes: Vec<Label>,
    pub vocabulary: Vec<String>,
    pub idf: Vec<R>,
    /// Empirical class priors, summing to one.
    pub priors: Vec<R>,
    /// Per-class per-term mean of the TF-IDF weight.
    pub means: Vec<Vec<R>>,
    /// Per-class per-term variance, floored (see [`train_nb`]).
    pub variances: Vec<Vec<R>>,
}

/// TF-IDF vector of one row as sparse (term index, weight) pairs.
fn vectorize<R: Real>(vocabulary: &[String], idf: &[R], text: &str) -> Vec<(usize, R)> {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for token in text.split_whitespace() {
        if let Ok(i) = vocabulary.binary_search_by(|t| t.as_str().cmp(token)) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let mut vec: Vec<(usize, R)> = counts
        .into_iter()
        .map(|(i, c)| (i, R::from_count(c) * idf[i]))
        .collect();
    let norm = vec
        .iter()
        .map(|(_, w)| *w * *w)
        .sum::<R>()
        .sqrt();
    if norm > R::zero() {
        for (_, w) in &mut vec {
            *w = *w / norm;
        }
    }
    vec
}

/// Trains the classifier. Needs at least two classes in the corpus; for
/// stable variances each class should bring a healthy number of rows, but
/// small separable corpora train fine.
///
/// The variance floor is `1e-9 * max feature variance` (with a tiny absolute
/// fallback when the whole matrix is constant) and is added to every
/// variance, which keeps separable corpora from producing singular
/// likelihoods.
pub fn train_nb<R: Real>(corpus: &[LabeledRow]) -> Result<NbModel<R>, ExtractError> {
    if corpus.is_empty() {
        return Err(ExtractError::InsufficientCorpus("empty corpus".into()));
    }
    let classes: Vec<Label> = Label::ALL
        .into_iter()
        .filter(|l| corpus.iter().any(|r| r.label == *l))
        .collect();
    if classes.len() < 2 {
        return Err(ExtractError::InsufficientCorpus(format!(
            "{} class(es) present, need at least 2",
            classes.len()
        )));
    }

    let texts: Vec<String> = corpus.iter().map(|r| clean_text(&r.text)).collect();

    // Sorted vocabulary and document frequencies.
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for text in &texts {
        let mut seen: Vec<&str> = text.split_whitespace().collect();
        seen.sort_unstable();
        seen.dedup();
        for token in seen {
            *df.entry(token.to_owned()).or_insert(0) += 1;
        }
    }
    let vocabulary: Vec<String> = df.keys().cloned().collect();
    let n_docs = corpus.len() as u64;
    let idf: Vec<R> = vocabulary
        .iter()
        .map(|t| {
            let d = df[t];
            (R::from_count(1 + n_docs) / R::from_count(1 + d)).ln() + R::one()
        })
        .collect();

    let rows: Vec<Vec<(usize, R)>> = texts
        .iter()
        .map(|t| vectorize(&vocabulary, &idf, t))
        .collect();

    let n_terms = vocabulary.len();
    let n_classes = classes.len();
    let mut priors = vec![R::zero(); n_classes];
    let mut means = vec![vec![R::zero(); n_terms]; n_classes];
    let mut variances = vec![vec![R::zero(); n_terms]; n_classes];
    let mut class_counts = vec![0u64; n_classes];

    for (row, labeled) in rows.iter().zip(corpus) {
        let c = classes.iter().position(|l| *l == labeled.label).unwrap();
        class_counts[c] += 1;
        for (i, w) in row {
            means[c][*i] = means[c][*i] + *w;
        }
    }
    for c in 0..n_classes {
        let nc = R::from_count(class_counts[c]);
        priors[c] = nc / R::from_count(n_docs);
        for m in &mut means[c] {
            *m = *m / nc;
        }
    }
    for (row, labeled) in rows.iter().zip(corpus) {
        let c = classes.iter().position(|l| *l == labeled.label).unwrap();
        // Population variance; sparse rows contribute (0 - mean)^2 for
        // absent terms, handled below via the sum of squares identity.
        for (i, w) in row {
            let d = *w - means[c][*i];
            variances[c][*i] = variances[c][*i] + d * d - means[c][*i] * means[c][*i];
        }
    }
    // var = E[x^2] - mean^2; absent entries contribute x = 0. The loop above
    // added (x - mean)^2 - mean^2 for present entries, so adding mean^2 per
    // row (present or not) completes the identity.
    for c in 0..n_classes {
        let nc = R::from_count(class_counts[c]);
        for i in 0..n_terms {
            variances[c][i] = variances[c][i] / nc + means[c][i] * means[c][i];
            if variances[c][i] < R::zero() {
                variances[c][i] = R::zero(); // numeric dust
            }
        }
    }

    // Variance floor relative to the largest feature variance of the whole
    // training matrix.
    let max_var = variances
        .iter()
        .flatten()
        .copied()
        .fold(R::zero(), |a, b| if b > a { b } else { a });
    let mut floor = R::from_f64_lit(1e-9) * max_var;
    if floor <= R::zero() {
        floor = R::from_f64_lit(1e-12);
    }
    for class_vars in &mut variances {
        for v in class_vars {
            *v = *v + floor;
        }
    }

    Ok(NbModel {
        classes,
        vocabulary,
        idf,
        priors,
        means,
        variances,
    })
}

/// Classifies one row: argmax of the Gaussian log-posterior over the row's
/// in-vocabulary tokens, with posteriors normalized to sum to one. Ties are
/// broken by class enum order.
pub fn classify<R: Real>(model: &NbModel<R>, row: &str) -> (Label, Vec<(Label, R)>) {
    let text = clean_text(row);
    let vec = vectorize(&model.vocabulary, &model.idf, &text);

    let two = R::from_f64_lit(2.0);
    let two_pi = R::from_f64_lit(2.0 * std::f64::consts::PI);
    let mut scores: Vec<R> = Vec::with_capacity(model.classes.len());
    for c in 0..model.classes.len() {
        let mut score = model.priors[c].ln();
        for (i, w) in &vec {
            let mean = model.means[c][*i];
            let var = model.variances[c][*i];
            let d = *w - mean;
            score = score - (two_pi * var).ln() / two - d * d / (two * var);
        }
        scores.push(score);
    }

    // Softmax via logsumexp.
    let max = scores
        .iter()
        .copied()
        .fold(R::neg_infinity(), |a, b| if b > a { b } else { a });
    let denom: R = scores.iter().map(|s| (*s - max).exp()).sum();
    let posteriors: Vec<(Label, R)> = model
        .classes
        .iter()
        .zip(&scores)
        .map(|(l, s)| (*l, (*s - max).exp() / denom))
        .collect();

    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    (model.classes[best], posteriors)
}

/// A trained model as a row labeler.
pub struct NbLabeler<R: Real = f64> {
    pub model: NbModel<R>,
}

impl<R: Real> RowLabeler for NbLabeler<R> {
    fn label_row(&self, text: &str) -> Label {
        classify(&self.model, text).0
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile<R: Real> {
    version: String,
    #[serde(flatten)]
    model: NbModel<R>,
}

/// Serializes a model as a versioned JSON document.
pub fn model_to_json<R: Real + Serialize>(model: &NbModel<R>) -> String {
    serde_json::to_string_pretty(&ModelFile {
        version: MODEL_VERSION.to_owned(),
        model: model.clone(),
    })
    .expect("model serializes")
}

/// Reads a versioned model document back.
pub fn model_from_json<R: Real + DeserializeOwned>(json: &str) -> Result<NbModel<R>, String> {
    let file: ModelFile<R> =
        serde_json::from_str(json).map_err(|e| format!("bad model json: {e}"))?;
    if file.version != MODEL_VERSION {
        return Err(format!(
            "unsupported model version '{}', expected '{MODEL_VERSION}'",
            file.version
        ));
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(text: &str, label: Label) -> LabeledRow {
        LabeledRow {
            text: text.into(),
            label,
            station: 1,
            ecu_name: None,
        }
    }

    fn toy_corpus() -> Vec<LabeledRow> {
        vec![
            row("gateway verbauen links", Label::EcuAssembly),
            row("steuergeraet montieren hinten", Label::EcuAssembly),
            row("station bestromt ab hier", Label::PoweredStation),
            row("fahrzeug unter spannung setzen", Label::PoweredStation),
        ]
    }

    #[test]
    fn separable_corpus_classifies_training_rows() {
        let model: NbModel = train_nb(&toy_corpus()).unwrap();
        for r in toy_corpus() {
            let (label, posteriors) = classify(&model, &r.text);
            assert_eq!(label, r.label, "row '{}'", r.text);
            let sum: f64 = posteriors.iter().map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn priors_match_the_class_split() {
        let mut corpus = Vec::new();
        for i in 0..250 {
            corpus.push(row(&format!("assembly text {i}"), Label::EcuAssembly));
        }
        for i in 0..250 {
            corpus.push(row(&format!("power text {i}"), Label::PoweredStation));
        }
        for i in 0..500 {
            corpus.push(row(&format!("random other {i}"), Label::Neither));
        }
        let model: NbModel = train_nb(&corpus).unwrap();
        assert_eq!(model.classes, Label::ALL.to_vec());
        assert!((model.priors[0] - 0.25).abs() < 1e-12);
        assert!((model.priors[1] - 0.25).abs() < 1e-12);
        assert!((model.priors[2] - 0.5).abs() < 1e-12);
        let prior_sum: f64 = model.priors.iter().sum();
        assert!((prior_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_class_corpus_is_rejected() {
        let corpus = vec![row("a", Label::Neither), row("b", Label::Neither)];
        assert!(matches!(
            train_nb::<f64>(&corpus),
            Err(ExtractError::InsufficientCorpus(_))
        ));
    }

    #[test]
    fn oov_row_falls_back_to_priors() {
        let mut corpus = toy_corpus();
        corpus.push(row("irgendwas anderes eins", Label::Neither));
        corpus.push(row("irgendwas anderes zwei", Label::Neither));
        corpus.push(row("irgendwas anderes drei", Label::Neither));
        let model: NbModel = train_nb(&corpus).unwrap();
        let (label, posteriors) = classify(&model, "zzz qqq www");
        // All likelihood terms are equal (empty sum), so the posterior equals
        // the prior and the largest class wins.
        assert_eq!(label, Label::Neither);
        for (i, (_, p)) in posteriors.iter().enumerate() {
            assert!((*p - model.priors[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn posterior_matches_independent_bayes_computation() {
        // Two classes, two terms. The oracle below recomputes the posterior
        // from the definitions, sharing no code with the implementation.
        let corpus = vec![
            row("alpha", Label::EcuAssembly),
            row("alpha alpha beta", Label::EcuAssembly),
            row("beta", Label::Neither),
            row("beta beta", Label::Neither),
        ];
        let model: NbModel = train_nb(&corpus).unwrap();
        let query = "alpha beta";
        let (_, posteriors) = classify(&model, query);

        // Oracle: by-hand TF-IDF and Gaussian posterior.
        let n = 4.0f64;
        let df_alpha = 2.0;
        let df_beta = 3.0;
        let idf_alpha = ((1.0 + n) / (1.0 + df_alpha)).ln() + 1.0;
        let idf_beta = ((1.0 + n) / (1.0 + df_beta)).ln() + 1.0;
        let l2 = |a: f64, b: f64| (a * a + b * b).sqrt();
        // Training vectors (alpha, beta):
        let r1 = (idf_alpha, 0.0f64);
        let r1 = (r1.0 / l2(r1.0, r1.1), 0.0f64);
        let r2 = (2.0 * idf_alpha, idf_beta);
        let n2 = l2(r2.0, r2.1);
        let r2 = (r2.0 / n2, r2.1 / n2);
        let r3 = (0.0f64, 1.0f64); // beta only, normalized
        let r4 = (0.0f64, 1.0f64); // 2*idf_beta normalized
        // Class EcuAssembly stats over r1, r2; class Neither over r3, r4.
        let mean_a = ((r1.0 + r2.0) / 2.0, (r1.1 + r2.1) / 2.0);
        let var_a = (
            ((r1.0 - mean_a.0).powi(2) + (r2.0 - mean_a.0).powi(2)) / 2.0,
            ((r1.1 - mean_a.1).powi(2) + (r2.1 - mean_a.1).powi(2)) / 2.0,
        );
        let mean_n = ((r3.0 + r4.0) / 2.0, (r3.1 + r4.1) / 2.0);
        let var_n = (
            ((r3.0 - mean_n.0).powi(2) + (r4.0 - mean_n.0).powi(2)) / 2.0,
            ((r3.1 - mean_n.1).powi(2) + (r4.1 - mean_n.1).powi(2)) / 2.0,
        );
        let max_var = var_a.0.max(var_a.1).max(var_n.0).max(var_n.1);
        let floor = 1e-9 * max_var;
        let var_a = (var_a.0 + floor, var_a.1 + floor);
        let var_n = (var_n.0 + floor, var_n.1 + floor);
        // Query vector: one alpha, one beta.
        let q = (idf_alpha, idf_beta);
        let qn = l2(q.0, q.1);
        let q = (q.0 / qn, q.1 / qn);
        let log_gauss = |x: f64, m: f64, v: f64| {
            -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v)
        };
        let score_a =
            (0.5f64).ln() + log_gauss(q.0, mean_a.0, var_a.0) + log_gauss(q.1, mean_a.1, var_a.1);
        let score_n =
            (0.5f64).ln() + log_gauss(q.0, mean_n.0, var_n.0) + log_gauss(q.1, mean_n.1, var_n.1);
        let max = score_a.max(score_n);
        let denom = (score_a - max).exp() + (score_n - max).exp();
        let expected_a = (score_a - max).exp() / denom;
        let expected_n = (score_n - max).exp() / denom;

        let got_a = posteriors
            .iter()
            .find(|(l, _)| *l == Label::EcuAssembly)
            .unwrap()
            .1;
        let got_n = posteriors
            .iter()
            .find(|(l, _)| *l == Label::Neither)
            .unwrap()
            .1;
        assert!((got_a - expected_a).abs() < 1e-9, "{got_a} vs {expected_a}");
        assert!((got_n - expected_n).abs() < 1e-9, "{got_n} vs {expected_n}");
    }

    #[test]
    fn posteriors_are_equivariant_under_relabeling() {
        let corpus = toy_corpus();
        let swapped: Vec<LabeledRow> = corpus
            .iter()
            .map(|r| LabeledRow {
                label: match r.label {
                    Label::EcuAssembly => Label::PoweredStation,
                    Label::PoweredStation => Label::EcuAssembly,
                    Label::Neither => Label::Neither,
                },
                ..r.clone()
            })
            .collect();
        let m1: NbModel = train_nb(&corpus).unwrap();
        let m2: NbModel = train_nb(&swapped).unwrap();
        for query in ["gateway verbauen", "station bestromt", "voellig neu"] {
            let (_, p1) = classify(&m1, query);
            let (_, p2) = classify(&m2, query);
            let get = |ps: &[(Label, f64)], l: Label| {
                ps.iter().find(|(x, _)| *x == l).unwrap().1
            };
            assert!(
                (get(&p1, Label::EcuAssembly) - get(&p2, Label::PoweredStation)).abs() < 1e-9
            );
            assert!(
                (get(&p1, Label::PoweredStation) - get(&p2, Label::EcuAssembly)).abs() < 1e-9
            );
        }
    }

    #[test]
    fn model_json_round_trips() {
        let model: NbModel = train_nb(&toy_corpus()).unwrap();
        let json = model_to_json(&model);
        assert!(json.contains("nb-v1"));
        let back: NbModel = model_from_json(&json).unwrap();
        assert_eq!(model, back);

        let bad = json.replace("nb-v1", "nb-v0");
        assert!(model_from_json::<f64>(&bad).is_err());
    }

    #[test]
    fn variances_respect_the_floor() {
        let model: NbModel = train_nb(&toy_corpus()).unwrap();
        let max_var = model
            .variances
            .iter()
            .flatten()
            .copied()
            .fold(0.0f64, f64::max);
        let floor = 1e-9 * max_var;
        assert!(model
            .variances
            .iter()
            .flatten()
            .all(|v| *v >= floor * 0.999));
    }
}
