//! Recovery of ECU assembly stations and powered stations from the free-text
//! assembly precedence graph, via fuzzy matching, exact word matching, or the
//! Gaussian Naive Bayes classifier in [`nb`], plus the evaluation harness.

pub mod nb;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::AssemblyRow;
use crate::real::Real;

/// Manual label of one assembly-graph row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    EcuAssembly,
    PoweredStation,
    Neither,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::EcuAssembly, Label::PoweredStation, Label::Neither];

    pub fn name(self) -> &'static str {
        match self {
            Label::EcuAssembly => "ecu_assembly",
            Label::PoweredStation => "powered_station",
            Label::Neither => "neither",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ecu_assembly" => Ok(Label::EcuAssembly),
            "powered_station" => Ok(Label::PoweredStation),
            "neither" => Ok(Label::Neither),
            other => Err(format!("unknown label '{other}'")),
        }
    }
}

/// One labeled corpus row; `ecu_name` is present exactly for assembly rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub text: String,
    pub label: Label,
    pub station: u32,
    pub ecu_name: Option<String>,
}

/// Labeled corpus for extractor training and evaluation.
pub type LabeledCorpus = Vec<LabeledRow>;

/// Outcome of running an extractor over the assembly precedence graph.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionResult {
    /// First (lowest station) assembly hit per ECU name.
    pub ecu_stations: BTreeMap<String, u32>,
    pub powered_stations: BTreeSet<u32>,
    /// Per-row label decisions in line order.
    pub per_row_decisions: Vec<(u32, Label)>,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("empty ECU name list")]
    EmptyEcuList,
    #[error("insufficient corpus: {0}")]
    InsufficientCorpus(String),
}

/// Keyword lists used by the word-matching extractors. The defaults cover
/// install/contact wording in English and German plus power wording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordConfig {
    pub install: Vec<String>,
    pub power: Vec<String>,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        KeywordConfig {
            install: v(&[
                "install",
                "installed",
                "verbauen",
                "montieren",
                "kontaktieren",
                "contact",
                "contacted",
            ]),
            power: v(&["power", "powered", "bestromt", "bestromung", "strom"]),
        }
    }
}

/// Unit-cost edit distance (insert, delete, substitute) over characters.
pub fn levenshtein_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // Single-row DP over b.
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            let next = (row[j + 1] + 1).min(row[j] + 1).min(diag + cost);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Normalized similarity in integer percent:
/// `round(100 * (1 - distance / max(|a|, |b|)))`, 100 for two empty strings.
pub fn similarity(a: &str, b: &str) -> u8 {
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        return 100;
    }
    let d = levenshtein_distance(a, b) as f64;
    (100.0 * (1.0 - d / len as f64)).round() as u8
}

/// Token windows of `text` with the same token count as `pattern`, scored
/// against it; true when any window reaches the threshold.
fn window_match(text_tokens: &[&str], pattern: &str, threshold: u8) -> bool {
    let size = pattern.split_whitespace().count().max(1);
    if text_tokens.len() < size {
        return false;
    }
    text_tokens.windows(size).any(|w| {
        let window = w.join(" ");
        similarity(&window, pattern) >= threshold
    })
}

fn row_text(row: &AssemblyRow) -> String {
    if row.long_text.is_empty() {
        row.short_text.clone()
    } else if row.short_text.is_empty() {
        row.long_text.clone()
    } else {
        format!("{} {}", row.short_text, row.long_text)
    }
}

fn fuzzy_row_label(
    text: &str,
    ecu_names: &[String],
    keywords: &KeywordConfig,
    threshold: u8,
) -> (Label, Option<String>) {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let keyword_hit = keywords
        .install
        .iter()
        .any(|k| window_match(&tokens, k, threshold));
    if keyword_hit {
        if let Some(name) = ecu_names
            .iter()
            .find(|n| window_match(&tokens, n, threshold))
        {
            return (Label::EcuAssembly, Some(name.clone()));
        }
    }
    let power_hit = keywords
        .power
        .iter()
        .any(|k| window_match(&tokens, k, threshold));
    if power_hit {
        return (Label::PoweredStation, None);
    }
    (Label::Neither, None)
}

/// Sliding-window fuzzy search: a row is an assembly hit when some token
/// window reaches `threshold` against an ECU name and some window reaches it
/// against an install keyword; powered-station hits use the power keyword
/// list analogously. The first hit per ECU (lowest station index) wins.
pub fn fuzzy_extract(
    rows: &[AssemblyRow],
    ecu_names: &[String],
    keywords: &KeywordConfig,
    threshold: u8,
) -> Result<ExtractionResult, ExtractError> {
    if ecu_names.is_empty() {
        return Err(ExtractError::EmptyEcuList);
    }
    let mut result = ExtractionResult::default();
    for row in rows {
        let text = row_text(row);
        let (label, ecu) = fuzzy_row_label(&text, ecu_names, keywords, threshold);
        result.per_row_decisions.push((row.line_no, label));
        match label {
            Label::EcuAssembly => {
                let name = ecu.expect("assembly label carries the matched name");
                let entry = result.ecu_stations.entry(name).or_insert(row.station);
                if row.station < *entry {
                    *entry = row.station;
                }
            }
            Label::PoweredStation => {
                result.powered_stations.insert(row.station);
            }
            Label::Neither => {}
        }
    }
    Ok(result)
}

fn word_pattern(term: &str) -> regex::Regex {
    let escaped = term
        .split_whitespace()
        .map(regex::escape)
        .collect::<Vec<_>>()
        .join(" ");
    regex::Regex::new(&format!(r"\b{escaped}\b")).expect("escaped term is a valid pattern")
}

/// Exact word-boundary matching on cleaned text: a row is an assembly hit
/// when it contains an ECU name verbatim together with an install keyword;
/// misspellings defeat it by design.
pub fn regex_extract(
    rows: &[AssemblyRow],
    ecu_names: &[String],
    keywords: &KeywordConfig,
) -> ExtractionResult {
    let name_patterns: Vec<(String, regex::Regex)> = ecu_names
        .iter()
        .map(|n| (n.clone(), word_pattern(n)))
        .collect();
    let install: Vec<regex::Regex> = keywords.install.iter().map(|k| word_pattern(k)).collect();
    let power: Vec<regex::Regex> = keywords.power.iter().map(|k| word_pattern(k)).collect();

    let mut result = ExtractionResult::default();
    for row in rows {
        let text = row_text(row);
        let keyword_hit = install.iter().any(|p| p.is_match(&text));
        let name_hit = name_patterns.iter().find(|(_, p)| p.is_match(&text));
        let label = if keyword_hit && name_hit.is_some() {
            Label::EcuAssembly
        } else if power.iter().any(|p| p.is_match(&text)) {
            Label::PoweredStation
        } else {
            Label::Neither
        };
        result.per_row_decisions.push((row.line_no, label));
        match label {
            Label::EcuAssembly => {
                let name = name_hit.map(|(n, _)| n.clone()).unwrap();
                let entry = result.ecu_stations.entry(name).or_insert(row.station);
                if row.station < *entry {
                    *entry = row.station;
                }
            }
            Label::PoweredStation => {
                result.powered_stations.insert(row.station);
            }
            Label::Neither => {}
        }
    }
    result
}

/// Anything that can label one cleaned text row; the evaluation harness and
/// the pipeline accept any implementation, so further classifiers can be
/// plugged in externally.
pub trait RowLabeler {
    fn label_row(&self, text: &str) -> Label;
}

/// Fuzzy word matching as a row labeler.
pub struct FuzzyLabeler {
    pub ecu_names: Vec<String>,
    pub keywords: KeywordConfig,
    pub threshold: u8,
}

impl RowLabeler for FuzzyLabeler {
    fn label_row(&self, text: &str) -> Label {
        fuzzy_row_label(text, &self.ecu_names, &self.keywords, self.threshold).0
    }
}

/// Exact word matching as a row labeler.
pub struct RegexLabeler {
    name_patterns: Vec<regex::Regex>,
    install: Vec<regex::Regex>,
    power: Vec<regex::Regex>,
}

impl RegexLabeler {
    pub fn new(ecu_names: &[String], keywords: &KeywordConfig) -> Self {
        RegexLabeler {
            name_patterns: ecu_names.iter().map(|n| word_pattern(n)).collect(),
            install: keywords.install.iter().map(|k| word_pattern(k)).collect(),
            power: keywords.power.iter().map(|k| word_pattern(k)).collect(),
        }
    }
}

impl RowLabeler for RegexLabeler {
    fn label_row(&self, text: &str) -> Label {
        if self.install.iter().any(|p| p.is_match(text))
            && self.name_patterns.iter().any(|p| p.is_match(text))
        {
            Label::EcuAssembly
        } else if self.power.iter().any(|p| p.is_match(text)) {
            Label::PoweredStation
        } else {
            Label::Neither
        }
    }
}

/// Always answers `Neither`; useful as an evaluation baseline.
pub struct ConstantNeither;

impl RowLabeler for ConstantNeither {
    fn label_row(&self, _text: &str) -> Label {
        Label::Neither
    }
}

/// Per-task accuracy of an extractor, mirroring the two detection tasks:
/// recognizing assembly rows and recognizing powered-station rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracy<R: Real = f64> {
    pub ecu_assembly: R,
    pub powered_stations: R,
}

/// Scores a row labeler against a labeled corpus. Each detection task is
/// binary per row: the prediction is correct when it agrees with the gold
/// label on membership in that task's class.
pub fn evaluate_extractor<R: Real>(
    labeler: &dyn RowLabeler,
    corpus: &[LabeledRow],
) -> TaskAccuracy<R> {
    assert!(!corpus.is_empty(), "corpus must be nonempty");
    let mut assembly_correct = 0u64;
    let mut powered_correct = 0u64;
    for row in corpus {
        let predicted = labeler.label_row(&row.text);
        if (predicted == Label::EcuAssembly) == (row.label == Label::EcuAssembly) {
            assembly_correct += 1;
        }
        if (predicted == Label::PoweredStation) == (row.label == Label::PoweredStation) {
            powered_correct += 1;
        }
    }
    let n = R::from_count(corpus.len() as u64);
    TaskAccuracy {
        ecu_assembly: R::from_count(assembly_correct) / n,
        powered_stations: R::from_count(powered_correct) / n,
    }
}

/// Runs a trained classifier over assembly rows; assembly-labeled rows are
/// attributed to the best-matching ECU name (exact containment first, then
/// highest window similarity).
pub fn nb_extract<R: Real>(
    rows: &[AssemblyRow],
    model: &nb::NbModel<R>,
    ecu_names: &[String],
) -> Result<ExtractionResult, ExtractError> {
    if ecu_names.is_empty() {
        return Err(ExtractError::EmptyEcuList);
    }
    let name_patterns: Vec<regex::Regex> = ecu_names.iter().map(|n| word_pattern(n)).collect();
    let mut result = ExtractionResult::default();
    for row in rows {
        let text = row_text(row);
        let (label, _) = nb::classify(model, &text);
        result.per_row_decisions.push((row.line_no, label));
        match label {
            Label::EcuAssembly => {
                let tokens: Vec<&str> = text.split_whitespace().collect();
                let best = ecu_names
                    .iter()
                    .zip(&name_patterns)
                    .filter(|(n, _)| !n.is_empty())
                    .map(|(n, p)| {
                        let score = if p.is_match(&text) {
                            101u8
                        } else {
                            best_window_similarity(&tokens, n)
                        };
                        (score, n)
                    })
                    .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(a.1)));
                if let Some((score, name)) = best {
                    // Require at least a weak resemblance before attributing.
                    if score >= 60 {
                        let entry = result
                            .ecu_stations
                            .entry(name.clone())
                            .or_insert(row.station);
                        if row.station < *entry {
                            *entry = row.station;
                        }
                    }
                }
            }
            Label::PoweredStation => {
                result.powered_stations.insert(row.station);
            }
            Label::Neither => {}
        }
    }
    Ok(result)
}

fn best_window_similarity(text_tokens: &[&str], pattern: &str) -> u8 {
    let size = pattern.split_whitespace().count().max(1);
    if text_tokens.len() < size {
        return 0;
    }
    text_tokens
        .windows(size)
        .map(|w| similarity(&w.join(" "), pattern))
        .max()
        .unwrap_or(0)
}

const CORPUS_HEADERS: &[&str] = &["text", "label", "station", "ecu_name"];

/// Parses `corpus.csv` (headers `text,label,station,ecu_name`).
pub fn corpus_from_csv(content: &[u8]) -> Result<LabeledCorpus, crate::ingest::IngestError> {
    use crate::ingest::IngestError;
    let mut reader = csv::ReaderBuilder::new().from_reader(content);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    if !headers.iter().eq(CORPUS_HEADERS.iter()) {
        return Err(IngestError::Schema(format!(
            "header [{}] does not match [{}]",
            headers.join(","),
            CORPUS_HEADERS.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let get = |j: usize| record.get(j).unwrap_or("").trim().to_owned();
        let label: Label = get(1).parse().map_err(|m| crate::ingest::RowError {
            line_no: (i + 1) as u32,
            message: m,
        })?;
        let station = get(2).parse::<u32>().map_err(|_| crate::ingest::RowError {
            line_no: (i + 1) as u32,
            message: format!("bad station '{}'", get(2)),
        })?;
        let ecu_name = {
            let n = crate::ingest::clean_text(&get(3));
            if n.is_empty() {
                None
            } else {
                Some(n)
            }
        };
        rows.push(LabeledRow {
            text: crate::ingest::clean_text(&get(0)),
            label,
            station,
            ecu_name,
        });
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(rows)
}

/// Serializes a labeled corpus to the `corpus.csv` schema.
pub fn corpus_to_csv(corpus: &[LabeledRow]) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().from_writer(&mut buf);
        w.write_record(CORPUS_HEADERS).unwrap();
        for row in corpus {
            w.write_record([
                row.text.as_str(),
                row.label.name(),
                &row.station.to_string(),
                row.ecu_name.as_deref().unwrap_or(""),
            ])
            .unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(buf).unwrap()
}
