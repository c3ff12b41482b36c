//! Sentence-pair and NLI records: ingestion, triplet reconstruction,
//! seeded splits and JSONL/TSV persistence.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("line {line}: unknown NLI label '{label}'")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("cannot split an empty record set")]
    EmptyInput,
    #[error("unsupported format '{0}' (expected tsv or jsonl)")]
    UnknownFormat(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(Format::Tsv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

impl Format {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") => Format::Tsv,
            _ => Format::Jsonl,
        }
    }
}

/// Gold target of a sentence pair: a class label or a similarity score.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Label(String),
    Score(f64),
}

impl Target {
    pub fn score(&self) -> Option<f64> {
        match self {
            Target::Score(s) => Some(*s),
            Target::Label(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub id: String,
    pub sentence0: String,
    pub sentence1: String,
    pub target: Target,
    pub cs_sentence0: Option<String>,
    pub cs_sentence1: Option<String>,
    pub reviewed: Option<bool>,
}

impl PairRecord {
    pub fn new(id: impl Into<String>, s0: impl Into<String>, s1: impl Into<String>, target: Target) -> Self {
        Self {
            id: id.into(),
            sentence0: s0.into(),
            sentence1: s1.into(),
            target,
            cs_sentence0: None,
            cs_sentence1: None,
            reviewed: None,
        }
    }

    pub fn with_cs(mut self, cs0: impl Into<String>, cs1: impl Into<String>) -> Self {
        self.cs_sentence0 = Some(cs0.into());
        self.cs_sentence1 = Some(cs1.into());
        self
    }

    pub fn has_cs(&self) -> bool {
        self.cs_sentence0.is_some() && self.cs_sentence1.is_some()
    }

    fn validate(&self) -> Result<(), String> {
        if self.cs_sentence0.is_some() != self.cs_sentence1.is_some() {
            return Err("cs_sentence0 and cs_sentence1 must be present together".into());
        }
        if let Target::Score(s) = self.target {
            if !s.is_finite() {
                return Err(format!("non-finite score {s}"));
            }
        }
        Ok(())
    }
}

/// JSONL shape of a [`PairRecord`].
#[derive(Debug, Serialize, Deserialize)]
struct PairJson {
    id: serde_json::Value,
    sentence0: String,
    sentence1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cs_sentence0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cs_sentence1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reviewed: Option<bool>,
}

fn json_scalar_to_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

impl TryFrom<PairJson> for PairRecord {
    type Error = String;

    fn try_from(j: PairJson) -> Result<Self, String> {
        let id = json_scalar_to_string(&j.id).ok_or("id must be a string or number")?;
        let target = match (j.label, j.score) {
            (Some(_), Some(_)) => return Err("both label and score present".into()),
            (Some(l), None) => Target::Label(json_scalar_to_string(&l).ok_or("label must be a scalar")?),
            (None, Some(s)) => Target::Score(s),
            (None, None) => return Err("missing label or score".into()),
        };
        let r = PairRecord {
            id,
            sentence0: j.sentence0,
            sentence1: j.sentence1,
            target,
            cs_sentence0: j.cs_sentence0,
            cs_sentence1: j.cs_sentence1,
            reviewed: j.reviewed,
        };
        r.validate()?;
        Ok(r)
    }
}

impl From<&PairRecord> for PairJson {
    fn from(r: &PairRecord) -> Self {
        let (label, score) = match &r.target {
            Target::Label(l) => (Some(serde_json::Value::String(l.clone())), None),
            Target::Score(s) => (None, Some(*s)),
        };
        PairJson {
            id: serde_json::Value::String(r.id.clone()),
            sentence0: r.sentence0.clone(),
            sentence1: r.sentence1.clone(),
            label,
            score,
            cs_sentence0: r.cs_sentence0.clone(),
            cs_sentence1: r.cs_sentence1.clone(),
            reviewed: r.reviewed,
        }
    }
}

/// Premise with an entailed and a contradicting hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliTriplet {
    pub premise: String,
    pub entailment: String,
    pub contradiction: String,
}

/// An NLI triplet together with its code-switched counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SixTuple {
    pub premise: String,
    pub entailment: String,
    pub contradiction: String,
    pub cs_premise: String,
    pub cs_entailment: String,
    pub cs_contradiction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewed: Option<bool>,
}

impl SixTuple {
    /// The six sentences in `(x, x+, x-, x̂, x̂+, x̂-)` order.
    pub fn sentences(&self) -> [&str; 6] {
        [
            &self.premise,
            &self.entailment,
            &self.contradiction,
            &self.cs_premise,
            &self.cs_entailment,
            &self.cs_contradiction,
        ]
    }

    fn validate(&self) -> Result<(), String> {
        if self.sentences().iter().any(|s| s.trim().is_empty()) {
            return Err("all six sentences must be non-empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl std::str::FromStr for NliLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" => Ok(NliLabel::Entailment),
            "neutral" => Ok(NliLabel::Neutral),
            "contradiction" => Ok(NliLabel::Contradiction),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliRow {
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
}

/// Turns `(premise, hypothesis, label)` rows into `(premise, entailment,
/// contradiction)` triplets.
///
/// Neutral rows are dropped. For each premise, its entailments and
/// contradictions are paired by position in input order; surplus hypotheses
/// and premises lacking either side are dropped. Output follows the order in
/// which premises first appear.
pub fn reconstruct_nli(rows: &[NliRow]) -> Result<Vec<NliTriplet>, CorpusError> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, (Vec<&str>, Vec<&str>)> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        let label: NliLabel = row.label.parse().map_err(|_| CorpusError::UnknownLabel {
            line: i + 1,
            label: row.label.clone(),
        })?;
        let slot = match label {
            NliLabel::Neutral => continue,
            NliLabel::Entailment | NliLabel::Contradiction => {
                groups.entry(&row.premise).or_insert_with(|| {
                    order.push(&row.premise);
                    (Vec::new(), Vec::new())
                })
            }
        };
        match label {
            NliLabel::Entailment => slot.0.push(&row.hypothesis),
            NliLabel::Contradiction => slot.1.push(&row.hypothesis),
            NliLabel::Neutral => unreachable!(),
        }
    }
    let mut out = Vec::new();
    for premise in order {
        let (ent, con) = &groups[premise];
        for (e, c) in ent.iter().zip(con) {
            out.push(NliTriplet {
                premise: premise.to_string(),
                entailment: e.to_string(),
                contradiction: c.to_string(),
            });
        }
    }
    Ok(out)
}

/// A malformed data row that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub errors: Vec<RowError>,
}

struct TsvHeader {
    columns: HashMap<String, usize>,
}

impl TsvHeader {
    fn parse(line: &str) -> Self {
        let columns = line
            .split('\t')
            .enumerate()
            .map(|(i, c)| (c.trim().to_string(), i))
            .collect();
        Self { columns }
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.columns.get(name).copied()
    }

    fn require(&self, name: &str) -> Result<usize, CorpusError> {
        self.index(name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    }
}

fn field<'a>(cells: &[&'a str], idx: usize, name: &str) -> Result<&'a str, String> {
    match cells.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing value for '{name}'")),
    }
}

fn opt_field(cells: &[&str], idx: Option<usize>) -> Option<String> {
    idx.and_then(|i| cells.get(i))
        .filter(|v| !v.is_empty())
        .map(|v| v.to_string())
}

fn parse_pairs_tsv(text: &str) -> Result<Loaded<PairRecord>, CorpusError> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(CorpusError::MissingColumn("sentence0".into()));
    };
    let h = TsvHeader::parse(header);
    let s0 = h.require("sentence0")?;
    let s1 = h.require("sentence1")?;
    let label = h.index("label");
    let score = h.index("score");
    if label.is_none() && score.is_none() {
        return Err(CorpusError::MissingColumn("label|score".into()));
    }
    let id = h.index("id");
    let cs0 = h.index("cs_sentence0");
    let cs1 = h.index("cs_sentence1");
    let reviewed = h.index("reviewed");

    let mut out = Loaded {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        let row = (|| -> Result<PairRecord, String> {
            let target = match (score, label) {
                (Some(si), _) if cells.get(si).is_some_and(|v| !v.is_empty()) => {
                    let raw = cells[si].trim();
                    Target::Score(raw.parse().map_err(|_| format!("unparsable score '{raw}'"))?)
                }
                (_, Some(li)) => Target::Label(field(&cells, li, "label")?.to_string()),
                _ => return Err("missing value for 'score'".into()),
            };
            let reviewed = match opt_field(&cells, reviewed) {
                None => None,
                Some(v) => Some(v.parse().map_err(|_| format!("unparsable reviewed flag '{v}'"))?),
            };
            let r = PairRecord {
                id: opt_field(&cells, id).unwrap_or_else(|| (line_no - 1).to_string()),
                sentence0: field(&cells, s0, "sentence0")?.to_string(),
                sentence1: field(&cells, s1, "sentence1")?.to_string(),
                target,
                cs_sentence0: opt_field(&cells, cs0),
                cs_sentence1: opt_field(&cells, cs1),
                reviewed,
            };
            r.validate()?;
            Ok(r)
        })();
        match row {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(RowError { line: line_no, message }),
        }
    }
    Ok(out)
}

fn parse_jsonl<J, T>(text: &str, convert: impl Fn(J) -> Result<T, String>) -> Loaded<T>
where
    J: DeserializeOwned,
{
    let mut out = Loaded {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<J>(line)
            .map_err(|e| e.to_string())
            .and_then(&convert);
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(RowError { line: i + 1, message }),
        }
    }
    out
}

fn read_text(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn parse_pairs(text: &str, format: Format) -> Result<Loaded<PairRecord>, CorpusError> {
    match format {
        Format::Tsv => parse_pairs_tsv(text),
        Format::Jsonl => Ok(parse_jsonl::<PairJson, _>(text, PairRecord::try_from)),
    }
}

/// Reads sentence-pair records. Malformed rows are collected with their line
/// numbers instead of aborting the load.
pub fn read_pairs(path: &Path, format: Format) -> Result<Loaded<PairRecord>, CorpusError> {
    parse_pairs(&read_text(path)?, format)
}

pub fn read_six_tuples(path: &Path) -> Result<Loaded<SixTuple>, CorpusError> {
    let text = read_text(path)?;
    Ok(parse_jsonl::<SixTuple, _>(&text, |t| t.validate().map(|_| t)))
}

pub fn read_triplets(path: &Path) -> Result<Loaded<NliTriplet>, CorpusError> {
    let text = read_text(path)?;
    Ok(parse_jsonl::<NliTriplet, _>(&text, Ok))
}

/// Reads `(premise, hypothesis, label)` rows from TSV (header with those
/// column names) or JSONL.
pub fn read_nli_rows(path: &Path, format: Format) -> Result<Loaded<NliRow>, CorpusError> {
    let text = read_text(path)?;
    match format {
        Format::Jsonl => Ok(parse_jsonl::<NliRow, _>(&text, Ok)),
        Format::Tsv => {
            let mut lines = text.lines().enumerate();
            let Some((_, header)) = lines.next() else {
                return Err(CorpusError::MissingColumn("premise".into()));
            };
            let h = TsvHeader::parse(header);
            let (p, hy, l) = (h.require("premise")?, h.require("hypothesis")?, h.require("label")?);
            let mut out = Loaded {
                records: Vec::new(),
                errors: Vec::new(),
            };
            for (i, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let cells: Vec<&str> = line.split('\t').collect();
                let row = (|| -> Result<NliRow, String> {
                    Ok(NliRow {
                        premise: field(&cells, p, "premise")?.to_string(),
                        hypothesis: field(&cells, hy, "hypothesis")?.to_string(),
                        label: field(&cells, l, "label")?.to_string(),
                    })
                })();
                match row {
                    Ok(r) => out.records.push(r),
                    Err(message) => out.errors.push(RowError { line: i + 1, message }),
                }
            }
            Ok(out)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

/// Writes one JSON object per line. An empty slice yields an empty file.
pub fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<(), CorpusError> {
    let mut w = create(path)?;
    for r in records {
        let line = serde_json::to_string(r).expect("record serialization is infallible");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn tsv_cell(s: &str) -> Result<&str, CorpusError> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(CorpusError::Row {
            line: 0,
            message: format!("value cannot be written to TSV: {s:?}"),
        });
    }
    Ok(s)
}

pub fn write_pairs(records: &[PairRecord], path: &Path, format: Format) -> Result<(), CorpusError> {
    match format {
        Format::Jsonl => {
            let rows: Vec<PairJson> = records.iter().map(PairJson::from).collect();
            write_jsonl(&rows, path)
        }
        Format::Tsv => {
            let scored = records.iter().any(|r| matches!(r.target, Target::Score(_)));
            let with_cs = records.iter().any(PairRecord::has_cs);
            let mut w = create(path)?;
            let mut header = vec!["id", "sentence0", "sentence1", if scored { "score" } else { "label" }];
            if with_cs {
                header.extend(["cs_sentence0", "cs_sentence1"]);
            }
            writeln!(w, "{}", header.join("\t")).map_err(io_err(path))?;
            for r in records {
                let target = match &r.target {
                    Target::Score(s) => s.to_string(),
                    Target::Label(l) => l.clone(),
                };
                let mut cells = vec![
                    tsv_cell(&r.id)?,
                    tsv_cell(&r.sentence0)?,
                    tsv_cell(&r.sentence1)?,
                    tsv_cell(&target)?,
                ];
                if with_cs {
                    cells.push(tsv_cell(r.cs_sentence0.as_deref().unwrap_or(""))?);
                    cells.push(tsv_cell(r.cs_sentence1.as_deref().unwrap_or(""))?);
                }
                writeln!(w, "{}", cells.join("\t")).map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
    }
}

/// Ratios and seed for a shuffled partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: Vec<f64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: Vec<f64>, seed: u64) -> Result<Self, CorpusError> {
        let spec = Self { ratios, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Train/dev/test at 0.64/0.16/0.20.
    pub fn train_dev_test(seed: u64) -> Self {
        Self {
            ratios: vec![0.64, 0.16, 0.20],
            seed,
        }
    }

    /// Equal dev/test halves.
    pub fn halves(seed: u64) -> Self {
        Self {
            ratios: vec![0.5, 0.5],
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(2..=3).contains(&self.ratios.len()) {
            return Err(CorpusError::InvalidSplit(format!(
                "expected 2 or 3 ratios, got {}",
                self.ratios.len()
            )));
        }
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(CorpusError::InvalidSplit("ratios must be nonnegative".into()));
        }
        let total: f64 = self.ratios.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidSplit(format!("ratios sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Partition sizes for `n` records: `floor(ratio * n)` for every split but
    /// the last, which takes the remainder.
    pub fn sizes(&self, n: usize) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.ratios[..self.ratios.len() - 1]
            .iter()
            // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
            .map(|r| ((r * n as f64) + 1e-9).floor() as usize)
            .collect();
        let used: usize = sizes.iter().sum();
        sizes.push(n.saturating_sub(used));
        sizes
    }
}

/// Shuffles with the spec's seed and slices into contiguous partitions.
pub fn split<T>(mut records: Vec<T>, spec: &SplitSpec) -> Result<Vec<Vec<T>>, CorpusError> {
    spec.validate()?;
    if records.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    records.shuffle(&mut rng);
    let sizes = spec.sizes(records.len());
    let mut parts = Vec::with_capacity(sizes.len());
    let mut rest = records;
    for size in &sizes[..sizes.len() - 1] {
        let tail = rest.split_off(*size);
        parts.push(rest);
        rest = tail;
    }
    parts.push(rest);
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: &str, h: &str, l: &str) -> NliRow {
        NliRow {
            premise: p.into(),
            hypothesis: h.into(),
            label: l.into(),
        }
    }

    #[test]
    fn nli_basic_triplet() {
        let out = reconstruct_nli(&[row("p", "h1", "entailment"), row("p", "h2", "contradiction")]).unwrap();
        assert_eq!(
            out,
            [NliTriplet {
                premise: "p".into(),
                entailment: "h1".into(),
                contradiction: "h2".into()
            }]
        );
    }

    #[test]
    fn nli_neutral_and_unpaired_dropped() {
        assert!(reconstruct_nli(&[row("p", "h1", "neutral")]).unwrap().is_empty());
        assert!(reconstruct_nli(&[row("p", "h1", "entailment")]).unwrap().is_empty());
        assert!(reconstruct_nli(&[row("p", "h1", "contradiction"), row("q", "h2", "entailment")])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn nli_index_pairing() {
        let rows = [
            row("p", "e1", "entailment"),
            row("q", "qe", "entailment"),
            row("p", "c1", "contradiction"),
            row("p", "n", "neutral"),
            row("p", "e2", "entailment"),
            row("p", "e3", "entailment"),
            row("q", "qc", "contradiction"),
            row("p", "c2", "contradiction"),
        ];
        let out = reconstruct_nli(&rows).unwrap();
        let flat: Vec<_> = out
            .iter()
            .map(|t| (t.premise.as_str(), t.entailment.as_str(), t.contradiction.as_str()))
            .collect();
        assert_eq!(flat, [("p", "e1", "c1"), ("p", "e2", "c2"), ("q", "qe", "qc")]);
    }

    #[test]
    fn nli_unknown_label() {
        let err = reconstruct_nli(&[row("p", "h", "entailment"), row("p", "h", "-")]).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownLabel { line: 2, .. }));
    }

    #[test]
    fn tsv_pairs_with_row_errors() {
        let text = "id\tsentence0\tsentence1\tscore\n\
                    a\tA man plays.\tA man is playing.\t4.6\n\
                    b\tOnly one side\t\t1.0\n\
                    c\tx\ty\tnot-a-number\n\
                    d\tp\tq\t0\n";
        let loaded = parse_pairs(text, Format::Tsv).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.records[0].target, Target::Score(4.6));
        assert_eq!(loaded.errors.iter().map(|e| e.line).collect::<Vec<_>>(), [3, 4]);
    }

    #[test]
    fn tsv_missing_column() {
        let err = parse_pairs("id\tsentence0\tscore\n1\ta\t1\n", Format::Tsv).unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn(c) if c == "sentence1"));
    }

    #[test]
    fn jsonl_cs_fields_must_pair() {
        let text = r#"{"id":1,"sentence0":"a","sentence1":"b","label":1,"cs_sentence0":"x"}"#;
        let loaded = parse_pairs(text, Format::Jsonl).unwrap();
        assert!(loaded.records.is_empty());
        assert_eq!(loaded.errors[0].line, 1);
    }

    #[test]
    fn split_sizes() {
        let parts = split((0..100).collect(), &SplitSpec::train_dev_test(3)).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), [64, 16, 20]);
        let parts = split((0..10).collect(), &SplitSpec::halves(3)).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), [5, 5]);
        assert_eq!(SplitSpec::new(vec![0.29, 0.71], 0).unwrap().sizes(100), [29, 71]);
        assert_eq!(SplitSpec::train_dev_test(0).sizes(7), [4, 1, 2]);
    }

    #[test]
    fn split_rejects_bad_specs() {
        assert!(SplitSpec::new(vec![0.5, 0.4], 0).is_err());
        assert!(SplitSpec::new(vec![1.0], 0).is_err());
        assert!(SplitSpec::new(vec![0.25; 4], 0).is_err());
        assert!(SplitSpec::new(vec![1.5, -0.5], 0).is_err());
        assert!(matches!(
            split(Vec::<u8>::new(), &SplitSpec::halves(0)),
            Err(CorpusError::EmptyInput)
        ));
    }

    #[test]
    fn split_is_seeded() {
        let a = split((0..50).collect::<Vec<u32>>(), &SplitSpec::train_dev_test(9)).unwrap();
        let b = split((0..50).collect::<Vec<u32>>(), &SplitSpec::train_dev_test(9)).unwrap();
        let c = split((0..50).collect::<Vec<u32>>(), &SplitSpec::train_dev_test(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
