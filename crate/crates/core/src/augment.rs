//! Code-switching augmentation: replace selected NP spans with
//! target-language phrases and assemble CS pairs and six-sentence NLI records.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{NliTriplet, PairRecord, SixTuple};
use crate::treebank::{self, ParseTree, Rejection, SelectionPolicy, SwitchPlan, TreeError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslationError {
    #[error("no dictionary entry for '{0}'")]
    MissingEntry(String),
    #[error("translation service error: {0}")]
    Remote(String),
}

#[derive(Debug, Error)]
pub enum BackendConfigError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Table {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid http backend config: {0}")]
    Http(String),
}

/// Translates a phrase between languages.
///
/// Implementations must return identical output for identical input within
/// a run.
pub trait TranslationBackend: Send + Sync {
    fn name(&self) -> &str;

    fn translate(&self, phrase: &str, source_lang: &str, target_lang: &str)
        -> Result<String, TranslationError>;
}

/// Offline exact-match phrase table, case-insensitive on the source side.
#[derive(Debug, Clone, Default)]
pub struct DictionaryBackend {
    name: String,
    entries: HashMap<String, String>,
}

impl DictionaryBackend {
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: Into<String>,
    {
        let mut entries = HashMap::new();
        for (s, t) in pairs {
            let key = s.as_ref().to_lowercase();
            if entries.insert(key, t.into()).is_some() {
                return Err(format!("duplicate source phrase '{}'", s.as_ref()));
            }
        }
        Ok(Self {
            name: "dictionary".into(),
            entries,
        })
    }

    /// Parses `source<TAB>target` rows; `#` lines and blank lines are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self, BackendConfigError> {
        let table_err = |line: usize, message: String| BackendConfigError::Table {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((src, tgt)) = line.split_once('\t') else {
                return Err(table_err(i + 1, "expected 'source<TAB>target'".into()));
            };
            let (src, tgt) = (src.trim(), tgt.trim());
            if src.is_empty() || tgt.is_empty() {
                return Err(table_err(i + 1, "empty source or target".into()));
            }
            if entries.insert(src.to_lowercase(), tgt.to_string()).is_some() {
                return Err(table_err(i + 1, format!("duplicate source phrase '{src}'")));
            }
        }
        Ok(Self {
            name: format!("dictionary:{}", path.display()),
            entries,
        })
    }

    pub fn open(path: &Path) -> Result<Self, BackendConfigError> {
        let text = fs::read_to_string(path).map_err(|source| BackendConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TranslationBackend for DictionaryBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, phrase: &str, _: &str, _: &str) -> Result<String, TranslationError> {
        self.entries
            .get(&phrase.to_lowercase())
            .cloned()
            .ok_or_else(|| TranslationError::MissingEntry(phrase.to_string()))
    }
}

/// Request and response layout of a JSON translation endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    /// Header carrying the API key.
    pub key_header: String,
    /// Prefix put before the key, e.g. `Bearer`.
    pub key_scheme: Option<String>,
    pub text_field: String,
    pub source_field: String,
    pub target_field: String,
    /// Dotted path to the translated text in the response, e.g.
    /// `data.translations.0.translatedText`.
    pub response_field: String,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            key_header: "Authorization".into(),
            key_scheme: Some("Bearer".into()),
            text_field: "q".into(),
            source_field: "source".into(),
            target_field: "target".into(),
            response_field: "translatedText".into(),
            timeout_secs: 30,
        }
    }
}

type CacheKey = (String, String, String);

struct CacheState {
    entries: HashMap<CacheKey, String>,
    file: Option<File>,
    requests: usize,
}

/// Remote JSON translation endpoint with a persistent append-only cache.
///
/// The cache lock is held across the request so a phrase is fetched at most
/// once per run, even with concurrent callers.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    state: Mutex<CacheState>,
}

fn parse_cache(text: &str) -> HashMap<CacheKey, String> {
    text.lines()
        .filter_map(|l| {
            let mut cells = l.splitn(4, '\t');
            let (a, b, c, d) = (cells.next()?, cells.next()?, cells.next()?, cells.next()?);
            Some(((a.to_string(), b.to_string(), c.to_string()), d.to_string()))
        })
        .collect()
}

impl HttpBackend {
    pub fn new(
        config: HttpConfig,
        api_key: Option<String>,
        cache_path: Option<&Path>,
    ) -> Result<Self, BackendConfigError> {
        if config.endpoint.is_empty() {
            return Err(BackendConfigError::Http("endpoint not configured".into()));
        }
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| BackendConfigError::Io { path, source }
        };
        let (entries, file) = match cache_path {
            None => (HashMap::new(), None),
            Some(path) => {
                let entries = match fs::read_to_string(path) {
                    Ok(text) => parse_cache(&text),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => HashMap::new(),
                    Err(e) => return Err(io(path)(e)),
                };
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(io(path))?;
                (entries, Some(file))
            }
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(Self {
            config,
            api_key,
            agent,
            state: Mutex::new(CacheState {
                entries,
                file,
                requests: 0,
            }),
        })
    }

    /// Number of network requests issued so far.
    pub fn request_count(&self) -> usize {
        self.state.lock().expect("cache lock").requests
    }

    fn fetch(&self, phrase: &str, source_lang: &str, target_lang: &str) -> Result<String, TranslationError> {
        let remote = |e: &dyn std::fmt::Display| TranslationError::Remote(e.to_string());
        let body = serde_json::json!({
            self.config.text_field.as_str(): phrase,
            self.config.source_field.as_str(): source_lang,
            self.config.target_field.as_str(): target_lang,
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            let value = match &self.config.key_scheme {
                Some(s) => format!("{s} {key}"),
                None => key.clone(),
            };
            req = req.header(self.config.key_header.as_str(), value);
        }
        let mut resp = req.send_json(&body).map_err(|e| remote(&e))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TranslationError::Remote(format!("HTTP status {status}")));
        }
        let json: serde_json::Value = resp.body_mut().read_json().map_err(|e| remote(&e))?;
        let pointer: String = self
            .config
            .response_field
            .split('.')
            .map(|p| format!("/{p}"))
            .collect();
        json.pointer(&pointer)
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                TranslationError::Remote(format!(
                    "response lacks string field '{}'",
                    self.config.response_field
                ))
            })
    }
}

impl TranslationBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.config.endpoint
    }

    fn translate(&self, phrase: &str, source_lang: &str, target_lang: &str) -> Result<String, TranslationError> {
        let key = (source_lang.to_string(), target_lang.to_string(), phrase.to_string());
        let mut state = self.state.lock().expect("cache lock");
        if let Some(hit) = state.entries.get(&key) {
            return Ok(hit.clone());
        }
        state.requests += 1;
        let out = self.fetch(phrase, source_lang, target_lang)?;
        let storable = [source_lang, target_lang, phrase, out.as_str()]
            .iter()
            .all(|s| !s.contains(['\t', '\n', '\r']));
        if storable {
            if let Some(f) = state.file.as_mut() {
                writeln!(f, "{source_lang}\t{target_lang}\t{phrase}\t{out}")
                    .and_then(|_| f.flush())
                    .map_err(|e| TranslationError::Remote(format!("cache write failed: {e}")))?;
            }
        }
        state.entries.insert(key, out.clone());
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnTranslationFailure {
    /// Reject the whole record.
    #[default]
    Reject,
    /// Leave the span untranslated.
    KeepOriginal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub source_lang: String,
    pub target_lang: String,
    pub policy: SelectionPolicy,
    pub on_failure: OnTranslationFailure,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            source_lang: "en".into(),
            target_lang: "ko".into(),
            policy: SelectionPolicy::default(),
            on_failure: OnTranslationFailure::Reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchedSpan {
    pub source: String,
    pub target: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsOutcome {
    pub cs_text: String,
    pub switched: Vec<SwitchedSpan>,
    pub backend: String,
}

/// Sentence-final punctuation glued to the preceding token on output.
const TERMINAL_PUNCT: [&str; 3] = [".", "!", "?"];

/// Joins tokens with single spaces, attaching a terminal punctuation mark to
/// the token before it.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let last = tokens.len().saturating_sub(1);
    for (i, t) in tokens.iter().enumerate() {
        let t = t.as_ref();
        let glue = i == last && i > 0 && TERMINAL_PUNCT.contains(&t);
        if i > 0 && !glue {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

/// Substitutes every span of `plan` with the backend's translation.
pub fn apply_switch(
    tree: &ParseTree,
    plan: &SwitchPlan,
    backend: &dyn TranslationBackend,
    config: &AugmentConfig,
) -> Result<CsOutcome, TranslationError> {
    let tokens = tree.fringe();
    let mut pieces: Vec<String> = Vec::with_capacity(tokens.len());
    let mut switched = Vec::with_capacity(plan.spans.len());
    let mut cursor = 0;
    for span in &plan.spans {
        pieces.extend(tokens[cursor..span.start].iter().map(|t| t.to_string()));
        match backend.translate(&span.phrase, &config.source_lang, &config.target_lang) {
            Ok(target) => {
                pieces.push(target.clone());
                switched.push(SwitchedSpan {
                    source: span.phrase.clone(),
                    target,
                    start: span.start,
                    end: span.end,
                });
            }
            Err(e) => match config.on_failure {
                OnTranslationFailure::Reject => return Err(e),
                OnTranslationFailure::KeepOriginal => {
                    pieces.extend(tokens[span.start..span.end].iter().map(|t| t.to_string()))
                }
            },
        }
        cursor = span.end;
    }
    pieces.extend(tokens[cursor..].iter().map(|t| t.to_string()));
    Ok(CsOutcome {
        cs_text: detokenize(&pieces),
        switched,
        backend: backend.name().to_string(),
    })
}

/// Parse trees looked up by the sentence they cover.
///
/// Keys ignore whitespace, so `"dull."` in a record matches the fringe
/// `"dull ."` of its tree.
#[derive(Debug, Clone, Default)]
pub struct TreeIndex {
    trees: HashMap<String, ParseTree>,
    /// Lines that failed to parse, with their errors.
    pub malformed: Vec<(usize, TreeError)>,
}

fn sentence_key(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

impl TreeIndex {
    pub fn from_trees(trees: impl IntoIterator<Item = ParseTree>) -> Self {
        let trees = trees
            .into_iter()
            .map(|t| (sentence_key(&t.fringe().concat()), t))
            .collect();
        Self {
            trees,
            malformed: Vec::new(),
        }
    }

    /// Builds an index from a file body holding one bracketed tree per line.
    pub fn parse(text: &str) -> Self {
        let mut index = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match treebank::parse_bracketed(line) {
                Ok(t) => {
                    index.trees.insert(sentence_key(&t.fringe().concat()), t);
                }
                Err(e) => index.malformed.push((i + 1, e)),
            }
        }
        index
    }

    pub fn get(&self, sentence: &str) -> Option<&ParseTree> {
        self.trees.get(&sentence_key(sentence))
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}

/// Why a record could not be augmented.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AugmentFailure {
    #[error("rejected: {0}")]
    Rejected(Rejection),
    #[error(transparent)]
    Translation(#[from] TranslationError),
}

impl From<Rejection> for AugmentFailure {
    fn from(r: Rejection) -> Self {
        AugmentFailure::Rejected(r)
    }
}

/// Selects and switches spans for one sentence. A sentence without a tree in
/// the index counts as a malformed tree.
pub fn switch_sentence(
    sentence: &str,
    trees: &TreeIndex,
    backend: &dyn TranslationBackend,
    config: &AugmentConfig,
) -> Result<CsOutcome, AugmentFailure> {
    let tree = trees.get(sentence).ok_or(Rejection::MalformedTree)?;
    let plan = treebank::select_switch_spans(tree, &config.policy)?;
    Ok(apply_switch(tree, &plan, backend, config)?)
}

/// Adds CS versions of both sentences; either failing rejects the record.
pub fn augment_pair(
    record: &PairRecord,
    trees: &TreeIndex,
    backend: &dyn TranslationBackend,
    config: &AugmentConfig,
) -> Result<PairRecord, AugmentFailure> {
    let cs0 = switch_sentence(&record.sentence0, trees, backend, config)?;
    let cs1 = switch_sentence(&record.sentence1, trees, backend, config)?;
    Ok(record.clone().with_cs(cs0.cs_text, cs1.cs_text))
}

/// Builds the six-sentence record; any of the three failing rejects it.
pub fn augment_triplet(
    triplet: &NliTriplet,
    trees: &TreeIndex,
    backend: &dyn TranslationBackend,
    config: &AugmentConfig,
) -> Result<SixTuple, AugmentFailure> {
    let p = switch_sentence(&triplet.premise, trees, backend, config)?;
    let e = switch_sentence(&triplet.entailment, trees, backend, config)?;
    let c = switch_sentence(&triplet.contradiction, trees, backend, config)?;
    Ok(SixTuple {
        premise: triplet.premise.clone(),
        entailment: triplet.entailment.clone(),
        contradiction: triplet.contradiction.clone(),
        cs_premise: p.cs_text,
        cs_entailment: e.cs_text,
        cs_contradiction: c.cs_text,
        reviewed: None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub total: usize,
    pub accepted: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub translation_failures: usize,
}

impl AugmentReport {
    pub fn record<T>(&mut self, outcome: &Result<T, AugmentFailure>) {
        self.total += 1;
        match outcome {
            Ok(_) => self.accepted += 1,
            Err(AugmentFailure::Rejected(r)) => {
                *self.rejected_by_reason.entry(r.to_string()).or_default() += 1
            }
            Err(AugmentFailure::Translation(_)) => self.translation_failures += 1,
        }
    }

    pub fn rejected(&self) -> usize {
        self.rejected_by_reason.values().sum()
    }

    /// `accepted + rejected + failures == total`
    pub fn is_conserved(&self) -> bool {
        self.accepted + self.rejected() + self.translation_failures == self.total
    }
}

fn run_batch<I, O, F>(inputs: &[I], f: F) -> (Vec<O>, AugmentReport)
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> Result<O, AugmentFailure> + Sync,
{
    // Collecting an indexed parallel iterator keeps input order.
    let outcomes: Vec<Result<O, AugmentFailure>> = inputs.par_iter().map(&f).collect();
    let mut report = AugmentReport::default();
    for r in Rejection::ALL {
        report.rejected_by_reason.insert(r.to_string(), 0);
    }
    let mut accepted = Vec::new();
    for o in outcomes {
        report.record(&o);
        if let Ok(v) = o {
            accepted.push(v);
        }
    }
    (accepted, report)
}

/// Augments a batch of pair records concurrently, preserving input order.
pub fn augment_pairs(
    records: &[PairRecord],
    trees: &TreeIndex,
    backend: &dyn TranslationBackend,
    config: &AugmentConfig,
) -> (Vec<PairRecord>, AugmentReport) {
    run_batch(records, |r| augment_pair(r, trees, backend, config))
}

/// Augments a batch of NLI triplets concurrently, preserving input order.
pub fn augment_triplets(
    triplets: &[NliTriplet],
    trees: &TreeIndex,
    backend: &dyn TranslationBackend,
    config: &AugmentConfig,
) -> (Vec<SixTuple>, AugmentReport) {
    run_batch(triplets, |t| augment_triplet(t, trees, backend, config))
}
