use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use csembed::augment::*;
use csembed::corpus::{NliTriplet, PairRecord, Target};
use csembed::treebank::{parse_bracketed, select_switch_spans, Rejection, SelectionPolicy};
use proptest::prelude::*;

const FIG1: &str = "(S (NP (DT The) (NN movie)) (VP (VBD was) (ADJP (RB very) (JJ dull))))";
const WHOLE_NP: &str = "(NP (DT The) (JJ big) (NN dog))";
const PRONOUN: &str = "(S (NP (PRP It)) (VP (VBZ is) (NP (DT a) (JJ good) (NN movie))))";

fn dict() -> DictionaryBackend {
    DictionaryBackend::from_pairs([("The movie", "영화"), ("a good movie", "좋은 영화"), ("The big dog", "큰 개")]).unwrap()
}

fn index(lines: &[&str]) -> TreeIndex {
    TreeIndex::parse(&lines.join("\n"))
}

#[test]
fn movie_sentence_fixture() {
    let trees = index(&[FIG1]);
    for _ in 0..20 {
        let out = switch_sentence("The movie was very dull", &trees, &dict(), &AugmentConfig::default()).unwrap();
        assert_eq!(out.cs_text, "영화 was very dull");
        assert_eq!(out.switched.len(), 1);
    }
}

#[test]
fn whole_sentence_and_pronoun_fixtures() {
    let cfg = AugmentConfig::default();
    let trees = index(&[WHOLE_NP, PRONOUN]);
    assert_eq!(
        switch_sentence("The big dog", &trees, &dict(), &cfg).unwrap_err(),
        AugmentFailure::Rejected(Rejection::WholeSentenceNP)
    );
    let out = switch_sentence("It is a good movie", &trees, &dict(), &cfg).unwrap();
    assert_eq!(out.cs_text, "It is 좋은 영화");
    let tree = parse_bracketed(PRONOUN).unwrap();
    let plan = select_switch_spans(&tree, &SelectionPolicy::default()).unwrap();
    assert_eq!((plan.spans[0].start, plan.spans[0].end), (2, 5));
}

#[test]
fn batch_report_counts_every_reason() {
    let trees = index(&[FIG1, WHOLE_NP, "(S (VP (VB Go)))", "(S (NP (PRP It)) (VP (VBD ran)))"]);
    let records = vec![
        PairRecord::new("1", "The movie was very dull", "The movie was very dull", Target::Score(5.0)),
        PairRecord::new("2", "The big dog", "The movie was very dull", Target::Score(1.0)),
        PairRecord::new("3", "Go", "The movie was very dull", Target::Score(1.0)),
        PairRecord::new("4", "It ran", "The movie was very dull", Target::Score(1.0)),
        PairRecord::new("5", "no tree here", "The movie was very dull", Target::Score(1.0)),
    ];
    let (out, report) = augment_pairs(&records, &trees, &dict(), &AugmentConfig::default());
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].cs_sentence0.as_deref(), Some("영화 was very dull"));
    assert_eq!(report.total, 5);
    assert_eq!(report.accepted, 1);
    assert_eq!(report.rejected_by_reason["whole_sentence_np"], 1);
    assert_eq!(report.rejected_by_reason["no_eligible_span"], 1);
    assert_eq!(report.rejected_by_reason["pronoun_only_exhausted"], 1);
    assert_eq!(report.rejected_by_reason["malformed_tree"], 1);
    assert!(report.is_conserved());
}

#[test]
fn missing_translation_policy() {
    let trees = index(&[FIG1]);
    let empty = DictionaryBackend::from_pairs(Vec::<(&str, &str)>::new()).unwrap();
    let strict = AugmentConfig::default();
    assert!(matches!(
        switch_sentence("The movie was very dull", &trees, &empty, &strict),
        Err(AugmentFailure::Translation(TranslationError::MissingEntry(_)))
    ));
    let lenient = AugmentConfig {
        on_failure: OnTranslationFailure::KeepOriginal,
        ..AugmentConfig::default()
    };
    let out = switch_sentence("The movie was very dull", &trees, &empty, &lenient).unwrap();
    assert_eq!(out.cs_text, "The movie was very dull");
    let records = [PairRecord::new("1", "The movie was very dull", "The movie was very dull", Target::Score(1.0))];
    let (_, report) = augment_pairs(&records, &trees, &empty, &strict);
    assert_eq!(report.translation_failures, 1);
    assert!(report.is_conserved());
}

#[test]
fn triplets_become_six_tuples() {
    let trees = index(&[FIG1, PRONOUN, "(S (NP (DT The) (NN movie)) (VP (VBD was) (ADJP (JJ great))))"]);
    let t = NliTriplet {
        premise: "The movie was very dull".into(),
        entailment: "It is a good movie".into(),
        contradiction: "The movie was great".into(),
    };
    let (out, report) = augment_triplets(&[t], &trees, &dict(), &AugmentConfig::default());
    assert_eq!(report.accepted, 1);
    assert_eq!(out[0].cs_premise, "영화 was very dull");
    assert_eq!(out[0].cs_entailment, "It is 좋은 영화");
    assert_eq!(out[0].cs_contradiction, "영화 was great");
}

#[test]
fn empty_batch() {
    let (out, report) = augment_pairs(&[], &TreeIndex::default(), &dict(), &AugmentConfig::default());
    assert!(out.is_empty());
    assert_eq!(report.total, 0);
    assert!(report.is_conserved());
}

struct Server {
    url: String,
    hits: Arc<AtomicUsize>,
    auth: Arc<Mutex<Vec<String>>>,
}

/// Answers each POST with the upper-cased `q` field.
fn serve() -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/translate", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let auth = Arc::new(Mutex::new(Vec::new()));
    let (h, a) = (hits.clone(), auth.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    a.lock().unwrap().push(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            h.fetch_add(1, Ordering::SeqCst);
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let q = req["q"].as_str().unwrap().to_uppercase();
            let resp = serde_json::json!({ "translatedText": q }).to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                resp.len(),
                resp
            );
        }
    });
    Server { url, hits, auth }
}

#[test]
fn http_backend_caches_and_dedups() {
    let server = serve();
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.tsv");
    let cfg = HttpConfig {
        endpoint: server.url.clone(),
        ..HttpConfig::default()
    };
    let backend = HttpBackend::new(cfg.clone(), Some("k3y".into()), Some(&cache)).unwrap();
    assert_eq!(backend.translate("the movie", "en", "ko").unwrap(), "THE MOVIE");
    assert_eq!(backend.translate("the movie", "en", "ko").unwrap(), "THE MOVIE");
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
    assert_eq!(backend.request_count(), 1);
    assert_eq!(server.auth.lock().unwrap()[0], "Bearer k3y");

    // Concurrent callers on one phrase still cost a single request.
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| backend.translate("a dog", "en", "ko").unwrap());
        }
    });
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);
    drop(backend);

    // A fresh backend on the same cache file makes no requests.
    let again = HttpBackend::new(cfg, None, Some(&cache)).unwrap();
    assert_eq!(again.translate("a dog", "en", "ko").unwrap(), "A DOG");
    assert_eq!(again.request_count(), 0);
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn unreachable_endpoint_is_a_translation_failure() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = HttpBackend::new(
        HttpConfig {
            endpoint: format!("http://127.0.0.1:{port}/x"),
            timeout_secs: 2,
            ..HttpConfig::default()
        },
        None,
        None,
    )
    .unwrap();
    assert!(matches!(backend.translate("x", "en", "ko"), Err(TranslationError::Remote(_))));
    assert!(HttpBackend::new(HttpConfig::default(), None, None).is_err());
}

proptest! {
    #[test]
    fn report_is_conserved(kinds in proptest::collection::vec(0usize..4, 0..30)) {
        let trees = index(&[FIG1, WHOLE_NP, "(S (VP (VB Go)))"]);
        let sentences = ["The movie was very dull", "The big dog", "Go", "missing"];
        let records: Vec<PairRecord> = kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| PairRecord::new(i.to_string(), sentences[k], "The movie was very dull", Target::Score(0.0)))
            .collect();
        let (out, report) = augment_pairs(&records, &trees, &dict(), &AugmentConfig::default());
        prop_assert!(report.is_conserved());
        prop_assert_eq!(report.total, records.len());
        prop_assert_eq!(out.len(), kinds.iter().filter(|&&k| k == 0).count());
    }

    #[test]
    fn detokenize_single_spaces(tokens in proptest::collection::vec("[a-z]{1,5}", 1..8)) {
        let s = detokenize(&tokens);
        prop_assert!(!s.contains("  "));
        prop_assert_eq!(s.split(' ').count(), tokens.len());
    }
}
