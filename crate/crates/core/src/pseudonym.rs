//! Compartmentalized pseudonymization of judge identities.
//!
//! Identity text (court composition headers) and outcome data travel
//! through separate phases and meet again only through a neutral file
//! key. Judge names map to 7-letter dictionary words; the assignment is
//! deterministic given the sorted names, the dictionary, and a seed.
//! There is deliberately no inverse operation anywhere in this module.

use crate::corpus::is_pseudonym_shaped;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PseudonymError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad marker pattern: {0}")]
    BadPattern(#[from] regex::Error),
    #[error("dictionary line {line}: {word:?} is not a 7-letter lowercase word")]
    BadWord { line: usize, word: String },
    #[error("dictionary exhausted: {needed} names but only {usable} usable words")]
    DictionaryExhausted { needed: usize, usable: usize },
    #[error("duplicate {side} key {key:?}")]
    DuplicateKey { side: &'static str, key: String },
    #[error("document text is empty")]
    EmptyText,
}

/// Marker patterns that separate the identity header from the outcome
/// body. The earliest match of any rule wins; rule order breaks ties at
/// the same offset.
#[derive(Debug, Clone)]
pub struct SplitRules {
    markers: Vec<Regex>,
}

/// Headings that commonly open the body of a French ruling.
pub const DEFAULT_MARKERS: &[&str] = &[
    r"(?m)^EXPOS[EÉ] DU LITIGE",
    r"(?m)^FAITS ET PROC[EÉ]DURE",
    r"(?m)^MOTIFS",
    r"(?m)^---+$",
];

impl SplitRules {
    pub fn new(patterns: &[&str]) -> Result<Self, PseudonymError> {
        let markers = patterns.iter().map(|p| Regex::new(p)).collect::<Result<_, _>>()?;
        Ok(SplitRules { markers })
    }

    pub fn default_rules() -> Self {
        SplitRules::new(DEFAULT_MARKERS).expect("built-in patterns compile")
    }
}

/// One document split into its compartmentalized sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentParts {
    pub neutral_key: String,
    pub identity_section: String,
    /// The matched marker text; empty when no rule matched.
    pub boundary: String,
    pub outcome_section: String,
    /// False means no rule matched and the whole document was classed as
    /// identity text (the safe side).
    pub boundary_found: bool,
}

impl DocumentParts {
    pub fn reconstructed(&self) -> String {
        format!("{}{}{}", self.identity_section, self.boundary, self.outcome_section)
    }
}

pub fn split_document(
    neutral_key: &str,
    text: &str,
    rules: &SplitRules,
) -> Result<DocumentParts, PseudonymError> {
    if text.is_empty() {
        return Err(PseudonymError::EmptyText);
    }
    let mut earliest: Option<(usize, usize)> = None;
    for marker in &rules.markers {
        if let Some(m) = marker.find(text) {
            if earliest.is_none_or(|(s, _)| m.start() < s) {
                earliest = Some((m.start(), m.end()));
            }
        }
    }
    Ok(match earliest {
        Some((start, end)) => DocumentParts {
            neutral_key: neutral_key.to_string(),
            identity_section: text[..start].to_string(),
            boundary: text[start..end].to_string(),
            outcome_section: text[end..].to_string(),
            boundary_found: true,
        },
        None => DocumentParts {
            neutral_key: neutral_key.to_string(),
            identity_section: text.to_string(),
            boundary: String::new(),
            outcome_section: String::new(),
            boundary_found: false,
        },
    })
}

/// Injective mapping from folded original names to dictionary words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudonymTable {
    /// Keys are lowercase originals; values are dictionary words.
    mapping: BTreeMap<String, String>,
    seed: u64,
}

impl PseudonymTable {
    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn pseudonym_of(&self, name: &str) -> Option<&str> {
        self.mapping.get(&name.to_lowercase()).map(String::as_str)
    }

    pub fn mapping(&self) -> &BTreeMap<String, String> {
        &self.mapping
    }
}

fn check_word(word: &str, line: usize) -> Result<(), PseudonymError> {
    if is_pseudonym_shaped(word) {
        Ok(())
    } else {
        Err(PseudonymError::BadWord { line, word: word.to_string() })
    }
}

/// Reads one dictionary word per line, ignoring blank lines.
pub fn load_dictionary(path: &Path) -> Result<Vec<String>, PseudonymError> {
    let file = std::fs::File::open(path)?;
    let mut words = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let word = line?.trim().to_string();
        if word.is_empty() {
            continue;
        }
        check_word(&word, i + 1)?;
        words.push(word);
    }
    Ok(words)
}

/// Assigns a dictionary word to every distinct (case-folded) name.
/// Names are sorted, the dictionary is shuffled by the seed, and each
/// name takes the first unused word; words that collide with any
/// original name (case-insensitive) are never used.
pub fn build_pseudonym_table(
    names: &[String],
    dictionary: &[String],
    seed: u64,
) -> Result<PseudonymTable, PseudonymError> {
    for (i, word) in dictionary.iter().enumerate() {
        check_word(word, i + 1)?;
    }
    let folded: BTreeSet<String> =
        names.iter().map(|n| n.trim().to_lowercase()).filter(|n| !n.is_empty()).collect();

    let mut shuffled: Vec<&String> = dictionary.iter().collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let usable: Vec<&String> = shuffled.into_iter().filter(|w| !folded.contains(&**w)).collect();
    if usable.len() < folded.len() {
        return Err(PseudonymError::DictionaryExhausted {
            needed: folded.len(),
            usable: usable.len(),
        });
    }
    let mapping = folded.into_iter().zip(usable.into_iter().map(|w| w.to_string())).collect();
    Ok(PseudonymTable { mapping, seed })
}

/// Maps French accented letters onto their base letter.
fn strip_accent(c: char) -> char {
    match c {
        'à' | 'â' | 'ä' => 'a',
        'é' | 'è' | 'ê' | 'ë' => 'e',
        'î' | 'ï' => 'i',
        'ô' | 'ö' => 'o',
        'ù' | 'û' | 'ü' => 'u',
        'ÿ' => 'y',
        'ç' => 'c',
        _ => c,
    }
}

fn accent_class(base: char) -> Option<&'static str> {
    match base {
        'a' => Some("[aàâä]"),
        'e' => Some("[eéèêë]"),
        'i' => Some("[iîï]"),
        'o' => Some("[oôö]"),
        'u' => Some("[uùûü]"),
        'y' => Some("[yÿ]"),
        'c' => Some("[cç]"),
        _ => None,
    }
}

fn fold_name(name: &str, accent_insensitive: bool) -> String {
    let lower = name.to_lowercase();
    if accent_insensitive {
        lower.chars().map(strip_accent).collect()
    } else {
        lower
    }
}

fn name_pattern(name: &str, accent_insensitive: bool) -> String {
    let mut pattern = String::new();
    for c in name.to_lowercase().chars() {
        if accent_insensitive {
            if let Some(class) = accent_class(strip_accent(c)) {
                pattern.push_str(class);
                continue;
            }
        }
        pattern.push_str(&regex::escape(&c.to_string()));
    }
    pattern
}

fn alternation_regex(names: &[&String], accent_insensitive: bool) -> Regex {
    // Longest first so a full name wins over one of its parts at the
    // same start offset.
    let mut ordered: Vec<&&String> = names.iter().collect();
    ordered.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
    let body: Vec<String> =
        ordered.iter().map(|n| name_pattern(n, accent_insensitive)).collect();
    let pattern = format!(r"(?i)\b(?:{})\b", body.join("|"));
    Regex::new(&pattern).expect("escaped alternation compiles")
}

/// Replaces every mapped name (case-insensitive, token boundaries) with
/// its pseudonym. With `accent_insensitive`, accented and plain vowels
/// are treated as the same letter.
pub fn redact_identities(text: &str, table: &PseudonymTable, accent_insensitive: bool) -> String {
    if table.is_empty() {
        return text.to_string();
    }
    let names: Vec<&String> = table.mapping.keys().collect();
    let re = alternation_regex(&names, accent_insensitive);
    let lookup: HashMap<String, &str> = table
        .mapping
        .iter()
        .map(|(name, word)| (fold_name(name, accent_insensitive), word.as_str()))
        .collect();
    re.replace_all(text, |caps: &regex::Captures| {
        let hit = &caps[0];
        lookup
            .get(&fold_name(hit, accent_insensitive))
            .copied()
            .unwrap_or(hit)
            .to_string()
    })
    .into_owned()
}

/// Capitalized tokens that are neither mapped names nor pseudonyms;
/// surfaced for operator review, never guessed at.
pub fn unmapped_capitalized_tokens(text: &str, table: &PseudonymTable) -> Vec<String> {
    let token = Regex::new(r"\b\p{Lu}[\p{L}]+\b").expect("static pattern");
    let pseudonyms: BTreeSet<&str> = table.mapping.values().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    for m in token.find_iter(text) {
        let lower = m.as_str().to_lowercase();
        if !table.mapping.contains_key(&lower) && !pseudonyms.contains(lower.as_str()) {
            seen.insert(m.as_str().to_string());
        }
    }
    seen.into_iter().collect()
}

/// One token-boundary occurrence of an original name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakHit {
    pub name: String,
    pub offset: usize,
}

/// Finds every case-insensitive, token-boundary occurrence of any
/// original name. Zero hits over each pipeline artifact is the release
/// gate for pseudonymized output.
pub fn leakage_scan(text: &str, originals: &[String]) -> Vec<LeakHit> {
    let mut hits = Vec::new();
    let mut seen_names = BTreeSet::new();
    for name in originals {
        let trimmed = name.trim();
        if trimmed.is_empty() || !seen_names.insert(trimmed.to_lowercase()) {
            continue;
        }
        let pattern = format!(r"(?i)\b{}\b", name_pattern(trimmed, false));
        let re = Regex::new(&pattern).expect("escaped pattern compiles");
        for m in re.find_iter(text) {
            hits.push(LeakHit { name: trimmed.to_string(), offset: m.start() });
        }
    }
    hits.sort_by(|a, b| a.offset.cmp(&b.offset).then(a.name.cmp(&b.name)));
    hits
}

/// Result of joining identity and outcome records on the neutral key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkResult<T> {
    /// (pseudonym, outcome) pairs, ordered by key.
    pub pairs: Vec<(String, T)>,
    pub unmatched_identity: Vec<String>,
    pub unmatched_outcome: Vec<String>,
}

/// Inner join on the neutral key. Either side's leftover keys land in
/// the unmatched report; original names never enter this function.
pub fn link_by_key<T: Clone>(
    identity_records: &[(String, String)],
    outcome_records: &[(String, T)],
) -> Result<LinkResult<T>, PseudonymError> {
    let mut identities = BTreeMap::new();
    for (key, pseudonym) in identity_records {
        if identities.insert(key.clone(), pseudonym.clone()).is_some() {
            return Err(PseudonymError::DuplicateKey { side: "identity", key: key.clone() });
        }
    }
    let mut outcomes = BTreeMap::new();
    for (key, outcome) in outcome_records {
        if outcomes.insert(key.clone(), outcome.clone()).is_some() {
            return Err(PseudonymError::DuplicateKey { side: "outcome", key: key.clone() });
        }
    }
    let mut pairs = Vec::new();
    let mut unmatched_identity = Vec::new();
    for (key, pseudonym) in &identities {
        match outcomes.get(key) {
            Some(outcome) => pairs.push((pseudonym.clone(), outcome.clone())),
            None => unmatched_identity.push(key.clone()),
        }
    }
    let unmatched_outcome: Vec<String> =
        outcomes.keys().filter(|k| !identities.contains_key(*k)).cloned().collect();
    Ok(LinkResult { pairs, unmatched_identity, unmatched_outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(n: usize) -> Vec<String> {
        // Distinct 7-letter lowercase words: "worddaa", "worddab", ...
        (0..n)
            .map(|i| {
                format!(
                    "word{}{}{}",
                    (b'a' + (i / 676) as u8) as char,
                    (b'a' + (i / 26 % 26) as u8) as char,
                    (b'a' + (i % 26) as u8) as char
                )
            })
            .collect()
    }

    #[test]
    fn table_is_deterministic_and_injective() {
        let names: Vec<String> = (0..50).map(|i| format!("JUDGE {i:03}")).collect();
        let dict = words(60);
        let a = build_pseudonym_table(&names, &dict, 42).unwrap();
        let b = build_pseudonym_table(&names, &dict, 42).unwrap();
        assert_eq!(a, b);
        let c = build_pseudonym_table(&names, &dict, 43).unwrap();
        assert_ne!(a, c, "a different seed should shuffle differently");
        let inverted: BTreeSet<&String> = a.mapping().values().collect();
        assert_eq!(inverted.len(), a.len(), "no two names share a word");
        for word in a.mapping().values() {
            assert!(is_pseudonym_shaped(word));
            assert!(dict.contains(word));
        }
    }

    #[test]
    fn case_variants_of_a_name_share_one_pseudonym() {
        let names = vec!["Dupont".to_string(), "DUPONT".to_string(), "dupont".to_string()];
        let table = build_pseudonym_table(&names, &words(5), 1).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.pseudonym_of("Dupont"), table.pseudonym_of("DUPONT"));
    }

    #[test]
    fn words_colliding_with_originals_are_skipped() {
        let names = vec!["worddaa".to_string(), "other".to_string()];
        let dict = words(3);
        let table = build_pseudonym_table(&names, &dict, 0).unwrap();
        for word in table.mapping().values() {
            assert_ne!(word, "worddaa", "a pseudonym must never equal an original name");
        }
    }

    #[test]
    fn exhausted_dictionary_is_an_error() {
        let names: Vec<String> = (0..4).map(|i| format!("name{i}")).collect();
        match build_pseudonym_table(&names, &words(3), 0) {
            Err(PseudonymError::DictionaryExhausted { needed, usable }) => {
                assert_eq!((needed, usable), (4, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_dictionary_words_are_rejected() {
        for bad in ["short", "toolongword", "Capital", "with123"] {
            let dict = vec![bad.to_string()];
            assert!(matches!(
                build_pseudonym_table(&["x".to_string()], &dict, 0),
                Err(PseudonymError::BadWord { .. })
            ));
        }
    }

    #[test]
    fn split_takes_the_earliest_marker() {
        let rules = SplitRules::new(&["---", "MOTIFS"]).unwrap();
        let text = "HEADER\nMOTIFS\n---\nBODY";
        let parts = split_document("k1", text, &rules).unwrap();
        assert!(parts.boundary_found);
        assert_eq!(parts.identity_section, "HEADER\n");
        assert_eq!(parts.boundary, "MOTIFS");
        assert_eq!(parts.outcome_section, "\n---\nBODY");
        assert_eq!(parts.reconstructed(), text);
    }

    #[test]
    fn missing_marker_keeps_everything_on_the_identity_side() {
        let rules = SplitRules::new(&["---"]).unwrap();
        let parts = split_document("k2", "no boundary here", &rules).unwrap();
        assert!(!parts.boundary_found);
        assert_eq!(parts.identity_section, "no boundary here");
        assert_eq!(parts.outcome_section, "");
        assert_eq!(parts.reconstructed(), "no boundary here");
    }

    #[test]
    fn empty_document_is_an_error() {
        let rules = SplitRules::default_rules();
        assert!(matches!(split_document("k", "", &rules), Err(PseudonymError::EmptyText)));
    }

    proptest! {
        #[test]
        fn split_and_rejoin_reconstructs_the_input(
            head in "[a-zA-Z \n]{0,40}",
            tail in "[a-zA-Z \n]{0,40}",
            with_marker in proptest::bool::ANY,
        ) {
            let rules = SplitRules::new(&["===SPLIT==="]).unwrap();
            let text = if with_marker {
                format!("{head}===SPLIT==={tail}")
            } else {
                format!("{head}{tail}")
            };
            prop_assume!(!text.is_empty());
            let parts = split_document("k", &text, &rules).unwrap();
            prop_assert_eq!(parts.reconstructed(), text);
        }
    }

    fn table_for(pairs: &[(&str, &str)]) -> PseudonymTable {
        PseudonymTable {
            mapping: pairs.iter().map(|(n, w)| (n.to_lowercase(), w.to_string())).collect(),
            seed: 0,
        }
    }

    #[test]
    fn redaction_replaces_mapped_names() {
        let table = table_for(&[("DUPONT", "anatole")]);
        assert_eq!(
            redact_identities("Mme DUPONT, présidente", &table, false),
            "Mme anatole, présidente"
        );
        assert_eq!(redact_identities("Dupont and dUpOnT", &table, false), "anatole and anatole");
        assert_eq!(redact_identities("DUPONTE is someone else", &table, false), "DUPONTE is someone else");
        assert_eq!(redact_identities("nothing to do", &table, false), "nothing to do");
    }

    #[test]
    fn longer_names_win_over_their_parts() {
        let table = table_for(&[("MARTIN", "anatole"), ("MARTIN DUPONT", "babiche")]);
        assert_eq!(redact_identities("Juge MARTIN DUPONT", &table, false), "Juge babiche");
        assert_eq!(redact_identities("Juge MARTIN seul", &table, false), "Juge anatole seul");
    }

    #[test]
    fn accent_insensitive_matching_is_opt_in() {
        let table = table_for(&[("Dupé", "anatole")]);
        assert_eq!(redact_identities("M. DUPE a jugé", &table, true), "M. anatole a jugé");
        assert_eq!(redact_identities("M. DUPE a jugé", &table, false), "M. DUPE a jugé");
        assert_eq!(redact_identities("M. DUPÉ a jugé", &table, false), "M. anatole a jugé");
    }

    #[test]
    fn unmapped_capitalized_tokens_are_reported() {
        let table = table_for(&[("DUPONT", "anatole")]);
        let text = "Mme DUPONT entend Maître LEGRAND";
        let report = unmapped_capitalized_tokens(text, &table);
        assert!(report.contains(&"LEGRAND".to_string()));
        assert!(!report.iter().any(|t| t.eq_ignore_ascii_case("dupont")));
    }

    #[test]
    fn leakage_scan_examples() {
        let originals = vec!["DUPONT".to_string()];
        assert!(leakage_scan("anatole ruled", &originals).is_empty());
        let hits = leakage_scan("Dupont ruled", &originals);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].offset, 0);
        assert_eq!(hits[0].name, "DUPONT");
    }

    /// Naive oracle: lowercase windows compared at every offset, with
    /// alphanumeric neighbors rejecting the match.
    fn naive_scan(text: &str, originals: &[String]) -> Vec<(String, usize)> {
        let chars: Vec<char> = text.chars().collect();
        let lower: Vec<char> = text.to_lowercase().chars().collect();
        let mut hits = Vec::new();
        let mut seen = BTreeSet::new();
        for name in originals {
            let name = name.trim();
            if name.is_empty() || !seen.insert(name.to_lowercase()) {
                continue;
            }
            let needle: Vec<char> = name.to_lowercase().chars().collect();
            if needle.len() > lower.len() {
                continue;
            }
            for start in 0..=lower.len() - needle.len() {
                if lower[start..start + needle.len()] != needle[..] {
                    continue;
                }
                let left_ok = start == 0 || !chars[start - 1].is_alphanumeric();
                let end = start + needle.len();
                let right_ok = end == chars.len() || !chars[end].is_alphanumeric();
                if left_ok && right_ok {
                    let byte_offset: usize = chars[..start].iter().map(|c| c.len_utf8()).sum();
                    hits.push((name.to_string(), byte_offset));
                }
            }
        }
        hits.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        hits
    }

    proptest! {
        #[test]
        fn scan_agrees_with_quadratic_search(
            text in "[abc DEF]{0,60}",
            names in proptest::collection::vec("[a-fA-F]{2,5}", 1..6),
        ) {
            let originals: Vec<String> = names;
            let got: Vec<(String, usize)> =
                leakage_scan(&text, &originals).into_iter().map(|h| (h.name, h.offset)).collect();
            prop_assert_eq!(got, naive_scan(&text, &originals));
        }

        #[test]
        fn redacted_text_never_leaks_an_original(
            names in proptest::collection::vec("[A-Z]{3,9}", 1..20),
            filler in "[a-z ]{0,40}",
        ) {
            let originals: Vec<String> = {
                let mut set = BTreeSet::new();
                names.into_iter().filter(|n| set.insert(n.to_lowercase())).collect()
            };
            let dict = words(originals.len() + 5);
            let table = build_pseudonym_table(&originals, &dict, 7).unwrap();
            let text = format!(
                "{filler} {} {filler}",
                originals.iter().map(String::as_str).collect::<Vec<_>>().join(", ")
            );
            let redacted = redact_identities(&text, &table, false);
            let hits = leakage_scan(&redacted, &originals);
            prop_assert!(hits.is_empty(), "leaks: {:?} in {:?}", hits, redacted);
        }

        #[test]
        fn join_cardinality_is_the_key_intersection(
            left in proptest::collection::btree_set("[a-e]{1,2}", 0..8),
            right in proptest::collection::btree_set("[a-e]{1,2}", 0..8),
        ) {
            let identity: Vec<(String, String)> =
                left.iter().map(|k| (k.clone(), format!("pseudo-{k}"))).collect();
            let outcomes: Vec<(String, u8)> =
                right.iter().map(|k| (k.clone(), k.len() as u8)).collect();
            let link = link_by_key(&identity, &outcomes).unwrap();
            let expected: BTreeSet<_> = left.intersection(&right).collect();
            prop_assert_eq!(link.pairs.len(), expected.len());
            prop_assert_eq!(link.unmatched_identity.len(), left.difference(&right).count());
            prop_assert_eq!(link.unmatched_outcome.len(), right.difference(&left).count());
        }
    }

    #[test]
    fn link_by_key_examples() {
        let identity = vec![("k1".to_string(), "anatole".to_string())];
        let outcomes = vec![("k1".to_string(), "Mother".to_string())];
        let link = link_by_key(&identity, &outcomes).unwrap();
        assert_eq!(link.pairs, vec![("anatole".to_string(), "Mother".to_string())]);
        assert!(link.unmatched_identity.is_empty());
        assert!(link.unmatched_outcome.is_empty());

        let disjoint = link_by_key::<String>(
            &[("a".to_string(), "anatole".to_string())],
            &[("b".to_string(), "Father".to_string())],
        )
        .unwrap();
        assert!(disjoint.pairs.is_empty());
        assert_eq!(disjoint.unmatched_identity, vec!["a".to_string()]);
        assert_eq!(disjoint.unmatched_outcome, vec!["b".to_string()]);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let identity = vec![
            ("k".to_string(), "anatole".to_string()),
            ("k".to_string(), "babiche".to_string()),
        ];
        assert!(matches!(
            link_by_key::<u8>(&identity, &[]),
            Err(PseudonymError::DuplicateKey { side: "identity", .. })
        ));
    }
}
