//! Rule-based activity (verb phrase) extraction.
//!
//! A phrase starts at a gerund or at a verb from a small closed list and
//! takes up to three following tokens. It ends early at punctuation, a
//! conjunction, a preposition or another verb. Auxiliaries and copulas are
//! verbs for the stopping rule but never start a phrase. Trailing
//! determiners are dropped.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

/// Verb phrase mined from one caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityPhrase {
    pub text: String,
    pub source_caption_id: String,
}

const MAX_TAIL: usize = 3;

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "can", "could", "will", "would", "shall", "should", "may", "might", "must", "keeps",
    "keep", "starts", "start", "begins", "begin", "tries", "try", "seems", "gets", "get",
];

const VERBS: &[&str] = &[
    "plays", "runs", "walks", "talks", "sings", "dances", "cooks", "rides", "drives", "swims",
    "jumps", "eats", "drinks", "writes", "reads", "throws", "kicks", "catches", "cuts", "opens",
    "closes", "makes", "shows", "explains", "paints", "cleans", "washes", "fixes", "climbs",
    "carries", "pushes", "pulls", "lifts", "folds", "stacks", "holds", "sits", "stands", "speaks",
    "laughs", "smiles", "cries", "fights", "hits", "shoots", "builds", "draws", "mixes", "pours",
    "slices", "chops", "stirs", "fries", "bakes", "types", "drops", "repairs",
];

const GERUND_STOPLIST: &[&str] = &[
    "something",
    "nothing",
    "anything",
    "everything",
    "thing",
    "morning",
    "evening",
    "ceiling",
    "building",
    "during",
    "king",
    "ring",
    "string",
    "wedding",
    "clothing",
    "spring",
    "swing",
    "wing",
    "sibling",
    "pudding",
    "offspring",
    "bring",
    "awning",
    "icing",
    "railing",
];

const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "while", "as", "then", "when", "because", "so", "nor", "yet", "whilst",
    "after", "before", "until", "if", "that", "which", "who",
];

const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "near", "with", "into", "onto", "from", "to", "of", "by", "for", "over",
    "under", "inside", "outside", "through", "about", "behind", "around", "across", "along",
    "beside", "between", "above", "below", "off", "up", "down", "out", "toward", "towards",
];

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "his", "her", "their", "its", "my", "your",
    "our", "some", "any",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Punct,
}

fn lex(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' || c == '-' {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(Tok::Word(std::mem::take(&mut word)));
        }
        if !c.is_whitespace() {
            out.push(Tok::Punct);
        }
    }
    if !word.is_empty() {
        out.push(Tok::Word(word));
    }
    out
}

fn is_gerund(w: &str) -> bool {
    w.len() >= 5
        && w.ends_with("ing")
        && w.chars().all(|c| c.is_alphabetic())
        && !GERUND_STOPLIST.contains(&w)
}

fn is_head(w: &str) -> bool {
    is_gerund(w) || VERBS.contains(&w)
}

fn is_verbish(w: &str) -> bool {
    is_head(w) || AUXILIARIES.contains(&w)
}

fn is_boundary(w: &str) -> bool {
    CONJUNCTIONS.contains(&w) || PREPOSITIONS.contains(&w)
}

/// Lowercases and collapses runs of whitespace.
pub fn normalize_phrase(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Verb phrases of one caption, in order of appearance.
pub fn extract_phrases(caption: &str) -> Vec<String> {
    let toks = lex(caption);
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let head = match &toks[i] {
            Tok::Word(w) if is_head(w) => w,
            _ => {
                i += 1;
                continue;
            }
        };
        let mut words = vec![head.as_str()];
        let mut j = i + 1;
        while j < toks.len() && words.len() <= MAX_TAIL {
            match &toks[j] {
                Tok::Word(w) if !is_verbish(w) && !is_boundary(w) => words.push(w),
                _ => break,
            }
            j += 1;
        }
        while words.len() > 1 && DETERMINERS.contains(words.last().unwrap()) {
            words.pop();
        }
        out.push(words.join(" "));
        i = j;
    }
    out
}

/// Deduplicated phrases over a caption list, first occurrence wins.
pub fn extract_activities<'a>(
    captions: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Vec<ActivityPhrase> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (id, text) in captions {
        for p in extract_phrases(text) {
            if seen.insert(p.clone()) {
                out.push(ActivityPhrase {
                    text: p,
                    source_caption_id: id.to_owned(),
                });
            }
        }
    }
    out
}

/// Pre-extracted phrases keyed by caption id.
///
/// One caption per line: `caption-id \t phrase \t phrase ...`. Blank lines
/// and lines starting with `#` are skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseSidecar {
    phrases: HashMap<String, Vec<String>>,
}

impl PhraseSidecar {
    pub fn parse(text: &str) -> Result<Self> {
        let mut phrases = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().trim();
            if id.is_empty() {
                return Err(Error::parse(n + 1, "missing caption id"));
            }
            let list: Vec<String> = fields
                .map(normalize_phrase)
                .filter(|p| !p.is_empty())
                .collect();
            if phrases.insert(id.to_owned(), list).is_some() {
                return Err(Error::parse(n + 1, format!("duplicate caption id `{id}`")));
            }
        }
        Ok(Self { phrases })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, caption_id: &str) -> &[String] {
        self.phrases.get(caption_id).map_or(&[], Vec::as_slice)
    }

    /// Same contract as [`extract_activities`], reading phrases from the sidecar.
    pub fn activities<'a>(
        &self,
        captions: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Vec<ActivityPhrase> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (id, _) in captions {
            for p in self.get(id) {
                if seen.insert(p.clone()) {
                    out.push(ActivityPhrase {
                        text: p.clone(),
                        source_caption_id: id.to_owned(),
                    });
                }
            }
        }
        out
    }
}
