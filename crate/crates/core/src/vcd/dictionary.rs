use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use super::extract::{extract_activities, ActivityPhrase, PhraseSidecar};
use crate::encoders::{Encoder, VideoFeatures};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::numerics::{cosine_similarity, mean_pool_rows, Matrix};

/// Default dictionary size per video.
pub const DEFAULT_KAPPA: usize = 5;

const PROMPT_PREFIX: &str = "This is a video about ";

/// `"This is a video about "` followed by the phrases joined with `", "`.
pub fn build_prompt<S: AsRef<str>>(phrases: &[S]) -> Result<String> {
    if phrases.is_empty() {
        return Err(Error::EmptyPhrase);
    }
    let mut out = String::from(PROMPT_PREFIX);
    for (i, p) in phrases.iter().enumerate() {
        let p = p.as_ref().trim();
        if p.is_empty() {
            return Err(Error::EmptyPhrase);
        }
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(p);
    }
    Ok(out)
}

/// Mean of the frame rows.
pub fn global_video_embedding(frames: &Matrix) -> Result<Vec<f64>> {
    mean_pool_rows(frames)
}

/// An activity phrase with its frozen prompt embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabEntry {
    pub phrase: ActivityPhrase,
    pub embedding: Vec<f64>,
}

/// Embeds each phrase through its prompt.
pub fn embed_vocabulary(
    phrases: Vec<ActivityPhrase>,
    encoder: &dyn Encoder,
) -> Result<Vec<VocabEntry>> {
    phrases
        .into_iter()
        .map(|phrase| {
            let embedding = encoder.encode_prompt(&build_prompt(&[&phrase.text])?)?;
            Ok(VocabEntry { phrase, embedding })
        })
        .collect()
}

/// Cosine score of every vocabulary entry against `e`.
pub fn score_vocab(e: &[f64], vocab: &[VocabEntry]) -> Result<Vec<f64>> {
    vocab
        .iter()
        .map(|v| cosine_similarity(e, &v.embedding))
        .collect()
}

/// Descending score, then ascending phrase, then ascending position.
fn rank_order(scores: &[f64], vocab: &[VocabEntry], a: usize, b: usize) -> Ordering {
    scores[b]
        .total_cmp(&scores[a])
        .then_with(|| vocab[a].phrase.text.cmp(&vocab[b].phrase.text))
        .then_with(|| a.cmp(&b))
}

/// The `min(κ, U)` phrases most similar to `e`.
pub fn top_k_vocab(e: &[f64], vocab: &[VocabEntry], kappa: usize) -> Result<Vec<String>> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocab);
    }
    if kappa == 0 {
        return Err(Error::InvalidConfig("kappa must be at least 1".into()));
    }
    let scores = score_vocab(e, vocab)?;
    let mut idx: Vec<usize> = (0..vocab.len()).collect();
    let k = kappa.min(vocab.len());
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(&scores, vocab, a, b));
        idx.truncate(k);
    }
    idx.sort_by(|&a, &b| rank_order(&scores, vocab, a, b));
    Ok(idx
        .into_iter()
        .map(|i| vocab[i].phrase.text.clone())
        .collect())
}

/// Per-video top-κ phrase lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentDictionary {
    kappa: usize,
    vocab_size: usize,
    dim: usize,
    source: String,
    entries: Vec<(String, Vec<String>)>,
}

/// Where the vocabulary comes from when building a dictionary.
#[derive(Debug, Clone, Copy, Default)]
pub struct VcdOptions<'a> {
    /// Mine phrases from this dataset instead of the one being indexed.
    pub vocab_dataset: Option<&'a Dataset>,
    /// Use pre-extracted phrases instead of the rule-based extractor.
    pub sidecar: Option<&'a PhraseSidecar>,
}

pub fn build_dictionary(
    dataset: &Dataset,
    encoder: &dyn Encoder,
    kappa: usize,
) -> Result<ContentDictionary> {
    build_dictionary_with(dataset, encoder, kappa, VcdOptions::default())
}

pub fn build_dictionary_with(
    dataset: &Dataset,
    encoder: &dyn Encoder,
    kappa: usize,
    options: VcdOptions<'_>,
) -> Result<ContentDictionary> {
    let videos = dataset
        .videos()
        .iter()
        .map(|v| encoder.encode_video(v))
        .collect::<Result<Vec<_>>>()?;
    let source = options.vocab_dataset.unwrap_or(dataset);
    let captions = source
        .captions()
        .iter()
        .map(|c| (c.id.as_str(), c.text.as_str()));
    let phrases = match options.sidecar {
        Some(s) => s.activities(captions),
        None => extract_activities(captions),
    };
    let vocab = embed_vocabulary(phrases, encoder)?;
    dictionary_from_features(&videos, &vocab, kappa, source.name(), encoder.dim())
}

/// Dictionary over already-encoded videos and an embedded vocabulary.
pub fn dictionary_from_features(
    videos: &[VideoFeatures],
    vocab: &[VocabEntry],
    kappa: usize,
    source: &str,
    dim: usize,
) -> Result<ContentDictionary> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocab);
    }
    if videos.is_empty() {
        return Err(Error::EmptyInput("dictionary needs at least one video"));
    }
    let entries = videos
        .iter()
        .map(|v| {
            let e = global_video_embedding(&v.frames)?;
            Ok((v.video_id.clone(), top_k_vocab(&e, vocab, kappa)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ContentDictionary::new(kappa, vocab.len(), dim, source, entries)
}

impl ContentDictionary {
    pub fn new(
        kappa: usize,
        vocab_size: usize,
        dim: usize,
        source: impl Into<String>,
        entries: Vec<(String, Vec<String>)>,
    ) -> Result<Self> {
        let source = source.into();
        if kappa == 0 || vocab_size == 0 {
            return Err(Error::EmptyVocab);
        }
        if source.is_empty() || source.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "bad dictionary source name `{source}`"
            )));
        }
        let expected = kappa.min(vocab_size);
        for (id, phrases) in &entries {
            if id.is_empty() || id.contains(['\t', '\n']) {
                return Err(Error::InvalidConfig(format!("bad video id `{id}`")));
            }
            if phrases.len() != expected {
                return Err(Error::dims(
                    format!("{expected} phrases for `{id}`"),
                    phrases.len(),
                ));
            }
            for (i, p) in phrases.iter().enumerate() {
                if p.is_empty() || p.contains(['\t', '\n']) {
                    return Err(Error::EmptyPhrase);
                }
                if phrases[..i].contains(p) {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate phrase `{p}` for `{id}`"
                    )));
                }
            }
        }
        Ok(Self {
            kappa,
            vocab_size,
            dim,
            source,
            entries,
        })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, video_id: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(id, _)| id == video_id)
            .map(|(_, p)| p.as_slice())
    }

    /// One prompt per video, in entry order.
    pub fn prompts(&self) -> Result<Vec<String>> {
        self.entries.iter().map(|(_, p)| build_prompt(p)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "#vcd v1 kappa={} dim={} source={} vocab={}\n",
            self.kappa, self.dim, self.source, self.vocab_size
        );
        for (id, phrases) in &self.entries {
            let _ = write!(out, "{id}\t{}", phrases.len());
            for p in phrases {
                out.push('\t');
                out.push_str(p);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 6 || fields[0] != "#vcd" || fields[1] != "v1" {
            return Err(Error::parse(1, format!("bad dictionary header `{header}`")));
        }
        let value = |i: usize, key: &str| {
            fields[i]
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .ok_or_else(|| Error::parse(1, format!("expected `{key}=` in header")))
        };
        let number = |i: usize, key: &str| -> Result<usize> {
            value(i, key)?
                .parse()
                .map_err(|e| Error::parse(1, format!("bad {key}: {e}")))
        };
        let kappa = number(2, "kappa")?;
        let dim = number(3, "dim")?;
        let source = value(4, "source")?.to_owned();
        let vocab_size = number(5, "vocab")?;

        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let mut parts = line.split('\t');
            let id = parts.next().unwrap_or_default().to_owned();
            let k: usize = parts
                .next()
                .ok_or_else(|| Error::parse(line_no, "missing phrase count"))?
                .parse()
                .map_err(|e| Error::parse(line_no, format!("bad phrase count: {e}")))?;
            let phrases: Vec<String> = parts.map(str::to_owned).collect();
            if phrases.len() != k {
                return Err(Error::parse(
                    line_no,
                    format!("declared {k} phrases, found {}", phrases.len()),
                ));
            }
            entries.push((id, phrases));
        }
        Self::new(kappa, vocab_size, dim, source, entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::ToyEncoder;
    use crate::ingest::{
        generate_synthetic, Caption, Split, SyntheticConfig, VideoEntry, VideoSource,
    };
    use proptest::prelude::*;

    fn entry(text: &str, embedding: Vec<f64>) -> VocabEntry {
        VocabEntry {
            phrase: ActivityPhrase {
                text: text.into(),
                source_caption_id: "c".into(),
            },
            embedding,
        }
    }

    /// Vocab whose cosine score against `[1, 0]` is exactly `s` for each entry.
    fn scored(items: &[(&str, f64)]) -> Vec<VocabEntry> {
        items
            .iter()
            .map(|&(t, s)| entry(t, vec![s, (1.0 - s * s).sqrt()]))
            .collect()
    }

    #[test]
    fn prompts() {
        assert_eq!(
            build_prompt(&["cooking pasta"]).unwrap(),
            "This is a video about cooking pasta"
        );
        assert_eq!(
            build_prompt(&["running", "jumping"]).unwrap(),
            "This is a video about running, jumping"
        );
        assert!(matches!(build_prompt(&[""]), Err(Error::EmptyPhrase)));
        assert!(matches!(build_prompt::<&str>(&[]), Err(Error::EmptyPhrase)));
    }

    #[test]
    fn global_embedding() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(global_video_embedding(&m).unwrap(), vec![0.5, 0.5]);
        let same = Matrix::from_rows(&[[0.3, -2.0], [0.3, -2.0]]).unwrap();
        assert_eq!(global_video_embedding(&same).unwrap(), vec![0.3, -2.0]);
        let flipped = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(global_video_embedding(&flipped).unwrap(), vec![0.5, 0.5]);
        assert!(global_video_embedding(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn top_k_order_and_clipping() {
        let e = [1.0, 0.0];
        let v = scored(&[("a", 0.9), ("b", 0.5), ("c", 0.7)]);
        assert_eq!(top_k_vocab(&e, &v, 2).unwrap(), vec!["a", "c"]);
        assert_eq!(top_k_vocab(&e, &v, 10).unwrap().len(), 3);
        let tie = scored(&[("y", 0.8), ("x", 0.8)]);
        assert_eq!(top_k_vocab(&e, &tie, 2).unwrap(), vec!["x", "y"]);
        assert!(matches!(top_k_vocab(&e, &[], 2), Err(Error::EmptyVocab)));
    }

    #[test]
    fn single_caption_dictionary() {
        let ds = Dataset::new(
            "one",
            Split::Train,
            vec![VideoEntry {
                id: "v".into(),
                source: VideoSource::Frames(vec!["dog barking".into()]),
            }],
            vec![Caption {
                id: "c".into(),
                video_id: "v".into(),
                annotator: None,
                text: "a dog is barking loudly".into(),
            }],
        )
        .unwrap();
        let enc = ToyEncoder::new(16, 0).unwrap();
        let d = build_dictionary(&ds, &enc, DEFAULT_KAPPA).unwrap();
        assert_eq!(d.get("v").unwrap(), ["barking loudly"]);
        assert_eq!(d.vocab_size(), 1);
    }

    #[test]
    fn empty_vocab_fails_fast() {
        let ds = Dataset::new(
            "none",
            Split::Train,
            vec![VideoEntry {
                id: "v".into(),
                source: VideoSource::Frames(vec!["x".into()]),
            }],
            vec![Caption {
                id: "c".into(),
                video_id: "v".into(),
                annotator: None,
                text: "hello world".into(),
            }],
        )
        .unwrap();
        let enc = ToyEncoder::new(8, 0).unwrap();
        assert!(matches!(
            build_dictionary(&ds, &enc, 5),
            Err(Error::EmptyVocab)
        ));
    }

    #[test]
    fn persistence_round_trips_and_is_deterministic() {
        let ds = generate_synthetic(&SyntheticConfig {
            n_videos: 12,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let enc = ToyEncoder::new(16, 3).unwrap();
        let d = build_dictionary(&ds, &enc, 5).unwrap();
        let text = d.to_text();
        assert!(text.starts_with("#vcd v1 kappa=5 dim=16 source=synthetic"));
        let back = ContentDictionary::parse(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_text(), text);
        assert_eq!(build_dictionary(&ds, &enc, 5).unwrap().to_text(), text);
        for (_, p) in d.entries() {
            assert_eq!(p.len(), 5);
        }
    }

    #[test]
    fn vocab_from_other_dataset_keeps_schema() {
        let ds = generate_synthetic(&SyntheticConfig {
            n_videos: 6,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let other = generate_synthetic(&SyntheticConfig {
            n_videos: 6,
            seed: 99,
            name: "other".into(),
            ..SyntheticConfig::default()
        })
        .unwrap();
        let enc = ToyEncoder::new(16, 3).unwrap();
        let a = build_dictionary(&ds, &enc, 3).unwrap();
        let opts = VcdOptions {
            vocab_dataset: Some(&other),
            ..VcdOptions::default()
        };
        let b = build_dictionary_with(&ds, &enc, 3, opts).unwrap();
        assert_eq!(b.source(), "other");
        let ids =
            |d: &ContentDictionary| d.entries().iter().map(|e| e.0.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_eq!(a.kappa(), b.kappa());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(ContentDictionary::parse("").is_err());
        assert!(ContentDictionary::parse("#vcd v2 kappa=1 dim=2 source=s vocab=1\n").is_err());
        let bad_count = "#vcd v1 kappa=1 dim=2 source=s vocab=1\nv\t2\tx\n";
        assert!(ContentDictionary::parse(bad_count).is_err());
        let ok = "#vcd v1 kappa=1 dim=2 source=s vocab=1\nv\t1\tx\n";
        assert_eq!(ContentDictionary::parse(ok).unwrap().to_text(), ok);
    }

    fn brute_force(e: &[f64], vocab: &[VocabEntry], k: usize) -> Vec<String> {
        let mut all: Vec<(f64, &str, usize)> = vocab
            .iter()
            .enumerate()
            .map(|(i, v)| {
                (
                    cosine_similarity(e, &v.embedding).unwrap(),
                    v.phrase.text.as_str(),
                    i,
                )
            })
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
        all.into_iter().take(k).map(|t| t.1.to_owned()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn top_k_matches_full_sort(
            raw in prop::collection::vec(
                ("[a-e]{1,2}", prop::collection::vec(-3i8..=3, 3)), 1..50),
            e in prop::collection::vec(-3i8..=3, 3),
            k in 1usize..=10,
        ) {
            // small integer grids make ties common
            let e: Vec<f64> = e.iter().map(|&x| f64::from(x) + 0.5).collect();
            let vocab: Vec<VocabEntry> = raw
                .iter()
                .map(|(t, v)| entry(t, v.iter().map(|&x| f64::from(x) + 0.25).collect()))
                .collect();
            let got = top_k_vocab(&e, &vocab, k).unwrap();
            prop_assert_eq!(got, brute_force(&e, &vocab, k));
        }

        #[test]
        fn smaller_kappa_is_prefix(
            embs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..30),
            k1 in 1usize..8,
            extra in 0usize..8,
        ) {
            let vocab: Vec<VocabEntry> = embs
                .iter()
                .enumerate()
                .map(|(i, v)| entry(&format!("p{i}"), v.iter().map(|x| x + 1e-3).collect()))
                .collect();
            let e = [0.3, -0.2, 0.9, 0.1];
            let a = top_k_vocab(&e, &vocab, k1).unwrap();
            let b = top_k_vocab(&e, &vocab, k1 + extra).unwrap();
            prop_assert_eq!(&b[..a.len()], &a[..]);
        }

        #[test]
        fn scaling_frames_keeps_list(alpha in 0.01f64..100.0) {
            let ds = generate_synthetic(&SyntheticConfig { n_videos: 4, ..SyntheticConfig::default() }).unwrap();
            let enc = ToyEncoder::new(8, 1).unwrap();
            let captions = ds.captions().iter().map(|c| (c.id.as_str(), c.text.as_str()));
            let vocab = embed_vocabulary(extract_activities(captions), &enc).unwrap();
            let f = enc.encode_video(&ds.videos()[0]).unwrap();
            let e = global_video_embedding(&f.frames).unwrap();
            let scaled: Vec<f64> = e.iter().map(|x| x * alpha).collect();
            prop_assert_eq!(top_k_vocab(&e, &vocab, 5).unwrap(), top_k_vocab(&scaled, &vocab, 5).unwrap());
        }
    }
}
