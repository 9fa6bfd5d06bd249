//! Seeded synthetic caption corpora.
//!
//! Each video is assigned a latent activity (a gerund plus an object) from a
//! bank of 128 phrases. Its frames are short textual descriptors of that
//! activity and its captions are templated paraphrases. The number of style
//! templates in play controls how much the captions of one video differ:
//! with one style every caption is the same canonical sentence, with more
//! styles the templates, subjects, determiners, adverbs and places vary.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Caption, Dataset, Split, VideoEntry, VideoSource};
use crate::error::{Error, Result};
use crate::rng::SeedStreams;

pub const VERBS: [&str; 16] = [
    "carrying",
    "cleaning",
    "painting",
    "throwing",
    "pushing",
    "pulling",
    "washing",
    "fixing",
    "lifting",
    "kicking",
    "dropping",
    "opening",
    "catching",
    "folding",
    "stacking",
    "repairing",
];

pub const OBJECTS: [&str; 8] = [
    "box", "ball", "chair", "bucket", "bike", "ladder", "basket", "door",
];

/// Size of the latent phrase bank (`VERBS × OBJECTS`).
pub const PHRASE_BANK_SIZE: usize = VERBS.len() * OBJECTS.len();

/// Number of distinct caption templates.
pub const MAX_STYLES: usize = 8;

const SUBJECTS: [&str; 8] = [
    "a person",
    "a man",
    "a woman",
    "someone",
    "a kid",
    "a guy",
    "a girl",
    "an old man",
];
const DETERMINERS: [&str; 2] = ["a", "the"];
const ADVERBS: [&str; 4] = ["slowly", "quickly", "carefully", "happily"];
const PLACES: [&str; 4] = ["in a room", "at home", "near a wall", "on a street"];
const SCENES: [&str; 6] = [
    "indoors", "outdoors", "closeup", "daylight", "night", "blurry",
];

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_videos: usize,
    pub captions_per_video: usize,
    /// Caption templates in play, `1..=MAX_STYLES`.
    pub style_variants: usize,
    pub frames_per_video: usize,
    pub name: String,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 16,
            n_videos: 64,
            captions_per_video: 5,
            style_variants: 4,
            frames_per_video: 8,
            name: "synthetic".into(),
        }
    }
}

/// `(verb, object)` for bank slot `i`.
pub fn bank_phrase(i: usize) -> (&'static str, &'static str) {
    let i = i % PHRASE_BANK_SIZE;
    (VERBS[i / OBJECTS.len()], OBJECTS[i % OBJECTS.len()])
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    if config.n_videos < 2 {
        return Err(Error::InvalidConfig(
            "synthetic dataset needs at least 2 videos".into(),
        ));
    }
    if config.captions_per_video == 0 {
        return Err(Error::InvalidConfig(
            "captions per video must be at least 1".into(),
        ));
    }
    if !(1..=MAX_STYLES).contains(&config.style_variants) {
        return Err(Error::InvalidConfig(format!(
            "style variants must be in 1..={MAX_STYLES}, got {}",
            config.style_variants
        )));
    }
    if config.frames_per_video == 0 {
        return Err(Error::InvalidConfig(
            "frames per video must be at least 1".into(),
        ));
    }

    let mut rng = SeedStreams::new(config.seed).rng(SeedStreams::SYNTHETIC);
    let mut bank: Vec<usize> = (0..PHRASE_BANK_SIZE).collect();
    bank.shuffle(&mut rng);

    let width = config.n_videos.to_string().len().max(4);
    let mut videos = Vec::with_capacity(config.n_videos);
    let mut captions = Vec::with_capacity(config.n_videos * config.captions_per_video);
    for i in 0..config.n_videos {
        let (verb, object) = bank_phrase(bank[i % PHRASE_BANK_SIZE]);
        let id = format!("video{i:0width$}");
        let frames = (0..config.frames_per_video)
            .map(|_| format!("{verb} {object} {}", pick(&mut rng, &SCENES)))
            .collect();
        for j in 0..config.captions_per_video {
            captions.push(Caption {
                id: format!("{id}#{j}"),
                video_id: id.clone(),
                annotator: Some(format!("a{j}")),
                text: caption_text(&mut rng, config.style_variants, verb, object),
            });
        }
        videos.push(VideoEntry {
            id,
            source: VideoSource::Frames(frames),
        });
    }
    Dataset::new(config.name.clone(), Split::Train, videos, captions)
}

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

fn caption_text(rng: &mut ChaCha8Rng, styles: usize, verb: &str, object: &str) -> String {
    if styles == 1 {
        return format!("a person is {verb} a {object}");
    }
    let style = rng.random_range(0..styles);
    let subj = pick(rng, &SUBJECTS);
    let det = pick(rng, &DETERMINERS);
    match style {
        0 => format!("{subj} is {verb} {det} {object}"),
        1 => format!("{subj} is {verb} {det} {object} {}", pick(rng, &PLACES)),
        2 => format!("{subj} is {} {verb} {det} {object}", pick(rng, &ADVERBS)),
        3 => format!("there is {subj} {verb} {det} {object}"),
        4 => format!("a video of {subj} {verb} {det} {object}"),
        5 => format!("{subj} keeps {verb} {det} {object} {}", pick(rng, &ADVERBS)),
        6 => format!("in this clip {subj} is {verb} {det} {object}"),
        _ => format!("{det} {object}, {subj} is {verb} it"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn deterministic_per_seed() {
        let cfg = SyntheticConfig::default();
        let a = generate_synthetic(&cfg).unwrap().to_manifest();
        let b = generate_synthetic(&cfg).unwrap().to_manifest();
        assert_eq!(a, b);
        let other = generate_synthetic(&SyntheticConfig { seed: 17, ..cfg }).unwrap();
        assert_ne!(a, other.to_manifest());
    }

    #[test]
    fn latent_phrases_are_distinct_up_to_bank_size() {
        // pigeonhole: 128 slots, each visited once by the shuffled bank
        let d = generate_synthetic(&SyntheticConfig {
            n_videos: PHRASE_BANK_SIZE,
            captions_per_video: 1,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let latent: HashSet<String> = d
            .videos()
            .iter()
            .map(|v| match &v.source {
                VideoSource::Frames(f) => f[0].rsplit_once(' ').unwrap().0.to_owned(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(latent.len(), PHRASE_BANK_SIZE);
        let bank: HashSet<(&str, &str)> = (0..PHRASE_BANK_SIZE).map(bank_phrase).collect();
        assert_eq!(bank.len(), PHRASE_BANK_SIZE);
    }

    #[test]
    fn single_style_means_identical_captions() {
        let d = generate_synthetic(&SyntheticConfig {
            style_variants: 1,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for group in d.captions_by_video() {
            let texts: HashSet<&str> = group
                .iter()
                .map(|&c| d.captions()[c].text.as_str())
                .collect();
            assert_eq!(texts.len(), 1);
        }
    }

    #[test]
    fn one_caption_per_video() {
        let d = generate_synthetic(&SyntheticConfig {
            captions_per_video: 1,
            ..SyntheticConfig::default()
        })
        .unwrap();
        assert_eq!(d.captions().len(), d.videos().len());
    }

    #[test]
    fn invalid_configs() {
        let base = SyntheticConfig::default();
        for cfg in [
            SyntheticConfig {
                n_videos: 1,
                ..base.clone()
            },
            SyntheticConfig {
                captions_per_video: 0,
                ..base.clone()
            },
            SyntheticConfig {
                style_variants: 0,
                ..base.clone()
            },
            SyntheticConfig {
                style_variants: MAX_STYLES + 1,
                ..base.clone()
            },
            SyntheticConfig {
                frames_per_video: 0,
                ..base.clone()
            },
        ] {
            assert!(matches!(
                generate_synthetic(&cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn annotators_pick_one_caption_per_video() {
        let d = generate_synthetic(&SyntheticConfig::default()).unwrap();
        let a0 = d
            .captions()
            .iter()
            .filter(|c| c.annotator.as_deref() == Some("a0"))
            .count();
        assert_eq!(a0, d.videos().len());
    }
}
