//! Video content dictionary: mined activity phrases, scored per video.

mod dictionary;
mod extract;

pub use dictionary::{
    build_dictionary, build_dictionary_with, build_prompt, dictionary_from_features,
    embed_vocabulary, global_video_embedding, score_vocab, top_k_vocab, ContentDictionary,
    VcdOptions, VocabEntry, DEFAULT_KAPPA,
};
pub use extract::{
    extract_activities, extract_phrases, normalize_phrase, ActivityPhrase, PhraseSidecar,
};
