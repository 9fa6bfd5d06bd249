//! Dataset manifests, synthetic corpora and the binary tensor container.

mod dataset;
mod synthetic;
mod tensor_file;

pub use dataset::{Caption, Dataset, Split, VideoEntry, VideoSource};
pub use synthetic::{
    bank_phrase, generate_synthetic, SyntheticConfig, MAX_STYLES, OBJECTS, PHRASE_BANK_SIZE, VERBS,
};
pub use tensor_file::{
    decode_tensors, encode_tensors, read_tensor_file, write_tensor_file, write_tensors, TensorBlob,
};
