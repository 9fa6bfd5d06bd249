//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waver_core::distill::KnowledgeCorpus;
use waver_core::numerics::Matrix;
use waver_core::train::{Model, ModelConfig, Optimizer, OptimizerConfig, TrainingData};
use waver_core::vcd::{ActivityPhrase, VocabEntry};

pub fn random_matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `l × dim` corpus with the default scaling.
pub fn corpus(l: usize, dim: usize) -> KnowledgeCorpus {
    let ids = (0..l).map(|i| format!("v{i}")).collect();
    KnowledgeCorpus::new(random_matrix(1, l, dim), ids, 64.0).expect("valid corpus")
}

pub fn vocab(u: usize, dim: usize) -> Vec<VocabEntry> {
    let m = random_matrix(2, u, dim);
    (0..u)
        .map(|i| VocabEntry {
            phrase: ActivityPhrase {
                text: format!("phrase {i}"),
                source_caption_id: format!("c{i}"),
            },
            embedding: m.row(i).to_vec(),
        })
        .collect()
}

/// Model, optimizer and `n` aligned text/video pairs.
pub fn training_state(n: usize, dim: usize) -> (Model, Optimizer, TrainingData) {
    let model = Model::new(ModelConfig::new(dim)).expect("valid model");
    let optimizer =
        Optimizer::new(OptimizerConfig::default(), model.params()).expect("valid optimizer");
    let data = TrainingData::new(
        random_matrix(3, n, dim),
        random_matrix(4, n, dim),
        (0..n).map(|i| (i, i)).collect(),
    )
    .expect("valid data");
    (model, optimizer, data)
}
