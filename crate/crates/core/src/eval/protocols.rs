use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::metrics::{
    compute_metrics, rank_targets, rows_csv, summarize, table, RetrievalReport, StdKind,
};
use crate::distill::KnowledgeCorpus;
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::numerics::Matrix;
use crate::pipeline::{fit, PipelineConfig};
use crate::rng::Lcg64;
use crate::train::{HeadKind, Model, TrainingData};
use crate::vcd::ContentDictionary;

/// Frozen snapshot of projected gallery videos and caption queries.
#[derive(Debug, Clone)]
pub struct Retriever {
    videos: Matrix,
    queries: Matrix,
    targets: Vec<usize>,
    caption_ids: Vec<String>,
    video_ids: Vec<String>,
    caption_index: HashMap<String, usize>,
    groups: Vec<Vec<usize>>,
}

impl Retriever {
    pub fn new(
        model: &Model,
        encoder: &dyn Encoder,
        corpus: &KnowledgeCorpus,
        dataset: &Dataset,
    ) -> Result<Self> {
        let data = TrainingData::prepare(dataset, encoder, corpus)?;
        Self::from_embeddings(
            model.project(HeadKind::Video, &data.videos)?,
            model.project(HeadKind::Text, &data.texts)?,
            dataset,
        )
    }

    /// Snapshot from already projected rows, aligned with `dataset`.
    pub fn from_embeddings(videos: Matrix, queries: Matrix, dataset: &Dataset) -> Result<Self> {
        if videos.rows() != dataset.videos().len() || queries.rows() != dataset.captions().len() {
            return Err(Error::dims(
                format!(
                    "{} videos and {} captions",
                    dataset.videos().len(),
                    dataset.captions().len()
                ),
                format!("{} and {} rows", videos.rows(), queries.rows()),
            ));
        }
        if videos.cols() != queries.cols() {
            return Err(Error::dims(videos.cols(), queries.cols()));
        }
        let caption_ids: Vec<String> = dataset.captions().iter().map(|c| c.id.clone()).collect();
        let caption_index = caption_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Self {
            videos,
            queries,
            targets: dataset.caption_targets(),
            caption_ids,
            video_ids: dataset.videos().iter().map(|v| v.id.clone()).collect(),
            caption_index,
            groups: dataset.captions_by_video(),
        })
    }

    pub fn n_videos(&self) -> usize {
        self.videos.rows()
    }

    pub fn n_captions(&self) -> usize {
        self.queries.rows()
    }

    pub fn caption_ids(&self) -> &[String] {
        &self.caption_ids
    }

    /// Caption indices grouped by video.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Query-by-gallery cosine similarities for the chosen captions.
    pub fn similarity(&self, captions: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = captions.iter().find(|&&c| c >= self.n_captions()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.n_captions(),
            });
        }
        self.queries.select_rows(captions).matmul_t(&self.videos)
    }

    pub fn ranks(&self, captions: &[usize]) -> Result<Vec<usize>> {
        let truth: Vec<usize> = captions.iter().map(|&c| self.targets[c]).collect();
        rank_targets(&self.similarity(captions)?, &truth)
    }

    pub fn evaluate(&self, captions: &[usize]) -> Result<RetrievalReport> {
        compute_metrics(&self.ranks(captions)?)
    }
}

/// Every caption is a query against the whole gallery.
pub fn multi_caption_eval(retriever: &Retriever) -> Result<RetrievalReport> {
    let all: Vec<usize> = (0..retriever.n_captions()).collect();
    retriever.evaluate(&all)
}

/// One caption per video, drawn by a generator keyed on `(seed, video index)`.
pub fn style_selection(groups: &[Vec<usize>], seed: u64) -> Result<Vec<usize>> {
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if g.is_empty() {
                return Err(Error::EmptyInput("video without captions"));
            }
            Ok(g[Lcg64::keyed(seed, i as u64).below(g.len())])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleRobustnessReport {
    pub per_seed: Vec<RetrievalReport>,
    pub mean: RetrievalReport,
    pub std: RetrievalReport,
}

impl StyleRobustnessReport {
    fn rows(&self) -> Vec<(String, RetrievalReport)> {
        let mut rows: Vec<(String, RetrievalReport)> = self
            .per_seed
            .iter()
            .map(|r| {
                (
                    r.seed.map_or_else(String::new, |s| s.to_string()),
                    r.clone(),
                )
            })
            .collect();
        rows.push(("mean".into(), self.mean.clone()));
        rows.push(("std".into(), self.std.clone()));
        rows
    }

    pub fn to_csv(&self) -> String {
        rows_csv("seed", &self.rows())
    }

    pub fn to_table(&self) -> String {
        table(&["seed", "R@1", "R@5", "R@10", "MdR", "MnR"], &self.rows())
    }
}

pub fn style_eval(
    retriever: &Retriever,
    seeds: &[u64],
    std_kind: StdKind,
) -> Result<StyleRobustnessReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "style evaluation needs at least one seed".into(),
        ));
    }
    let per_seed = seeds
        .iter()
        .map(|&seed| {
            let picks = style_selection(retriever.groups(), seed)?;
            let mut r = retriever.evaluate(&picks)?;
            r.seed = Some(seed);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = summarize(&per_seed, std_kind)?;
    Ok(StyleRobustnessReport {
        per_seed,
        mean,
        std,
    })
}

/// Annotator → video id → caption id.
pub type AnnotatorSelections = BTreeMap<String, BTreeMap<String, String>>;

/// Selections implied by caption annotator labels.
///
/// An annotator is kept only when they captioned every video; their first
/// caption per video is used.
pub fn annotator_selections(dataset: &Dataset) -> AnnotatorSelections {
    let mut all: AnnotatorSelections = BTreeMap::new();
    for c in dataset.captions() {
        if let Some(a) = &c.annotator {
            all.entry(a.clone())
                .or_default()
                .entry(c.video_id.clone())
                .or_insert_with(|| c.id.clone());
        }
    }
    all.retain(|_, picks| picks.len() == dataset.videos().len());
    all
}

pub fn annotator_split_eval(
    retriever: &Retriever,
    selections: &AnnotatorSelections,
) -> Result<Vec<(String, RetrievalReport)>> {
    if selections.is_empty() {
        return Err(Error::InvalidConfig(
            "no annotator covers every video".into(),
        ));
    }
    selections
        .iter()
        .map(|(annotator, picks)| {
            if picks.len() != retriever.n_videos() {
                return Err(Error::InvalidConfig(format!(
                    "annotator `{annotator}` selects {} captions for {} videos",
                    picks.len(),
                    retriever.n_videos()
                )));
            }
            let mut chosen = Vec::with_capacity(picks.len());
            for (video, caption) in picks {
                let &ci = retriever
                    .caption_index
                    .get(caption)
                    .ok_or_else(|| Error::UnknownCaption(caption.clone()))?;
                if retriever.video_ids[retriever.targets[ci]] != *video {
                    return Err(Error::UnknownCaption(format!(
                        "{caption} (not a caption of `{video}`)"
                    )));
                }
                chosen.push(ci);
            }
            Ok((annotator.clone(), retriever.evaluate(&chosen)?))
        })
        .collect()
}

pub fn annotator_csv(rows: &[(String, RetrievalReport)]) -> String {
    rows_csv("annotator", rows)
}

#[derive(Debug, Clone)]
pub struct KappaRow {
    pub kappa: usize,
    pub report: RetrievalReport,
    pub dictionary: ContentDictionary,
}

/// Rebuilds dictionary and corpus per κ, retrains with the same seed and
/// evaluates every caption of `eval_set`.
pub fn kappa_sweep(
    train_set: &Dataset,
    eval_set: &Dataset,
    encoder: &dyn Encoder,
    base: &PipelineConfig,
    kappas: &[usize],
) -> Result<Vec<KappaRow>> {
    if kappas.is_empty() {
        return Err(Error::InvalidConfig("kappa list is empty".into()));
    }
    if kappas.contains(&0) {
        return Err(Error::InvalidConfig("kappa must be at least 1".into()));
    }
    kappas
        .iter()
        .map(|&kappa| {
            let cfg = PipelineConfig {
                kappa,
                ..base.clone()
            };
            let fitted = fit(train_set, encoder, &cfg)?;
            let retriever = Retriever::new(&fitted.model, encoder, &fitted.corpus, eval_set)?;
            Ok(KappaRow {
                kappa,
                report: multi_caption_eval(&retriever)?,
                dictionary: fitted.dictionary,
            })
        })
        .collect()
}

pub fn kappa_csv(rows: &[KappaRow]) -> String {
    rows_csv("kappa", &kappa_rows(rows))
}

pub fn kappa_table(rows: &[KappaRow]) -> String {
    table(
        &["kappa", "R@1", "R@5", "R@10", "MdR", "MnR"],
        &kappa_rows(rows),
    )
}

fn kappa_rows(rows: &[KappaRow]) -> Vec<(String, RetrievalReport)> {
    rows.iter()
        .map(|r| (r.kappa.to_string(), r.report.clone()))
        .collect()
}

/// Human-readable block for one named report.
pub fn describe(title: &str, report: &RetrievalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title} ({} queries)", report.n_queries);
    out.push_str(&report.to_table());
    out
}
