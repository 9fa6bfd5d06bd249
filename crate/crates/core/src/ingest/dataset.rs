//! Caption/video manifests.
//!
//! One UTF-8 file per split. The first line is a header, then one tagged,
//! tab-separated record per line:
//!
//! ```text
//! #waver-dataset v1 name=<name> split=<train|val|test>
//! video    <video-id>  <feature-file or ->  <n-frames>
//! frame    <video-id>  <descriptor>
//! caption  <caption-id>  <video-id>  <annotator-id or ->  <text>
//! ```
//!
//! `frame` records carry textual frame descriptors for the toy encoder and
//! appear in frame order. A video with a feature file has no `frame` records;
//! its frames live in a `WVTR` container (blob named after the video id),
//! resolved relative to the manifest's directory.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const HEADER_PREFIX: &str = "#waver-dataset v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VideoSource {
    /// Textual frame descriptors, embedded by the toy encoder.
    Frames(Vec<String>),
    /// Precomputed `N × D` frame embeddings in a tensor file.
    FeatureFile { path: String, n_frames: usize },
}

impl VideoSource {
    pub fn n_frames(&self) -> usize {
        match self {
            VideoSource::Frames(f) => f.len(),
            VideoSource::FeatureFile { n_frames, .. } => *n_frames,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoEntry {
    pub id: String,
    pub source: VideoSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Caption {
    pub id: String,
    pub video_id: String,
    pub annotator: Option<String>,
    pub text: String,
}

/// Videos and their captions for one split, with referential integrity
/// checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    split: Split,
    videos: Vec<VideoEntry>,
    captions: Vec<Caption>,
    video_index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        videos: Vec<VideoEntry>,
        captions: Vec<Caption>,
    ) -> Result<Self> {
        let name = name.into();
        check_field("dataset name", &name, true)?;
        let mut video_index = HashMap::with_capacity(videos.len());
        for (i, v) in videos.iter().enumerate() {
            check_field("video id", &v.id, true)?;
            if video_index.insert(v.id.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "duplicate video id `{}`",
                    v.id
                )));
            }
            match &v.source {
                VideoSource::Frames(frames) => {
                    if frames.is_empty() {
                        return Err(Error::InvalidConfig(format!(
                            "video `{}` has no frames",
                            v.id
                        )));
                    }
                    for f in frames {
                        check_field("frame descriptor", f, false)?;
                    }
                }
                VideoSource::FeatureFile { path, n_frames } => {
                    check_field("feature file", path, true)?;
                    if *n_frames == 0 {
                        return Err(Error::InvalidConfig(format!(
                            "video `{}` has no frames",
                            v.id
                        )));
                    }
                }
            }
        }
        let mut seen = HashSet::with_capacity(captions.len());
        let mut covered = vec![false; videos.len()];
        for c in &captions {
            check_field("caption id", &c.id, true)?;
            check_field("caption text", &c.text, false)?;
            if let Some(a) = &c.annotator {
                check_field("annotator id", a, true)?;
                if a == "-" {
                    return Err(Error::InvalidConfig("annotator id `-` is reserved".into()));
                }
            }
            if !seen.insert(c.id.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate caption id `{}`",
                    c.id
                )));
            }
            let Some(&vi) = video_index.get(&c.video_id) else {
                return Err(Error::DanglingReference(c.video_id.clone()));
            };
            covered[vi] = true;
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidConfig(format!(
                "video `{}` has no caption",
                videos[i].id
            )));
        }
        Ok(Self {
            name,
            split,
            videos,
            captions,
            video_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn videos(&self) -> &[VideoEntry] {
        &self.videos
    }

    pub fn captions(&self) -> &[Caption] {
        &self.captions
    }

    pub fn video_position(&self, id: &str) -> Option<usize> {
        self.video_index.get(id).copied()
    }

    /// Gallery index of the video each caption describes.
    pub fn caption_targets(&self) -> Vec<usize> {
        self.captions
            .iter()
            .map(|c| self.video_index[&c.video_id])
            .collect()
    }

    /// Caption indices grouped by video, in caption order.
    pub fn captions_by_video(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.videos.len()];
        for (ci, c) in self.captions.iter().enumerate() {
            groups[self.video_index[&c.video_id]].push(ci);
        }
        groups
    }

    /// Keeps the first `videos.len() - n_holdout` videos here and moves the
    /// rest (with their captions) into a `test` split.
    pub fn split_holdout(&self, n_holdout: usize) -> Result<(Dataset, Dataset)> {
        if n_holdout == 0 || n_holdout >= self.videos.len() {
            return Err(Error::InvalidConfig(format!(
                "holdout of {n_holdout} from {} videos leaves an empty split",
                self.videos.len()
            )));
        }
        let cut = self.videos.len() - n_holdout;
        let (train_v, test_v) = self.videos.split_at(cut);
        let is_train = |c: &&Caption| self.video_index[&c.video_id] < cut;
        let train_c = self.captions.iter().filter(is_train).cloned().collect();
        let test_c = self
            .captions
            .iter()
            .filter(|c| !is_train(c))
            .cloned()
            .collect();
        Ok((
            Dataset::new(self.name.clone(), self.split, train_v.to_vec(), train_c)?,
            Dataset::new(self.name.clone(), Split::Test, test_v.to_vec(), test_c)?,
        ))
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{HEADER_PREFIX} name={} split={}",
            self.name,
            self.split.as_str()
        )
        .unwrap();
        for v in &self.videos {
            match &v.source {
                VideoSource::Frames(frames) => {
                    writeln!(out, "video\t{}\t-\t{}", v.id, frames.len()).unwrap();
                    for f in frames {
                        writeln!(out, "frame\t{}\t{f}", v.id).unwrap();
                    }
                }
                VideoSource::FeatureFile { path, n_frames } => {
                    writeln!(out, "video\t{}\t{path}\t{n_frames}", v.id).unwrap();
                }
            }
        }
        for c in &self.captions {
            let annotator = c.annotator.as_deref().unwrap_or("-");
            writeln!(
                out,
                "caption\t{}\t{}\t{annotator}\t{}",
                c.id, c.video_id, c.text
            )
            .unwrap();
        }
        out
    }

    pub fn parse_manifest(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty manifest"))?;
        let rest = header
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| Error::parse(1, format!("expected `{HEADER_PREFIX}` header")))?;
        let mut name = None;
        let mut split = None;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("name", v)) => name = Some(v.to_owned()),
                Some(("split", v)) => {
                    split = Some(
                        v.parse::<Split>()
                            .map_err(|e| Error::parse(1, e.to_string()))?,
                    )
                }
                _ => return Err(Error::parse(1, format!("unexpected header field `{kv}`"))),
            }
        }
        let name = name.ok_or_else(|| Error::parse(1, "header lacks name="))?;
        let split = split.ok_or_else(|| Error::parse(1, "header lacks split="))?;

        let mut videos: Vec<VideoEntry> = Vec::new();
        let mut declared_frames: Vec<(usize, usize, usize)> = Vec::new();
        let mut captions = Vec::new();
        for (no, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "video" => {
                    let [_, id, file, n] = fields[..] else {
                        return Err(Error::parse(no, "video record needs 3 fields"));
                    };
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::parse(no, format!("bad frame count `{n}`")))?;
                    let source = if file == "-" {
                        declared_frames.push((videos.len(), n, no));
                        VideoSource::Frames(Vec::with_capacity(n))
                    } else {
                        VideoSource::FeatureFile {
                            path: file.to_owned(),
                            n_frames: n,
                        }
                    };
                    videos.push(VideoEntry {
                        id: id.to_owned(),
                        source,
                    });
                }
                "frame" => {
                    let [_, id, descriptor] = fields[..] else {
                        return Err(Error::parse(no, "frame record needs 2 fields"));
                    };
                    let Some(v) = videos.iter_mut().rev().find(|v| v.id == id) else {
                        return Err(Error::DanglingReference(id.to_owned()));
                    };
                    match &mut v.source {
                        VideoSource::Frames(frames) => frames.push(descriptor.to_owned()),
                        VideoSource::FeatureFile { .. } => {
                            return Err(Error::parse(
                                no,
                                format!("frame record for feature-file video `{id}`"),
                            ))
                        }
                    }
                }
                "caption" => {
                    let [_, id, video, annotator, text] = fields[..] else {
                        return Err(Error::parse(no, "caption record needs 4 fields"));
                    };
                    captions.push(Caption {
                        id: id.to_owned(),
                        video_id: video.to_owned(),
                        annotator: (annotator != "-").then(|| annotator.to_owned()),
                        text: text.to_owned(),
                    });
                }
                other => return Err(Error::parse(no, format!("unknown record kind `{other}`"))),
            }
        }
        for (vi, n, no) in declared_frames {
            let found = videos[vi].source.n_frames();
            if found != n {
                return Err(Error::parse(
                    no,
                    format!("video `{}` declares {n} frames, has {found}", videos[vi].id),
                ));
            }
        }
        Dataset::new(name, split, videos, captions)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_manifest(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_manifest()).map_err(|e| Error::io(path, e))
    }
}

/// Rejects values the line format cannot carry.
fn check_field(what: &str, value: &str, no_space: bool) -> Result<()> {
    if value.trim().is_empty() {
        return Err(Error::InvalidConfig(format!("{what} is empty")));
    }
    if value.contains(['\t', '\n', '\r']) || (no_space && value.contains(' ')) {
        return Err(Error::InvalidConfig(format!(
            "{what} `{}` contains a forbidden separator",
            value.escape_debug()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(frames: &[&str]) -> VideoSource {
        VideoSource::Frames(frames.iter().map(|s| s.to_string()).collect())
    }

    fn caption(id: &str, video: &str, text: &str) -> Caption {
        Caption {
            id: id.into(),
            video_id: video.into(),
            annotator: None,
            text: text.into(),
        }
    }

    fn small() -> Dataset {
        Dataset::new(
            "demo",
            Split::Train,
            vec![
                VideoEntry {
                    id: "v1".into(),
                    source: toy(&["a dog running", "a dog jumping"]),
                },
                VideoEntry {
                    id: "v2".into(),
                    source: VideoSource::FeatureFile {
                        path: "feats.wvtr".into(),
                        n_frames: 12,
                    },
                },
            ],
            vec![
                caption("c1", "v1", "a dog is running"),
                Caption {
                    annotator: Some("ann2".into()),
                    ..caption("c2", "v2", "a man is cooking")
                },
                caption("c3", "v1", "the dog runs fast"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn counts_and_groups() {
        let d = small();
        assert_eq!(d.videos().len(), 2);
        assert_eq!(d.captions().len(), 3);
        assert_eq!(d.caption_targets(), vec![0, 1, 0]);
        assert_eq!(d.captions_by_video(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn manifest_round_trip_is_identity() {
        let d = small();
        let text = d.to_manifest();
        let back = Dataset::parse_manifest(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_manifest(), text);
    }

    #[test]
    fn dangling_caption_is_rejected() {
        let err = Dataset::new(
            "demo",
            Split::Train,
            vec![VideoEntry {
                id: "v1".into(),
                source: toy(&["x"]),
            }],
            vec![caption("c1", "v1", "x"), caption("c2", "ghost", "y")],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DanglingReference(id) if id == "ghost"));

        let text = "#waver-dataset v1 name=d split=test\nvideo\tv1\t-\t1\nframe\tv1\tx\ncaption\tc1\tv9\t-\thello\n";
        assert!(
            matches!(Dataset::parse_manifest(text), Err(Error::DanglingReference(id)) if id == "v9")
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text =
            "#waver-dataset v1 name=d split=train\nvideo\tv1\t-\t1\nframe\tv1\tx\nbogus\tline\n";
        assert!(matches!(
            Dataset::parse_manifest(text),
            Err(Error::Parse { line: 4, .. })
        ));
        let text = "#waver-dataset v1 name=d split=train\nvideo\tv1\t-\t2\nframe\tv1\tx\ncaption\tc\tv1\t-\thi\n";
        assert!(matches!(
            Dataset::parse_manifest(text),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Dataset::parse_manifest("video\tv1"),
            Err(Error::Parse { line: 1, .. })
        ));
        let text = "#waver-dataset v1 name=d split=train\ncaption\tc\tv1\n";
        assert!(matches!(
            Dataset::parse_manifest(text),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn video_without_caption_is_rejected() {
        let err = Dataset::new(
            "demo",
            Split::Train,
            vec![
                VideoEntry {
                    id: "v1".into(),
                    source: toy(&["x"]),
                },
                VideoEntry {
                    id: "v2".into(),
                    source: toy(&["y"]),
                },
            ],
            vec![caption("c1", "v1", "x")],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn separators_in_fields_are_rejected() {
        let err = Dataset::new(
            "demo",
            Split::Train,
            vec![VideoEntry {
                id: "v1".into(),
                source: toy(&["x"]),
            }],
            vec![caption("c1", "v1", "tab\there")],
        );
        assert!(err.is_err());
    }

    #[test]
    fn holdout_split() {
        let d = small();
        let (train, test) = d.split_holdout(1).unwrap();
        assert_eq!(train.videos().len(), 1);
        assert_eq!(train.captions().len(), 2);
        assert_eq!(test.videos()[0].id, "v2");
        assert_eq!(test.split(), Split::Test);
        assert!(d.split_holdout(2).is_err());
    }
}
