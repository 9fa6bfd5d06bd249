//! Knowledge corpus and distilled video embeddings.
//!
//! Every video's dictionary prompt is embedded by the frozen text encoder
//! into one corpus row. A video is distilled by letting its frames attend
//! over the corpus: `softmax(v·Cᵀ/√z)·C`.

use std::io::Write as _;
use std::path::Path;

use crate::encoders::{Encoder, VideoFeatures};
use crate::error::{Error, Result};
use crate::ingest::{decode_tensors, write_tensors, TensorBlob};
use crate::numerics::{mean_pool_rows, softmax_rows, Graph, Matrix, Var};
use crate::vcd::ContentDictionary;

/// Default attention scaling.
pub const DEFAULT_Z: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeCorpus {
    vectors: Matrix,
    video_ids: Vec<String>,
    z: f64,
}

/// Frame-level distilled embedding of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct DistilledVideo {
    pub video_id: String,
    pub embedding: Matrix,
}

fn check_z(z: f64) -> Result<()> {
    if z.is_finite() && z > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "scaling z must be positive, got {z}"
        )))
    }
}

impl KnowledgeCorpus {
    pub fn new(vectors: Matrix, video_ids: Vec<String>, z: f64) -> Result<Self> {
        check_z(z)?;
        if vectors.rows() == 0 {
            return Err(Error::EmptyInput("knowledge corpus"));
        }
        if vectors.rows() != video_ids.len() {
            return Err(Error::dims(
                format!("{} corpus ids", vectors.rows()),
                video_ids.len(),
            ));
        }
        if !vectors.is_finite() {
            return Err(Error::NonFinite("knowledge corpus".into()));
        }
        if let Some(id) = video_ids
            .iter()
            .find(|id| id.is_empty() || id.contains(['\n', '\r']))
        {
            return Err(Error::InvalidConfig(format!("bad corpus id `{id}`")));
        }
        Ok(Self {
            vectors,
            video_ids,
            z,
        })
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Same corpus with a different scaling.
    pub fn with_z(mut self, z: f64) -> Result<Self> {
        check_z(z)?;
        self.z = z;
        Ok(self)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!(
            "#corpus v1 L={} dim={} z={}\n",
            self.len(),
            self.dim(),
            self.z
        )
        .into_bytes();
        for id in &self.video_ids {
            out.extend_from_slice(id.as_bytes());
            out.push(b'\n');
        }
        write_tensors(
            &mut out,
            &[TensorBlob::from_matrix("corpus", &self.vectors)],
        )?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rest = bytes;
        let mut next_line = |line: usize| -> Result<&str> {
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::parse(line, "unterminated line"))?;
            let text = std::str::from_utf8(&rest[..end])
                .map_err(|e| Error::parse(line, format!("not UTF-8: {e}")))?;
            rest = &rest[end + 1..];
            Ok(text)
        };
        let header = next_line(1)?;
        let fields: Vec<&str> = header.split(' ').collect();
        let value = |i: usize, key: &str| -> Result<&str> {
            fields
                .get(i)
                .and_then(|f| f.strip_prefix(key))
                .and_then(|v| v.strip_prefix('='))
                .ok_or_else(|| Error::parse(1, format!("expected `{key}=` in corpus header")))
        };
        if fields.len() != 5 || fields[0] != "#corpus" || fields[1] != "v1" {
            return Err(Error::parse(1, format!("bad corpus header `{header}`")));
        }
        let bad = |key: &str| Error::parse(1, format!("bad {key} in corpus header"));
        let l: usize = value(2, "L")?.parse().map_err(|_| bad("L"))?;
        let dim: usize = value(3, "dim")?.parse().map_err(|_| bad("dim"))?;
        let z: f64 = value(4, "z")?.parse().map_err(|_| bad("z"))?;
        let mut ids = Vec::with_capacity(l.min(1 << 20));
        for i in 0..l {
            ids.push(next_line(i + 2)?.to_owned());
        }
        let blobs = decode_tensors(rest)?;
        let [blob] = blobs.as_slice() else {
            return Err(Error::parse(
                l + 2,
                format!("expected 1 tensor, found {}", blobs.len()),
            ));
        };
        let vectors = blob.to_matrix()?;
        if vectors.shape() != (l, dim) {
            return Err(Error::dims(
                format!("{l}x{dim}"),
                format!("{:?}", vectors.shape()),
            ));
        }
        Self::new(vectors, ids, z)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Embeds each video's dictionary prompt with the frozen text encoder.
pub fn build_corpus(
    dictionary: &ContentDictionary,
    encoder: &dyn Encoder,
    z: f64,
) -> Result<KnowledgeCorpus> {
    if dictionary.is_empty() {
        return Err(Error::EmptyInput("content dictionary"));
    }
    let rows = dictionary
        .prompts()?
        .iter()
        .map(|p| encoder.encode_prompt(p))
        .collect::<Result<Vec<_>>>()?;
    let ids = dictionary
        .entries()
        .iter()
        .map(|(id, _)| id.clone())
        .collect();
    KnowledgeCorpus::new(Matrix::from_rows(&rows)?, ids, z)
}

/// `softmax(v·Cᵀ/√z)·C`, row by row.
pub fn cross_attend(v: &Matrix, corpus: &KnowledgeCorpus) -> Result<Matrix> {
    if v.cols() != corpus.dim() {
        return Err(Error::dims(corpus.dim(), v.cols()));
    }
    let logits = v.matmul_t(&corpus.vectors)?.scale(1.0 / corpus.z.sqrt());
    softmax_rows(&logits).matmul(&corpus.vectors)
}

/// Graph form of [`cross_attend`]; the corpus node never receives gradient.
pub fn cross_attend_var(g: &mut Graph, v: Var, corpus: Var, z: f64) -> Result<Var> {
    check_z(z)?;
    let c = g.stop_gradient(corpus);
    let logits = g.matmul_t(v, c)?;
    let logits = g.scale(logits, 1.0 / z.sqrt());
    let att = g.softmax_rows(logits);
    g.matmul(att, c)
}

pub fn distill_video(video: &VideoFeatures, corpus: &KnowledgeCorpus) -> Result<DistilledVideo> {
    Ok(DistilledVideo {
        video_id: video.video_id.clone(),
        embedding: cross_attend(&video.frames, corpus)?,
    })
}

/// Mean-pooled distilled embedding of every video, one row each.
pub fn pooled_distilled(videos: &[VideoFeatures], corpus: &KnowledgeCorpus) -> Result<Matrix> {
    let rows = videos
        .iter()
        .map(|v| mean_pool_rows(&cross_attend(&v.frames, corpus)?))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("no videos to distill"));
    }
    Matrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::ToyEncoder;
    use crate::numerics::Params;
    use crate::testing::{finite_difference, rel_error};
    use proptest::prelude::*;

    fn corpus(rows: &[&[f64]], z: f64) -> KnowledgeCorpus {
        let ids = (0..rows.len()).map(|i| format!("v{i}")).collect();
        KnowledgeCorpus::new(Matrix::from_rows(rows).unwrap(), ids, z).unwrap()
    }

    #[test]
    fn single_row_corpus_is_copied() {
        let c = corpus(&[&[0.2, -0.7, 1.5]], DEFAULT_Z);
        let v = Matrix::from_rows(&[[1.0, 2.0, 3.0], [-4.0, 0.0, 9.0]]).unwrap();
        let out = cross_attend(&v, &c).unwrap();
        for r in out.iter_rows() {
            assert_eq!(r, [0.2, -0.7, 1.5]);
        }
    }

    #[test]
    fn hand_evaluated_two_way_attention() {
        let c = corpus(&[&[1.0, 0.0], &[0.0, 1.0]], 1.0);
        let out = cross_attend(&Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), &c).unwrap();
        let e = std::f64::consts::E;
        assert!((out[(0, 0)] - e / (e + 1.0)).abs() < 1e-10);
        assert!((out[(0, 0)] - 0.7310585786).abs() < 1e-10);
        assert!((out[(0, 1)] - 0.2689414214).abs() < 1e-10);
    }

    #[test]
    fn huge_z_gives_column_means() {
        let c = corpus(&[&[1.0, 4.0], &[3.0, -2.0], &[2.0, 1.0]], 1e12);
        let out = cross_attend(&Matrix::from_rows(&[[0.1, -0.1]]).unwrap(), &c).unwrap();
        assert!((out[(0, 0)] - 2.0).abs() < 1e-6);
        assert!((out[(0, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let c = corpus(&[&[1.0, 0.0]], 1.0);
        assert!(matches!(
            cross_attend(&Matrix::zeros(1, 3), &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn corpus_from_dictionary() {
        let enc = ToyEncoder::new(8, 0).unwrap();
        let entries = vec![
            ("a".to_owned(), vec!["running".to_owned()]),
            ("b".to_owned(), vec!["running".to_owned()]),
        ];
        let d = ContentDictionary::new(1, 3, 8, "s", entries).unwrap();
        let c = build_corpus(&d, &enc, DEFAULT_Z).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.vectors().row(0), c.vectors().row(1));
        let reparsed = ContentDictionary::parse(&d.to_text()).unwrap();
        assert_eq!(build_corpus(&reparsed, &enc, DEFAULT_Z).unwrap(), c);
        let one = ContentDictionary::new(1, 3, 8, "s", vec![d.entries()[0].clone()]).unwrap();
        assert_eq!(build_corpus(&one, &enc, DEFAULT_Z).unwrap().len(), 1);
    }

    #[test]
    fn cache_round_trip() {
        let c = corpus(&[&[0.5, -1.25], &[2.0, 0.0]], 64.0);
        let bytes = c.to_bytes().unwrap();
        assert!(bytes.starts_with(b"#corpus v1 L=2 dim=2 z=64\n"));
        assert_eq!(KnowledgeCorpus::from_bytes(&bytes).unwrap(), c);
        assert!(KnowledgeCorpus::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(KnowledgeCorpus::from_bytes(b"#corpus v2 L=0 dim=0 z=1\n").is_err());
    }

    #[test]
    fn gradient_reaches_frames_but_not_corpus() {
        let mut params = Params::new();
        let vid = params.add(
            "v",
            Matrix::from_fn(3, 4, |i, j| ((i * 4 + j) as f64 * 0.37).sin()),
        );
        let cid = params.add(
            "c",
            Matrix::from_fn(5, 4, |i, j| ((i * 3 + j) as f64 * 0.91).cos()),
        );
        let target = Matrix::from_fn(3, 4, |i, j| (i as f64) - (j as f64) * 0.5);
        let loss_of = |g: &mut Graph, v: Var, c: Var| {
            let out = cross_attend_var(g, v, c, 2.0).unwrap();
            let t = g.constant(target.clone());
            let prod = g.mul(out, t).unwrap();
            g.sum(prod)
        };
        let mut g = Graph::new();
        let v = g.param(&params, vid);
        let c = g.param(&params, cid);
        let loss = loss_of(&mut g, v, c);
        let grads = g.backward(loss).unwrap();
        assert!(grads.get(cid).unwrap().as_slice().iter().all(|&x| x == 0.0));

        let corpus_m = params.get(cid).clone();
        let numeric = finite_difference(params.get(vid), 1e-6, |x| {
            let mut g = Graph::new();
            let v = g.constant(x.clone());
            let c = g.constant(corpus_m.clone());
            let l = loss_of(&mut g, v, c);
            g.value(l)[(0, 0)]
        });
        assert!(rel_error(grads.get(vid).unwrap(), &numeric) < 1e-4);
    }

    fn arb_case() -> impl Strategy<Value = (Matrix, Matrix)> {
        (1usize..6, 1usize..8, 1usize..6).prop_flat_map(|(n, l, d)| {
            (
                prop::collection::vec(-5.0f64..5.0, n * d),
                prop::collection::vec(-5.0f64..5.0, l * d),
            )
                .prop_map(move |(v, c)| {
                    (Matrix::new(n, d, v).unwrap(), Matrix::new(l, d, c).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn outputs_stay_in_convex_hull((v, c) in arb_case(), z in 0.1f64..100.0) {
            let ids = (0..c.rows()).map(|i| format!("v{i}")).collect();
            let kc = KnowledgeCorpus::new(c.clone(), ids, z).unwrap();
            let out = cross_attend(&v, &kc).unwrap();
            let att = softmax_rows(&v.matmul_t(&c).unwrap().scale(1.0 / z.sqrt()));
            for r in att.iter_rows() {
                let s: f64 = r.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
            for r in out.iter_rows() {
                for (j, &x) in r.iter().enumerate() {
                    let col: Vec<f64> = c.iter_rows().map(|row| row[j]).collect();
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(lo - 1e-9 <= x && x <= hi + 1e-9);
                }
            }
        }

        #[test]
        fn corpus_row_order_is_irrelevant((v, c) in arb_case(), seed in any::<u64>()) {
            let l = c.rows();
            let mut perm: Vec<usize> = (0..l).collect();
            let mut s = seed;
            for i in (1..l).rev() {
                let j = (crate::rng::splitmix64(&mut s) % (i as u64 + 1)) as usize;
                perm.swap(i, j);
            }
            let ids: Vec<String> = (0..l).map(|i| format!("v{i}")).collect();
            let a = KnowledgeCorpus::new(c.clone(), ids.clone(), 8.0).unwrap();
            let pids = perm.iter().map(|&i| ids[i].clone()).collect();
            let b = KnowledgeCorpus::new(c.select_rows(&perm), pids, 8.0).unwrap();
            let diff = cross_attend(&v, &a).unwrap().max_abs_diff(&cross_attend(&v, &b).unwrap());
            prop_assert!(diff < 1e-12);
        }
    }
}
