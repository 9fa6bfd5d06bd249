use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ingest::{decode_tensors, write_tensors, TensorBlob};
use crate::numerics::{l2_normalize_rows, mean_pool_rows, Graph, Matrix, ParamId, Params, Var};
use crate::rng::SeedStreams;

pub const TAU_MIN: f64 = 5e-3;
pub const TAU_MAX: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 0.07;

/// How head weights start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadInit {
    /// Independent He-normal draws for each head.
    #[default]
    Random,
    /// One He-normal draw, copied into both heads.
    Shared,
    /// Exact identity map; needs `hidden1 = hidden2 = 2·dim` and `d_proj = dim`.
    Identity,
}

impl std::str::FromStr for HeadInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(HeadInit::Random),
            "shared" => Ok(HeadInit::Shared),
            "identity" => Ok(HeadInit::Identity),
            other => Err(Error::InvalidConfig(format!("unknown head init `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub d_proj: usize,
    pub tau_init: f64,
    pub init: HeadInit,
    pub seed: u64,
}

impl ModelConfig {
    /// `D → D → D/2 → D/2` heads with the default temperature.
    pub fn new(dim: usize) -> Self {
        let half = (dim / 2).max(1);
        Self {
            dim,
            hidden1: dim,
            hidden2: half,
            d_proj: half,
            tau_init: DEFAULT_TAU,
            init: HeadInit::Random,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 || self.d_proj == 0 {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if self.d_proj > self.dim {
            return Err(Error::InvalidConfig(format!(
                "projection width {} exceeds input width {}",
                self.d_proj, self.dim
            )));
        }
        if self.tau_init.is_nan() || self.tau_init <= 0.0 {
            return Err(Error::NonPositiveTemperature(self.tau_init));
        }
        if !(TAU_MIN..=TAU_MAX).contains(&self.tau_init) {
            return Err(Error::InvalidConfig(format!(
                "initial temperature {} outside [{TAU_MIN}, {TAU_MAX}]",
                self.tau_init
            )));
        }
        if self.init == HeadInit::Identity
            && (self.hidden1 != 2 * self.dim
                || self.hidden2 != 2 * self.dim
                || self.d_proj != self.dim)
        {
            return Err(Error::InvalidConfig(
                "identity init needs hidden widths 2*dim and d_proj = dim".into(),
            ));
        }
        Ok(())
    }

    fn widths(&self) -> [usize; 4] {
        [self.dim, self.hidden1, self.hidden2, self.d_proj]
    }
}

/// Three affine layers with ReLU between them, then row normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionHead {
    weights: [ParamId; 3],
    biases: [ParamId; 3],
}

impl ProjectionHead {
    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.weights.iter().chain(&self.biases).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Video,
    Text,
}

impl HeadKind {
    fn prefix(self) -> &'static str {
        match self {
            HeadKind::Video => "video",
            HeadKind::Text => "text",
        }
    }
}

/// Video head, text head and temperature.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: Params,
    video: ProjectionHead,
    text: ProjectionHead,
    tau: ParamId,
}

fn random_layers(widths: [usize; 4], rng: &mut impl Rng) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(6);
    for l in 0..3 {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let gain = if l < 2 { 2.0 } else { 1.0 };
        let std = (gain / fan_in as f64).sqrt();
        out.push(Matrix::from_fn(fan_in, fan_out, |_, _| {
            std * rng.sample::<f64, _>(StandardNormal)
        }));
    }
    for l in 0..3 {
        out.push(Matrix::zeros(1, widths[l + 1]));
    }
    out
}

fn identity_layers(d: usize) -> Vec<Matrix> {
    // relu(x) - relu(-x) = x
    let w1 = Matrix::from_fn(d, 2 * d, |i, j| {
        if j == i {
            1.0
        } else if j == i + d {
            -1.0
        } else {
            0.0
        }
    });
    let w3 = Matrix::from_fn(2 * d, d, |i, j| {
        if i == j {
            1.0
        } else if i == j + d {
            -1.0
        } else {
            0.0
        }
    });
    vec![
        w1,
        Matrix::identity(2 * d),
        w3,
        Matrix::zeros(1, 2 * d),
        Matrix::zeros(1, 2 * d),
        Matrix::zeros(1, d),
    ]
}

const LAYER_NAMES: [&str; 6] = ["w1", "w2", "w3", "b1", "b2", "b3"];

fn add_head(params: &mut Params, kind: HeadKind, layers: Vec<Matrix>) -> ProjectionHead {
    let ids: Vec<ParamId> = layers
        .into_iter()
        .zip(LAYER_NAMES)
        .map(|(m, n)| params.add(format!("{}.{n}", kind.prefix()), m))
        .collect();
    ProjectionHead {
        weights: [ids[0], ids[1], ids[2]],
        biases: [ids[3], ids[4], ids[5]],
    }
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        let (video_layers, text_layers) = match config.init {
            HeadInit::Identity => (identity_layers(config.dim), identity_layers(config.dim)),
            HeadInit::Shared => {
                let mut rng = SeedStreams::new(config.seed).rng(SeedStreams::INIT);
                let layers = random_layers(widths, &mut rng);
                (layers.clone(), layers)
            }
            HeadInit::Random => {
                let mut rng = SeedStreams::new(config.seed).rng(SeedStreams::INIT);
                let v = random_layers(widths, &mut rng);
                (v, random_layers(widths, &mut rng))
            }
        };
        let mut params = Params::new();
        let video = add_head(&mut params, HeadKind::Video, video_layers);
        let text = add_head(&mut params, HeadKind::Text, text_layers);
        let tau = params.add("tau", Matrix::scalar(config.tau_init));
        Ok(Self {
            config,
            params,
            video,
            text,
            tau,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn head(&self, kind: HeadKind) -> &ProjectionHead {
        match kind {
            HeadKind::Video => &self.video,
            HeadKind::Text => &self.text,
        }
    }

    pub fn tau_id(&self) -> ParamId {
        self.tau
    }

    pub fn tau(&self) -> f64 {
        self.params.get(self.tau)[(0, 0)]
    }

    pub fn clamp_tau(&mut self) {
        let t = self.params.get_mut(self.tau);
        t.as_mut_slice()[0] = t[(0, 0)].clamp(TAU_MIN, TAU_MAX);
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn d_proj(&self) -> usize {
        self.config.d_proj
    }

    /// Projects already pooled rows (`n × dim`) to unit rows (`n × d_proj`).
    pub fn project(&self, kind: HeadKind, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.config.dim {
            return Err(Error::dims(self.config.dim, x.cols()));
        }
        let head = self.head(kind);
        let mut h = x.clone();
        for l in 0..3 {
            h = h.matmul(self.params.get(head.weights[l]))?;
            let b = self.params.get(head.biases[l]);
            for row in 0..h.rows() {
                for (v, bias) in h.row_mut(row).iter_mut().zip(b.as_slice()) {
                    *v += bias;
                }
            }
            if l < 2 {
                h = h.map(|v| v.max(0.0));
            }
        }
        l2_normalize_rows(&h)
    }

    /// Mean-pools a sequence of rows, then projects it.
    pub fn project_and_pool(&self, kind: HeadKind, rows: &Matrix) -> Result<Vec<f64>> {
        let pooled = Matrix::row_vector(&mean_pool_rows(rows)?);
        Ok(self.project(kind, &pooled)?.row(0).to_vec())
    }

    /// Graph form of [`Model::project`].
    pub fn project_var(&self, g: &mut Graph, kind: HeadKind, x: Var) -> Result<Var> {
        let head = *self.head(kind);
        let mut h = x;
        for l in 0..3 {
            let w = g.param(&self.params, head.weights[l]);
            let b = g.param(&self.params, head.biases[l]);
            h = g.matmul(h, w)?;
            h = g.add_row_bias(h, b)?;
            if l < 2 {
                h = g.relu(h);
            }
        }
        g.l2_normalize_rows(h)
    }

    /// Temperature node for a graph.
    pub fn tau_var(&self, g: &mut Graph) -> Var {
        g.param(&self.params, self.tau)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!(
            "#ckpt v1 dim={} dproj={} tau={}\n",
            self.config.dim,
            self.config.d_proj,
            self.tau()
        )
        .into_bytes();
        let blobs: Vec<TensorBlob> = self
            .params
            .iter()
            .filter(|(id, _, _)| *id != self.tau)
            .map(|(_, name, m)| TensorBlob::from_matrix(name, m))
            .collect();
        write_tensors(&mut out, &blobs)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(1, "missing checkpoint header"))?;
        let header = std::str::from_utf8(&bytes[..end])
            .map_err(|e| Error::parse(1, format!("header is not UTF-8: {e}")))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 5 || fields[0] != "#ckpt" || fields[1] != "v1" {
            return Err(Error::parse(1, format!("bad checkpoint header `{header}`")));
        }
        let value = |i: usize, key: &str| -> Result<&str> {
            fields[i]
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .ok_or_else(|| Error::parse(1, format!("expected `{key}=` in checkpoint header")))
        };
        let bad = |key: &str| Error::parse(1, format!("bad {key} in checkpoint header"));
        let dim: usize = value(2, "dim")?.parse().map_err(|_| bad("dim"))?;
        let d_proj: usize = value(3, "dproj")?.parse().map_err(|_| bad("dproj"))?;
        let tau: f64 = value(4, "tau")?.parse().map_err(|_| bad("tau"))?;

        let blobs = decode_tensors(&bytes[end + 1..])?;
        let find = |name: String| -> Result<Matrix> {
            blobs
                .iter()
                .find(|b| b.name == name)
                .ok_or_else(|| Error::parse(2, format!("checkpoint lacks tensor `{name}`")))?
                .to_matrix()
        };
        let mut layers = Vec::new();
        for kind in [HeadKind::Video, HeadKind::Text] {
            let ms = LAYER_NAMES
                .iter()
                .map(|n| find(format!("{}.{n}", kind.prefix())))
                .collect::<Result<Vec<_>>>()?;
            layers.push(ms);
        }
        if blobs.len() != 12 {
            return Err(Error::parse(
                2,
                format!("expected 12 tensors, found {}", blobs.len()),
            ));
        }
        let w = &layers[0];
        let config = ModelConfig {
            dim,
            hidden1: w[0].cols(),
            hidden2: w[1].cols(),
            d_proj,
            tau_init: tau,
            init: HeadInit::Random,
            seed: 0,
        };
        config.validate()?;
        let widths = config.widths();
        for ms in &layers {
            for l in 0..3 {
                let ok = ms[l].shape() == (widths[l], widths[l + 1])
                    && ms[l + 3].shape() == (1, widths[l + 1]);
                if !ok {
                    return Err(Error::dims(
                        format!("layer {} of {widths:?}", l + 1),
                        format!("{:?}", ms[l].shape()),
                    ));
                }
            }
        }
        let mut params = Params::new();
        let mut layers = layers.into_iter();
        let video = add_head(&mut params, HeadKind::Video, layers.next().unwrap());
        let text = add_head(&mut params, HeadKind::Text, layers.next().unwrap());
        let tau_id = params.add("tau", Matrix::scalar(tau));
        Ok(Self {
            config,
            params,
            video,
            text,
            tau: tau_id,
        })
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
