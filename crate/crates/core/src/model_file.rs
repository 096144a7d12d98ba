//! Envelope for every persisted model.
//!
//! ```text
//! magic     b"DSMF"
//! version   u32 (= 1)
//! kind      u8   0 autoencoder, 1 hypersphere, 2 classifier, 3 kde, 4 iforest
//! metadata  u64 length + UTF-8 JSON object (configuration echo)
//! scaler    u8 present flag; if 1: kind u8 (0 minmax, 1 standardize),
//!           dim u64, offset dim×f64, divisor dim×f64
//! payload   per kind:
//!   autoencoder  encoder network, decoder network
//!   hypersphere  variant u8 (0 deep-sad, 1 one-class, 2 soft-boundary),
//!                eta f64, lambda f64, inverse_eps f64,
//!                [radius_sq f64, nu f64 for soft-boundary],
//!                center u64 + f64s, network
//!   classifier   network
//!   kde          bandwidth f64, rows u64, cols u64, points row-major
//!   iforest      sample_size u64, dim u64, trees u64, per tree: nodes u64,
//!                per node tag u8 (0 leaf: size u64 | 1 split: feature u64,
//!                value f64, left u64, right u64)
//! ```
//!
//! Networks use the block layout of [`crate::nn::io`]. Little-endian throughout.

use std::io::{Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::baselines::{IsolationForest, IsolationTree, KdeModel, Node};
use crate::data::{Scaler, ScalerKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{
    Autoencoder, ClassifierModel, DeepSadModel, SoftBoundaryState, TrainedModel, Variant,
};
use crate::nn::io::{
    read_f64, read_f64s, read_len, read_network, read_u32, read_u8, write_f64, write_f64s,
    write_network, write_u32, write_u64, write_u8,
};

const MAGIC: &[u8; 4] = b"DSMF";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Autoencoder(Autoencoder),
    Hypersphere(DeepSadModel),
    Classifier(ClassifierModel),
    Kde(KdeModel),
    IForest(IsolationForest),
}

impl StoredModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StoredModel::Autoencoder(_) => "autoencoder",
            StoredModel::Hypersphere(_) => "hypersphere",
            StoredModel::Classifier(_) => "classifier",
            StoredModel::Kde(_) => "kde",
            StoredModel::IForest(_) => "iforest",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            StoredModel::Autoencoder(a) => a.input_dim(),
            StoredModel::Hypersphere(m) => m.phi.input_dim(),
            StoredModel::Classifier(m) => m.net.input_dim(),
            StoredModel::Kde(k) => k.points.cols(),
            StoredModel::IForest(f) => f.dim,
        }
    }

    /// Anomaly scores; the autoencoder scores by reconstruction error.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "model expects {} features, input has {}",
                self.input_dim(),
                x.cols()
            )));
        }
        match self {
            StoredModel::Autoencoder(a) => a.reconstruction_errors(x),
            StoredModel::Hypersphere(m) => m.score(x),
            StoredModel::Classifier(m) => m.score(x),
            StoredModel::Kde(k) => k.score(x),
            StoredModel::IForest(f) => f.score(x),
        }
    }
}

impl From<TrainedModel> for StoredModel {
    fn from(m: TrainedModel) -> Self {
        match m {
            TrainedModel::Hypersphere(h) => StoredModel::Hypersphere(h),
            TrainedModel::Classifier(c) => StoredModel::Classifier(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: StoredModel,
    pub metadata: Map<String, Value>,
    pub scaler: Option<Scaler>,
}

impl ModelFile {
    pub fn new(model: StoredModel) -> Self {
        Self {
            model,
            metadata: Map::new(),
            scaler: None,
        }
    }

    /// Applies the stored scaler (if any) and scores.
    pub fn score_raw(&self, x: &Matrix) -> Result<Vec<f64>> {
        match &self.scaler {
            Some(s) => self.model.score(&s.transform(x)?),
            None => self.model.score(x),
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        let kind = match &self.model {
            StoredModel::Autoencoder(_) => 0,
            StoredModel::Hypersphere(_) => 1,
            StoredModel::Classifier(_) => 2,
            StoredModel::Kde(_) => 3,
            StoredModel::IForest(_) => 4,
        };
        write_u8(w, kind)?;
        let meta = serde_json::to_vec(&self.metadata).map_err(|e| Error::Format(e.to_string()))?;
        write_u64(w, meta.len() as u64)?;
        w.write_all(&meta)?;
        match &self.scaler {
            None => write_u8(w, 0)?,
            Some(s) => {
                write_u8(w, 1)?;
                write_u8(
                    w,
                    match s.kind {
                        ScalerKind::MinMax => 0,
                        ScalerKind::Standardize => 1,
                    },
                )?;
                write_u64(w, s.offset.len() as u64)?;
                write_f64s(w, &s.offset)?;
                write_f64s(w, &s.divisor)?;
            }
        }
        match &self.model {
            StoredModel::Autoencoder(a) => {
                write_network(w, &a.encoder)?;
                write_network(w, &a.decoder)?;
            }
            StoredModel::Hypersphere(m) => {
                let (tag, sb) = match m.variant {
                    Variant::DeepSad => (0, None),
                    Variant::OneClass => (1, None),
                    Variant::SoftBoundary(s) => (2, Some(s)),
                };
                write_u8(w, tag)?;
                write_f64(w, m.eta)?;
                write_f64(w, m.lambda)?;
                write_f64(w, m.inverse_eps)?;
                if let Some(s) = sb {
                    write_f64(w, s.radius_sq)?;
                    write_f64(w, s.nu)?;
                }
                write_u64(w, m.center.len() as u64)?;
                write_f64s(w, &m.center)?;
                write_network(w, &m.phi)?;
            }
            StoredModel::Classifier(c) => write_network(w, &c.net)?,
            StoredModel::Kde(k) => {
                write_f64(w, k.bandwidth)?;
                write_u64(w, k.points.rows() as u64)?;
                write_u64(w, k.points.cols() as u64)?;
                write_f64s(w, k.points.as_slice())?;
            }
            StoredModel::IForest(f) => {
                write_u64(w, f.sample_size as u64)?;
                write_u64(w, f.dim as u64)?;
                write_u64(w, f.trees.len() as u64)?;
                for t in &f.trees {
                    write_u64(w, t.nodes.len() as u64)?;
                    for n in &t.nodes {
                        match *n {
                            Node::Leaf { size } => {
                                write_u8(w, 0)?;
                                write_u64(w, size as u64)?;
                            }
                            Node::Split {
                                feature,
                                value,
                                left,
                                right,
                            } => {
                                write_u8(w, 1)?;
                                write_u64(w, feature as u64)?;
                                write_f64(w, value)?;
                                write_u64(w, left as u64)?;
                                write_u64(w, right as u64)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported model file version {version}"
            )));
        }
        let kind = read_u8(r)?;
        let meta_len = read_len(r)?;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let metadata: Map<String, Value> =
            serde_json::from_slice(&meta).map_err(|e| Error::Format(format!("metadata: {e}")))?;
        let scaler = match read_u8(r)? {
            0 => None,
            1 => {
                let kind = match read_u8(r)? {
                    0 => ScalerKind::MinMax,
                    1 => ScalerKind::Standardize,
                    k => return Err(Error::Format(format!("unknown scaler kind {k}"))),
                };
                let d = read_len(r)?;
                Some(Scaler {
                    kind,
                    offset: read_f64s(r, d)?,
                    divisor: read_f64s(r, d)?,
                })
            }
            f => return Err(Error::Format(format!("bad scaler flag {f}"))),
        };
        let model = match kind {
            0 => StoredModel::Autoencoder(Autoencoder::new(read_network(r)?, read_network(r)?)?),
            1 => {
                let tag = read_u8(r)?;
                let eta = read_f64(r)?;
                let lambda = read_f64(r)?;
                let inverse_eps = read_f64(r)?;
                let variant = match tag {
                    0 => Variant::DeepSad,
                    1 => Variant::OneClass,
                    2 => Variant::SoftBoundary(SoftBoundaryState {
                        radius_sq: read_f64(r)?,
                        nu: read_f64(r)?,
                    }),
                    t => return Err(Error::Format(format!("unknown hypersphere variant {t}"))),
                };
                let c = read_len(r)?;
                let center = read_f64s(r, c)?;
                let m = DeepSadModel {
                    phi: read_network(r)?,
                    center,
                    eta,
                    lambda,
                    inverse_eps,
                    variant,
                };
                m.validate().map_err(|e| Error::Format(e.to_string()))?;
                StoredModel::Hypersphere(m)
            }
            2 => StoredModel::Classifier(ClassifierModel {
                net: read_network(r)?,
            }),
            3 => {
                let h = read_f64(r)?;
                let rows = read_len(r)?;
                let cols = read_len(r)?;
                let pts = Matrix::from_vec(rows, cols, read_f64s(r, rows * cols)?)?;
                StoredModel::Kde(KdeModel::new(pts, h).map_err(|e| Error::Format(e.to_string()))?)
            }
            4 => {
                let sample_size = read_len(r)?;
                let dim = read_len(r)?;
                let count = read_len(r)?;
                let mut trees = Vec::with_capacity(count.min(4096));
                for _ in 0..count {
                    let nn = read_len(r)?;
                    let mut nodes = Vec::with_capacity(nn.min(1 << 16));
                    for _ in 0..nn {
                        nodes.push(match read_u8(r)? {
                            0 => Node::Leaf { size: read_len(r)? },
                            1 => {
                                let feature = read_len(r)?;
                                let value = read_f64(r)?;
                                let left = read_len(r)?;
                                let right = read_len(r)?;
                                if feature >= dim || left >= nn || right >= nn {
                                    return Err(Error::Format(
                                        "isolation tree index out of range".into(),
                                    ));
                                }
                                Node::Split {
                                    feature,
                                    value,
                                    left,
                                    right,
                                }
                            }
                            t => return Err(Error::Format(format!("unknown tree node tag {t}"))),
                        });
                    }
                    if nodes.is_empty() {
                        return Err(Error::Format("empty isolation tree".into()));
                    }
                    trees.push(IsolationTree { nodes });
                }
                StoredModel::IForest(IsolationForest {
                    trees,
                    sample_size,
                    dim,
                })
            }
            k => return Err(Error::Format(format!("unknown model kind {k}"))),
        };
        if let Some(s) = &scaler {
            if s.offset.len() != model.input_dim() {
                return Err(Error::Format(
                    "scaler width does not match the model".into(),
                ));
            }
        }
        Ok(Self {
            model,
            metadata,
            scaler,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::read(&mut std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{iforest_fit, IForestConfig};
    use crate::nn::{Architecture, Network};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(f: &ModelFile) -> ModelFile {
        let mut buf = Vec::new();
        f.write(&mut buf).unwrap();
        ModelFile::read(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn hypersphere_with_scaler_and_metadata() {
        let phi = Network::new(
            &Architecture::mlp(3, &[4], 2, true),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let m = DeepSadModel {
            phi,
            center: vec![0.5, -0.25],
            eta: 1.0,
            lambda: 1e-6,
            inverse_eps: 1e-6,
            variant: Variant::SoftBoundary(SoftBoundaryState {
                radius_sq: 0.3,
                nu: 0.1,
            }),
        };
        let mut f = ModelFile::new(StoredModel::Hypersphere(m));
        f.metadata.insert("eta".into(), Value::from(1.0));
        f.scaler = Some(Scaler {
            kind: ScalerKind::Standardize,
            offset: vec![1.0, 2.0, 3.0],
            divisor: vec![1.0, 0.5, 2.0],
        });
        assert_eq!(round_trip(&f), f);
    }

    #[test]
    fn forest_and_kde() {
        let x = Matrix::from_vec(20, 2, (0..40).map(|v| (v * 7 % 13) as f64).collect()).unwrap();
        let forest = iforest_fit(
            &x,
            &IForestConfig {
                trees: 4,
                subsample: 16,
                seed: 2,
            },
        )
        .unwrap();
        let f = ModelFile::new(StoredModel::IForest(forest));
        let back = round_trip(&f);
        assert_eq!(back, f);
        assert_eq!(back.model.score(&x).unwrap(), f.model.score(&x).unwrap());
        let k = ModelFile::new(StoredModel::Kde(KdeModel::new(x, 1.5).unwrap()));
        assert_eq!(round_trip(&k), k);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let ae = Autoencoder::init(&Architecture::mlp(3, &[], 2, false), 0).unwrap();
        let mut buf = Vec::new();
        ModelFile::new(StoredModel::Autoencoder(ae))
            .write(&mut buf)
            .unwrap();
        buf.truncate(buf.len() / 2);
        assert!(ModelFile::read(&mut buf.as_slice()).is_err());
    }
}
