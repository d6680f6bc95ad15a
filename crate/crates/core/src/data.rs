//! Synthetic ordinal-depth datasets, point/pair sampling, and the dataset
//! file format.
//!
//! All randomness comes from [`Rng`] (xoshiro256++ seeded through SplitMix64
//! via `seed_from_u64`), so datasets and samples are reproducible across
//! platforms.
//!
//! # File format
//!
//! UTF-8 JSON lines. Line 1 is a header:
//!
//! ```text
//! {"format":"depthrank-dataset","version":1,"feature_dim":10,"n_samples":2,"generator":{...}}
//! ```
//!
//! followed by exactly `n_samples` records:
//!
//! ```text
//! {"id":"s00000","n":20,"d":10,"features":[...n*d row-major...],"gt":[...n raw scores...]}
//! ```
//!
//! Floats are written in shortest round-trip decimal form and parsed with
//! correct rounding, so a read after a write is bit-exact.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ranking::{OrdinalPair, RankedSample};
use crate::trainer::ScorerFamily;

pub const DATASET_FORMAT: &str = "depthrank-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Upper end of the graded relevance scale.
pub const MAX_RELEVANCE: f64 = 4.0;

/// Hidden width of the nonlinear ground-truth generator.
pub const GENERATOR_HIDDEN: usize = 8;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded_rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub items_per_sample: usize,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    pub family: ScorerFamily,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 100,
            items_per_sample: 500,
            feature_dim: 10,
            noise_sigma: 0.0,
            family: ScorerFamily::Linear,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.items_per_sample == 0 || self.feature_dim == 0 {
            return Err(invalid("sample, item and feature counts must be at least 1"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

/// Hidden ground-truth model drawn at the start of generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    /// Linear weights `w`, one per feature.
    pub weights: Vec<f64>,
    /// `GENERATOR_HIDDEN × d` row-major input weights (mlp family only).
    pub hidden_in: Vec<f64>,
    /// `GENERATOR_HIDDEN` output weights (mlp family only).
    pub hidden_out: Vec<f64>,
}

impl GeneratorModel {
    fn draw(spec: &SyntheticSpec, rng: &mut Rng) -> Self {
        let d = spec.feature_dim;
        let weights = normals(rng, d);
        let (hidden_in, hidden_out) = match spec.family {
            ScorerFamily::Linear => (Vec::new(), Vec::new()),
            ScorerFamily::Mlp => {
                let scale = 1.0 / (d as f64).sqrt();
                let hidden_in = normals(rng, GENERATOR_HIDDEN * d)
                    .into_iter()
                    .map(|v| v * scale)
                    .collect();
                (hidden_in, normals(rng, GENERATOR_HIDDEN))
            }
        };
        Self {
            weights,
            hidden_in,
            hidden_out,
        }
    }

    /// Noise-free raw depth score of one item.
    pub fn depth(&self, x: &[f64]) -> f64 {
        let mut s: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        let d = x.len();
        for (row, out) in self.hidden_in.chunks(d.max(1)).zip(&self.hidden_out) {
            let pre: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            s += out * pre.tanh();
        }
        s
    }
}

fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: u32,
    pub feature_dim: usize,
    /// Generator settings, when the dataset is synthetic.
    pub generator: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<RankedSample>,
}

impl Dataset {
    pub fn new(samples: Vec<RankedSample>, generator: Option<SyntheticSpec>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| invalid("dataset has no samples"))?;
        let feature_dim = first.dim();
        validate_samples(&samples, feature_dim)?;
        Ok(Self {
            meta: DatasetMeta {
                version: DATASET_VERSION,
                feature_dim,
                generator,
            },
            samples,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.meta.feature_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Splits off the trailing `fraction` of samples as a held-out set.
    ///
    /// `fraction == 0` returns every sample as training data and an empty
    /// held-out set. Otherwise both sides keep at least one sample.
    pub fn holdout(&self, fraction: f64) -> Result<(&[RankedSample], &[RankedSample])> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(invalid(format!("holdout fraction must lie in [0, 1), got {fraction}")));
        }
        let m = self.samples.len();
        if fraction == 0.0 {
            return Ok((&self.samples, &[]));
        }
        if m < 2 {
            return Err(invalid("a holdout split needs at least two samples"));
        }
        let n_eval = ((m as f64 * fraction).round() as usize).clamp(1, m - 1);
        Ok(self.samples.split_at(m - n_eval))
    }
}

fn validate_samples(samples: &[RankedSample], feature_dim: usize) -> Result<()> {
    let mut ids = HashSet::new();
    for s in samples {
        if s.dim() != feature_dim {
            return Err(Error::Validation {
                sample_id: s.id().to_string(),
                message: format!(
                    "feature dimension {} differs from dataset dimension {feature_dim}",
                    s.dim()
                ),
            });
        }
        if !ids.insert(s.id()) {
            return Err(Error::Validation {
                sample_id: s.id().to_string(),
                message: "duplicate sample id".into(),
            });
        }
    }
    Ok(())
}

/// Draws a synthetic dataset. The hidden model is drawn first, then each
/// sample's features followed by its per-item noise. A noise draw happens
/// even when `noise_sigma == 0`, so specs that differ only in noise share
/// features and hidden model.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let model = GeneratorModel::draw(spec, &mut rng);
    let (n, d) = (spec.items_per_sample, spec.feature_dim);
    let mut samples = Vec::with_capacity(spec.n_samples);
    for idx in 0..spec.n_samples {
        let features = normals(&mut rng, n * d);
        let gt: Vec<f64> = features
            .chunks(d)
            .map(|x| {
                let noise: f64 = rng.sample(StandardNormal);
                model.depth(x) + spec.noise_sigma * noise
            })
            .collect();
        samples.push(RankedSample::new(format!("s{idx:05}"), d, features, gt)?);
    }
    Dataset::new(samples, Some(spec.clone()))
}

/// The hidden model `generate_synthetic(spec)` draws.
pub fn generator_model(spec: &SyntheticSpec) -> Result<GeneratorModel> {
    spec.validate()?;
    Ok(GeneratorModel::draw(spec, &mut seeded_rng(spec.seed)))
}

/// Affine min-max map of raw scores onto `[0, MAX_RELEVANCE]`. A constant
/// list maps to all zeros.
pub fn normalize_relevance(raw: &[f64]) -> Vec<f64> {
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 || !range.is_finite() {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|v| (v - lo) / range * MAX_RELEVANCE).collect()
}

/// `k` distinct item indices, uniform without replacement.
pub fn sample_points(sample: &RankedSample, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let n = sample.len();
    if k == 0 || k > n {
        return Err(invalid(format!("cannot draw {k} points from {n} items")));
    }
    Ok(index::sample(rng, n, k).into_vec())
}

/// `k` ordered pairs of distinct items, drawn independently (pairs may
/// repeat), labelled from the sample's raw ground-truth scores.
pub fn sample_pairs(sample: &RankedSample, k: usize, tie_threshold: f64, rng: &mut Rng) -> Result<Vec<OrdinalPair>> {
    let n = sample.len();
    if n < 2 {
        return Err(invalid("pair sampling needs at least two items"));
    }
    if k == 0 {
        return Err(invalid("pair count must be at least 1"));
    }
    (0..k)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            OrdinalPair::labelled(i, j, sample.gt_scores(), tie_threshold)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    feature_dim: usize,
    n_samples: usize,
    generator: Option<SyntheticSpec>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    n: usize,
    d: usize,
    features: Vec<f64>,
    gt: Vec<f64>,
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_dataset_to(ds, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_dataset_to(ds: &Dataset, out: &mut impl Write) -> Result<()> {
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: ds.meta.version,
        feature_dim: ds.meta.feature_dim,
        n_samples: ds.samples.len(),
        generator: ds.meta.generator.clone(),
    };
    writeln!(out, "{}", to_json(&header)?)?;
    for s in &ds.samples {
        let rec = Record {
            id: s.id().to_string(),
            n: s.len(),
            d: s.dim(),
            features: s.features().to_vec(),
            gt: s.gt_scores().to_vec(),
        };
        writeln!(out, "{}", to_json(&rec)?)?;
    }
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset_from(BufReader::new(fs::File::open(path)?))
}

pub fn read_dataset_from(input: impl BufRead) -> Result<Dataset> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty file, expected dataset header".into(),
    })?;
    let header: Header = parse_line(1, &first?)?;
    if header.format != DATASET_FORMAT {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected format `{DATASET_FORMAT}`, found `{}`", header.format),
        });
    }
    if header.version != DATASET_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: DATASET_VERSION,
        });
    }
    let mut samples = Vec::with_capacity(header.n_samples);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if samples.len() == header.n_samples {
            return Err(Error::Parse {
                line: lineno,
                message: format!("unexpected record after the {} declared samples", header.n_samples),
            });
        }
        let rec: Record = parse_line(lineno, &line)?;
        if rec.gt.len() != rec.n || rec.features.len() != rec.n * rec.d {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "record `{}` does not match its declared n={} d={}",
                    rec.id, rec.n, rec.d
                ),
            });
        }
        if rec.d != header.feature_dim {
            return Err(Error::Validation {
                sample_id: rec.id,
                message: format!(
                    "feature dimension {} differs from header dimension {}",
                    rec.d, header.feature_dim
                ),
            });
        }
        samples.push(RankedSample::new(rec.id, rec.d, rec.features, rec.gt)?);
    }
    if samples.len() != header.n_samples {
        return Err(Error::Parse {
            line: samples.len() + 2,
            message: format!(
                "truncated file: header declares {} samples, found {}",
                header.n_samples,
                samples.len()
            ),
        });
    }
    validate_samples(&samples, header.feature_dim)?;
    Ok(Dataset {
        meta: DatasetMeta {
            version: header.version,
            feature_dim: header.feature_dim,
            generator: header.generator,
        },
        samples,
    })
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| invalid(format!("serialization failed: {e}")))
}

pub(crate) fn parse_line<T: for<'de> Deserialize<'de>>(line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}
