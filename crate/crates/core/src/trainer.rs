//! Trainable scorers, hand-written backpropagation and momentum SGD.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{parse_line, sample_pairs, sample_points, seeded_rng, to_json, Rng};
use crate::error::{invalid, Error, Result};
use crate::losses::{
    listmle_loss, listnet_loss, pairwise_loss, weighted_listmle_loss, LossKind, LossResult, WeightConfig,
};
use crate::metrics::{evaluate, EvalConfig, MetricReport};
use crate::ranking::{OrdinalPair, RankedSample, SampleView, ScoreVector};

pub const PARAMS_FORMAT: &str = "depthrank-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerFamily {
    Linear,
    Mlp,
}

impl ScorerFamily {
    pub const ALL: [ScorerFamily; 2] = [ScorerFamily::Linear, ScorerFamily::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ScorerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of a scorer, flattened into one vector.
///
/// Linear layout: `[w (d), b]`.
/// MLP layout: `[W (h×d row-major), b_h (h), v (h), b_o]`, scoring
/// `v · tanh(W x + b_h) + b_o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    family: ScorerFamily,
    dim: usize,
    hidden: usize,
    theta: Vec<f64>,
}

impl ScorerParams {
    pub fn param_count(family: ScorerFamily, dim: usize, hidden: usize) -> usize {
        match family {
            ScorerFamily::Linear => dim + 1,
            ScorerFamily::Mlp => hidden * dim + 2 * hidden + 1,
        }
    }

    pub fn from_theta(family: ScorerFamily, dim: usize, hidden: usize, theta: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("feature dimension must be at least 1"));
        }
        if family == ScorerFamily::Mlp && hidden == 0 {
            return Err(invalid("mlp scorer needs at least one hidden unit"));
        }
        let hidden = if family == ScorerFamily::Linear { 0 } else { hidden };
        let expected = Self::param_count(family, dim, hidden);
        if theta.len() != expected {
            return Err(invalid(format!(
                "{family} scorer with d={dim} h={hidden} needs {expected} parameters, got {}",
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(invalid("scorer parameters must be finite"));
        }
        Ok(Self {
            family,
            dim,
            hidden,
            theta,
        })
    }

    pub fn linear(weights: Vec<f64>, bias: f64) -> Result<Self> {
        let dim = weights.len();
        let mut theta = weights;
        theta.push(bias);
        Self::from_theta(ScorerFamily::Linear, dim, 0, theta)
    }

    /// Zeros for the linear family; symmetric uniform `±1/√fan_in` for the
    /// MLP, with the output layer's fan-in being `hidden`.
    pub fn init(family: ScorerFamily, dim: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        let n = Self::param_count(family, dim, hidden);
        let theta = match family {
            ScorerFamily::Linear => vec![0.0; n],
            ScorerFamily::Mlp => {
                let in_scale = 1.0 / (dim as f64).sqrt();
                let out_scale = 1.0 / (hidden as f64).sqrt();
                let mut theta = Vec::with_capacity(n);
                theta.extend((0..hidden * dim).map(|_| rng.random_range(-in_scale..in_scale)));
                theta.extend((0..hidden).map(|_| rng.random_range(-in_scale..in_scale)));
                theta.extend((0..hidden).map(|_| rng.random_range(-out_scale..out_scale)));
                theta.push(rng.random_range(-out_scale..out_scale));
                theta
            }
        };
        Self::from_theta(family, dim, hidden, theta)
    }

    pub fn family(&self) -> ScorerFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Same shape, new parameter values.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::from_theta(self.family, self.dim, self.hidden, theta)
    }

    /// Multiplies every weight (not the biases) of a linear scorer by `c`.
    pub fn scaled_weights(&self, c: f64) -> Result<Self> {
        let mut theta = self.theta.clone();
        match self.family {
            ScorerFamily::Linear => theta[..self.dim].iter_mut().for_each(|w| *w *= c),
            ScorerFamily::Mlp => return Err(invalid("weight scaling is defined for linear scorers")),
        }
        self.with_theta(theta)
    }
}

/// Scores for every item of a row-major `features` block.
pub fn score(params: &ScorerParams, features: &[f64]) -> Result<ScoreVector> {
    ScoreVector::new(forward(params, features)?.scores)
}

struct Forward {
    scores: Vec<f64>,
    /// Hidden activations, `n × h` row-major (MLP only).
    hidden: Vec<f64>,
}

fn forward(params: &ScorerParams, features: &[f64]) -> Result<Forward> {
    let d = params.dim;
    if !features.len().is_multiple_of(d) {
        return Err(invalid(format!(
            "feature block of length {} is not a multiple of the scorer dimension {d}",
            features.len()
        )));
    }
    let theta = &params.theta;
    match params.family {
        ScorerFamily::Linear => {
            let (w, b) = (&theta[..d], theta[d]);
            let scores = features.chunks(d).map(|x| dot(w, x) + b).collect();
            Ok(Forward {
                scores,
                hidden: Vec::new(),
            })
        }
        ScorerFamily::Mlp => {
            let h = params.hidden;
            let (w_in, rest) = theta.split_at(h * d);
            let (b_h, rest) = rest.split_at(h);
            let (v, b_o) = (&rest[..h], rest[h]);
            let n = features.len() / d;
            let mut hidden = Vec::with_capacity(n * h);
            let mut scores = Vec::with_capacity(n);
            for x in features.chunks(d) {
                let start = hidden.len();
                hidden.extend(w_in.chunks(d).zip(b_h).map(|(row, b)| (dot(row, x) + b).tanh()));
                scores.push(dot(v, &hidden[start..]) + b_o);
            }
            Ok(Forward { scores, hidden })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parameter gradient `Jᵀ · upstream` where `J` is the Jacobian of
/// [`score`] at `features`.
fn pullback(params: &ScorerParams, features: &[f64], fwd: &Forward, upstream: &[f64]) -> Vec<f64> {
    let d = params.dim;
    let mut grad = vec![0.0; params.theta.len()];
    match params.family {
        ScorerFamily::Linear => {
            for (x, &g) in features.chunks(d).zip(upstream) {
                for (slot, xv) in grad[..d].iter_mut().zip(x) {
                    *slot += g * xv;
                }
                grad[d] += g;
            }
        }
        ScorerFamily::Mlp => {
            let h = params.hidden;
            let v = &params.theta[h * d + h..h * d + 2 * h];
            let (g_in, rest) = grad.split_at_mut(h * d);
            let (g_bh, rest) = rest.split_at_mut(h);
            let (g_v, g_bo) = rest.split_at_mut(h);
            for ((x, act), &g) in features.chunks(d).zip(fwd.hidden.chunks(h)).zip(upstream) {
                g_bo[0] += g;
                for k in 0..h {
                    g_v[k] += g * act[k];
                    let delta = g * v[k] * (1.0 - act[k] * act[k]);
                    g_bh[k] += delta;
                    for (slot, xv) in g_in[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *slot += delta * xv;
                    }
                }
            }
        }
    }
    grad
}

/// One supervised list: the items it scores plus, for the pairwise loss,
/// the ordinal pairs (indices into `view`).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub view: SampleView,
    pub pairs: Vec<OrdinalPair>,
}

impl Example {
    pub fn listwise(view: SampleView) -> Self {
        Self {
            view,
            pairs: Vec::new(),
        }
    }
}

/// Loss and gradient with respect to the predicted scores of one example.
///
/// Pairwise: mean of per-pair losses, per-pair gradients scattered onto the
/// scores and divided by the pair count. ListNet targets are the softmax of
/// the graded relevance; weighted ListMLE weights use the graded relevance.
pub fn score_loss(kind: LossKind, weights: &WeightConfig, example: &Example, scores: &[f64]) -> Result<LossResult> {
    let view = &example.view;
    if scores.len() != view.len() {
        return Err(invalid(format!(
            "{} scores for a list of {} items",
            scores.len(),
            view.len()
        )));
    }
    match kind {
        LossKind::Pairwise => {
            if example.pairs.is_empty() {
                return Err(invalid("pairwise loss needs at least one pair"));
            }
            let mut grad = vec![0.0; scores.len()];
            let mut value = crate::numeric::CompensatedSum::new();
            let m = example.pairs.len() as f64;
            for p in &example.pairs {
                if p.i >= scores.len() || p.j >= scores.len() {
                    return Err(invalid(format!("pair ({}, {}) out of range", p.i, p.j)));
                }
                let r = pairwise_loss(scores[p.i], scores[p.j], p.r)?;
                value.add(r.value);
                grad[p.i] += r.grad[0] / m;
                grad[p.j] += r.grad[1] / m;
            }
            Ok(LossResult {
                value: value.value() / m,
                grad,
            })
        }
        LossKind::Listnet => listnet_loss(&view.relevance, scores),
        LossKind::Listmle => listmle_loss(&view.gt_perm, scores),
        LossKind::WeightedListmle => weighted_listmle_loss(&view.gt_perm, &view.relevance, scores, weights),
    }
}

/// Loss value and parameter gradient for one example.
pub fn backprop(
    params: &ScorerParams,
    example: &Example,
    kind: LossKind,
    weights: &WeightConfig,
) -> Result<(f64, Vec<f64>)> {
    if example.view.dim != params.dim {
        return Err(invalid(format!(
            "example dimension {} does not match scorer dimension {}",
            example.view.dim, params.dim
        )));
    }
    let fwd = forward(params, &example.view.features)?;
    if fwd.scores.iter().any(|v| !v.is_finite()) {
        return Err(diverged("scorer produced non-finite scores".into()));
    }
    let loss = score_loss(kind, weights, example, &fwd.scores)?;
    Ok((loss.value, pullback(params, &example.view.features, &fwd, &loss.grad)))
}

/// Loss value only, as a function of the flattened parameters.
pub fn loss_value(params: &ScorerParams, example: &Example, kind: LossKind, weights: &WeightConfig) -> Result<f64> {
    let scores = forward(params, &example.view.features)?.scores;
    Ok(score_loss(kind, weights, example, &scores)?.value)
}

/// Classic momentum step: `v ← μ v − η g`, `θ ← θ + v`.
///
/// Returns the updated parameters and velocity.
pub fn sgd_step(
    params: &ScorerParams,
    grad: &[f64],
    learning_rate: f64,
    momentum: f64,
    velocity: &[f64],
) -> Result<(ScorerParams, Vec<f64>)> {
    let n = params.theta.len();
    if grad.len() != n || velocity.len() != n {
        return Err(invalid(format!(
            "sgd step shape mismatch: {n} parameters, {} gradients, {} velocities",
            grad.len(),
            velocity.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(diverged("non-finite gradient".into()));
    }
    let new_velocity: Vec<f64> = velocity
        .iter()
        .zip(grad)
        .map(|(v, g)| momentum * v - learning_rate * g)
        .collect();
    let theta: Vec<f64> = params.theta.iter().zip(&new_velocity).map(|(t, v)| t + v).collect();
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(diverged("parameters overflowed".into()));
    }
    Ok((params.with_theta(theta)?, new_velocity))
}

/// Divergence error without epoch context; [`train`] fills it in.
fn diverged(reason: String) -> Error {
    Error::Diverged {
        epoch: 0,
        reason,
        partial: Box::default(),
    }
}

fn with_epoch_context(err: Error, epoch: usize, trace: &TrainTrace) -> Error {
    match err {
        Error::Diverged { reason, .. } => Error::Diverged {
            epoch,
            reason,
            partial: Box::new(trace.clone()),
        },
        other => other,
    }
}

/// Momentum SGD with owned velocity.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &ScorerParams, grad: &[f64]) -> Result<ScorerParams> {
        let (next, velocity) = sgd_step(params, grad, self.learning_rate, self.momentum, &self.velocity)?;
        self.velocity = velocity;
        Ok(next)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub family: ScorerFamily,
    /// Hidden width of the MLP scorer; ignored for the linear family.
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Samples per SGD step.
    pub batch: usize,
    pub seed: u64,
    /// Points drawn per sample and epoch for listwise losses (capped at the
    /// sample size).
    pub points_per_sample: usize,
    /// Pairs drawn per sample and epoch for the pairwise loss.
    pub pairs_per_sample: usize,
    pub weights: WeightConfig,
    /// Ground-truth gap at or below which sampled pairs are labelled equal.
    pub gt_tie_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::WeightedListmle,
            family: ScorerFamily::Linear,
            hidden: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 10,
            batch: 10,
            seed: 0,
            points_per_sample: 500,
            pairs_per_sample: 3000,
            weights: WeightConfig::default(),
            gt_tie_threshold: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid("learning rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(invalid("epochs and batch size must be at least 1"));
        }
        if self.points_per_sample == 0 || self.pairs_per_sample == 0 {
            return Err(invalid("points and pairs per sample must be at least 1"));
        }
        if self.family == ScorerFamily::Mlp && self.hidden == 0 {
            return Err(invalid("mlp scorer needs at least one hidden unit"));
        }
        self.weights.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch.
    pub train_loss: f64,
    pub eval_whdr: f64,
    pub eval_map: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// Trace with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            epochs: self
                .epochs
                .iter()
                .map(|e| EpochRecord {
                    wall_seconds: 0.0,
                    ..e.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    pub trace: TrainTrace,
}

/// Draws this epoch's example for one sample.
pub fn draw_example(sample: &RankedSample, cfg: &TrainConfig, rng: &mut Rng) -> Result<Example> {
    match cfg.loss {
        LossKind::Pairwise => Ok(Example {
            view: sample.view(),
            pairs: sample_pairs(sample, cfg.pairs_per_sample, cfg.gt_tie_threshold, rng)?,
        }),
        _ => {
            if cfg.points_per_sample >= sample.len() {
                return Ok(Example::listwise(sample.view()));
            }
            let mut idx = sample_points(sample, cfg.points_per_sample, rng)?;
            idx.sort_unstable();
            Ok(Example::listwise(sample.subset(&idx)?))
        }
    }
}

/// Predictions of `params` for every sample.
pub fn predict(params: &ScorerParams, samples: &[RankedSample]) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| {
            if s.dim() != params.dim {
                return Err(invalid(format!(
                    "sample `{}` has dimension {} but the scorer expects {}",
                    s.id(),
                    s.dim(),
                    params.dim
                )));
            }
            Ok(score(params, s.features())?.into_inner())
        })
        .collect()
}

pub fn evaluate_params(params: &ScorerParams, samples: &[RankedSample], cfg: &EvalConfig) -> Result<MetricReport> {
    evaluate(samples, &predict(params, samples)?, cfg)
}

/// Mini-batch momentum SGD over shuffled samples, evaluating on `eval`
/// (or on `train` when `eval` is empty) after every epoch.
///
/// Every draw (initialisation, shuffling, point and pair sampling) comes
/// from one generator seeded with `cfg.seed`.
pub fn train(train: &[RankedSample], eval: &[RankedSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = train.first().ok_or_else(|| invalid("training set is empty"))?;
    let dim = first.dim();
    if let Some(bad) = train.iter().chain(eval).find(|s| s.dim() != dim) {
        return Err(Error::Validation {
            sample_id: bad.id().to_string(),
            message: format!("feature dimension {} differs from {dim}", bad.dim()),
        });
    }
    let eval = if eval.is_empty() { train } else { eval };
    let eval_cfg = EvalConfig {
        gt_tie_threshold: cfg.gt_tie_threshold,
        log_base: cfg.weights.log_base,
        ..EvalConfig::default()
    };

    let mut rng = seeded_rng(cfg.seed);
    let mut params = ScorerParams::init(cfg.family, dim, cfg.hidden, &mut rng)?;
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum, params.theta.len());
    let mut trace = TrainTrace::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = crate::numeric::CompensatedSum::new();
        for batch in order.chunks(cfg.batch) {
            let examples: Vec<Example> = batch
                .iter()
                .map(|&i| draw_example(&train[i], cfg, &mut rng))
                .collect::<Result<_>>()?;
            let (loss, grad) =
                batch_gradient(&params, &examples, cfg).map_err(|e| with_epoch_context(e, epoch, &trace))?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    reason: format!("non-finite loss {loss}"),
                    partial: Box::new(trace),
                });
            }
            epoch_loss.add(loss * batch.len() as f64);
            params = opt
                .step(&params, &grad)
                .map_err(|e| with_epoch_context(e, epoch, &trace))?;
        }
        let report = evaluate_params(&params, eval, &eval_cfg)?;
        trace.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss.value() / train.len() as f64,
            eval_whdr: report.whdr,
            eval_map: report.map,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome { params, trace })
}

/// Batch loss and gradient.
///
/// Listwise losses average per-sample values. The pairwise loss averages over
/// every sampled pair of the batch, i.e. per-sample means weighted by pair
/// count.
pub fn batch_gradient(params: &ScorerParams, examples: &[Example], cfg: &TrainConfig) -> Result<(f64, Vec<f64>)> {
    if examples.is_empty() {
        return Err(invalid("empty batch"));
    }
    let total_pairs: usize = examples.iter().map(|e| e.pairs.len()).sum();
    let mut grad = vec![0.0; params.theta.len()];
    let mut loss = 0.0;
    for ex in examples {
        let (value, g) = backprop(params, ex, cfg.loss, &cfg.weights)?;
        let w = match cfg.loss {
            LossKind::Pairwise => ex.pairs.len() as f64 / total_pairs as f64,
            _ => 1.0 / examples.len() as f64,
        };
        loss += w * value;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += w * gi;
        }
    }
    Ok((loss, grad))
}

#[derive(Serialize, Deserialize)]
struct ParamsHeader {
    format: String,
    version: u32,
    family: ScorerFamily,
    feature_dim: usize,
    hidden: usize,
    n_params: usize,
}

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    theta: Vec<f64>,
}

/// Writes the two-line params file: header then `{"theta":[...]}`.
pub fn write_params_to(params: &ScorerParams, out: &mut impl Write) -> Result<()> {
    let header = ParamsHeader {
        format: PARAMS_FORMAT.into(),
        version: PARAMS_VERSION,
        family: params.family,
        feature_dim: params.dim,
        hidden: params.hidden,
        n_params: params.theta.len(),
    };
    writeln!(out, "{}", to_json(&header)?)?;
    writeln!(
        out,
        "{}",
        to_json(&ParamsRecord {
            theta: params.theta.clone()
        })?
    )?;
    Ok(())
}

pub fn write_params(params: &ScorerParams, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_params_to(params, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_params_from(input: impl BufRead) -> Result<ScorerParams> {
    let mut lines = input.lines();
    let header: ParamsHeader = match lines.next() {
        Some(line) => parse_line(1, &line?)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file, expected params header".into(),
            })
        }
    };
    if header.format != PARAMS_FORMAT {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected format `{PARAMS_FORMAT}`, found `{}`", header.format),
        });
    }
    if header.version != PARAMS_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: PARAMS_VERSION,
        });
    }
    let record: ParamsRecord = match lines.next() {
        Some(line) => parse_line(2, &line?)?,
        None => {
            return Err(Error::Parse {
                line: 2,
                message: "truncated file: missing parameter record".into(),
            })
        }
    };
    if record.theta.len() != header.n_params {
        return Err(Error::Parse {
            line: 2,
            message: format!(
                "header declares {} parameters, found {}",
                header.n_params,
                record.theta.len()
            ),
        });
    }
    ScorerParams::from_theta(header.family, header.feature_dim, header.hidden, record.theta)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ScorerParams> {
    read_params_from(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::gradcheck::gradient_check;
    use crate::ranking::permutation_from_scores;

    fn toy_sample() -> RankedSample {
        let features = vec![3.0, 1.0, -1.0, 0.5, 0.0, 2.0, 1.5, -2.0];
        RankedSample::new("toy", 2, features, vec![0.2, 1.0, -0.3, 0.9]).unwrap()
    }

    #[test]
    fn linear_scores() {
        let s = toy_sample();
        let zero = ScorerParams::linear(vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(score(&zero, s.features()).unwrap().values(), &[0.0; 4]);
        let e1 = ScorerParams::linear(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(score(&e1, s.features()).unwrap().values()[0], 3.0);
    }

    #[test]
    fn dead_mlp_is_constant() {
        let (d, h) = (2, 3);
        let mut theta: Vec<f64> = (0..ScorerParams::param_count(ScorerFamily::Mlp, d, h))
            .map(|i| i as f64 * 0.1 - 0.4)
            .collect();
        let v_start = h * d + h;
        theta[v_start..v_start + h].iter_mut().for_each(|v| *v = 0.0);
        *theta.last_mut().unwrap() = 1.25;
        let p = ScorerParams::from_theta(ScorerFamily::Mlp, d, h, theta).unwrap();
        let scores = score(&p, toy_sample().features()).unwrap();
        assert!(scores.values().iter().all(|v| *v == 1.25));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = ScorerParams::linear(vec![1.0, 2.0, 3.0], 0.0).unwrap();
        assert!(score(&p, &[1.0, 2.0]).is_err());
        assert!(ScorerParams::from_theta(ScorerFamily::Linear, 2, 0, vec![0.0; 2]).is_err());
        let ex = Example::listwise(toy_sample().view());
        assert!(backprop(&p, &ex, LossKind::Listmle, &WeightConfig::default()).is_err());
    }

    #[test]
    fn zero_gain_gives_zero_parameter_gradient() {
        let s = RankedSample::new("flat", 2, vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 5.0]).unwrap();
        let p = ScorerParams::linear(vec![0.3, -0.7], 0.1).unwrap();
        let (value, grad) = backprop(
            &p,
            &Example::listwise(s.view()),
            LossKind::WeightedListmle,
            &WeightConfig::default(),
        )
        .unwrap();
        assert_eq!(value, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn backprop_matches_finite_differences_on_toy() {
        let s = toy_sample();
        let mut rng = seeded_rng(3);
        let pairs = sample_pairs(&s, 10, 0.15, &mut rng).unwrap();
        let ex = Example { view: s.view(), pairs };
        for family in ScorerFamily::ALL {
            let p = ScorerParams::init(family, 2, 4, &mut rng).unwrap();
            let p = p.with_theta(p.theta().iter().map(|t| t + 0.3).collect()).unwrap();
            for kind in LossKind::ALL {
                let cfg = WeightConfig::default();
                let (_, analytic) = backprop(&p, &ex, kind, &cfg).unwrap();
                let f = |theta: &[f64]| loss_value(&p.with_theta(theta.to_vec()).unwrap(), &ex, kind, &cfg).unwrap();
                let err = gradient_check(f, &analytic, p.theta(), 1e-5);
                assert!(err < 1e-6, "{family}/{kind}: {err}");
            }
        }
    }

    #[test]
    fn sgd_examples() {
        let p = ScorerParams::linear(vec![1.0, -2.0], 0.5).unwrap();
        let (same, v) = sgd_step(&p, &[0.0; 3], 0.1, 0.9, &[0.0; 3]).unwrap();
        assert_eq!(same, p);
        assert_eq!(v, vec![0.0; 3]);

        let g = [1.0, 2.0, -4.0];
        let (next, _) = sgd_step(&p, &g, 0.25, 0.0, &[0.0; 3]).unwrap();
        assert_eq!(next.theta(), &[0.75, -2.5, 1.5]);

        // Hand-unrolled: v1 = -ηg, v2 = -μηg - ηg = -1.9ηg, θ2 = θ0 - 2.9ηg.
        let eta = 0.125;
        let mut opt = Sgd::new(eta, 0.9, 3);
        let once = opt.step(&p, &g).unwrap();
        let twice = opt.step(&once, &g).unwrap();
        for ((t2, t0), gi) in twice.theta().iter().zip(p.theta()).zip(g) {
            assert!((t2 - (t0 - 2.9 * eta * gi)).abs() < 1e-14);
        }

        assert!(sgd_step(&p, &[f64::NAN, 0.0, 0.0], 0.1, 0.0, &[0.0; 3]).is_err());
        assert!(sgd_step(&p, &[0.0; 2], 0.1, 0.0, &[0.0; 3]).is_err());
    }

    fn tiny_dataset() -> crate::data::Dataset {
        generate_synthetic(&SyntheticSpec {
            n_samples: 12,
            items_per_sample: 8,
            feature_dim: 3,
            noise_sigma: 0.0,
            family: ScorerFamily::Linear,
            seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn one_epoch_trace() {
        let ds = tiny_dataset();
        let cfg = TrainConfig {
            epochs: 1,
            batch: 4,
            ..TrainConfig::default()
        };
        let out = train(&ds.samples, &[], &cfg).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert!(cfg.clone().validate().is_ok());
        assert!(train(&ds.samples, &[], &TrainConfig { epochs: 0, ..cfg }).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_dataset();
        for loss in LossKind::ALL {
            let cfg = TrainConfig {
                loss,
                family: ScorerFamily::Mlp,
                hidden: 4,
                epochs: 3,
                batch: 3,
                points_per_sample: 5,
                pairs_per_sample: 20,
                seed: 99,
                ..TrainConfig::default()
            };
            let a = train(&ds.samples, &[], &cfg).unwrap();
            let b = train(&ds.samples, &[], &cfg).unwrap();
            assert_eq!(a.params, b.params);
            assert_eq!(a.trace.without_timing(), b.trace.without_timing());
        }
    }

    #[test]
    fn divergence_is_reported_with_partial_trace() {
        let ds = tiny_dataset();
        let cfg = TrainConfig {
            // Every pair labelled equal: the squared branch grows without bound.
            loss: LossKind::Pairwise,
            family: ScorerFamily::Mlp,
            hidden: 4,
            gt_tie_threshold: 1e9,
            learning_rate: 1e6,
            momentum: 0.0,
            epochs: 50,
            batch: 1,
            ..TrainConfig::default()
        };
        match train(&ds.samples, &[], &cfg) {
            Err(Error::Diverged { partial, .. }) => assert!(partial.len() < 50),
            Err(Error::InvalidInput(msg)) => panic!("divergence surfaced as invalid input: {msg}"),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.trace)),
        }
    }

    #[test]
    fn scaling_linear_weights_keeps_ranking() {
        let s = toy_sample();
        let p = ScorerParams::linear(vec![0.4, -1.1], 0.0).unwrap();
        let base = permutation_from_scores(score(&p, s.features()).unwrap().values()).unwrap();
        for c in [0.01, 3.0, 250.0] {
            let scaled = p.scaled_weights(c).unwrap();
            let perm = permutation_from_scores(score(&scaled, s.features()).unwrap().values()).unwrap();
            assert_eq!(perm, base);
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = seeded_rng(1);
        for family in ScorerFamily::ALL {
            let p = ScorerParams::init(family, 4, 3, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_params_to(&p, &mut buf).unwrap();
            assert_eq!(read_params_from(buf.as_slice()).unwrap(), p);
        }
        let header_only = "{\"format\":\"depthrank-params\",\"version\":1,\"family\":\"linear\",\"feature_dim\":1,\"hidden\":0,\"n_params\":2}\n";
        assert!(matches!(
            read_params_from(header_only.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
