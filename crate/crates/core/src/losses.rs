//! Ranking losses over predicted scores, each with its analytic gradient.
//!
//! * [`pairwise_loss`]: logistic loss on ordered pairs, squared difference on
//!   equal pairs.
//! * [`listnet_loss`]: cross entropy between top-one (softmax) distributions.
//! * [`listmle_loss`]: negative Plackett-Luce log-likelihood of the
//!   ground-truth permutation.
//! * [`weighted_listmle_loss`]: ListMLE with per-position gain × discount
//!   weights.
//!
//! All listwise terms are accumulated in ascending rank order with
//! compensated summation so values are reproducible to the last few ulps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{log_add_exp, log_softmax, sigmoid, softmax, softplus, CompensatedSum};
use crate::ranking::{OrdinalLabel, Permutation};

/// Largest relevance accepted by [`gain`].
pub const MAX_GAIN_INPUT: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// Partial derivatives with respect to each predicted score. Length 2
    /// (`∂/∂z_i`, `∂/∂z_j`) for [`pairwise_loss`].
    pub grad: Vec<f64>,
}

/// The four supported training objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Pairwise,
    Listnet,
    Listmle,
    WeightedListmle,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Pairwise,
        LossKind::Listnet,
        LossKind::Listmle,
        LossKind::WeightedListmle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pairwise => "pairwise",
            Self::Listnet => "listnet",
            Self::Listmle => "listmle",
            Self::WeightedListmle => "weighted-listmle",
        }
    }

    pub fn is_listwise(self) -> bool {
        !matches!(self, Self::Pairwise)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown loss `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainFn {
    /// `G(s) = 1`
    IdentityOne,
    /// `G(s) = 2^s - 1`
    TwoPowMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscountFn {
    /// `D(i) = 1`
    IdentityOne,
    /// `D(i) = 1 / log_b(i + 1)`
    InverseLog,
}

/// Gain and discount used by [`weighted_listmle_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub gain: GainFn,
    pub discount: DiscountFn,
    pub log_base: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            gain: GainFn::TwoPowMinusOne,
            discount: DiscountFn::InverseLog,
            log_base: 2.0,
        }
    }
}

impl WeightConfig {
    pub fn new(gain: GainFn, discount: DiscountFn, log_base: f64) -> Result<Self> {
        let cfg = Self {
            gain,
            discount,
            log_base,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unit gain and unit discount: reduces the weighted loss to ListMLE.
    pub fn unweighted() -> Self {
        Self {
            gain: GainFn::IdentityOne,
            discount: DiscountFn::IdentityOne,
            log_base: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.log_base.is_finite() && self.log_base > 1.0) {
            return Err(Error::Range(format!(
                "discount log base must be finite and > 1, got {}",
                self.log_base
            )));
        }
        Ok(())
    }

    pub fn gain(&self, s: f64) -> Result<f64> {
        match self.gain {
            GainFn::IdentityOne => Ok(1.0),
            GainFn::TwoPowMinusOne => gain(s),
        }
    }

    pub fn discount(&self, pos: usize) -> Result<f64> {
        match self.discount {
            DiscountFn::IdentityOne => {
                if pos == 0 {
                    return Err(invalid("rank positions are 1-based"));
                }
                Ok(1.0)
            }
            DiscountFn::InverseLog => discount(pos, self.log_base),
        }
    }
}

/// `G(s) = 2^s - 1` for graded relevance `s ∈ [0, 60]`.
pub fn gain(s: f64) -> Result<f64> {
    if !s.is_finite() || !(0.0..=MAX_GAIN_INPUT).contains(&s) {
        return Err(Error::Range(format!(
            "gain input must lie in [0, {MAX_GAIN_INPUT}], got {s}"
        )));
    }
    Ok(s.exp2() - 1.0)
}

/// `D(pos) = 1 / log_base(pos + 1)` for a 1-based rank position.
pub fn discount(pos: usize, log_base: f64) -> Result<f64> {
    if pos == 0 {
        return Err(invalid("rank positions are 1-based"));
    }
    if !(log_base.is_finite() && log_base > 1.0) {
        return Err(Error::Range(format!("log base must be > 1, got {log_base}")));
    }
    // Keep base 2 on the exact log2 path so D(1) == 1 and D(3) == 0.5 exactly.
    let log = if log_base == 2.0 {
        ((pos + 1) as f64).log2()
    } else {
        ((pos + 1) as f64).ln() / log_base.ln()
    };
    Ok(1.0 / log)
}

/// Pairwise loss on one labelled pair of predicted scores.
///
/// `Closer`: `ln(1 + e^{-(z_i - z_j)})`, `Farther`: `ln(1 + e^{z_i - z_j})`,
/// `Equal`: `(z_i - z_j)^2`.
pub fn pairwise_loss(z_i: f64, z_j: f64, r: OrdinalLabel) -> Result<LossResult> {
    if !(z_i.is_finite() && z_j.is_finite()) {
        return Err(invalid("pairwise loss needs finite scores"));
    }
    let d = z_i - z_j;
    let (value, di) = match r {
        OrdinalLabel::Closer => (softplus(-d), -sigmoid(-d)),
        OrdinalLabel::Farther => (softplus(d), sigmoid(d)),
        OrdinalLabel::Equal => (d * d, 2.0 * d),
    };
    Ok(LossResult {
        value,
        grad: vec![di, -di],
    })
}

/// Same as [`pairwise_loss`] with the label given as the raw integer `r`.
pub fn pairwise_loss_raw(z_i: f64, z_j: f64, r: i8) -> Result<LossResult> {
    pairwise_loss(z_i, z_j, OrdinalLabel::try_from(r)?)
}

/// Softmax of the scores: the probability of each item being ranked first.
pub fn top_one_probabilities(scores: &[f64]) -> Result<Vec<f64>> {
    check_scores(scores)?;
    Ok(softmax(scores))
}

/// Cross entropy between the top-one distributions of the ground-truth and
/// the predicted scores.
pub fn listnet_loss(gt_scores: &[f64], pred_scores: &[f64]) -> Result<LossResult> {
    check_scores(gt_scores)?;
    check_scores(pred_scores)?;
    check_lengths(gt_scores.len(), pred_scores.len())?;
    let target = softmax(gt_scores);
    let log_pred = log_softmax(pred_scores);
    let value = target
        .iter()
        .zip(&log_pred)
        .map(|(p, lq)| -p * lq)
        .collect::<CompensatedSum>()
        .value();
    let grad = log_pred.iter().zip(&target).map(|(lq, p)| lq.exp() - p).collect();
    Ok(LossResult {
        value: value.max(0.0),
        grad,
    })
}

/// `out[i] = ln Σ_{s ≥ i} e^{values[s]}`, one reverse pass.
pub fn suffix_logsumexp(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let mut running = f64::NEG_INFINITY;
    for (slot, &v) in out.iter_mut().zip(values).rev() {
        running = log_add_exp(v, running);
        *slot = running;
    }
    out
}

/// Log-probability of `perm` under the Plackett-Luce model with the given
/// scores. Always `≤ 0`.
pub fn plackett_luce_log_prob(perm: &Permutation, scores: &[f64]) -> Result<f64> {
    check_scores(scores)?;
    check_lengths(perm.len(), scores.len())?;
    let ranked = perm.arrange(scores);
    let lse = suffix_logsumexp(&ranked);
    let total: CompensatedSum = ranked.iter().zip(&lse).map(|(v, l)| v - l).collect();
    Ok(total.value().min(0.0))
}

/// ListMLE: negative Plackett-Luce log-likelihood of `gt_perm`.
pub fn listmle_loss(gt_perm: &Permutation, pred_scores: &[f64]) -> Result<LossResult> {
    check_scores(pred_scores)?;
    check_lengths(gt_perm.len(), pred_scores.len())?;
    let weights = vec![1.0; pred_scores.len()];
    Ok(weighted_plackett_luce(gt_perm, pred_scores, &weights))
}

/// ListMLE with the term at 1-based position `i` weighted by
/// `G(s_{y(i)}) · D(i)`.
///
/// `gt_scores` are graded relevances (see
/// [`normalize_relevance`](crate::data::normalize_relevance)).
pub fn weighted_listmle_loss(
    gt_perm: &Permutation,
    gt_scores: &[f64],
    pred_scores: &[f64],
    cfg: &WeightConfig,
) -> Result<LossResult> {
    cfg.validate()?;
    check_scores(pred_scores)?;
    check_scores(gt_scores)?;
    check_lengths(gt_perm.len(), pred_scores.len())?;
    check_lengths(gt_scores.len(), pred_scores.len())?;
    let weights = position_weights(gt_perm, gt_scores, cfg)?;
    Ok(weighted_plackett_luce(gt_perm, pred_scores, &weights))
}

/// Per-position weights `G(s_{y(i)}) · D(i)` in rank order.
pub fn position_weights(gt_perm: &Permutation, gt_scores: &[f64], cfg: &WeightConfig) -> Result<Vec<f64>> {
    gt_perm
        .order()
        .iter()
        .enumerate()
        .map(|(pos, &item)| Ok(cfg.gain(gt_scores[item])? * cfg.discount(pos + 1)?))
        .collect()
}

/// Shared kernel for ListMLE and its weighted form. `weights[p]` multiplies
/// the term at 0-based rank `p`; the last position's term is identically 0.
fn weighted_plackett_luce(perm: &Permutation, scores: &[f64], weights: &[f64]) -> LossResult {
    let n = scores.len();
    let ranked = perm.arrange(scores);
    let lse = suffix_logsumexp(&ranked);

    let mut value = CompensatedSum::new();
    for p in 0..n.saturating_sub(1) {
        value.add(weights[p] * (lse[p] - ranked[p]));
    }

    // ∂L/∂v_p = -w_p + Σ_{i ≤ p} w_i · e^{v_p - lse_i}, with the suffix
    // softmax mass accumulated in log space.
    let mut grad = vec![0.0; n];
    let mut log_mass = f64::NEG_INFINITY;
    for p in 0..n {
        if p + 1 < n && weights[p] > 0.0 {
            log_mass = log_add_exp(log_mass, weights[p].ln() - lse[p]);
        }
        let own = if p + 1 < n { weights[p] } else { 0.0 };
        let spread = if log_mass == f64::NEG_INFINITY {
            0.0
        } else {
            (ranked[p] + log_mass).exp()
        };
        grad[perm.order()[p]] = spread - own;
    }
    LossResult {
        value: value.value(),
        grad,
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(invalid("score vector is empty"));
    }
    if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("score at index {pos} is not finite")));
    }
    Ok(())
}

fn check_lengths(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(invalid(format!("length mismatch: {expected} vs {found}")));
    }
    Ok(())
}
