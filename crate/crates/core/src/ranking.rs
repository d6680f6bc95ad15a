//! Ranking domain types: score vectors, permutations, ordinal pairs and
//! ranked samples.
//!
//! Item indices are 0-based. Ranks exposed through [`Permutation::rank_of`]
//! and [`Permutation::inverse`] are 1-based, position 1 being the top
//! (closest / most relevant) item.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{invalid, Error, Result};

/// Per-item real-valued scores. Higher means closer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("score at index {pos} is not finite ({})", values[pos])));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ScoreVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A total order over item indices together with its rank-of-item view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    /// Builds a permutation from an explicit top-to-bottom order.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(invalid("permutation must contain at least one item"));
        }
        let mut inverse = vec![0usize; n];
        for (pos, &item) in order.iter().enumerate() {
            if item >= n {
                return Err(invalid(format!("item index {item} out of range for n={n}")));
            }
            if inverse[item] != 0 {
                return Err(invalid(format!("item index {item} appears twice")));
            }
            inverse[item] = pos + 1;
        }
        Ok(Self { order, inverse })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_order((0..n).collect())
    }

    /// Item indices from top rank to bottom rank.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `inverse()[item]` is the 1-based rank of `item`.
    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn rank_of(&self, item: usize) -> usize {
        self.inverse[item]
    }

    /// Item at the 1-based rank `rank`.
    pub fn item_at(&self, rank: usize) -> usize {
        self.order[rank - 1]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Gathers `values` into ranked order.
    pub fn arrange(&self, values: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&i| values[i]).collect()
    }
}

/// Orders indices by non-increasing score; exact ties keep ascending index.
pub fn permutation_from_scores(scores: &[f64]) -> Result<Permutation> {
    if scores.is_empty() {
        return Err(invalid("cannot rank an empty score vector"));
    }
    if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("score at index {pos} is not finite")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable, so equal scores stay in index order.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    Permutation::from_order(order)
}

/// Rank-of-item map (1-based) of a permutation.
pub fn invert(perm: &Permutation) -> Vec<usize> {
    perm.inverse().to_vec()
}

/// Ordinal relation of item `i` relative to item `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrdinalLabel {
    /// `r = +1`: item `i` is closer.
    Closer,
    /// `r = -1`: item `j` is closer.
    Farther,
    /// `r = 0`: same depth.
    Equal,
}

impl OrdinalLabel {
    pub fn value(self) -> i8 {
        match self {
            Self::Closer => 1,
            Self::Farther => -1,
            Self::Equal => 0,
        }
    }

    /// Label of a score difference `z_i - z_j` against a symmetric tie band.
    pub fn from_difference(diff: f64, tie_threshold: f64) -> Self {
        if diff > tie_threshold {
            Self::Closer
        } else if diff < -tie_threshold {
            Self::Farther
        } else {
            Self::Equal
        }
    }
}

impl TryFrom<i8> for OrdinalLabel {
    type Error = Error;

    fn try_from(r: i8) -> Result<Self> {
        match r {
            1 => Ok(Self::Closer),
            -1 => Ok(Self::Farther),
            0 => Ok(Self::Equal),
            other => Err(invalid(format!("ordinal label must be +1, -1 or 0, got {other}"))),
        }
    }
}

impl fmt::Display for OrdinalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrdinalPair {
    pub i: usize,
    pub j: usize,
    pub r: OrdinalLabel,
}

impl OrdinalPair {
    pub fn new(i: usize, j: usize, r: OrdinalLabel) -> Result<Self> {
        if i == j {
            return Err(invalid(format!("ordinal pair needs distinct items, got ({i}, {i})")));
        }
        Ok(Self { i, j, r })
    }

    /// Labels `(i, j)` from ground-truth scores.
    pub fn labelled(i: usize, j: usize, gt_scores: &[f64], tie_threshold: f64) -> Result<Self> {
        let diff = gt_scores[i] - gt_scores[j];
        Self::new(i, j, OrdinalLabel::from_difference(diff, tie_threshold))
    }
}

/// Every unordered pair `(i, j)` with `i < j`, labelled from `gt_scores`.
pub fn pairs_from_permutation(perm: &Permutation, gt_scores: &[f64], tie_threshold: f64) -> Result<Vec<OrdinalPair>> {
    let n = gt_scores.len();
    if n < 2 {
        return Err(invalid("need at least two items to form pairs"));
    }
    if perm.len() != n {
        return Err(invalid(format!(
            "permutation has {} items but {} scores were given",
            perm.len(),
            n
        )));
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push(OrdinalPair::labelled(i, j, gt_scores, tie_threshold)?);
        }
    }
    Ok(pairs)
}

/// One query: a list of items with features and ground-truth depth scores.
///
/// `relevance` is the per-sample min-max normalisation of `gt_scores` into
/// `[0, 4]`, the graded relevance consumed by gain-weighted losses and NDCG.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSample {
    id: String,
    dim: usize,
    features: Vec<f64>,
    gt_scores: Vec<f64>,
    relevance: Vec<f64>,
    gt_perm: Permutation,
}

impl RankedSample {
    /// `features` is row-major, `gt_scores.len()` rows of `dim` columns.
    pub fn new(id: impl Into<String>, dim: usize, features: Vec<f64>, gt_scores: Vec<f64>) -> Result<Self> {
        let id = id.into();
        let fail = |message: String| Error::Validation {
            sample_id: id.clone(),
            message,
        };
        let n = gt_scores.len();
        if n == 0 {
            return Err(fail("sample has no items".into()));
        }
        if dim == 0 {
            return Err(fail("feature dimension must be at least 1".into()));
        }
        if features.len() != n * dim {
            return Err(fail(format!(
                "expected {} feature values for {n} items of dimension {dim}, found {}",
                n * dim,
                features.len()
            )));
        }
        if features.iter().chain(&gt_scores).any(|v| !v.is_finite()) {
            return Err(fail("non-finite feature or score".into()));
        }
        let gt_perm = permutation_from_scores(&gt_scores)?;
        let relevance = crate::data::normalize_relevance(&gt_scores);
        Ok(Self {
            id,
            dim,
            features,
            gt_scores,
            relevance,
            gt_perm,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.gt_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt_scores.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn item(&self, index: usize) -> &[f64] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    pub fn gt_scores(&self) -> &[f64] {
        &self.gt_scores
    }

    pub fn relevance(&self) -> &[f64] {
        &self.relevance
    }

    pub fn gt_perm(&self) -> &Permutation {
        &self.gt_perm
    }

    /// Restriction of the sample to `indices`, keeping the relevance grades
    /// of the full sample.
    pub fn subset(&self, indices: &[usize]) -> Result<SampleView> {
        if indices.is_empty() {
            return Err(invalid("subset must keep at least one item"));
        }
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut gt_scores = Vec::with_capacity(indices.len());
        let mut relevance = Vec::with_capacity(indices.len());
        for &idx in indices {
            if idx >= self.len() {
                return Err(invalid(format!("item index {idx} out of range for n={}", self.len())));
            }
            features.extend_from_slice(self.item(idx));
            gt_scores.push(self.gt_scores[idx]);
            relevance.push(self.relevance[idx]);
        }
        let gt_perm = permutation_from_scores(&gt_scores)?;
        Ok(SampleView {
            dim: self.dim,
            features,
            gt_scores,
            relevance,
            gt_perm,
        })
    }

    /// The whole sample as a view.
    pub fn view(&self) -> SampleView {
        SampleView {
            dim: self.dim,
            features: self.features.clone(),
            gt_scores: self.gt_scores.clone(),
            relevance: self.relevance.clone(),
            gt_perm: self.gt_perm.clone(),
        }
    }
}

/// Owned list of items drawn from a [`RankedSample`], ready for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleView {
    pub dim: usize,
    pub features: Vec<f64>,
    pub gt_scores: Vec<f64>,
    pub relevance: Vec<f64>,
    pub gt_perm: Permutation,
}

impl SampleView {
    pub fn len(&self) -> usize {
        self.gt_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt_scores.is_empty()
    }
}
