//! Representation algebra: one-hot rows, smoothed rows, their interpolation,
//! and distribution-weighted embedding mixing.
//!
//! All functions here are pure. Distributions are stored densely in `f64`;
//! one-hot sequences are stored as indices and expanded on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `|sum(row) - 1|` for a probability row.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Default interpolation weight on the one-hot row.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Rejects `lambda` outside `[0, 1]` (including NaN). No clamping.
pub fn check_lambda(lambda: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(lambda)
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

fn check_row(row: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (v, &p) in row.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "entry {v} is {p}, expected a finite non-negative probability"
            )));
        }
        sum += p;
    }
    Ok(sum)
}

/// One probability vector over the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    /// Validates non-negativity and normalization (within [`NORMALIZATION_TOLERANCE`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vocabulary".into()));
        }
        let sum = check_row(&probs)?;
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(index: usize, vocab_size: usize) -> Result<Self> {
        if index >= vocab_size {
            return Err(Error::IndexOutOfVocab {
                id: index as i64,
                vocab_size,
            });
        }
        let mut probs = vec![0.0; vocab_size];
        probs[index] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(vocab_size: usize) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::InvalidDistribution("empty vocabulary".into()));
        }
        Ok(Self {
            probs: vec![1.0 / vocab_size as f64; vocab_size],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

/// Token ids of a sequence viewed as one-hot rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotSequence {
    ids: Vec<usize>,
    vocab_size: usize,
}

impl OneHotSequence {
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> TokenDistribution {
        let mut probs = vec![0.0; self.vocab_size];
        probs[self.ids[i]] = 1.0;
        TokenDistribution { probs }
    }

    /// Row-major `len x vocab_size` dense expansion.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ids.len() * self.vocab_size];
        for (i, &id) in self.ids.iter().enumerate() {
            out[i * self.vocab_size + id] = 1.0;
        }
        out
    }
}

/// Builds the one-hot view of `token_ids`.
pub fn one_hot_encode<I: Copy + Into<i64>>(
    token_ids: &[I],
    vocab_size: usize,
) -> Result<OneHotSequence> {
    if vocab_size == 0 {
        return Err(Error::InvalidDistribution("empty vocabulary".into()));
    }
    if token_ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ids = token_ids
        .iter()
        .map(|&id| {
            let id: i64 = id.into();
            if id < 0 || id as u64 >= vocab_size as u64 {
                Err(Error::IndexOutOfVocab { id, vocab_size })
            } else {
                Ok(id as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneHotSequence { ids, vocab_size })
}

/// Per-position vocabulary distributions for a whole sequence.
///
/// Produced by a masked language model (`lambda_used == None`) or by
/// [`interpolate`] (`lambda_used == Some(lambda)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedSequence {
    data: Vec<f64>,
    vocab_size: usize,
    source_seed: u64,
    lambda_used: Option<f64>,
}

impl SmoothedSequence {
    /// Wraps row-major probabilities. Rows drifting more than the tolerance
    /// from unit mass are renormalized and a warning is logged.
    pub fn from_probabilities(data: Vec<f64>, vocab_size: usize, source_seed: u64) -> Result<Self> {
        if vocab_size == 0 || data.is_empty() || data.len() % vocab_size != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form rows of width {vocab_size}",
                data.len()
            )));
        }
        let mut seq = Self {
            data,
            vocab_size,
            source_seed,
            lambda_used: None,
        };
        seq.normalize_rows()?;
        Ok(seq)
    }

    pub fn from_one_hot(onehot: &OneHotSequence, source_seed: u64) -> Self {
        Self {
            data: onehot.to_dense(),
            vocab_size: onehot.vocab_size,
            source_seed,
            lambda_used: Some(1.0),
        }
    }

    fn normalize_rows(&mut self) -> Result<()> {
        let width = self.vocab_size;
        for (i, row) in self.data.chunks_mut(width).enumerate() {
            let sum = check_row(row)?;
            if sum <= 0.0 {
                return Err(Error::InvalidDistribution(format!("row {i} has zero mass")));
            }
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                log::warn!("renormalizing row {i}: mass {sum} drifted beyond tolerance");
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.vocab_size
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn source_seed(&self) -> u64 {
        self.source_seed
    }

    pub fn lambda_used(&self) -> Option<f64> {
        self.lambda_used
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.vocab_size..(i + 1) * self.vocab_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.vocab_size)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Most probable `k` entries of row `i`, highest first.
    pub fn top_k(&self, i: usize, k: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self.row(i).iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

/// How positions flagged as special (delimiters, padding) are treated by [`interpolate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialTokenPolicy {
    /// Special positions stay pure one-hot.
    #[default]
    KeepOneHot,
    /// Special positions are interpolated like every other position.
    Uniform,
}

/// `lambda * onehot + (1 - lambda) * smoothed`, row by row.
///
/// Under [`SpecialTokenPolicy::KeepOneHot`], rows flagged in `special_mask`
/// are copied from `onehot` unchanged.
pub fn interpolate(
    onehot: &OneHotSequence,
    smoothed: &SmoothedSequence,
    lambda: f64,
    special_mask: &[bool],
    policy: SpecialTokenPolicy,
) -> Result<SmoothedSequence> {
    check_lambda(lambda)?;
    if onehot.len() != smoothed.len() || onehot.vocab_size != smoothed.vocab_size {
        return Err(Error::ShapeMismatch(format!(
            "one-hot is {}x{}, smoothed is {}x{}",
            onehot.len(),
            onehot.vocab_size,
            smoothed.len(),
            smoothed.vocab_size
        )));
    }
    if special_mask.len() != onehot.len() {
        return Err(Error::ShapeMismatch(format!(
            "special mask has {} entries for {} positions",
            special_mask.len(),
            onehot.len()
        )));
    }

    let width = onehot.vocab_size;
    let keep = 1.0 - lambda;
    let mut data = Vec::with_capacity(smoothed.data.len());
    for (i, row) in smoothed.rows().enumerate() {
        let hot = onehot.ids[i];
        if special_mask[i] && policy == SpecialTokenPolicy::KeepOneHot {
            data.extend((0..width).map(|v| if v == hot { 1.0 } else { 0.0 }));
        } else {
            data.extend(row.iter().enumerate().map(|(v, &p)| {
                let t = if v == hot { 1.0 } else { 0.0 };
                lambda * t + keep * p
            }));
        }
    }
    let mut out = SmoothedSequence {
        data,
        vocab_size: width,
        source_seed: smoothed.source_seed,
        lambda_used: Some(lambda),
    };
    out.normalize_rows()?;
    Ok(out)
}

/// Word-embedding table, `vocab_size x embed_size`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    weights: Vec<f64>,
    vocab_size: usize,
    embed_size: usize,
}

impl EmbeddingMatrix {
    pub fn new(weights: Vec<f64>, vocab_size: usize, embed_size: usize) -> Result<Self> {
        if vocab_size == 0 || embed_size == 0 {
            return Err(Error::ShapeMismatch(
                "embedding dimensions must be positive".into(),
            ));
        }
        if weights.len() != vocab_size * embed_size {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for a {vocab_size}x{embed_size} table",
                weights.len()
            )));
        }
        if let Some(bad) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "embedding weight {bad} is not finite"
            )));
        }
        Ok(Self {
            weights,
            vocab_size,
            embed_size,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn embed_size(&self) -> usize {
        self.embed_size
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.weights[v * self.embed_size..(v + 1) * self.embed_size]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.weights
    }

    /// Plain lookup of rows at `ids`.
    pub fn gather(&self, ids: &[usize]) -> Result<DenseMatrix> {
        let mut data = Vec::with_capacity(ids.len() * self.embed_size);
        for &id in ids {
            if id >= self.vocab_size {
                return Err(Error::IndexOutOfVocab {
                    id: id as i64,
                    vocab_size: self.vocab_size,
                });
            }
            data.extend_from_slice(self.row(id));
        }
        Ok(DenseMatrix::new(data, ids.len(), self.embed_size))
    }
}

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DenseMatrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data does not match its shape"
        );
        Self { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Smoothed embeddings: row `i` is `sum_v dist[i][v] * emb[v]`.
pub fn mix_embeddings(dist_seq: &SmoothedSequence, emb: &EmbeddingMatrix) -> Result<DenseMatrix> {
    if dist_seq.vocab_size != emb.vocab_size {
        return Err(Error::ShapeMismatch(format!(
            "distributions over {} tokens, embedding table has {} rows",
            dist_seq.vocab_size, emb.vocab_size
        )));
    }
    let width = emb.embed_size;
    let mut data = vec![0.0; dist_seq.len() * width];
    for (i, row) in dist_seq.rows().enumerate() {
        let out = &mut data[i * width..(i + 1) * width];
        for (v, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(emb.row(v)) {
                *o += p * w;
            }
        }
    }
    Ok(DenseMatrix::new(data, dist_seq.len(), width))
}

// Equal endpoints yield the endpoint itself, so identical inputs are fixed points.
fn lerp(a: f64, b: f64, lambda: f64) -> f64 {
    if a == b {
        a
    } else {
        lambda * a + (1.0 - lambda) * b
    }
}

/// Generic mixup of two feature/label pairs.
pub fn mixup_pair(
    x_i: &[f64],
    x_j: &[f64],
    y_i: &[f64],
    y_j: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_lambda(lambda)?;
    if x_i.len() != x_j.len() || y_i.len() != y_j.len() {
        return Err(Error::ShapeMismatch(format!(
            "features {}/{}, labels {}/{}",
            x_i.len(),
            x_j.len(),
            y_i.len(),
            y_j.len()
        )));
    }
    let x = x_i
        .iter()
        .zip(x_j)
        .map(|(&a, &b)| lerp(a, b, lambda))
        .collect();
    let y = y_i
        .iter()
        .zip(y_j)
        .map(|(&a, &b)| lerp(a, b, lambda))
        .collect();
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoothed(rows: &[&[f64]]) -> SmoothedSequence {
        let width = rows[0].len();
        SmoothedSequence::from_probabilities(rows.concat(), width, 0).unwrap()
    }

    #[test]
    fn one_hot_single() {
        let oh = one_hot_encode(&[2i64], 5).unwrap();
        assert_eq!(oh.to_dense(), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn one_hot_rows_sum_to_one() {
        let oh = one_hot_encode(&[0i64, 4], 5).unwrap();
        for i in 0..2 {
            let row = oh.row(i);
            assert_eq!(row.probs().iter().sum::<f64>(), 1.0);
            assert_eq!(row.probs().iter().filter(|&&p| p != 0.0).count(), 1);
        }
        assert_eq!(oh.row(0).probs()[0], 1.0);
        assert_eq!(oh.row(1).probs()[4], 1.0);
    }

    #[test]
    fn one_hot_rejects_out_of_vocab() {
        assert!(matches!(
            one_hot_encode(&[5i64], 5),
            Err(Error::IndexOutOfVocab {
                id: 5,
                vocab_size: 5
            })
        ));
        assert!(matches!(
            one_hot_encode(&[-1i64], 5),
            Err(Error::IndexOutOfVocab { id: -1, .. })
        ));
        assert!(matches!(
            one_hot_encode::<i64>(&[], 5),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn interpolate_default_lambda_by_hand() {
        let oh = one_hot_encode(&[1i64], 3).unwrap();
        let s = smoothed(&[&[0.2, 0.5, 0.3]]);
        let out = interpolate(&oh, &s, 0.1, &[false], SpecialTokenPolicy::KeepOneHot).unwrap();
        // 0.1*[0,1,0] + 0.9*[0.2,0.5,0.3]
        let expected = [0.9 * 0.2, 0.1 + 0.9 * 0.5, 0.9 * 0.3];
        for (got, want) in out.row(0).iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((out.row(0)[0] - 0.18).abs() < 1e-12);
        assert!((out.row(0)[1] - 0.55).abs() < 1e-12);
        assert!((out.row(0)[2] - 0.27).abs() < 1e-12);
        assert_eq!(out.lambda_used(), Some(0.1));
    }

    #[test]
    fn interpolate_endpoints_are_exact() {
        let oh = one_hot_encode(&[0i64, 2], 3).unwrap();
        let s = smoothed(&[&[0.1, 0.7, 0.2], &[0.3, 0.3, 0.4]]);
        let one = interpolate(
            &oh,
            &s,
            1.0,
            &[false, false],
            SpecialTokenPolicy::KeepOneHot,
        )
        .unwrap();
        assert_eq!(one.as_flat(), oh.to_dense().as_slice());
        let zero = interpolate(
            &oh,
            &s,
            0.0,
            &[false, false],
            SpecialTokenPolicy::KeepOneHot,
        )
        .unwrap();
        assert_eq!(zero.as_flat(), s.as_flat());
    }

    #[test]
    fn interpolate_special_policy() {
        let oh = one_hot_encode(&[0i64, 2], 3).unwrap();
        let s = smoothed(&[&[0.1, 0.7, 0.2], &[0.3, 0.3, 0.4]]);
        let kept =
            interpolate(&oh, &s, 0.0, &[true, false], SpecialTokenPolicy::KeepOneHot).unwrap();
        assert_eq!(kept.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(kept.row(1), s.row(1));
        let uniform =
            interpolate(&oh, &s, 0.0, &[true, false], SpecialTokenPolicy::Uniform).unwrap();
        assert_eq!(uniform.row(0), s.row(0));
    }

    #[test]
    fn interpolate_errors() {
        let oh = one_hot_encode(&[0i64], 3).unwrap();
        let s = smoothed(&[&[0.1, 0.7, 0.2]]);
        assert!(matches!(
            interpolate(&oh, &s, 1.5, &[false], SpecialTokenPolicy::KeepOneHot),
            Err(Error::LambdaOutOfRange(_))
        ));
        assert!(matches!(
            interpolate(&oh, &s, f64::NAN, &[false], SpecialTokenPolicy::KeepOneHot),
            Err(Error::LambdaOutOfRange(_))
        ));
        assert!(matches!(
            interpolate(&oh, &s, 0.5, &[false, true], SpecialTokenPolicy::KeepOneHot),
            Err(Error::ShapeMismatch(_))
        ));
        let wide = smoothed(&[&[0.25, 0.25, 0.25, 0.25]]);
        assert!(matches!(
            interpolate(&oh, &wide, 0.5, &[false], SpecialTokenPolicy::KeepOneHot),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn drifted_rows_are_renormalized() {
        let s = SmoothedSequence::from_probabilities(vec![0.2, 0.2], 2, 0).unwrap();
        assert_eq!(s.row(0), &[0.5, 0.5]);
        assert!(SmoothedSequence::from_probabilities(vec![-0.1, 1.1], 2, 0).is_err());
        assert!(SmoothedSequence::from_probabilities(vec![0.0, 0.0], 2, 0).is_err());
    }

    #[test]
    fn token_distribution_validates() {
        assert!(TokenDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(TokenDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(TokenDistribution::new(vec![1.5, -0.5]).is_err());
        assert_eq!(TokenDistribution::uniform(4).unwrap().probs(), &[0.25; 4]);
    }

    fn table() -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            vec![0.5, -1.0, 2.0, 0.25, -3.0, 1.5, 0.125, 4.0, -0.75, 0.0],
            5,
            2,
        )
        .unwrap()
    }

    #[test]
    fn mixing_one_hot_is_lookup() {
        let emb = table();
        let oh = one_hot_encode(&[3i64], 5).unwrap();
        let mixed = mix_embeddings(&SmoothedSequence::from_one_hot(&oh, 0), &emb).unwrap();
        assert_eq!(mixed.row(0), emb.row(3));
    }

    #[test]
    fn mixing_uniform_is_mean() {
        let emb = table();
        let s = SmoothedSequence::from_probabilities(vec![0.2; 5], 5, 0).unwrap();
        let mixed = mix_embeddings(&s, &emb).unwrap();
        for c in 0..2 {
            let mean = (0..5).map(|v| emb.row(v)[c]).sum::<f64>() / 5.0;
            assert!((mixed.row(0)[c] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn mixing_matches_matrix_product() {
        let emb = EmbeddingMatrix::new(vec![1.0, 2.0, -0.5, 0.5, 3.0, -1.0], 3, 2).unwrap();
        let dist = [0.18, 0.55, 0.27];
        let s = SmoothedSequence::from_probabilities(dist.to_vec(), 3, 0).unwrap();
        let mixed = mix_embeddings(&s, &emb).unwrap();
        // (1x3) * (3x2) by the textbook triple loop
        let w = [[1.0, 2.0], [-0.5, 0.5], [3.0, -1.0]];
        let mut expected = [0.0f64; 2];
        for (j, e) in expected.iter_mut().enumerate() {
            for k in 0..3 {
                *e += dist[k] * w[k][j];
            }
        }
        assert!((mixed.row(0)[0] - expected[0]).abs() < 1e-12);
        assert!((mixed.row(0)[1] - expected[1]).abs() < 1e-12);
        assert!((expected[0] - 0.715).abs() < 1e-12);
        assert!((expected[1] - 0.365).abs() < 1e-12);
    }

    #[test]
    fn mixing_shape_mismatch() {
        let s = SmoothedSequence::from_probabilities(vec![0.5, 0.5], 2, 0).unwrap();
        assert!(matches!(
            mix_embeddings(&s, &table()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn mixup_examples() {
        let (x, y) = mixup_pair(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0], 0.25).unwrap();
        assert_eq!(x, vec![0.25, 0.75]);
        assert_eq!(y, vec![0.25, 0.75]);

        let xi = [0.3, -1.7, 2.2];
        let yi = [0.0, 1.0];
        for lambda in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let (x, y) = mixup_pair(&xi, &xi, &yi, &yi, lambda).unwrap();
            assert_eq!(x, xi);
            assert_eq!(y, yi);
        }
        let (x, y) = mixup_pair(&[1.0, 2.0], &[5.0, 7.0], &[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(y, vec![1.0, 0.0]);
        assert!(mixup_pair(&[1.0], &[1.0, 2.0], &[1.0], &[1.0], 0.5).is_err());
        assert!(mixup_pair(&[1.0], &[1.0], &[1.0], &[1.0], -0.1).is_err());
    }
}
