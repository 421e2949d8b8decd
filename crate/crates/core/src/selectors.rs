//! Pair generation from the BO dataset and the top-k pair selectors of the
//! feedback loop.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;

use crate::config::SelectorKind;
use crate::error::{Error, Result};
use crate::preference::{bt_likelihood, PreferencePosterior};
use crate::scalar::Scalar;

/// Candidate pairs drawn per feedback event.
pub const DEFAULT_M_CAND: usize = 256;
/// Posterior samples used by BALD.
pub const DEFAULT_BALD_SAMPLES: usize = 64;

/// Indices `i < j` into the dataset and the selector's score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub i: usize,
    pub j: usize,
    pub beta_score: f64,
}

impl ScoredPair {
    /// Order in which the two points are shown to the expert.
    pub fn presentation<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        if rng.random_bool(0.5) {
            (self.j, self.i)
        } else {
            (self.i, self.j)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub pairs: Vec<ScoredPair>,
    /// The configured selector needed a posterior that did not exist yet,
    /// so random selection was used.
    pub fell_back: bool,
}

fn decode_pair(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

/// `min(m_cand, C(n, 2))` distinct unordered pairs `(i, j)`, `i < j`, drawn
/// without replacement and listed in lexicographic order.
pub fn generate_candidate_pairs<R: Rng + ?Sized>(n: usize, m_cand: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 observations to form pairs, have {n}")));
    }
    let total = n * (n - 1) / 2;
    let mut ks: Vec<usize> = if m_cand >= total {
        (0..total).collect()
    } else {
        index::sample(rng, total, m_cand).into_vec()
    };
    ks.sort_unstable();
    Ok(ks.into_iter().map(|k| decode_pair(k, n)).collect())
}

pub fn select_random<R: Rng + ?Sized>(pairs: &[(usize, usize)], k: usize, rng: &mut R) -> Vec<ScoredPair> {
    let k = k.min(pairs.len());
    index::sample(rng, pairs.len(), k)
        .into_iter()
        .map(|p| ScoredPair {
            i: pairs[p].0,
            j: pairs[p].1,
            beta_score: 0.0,
        })
        .collect()
}

/// Indices of the `k` best scores (descending when `largest`), ties broken
/// by position.
pub fn top_k(scores: &[f64], k: usize, largest: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let o = scores[a].total_cmp(&scores[b]);
        if largest {
            o.reverse()
        } else {
            o
        }
    });
    order.truncate(k);
    order
}

fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Mutual information `H[p̄] − mean_s H[p_s]` (nats) for every pair, given
/// per-sample preference probabilities `probs[pair][sample]`.
pub fn bald_scores(probs: &[Vec<f64>]) -> Vec<f64> {
    probs
        .iter()
        .map(|ps| {
            let n = ps.len() as f64;
            let mean = ps.iter().sum::<f64>() / n;
            let cond = ps.iter().map(|&p| binary_entropy(p)).sum::<f64>() / n;
            binary_entropy(mean) - cond
        })
        .collect()
}

/// Posterior score samples for every point some pair touches.
fn involved_samples<T: Scalar, R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    points: &DMatrix<T>,
    post: &PreferencePosterior<T>,
    n_samples: usize,
    rng: &mut R,
) -> Result<(BTreeMap<usize, usize>, DMatrix<T>)> {
    let mut rows = BTreeMap::new();
    for &(i, j) in pairs {
        for idx in [i, j] {
            if idx >= points.nrows() {
                return Err(Error::Dimension(format!("pair index {idx} outside {} points", points.nrows())));
            }
            let next = rows.len();
            rows.entry(idx).or_insert(next);
        }
    }
    let mut sub = DMatrix::zeros(rows.len(), points.ncols());
    for (&idx, &r) in &rows {
        sub.set_row(r, &points.row(idx));
    }
    let samples = post.sample_scores(&sub, n_samples, rng)?;
    Ok((rows, samples))
}

fn scored(pairs: &[(usize, usize)], scores: &[f64], picks: Vec<usize>) -> Vec<ScoredPair> {
    picks
        .into_iter()
        .map(|p| ScoredPair {
            i: pairs[p].0,
            j: pairs[p].1,
            beta_score: scores[p],
        })
        .collect()
}

/// BALD over the pairs; `points` holds the network inputs of the dataset.
pub fn select_bald<T: Scalar, R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    points: &DMatrix<T>,
    posterior: Option<&PreferencePosterior<T>>,
    k: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<Selection> {
    let Some(post) = posterior else {
        return Ok(Selection {
            pairs: select_random(pairs, k, rng),
            fell_back: true,
        });
    };
    if n_samples < 2 {
        return Err(Error::Data("BALD needs at least 2 posterior samples".into()));
    }
    if pairs.is_empty() {
        return Ok(Selection { pairs: Vec::new(), fell_back: false });
    }
    let (rows, r) = involved_samples(pairs, points, post, n_samples, rng)?;
    let probs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(i, j)| {
            let (a, b) = (rows[i], rows[j]);
            (0..n_samples)
                .map(|s| bt_likelihood(r[(a, s)].as_f64(), r[(b, s)].as_f64(), 0))
                .collect()
        })
        .collect();
    let scores = bald_scores(&probs);
    let picks = top_k(&scores, k, true);
    Ok(Selection {
        pairs: scored(pairs, &scores, picks),
        fell_back: false,
    })
}

/// Absolute Thompson-sample score differences `|r̃(x_i) − r̃(x_j)|`.
fn sample_gaps<T: Scalar, R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    points: &DMatrix<T>,
    post: &PreferencePosterior<T>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (rows, r) = involved_samples(pairs, points, post, 1, rng)?;
    Ok(pairs
        .iter()
        .map(|(i, j)| (r[(rows[i], 0)] - r[(rows[j], 0)]).as_f64().abs())
        .collect())
}

fn select_by_gap<T: Scalar, R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    points: &DMatrix<T>,
    posterior: Option<&PreferencePosterior<T>>,
    k: usize,
    largest: bool,
    rng: &mut R,
) -> Result<Selection> {
    let Some(post) = posterior else {
        return Ok(Selection {
            pairs: select_random(pairs, k, rng),
            fell_back: true,
        });
    };
    if pairs.is_empty() {
        return Ok(Selection { pairs: Vec::new(), fell_back: false });
    }
    let gaps = sample_gaps(pairs, points, post, rng)?;
    let picks = top_k(&gaps, k, largest);
    Ok(Selection {
        pairs: scored(pairs, &gaps, picks),
        fell_back: false,
    })
}

/// Pairs whose sampled scores are closest.
pub fn select_sdiff<T: Scalar, R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    points: &DMatrix<T>,
    posterior: Option<&PreferencePosterior<T>>,
    k: usize,
    rng: &mut R,
) -> Result<Selection> {
    select_by_gap(pairs, points, posterior, k, false, rng)
}

/// Pairs whose sampled scores are furthest apart.
pub fn select_ldiff<T: Scalar, R: Rng + ?Sized>(
    pairs: &[(usize, usize)],
    points: &DMatrix<T>,
    posterior: Option<&PreferencePosterior<T>>,
    k: usize,
    rng: &mut R,
) -> Result<Selection> {
    select_by_gap(pairs, points, posterior, k, true, rng)
}

/// Dispatches to the configured selector.
pub fn select_pairs<T: Scalar, R: Rng + ?Sized>(
    kind: SelectorKind,
    pairs: &[(usize, usize)],
    points: &DMatrix<T>,
    posterior: Option<&PreferencePosterior<T>>,
    k: usize,
    rng: &mut R,
) -> Result<Selection> {
    match kind {
        SelectorKind::Random => Ok(Selection {
            pairs: select_random(pairs, k, rng),
            fell_back: false,
        }),
        SelectorKind::Bald => select_bald(pairs, points, posterior, k, DEFAULT_BALD_SAMPLES, rng),
        SelectorKind::Sdiff => select_sdiff(pairs, points, posterior, k, rng),
        SelectorKind::Ldiff => select_ldiff(pairs, points, posterior, k, rng),
    }
}
