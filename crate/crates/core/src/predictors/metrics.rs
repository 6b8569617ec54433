use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_labels<T: Scalar>(scores: &[T], labels: &[T]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let mut pos = 0;
    for &l in labels {
        if l == T::one() {
            pos += 1;
        } else if l != T::zero() {
            return Err(Error::InvalidInput(format!("label {l} is not 0 or 1")));
        }
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidInput(format!("score {s} is not a number")));
    }
    Ok((pos, labels.len() - pos))
}

/// Indices sorted by ascending score.
fn ascending<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    idx
}

/// Half-open index ranges of equal scores within `order`.
fn tie_groups<T: Scalar>(scores: &[T], order: &[usize]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        groups.push((i, j));
        i = j;
    }
    groups
}

/// Area under the ROC curve: `P(score_pos > score_neg) + P(tie) / 2`, via the
/// Mann–Whitney rank sum with tied scores given their average rank.
pub fn auroc<T: Scalar>(scores: &[T], labels: &[T]) -> Result<T> {
    let (pos, neg) = check_labels(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let order = ascending(scores);
    // Twice the positive rank sum, kept integral: a tie group occupying ranks
    // i+1..=j has doubled average rank i+1+j.
    let mut doubled: u128 = 0;
    for (i, j) in tie_groups(scores, &order) {
        let positives = order[i..j].iter().filter(|&&k| labels[k] == T::one()).count() as u128;
        doubled += positives * (i as u128 + 1 + j as u128);
    }
    let (p, n) = (pos as u128, neg as u128);
    let numerator = doubled - p * (p + 1);
    Ok(T::of(numerator as f64 / (2 * p * n) as f64))
}

/// Average precision: the sum over descending score thresholds of the recall
/// gained at that threshold times the precision there. Tied scores form one
/// threshold.
pub fn auprc<T: Scalar>(scores: &[T], labels: &[T]) -> Result<T> {
    let (pos, _) = check_labels(scores, labels)?;
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order = ascending(scores);
    order.reverse();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut total = 0.0f64;
    for (i, j) in tie_groups(scores, &order) {
        let gained = order[i..j].iter().filter(|&&k| labels[k] == T::one()).count();
        tp += gained;
        seen += j - i;
        total += (gained as f64 / pos as f64) * (tp as f64 / seen as f64);
    }
    Ok(T::of(total))
}

/// Mean squared difference.
pub fn mse<T: Scalar>(predictions: &[T], truth: &[T]) -> Result<T> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: truth.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("mean squared error of empty columns".into()));
    }
    let ss: T = predictions.iter().zip(truth).map(|(&p, &t)| (p - t) * (p - t)).sum();
    Ok(ss / T::of_usize(truth.len()))
}
