//! Ranking metrics with tie handling: AUROC (Mann-Whitney) and average precision.

use crate::error::{Error, Result};

fn validate(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "labels for scores",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score at position {i} is not finite")));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Indices sorted by score, grouped into runs of equal score.
fn tie_groups(scores: &[f64], descending: bool) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = scores[a].total_cmp(&scores[b]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = validate(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut neg_below = 0usize;
    // twice the Mann-Whitney U, kept integral until the final division
    let mut twice_u = 0usize;
    for g in tie_groups(scores, false) {
        let gp = g.iter().filter(|&&i| labels[i] == 1).count();
        let gn = g.len() - gp;
        twice_u += gp * (2 * neg_below + gn);
        neg_below += gn;
    }
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

/// Average precision `sum_i (R_i - R_{i-1}) P_i` over distinct score
/// thresholds, taken in descending order with tied scores in one step.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = validate(scores, labels)?;
    if pos == 0 {
        return Err(Error::InvalidArgument(
            "average precision needs at least one positive label".into(),
        ));
    }
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    for g in tie_groups(scores, true) {
        let gp = g.iter().filter(|&&i| labels[i] == 1).count();
        tp += gp;
        seen += g.len();
        if gp > 0 {
            ap += (gp as f64 / pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}
