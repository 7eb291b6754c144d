use serde::{Deserialize, Serialize};

use super::Descriptor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub count_a_keypoints: usize,
    pub count_b_keypoints: usize,
    pub matches: usize,
    pub ratio_threshold: f32,
}

/// One accepted correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub a: usize,
    pub b: usize,
    pub distance: f32,
}

fn distance_sq(a: &Descriptor, b: &Descriptor) -> f64 {
    a.vector
        .iter()
        .zip(&b.vector)
        .map(|(x, y)| {
            let d = (*x - *y) as f64;
            d * d
        })
        .sum()
}

/// Ratio-test matches made one-to-one.
///
/// Each descriptor in `a` proposes its nearest neighbour in `b` when that
/// distance is below `ratio` times the second-nearest. Proposals are then
/// taken in ascending distance order (ties by index in `a`), skipping any
/// whose target is already used.
pub fn match_pairs(a: &[Descriptor], b: &[Descriptor], ratio: f32) -> Result<Vec<Match>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut proposals = Vec::new();
    for (i, da) in a.iter().enumerate() {
        let (mut best, mut second) = ((f64::INFINITY, usize::MAX), f64::INFINITY);
        for (j, db) in b.iter().enumerate() {
            let d = distance_sq(da, db);
            if d < best.0 {
                second = best.0;
                best = (d, j);
            } else if d < second {
                second = d;
            }
        }
        if best.1 == usize::MAX {
            continue;
        }
        let (d1, d2) = (best.0.sqrt(), second.sqrt());
        if d1 < ratio as f64 * d2 {
            proposals.push(Match {
                a: i,
                b: best.1,
                distance: d1 as f32,
            });
        }
    }
    proposals.sort_by(|x, y| x.distance.total_cmp(&y.distance).then(x.a.cmp(&y.a)));
    let mut used = vec![false; b.len()];
    Ok(proposals
        .into_iter()
        .filter(|m| !std::mem::replace(&mut used[m.b], true))
        .collect())
}

pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], ratio: f32) -> Result<MatchReport> {
    let matches = match_pairs(a, b, ratio)?.len();
    Ok(MatchReport {
        count_a_keypoints: a.len(),
        count_b_keypoints: b.len(),
        matches,
        ratio_threshold: ratio,
    })
}
