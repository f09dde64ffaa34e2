//! Reduction of hourly horizons to weighted typical periods.
//!
//! Periods are clustered with agglomerative Ward linkage on min-max
//! normalized, concatenated period vectors. Every typical period is an actual
//! historical period: clusters start from their medoid, which is then swapped
//! for another central member where that brings the weighted means of the
//! series closer to the original means. Periods holding the peak of
//! designated series are kept as singleton clusters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{TimeGrid, TimeStep};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedTimeGrid {
    pub period_len: usize,
    /// First hour of the truncated horizon.
    pub offset: usize,
    /// Original period index of each typical period, in chronological order.
    pub representatives: Vec<usize>,
    /// Number of original periods each typical period stands for.
    pub cardinality: Vec<usize>,
    /// Typical period of every original period.
    pub assignment: Vec<usize>,
    pub grid: TimeGrid,
}

impl ReducedTimeGrid {
    pub fn n_original(&self) -> usize {
        self.assignment.len()
    }

    /// Rebuilds the truncated horizon from typical periods only.
    pub fn reconstruct(&self, series: &[f64]) -> Vec<f64> {
        let l = self.period_len;
        let mut out = Vec::with_capacity(self.assignment.len() * l);
        for &typ in &self.assignment {
            let start = self.offset + self.representatives[typ] * l;
            out.extend_from_slice(&series[start..start + l]);
        }
        out
    }
}

fn argmax(s: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in s.iter().enumerate() {
        if best.map_or(true, |(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Ward agglomerative clustering of `points` into `k` clusters. Returns the
/// cluster label of every point; labels are numbered by first member.
pub fn ward_clusters(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(&points[i], &points[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut clusters = n;
    while clusters > k {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d[i][j] < best.0 {
                    best = (d[i][j], i, j);
                }
            }
        }
        let (dij, i, j) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for m in 0..n {
            if !active[m] || m == i || m == j {
                continue;
            }
            let nm = size[m] as f64;
            let v = ((ni + nm) * d[i][m] + (nj + nm) * d[j][m] - nm * dij) / (ni + nj + nm);
            d[i][m] = v;
            d[m][i] = v;
        }
        active[j] = false;
        size[i] += size[j];
        let moved = core::mem::take(&mut members[j]);
        members[i].extend(moved);
        clusters -= 1;
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for p in 0..n {
        if labels[p] != usize::MAX {
            continue;
        }
        let owner = (0..n).find(|&c| active[c] && members[c].contains(&p)).unwrap_or(p);
        for &q in &members[owner] {
            labels[q] = next;
        }
        next += 1;
    }
    labels
}

/// Member with the smallest total squared distance to the others; ties go to
/// the lowest index.
fn medoid(points: &[Vec<f64>], members: &[usize]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &m in members {
        let cost: f64 = members.iter().map(|&o| sq_dist(&points[m], &points[o])).sum();
        if cost < best.0 || (cost == best.0 && m < best.1) {
            best = (cost, m);
        }
    }
    best.1
}

/// Largest relative deviation of a weighted series mean from its original
/// mean when cluster `c` is represented by period `chosen[c]`.
fn worst_mean_error(means: &[Vec<f64>], targets: &[f64], groups: &[Vec<usize>], chosen: &[usize], n_orig: usize) -> f64 {
    means
        .iter()
        .zip(targets)
        .map(|(m, &target)| {
            let weighted: f64 = groups.iter().zip(chosen).map(|(g, &r)| g.len() as f64 * m[r]).sum::<f64>() / n_orig as f64;
            rel_err(weighted, target)
        })
        .fold(0.0, f64::max)
}

/// Coordinate descent over representatives of all but the first `pinned`
/// clusters. Candidates are the half of each cluster closest to its
/// centroid, so a representative never becomes an outlier of its cluster.
fn refine_representatives(points: &[Vec<f64>], means: &[Vec<f64>], groups: &[Vec<usize>], pinned: usize, chosen: &mut [usize]) {
    let n_orig = points.len();
    let targets: Vec<f64> = means.iter().map(|m| m.iter().sum::<f64>() / n_orig as f64).collect();
    let candidates: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let dim = points[g[0]].len();
            let mut centroid = vec![0.0; dim];
            for &m in g {
                for (c, x) in centroid.iter_mut().zip(&points[m]) {
                    *c += x / g.len() as f64;
                }
            }
            let mut members = g.clone();
            members.sort_by(|&a, &b| sq_dist(&points[a], &centroid).total_cmp(&sq_dist(&points[b], &centroid)).then(a.cmp(&b)));
            members.truncate(g.len().div_ceil(2));
            members
        })
        .collect();
    let mut best = worst_mean_error(means, &targets, groups, chosen, n_orig);
    let mut improved = true;
    while improved {
        improved = false;
        for c in pinned..groups.len() {
            for &m in &candidates[c] {
                let keep = chosen[c];
                chosen[c] = m;
                let e = worst_mean_error(means, &targets, groups, chosen, n_orig);
                if e < best - 1e-12 {
                    best = e;
                    improved = true;
                } else {
                    chosen[c] = keep;
                }
            }
        }
    }
}

/// Clusters the horizon shared by `series` into `n_periods` typical periods
/// of `period_len` hours.
///
/// The periods containing the maximum of each series listed in `peak_series`
/// are kept as their own typical periods. Weights are scaled so the reduced
/// grid stands for `represented_hours`.
pub fn aggregate(
    series: &[Vec<f64>],
    peak_series: &[usize],
    n_periods: usize,
    period_len: usize,
    represented_hours: f64,
) -> Result<ReducedTimeGrid> {
    let h = series.first().map_or(0, Vec::len);
    if series.iter().any(|s| s.len() != h) {
        return Err(Error::invalid("all series must share one horizon"));
    }
    if n_periods == 0 || period_len == 0 || n_periods * period_len > h {
        return Err(Error::invalid(format!(
            "cannot form {n_periods} periods of {period_len} h from a {h} h horizon"
        )));
    }
    if peak_series.iter().any(|&i| i >= series.len()) {
        return Err(Error::invalid("peak series index out of range"));
    }
    let n_orig = h / period_len;
    let used = n_orig * period_len;
    let peaks: Vec<usize> = peak_series.iter().filter_map(|&i| argmax(&series[i])).collect();

    // Keep day boundaries when shifting the truncated window.
    let step = if period_len % 24 == 0 { 24 } else { 1 };
    let offset = (0..=(h - used))
        .step_by(step)
        .find(|&o| peaks.iter().all(|&p| p >= o && p < o + used))
        .unwrap_or(0);

    let ranges: Vec<(f64, f64)> = series
        .iter()
        .map(|s| {
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let points: Vec<Vec<f64>> = (0..n_orig)
        .map(|p| {
            let start = offset + p * period_len;
            let mut v = Vec::with_capacity(series.len() * period_len);
            for (s, &(lo, hi)) in series.iter().zip(&ranges) {
                let span = hi - lo;
                v.extend(s[start..start + period_len].iter().map(|&x| if span > 0.0 { (x - lo) / span } else { 0.0 }));
            }
            v
        })
        .collect();

    let mut forced: Vec<usize> = Vec::new();
    for &p in &peaks {
        if p >= offset && p < offset + used {
            let period = (p - offset) / period_len;
            if !forced.contains(&period) && forced.len() < n_periods {
                forced.push(period);
            }
        }
    }
    let rest: Vec<usize> = (0..n_orig).filter(|p| !forced.contains(p)).collect();
    let k_rest = n_periods - forced.len();

    // cluster id per original period; forced periods get ids 0..forced.len()
    let mut cluster = vec![0usize; n_orig];
    let mut groups: Vec<Vec<usize>> = forced.iter().map(|&p| vec![p]).collect();
    for (c, &p) in forced.iter().enumerate() {
        cluster[p] = c;
    }
    if !rest.is_empty() {
        if k_rest == 0 {
            for &p in &rest {
                let mut best = (f64::INFINITY, 0);
                for (c, &f) in forced.iter().enumerate() {
                    let d = sq_dist(&points[p], &points[f]);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                cluster[p] = best.1;
                groups[best.1].push(p);
            }
        } else {
            let sub: Vec<Vec<f64>> = rest.iter().map(|&p| points[p].clone()).collect();
            let labels = ward_clusters(&sub, k_rest);
            let base = groups.len();
            let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
            groups.resize(base + n_labels, Vec::new());
            for (&p, &l) in rest.iter().zip(&labels) {
                cluster[p] = base + l;
                groups[base + l].push(p);
            }
        }
    }

    let means: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            (0..n_orig)
                .map(|p| {
                    let start = offset + p * period_len;
                    s[start..start + period_len].iter().sum::<f64>() / period_len as f64
                })
                .collect()
        })
        .collect();
    // Peak clusters stay represented by their peak period, even when they
    // absorb other periods because no free clusters remain.
    let mut chosen: Vec<usize> = groups
        .iter()
        .enumerate()
        .map(|(c, members)| forced.get(c).copied().unwrap_or_else(|| medoid(&points, members)))
        .collect();
    refine_representatives(&points, &means, &groups, forced.len(), &mut chosen);
    let mut reps: Vec<(usize, usize)> = chosen.into_iter().enumerate().map(|(c, r)| (r, c)).collect();
    reps.sort_unstable();
    let mut typical_of_cluster = vec![0; groups.len()];
    for (t, &(_, c)) in reps.iter().enumerate() {
        typical_of_cluster[c] = t;
    }
    let representatives: Vec<usize> = reps.iter().map(|&(r, _)| r).collect();
    let cardinality: Vec<usize> = reps.iter().map(|&(_, c)| groups[c].len()).collect();
    let assignment: Vec<usize> = cluster.iter().map(|&c| typical_of_cluster[c]).collect();

    let scale = represented_hours / used as f64;
    let mut steps = Vec::with_capacity(representatives.len() * period_len);
    let mut periods = Vec::with_capacity(representatives.len());
    for (&rep, &card) in representatives.iter().zip(&cardinality) {
        let start = steps.len();
        let first = offset + rep * period_len;
        for hour in first..first + period_len {
            steps.push(TimeStep {
                hour,
                weight: card as f64 * scale,
            });
        }
        periods.push(start..steps.len());
    }
    Ok(ReducedTimeGrid {
        period_len,
        offset,
        representatives,
        cardinality,
        assignment,
        grid: TimeGrid::new(steps, periods)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationPoint {
    pub rank: usize,
    pub original: f64,
    pub reduced: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Relative error of the reduced maximum against the original maximum.
    pub peak_error: f64,
    /// Relative error of the weighted reduced mean against the original mean.
    pub mean_error: f64,
    /// Sorted (descending) values of the truncated original horizon against
    /// the horizon rebuilt from typical periods.
    pub duration_curve: Vec<DurationPoint>,
}

fn rel_err(reduced: f64, original: f64) -> f64 {
    if original == 0.0 {
        libm::fabs(reduced)
    } else {
        libm::fabs(reduced - original) / libm::fabs(original)
    }
}

/// Compares `original` with its representation on `reduced`.
pub fn fidelity_report(original: &[f64], reduced: &ReducedTimeGrid) -> FidelityReport {
    let rebuilt = reduced.reconstruct(original);
    let used = rebuilt.len();
    let orig_max = original.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let red_max = rebuilt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let orig_mean = original.iter().sum::<f64>() / original.len().max(1) as f64;
    let red_mean = rebuilt.iter().sum::<f64>() / used.max(1) as f64;

    let mut a: Vec<f64> = original[reduced.offset..reduced.offset + used].to_vec();
    let mut b = rebuilt;
    a.sort_by(|x, y| y.total_cmp(x));
    b.sort_by(|x, y| y.total_cmp(x));
    let duration_curve = a
        .into_iter()
        .zip(b)
        .enumerate()
        .map(|(rank, (original, reduced))| DurationPoint { rank, original, reduced })
        .collect();
    FidelityReport {
        peak_error: rel_err(red_max, orig_max),
        mean_error: rel_err(red_mean, orig_mean),
        duration_curve,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_weeks_sum_to_52() {
        let s = vec![vec![1.0; 52 * 168]];
        let r = aggregate(&s, &[0], 4, 168, 52.0 * 168.0).unwrap();
        assert_eq!(r.representatives.len(), 4);
        assert_eq!(r.cardinality.iter().sum::<usize>(), 52);
        assert!((r.grid.total_weight() - 52.0 * 168.0).abs() < 1e-9);
    }

    #[test]
    fn full_reduction_is_identity() {
        let s: Vec<f64> = (0..10 * 24).map(|i| ((i * 7919) % 13) as f64).collect();
        let r = aggregate(core::slice::from_ref(&s), &[0], 10, 24, 240.0).unwrap();
        assert_eq!(r.assignment, (0..10).collect::<Vec<_>>());
        assert!(r.cardinality.iter().all(|&c| c == 1));
        let f = fidelity_report(&s, &r);
        assert_eq!((f.peak_error, f.mean_error), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = vec![vec![0.0; 100]];
        assert!(aggregate(&s, &[], 0, 24, 100.0).is_err());
        assert!(aggregate(&s, &[], 1, 0, 100.0).is_err());
        assert!(aggregate(&s, &[], 5, 24, 100.0).is_err());
    }

    #[test]
    fn truncation_scales_weights() {
        let s: Vec<Vec<f64>> = vec![(0..8760).map(|i| (i % 97) as f64).collect()];
        let r = aggregate(&s, &[0], 4, 168, 8760.0).unwrap();
        assert!((r.grid.total_weight() - 8760.0).abs() < 1e-6);
        assert_eq!(r.n_original(), 52);
    }
}
