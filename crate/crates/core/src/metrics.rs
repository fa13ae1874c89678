//! Collection-level summaries of access scores and score correlations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this many documents Lorenz curves are emitted at this resolution.
pub const LORENZ_MAX_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessReport {
    pub gini: f64,
    #[serde(rename = "mean")]
    pub mean_score: f64,
    pub n_docs: usize,
    #[serde(skip)]
    pub lorenz_points: Vec<(f64, f64)>,
    pub metadata: serde_json::Value,
}

impl AccessReport {
    pub fn from_scores(scores: &[f64], metadata: serde_json::Value) -> Result<Self> {
        Ok(AccessReport {
            gini: gini(scores)?,
            mean_score: mean_score(scores)?,
            n_docs: scores.len(),
            lorenz_points: lorenz_subsampled(scores, LORENZ_MAX_POINTS)?,
            metadata,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub kendall_tau: f64,
    pub kendall_p: f64,
    pub n: usize,
}

impl CorrelationReport {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<Self> {
        let (pearson_r, pearson_p) = pearson(x, y)?;
        let (kendall_tau, kendall_p) = kendall_tau(x, y)?;
        Ok(CorrelationReport {
            pearson_r,
            pearson_p,
            kendall_tau,
            kendall_p,
            n: x.len(),
        })
    }
}

fn check_scores(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for &s in scores {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::NegativeScore(s));
        }
        total += s;
    }
    if total <= 0.0 {
        return Err(Error::ZeroTotal);
    }
    Ok(total)
}

fn sorted_ascending(scores: &[f64]) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
}

/// Gini coefficient: `Σ (2i - N - 1) s_i / (N Σ s)` over scores sorted
/// ascending (i is 1-based). Lies in `[0, (N-1)/N]`.
pub fn gini(scores: &[f64]) -> Result<f64> {
    let total = check_scores(scores)?;
    let n = scores.len();
    let sorted = sorted_ascending(scores);
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| (2.0 * (i + 1) as f64 - n as f64 - 1.0) * s)
        .sum();
    Ok(weighted / (n as f64 * total))
}

/// Full-resolution Lorenz curve: `N + 1` points `(i/N, share of the i
/// smallest scores)`.
pub fn lorenz(scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    let total = check_scores(scores)?;
    let n = scores.len();
    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    let mut cumulative = 0.0;
    for (i, s) in sorted_ascending(scores).into_iter().enumerate() {
        cumulative += s;
        points.push(((i + 1) as f64 / n as f64, (cumulative / total).min(1.0)));
    }
    if let Some(last) = points.last_mut() {
        *last = (1.0, 1.0);
    }
    Ok(points)
}

/// Lorenz curve with at most `max_points + 1` points, sampled uniformly in
/// population share. Endpoints are always kept.
pub fn lorenz_subsampled(scores: &[f64], max_points: usize) -> Result<Vec<(f64, f64)>> {
    let full = lorenz(scores)?;
    let n = scores.len();
    if n <= max_points || max_points == 0 {
        return Ok(full);
    }
    Ok((0..=max_points)
        .map(|j| {
            let i = ((j as f64 * n as f64) / max_points as f64).round() as usize;
            full[i.min(n)]
        })
        .collect())
}

/// Trapezoidal area under a Lorenz curve.
pub fn lorenz_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

pub fn mean_score(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::param("n", "at least two paired values required"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("scores", "non-finite value"));
    }
    Ok(())
}

/// Two-sided p-value of a standard normal statistic.
fn normal_two_sided(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Pearson's r with a Fisher-z two-sided p-value (approximate for small n;
/// reported as 1 when n < 4).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if x.len() < 4 {
        1.0
    } else {
        normal_two_sided(r.atanh() * (n - 3.0).sqrt())
    };
    Ok((r, p))
}

/// Sum of `f(t)` over the lengths `t` of runs of equal adjacent values.
fn tie_runs<T, F>(values: &[T], same: impl Fn(&T, &T) -> bool, mut f: F)
where
    F: FnMut(u64),
{
    let mut run = 1u64;
    for i in 1..values.len() {
        if same(&values[i - 1], &values[i]) {
            run += 1;
        } else {
            f(run);
            run = 1;
        }
    }
    if !values.is_empty() {
        f(run);
    }
}

/// Merge sort counting inversions (pairs i < j with v[i] > v[j]).
fn count_inversions(values: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mut src = values.to_vec();
    let mut dst = vec![0.0; n];
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if src[j].total_cmp(&src[i]) == Ordering::Less {
                    dst[k] = src[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    dst[k] = src[i];
                    i += 1;
                }
                k += 1;
            }
            dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
            k += mid - i;
            dst[k..k + (end - j)].copy_from_slice(&src[j..end]);
            start = end;
        }
        std::mem::swap(&mut src, &mut dst);
        width *= 2;
    }
    values.copy_from_slice(&src);
    swaps
}

/// Kendall's tau-b (O(n log n)) with a tie-corrected normal-approximation
/// two-sided p-value.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    // + 0.0 folds -0.0 into 0.0 so sorting and tie detection agree
    let mut pairs: Vec<(f64, f64)> = x.iter().zip(y).map(|(&a, &b)| (a + 0.0, b + 0.0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = n * (n - 1) / 2;
    let (mut x_ties, mut x_v0, mut x_v1, mut x_v2) = (0u64, 0f64, 0f64, 0f64);
    tie_runs(&pairs, |a, b| a.0 == b.0, |t| {
        x_ties += t * (t - 1) / 2;
        let t = t as f64;
        x_v0 += t * (t - 1.0) * (2.0 * t + 5.0);
        x_v1 += t * (t - 1.0);
        x_v2 += t * (t - 1.0) * (t - 2.0);
    });
    let mut joint_ties = 0u64;
    tie_runs(&pairs, |a, b| a == b, |t| joint_ties += t * (t - 1) / 2);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = count_inversions(&mut ys);
    let (mut y_ties, mut y_v0, mut y_v1, mut y_v2) = (0u64, 0f64, 0f64, 0f64);
    tie_runs(&ys, |a, b| a == b, |u| {
        y_ties += u * (u - 1) / 2;
        let u = u as f64;
        y_v0 += u * (u - 1.0) * (2.0 * u + 5.0);
        y_v1 += u * (u - 1.0);
        y_v2 += u * (u - 1.0) * (u - 2.0);
    });

    if x_ties == n0 || y_ties == n0 {
        return Err(Error::DegenerateInput);
    }
    let s = n0 as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - x_ties) as f64 * (n0 - y_ties) as f64).sqrt();
    let tau = (s / denom).clamp(-1.0, 1.0);

    let nf = n as f64;
    let mut var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - x_v0 - y_v0) / 18.0
        + x_v1 * y_v1 / (2.0 * nf * (nf - 1.0));
    if n > 2 {
        var += x_v2 * y_v2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    }
    let p = if var > 0.0 {
        normal_two_sided(s / var.sqrt())
    } else {
        1.0
    };
    Ok((tau, p))
}
