//! Descriptor-space evaluation: diameters, mean-shift clustering, purity
//! and the rank statistics used to summarize sweeps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cae::Descriptor;
use crate::error::{config_err, Error, Result};

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Descriptors with their interaction-type labels.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DescriptorSet {
    pub descriptors: Vec<Descriptor>,
    pub labels: Vec<u8>,
}

impl DescriptorSet {
    pub fn new(descriptors: Vec<Descriptor>, labels: Vec<u8>) -> Result<Self> {
        if descriptors.len() != labels.len() {
            return config_err(format!(
                "{} descriptors but {} labels",
                descriptors.len(),
                labels.len()
            ));
        }
        Ok(Self { descriptors, labels })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// Descriptors grouped by label, in label order.
    pub fn groups(&self) -> BTreeMap<u8, Vec<&Descriptor>> {
        let mut g: BTreeMap<u8, Vec<&Descriptor>> = BTreeMap::new();
        for (d, &l) in self.descriptors.iter().zip(&self.labels) {
            g.entry(l).or_default().push(d);
        }
        g
    }
}

/// Largest pairwise Euclidean distance, by brute force over all pairs.
pub fn diameter<D: AsRef<[f64]>>(set: &[D]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Domain("diameter of an empty set".into()));
    }
    let mut best = 0.0f64;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            best = best.max(dist2(set[i].as_ref(), set[j].as_ref()));
        }
    }
    Ok(best.sqrt())
}

impl AsRef<[f64]> for Descriptor {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Mean of the per-type diameters over types `0..num_types`.
pub fn mean_diameter(set: &DescriptorSet, num_types: usize) -> Result<f64> {
    if num_types == 0 {
        return config_err("mean diameter needs at least one type");
    }
    let groups = set.groups();
    let mut total = 0.0;
    for k in 0..num_types {
        let group = groups
            .get(&(k as u8))
            .ok_or_else(|| Error::Domain(format!("interaction type {k} has no descriptors")))?;
        let points: Vec<&[f64]> = group.iter().map(|d| d.values.as_slice()).collect();
        total += diameter(&points)?;
    }
    Ok(total / num_types as f64)
}

/// Every pairwise distance, in `(i, j), i < j` order.
pub fn pairwise_distances<D: AsRef<[f64]>>(points: &[D]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            out.push(dist2(points[i].as_ref(), points[j].as_ref()).sqrt());
        }
    }
    out
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn median_pairwise_distance<D: AsRef<[f64]>>(points: &[D]) -> Option<f64> {
    median(&mut pairwise_distances(points))
}

/// Half the median pairwise distance; 1.0 when every point coincides.
pub fn default_bandwidth<D: AsRef<[f64]>>(points: &[D]) -> f64 {
    match median_pairwise_distance(points) {
        Some(m) if m > 0.0 => 0.5 * m,
        _ => 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    /// Kernel bandwidth; `None` selects [`default_bandwidth`].
    pub bandwidth: Option<f64>,
    /// Stop iterating a point once it moves less than this distance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        Self {
            bandwidth: None,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster id per point; ids are numbered by first occurrence.
    pub ids: Vec<usize>,
    pub modes: Vec<Vec<f64>>,
    pub bandwidth: f64,
    /// Points that hit `max_iter` before converging; their last iterate
    /// was used.
    pub unconverged: usize,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.modes.len()
    }
}

fn shift_to_mode(start: &[f64], points: &[&[f64]], inv_two_h2: f64, tol: f64, max_iter: usize) -> (Vec<f64>, bool) {
    let mut x = start.to_vec();
    let mut next = vec![0.0; x.len()];
    for _ in 0..max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut wsum = 0.0;
        for p in points {
            let w = (-dist2(&x, p) * inv_two_h2).exp();
            if w > 0.0 {
                wsum += w;
                for (n, &pv) in next.iter_mut().zip(p.iter()) {
                    *n += w * pv;
                }
            }
        }
        if wsum == 0.0 {
            return (x, true);
        }
        next.iter_mut().for_each(|v| *v /= wsum);
        let moved = dist2(&x, &next).sqrt();
        std::mem::swap(&mut x, &mut next);
        if moved < tol {
            return (x, true);
        }
    }
    (x, false)
}

/// Gaussian-kernel mean shift. Each point climbs to a mode; modes closer
/// than half the bandwidth merge; each point joins the surviving mode
/// nearest to where it converged.
pub fn mean_shift<D: AsRef<[f64]>>(points: &[D], config: &MeanShiftConfig) -> Result<ClusterAssignment> {
    if points.is_empty() {
        return Err(Error::Domain("mean shift over an empty set".into()));
    }
    let bandwidth = config.bandwidth.unwrap_or_else(|| default_bandwidth(points));
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return config_err(format!("bandwidth must be positive, got {bandwidth}"));
    }
    let pts: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
    let inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut unconverged = 0;
    let mut raw_modes: Vec<Vec<f64>> = Vec::new();
    let merge2 = (bandwidth / 2.0).powi(2);
    let mut converged = Vec::with_capacity(pts.len());
    for p in &pts {
        let (mode, ok) = shift_to_mode(p, &pts, inv_two_h2, config.tol, config.max_iter);
        if !ok {
            unconverged += 1;
        }
        if !raw_modes.iter().any(|m| dist2(m, &mode) <= merge2) {
            raw_modes.push(mode.clone());
        }
        converged.push(mode);
    }
    let nearest: Vec<usize> = converged
        .iter()
        .map(|p| {
            (0..raw_modes.len())
                .min_by(|&a, &b| dist2(p, &raw_modes[a]).total_cmp(&dist2(p, &raw_modes[b])))
                .unwrap_or(0)
        })
        .collect();
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    let mut modes = Vec::new();
    let ids = nearest
        .iter()
        .map(|&m| {
            *remap.entry(m).or_insert_with(|| {
                modes.push(raw_modes[m].clone());
                modes.len() - 1
            })
        })
        .collect();
    Ok(ClusterAssignment {
        ids,
        modes,
        bandwidth,
        unconverged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Purity {
    /// Mean over clusters of the majority-label fraction.
    pub macro_avg: f64,
    /// Majority-label count summed over clusters, divided by all points.
    pub micro: f64,
}

pub fn purity(ids: &[usize], labels: &[u8]) -> Result<Purity> {
    if ids.len() != labels.len() {
        return config_err(format!("{} assignments but {} labels", ids.len(), labels.len()));
    }
    if ids.is_empty() {
        return Err(Error::Domain("purity of an empty assignment".into()));
    }
    let mut counts: BTreeMap<usize, BTreeMap<u8, usize>> = BTreeMap::new();
    for (&c, &l) in ids.iter().zip(labels) {
        *counts.entry(c).or_default().entry(l).or_default() += 1;
    }
    let mut macro_sum = 0.0;
    let mut majority_total = 0usize;
    for per_label in counts.values() {
        let n_c: usize = per_label.values().sum();
        let best = *per_label.values().max().unwrap_or(&0);
        macro_sum += best as f64 / n_c as f64;
        majority_total += best;
    }
    Ok(Purity {
        macro_avg: macro_sum / counts.len() as f64,
        micro: majority_total as f64 / ids.len() as f64,
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return config_err("spearman needs two equal-length samples of size >= 2");
    }
    Ok(pearson(&ranks(x), &ranks(y)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub z: f64,
    /// Two-sided p-value from the tie-corrected normal approximation.
    pub p_two_sided: f64,
    /// One-sided p-value for the first sample tending larger.
    pub p_greater: f64,
}

pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Mann-Whitney test needs two nonempty samples".into()));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let r1: f64 = r[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mean = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    let (z, p_two, p_greater) = if var > 0.0 {
        let z = (u - mean) / var.sqrt();
        (z, 2.0 * normal.cdf(-z.abs()), normal.cdf(-z))
    } else {
        (0.0, 1.0, 0.5)
    };
    Ok(MannWhitney {
        u,
        z,
        p_two_sided: p_two.min(1.0),
        p_greater,
    })
}
