//! Kernel density estimates of inferred descriptor norms and the
//! likelihood `f = g / (g + h)`.

use serde::{Deserialize, Serialize};

use super::model::InferenceModel;
use crate::data::InteractionImage;
use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 512;
pub const MIN_BANDWIDTH: f64 = 1e-3;
/// Below this combined density `f` falls back to 0.5.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// A 1-D Gaussian KDE tabulated on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub bandwidth: f64,
    pub samples: usize,
    pub values: Vec<f64>,
}

/// Norm densities of positives (`g`) and negatives (`h`) on a shared grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDensityPair {
    pub grid: Vec<f64>,
    pub g: Density,
    pub h: Density,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^(-1/5)`, floored at
/// [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return MIN_BANDWIDTH;
    }
    let (_, sd) = mean_std(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * (samples.len() as f64).powf(-0.2);
    if bw.is_finite() && bw > MIN_BANDWIDTH {
        bw
    } else {
        MIN_BANDWIDTH
    }
}

/// Gaussian KDE of `samples` with bandwidth `bw` evaluated at `x`.
pub fn kde_at(samples: &[f64], bw: f64, x: f64) -> f64 {
    let norm = 1.0 / (samples.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    samples.iter().map(|s| (-0.5 * ((x - s) / bw).powi(2)).exp()).sum::<f64>() * norm
}

/// Trapezoid-rule integral of tabulated values.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Interpolates tabulated values linearly; zero outside the grid.
pub fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    if !(x >= first && x <= last) {
        return 0.0;
    }
    let step = (last - first) / (grid.len() - 1) as f64;
    if step == 0.0 {
        return values[0];
    }
    let pos = (x - first) / step;
    let i = (pos.floor() as usize).min(grid.len() - 2);
    let t = pos - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

impl NormDensityPair {
    /// Estimates both densities from raw norm samples. The grid spans both
    /// supports padded by four bandwidths on each side.
    pub fn from_norms(positive: &[f64], negative: &[f64]) -> Result<Self> {
        if positive.is_empty() || negative.is_empty() {
            return Err(Error::Domain("norm densities need positive and negative samples".into()));
        }
        if positive.iter().chain(negative).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite descriptor norm".into()));
        }
        let (bw_g, bw_h) = (silverman_bandwidth(positive), silverman_bandwidth(negative));
        let pad = 4.0 * bw_g.max(bw_h);
        let lo = positive.iter().chain(negative).copied().fold(f64::INFINITY, f64::min) - pad;
        let hi = positive.iter().chain(negative).copied().fold(f64::NEG_INFINITY, f64::max) + pad;
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
        let tab = |s: &[f64], bw: f64| Density {
            bandwidth: bw,
            samples: s.len(),
            values: grid.iter().map(|&x| kde_at(s, bw, x)).collect(),
        };
        Ok(Self {
            g: tab(positive, bw_g),
            h: tab(negative, bw_h),
            grid,
        })
    }

    /// `f` at a given descriptor norm.
    pub fn likelihood_of_norm(&self, norm: f64) -> f64 {
        let g = interpolate(&self.grid, &self.g.values, norm);
        let h = interpolate(&self.grid, &self.h.values, norm);
        if g + h < DENSITY_FLOOR {
            0.5
        } else {
            g / (g + h)
        }
    }

    /// CSV `norm,g,h`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("norm,g,h\n");
        for ((x, g), h) in self.grid.iter().zip(&self.g.values).zip(&self.h.values) {
            out.push_str(&format!("{x},{g},{h}\n"));
        }
        out
    }
}

/// Norms of `R(O)` over a set of object-only images.
pub fn inferred_norms(model: &InferenceModel, images: &[InteractionImage]) -> Result<Vec<f64>> {
    Ok(model.infer_batch(images)?.iter().map(|d| d.norm()).collect())
}

pub fn estimate_norm_densities(
    model: &InferenceModel,
    positives: &[InteractionImage],
    negatives: &[InteractionImage],
) -> Result<NormDensityPair> {
    NormDensityPair::from_norms(&inferred_norms(model, positives)?, &inferred_norms(model, negatives)?)
}

/// Likelihood that `object_image` shows an object with a known interaction.
pub fn likelihood(model: &InferenceModel, densities: &NormDensityPair, object_image: &InteractionImage) -> Result<f64> {
    let d = model.infer_batch(std::slice::from_ref(object_image))?;
    Ok(densities.likelihood_of_norm(d[0].norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densities_integrate_to_one() {
        let pos: Vec<f64> = (0..50).map(|i| 2.0 + (i as f64 * 0.37).sin()).collect();
        let neg: Vec<f64> = (0..40).map(|i| 0.3 + 0.1 * (i as f64 * 1.3).cos()).collect();
        let d = NormDensityPair::from_norms(&pos, &neg).unwrap();
        assert_eq!(d.grid.len(), GRID_POINTS);
        assert!((trapezoid(&d.grid, &d.g.values) - 1.0).abs() < 1e-3);
        assert!((trapezoid(&d.grid, &d.h.values) - 1.0).abs() < 1e-3);
        assert!(d.likelihood_of_norm(2.0) > 0.99);
        assert!(d.likelihood_of_norm(0.3) < 0.01);
        assert_eq!(d.likelihood_of_norm(1e6), 0.5);
    }

    #[test]
    fn degenerate_norms_use_minimum_bandwidth() {
        let d = NormDensityPair::from_norms(&[0.0; 10], &[5.0, 5.0]).unwrap();
        assert_eq!(d.g.bandwidth, MIN_BANDWIDTH);
        assert_eq!(d.h.bandwidth, MIN_BANDWIDTH);
        let peak = d.grid[d.g.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
        assert!(peak.abs() < 0.02);
    }

    #[test]
    fn equal_densities_give_half() {
        let s = [1.0, 1.5, 2.0, 2.2];
        let d = NormDensityPair::from_norms(&s, &s).unwrap();
        assert!((d.likelihood_of_norm(1.7) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_linear() {
        let grid = [0.0, 1.0, 2.0];
        let vals = [0.0, 2.0, 4.0];
        assert_eq!(interpolate(&grid, &vals, 0.25), 0.5);
        assert_eq!(interpolate(&grid, &vals, 2.0), 4.0);
        assert_eq!(interpolate(&grid, &vals, -0.1), 0.0);
    }
}
