//! Training one CAE per sparseness weight and summarizing the descriptor
//! space each one produces.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cae::{train_cae, CaeModel, CaeTrainConfig, TrainReport};
use crate::data::{InteractionImage, PROTOTYPE_COUNT};
use crate::error::{config_err, Error, Result};
use crate::metrics::{mean_diameter, mean_shift, purity, ClusterAssignment, DescriptorSet, MeanShiftConfig};

pub const SWEEP_CSV_HEADER: &str = "lambda,c_err,c_sparse,mu_dia,purity_macro,purity_micro,seed,status";
pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 0.1, 0.3, 1.0, 3.0, 10.0];

/// Held-out descriptor-space summary of one trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSpaceMetrics {
    /// Mean per-image reconstruction cost.
    pub c_err: f64,
    /// Mean per-image sparseness ratio.
    pub c_sparse: f64,
    pub mu_dia: f64,
    pub purity_macro: f64,
    pub purity_micro: f64,
    pub clusters: usize,
    pub bandwidth: f64,
}

/// Encodes labeled held-out images and measures `mu_dia` and purity.
pub fn evaluate_descriptor_space(
    model: &CaeModel,
    images: &[InteractionImage],
    mean_shift_config: &MeanShiftConfig,
) -> Result<(DescriptorSpaceMetrics, DescriptorSet, ClusterAssignment)> {
    let labels: Vec<u8> = images
        .iter()
        .map(|i| i.label.ok_or_else(|| Error::Domain("evaluation image without a label".into())))
        .collect::<Result<_>>()?;
    let costs = model.evaluate(images)?;
    let set = DescriptorSet::new(model.encode_images(images)?, labels)?;
    let num_types = set.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(PROTOTYPE_COUNT);
    let assignment = mean_shift(&set.descriptors, mean_shift_config)?;
    let p = purity(&assignment.ids, &set.labels)?;
    let n = images.len() as f64;
    let metrics = DescriptorSpaceMetrics {
        c_err: costs.c_err / n,
        c_sparse: costs.c_sparse / n,
        mu_dia: mean_diameter(&set, num_types)?,
        purity_macro: p.macro_avg,
        purity_micro: p.micro,
        clusters: assignment.cluster_count(),
        bandwidth: assignment.bandwidth,
    };
    Ok((metrics, set, assignment))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub lambda: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub metrics: Option<DescriptorSpaceMetrics>,
    pub model: Option<CaeModel>,
    pub report: Option<TrainReport>,
}

impl SweepRun {
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        match (&self.status, &self.metrics) {
            (RunStatus::Ok, Some(m)) => {
                let _ = write!(
                    s,
                    "{},{},{},{},{},{},{},ok",
                    self.lambda, m.c_err, m.c_sparse, m.mu_dia, m.purity_macro, m.purity_micro, self.seed
                );
            }
            (status, _) => {
                let reason = match status {
                    RunStatus::Failed(r) => r.replace([',', '\n'], ";"),
                    RunStatus::Ok => "no metrics".into(),
                };
                let _ = write!(s, "{},,,,,,{},failed: {reason}", self.lambda, self.seed);
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SWEEP_CSV_HEADER}\n");
        for r in &self.runs {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn succeeded(&self) -> impl Iterator<Item = (&SweepRun, &DescriptorSpaceMetrics)> {
        self.runs.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r, m)))
    }

    /// Scatter of `(C_sparse, mu_dia)` per successful run, labeled by lambda.
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64, f64)> = self.succeeded().map(|(r, m)| (m.c_sparse, m.mu_dia, r.lambda)).collect();
        let (w, h, pad) = (480.0, 360.0, 48.0);
        let span = |v: Vec<f64>| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = span(pts.iter().map(|p| p.0).collect());
        let (y0, y1) = span(pts.iter().map(|p| p.1).collect());
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
             <line x1=\"{pad}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <text x=\"{cx}\" y=\"{lb}\" text-anchor=\"middle\" font-size=\"12\">C_sparse</text>\n\
             <text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 {cy})\">mean diameter</text>\n",
            b = h - pad,
            r = w - pad,
            cx = w / 2.0,
            lb = h - 12.0,
            cy = h / 2.0,
        );
        for (x, y, l) in &pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"steelblue\"/><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\">{l}</text>",
                sx(*x),
                sy(*y),
                sx(*x) + 6.0,
                sy(*y) - 6.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Trains one model per `lambda` on `train` with everything else from
/// `base`, then measures each on the labeled `eval` images. Runs are
/// independent and execute in parallel; a failed run becomes a failed row.
pub fn lambda_sweep(
    train: &[InteractionImage],
    eval: &[InteractionImage],
    lambdas: &[f64],
    base: &CaeTrainConfig,
    mean_shift_config: &MeanShiftConfig,
) -> Result<SweepReport> {
    if lambdas.len() < 2 || !lambdas.contains(&0.0) {
        return config_err("a lambda sweep needs at least two values including 0");
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return config_err(format!("lambda must be finite and nonnegative, got {bad}"));
    }
    base.validate()?;
    let mut runs: Vec<SweepRun> = lambdas
        .par_iter()
        .map(|&lambda| {
            let config = CaeTrainConfig { lambda, ..base.clone() };
            let outcome = train_cae(train, &config)
                .and_then(|(model, report)| Ok((evaluate_descriptor_space(&model, eval, mean_shift_config)?.0, model, report)));
            match outcome {
                Ok((metrics, model, report)) => SweepRun {
                    lambda,
                    seed: base.seed,
                    status: RunStatus::Ok,
                    metrics: Some(metrics),
                    model: Some(model),
                    report: Some(report),
                },
                Err(e) => SweepRun {
                    lambda,
                    seed: base.seed,
                    status: RunStatus::Failed(e.to_string()),
                    metrics: None,
                    model: None,
                    report: None,
                },
            }
        })
        .collect();
    runs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(SweepReport { runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_rows_keep_lambda_and_seed() {
        let run = SweepRun {
            lambda: 3.0,
            seed: 7,
            status: RunStatus::Failed("numerical abort at epoch 2: nan, cost".into()),
            metrics: None,
            model: None,
            report: None,
        };
        assert_eq!(run.csv_row(), "3,,,,,,7,failed: numerical abort at epoch 2: nan; cost");
        assert_eq!(SWEEP_CSV_HEADER.split(',').count(), run.csv_row().split(',').count());
    }

    #[test]
    fn sweep_requires_zero() {
        let err = lambda_sweep(&[], &[], &[1.0, 3.0], &CaeTrainConfig::default(), &MeanShiftConfig::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
