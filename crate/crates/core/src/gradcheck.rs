//! Central finite-difference checks of analytic gradients.
//!
//! The plain oracle is `(C(t + h) - C(t - h)) / 2h`. Its truncation error
//! is `h^2 C''' / 6`, which the sparseness ratio inflates near small
//! descriptors because its derivatives scale with `1 / |E(I)|`. The
//! refined oracle combines steps `h` and `h/2` (Richardson), cancelling
//! the `h^2` term.

use crate::cae::CaeModel;
use crate::error::Result;
use crate::nn::{Network, Scalar, Tensor};

pub const FD_STEP: f64 = 1e-4;
/// Gradients smaller than this in magnitude are compared absolutely.
/// Roundoff in the difference quotient is about `eps_mach * |C| / h`,
/// near 1e-9 for the reduced network, so smaller gradients cannot be
/// resolved to 1e-4 relative.
pub const ABS_FLOOR: f64 = 1e-5;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    /// Parameters compared (kinks excluded).
    pub checked: usize,
    /// Worst error against the refined oracle.
    pub max_rel_error: f64,
    /// Worst error against the plain step-`h` oracle.
    pub max_rel_error_plain: f64,
    /// Flat index (encoder first, then decoder) of the worst parameter.
    pub worst: usize,
    /// Analytic and refined numeric gradient at `worst`.
    pub worst_pair: (f64, f64),
    /// Parameters whose difference stencil crosses a sign change of a
    /// descriptor component, where the L1 norm has a kink.
    pub skipped_kinks: usize,
}

impl GradCheckReport {
    fn record(&mut self, index: usize, analytic: f64, refined: f64, plain: f64) {
        let err = relative_error(analytic, refined);
        if err > self.max_rel_error {
            self.max_rel_error = err;
            self.worst = index;
            self.worst_pair = (analytic, refined);
        }
        self.max_rel_error_plain = self.max_rel_error_plain.max(relative_error(analytic, plain));
        self.checked += 1;
    }
}

/// `|a - n| / max(|a|, |n|, ABS_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Plain and Richardson-refined central differences of `f` at `x`.
pub fn central_differences(mut f: impl FnMut(f64) -> Result<f64>, x: f64, h: f64) -> Result<(f64, f64)> {
    let d_h = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let d_half = (f(x + h / 2.0)? - f(x - h / 2.0)?) / h;
    Ok((d_h, (4.0 * d_half - d_h) / 3.0))
}

fn param_mut(net: &mut Network<f64>, mut flat: usize) -> &mut f64 {
    for t in net.param_tensors_mut() {
        if flat < t.len() {
            return &mut t.data_mut()[flat];
        }
        flat -= t.len();
    }
    panic!("parameter index out of range");
}

fn net(model: &mut CaeModel<f64>, encoder: bool) -> &mut Network<f64> {
    if encoder {
        &mut model.encoder
    } else {
        &mut model.decoder
    }
}

fn crosses_kink<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> bool {
    a.data()
        .iter()
        .zip(b.data())
        .any(|(x, y)| x.signum() != y.signum() || x.is_zero() || y.is_zero())
}

/// Compares the analytic gradient of the model's total cost with finite
/// differences for every encoder and decoder parameter.
pub fn check_cae_gradients(model: &CaeModel<f64>, batch: &Tensor<f64>, step: f64) -> Result<GradCheckReport> {
    let (_, g_enc, g_dec) = model.cost_and_gradients(batch)?;
    let mut report = GradCheckReport::default();
    let mut probe = model.clone();
    let mut offset = 0;
    for (is_encoder, tape) in [(true, &g_enc), (false, &g_dec)] {
        let analytic: Vec<f64> = tape.grad_tensors().iter().flat_map(|t| t.data().to_vec()).collect();
        for (flat, &a) in analytic.iter().enumerate() {
            let original = *param_mut(net(&mut probe, is_encoder), flat);
            if is_encoder && model.lambda > 0.0 {
                *param_mut(net(&mut probe, is_encoder), flat) = original + step;
                let z_plus = probe.encode_batch(batch)?;
                *param_mut(net(&mut probe, is_encoder), flat) = original - step;
                let z_minus = probe.encode_batch(batch)?;
                *param_mut(net(&mut probe, is_encoder), flat) = original;
                if crosses_kink(&z_plus, &z_minus) {
                    report.skipped_kinks += 1;
                    continue;
                }
            }
            let (plain, refined) = central_differences(
                |v| {
                    *param_mut(net(&mut probe, is_encoder), flat) = v;
                    Ok(probe.costs(batch)?.total)
                },
                original,
                step,
            )?;
            *param_mut(net(&mut probe, is_encoder), flat) = original;
            report.record(offset + flat, a, refined, plain);
        }
        offset += analytic.len();
    }
    Ok(report)
}
