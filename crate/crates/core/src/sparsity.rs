//! Scale-invariant sparseness measure of a descriptor and its gradient.
//!
//! The measure is the squared ratio of the L1 norm to the L2 norm. It is 1
//! for a vector with a single non-zero component and `dim` when all
//! components share a common magnitude. Because it is homogeneous of degree
//! zero it cannot be reduced by shrinking the descriptor, unlike a plain L1
//! penalty.

use crate::nn::Scalar;

/// Floor on the L2 norm in the denominator; the ratio is undefined at the
/// zero vector.
pub const RATIO_EPS: f64 = 1e-8;

/// `(|v|_1 / max(|v|_2, eps))^2`. Exact for any vector with norm above
/// `eps`; 0 for the zero vector.
pub fn sparsity_ratio<T: Scalar>(v: &[T]) -> f64 {
    let l1: f64 = v.iter().map(|x| x.as_f64().abs()).sum();
    let l2: f64 = v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    let r = l1 / l2.max(RATIO_EPS);
    r * r
}

/// Analytic gradient of [`sparsity_ratio`], with `sign(0) = 0`.
///
/// With `s = |v|_1` and `q = |v|_2 > eps`:
/// `d/dv_i = 2 s / q^2 * (sign(v_i) - s v_i / q^2)`.
/// Below the floor the denominator is constant and only the L1 term
/// contributes.
pub fn sparsity_ratio_gradient<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); v.len()];
    sparsity_ratio_gradient_into(v, T::one(), &mut out);
    out
}

/// Adds `scale * grad` of the ratio into `out`.
pub fn sparsity_ratio_gradient_into<T: Scalar>(v: &[T], scale: T, out: &mut [T]) {
    let l1: f64 = v.iter().map(|x| x.as_f64().abs()).sum();
    let q: f64 = v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    let qe = q.max(RATIO_EPS);
    let lead = 2.0 * l1 / (qe * qe);
    let cross = if q > RATIO_EPS { l1 / (q * q) } else { 0.0 };
    let scale = scale.as_f64();
    for (o, x) in out.iter_mut().zip(v) {
        let x = x.as_f64();
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        *o = *o + T::from_f64(scale * lead * (sign - cross * x));
    }
}

pub fn l1_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64().abs()).sum()
}

pub fn l2_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt()
}
