//! Convolution identity for trigonometric polynomials.
//!
//! For `p(x) = (2 pi)^{-D} sum_k p~(k) e^{i<k,x>}` the `s`-th mixed derivative
//! multiplies `p~(k)` by `prod_j (i k_j)^s`, so
//!
//! ```text
//! (2 pi)^D (p^{(s)} q^{(s)})~(y) = sum_z kappa(y - z, z) p~(y - z) q~(z),
//! kappa(u, z) = prod_j (i u_j)^s (i z_j)^s.
//! ```
//!
//! At `y = 0`, `kappa(-z, z) = z^{2s}`, which is the weighted sum the
//! estimators use. For `y != 0` and `s >= 1` the kernel is not `z^{2s}`;
//! [`stated_form_residual`] measures how far the `z^{2s}` form is off.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{sobolev_weight, MultiIndex};

/// Finitely supported Fourier coefficients `k -> p~(k)`.
pub type TrigCoeffs = BTreeMap<MultiIndex, Complex64>;

fn integer_order(s: f64) -> Result<u32> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "order must be >= 0, got {s}"
        )));
    }
    if s.fract() != 0.0 || s > 64.0 {
        return Err(Error::Unsupported(format!(
            "the convolution identity is checked only for integer orders, got s = {s}"
        )));
    }
    Ok(s as u32)
}

fn common_dim(p: &TrigCoeffs, q: &TrigCoeffs, y: &MultiIndex) -> Result<usize> {
    let dim = y.dim();
    for k in p.keys().chain(q.keys()) {
        if k.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: k.dim(),
            });
        }
    }
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "frequency vectors need at least one coordinate".into(),
        ));
    }
    Ok(dim)
}

/// `(i k)^s` for each coordinate, multiplied.
fn derivative_factor(k: &[i64], s: u32) -> Complex64 {
    k.iter()
        .map(|&c| Complex64::new(0.0, c as f64).powu(s))
        .product()
}

fn lhs(
    p: &TrigCoeffs,
    q: &TrigCoeffs,
    y: &MultiIndex,
    kernel: impl Fn(&[i64], &[i64]) -> Complex64,
) -> Complex64 {
    q.iter()
        .filter_map(|(z, qz)| {
            let u: Vec<i64> = y
                .coords()
                .iter()
                .zip(z.coords())
                .map(|(a, b)| a - b)
                .collect();
            p.get(&MultiIndex::new(u.clone()))
                .map(|pu| kernel(&u, z.coords()) * pu * qz)
        })
        .sum()
}

/// `(2 pi)^D (p^{(s)} q^{(s)})~(y)` by the periodic trapezoid rule on a
/// grid fine enough to be exact for the product's frequencies.
fn rhs_by_quadrature(
    p: &TrigCoeffs,
    q: &TrigCoeffs,
    s: u32,
    y: &MultiIndex,
    dim: usize,
) -> Complex64 {
    let degree = |c: &TrigCoeffs| c.keys().map(MultiIndex::linf).max().unwrap_or(0);
    let nodes = (degree(p) + degree(q) + y.linf() + 1) as usize;
    let h = TAU / nodes as f64;
    let norm = TAU.powi(dim as i32);
    let eval = |c: &TrigCoeffs, x: &[f64]| -> Complex64 {
        c.iter()
            .map(|(k, v)| {
                let phase: f64 = k.coords().iter().zip(x).map(|(&a, b)| a as f64 * b).sum();
                derivative_factor(k.coords(), s) * v * Complex64::from_polar(1.0, phase)
            })
            .sum::<Complex64>()
            / norm
    };
    let total = nodes.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut acc = Complex64::new(0.0, 0.0);
    for mut idx in 0..total {
        for xj in x.iter_mut() {
            *xj = -PI + h * (idx % nodes) as f64;
            idx /= nodes;
        }
        let phase: f64 = y.coords().iter().zip(&x).map(|(&a, b)| a as f64 * b).sum();
        acc += eval(p, &x) * eval(q, &x) * Complex64::from_polar(1.0, -phase);
    }
    acc * h.powi(dim as i32) * norm
}

/// `|sum_z kappa(y - z, z) p~(y - z) q~(z) - (2 pi)^D (p^{(s)} q^{(s)})~(y)|`,
/// the right side by quadrature. Only integer `s` is supported.
pub fn convolution_identity_residual(
    p: &TrigCoeffs,
    q: &TrigCoeffs,
    s: f64,
    y: &MultiIndex,
) -> Result<f64> {
    let s = integer_order(s)?;
    let dim = common_dim(p, q, y)?;
    let left = lhs(p, q, y, |u, z| {
        derivative_factor(u, s) * derivative_factor(z, s)
    });
    Ok((left - rhs_by_quadrature(p, q, s, y, dim)).norm())
}

/// Residual of the `z^{2s}`-weighted sum against the same right side. Zero
/// at `y = 0` or `s = 0`; in general not zero elsewhere.
pub fn stated_form_residual(p: &TrigCoeffs, q: &TrigCoeffs, s: f64, y: &MultiIndex) -> Result<f64> {
    let si = integer_order(s)?;
    let dim = common_dim(p, q, y)?;
    let left = lhs(p, q, y, |_, z| {
        Complex64::new(sobolev_weight(&MultiIndex::new(z.to_vec()), s), 0.0)
    });
    Ok((left - rhs_by_quadrature(p, q, si, y, dim)).norm())
}
