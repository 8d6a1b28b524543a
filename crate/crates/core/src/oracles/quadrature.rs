//! Brute-force Fourier coefficients by adaptive quadrature.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use quadrature::double_exponential;
use rayon::prelude::*;

use super::density::{Factor, NamedDensity};
use crate::error::{Error, Result};
use crate::lattice::{sobolev_weight, MultiIndex};

/// Absolute error allowed per Fourier coefficient.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-10;

/// One coordinate of a product density on `[-pi, pi]`, with the points
/// where it fails to be smooth.
#[derive(Clone)]
pub struct AxisDensity {
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breaks: Vec<f64>,
}

impl std::fmt::Debug for AxisDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxisDensity")
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl AxisDensity {
    pub fn new(pdf: impl Fn(f64) -> f64 + Send + Sync + 'static, breaks: Vec<f64>) -> Self {
        AxisDensity {
            pdf: Arc::new(pdf),
            breaks,
        }
    }

    /// The factor reduced modulo `2 pi` (its periodic summation).
    pub fn wrapped(factor: &Factor) -> Self {
        let f = factor.clone();
        let breaks = factor.wrapped_breakpoints();
        AxisDensity::new(move |x| f.wrapped_pdf(x), breaks)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }

    /// `[-pi, b_1, ..., pi]`.
    fn regions(&self, other: Option<&AxisDensity>) -> Vec<f64> {
        let mut knots = vec![-PI, PI];
        knots.extend(self.breaks.iter().filter(|b| b.abs() < PI));
        if let Some(o) = other {
            knots.extend(o.breaks.iter().filter(|b| b.abs() < PI));
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        knots
    }
}

/// Axes of the periodic summation of a product density.
pub fn wrapped_axes(p: &NamedDensity) -> Vec<AxisDensity> {
    p.factors.iter().map(AxisDensity::wrapped).collect()
}

/// `int_a^b f`, returning the value and the error estimate. The interval is
/// cut into `pieces` equal parts.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> (f64, f64) {
    let h = (b - a) / pieces as f64;
    let per_piece = COEFFICIENT_TOLERANCE * 1e-3 / pieces as f64;
    (0..pieces).fold((0.0, 0.0), |(v, e), k| {
        let lo = a + h * k as f64;
        let hi = if k + 1 == pieces { b } else { lo + h };
        let out = double_exponential::integrate(&f, lo, hi, per_piece);
        (v + out.integral, e + out.error_estimate)
    })
}

/// `int_{-pi}^{pi} exp(-i z x) f(x) dx` with absolute error at most
/// [`COEFFICIENT_TOLERANCE`].
pub fn fourier_coefficient(axis: &AxisDensity, z: i64) -> Result<Complex64> {
    let knots = axis.regions(None);
    let zf = z as f64;
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for w in knots.windows(2) {
        // about one oscillation per piece
        let pieces = ((w[1] - w[0]) * zf.abs() / TAU).ceil().max(1.0) as usize;
        let (re, e1) = integrate(|x| axis.eval(x) * (zf * x).cos(), w[0], w[1], pieces);
        let (im, e2) = integrate(|x| -axis.eval(x) * (zf * x).sin(), w[0], w[1], pieces);
        value += Complex64::new(re, im);
        error += e1 + e2;
    }
    if !(error <= COEFFICIENT_TOLERANCE) || !value.is_finite() {
        return Err(Error::QuadratureNonConvergence {
            frequency: z,
            error,
        });
    }
    Ok(value)
}

fn check_axes(a: &[AxisDensity], b: &[AxisDensity]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// `S = sum_{||z||_inf <= zn} z^{2s} a~(z) conj(b~(z))` with every
/// coefficient computed by quadrature over `[-pi, pi]`. The cube and the
/// weights factorize over coordinates, so the sum is a product of
/// one-dimensional sums.
pub fn quadrature_truncated_inner(
    a: &[AxisDensity],
    b: &[AxisDensity],
    s: f64,
    zn: usize,
) -> Result<f64> {
    check_axes(a, b)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "order must be >= 0, got {s}"
        )));
    }
    let zn = zn as i64;
    let jobs: Vec<(usize, i64)> = (0..a.len())
        .flat_map(|j| (-zn..=zn).map(move |z| (j, z)))
        .collect();
    let terms: Vec<(usize, Complex64)> = jobs
        .par_iter()
        .map(|&(j, z)| {
            let pa = fourier_coefficient(&a[j], z)?;
            let pb = fourier_coefficient(&b[j], z)?;
            let w = sobolev_weight(&MultiIndex::new(vec![z]), s);
            Ok((j, pa * pb.conj() * w))
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![Complex64::new(0.0, 0.0); a.len()];
    for (j, t) in terms {
        sums[j] += t;
    }
    Ok(sums.into_iter().product::<Complex64>().re)
}

/// `(2 pi)^D int_{[-pi, pi]^D} a b` by direct quadrature.
pub fn l2_inner_on_box(a: &[AxisDensity], b: &[AxisDensity]) -> Result<f64> {
    check_axes(a, b)?;
    let mut out = 1.0;
    for (fa, fb) in a.iter().zip(b) {
        let knots = fa.regions(Some(fb));
        let mut v = 0.0;
        let mut e = 0.0;
        for w in knots.windows(2) {
            let (x, err) = integrate(|x| fa.eval(x) * fb.eval(x), w[0], w[1], 1);
            v += x;
            e += err;
        }
        if e > COEFFICIENT_TOLERANCE {
            return Err(Error::QuadratureNonConvergence {
                frequency: 0,
                error: e,
            });
        }
        out *= TAU * v;
    }
    Ok(out)
}

/// Total mass of `p` over `R^D` by quadrature.
pub fn total_mass(p: &NamedDensity) -> f64 {
    p.factors
        .iter()
        .map(|f| {
            let mut knots = match *f {
                Factor::Gaussian { mean, sd } => (-40..=40).map(|k| mean + sd * k as f64).collect(),
                _ => f.breakpoints(),
            };
            knots.sort_by(f64::total_cmp);
            knots.dedup();
            knots
                .windows(2)
                .map(|w| integrate(|x| f.pdf(x), w[0], w[1], 1).0)
                .sum::<f64>()
        })
        .product()
}

/// Fails unless `p` integrates to 1 within `1e-8`.
pub fn check_normalization(p: &NamedDensity) -> Result<()> {
    let m = total_mass(p);
    if (m - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "density integrates to {m}, not 1"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::closed_form_quantity;

    fn uniform_box() -> Vec<AxisDensity> {
        vec![AxisDensity::new(|_| 1.0 / TAU, vec![])]
    }

    #[test]
    fn flat_density_keeps_only_zero_frequency() {
        for zn in [0, 1, 5] {
            let s0 = quadrature_truncated_inner(&uniform_box(), &uniform_box(), 0.0, zn).unwrap();
            assert!((s0 - 1.0).abs() < 1e-10);
            let s1 = quadrature_truncated_inner(&uniform_box(), &uniform_box(), 1.0, zn).unwrap();
            assert!(s1.abs() < 1e-10);
        }
    }

    #[test]
    fn wrapped_gaussian_coefficients_are_exact() {
        let axis = AxisDensity::wrapped(&Factor::Gaussian { mean: 0.3, sd: 0.9 });
        for z in [0, 1, 4, 12, 30] {
            let got = fourier_coefficient(&axis, z).unwrap();
            let want = Factor::Gaussian { mean: 0.3, sd: 0.9 }.fourier(z);
            assert!((got - want).norm() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn wrapped_gaussian_sum_approaches_the_lattice_series() {
        let g = NamedDensity::gaussian(0.0, 1.0).unwrap();
        let axes = wrapped_axes(&g);
        let mut last = 0.0;
        for zn in [0, 1, 2, 4, 8, 20] {
            let v = quadrature_truncated_inner(&axes, &axes, 0.0, zn).unwrap();
            assert!(v >= last - 1e-10);
            last = v;
        }
        // sum_z e^{-z^2}; it differs from sqrt(pi) by the periodization
        // term 2 sqrt(pi) e^{-pi^2} ~ 1.8e-4, not by truncation
        let series: f64 = (-20i32..=20).map(|z| (-(z * z) as f64).exp()).sum();
        assert!((last - series).abs() < 1e-9);
        let exact = closed_form_quantity(&g, &g, 0.0).unwrap();
        let gap = last - exact;
        assert!((gap - 2.0 * PI.sqrt() * (-PI * PI).exp()).abs() < 1e-8);
    }

    #[test]
    fn parseval_on_the_box_for_smooth_pairs() {
        let pairs = [
            (
                Factor::Gaussian { mean: 0.0, sd: 0.5 },
                Factor::Gaussian { mean: 0.7, sd: 0.4 },
            ),
            (
                Factor::Triangular {
                    lo: 0.0,
                    mode: 0.5,
                    hi: 1.0,
                },
                Factor::Gaussian { mean: 0.2, sd: 0.6 },
            ),
            (
                Factor::Triangular {
                    lo: -1.0,
                    mode: 0.5,
                    hi: 2.0,
                },
                Factor::Triangular {
                    lo: 0.0,
                    mode: 0.5,
                    hi: 1.0,
                },
            ),
        ];
        for (fa, fb) in pairs {
            let a = vec![AxisDensity::wrapped(&fa)];
            let b = vec![AxisDensity::wrapped(&fb)];
            let series = quadrature_truncated_inner(&a, &b, 0.0, 200).unwrap();
            let direct = l2_inner_on_box(&a, &b).unwrap();
            assert!(
                (series - direct).abs() < 1e-6,
                "{fa:?} {fb:?}: {series} vs {direct}"
            );
        }
    }

    #[test]
    fn parseval_with_a_uniform_converges_at_the_tail_rate() {
        // uniform coefficients decay like 1/z, so the partial sums carry a
        // tail of order 1/Z
        let a = vec![AxisDensity::wrapped(&Factor::Uniform { lo: 0.0, hi: 1.0 })];
        let direct = l2_inner_on_box(&a, &a).unwrap();
        assert!((direct - TAU).abs() < 1e-9);
        let series = quadrature_truncated_inner(&a, &a, 0.0, 200).unwrap();
        let tail_bound = 2.0 * 4.0 / 200.0;
        assert!(direct - series > 0.0 && direct - series < tail_bound);
    }

    #[test]
    fn named_densities_are_normalized() {
        for p in [
            NamedDensity::gaussian(1.0, 0.3).unwrap(),
            NamedDensity::uniform(-1.0, 2.0).unwrap(),
            NamedDensity::triangular(0.0, 0.5, 1.0).unwrap(),
            NamedDensity::isotropic_gaussian(&[0.0, 1.0], 2.0).unwrap(),
        ] {
            check_normalization(&p).unwrap();
        }
    }
}
