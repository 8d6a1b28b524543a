//! Asymptotic confidence intervals and the chi-squared two-sample test.
//!
//! Complex frequency features are turned into real vectors by taking real
//! and imaginary parts over one half of the test frequency set (one member
//! of each pair `{z, -z}`), which removes the exact rank deficiency that the
//! conjugate pairs would otherwise put into every covariance.

mod special;

pub use special::{chi_squared_cdf, chi_squared_sf, normal_cdf, normal_quantile};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::accum::{CoeffAccumulator, PhaseTable};
use crate::error::{Error, Result};
use crate::lattice::{test_half_space, LatticeSpec};
use crate::samples::Samples;

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Half-space test frequencies with their `z^s` feature scales.
struct FeatureLayout {
    spec: LatticeSpec,
    /// Offsets into the half-lattice phase table.
    offsets: Vec<usize>,
    scales: Vec<f64>,
}

impl FeatureLayout {
    fn new(spec: &LatticeSpec) -> Result<Self> {
        let center = spec.shape.center();
        let weights = spec.weights();
        let idx = test_half_space(spec)?;
        Ok(FeatureLayout {
            spec: *spec,
            offsets: idx.iter().map(|&i| i - center).collect(),
            scales: idx.iter().map(|&i| weights[i].sqrt()).collect(),
        })
    }

    /// Number of real features, `2 * |half space|`.
    fn dof(&self) -> usize {
        2 * self.offsets.len()
    }

    /// Scaled complex features of `c`, a full-lattice coefficient vector.
    fn project_coefficients(&self, c: &[Complex64]) -> Vec<Complex64> {
        let center = self.spec.shape.center();
        self.offsets
            .iter()
            .zip(&self.scales)
            .map(|(&o, &w)| c[center + o] * w)
            .collect()
    }
}

/// Empirical variance of `x -> sum_z Re(phi_z(x) conj(dir_z))` over the
/// samples, where `phi_z(x) = z^s exp(-i <z, x>)` on the half space.
fn projected_variance(samples: &Samples, layout: &FeatureLayout, dir: &[Complex64]) -> f64 {
    let mut table = PhaseTable::new(layout.spec.shape);
    let n = samples.len() as f64;
    let proj: Vec<f64> = samples
        .rows()
        .map(|x| {
            let phases = table.compute(x);
            layout
                .offsets
                .iter()
                .zip(&layout.scales)
                .zip(dir)
                .map(|((&o, &w), d)| w * (phases[o].re * d.re + phases[o].im * d.im))
                .sum()
        })
        .collect();
    let mean = proj.iter().sum::<f64>() / n;
    proj.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n
}

/// Plug-in asymptotic standard deviation of an estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// `sigma_hat`, scaled so that the standard error is `sigma_hat / sqrt(n_ref)`.
    pub sigma_hat: f64,
    pub n_ref: usize,
    /// Set when both empirical covariances vanish (e.g. constant samples).
    pub degenerate: bool,
}

fn check_pair(x: &Samples, y: &Samples, spec: &LatticeSpec) -> Result<()> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: s.len(),
            });
        }
        if s.dim() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: s.dim(),
            });
        }
    }
    Ok(())
}

fn combine(var_x: f64, var_y: f64, nx: usize, ny: usize, factor: f64) -> VarianceEstimate {
    let n_ref = nx.min(ny);
    let total = factor * (var_x / nx as f64 + var_y / ny as f64);
    VarianceEstimate {
        sigma_hat: (total * n_ref as f64).max(0.0).sqrt(),
        n_ref,
        degenerate: var_x <= 0.0 && var_y <= 0.0,
    }
}

/// Asymptotic standard deviation of the inner-product estimate between
/// samples `x ~ p` and `y ~ q` (delta method).
///
/// With `W_j`, `V_j` the real half-space features of `x_j`, `y_j` and
/// `W_bar`, `V_bar`, `Sigma_W`, `Sigma_V` their means and covariances,
/// `sigma^2 = 4 (V_bar' Sigma_W V_bar + W_bar' Sigma_V W_bar)` for equal
/// sample sizes; the factor 4 accounts for folding each conjugate pair into
/// one real feature pair.
pub fn asymptotic_variance(
    x: &Samples,
    y: &Samples,
    spec: &LatticeSpec,
) -> Result<VarianceEstimate> {
    check_pair(x, y, spec)?;
    let layout = FeatureLayout::new(spec)?;
    let p = CoeffAccumulator::from_samples(spec.shape, x)?.coefficients()?;
    let q = CoeffAccumulator::from_samples(spec.shape, y)?.coefficients()?;
    let var_x = projected_variance(x, &layout, &layout.project_coefficients(&q));
    let var_y = projected_variance(y, &layout, &layout.project_coefficients(&p));
    Ok(combine(var_x, var_y, x.len(), y.len(), 4.0))
}

/// Asymptotic standard deviation of the squared-distance estimate.
///
/// Linearizing `||p||^2 - 2 <p, q> + ||q||^2` gives influence
/// `2 g_{p - q}` for each sample, hence the factor 16. The estimate becomes
/// degenerate as `p -> q`; use the two-sample test there.
pub fn distance_asymptotic_variance(
    x: &Samples,
    y: &Samples,
    spec: &LatticeSpec,
) -> Result<VarianceEstimate> {
    check_pair(x, y, spec)?;
    let layout = FeatureLayout::new(spec)?;
    let p = CoeffAccumulator::from_samples(spec.shape, x)?.coefficients()?;
    let q = CoeffAccumulator::from_samples(spec.shape, y)?.coefficients()?;
    let diff: Vec<Complex64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
    let dir = layout.project_coefficients(&diff);
    let var_x = projected_variance(x, &layout, &dir);
    let var_y = projected_variance(y, &layout, &dir);
    Ok(combine(var_x, var_y, x.len(), y.len(), 16.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CIReport {
    pub estimate: f64,
    pub sigma_hat: f64,
    /// Coverage level `1 - alpha`.
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

/// Normal-approximation interval `estimate +- z_{1 - alpha/2} sigma_hat / sqrt(n)`.
pub fn confidence_interval(
    estimate: f64,
    sigma_hat: f64,
    n: usize,
    alpha: f64,
) -> Result<CIReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(sigma_hat >= 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "need sigma_hat >= 0 and n >= 1, got {sigma_hat} and {n}"
        )));
    }
    let half = normal_quantile(1.0 - alpha / 2.0)? * sigma_hat / (n as f64).sqrt();
    Ok(CIReport {
        estimate,
        sigma_hat,
        level: 1.0 - alpha,
        lower: estimate - half,
        upper: estimate + half,
        n,
    })
}

/// `T = n W_bar' Sigma^{-1} W_bar` with its degrees of freedom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleStatistic {
    pub statistic: f64,
    pub dof: usize,
    /// Number of index pairs `(x_j, y_j)` used.
    pub n: usize,
    pub zn: usize,
    pub order: f64,
    pub ridge: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Real feature vector of `z^s (exp(-i<z,x>) - exp(-i<z,y>))` over the half space.
fn difference_features(
    layout: &FeatureLayout,
    tx: &mut PhaseTable,
    ty: &mut PhaseTable,
    x: &[f64],
    y: &[f64],
    out: &mut [f64],
) {
    let m = layout.offsets.len();
    let px = tx.compute(x);
    let py = ty.compute(y);
    for (k, (&o, &w)) in layout.offsets.iter().zip(&layout.scales).enumerate() {
        let d = px[o] - py[o];
        out[k] = w * d.re;
        out[m + k] = w * d.im;
    }
}

/// Two-sample chi-squared statistic.
///
/// `x_j` and `y_j` are paired by index; unequal sets are truncated to the
/// shorter length with a warning. The covariance is inverted as
/// `Sigma + ridge * (tr Sigma / dof) * I`.
pub fn two_sample_statistic(
    x: &Samples,
    y: &Samples,
    spec: &LatticeSpec,
    ridge: f64,
) -> Result<TwoSampleStatistic> {
    check_pair(x, y, spec)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    let layout = FeatureLayout::new(spec)?;
    let dof = layout.dof();
    let n = x.len().min(y.len());
    let mut warnings = Vec::new();
    if x.len() != y.len() {
        warnings.push(format!(
            "unequal sample sizes {} and {}; using the first {n} of each",
            x.len(),
            y.len()
        ));
    }
    if n < dof + 2 {
        warnings.push(format!(
            "n={n} is small relative to dof={dof}; the chi-squared approximation may be poor"
        ));
    }

    let mut tx = PhaseTable::new(spec.shape);
    let mut ty = PhaseTable::new(spec.shape);
    let mut f = vec![0.0; dof];
    let mut mean = DVector::<f64>::zeros(dof);
    for j in 0..n {
        difference_features(&layout, &mut tx, &mut ty, x.row(j), y.row(j), &mut f);
        for (m, v) in mean.iter_mut().zip(&f) {
            *m += v;
        }
    }
    mean /= n as f64;

    let mut cov = DMatrix::<f64>::zeros(dof, dof);
    let mut c = DVector::<f64>::zeros(dof);
    for j in 0..n {
        difference_features(&layout, &mut tx, &mut ty, x.row(j), y.row(j), &mut f);
        for k in 0..dof {
            c[k] = f[k] - mean[k];
        }
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov /= n as f64;
    cov.fill_upper_triangle_with_lower_triangle();

    let base = TwoSampleStatistic {
        statistic: 0.0,
        dof,
        n,
        zn: spec.zn(),
        order: spec.order,
        ridge,
        warnings,
    };
    if mean.iter().all(|&m| m == 0.0) {
        return Ok(base);
    }
    let trace = cov.trace();
    // Below this the covariance is rounding noise around a constant feature.
    let max_scale = layout.scales.iter().cloned().fold(0.0, f64::max);
    let noise_floor = dof as f64 * (64.0 * f64::EPSILON * 2.0 * max_scale).powi(2);
    let mut reg = cov.clone();
    for k in 0..dof {
        reg[(k, k)] += ridge * trace / dof as f64;
    }
    let chol = match reg.clone().cholesky() {
        Some(ch) if trace > noise_floor => ch,
        _ => {
            let eig = reg.symmetric_eigenvalues();
            let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            let condition = if min > 0.0 { max / min } else { f64::INFINITY };
            return Err(Error::SingularCovariance { condition });
        }
    };
    let solved = chol.solve(&mean);
    let t = n as f64 * mean.dot(&solved);
    Ok(TwoSampleStatistic {
        statistic: t.max(0.0),
        ..base
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zn: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Reject `p = q` when the chi-squared upper tail of `t` falls below `alpha`.
pub fn null_test(t: f64, dof: usize, alpha: f64) -> Result<TestReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let p_value = chi_squared_sf(t, dof)?;
    Ok(TestReport {
        statistic: t,
        dof,
        p_value,
        alpha,
        reject: p_value < alpha,
        zn: None,
        order: None,
        n: None,
        ridge: None,
        warnings: Vec::new(),
    })
}

/// [`two_sample_statistic`] followed by [`null_test`].
pub fn two_sample_test(
    x: &Samples,
    y: &Samples,
    spec: &LatticeSpec,
    ridge: f64,
    alpha: f64,
) -> Result<TestReport> {
    let stat = two_sample_statistic(x, y, spec, ridge)?;
    let mut report = null_test(stat.statistic, stat.dof, alpha)?;
    report.zn = Some(stat.zn);
    report.order = Some(stat.order);
    report.n = Some(stat.n);
    report.ridge = Some(stat.ridge);
    report.warnings = stat.warnings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spec(zn: i64, s: f64) -> LatticeSpec {
        LatticeSpec::new(1, zn, s).unwrap()
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        let x = Samples::from_column(vec![0.7; 10]);
        let v = asymptotic_variance(&x, &x, &spec(3, 0.0)).unwrap();
        assert_eq!(v.sigma_hat, 0.0);
        assert!(v.degenerate);
    }

    #[test]
    fn ci_examples() {
        let ci = confidence_interval(1.0, 1.0, 100, 0.05).unwrap();
        assert!((ci.upper - 1.0 - 0.195_996_398).abs() < 1e-8);
        assert!((1.0 - ci.lower - 0.195_996_398).abs() < 1e-8);
        let flat = confidence_interval(2.0, 0.0, 10, 0.05).unwrap();
        assert_eq!((flat.lower, flat.upper), (2.0, 2.0));
        let narrow = confidence_interval(2.0, 1.0, 10, 1.0 - 1e-12).unwrap();
        assert!(narrow.upper - narrow.lower < 1e-10);
        assert!(confidence_interval(1.0, 1.0, 10, 0.0).is_err());
        assert!(confidence_interval(1.0, 1.0, 10, 1.0).is_err());
    }

    #[test]
    fn identical_pairs_give_zero_statistic() {
        let x = Samples::from_column(vec![0.1, -0.5, 2.0, 1.1, -3.0]);
        let t = two_sample_statistic(&x, &x, &spec(2, 0.0), DEFAULT_RIDGE).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 4);
        let r = null_test(t.statistic, t.dof, 0.05).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject);
    }

    #[test]
    fn constant_but_different_samples_are_singular() {
        let x = Samples::from_column(vec![0.0; 8]);
        let y = Samples::from_column(vec![1.0; 8]);
        let err = two_sample_statistic(&x, &y, &spec(2, 0.0), DEFAULT_RIDGE).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { .. }));
    }

    #[test]
    fn null_test_examples() {
        let r = null_test(2.0, 2, 0.05).unwrap();
        assert!((r.p_value - (-1f64).exp()).abs() < 1e-14);
        assert!(!r.reject);
        let r = null_test(1e4, 2, 0.05).unwrap();
        assert!(r.p_value < 1e-100 && r.reject);
    }

    #[test]
    fn unequal_sizes_are_truncated_with_warning() {
        let x = Samples::from_column((0..30).map(|i| (i as f64 * 0.37).sin() * 3.0).collect());
        let y = Samples::from_column((0..20).map(|i| (i as f64 * 0.91).cos() * 3.0).collect());
        let t = two_sample_statistic(&x, &y, &spec(1, 0.0), DEFAULT_RIDGE).unwrap();
        assert_eq!(t.n, 20);
        assert!(t.warnings.iter().any(|w| w.contains("unequal")));
    }

    /// Recompute `T` from the difference features' mean and covariance.
    /// Returns NaN when the covariance is too ill-conditioned to compare.
    fn statistic_from_moments(x: &[f64], y: &[f64], zn: i64) -> f64 {
        let n = x.len();
        let feats: Vec<Vec<f64>> = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| {
                let mut re = Vec::new();
                let mut im = Vec::new();
                for z in 1..=zn {
                    let z = z as f64;
                    re.push((z * a).cos() - (z * b).cos());
                    im.push(-(z * a).sin() + (z * b).sin());
                }
                re.extend(im);
                re
            })
            .collect();
        let d = feats[0].len();
        let mean: Vec<f64> = (0..d)
            .map(|k| feats.iter().map(|f| f[k]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for f in &feats {
            for a in 0..d {
                for b in 0..d {
                    cov[(a, b)] += (f[a] - mean[a]) * (f[b] - mean[b]) / n as f64;
                }
            }
        }
        let eig = cov.clone().symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0f64), |(a, b), &e| (a.min(e), b.max(e)));
        if !(lo > hi * 1e-6) {
            return f64::NAN;
        }
        let tr = cov.trace();
        for k in 0..d {
            cov[(k, k)] += DEFAULT_RIDGE * tr / d as f64;
        }
        let m = DVector::from_vec(mean);
        match cov.lu().solve(&m) {
            Some(sol) => n as f64 * m.dot(&sol),
            None => f64::NAN,
        }
    }

    proptest! {
        #[test]
        fn statistic_is_a_function_of_difference_moments(
            pairs in proptest::collection::vec((-PI..PI, -PI..PI), 12..40),
            zn in 1i64..4,
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let t = two_sample_statistic(
                &Samples::from_column(xs.clone()),
                &Samples::from_column(ys.clone()),
                &spec(zn, 0.0),
                DEFAULT_RIDGE,
            );
            prop_assume!(t.is_ok());
            let t = t.unwrap();
            prop_assert!(t.statistic >= 0.0);
            let reference = statistic_from_moments(&xs, &ys, zn);
            prop_assume!(reference.is_finite());
            prop_assert!((t.statistic - reference).abs() <= 1e-6 * (1.0 + reference.abs()), "{} vs {}", t.statistic, reference);
        }

        #[test]
        fn sigma_is_non_negative(xs in proptest::collection::vec(-PI..PI, 2..30), ys in proptest::collection::vec(-PI..PI, 2..30)) {
            let v = asymptotic_variance(&Samples::from_column(xs), &Samples::from_column(ys), &spec(3, 1.0)).unwrap();
            prop_assert!(v.sigma_hat >= 0.0);
        }
    }
}
