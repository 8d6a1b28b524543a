//! Plug-in estimators for Sobolev inner products, squared norms and squared
//! distances, plus selection of the truncation radius.
//!
//! Everything here estimates the truncated target
//! `S_n = sum_{||z||_inf <= zn} z^{2s} p~(z) conj(q~(z))` without bias; the
//! distance to the untruncated quantity is the truncation bias, which is
//! governed by the smoothness of the densities and by `zn`.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accum::CoeffAccumulator;
use crate::error::{Error, Result};
use crate::inference::CIReport;
use crate::lattice::{LatticeShape, LatticeSpec};
use crate::numeric::Compensated;
use crate::rescale::RescaleMap;
use crate::samples::Samples;

/// How to pick the truncation radius `zn` from the sample size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ZnRule {
    /// Use this radius as is.
    Manual { zn: usize },
    /// Rate-optimal for densities in `H^{s'}`: `c * n^{2 / (4 s' + D)}`.
    Optimal { s_prime: f64, c: f64 },
    /// Computational budget `O(n^{1 + theta})`: `n^{theta / D}`.
    Budget { theta: f64 },
    /// `min(n^{theta / D}, n^{1 / (4 s + D)})`, the budget rule capped by the
    /// rate that is optimal whenever `s' >= 2 s + D / 4`. Keeps high-order
    /// estimates from drowning in the `zn^{4s + D} / n^2` variance term.
    Auto { theta: f64 },
}

impl Default for ZnRule {
    fn default() -> Self {
        ZnRule::Auto { theta: 0.5 }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1], got {theta}"
        )));
    }
    Ok(())
}

/// Truncation radius for `n` samples of order `s` in dimension `dim`.
pub fn choose_zn(n: usize, s: f64, dim: usize, rule: &ZnRule) -> Result<usize> {
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if dim == 0 {
        return Err(Error::InvalidSpec("dimension must be at least 1".into()));
    }
    let nf = n as f64;
    let d = dim as f64;
    let radius = |x: f64| (x.round() as usize).max(1);
    match *rule {
        ZnRule::Manual { zn } => Ok(zn),
        ZnRule::Optimal { s_prime, c } => {
            if !(s_prime > s) {
                return Err(Error::InvalidParameter(format!(
                    "smoothness s'={s_prime} must exceed the order s={s}"
                )));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "scale constant must be positive, got {c}"
                )));
            }
            Ok(radius(c * nf.powf(2.0 / (4.0 * s_prime + d))))
        }
        ZnRule::Budget { theta } => {
            check_theta(theta)?;
            Ok(radius(nf.powf(theta / d)))
        }
        ZnRule::Auto { theta } => {
            check_theta(theta)?;
            let budget = nf.powf(theta / d);
            let rate = nf.powf(1.0 / (4.0 * s + d));
            Ok(radius(budget.min(rate)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    InnerProduct,
    SquaredNorm,
    SquaredDistance,
}

/// The three inner products a distance estimate is assembled from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceComponents {
    pub norm_p: f64,
    pub norm_q: f64,
    pub cross: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub quantity: Quantity,
    pub order: f64,
    pub zn: usize,
    pub dim: usize,
    /// Raw estimate; squared norms and distances may dip below zero.
    pub value: f64,
    /// `max(value, 0)`, only reported for squared distances.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_clamped: Option<f64>,
    /// Largest magnitude of an imaginary part discarded along the way.
    pub imag_residual: f64,
    /// Sample count of each input set.
    pub n: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<DistanceComponents>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescale: Option<RescaleMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<CIReport>,
}

impl EstimateReport {
    pub fn with_rescale(mut self, map: RescaleMap) -> Self {
        self.rescale = Some(map);
        self
    }

    pub fn with_ci(mut self, ci: CIReport) -> Self {
        self.ci = Some(ci);
        self
    }
}

/// `sum_z w(z) a(z) conj(b(z))` over the full lattice, compensated.
pub(crate) fn weighted_inner(a: &[Complex64], b: &[Complex64], weights: &[f64]) -> Complex64 {
    let mut re = Compensated::default();
    let mut im = Compensated::default();
    for ((x, y), &w) in a.iter().zip(b).zip(weights) {
        if w == 0.0 {
            continue;
        }
        let t = x * y.conj() * w;
        re.add(t.re);
        im.add(t.im);
    }
    Complex64::new(re.value(), im.value())
}

fn check_same_shape(a: &CoeffAccumulator, b: &CoeffAccumulator) -> Result<LatticeShape> {
    if a.shape() != b.shape() {
        return Err(Error::SpecMismatch {
            left_dim: a.shape().dim,
            left_zn: a.shape().zn,
            right_dim: b.shape().dim,
            right_zn: b.shape().zn,
        });
    }
    Ok(a.shape())
}

/// Estimate `<p, q>_{H^s}` from accumulators built on independent samples.
pub fn estimate_inner_product(
    acc_p: &CoeffAccumulator,
    acc_q: &CoeffAccumulator,
    s: f64,
) -> Result<EstimateReport> {
    let shape = check_same_shape(acc_p, acc_q)?;
    let spec = LatticeSpec::new(shape.dim, shape.zn as i64, s)?;
    let p = acc_p.coefficients()?;
    let q = acc_q.coefficients()?;
    let total = weighted_inner(&p, &q, &spec.weights());
    Ok(EstimateReport {
        quantity: Quantity::InnerProduct,
        order: s,
        zn: shape.zn,
        dim: shape.dim,
        value: total.re,
        value_clamped: None,
        imag_residual: total.im.abs(),
        n: vec![acc_p.n() as usize, acc_q.n() as usize],
        split_seed: None,
        components: None,
        rescale: None,
        ci: None,
    })
}

/// How a single sample is divided into two independent halves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Seeded uniform shuffle, then first half / second half.
    Shuffle { seed: u64 },
    /// First half / second half in input order.
    Contiguous,
}

impl SplitPolicy {
    pub fn seed(&self) -> Option<u64> {
        match self {
            SplitPolicy::Shuffle { seed } => Some(*seed),
            SplitPolicy::Contiguous => None,
        }
    }
}

/// Split `samples` into halves of sizes `floor(n/2)` and `ceil(n/2)`.
pub fn split_halves(samples: &Samples, split: SplitPolicy) -> Result<(Samples, Samples)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let SplitPolicy::Shuffle { seed } = split {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (a, b) = order.split_at(n / 2);
    Ok((samples.select(a), samples.select(b)))
}

/// Estimate `||p||^2_{H^s}` by the inner product of two independent halves.
pub fn estimate_squared_norm(
    samples: &Samples,
    spec: &LatticeSpec,
    split: SplitPolicy,
) -> Result<EstimateReport> {
    let (a, b) = split_halves(samples, split)?;
    let acc_a = CoeffAccumulator::from_samples(spec.shape, &a)?;
    let acc_b = CoeffAccumulator::from_samples(spec.shape, &b)?;
    let mut report = estimate_inner_product(&acc_a, &acc_b, spec.order)?;
    report.quantity = Quantity::SquaredNorm;
    report.n = vec![samples.len()];
    report.split_seed = split.seed();
    Ok(report)
}

/// Accumulators for both halves of one sample set; the full-set accumulator
/// is their merge.
struct SplitAccumulators {
    a: CoeffAccumulator,
    b: CoeffAccumulator,
    full: CoeffAccumulator,
}

impl SplitAccumulators {
    fn build(samples: &Samples, shape: LatticeShape, split: SplitPolicy) -> Result<Self> {
        let (a, b) = split_halves(samples, split)?;
        let a = CoeffAccumulator::from_samples(shape, &a)?;
        let b = CoeffAccumulator::from_samples(shape, &b)?;
        let full = CoeffAccumulator::merged(&a, &b)?;
        Ok(SplitAccumulators { a, b, full })
    }
}

/// Estimate `||p - q||^2_{H^s} = ||p||^2 - 2 <p, q> + ||q||^2`.
///
/// Norms use split halves of each set, the cross term uses both full sets,
/// so the three terms are not independent. Both sets are split with the same
/// policy.
pub fn estimate_squared_distance(
    samples_p: &Samples,
    samples_q: &Samples,
    spec: &LatticeSpec,
    split: SplitPolicy,
) -> Result<EstimateReport> {
    if samples_p.dim() != samples_q.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples_p.dim(),
            got: samples_q.dim(),
        });
    }
    let p = SplitAccumulators::build(samples_p, spec.shape, split)?;
    let q = SplitAccumulators::build(samples_q, spec.shape, split)?;
    let s = spec.order;
    let norm_p = estimate_inner_product(&p.a, &p.b, s)?;
    let norm_q = estimate_inner_product(&q.a, &q.b, s)?;
    let cross = estimate_inner_product(&p.full, &q.full, s)?;
    let value = norm_p.value - 2.0 * cross.value + norm_q.value;
    Ok(EstimateReport {
        quantity: Quantity::SquaredDistance,
        order: s,
        zn: spec.zn(),
        dim: spec.dim(),
        value,
        value_clamped: Some(value.max(0.0)),
        imag_residual: norm_p
            .imag_residual
            .max(norm_q.imag_residual)
            .max(cross.imag_residual),
        n: vec![samples_p.len(), samples_q.len()],
        split_seed: split.seed(),
        components: Some(DistanceComponents {
            norm_p: norm_p.value,
            norm_q: norm_q.value,
            cross: cross.value,
        }),
        rescale: None,
        ci: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn shape(zn: usize) -> LatticeShape {
        LatticeShape::new(1, zn).unwrap()
    }

    #[test]
    fn choose_zn_examples() {
        let opt = ZnRule::Optimal {
            s_prime: 1.0,
            c: 1.0,
        };
        assert_eq!(choose_zn(10_000, 0.0, 1, &opt).unwrap(), 40);
        assert_eq!(
            choose_zn(10_000, 0.0, 2, &ZnRule::Budget { theta: 0.5 }).unwrap(),
            10
        );
        let opt3 = ZnRule::Optimal {
            s_prime: 3.0,
            c: 1.0,
        };
        assert_eq!(choose_zn(10, 1.0, 1, &opt3).unwrap(), 1);
        assert_eq!(choose_zn(10, 1.0, 1, &ZnRule::Manual { zn: 7 }).unwrap(), 7);
    }

    #[test]
    fn choose_zn_auto_caps_high_orders() {
        let auto = ZnRule::Auto { theta: 0.5 };
        assert_eq!(choose_zn(100_000, 0.0, 1, &auto).unwrap(), 316);
        assert_eq!(choose_zn(100_000, 1.0, 1, &auto).unwrap(), 10);
    }

    #[test]
    fn choose_zn_rejects_bad_parameters() {
        assert!(matches!(
            choose_zn(100, 0.0, 1, &ZnRule::Budget { theta: 0.0 }),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            choose_zn(
                100,
                1.0,
                1,
                &ZnRule::Optimal {
                    s_prime: 1.0,
                    c: 1.0
                }
            ),
            Err(Error::InvalidParameter(_))
        ));
        assert!(choose_zn(1, 0.0, 1, &ZnRule::default()).is_err());
    }

    #[test]
    fn inner_product_of_origin_points() {
        let a = CoeffAccumulator::from_samples(shape(1), &Samples::from_column(vec![0.0])).unwrap();
        assert_eq!(estimate_inner_product(&a, &a, 0.0).unwrap().value, 3.0);
        assert_eq!(estimate_inner_product(&a, &a, 1.0).unwrap().value, 2.0);
        let other = CoeffAccumulator::new(shape(2));
        assert!(matches!(
            estimate_inner_product(&a, &other, 0.0),
            Err(Error::SpecMismatch { .. })
        ));
    }

    #[test]
    fn norm_of_two_origin_points() {
        let spec = LatticeSpec::new(1, 1, 0.0).unwrap();
        let r = estimate_squared_norm(
            &Samples::from_column(vec![0.0, 0.0]),
            &spec,
            SplitPolicy::Shuffle { seed: 1 },
        )
        .unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.split_seed, Some(1));
        assert!(estimate_squared_norm(
            &Samples::from_column(vec![0.0]),
            &spec,
            SplitPolicy::Contiguous
        )
        .is_err());
    }

    #[test]
    fn identical_sets_give_symmetric_distance() {
        let spec = LatticeSpec::new(1, 4, 0.0).unwrap();
        let xs: Vec<f64> = (0..50)
            .map(|i| ((i * 37) % 50) as f64 / 50.0 * 6.0 - 3.0)
            .collect();
        let data = Samples::from_column(xs);
        let r = estimate_squared_distance(&data, &data, &spec, SplitPolicy::Shuffle { seed: 5 })
            .unwrap();
        let c = r.components.clone().unwrap();
        assert_eq!(c.norm_p, c.norm_q);
        assert!((r.value - 2.0 * (c.norm_p - c.cross)).abs() < 1e-12);
        assert_eq!(r.value_clamped, Some(r.value.max(0.0)));
    }

    proptest! {
        #[test]
        fn estimates_are_real_on_full_lattice(
            xs in proptest::collection::vec(-PI..PI, 2..30),
            ys in proptest::collection::vec(-PI..PI, 2..30),
            zn in 1usize..8,
            s in prop_oneof![Just(0.0), Just(0.5), Just(1.0), Just(2.0)],
        ) {
            let spec = LatticeSpec::new(1, zn as i64, s).unwrap();
            let r = estimate_squared_distance(
                &Samples::from_column(xs),
                &Samples::from_column(ys),
                &spec,
                SplitPolicy::Shuffle { seed: 9 },
            ).unwrap();
            prop_assert!(r.imag_residual <= 1e-9 * (1.0 + r.value.abs()));
        }

        #[test]
        fn inner_product_ignores_row_order(xs in proptest::collection::vec(-PI..PI, 1..30), zn in 1usize..10) {
            let s = shape(zn);
            let a = CoeffAccumulator::from_samples(s, &Samples::from_column(xs.clone())).unwrap();
            let mut rev = xs.clone();
            rev.reverse();
            let b = CoeffAccumulator::from_samples(s, &Samples::from_column(rev)).unwrap();
            let q = CoeffAccumulator::from_samples(s, &Samples::from_column(vec![0.3, -1.0])).unwrap();
            let va = estimate_inner_product(&a, &q, 1.0).unwrap().value;
            let vb = estimate_inner_product(&b, &q, 1.0).unwrap().value;
            prop_assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
        }
    }
}
