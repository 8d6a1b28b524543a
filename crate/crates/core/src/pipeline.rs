//! End-to-end estimation and testing on raw samples: rescale, choose `zn`,
//! estimate, attach an interval.
//!
//! Mapped data is always reduced modulo `2 pi`, so results refer to the
//! periodic summation of the mapped densities. When the data already lies
//! in the box this changes nothing.

use serde::{Deserialize, Serialize};

use crate::accum::CoeffAccumulator;
use crate::error::{Error, Result};
use crate::estimators::{
    choose_zn, estimate_inner_product, estimate_squared_distance, estimate_squared_norm,
    split_halves, EstimateReport, Quantity, SplitPolicy, ZnRule,
};
use crate::inference::{
    asymptotic_variance, confidence_interval, distance_asymptotic_variance, two_sample_test,
    TestReport, DEFAULT_RIDGE,
};
use crate::lattice::LatticeSpec;
use crate::rescale::{fit_rescale, RescaleMap, RescaleMode};
use crate::samples::Samples;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRequest {
    pub quantity: Quantity,
    pub order: f64,
    pub zn_rule: ZnRule,
    pub rescale: RescaleMode,
    /// Coverage level of the interval, e.g. `0.95`; `None` for no interval.
    pub ci_level: Option<f64>,
    /// Seeds the half split of norm and distance estimates.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestRequest {
    pub order: f64,
    pub zn_rule: ZnRule,
    pub rescale: RescaleMode,
    pub alpha: f64,
    pub ridge: f64,
}

impl TestRequest {
    pub fn new(order: f64, zn_rule: ZnRule, alpha: f64) -> Self {
        TestRequest {
            order,
            zn_rule,
            rescale: RescaleMode::Identity,
            alpha,
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// Fit one map on the pooled samples and apply it (periodically) to each set.
pub fn rescale_inputs(
    mode: &RescaleMode,
    x: &Samples,
    y: Option<&Samples>,
) -> Result<(RescaleMap, Samples, Option<Samples>)> {
    let pooled = match y {
        Some(y) => x.concat(y)?,
        None => x.clone(),
    };
    let map = fit_rescale(&pooled, mode)?.wrapping();
    let mx = map.apply(x)?;
    let my = y.map(|y| map.apply(y)).transpose()?;
    Ok((map, mx, my))
}

/// Estimate on samples that are already in the box.
pub fn estimate_mapped(
    quantity: Quantity,
    spec: &LatticeSpec,
    x: &Samples,
    y: Option<&Samples>,
    ci_level: Option<f64>,
    seed: u64,
) -> Result<EstimateReport> {
    let split = SplitPolicy::Shuffle { seed };
    let need_y = || {
        y.ok_or_else(|| Error::InvalidParameter(format!("{quantity:?} needs a second sample set")))
    };
    let mut report = match quantity {
        Quantity::SquaredNorm => estimate_squared_norm(x, spec, split)?,
        Quantity::InnerProduct => {
            let ax = CoeffAccumulator::from_samples(spec.shape, x)?;
            let ay = CoeffAccumulator::from_samples(spec.shape, need_y()?)?;
            estimate_inner_product(&ax, &ay, spec.order)?
        }
        Quantity::SquaredDistance => estimate_squared_distance(x, need_y()?, spec, split)?,
    };
    if let Some(level) = ci_level {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence level must lie in (0, 1), got {level}"
            )));
        }
        let var = match quantity {
            Quantity::SquaredNorm => {
                let (a, b) = split_halves(x, split)?;
                asymptotic_variance(&a, &b, spec)?
            }
            Quantity::InnerProduct => asymptotic_variance(x, need_y()?, spec)?,
            Quantity::SquaredDistance => distance_asymptotic_variance(x, need_y()?, spec)?,
        };
        let ci = confidence_interval(report.value, var.sigma_hat, var.n_ref, 1.0 - level)?;
        report = report.with_ci(ci);
    }
    Ok(report)
}

/// Sample size `zn` is chosen for: the smaller set for two-sample
/// quantities.
fn effective_n(quantity: Quantity, x: &Samples, y: Option<&Samples>) -> usize {
    match (quantity, y) {
        (Quantity::SquaredNorm, _) => x.len(),
        (_, Some(y)) => x.len().min(y.len()),
        (_, None) => x.len(),
    }
}

pub fn run_estimate(
    req: &EstimateRequest,
    x: &Samples,
    y: Option<&Samples>,
) -> Result<EstimateReport> {
    if req.quantity != Quantity::SquaredNorm && y.is_none() {
        return Err(Error::InvalidParameter(format!(
            "{:?} needs two sample sets",
            req.quantity
        )));
    }
    let (map, mx, my) = rescale_inputs(&req.rescale, x, y)?;
    let n = effective_n(req.quantity, x, y);
    let zn = choose_zn(n, req.order, x.dim(), &req.zn_rule)?;
    let spec = LatticeSpec::new(x.dim(), zn as i64, req.order)?;
    Ok(estimate_mapped(
        req.quantity,
        &spec,
        &mx,
        my.as_ref(),
        req.ci_level,
        req.seed,
    )?
    .with_rescale(map))
}

/// Two-sample test with its provenance attached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    #[serde(flatten)]
    pub report: TestReport,
    pub rescale: RescaleMap,
}

pub fn run_test(req: &TestRequest, x: &Samples, y: &Samples) -> Result<TestOutcome> {
    let (map, mx, my) = rescale_inputs(&req.rescale, x, Some(y))?;
    let n = x.len().min(y.len());
    let zn = choose_zn(n, req.order, x.dim(), &req.zn_rule)?;
    let spec = LatticeSpec::new(x.dim(), zn as i64, req.order)?;
    let report = two_sample_test(
        &mx,
        my.as_ref().expect("second set"),
        &spec,
        req.ridge,
        req.alpha,
    )?;
    Ok(TestOutcome {
        report,
        rescale: map,
    })
}
