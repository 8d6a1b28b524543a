//! Monte Carlo experiments on synthetic densities with known answers.
//!
//! Every `(n, trial)` cell draws from its own ChaCha stream keyed by
//! `(seed, experiment, n, trial)`, so tables are byte-identical however the
//! trials are scheduled.

pub mod stats;

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{choose_zn, Quantity, ZnRule};
use crate::inference::{chi_squared_cdf, null_test, two_sample_statistic, DEFAULT_RIDGE};
use crate::lattice::LatticeSpec;
use crate::oracles::{
    closed_form_distance, closed_form_quantity, periodized_distance, periodized_quantity,
    NamedDensity,
};
use crate::pipeline::estimate_mapped;
use crate::rescale::{RescaleKind, RescaleMap};

pub const DEFAULT_GRID: [usize; 5] = [10, 100, 1_000, 10_000, 100_000];
pub const DEFAULT_TRIALS: usize = 20;

/// Half-width, in standard deviations, of the declared box around Gaussian
/// experiments that are mapped into `[-pi, pi]^D`. Keeps the mass outside
/// below `1e-6` in three dimensions.
pub const BOX_SDS: f64 = 5.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Gauss1dMean,
    Gauss1dVar,
    UnifShift,
    UnifTri,
    Gauss3dMean,
    Gauss3dVar,
    NormH0,
    NormH1,
    NullCalibration,
    PowerCurve,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Gauss1dMean,
        Experiment::Gauss1dVar,
        Experiment::UnifShift,
        Experiment::UnifTri,
        Experiment::Gauss3dMean,
        Experiment::Gauss3dVar,
        Experiment::NormH0,
        Experiment::NormH1,
        Experiment::NullCalibration,
        Experiment::PowerCurve,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::Gauss1dMean => "gauss1d_mean",
            Experiment::Gauss1dVar => "gauss1d_var",
            Experiment::UnifShift => "unif_shift",
            Experiment::UnifTri => "unif_tri",
            Experiment::Gauss3dMean => "gauss3d_mean",
            Experiment::Gauss3dVar => "gauss3d_var",
            Experiment::NormH0 => "norm_h0",
            Experiment::NormH1 => "norm_h1",
            Experiment::NullCalibration => "null_calibration",
            Experiment::PowerCurve => "power_curve",
        }
    }

    fn index(&self) -> u64 {
        Experiment::ALL.iter().position(|e| e == self).unwrap() as u64
    }

    pub fn is_test(&self) -> bool {
        matches!(self, Experiment::NullCalibration | Experiment::PowerCurve)
    }

    pub fn default_order(&self) -> f64 {
        match self {
            Experiment::NormH1 => 1.0,
            _ => 0.0,
        }
    }

    /// The two-sample experiments use a small fixed radius so the
    /// chi-squared limit has few degrees of freedom.
    pub fn default_zn_rule(&self) -> ZnRule {
        if self.is_test() {
            ZnRule::Manual { zn: 3 }
        } else {
            ZnRule::default()
        }
    }

    pub fn quantity(&self) -> Quantity {
        match self {
            Experiment::NormH0 | Experiment::NormH1 => Quantity::SquaredNorm,
            _ => Quantity::SquaredDistance,
        }
    }

    /// Raw densities `(p, q)`; `q` is absent for norms.
    pub fn densities(&self) -> (NamedDensity, Option<NamedDensity>) {
        let g = |m: f64, s: f64| NamedDensity::gaussian(m, s).expect("valid");
        let g3 = |m: f64, s: f64| NamedDensity::isotropic_gaussian(&[m; 3], s).expect("valid");
        let (p, q) = match self {
            Experiment::Gauss1dMean | Experiment::PowerCurve => (g(0.0, 1.0), Some(g(1.0, 1.0))),
            Experiment::Gauss1dVar => (g(0.0, 1.0), Some(g(0.0, 2.0))),
            Experiment::UnifShift => (
                NamedDensity::uniform(0.0, 1.0).unwrap(),
                Some(NamedDensity::uniform(0.5, 1.5).unwrap()),
            ),
            Experiment::UnifTri => (
                NamedDensity::uniform(0.0, 1.0).unwrap(),
                Some(NamedDensity::triangular(0.0, 0.5, 1.0).unwrap()),
            ),
            Experiment::Gauss3dMean => (g3(0.0, 1.0), Some(g3(1.0, 1.0))),
            Experiment::Gauss3dVar => (g3(0.0, 1.0), Some(g3(0.0, 2.0))),
            Experiment::NormH0 | Experiment::NormH1 => (g(0.0, 1.0), None),
            Experiment::NullCalibration => (g(0.0, 1.0), Some(g(0.0, 1.0))),
        };
        (p, q)
    }

    /// Map from raw samples into the box. Unit-variance 1D Gaussians and
    /// the uniform/triangular experiments are used as drawn; the others are
    /// shrunk by a declared symmetric box.
    pub fn rescale(&self) -> RescaleMap {
        let (p, q) = self.densities();
        let dim = p.dim();
        match self {
            Experiment::Gauss1dVar | Experiment::Gauss3dMean | Experiment::Gauss3dVar => {
                let reach = |d: &NamedDensity| {
                    d.factors
                        .iter()
                        .map(|f| match *f {
                            crate::oracles::Factor::Gaussian { mean, sd } => {
                                mean.abs() + BOX_SDS * sd
                            }
                            _ => unreachable!("gaussian experiments"),
                        })
                        .fold(0.0, f64::max)
                };
                let half = reach(&p).max(q.as_ref().map(reach).unwrap_or(0.0));
                RescaleMap {
                    mode: RescaleKind::FixedBox,
                    scale: vec![PI / half; dim],
                    offset: vec![0.0; dim],
                    periodic: true,
                    seed: None,
                }
            }
            _ => RescaleMap::identity(dim).wrapping(),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .iter()
            .find(|e| e.tag() == s)
            .copied()
            .ok_or_else(|| {
                let roster: Vec<&str> = Experiment::ALL.iter().map(|e| e.tag()).collect();
                Error::InvalidParameter(format!(
                    "unknown experiment '{s}'; expected one of {}",
                    roster.join(", ")
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub experiment: Experiment,
    pub grid: Vec<usize>,
    pub trials: usize,
    /// Defaults to the experiment's own order.
    pub order: Option<f64>,
    /// Defaults to the experiment's own rule.
    pub zn_rule: Option<ZnRule>,
    pub seed: u64,
    pub ci_level: f64,
    pub alpha: f64,
}

impl BenchConfig {
    pub fn new(experiment: Experiment) -> Self {
        BenchConfig {
            experiment,
            grid: DEFAULT_GRID.to_vec(),
            trials: DEFAULT_TRIALS,
            order: None,
            zn_rule: None,
            seed: 0,
            ci_level: 0.95,
            alpha: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "grid must be non-empty and strictly increasing, got {:?}",
                self.grid
            )));
        }
        if self.grid[0] < 4 {
            return Err(Error::InvalidParameter(
                "every grid size must be at least 4".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) || !(self.alpha > 0.0 && self.alpha < 1.0)
        {
            return Err(Error::InvalidParameter(
                "ci level and alpha must lie in (0, 1)".into(),
            ));
        }
        if let Some(s) = self.order {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "order must be >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn order(&self) -> f64 {
        self.order
            .unwrap_or_else(|| self.experiment.default_order())
    }

    pub fn zn_rule(&self) -> ZnRule {
        self.zn_rule
            .unwrap_or_else(|| self.experiment.default_zn_rule())
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub trial: usize,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub truth: f64,
    pub abs_err: f64,
}

#[derive(Clone, Debug)]
struct TrialResult {
    row: TrialRow,
    /// `(chi2_cdf(T, dof), reject)` for the two-sample experiments.
    test: Option<(f64, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    /// `chi2_cdf(T, dof)` for every trial, in trial order.
    pub cdf_values: Vec<f64>,
    pub ks_distance: f64,
    pub ks_p_value: f64,
    pub type_one_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub n: usize,
    pub zn: usize,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub mse: f64,
    pub ci_coverage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null: Option<NullCalibration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub experiment: Experiment,
    pub quantity: Quantity,
    pub order: f64,
    pub zn_rule: ZnRule,
    pub trials: usize,
    pub ci_level: f64,
    pub alpha: f64,
    pub p: NamedDensity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<NamedDensity>,
    pub rescale: RescaleMap,
    /// Value for the periodic summations of the mapped densities; the
    /// `truth` column.
    pub truth: f64,
    /// Same quantity without periodization, where a closed form exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_closed_form: Option<f64>,
    pub points: Vec<PointSummary>,
    /// Log-log slope of MSE against `n` over the grid sizes `>= 1000`
    /// (all sizes when fewer than two qualify).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOutput {
    pub rows: Vec<TrialRow>,
    pub summary: BenchSummary,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for one `(experiment, n, trial)` cell.
pub fn trial_rng(seed: u64, experiment: Experiment, n: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix(
        splitmix(splitmix(experiment.index()) ^ n as u64) ^ trial as u64,
    ));
    rng
}

/// Truth for the mapped densities: periodized and, when available, closed form.
fn truths(cfg: &BenchConfig) -> Result<(f64, Option<f64>)> {
    let (p, q) = cfg.experiment.densities();
    let map = cfg.experiment.rescale();
    let p = p.mapped(&map)?;
    let s = cfg.order();
    match q {
        None => Ok((
            periodized_quantity(&p, &p, s)?,
            closed_form_quantity(&p, &p, s).ok(),
        )),
        Some(q) => {
            let q = q.mapped(&map)?;
            Ok((
                periodized_distance(&p, &q, s)?,
                closed_form_distance(&p, &q, s).ok(),
            ))
        }
    }
}

fn run_trial(
    cfg: &BenchConfig,
    spec: &LatticeSpec,
    n: usize,
    trial: usize,
    truth: f64,
) -> Result<TrialResult> {
    let exp = cfg.experiment;
    let mut rng = trial_rng(cfg.seed, exp, n, trial);
    let (p, q) = exp.densities();
    let map = exp.rescale();
    let x = map.apply(&p.sample(n, &mut rng))?;
    let y = match &q {
        Some(q) => Some(map.apply(&q.sample(n, &mut rng))?),
        None => None,
    };
    let split_seed = rng.next_u64();
    let est = estimate_mapped(
        exp.quantity(),
        spec,
        &x,
        y.as_ref(),
        Some(cfg.ci_level),
        split_seed,
    )?;
    let ci = est.ci.as_ref().expect("interval requested");
    let test = if exp.is_test() {
        let t = two_sample_statistic(&x, y.as_ref().expect("two-sample"), spec, DEFAULT_RIDGE)?;
        let r = null_test(t.statistic, t.dof, cfg.alpha)?;
        Some((chi_squared_cdf(t.statistic, t.dof)?, r.reject))
    } else {
        None
    };
    Ok(TrialResult {
        row: TrialRow {
            n,
            trial,
            estimate: est.value,
            ci_lo: ci.lower,
            ci_hi: ci.upper,
            truth,
            abs_err: (est.value - truth).abs(),
        },
        test,
    })
}

fn summarize_point(n: usize, zn: usize, results: &[TrialResult], alpha: f64) -> PointSummary {
    let est: Vec<f64> = results.iter().map(|r| r.row.estimate).collect();
    let k = results.len() as f64;
    let covered = results
        .iter()
        .filter(|r| r.row.ci_lo <= r.row.truth && r.row.truth <= r.row.ci_hi)
        .count();
    let tests: Vec<(f64, bool)> = results.iter().filter_map(|r| r.test).collect();
    let rejection_rate =
        (!tests.is_empty()).then(|| tests.iter().filter(|t| t.1).count() as f64 / k);
    let null = (!tests.is_empty()).then(|| {
        let cdf_values: Vec<f64> = tests.iter().map(|t| t.0).collect();
        let d = stats::ks_uniform(&cdf_values);
        NullCalibration {
            ks_distance: d,
            ks_p_value: stats::ks_p_value(d, cdf_values.len()),
            type_one_rate: cdf_values.iter().filter(|&&c| 1.0 - c < alpha).count() as f64 / k,
            cdf_values,
        }
    });
    PointSummary {
        n,
        zn,
        mean_estimate: stats::mean(&est),
        sd_estimate: stats::variance(&est).sqrt(),
        mse: results
            .iter()
            .map(|r| r.row.abs_err * r.row.abs_err)
            .sum::<f64>()
            / k,
        ci_coverage: covered as f64 / k,
        rejection_rate,
        null,
    }
}

/// Run every `(n, trial)` cell of `cfg` and summarize per `n`.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let exp = cfg.experiment;
    let s = cfg.order();
    let rule = cfg.zn_rule();
    let (truth, truth_closed_form) = truths(cfg)?;
    let (p, q) = exp.densities();
    let dim = p.dim();
    let mut rows = Vec::with_capacity(cfg.grid.len() * cfg.trials);
    let mut points = Vec::with_capacity(cfg.grid.len());
    for &n in &cfg.grid {
        let zn = choose_zn(n, s, dim, &rule)?;
        let spec = LatticeSpec::new(dim, zn as i64, s)?;
        let results: Vec<TrialResult> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &spec, n, t, truth))
            .collect::<Result<_>>()?;
        let mut point = summarize_point(n, zn, &results, cfg.alpha);
        if exp != Experiment::NullCalibration {
            point.null = None;
        }
        if !exp.is_test() {
            point.rejection_rate = None;
        }
        points.push(point);
        rows.extend(results.into_iter().map(|r| r.row));
    }
    let large: Vec<&PointSummary> = points.iter().filter(|p| p.n >= 1000).collect();
    let fit: Vec<&PointSummary> = if large.len() >= 2 {
        large
    } else {
        points.iter().collect()
    };
    let xs: Vec<f64> = fit.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = fit.iter().map(|p| p.mse).collect();
    let summary = BenchSummary {
        experiment: exp,
        quantity: exp.quantity(),
        order: s,
        zn_rule: rule,
        trials: cfg.trials,
        ci_level: cfg.ci_level,
        alpha: cfg.alpha,
        p,
        q,
        rescale: exp.rescale(),
        truth,
        truth_closed_form,
        points,
        mse_slope: stats::loglog_slope(&xs, &ys),
    };
    Ok(BenchOutput { rows, summary })
}

/// Write rows as CSV with header `n,trial,estimate,ci_lo,ci_hi,truth,abs_err`.
pub fn write_csv<W: Write>(rows: &[TrialRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip_and_unknown_tags_list_the_roster() {
        for e in Experiment::ALL {
            assert_eq!(e.tag().parse::<Experiment>().unwrap(), e);
        }
        let err = "gauss2d".parse::<Experiment>().unwrap_err().to_string();
        assert!(err.contains("null_calibration") && err.contains("unif_tri"));
    }

    #[test]
    fn config_validation() {
        let mut c = BenchConfig::new(Experiment::NormH0);
        c.grid = vec![100, 10];
        assert!(c.validate().is_err());
        c.grid = vec![10];
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_cell_gives_one_row() {
        let mut c = BenchConfig::new(Experiment::Gauss1dMean);
        c.grid = vec![10];
        c.trials = 1;
        let out = run_benchmark(&c).unwrap();
        assert_eq!(out.rows.len(), 1);
        let mut buf = Vec::new();
        write_csv(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "n,trial,estimate,ci_lo,ci_hi,truth,abs_err"
        );
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn tables_are_reproducible() {
        let mut c = BenchConfig::new(Experiment::UnifTri);
        c.grid = vec![20, 200];
        c.trials = 6;
        c.seed = 11;
        let a = run_benchmark(&c).unwrap();
        let b = run_benchmark(&c).unwrap();
        assert_eq!(a, b);
        c.seed = 12;
        assert_ne!(run_benchmark(&c).unwrap().rows, a.rows);
    }

    #[test]
    fn streams_differ_per_cell() {
        let mut a = trial_rng(1, Experiment::NormH0, 10, 0);
        let mut b = trial_rng(1, Experiment::NormH0, 10, 1);
        let mut c = trial_rng(1, Experiment::NormH1, 10, 0);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert!(x != y && x != z && y != z);
    }

    #[test]
    fn gaussian_boxes_keep_tails_small() {
        for e in [
            Experiment::Gauss1dVar,
            Experiment::Gauss3dMean,
            Experiment::Gauss3dVar,
        ] {
            let (p, q) = e.densities();
            let map = e.rescale();
            for d in [p, q.unwrap()] {
                assert!(d.mapped(&map).unwrap().box_tail_mass() < 1e-6, "{e}");
            }
        }
    }

    #[test]
    fn truth_is_the_periodized_oracle() {
        let c = BenchConfig::new(Experiment::Gauss1dMean);
        let (t, closed) = truths(&c).unwrap();
        assert!((closed.unwrap() - 0.784_13).abs() < 1e-5);
        assert!((t - 0.781_19).abs() < 1e-5);
        let u = BenchConfig::new(Experiment::UnifShift);
        let (t, closed) = truths(&u).unwrap();
        assert_eq!(Some(t), closed);
        assert!((t - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn null_summary_only_for_null_calibration() {
        let mut c = BenchConfig::new(Experiment::PowerCurve);
        c.grid = vec![50];
        c.trials = 4;
        let out = run_benchmark(&c).unwrap();
        assert!(out.summary.points[0].rejection_rate.is_some());
        assert!(out.summary.points[0].null.is_none());
        c.experiment = Experiment::NullCalibration;
        let out = run_benchmark(&c).unwrap();
        assert_eq!(
            out.summary.points[0]
                .null
                .as_ref()
                .unwrap()
                .cdf_values
                .len(),
            4
        );
    }
}
