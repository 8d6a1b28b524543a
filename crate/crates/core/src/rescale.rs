//! Affine maps carrying raw data into the periodic box `[-pi, pi]^D`.
//!
//! Estimates always refer to the density of the *mapped* data, so the map
//! is carried along in every report. No Jacobian correction is applied.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::Samples;

pub const DEFAULT_MARGIN: f64 = 0.01;

/// Range of the per-dimension multiplier drawn by [`RescaleMode::Random`].
pub const RANDOM_JITTER: (f64, f64) = (0.8, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub enum RescaleMode {
    /// Leave data untouched; points outside the box are an error downstream.
    Identity,
    /// Leave data untouched but reduce every coordinate modulo `2 pi`.
    /// Integer frequencies cannot tell the two apart, so this is exactly
    /// estimation of the 2pi-periodic summation of the density.
    Wrap,
    /// Empirical `[min, max]` onto `[-pi (1 - margin), pi (1 - margin)]`.
    MinMax { margin: f64 },
    /// A declared box `[lo_j, hi_j]` onto `[-pi, pi]`.
    FixedBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `MinMax` followed by a seeded scale multiplier in [`RANDOM_JITTER`].
    Random { seed: u64, margin: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleKind {
    Identity,
    Wrap,
    Minmax,
    FixedBox,
    RandomRescale,
}

/// `x' = scale * x + offset`, optionally reduced modulo `2 pi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleMap {
    pub mode: RescaleKind,
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
    pub periodic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RescaleMap {
    pub fn identity(dim: usize) -> Self {
        RescaleMap {
            mode: RescaleKind::Identity,
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
            periodic: false,
            seed: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Reduce mapped points modulo `2 pi` instead of rejecting them.
    pub fn wrapping(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn apply_point(&self, x: &[f64], out: &mut [f64]) {
        for (j, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            let y = self.scale[j] * v + self.offset[j];
            *o = if self.periodic { wrap_angle(y) } else { y };
        }
    }

    pub fn apply(&self, data: &Samples) -> Result<Samples> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: data.dim(),
            });
        }
        Ok(data.map_rows(|x, out| self.apply_point(x, out)))
    }

    pub fn invert_point(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(j, &v)| (v - self.offset[j]) / self.scale[j])
            .collect()
    }
}

/// Reduce an angle into `[-pi, pi)`, leaving values already in `[-pi, pi]`
/// untouched.
pub fn wrap_angle(x: f64) -> f64 {
    if (-PI..=PI).contains(&x) {
        return x;
    }
    let y = x.rem_euclid(TAU);
    if y >= PI {
        y - TAU
    } else {
        y
    }
}

fn box_map(lo: &[f64], hi: &[f64], half_width: f64) -> (Vec<f64>, Vec<f64>) {
    let scale: Vec<f64> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| 2.0 * half_width / (b - a))
        .collect();
    let offset = lo
        .iter()
        .zip(&scale)
        .map(|(&a, &k)| -half_width - k * a)
        .collect();
    (scale, offset)
}

fn column_ranges(data: &Samples) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = data.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in data.rows() {
        for j in 0..dim {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    for j in 0..dim {
        if lo[j] == hi[j] {
            return Err(Error::DegenerateDimension {
                dim: j,
                value: lo[j],
            });
        }
    }
    Ok((lo, hi))
}

fn check_margin(margin: f64) -> Result<()> {
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidParameter(format!(
            "margin must lie in [0, 1), got {margin}"
        )));
    }
    Ok(())
}

/// Fit a [`RescaleMap`] of the requested mode to `data`.
pub fn fit_rescale(data: &Samples, mode: &RescaleMode) -> Result<RescaleMap> {
    if data.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if let Some(i) = data.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::Csv {
            row: i / data.dim() + 1,
            message: "non-finite value".into(),
        });
    }
    let dim = data.dim();
    match mode {
        RescaleMode::Identity => Ok(RescaleMap::identity(dim)),
        RescaleMode::Wrap => Ok(RescaleMap {
            mode: RescaleKind::Wrap,
            ..RescaleMap::identity(dim).wrapping()
        }),
        RescaleMode::FixedBox { lo, hi } => {
            if lo.len() != dim || hi.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: lo.len().min(hi.len()),
                });
            }
            if let Some(j) = (0..dim).find(|&j| !(lo[j] < hi[j])) {
                return Err(Error::InvalidParameter(format!(
                    "box dimension {j} has lo={} >= hi={}",
                    lo[j], hi[j]
                )));
            }
            let (scale, offset) = box_map(lo, hi, PI);
            Ok(RescaleMap {
                mode: RescaleKind::FixedBox,
                scale,
                offset,
                periodic: false,
                seed: None,
            })
        }
        RescaleMode::MinMax { margin } => {
            check_margin(*margin)?;
            let (lo, hi) = column_ranges(data)?;
            let (scale, offset) = box_map(&lo, &hi, PI * (1.0 - margin));
            Ok(RescaleMap {
                mode: RescaleKind::Minmax,
                scale,
                offset,
                periodic: false,
                seed: None,
            })
        }
        RescaleMode::Random { seed, margin } => {
            check_margin(*margin)?;
            let (lo, hi) = column_ranges(data)?;
            let (mut scale, mut offset) = box_map(&lo, &hi, PI * (1.0 - margin));
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for j in 0..dim {
                let u = rng.random_range(RANDOM_JITTER.0..=RANDOM_JITTER.1);
                scale[j] *= u;
                offset[j] *= u;
            }
            Ok(RescaleMap {
                mode: RescaleKind::RandomRescale,
                scale,
                offset,
                periodic: false,
                seed: Some(*seed),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_box_midpoint_maps_to_origin() {
        let data = Samples::from_column(vec![0.5]);
        let map = fit_rescale(
            &data,
            &RescaleMode::FixedBox {
                lo: vec![0.0],
                hi: vec![1.0],
            },
        )
        .unwrap();
        let mut out = [0.0];
        map.apply_point(&[0.5], &mut out);
        assert!(out[0].abs() < 1e-15);
        map.apply_point(&[0.0], &mut out);
        assert!((out[0] + PI).abs() < 1e-15);
        // x' = 2 pi x - pi
        assert!((map.scale[0] - TAU).abs() < 1e-15);
    }

    #[test]
    fn pi_box_is_identity() {
        let data = Samples::from_column(vec![0.1]);
        let map = fit_rescale(
            &data,
            &RescaleMode::FixedBox {
                lo: vec![-PI],
                hi: vec![PI],
            },
        )
        .unwrap();
        assert_eq!(map.scale, vec![1.0]);
        assert_eq!(map.offset, vec![0.0]);
    }

    #[test]
    fn random_rescale_is_seeded() {
        let data = Samples::from_column(vec![0.0, 1.0, 5.0, -2.0]);
        let a = fit_rescale(
            &data,
            &RescaleMode::Random {
                seed: 11,
                margin: DEFAULT_MARGIN,
            },
        )
        .unwrap();
        let b = fit_rescale(
            &data,
            &RescaleMode::Random {
                seed: 11,
                margin: DEFAULT_MARGIN,
            },
        )
        .unwrap();
        let c = fit_rescale(
            &data,
            &RescaleMode::Random {
                seed: 12,
                margin: DEFAULT_MARGIN,
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_dimension_is_named() {
        let data = Samples::from_rows(&[vec![1.0, 2.0], vec![3.0, 2.0]]).unwrap();
        let err = fit_rescale(&data, &RescaleMode::MinMax { margin: 0.01 }).unwrap_err();
        assert!(matches!(err, Error::DegenerateDimension { dim: 1, .. }));
    }

    #[test]
    fn wrap_preserves_in_box_values() {
        assert_eq!(wrap_angle(1.0), 1.0);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(PI + 0.5) - (-PI + 0.5)).abs() < 1e-12);
        assert!((wrap_angle(-7.0) - (-7.0 + TAU)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn minmax_lands_inside_box(values in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let data = Samples::from_column(values);
            for mode in [RescaleMode::MinMax { margin: DEFAULT_MARGIN }, RescaleMode::Random { seed: 3, margin: DEFAULT_MARGIN }] {
                let map = fit_rescale(&data, &mode).unwrap();
                let mapped = map.apply(&data).unwrap();
                prop_assert!(mapped.as_slice().iter().all(|v| v.abs() < PI));
                prop_assert!(map.scale.iter().all(|&k| k != 0.0));
                for (x, y) in data.rows().zip(mapped.rows()) {
                    prop_assert!((map.invert_point(y)[0] - x[0]).abs() <= 1e-9 * (1.0 + x[0].abs()));
                }
            }
        }
    }
}
