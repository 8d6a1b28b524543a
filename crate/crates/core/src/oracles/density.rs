//! Named densities with closed-form Fourier coefficients.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Triangular, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rescale::RescaleMap;
use crate::samples::Samples;

/// One-dimensional factor of a product density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Factor {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Triangle on `[lo, hi]` with its peak at `mode`.
    Triangular {
        lo: f64,
        mode: f64,
        hi: f64,
    },
}

/// Linear piece `(l, r, f(l+), f(r-))`.
pub(crate) type Piece = (f64, f64, f64, f64);

impl Factor {
    pub fn family(&self) -> &'static str {
        match self {
            Factor::Gaussian { .. } => "gaussian",
            Factor::Uniform { .. } => "uniform",
            Factor::Triangular { .. } => "triangular",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Factor::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Factor::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Factor::Triangular { lo, mode, hi } => {
                lo.is_finite() && hi.is_finite() && lo < hi && (lo..=hi).contains(&mode)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid density parameters {self:?}"
            )))
        }
    }

    /// Linear pieces of a uniform or triangular density; empty for Gaussians.
    pub(crate) fn pieces(&self) -> Vec<Piece> {
        match *self {
            Factor::Gaussian { .. } => Vec::new(),
            Factor::Uniform { lo, hi } => {
                let h = 1.0 / (hi - lo);
                vec![(lo, hi, h, h)]
            }
            Factor::Triangular { lo, mode, hi } => {
                let h = 2.0 / (hi - lo);
                let mut out = Vec::new();
                if mode > lo {
                    out.push((lo, mode, 0.0, h));
                }
                if hi > mode {
                    out.push((mode, hi, h, 0.0));
                }
                out
            }
        }
    }

    /// Points where the density or its derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Factor::Gaussian { .. } => Vec::new(),
            Factor::Uniform { lo, hi } => vec![lo, hi],
            Factor::Triangular { lo, mode, hi } => vec![lo, mode, hi],
        }
    }

    /// Whether the density is continuous on the real line (so it has a
    /// square-integrable weak derivative).
    pub fn is_continuous(&self) -> bool {
        match *self {
            Factor::Gaussian { .. } => true,
            Factor::Uniform { .. } => false,
            Factor::Triangular { lo, mode, hi } => lo < mode && mode < hi,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if let Factor::Gaussian { mean, sd } = *self {
            return gaussian_pdf(mean, sd, x);
        }
        for (l, r, fl, fr) in self.pieces() {
            if x >= l && x < r {
                return fl + (fr - fl) * (x - l) / (r - l);
            }
        }
        0.0
    }

    /// Derivative of the density away from its breakpoints.
    pub fn pdf_derivative(&self, x: f64) -> f64 {
        if let Factor::Gaussian { mean, sd } = *self {
            return -(x - mean) / (sd * sd) * self.pdf(x);
        }
        for (l, r, fl, fr) in self.pieces() {
            if x > l && x < r {
                return (fr - fl) / (r - l);
            }
        }
        0.0
    }

    /// `int exp(-i z x) p(x) dx` over the real line.
    pub fn fourier(&self, z: i64) -> Complex64 {
        if let Factor::Gaussian { mean, sd } = *self {
            let z = z as f64;
            return Complex64::from_polar((-0.5 * z * z * sd * sd).exp(), -z * mean);
        }
        piecewise_linear_fourier(&self.pieces(), z as f64)
    }

    /// Probability mass inside `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if let Factor::Gaussian { mean, sd } = *self {
            return gaussian_mass(mean, sd, lo, hi);
        }
        self.pieces()
            .into_iter()
            .map(|(l, r, fl, fr)| {
                let a = l.max(lo);
                let b = r.min(hi);
                if b <= a {
                    return 0.0;
                }
                let f = |x: f64| fl + (fr - fl) * (x - l) / (r - l);
                0.5 * (b - a) * (f(a) + f(b))
            })
            .sum()
    }

    /// Density of `scale * X + offset`.
    pub fn affine(&self, scale: f64, offset: f64) -> Result<Factor> {
        if !(scale.is_finite() && scale != 0.0 && offset.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "affine map needs finite non-zero scale, got {scale}"
            )));
        }
        let m = |x: f64| scale * x + offset;
        Ok(match *self {
            Factor::Gaussian { mean, sd } => Factor::Gaussian {
                mean: m(mean),
                sd: sd * scale.abs(),
            },
            Factor::Uniform { lo, hi } => Factor::Uniform {
                lo: m(lo).min(m(hi)),
                hi: m(lo).max(m(hi)),
            },
            Factor::Triangular { lo, mode, hi } => Factor::Triangular {
                lo: m(lo).min(m(hi)),
                mode: m(mode),
                hi: m(lo).max(m(hi)),
            },
        })
    }

    /// Lattice truncation `K` for the periodization sum so that the
    /// neglected images carry less than `1e-16` relative mass.
    fn image_radius(&self) -> i64 {
        let (lo, hi) = match *self {
            Factor::Gaussian { mean, sd } => (mean - 40.0 * sd, mean + 40.0 * sd),
            Factor::Uniform { lo, hi } | Factor::Triangular { lo, hi, .. } => (lo, hi),
        };
        ((lo.abs().max(hi.abs()) + PI) / TAU).ceil() as i64 + 1
    }

    /// `sum_k p(x + 2 pi k)`, the density of the data reduced modulo `2 pi`.
    pub fn wrapped_pdf(&self, x: f64) -> f64 {
        periodized_density(
            |y: &[f64]| self.pdf(y[0]),
            &[x],
            self.image_radius() as usize,
        )
    }

    /// Breakpoints of the wrapped density inside `(-pi, pi)`.
    pub fn wrapped_breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .map(crate::rescale::wrap_angle)
            .filter(|b| b.abs() < PI)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Factor::Gaussian { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Factor::Uniform { lo, hi } => Uniform::new(lo, hi).expect("validated").sample(rng),
            Factor::Triangular { lo, mode, hi } => Triangular::new(lo, hi, mode)
                .expect("validated")
                .sample(rng),
        }
    }
}

pub(crate) fn gaussian_pdf(mean: f64, sd: f64, x: f64) -> f64 {
    let t = (x - mean) / sd;
    (-0.5 * t * t).exp() / (sd * TAU.sqrt())
}

/// `P(lo < X < hi)` for `X ~ N(mean, sd^2)`, taking the tail that avoids
/// cancellation.
pub(crate) fn gaussian_mass(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let k = std::f64::consts::FRAC_1_SQRT_2 / sd;
    let (a, b) = ((lo - mean) * k, (hi - mean) * k);
    if a >= 0.0 {
        0.5 * (libm::erfc(a) - libm::erfc(b))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        0.5 * (libm::erf(b) - libm::erf(a))
    }
}

/// Exact Fourier transform of a piecewise-linear function.
pub(crate) fn piecewise_linear_fourier(pieces: &[Piece], z: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(l, r, fl, fr) in pieces {
        if z == 0.0 {
            acc += 0.5 * (r - l) * (fl + fr);
            continue;
        }
        // int_l^r g e^{-izx} = (i/z) [g e^{-izx}]_l^r + (g'/z^2) [e^{-izx}]_l^r
        let slope = (fr - fl) / (r - l);
        let el = Complex64::from_polar(1.0, -z * l);
        let er = Complex64::from_polar(1.0, -z * r);
        acc += Complex64::i() / z * (er * fr - el * fl) + (er - el) * (slope / (z * z));
    }
    acc
}

/// `sum_{||k||_inf <= radius} p(x + 2 pi k)`.
pub fn periodized_density(p: impl Fn(&[f64]) -> f64, x: &[f64], radius: usize) -> f64 {
    let dim = x.len();
    let side = 2 * radius + 1;
    let total = side.pow(dim as u32);
    let mut y = vec![0.0; dim];
    let mut sum = 0.0;
    for mut idx in 0..total {
        for j in (0..dim).rev() {
            let k = (idx % side) as f64 - radius as f64;
            idx /= side;
            y[j] = x[j] + TAU * k;
        }
        sum += p(&y);
    }
    sum
}

/// Product density `p(x) = prod_j f_j(x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedDensity {
    pub factors: Vec<Factor>,
}

impl NamedDensity {
    pub fn product(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter(
                "a density needs at least one factor".into(),
            ));
        }
        for f in &factors {
            f.validate()?;
        }
        Ok(NamedDensity { factors })
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        Self::product(vec![Factor::Gaussian { mean, sd }])
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::product(vec![Factor::Uniform { lo, hi }])
    }

    pub fn triangular(lo: f64, mode: f64, hi: f64) -> Result<Self> {
        Self::product(vec![Factor::Triangular { lo, mode, hi }])
    }

    /// `N(mean, sd^2 I)`.
    pub fn isotropic_gaussian(mean: &[f64], sd: f64) -> Result<Self> {
        Self::product(
            mean.iter()
                .map(|&m| Factor::Gaussian { mean: m, sd })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.factors.iter().zip(x).map(|(f, &v)| f.pdf(v)).product()
    }

    /// `p~(z) = int exp(-i <z, x>) p(x) dx`.
    pub fn fourier(&self, z: &[i64]) -> Complex64 {
        self.factors
            .iter()
            .zip(z)
            .map(|(f, &k)| f.fourier(k))
            .product()
    }

    /// Density of the data after `map`. Reduction modulo `2 pi` does not
    /// change integer-frequency coefficients, so `map.periodic` is ignored.
    pub fn mapped(&self, map: &RescaleMap) -> Result<Self> {
        if map.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: map.dim(),
            });
        }
        Self::product(
            self.factors
                .iter()
                .enumerate()
                .map(|(j, f)| f.affine(map.scale[j], map.offset[j]))
                .collect::<Result<_>>()?,
        )
    }

    /// Probability mass outside `[-pi, pi]^D`.
    pub fn box_tail_mass(&self) -> f64 {
        1.0 - self
            .factors
            .iter()
            .map(|f| f.mass_between(-PI, PI))
            .product::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Samples {
        let dim = self.dim();
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n {
            for f in &self.factors {
                data.push(f.sample(rng));
            }
        }
        Samples::new(dim, data).expect("consistent shape")
    }
}

/// Finite mixture of point masses, whose coefficients are trigonometric
/// sums and whose truncated targets are therefore exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMasses {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl PointMasses {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = atoms.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || atoms.len() != weights.len() || atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidParameter(
                "atoms must be non-empty, equal-length and match the weights".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(PointMasses { atoms, weights })
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn fourier(&self, z: &[i64]) -> Complex64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| {
                let phase: f64 = a.iter().zip(z).map(|(x, &k)| x * k as f64).sum();
                Complex64::from_polar(w, -phase)
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Samples {
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            let mut u: f64 = rng.random();
            let mut pick = self.atoms.len() - 1;
            for (i, &w) in self.weights.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            data.extend_from_slice(&self.atoms[pick]);
        }
        Samples::new(self.dim(), data).expect("consistent shape")
    }
}
