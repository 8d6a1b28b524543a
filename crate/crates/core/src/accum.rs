//! Streaming, mergeable sums of `exp(-i <z, x>)` over a frequency lattice.
//!
//! Only the half of the lattice with index `>= center` is stored; the other
//! half is its complex conjugate, so conjugate symmetry holds exactly rather
//! than up to rounding. Sums are kept as (value, compensation) pairs so that
//! the result does not depend on ingestion order or shard layout beyond the
//! final rounding.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::LatticeShape;
use crate::numeric::two_sum;
use crate::samples::Samples;

/// Scratch space producing `exp(-i <z, x>)` for the upper half of a lattice.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    shape: LatticeShape,
    axis: Vec<Vec<Complex64>>,
    rest: Vec<Complex64>,
    next: Vec<Complex64>,
    half: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(shape: LatticeShape) -> Self {
        let side = shape.side();
        PhaseTable {
            shape,
            axis: vec![vec![Complex64::new(1.0, 0.0); side]; shape.dim],
            rest: Vec::with_capacity(side.pow(shape.dim as u32 - 1)),
            next: Vec::with_capacity(side.pow(shape.dim as u32 - 1)),
            half: vec![Complex64::new(0.0, 0.0); shape.len() - shape.center()],
        }
    }

    /// Phases for lattice indices `center..len`, i.e. entry `k` belongs to
    /// lattice index `center + k`.
    pub fn compute(&mut self, x: &[f64]) -> &[Complex64] {
        let zn = self.shape.zn;
        for (j, (pw, &xj)) in self.axis.iter_mut().zip(x).enumerate() {
            let (sin, cos) = xj.sin_cos();
            powers(&mut pw[zn..], Complex64::new(cos, -sin));
            if j > 0 {
                for k in 1..=zn {
                    pw[zn - k] = pw[zn + k].conj();
                }
            }
        }
        if self.shape.dim == 1 {
            return &self.axis[0][zn..];
        }
        // Full product over every axis but the first.
        self.rest.clear();
        self.rest.push(Complex64::new(1.0, 0.0));
        for pw in &self.axis[1..] {
            self.next.clear();
            for &r in &self.rest {
                self.next.extend(pw.iter().map(|&p| r * p));
            }
            std::mem::swap(&mut self.rest, &mut self.next);
        }
        // First coordinate 0 contributes the upper half of `rest`; positive
        // first coordinates contribute all of it.
        let m = self.rest.len();
        let mid = (m - 1) / 2;
        let first = &self.axis[0];
        let mut out = 0;
        for &r in &self.rest[mid..] {
            self.half[out] = r;
            out += 1;
        }
        for &p in &first[zn + 1..] {
            for &r in &self.rest {
                self.half[out] = p * r;
                out += 1;
            }
        }
        debug_assert_eq!(out, self.half.len());
        &self.half
    }
}

/// Independent multiplication chains in [`powers`].
const LANES: usize = 8;

/// `out[k] = step^k`, using [`LANES`] interleaved recursions.
fn powers(out: &mut [Complex64], step: Complex64) {
    out[0] = Complex64::new(1.0, 0.0);
    let head = out.len().min(LANES + 1);
    for k in 1..head {
        out[k] = out[k - 1] * step;
    }
    if out.len() > LANES + 1 {
        let jump = out[LANES];
        for k in LANES + 1..out.len() {
            out[k] = out[k - LANES] * jump;
        }
    }
}

/// Empirical Fourier coefficient accumulator over a cubic lattice.
#[derive(Clone, Debug)]
pub struct CoeffAccumulator {
    shape: LatticeShape,
    n: u64,
    sum: Vec<Complex64>,
    comp: Vec<Complex64>,
    table: PhaseTable,
}

impl CoeffAccumulator {
    pub fn new(shape: LatticeShape) -> Self {
        let half = shape.len() - shape.center();
        CoeffAccumulator {
            shape,
            n: 0,
            sum: vec![Complex64::new(0.0, 0.0); half],
            comp: vec![Complex64::new(0.0, 0.0); half],
            table: PhaseTable::new(shape),
        }
    }

    pub fn from_samples(shape: LatticeShape, samples: &Samples) -> Result<Self> {
        let mut acc = CoeffAccumulator::new(shape);
        acc.extend(samples)?;
        Ok(acc)
    }

    /// Ingest `samples` split into `shards` contiguous chunks on the rayon
    /// pool, then merge the private accumulators in chunk order.
    pub fn from_samples_sharded(
        shape: LatticeShape,
        samples: &Samples,
        shards: usize,
    ) -> Result<Self> {
        let shards = shards.max(1);
        let n = samples.len();
        let chunk = n.div_ceil(shards).max(1);
        let parts: Vec<Result<CoeffAccumulator>> = (0..shards)
            .into_par_iter()
            .map(|k| {
                let lo = (k * chunk).min(n);
                let hi = ((k + 1) * chunk).min(n);
                let mut acc = CoeffAccumulator::new(shape);
                for row in samples.as_slice()[lo * samples.dim()..hi * samples.dim()]
                    .chunks_exact(samples.dim())
                {
                    acc.update(row)?;
                }
                Ok(acc)
            })
            .collect();
        let mut out = CoeffAccumulator::new(shape);
        for part in parts {
            out.merge(&part?)?;
        }
        Ok(out)
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Add one point of `[-pi, pi]^D`.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.shape.dim {
            return Err(Error::DimensionMismatch {
                expected: self.shape.dim,
                got: x.len(),
            });
        }
        if let Some(j) = x.iter().position(|v| !(-PI..=PI).contains(v)) {
            return Err(Error::OutOfBox {
                dim: j,
                value: x[j],
            });
        }
        let phases = self.table.compute(x);
        let phases: &[f64] = bytemuck::cast_slice(phases);
        let sum: &mut [f64] = bytemuck::cast_slice_mut(&mut self.sum);
        let comp: &mut [f64] = bytemuck::cast_slice_mut(&mut self.comp);
        for ((s, c), &p) in sum.iter_mut().zip(comp.iter_mut()).zip(phases) {
            let (t, e) = two_sum(*s, p);
            *s = t;
            *c += e;
        }
        self.n += 1;
        Ok(())
    }

    pub fn extend(&mut self, samples: &Samples) -> Result<()> {
        if samples.dim() != self.shape.dim {
            return Err(Error::DimensionMismatch {
                expected: self.shape.dim,
                got: samples.dim(),
            });
        }
        for row in samples.rows() {
            self.update(row)?;
        }
        Ok(())
    }

    /// Fold `other` into `self`. Both must share dimension and radius.
    pub fn merge(&mut self, other: &CoeffAccumulator) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::SpecMismatch {
                left_dim: self.shape.dim,
                left_zn: self.shape.zn,
                right_dim: other.shape.dim,
                right_zn: other.shape.zn,
            });
        }
        for i in 0..self.sum.len() {
            let (re, e_re) = two_sum(self.sum[i].re, other.sum[i].re);
            let (im, e_im) = two_sum(self.sum[i].im, other.sum[i].im);
            self.sum[i] = Complex64::new(re, im);
            self.comp[i] += other.comp[i] + Complex64::new(e_re, e_im);
        }
        self.n += other.n;
        Ok(())
    }

    pub fn merged(a: &CoeffAccumulator, b: &CoeffAccumulator) -> Result<CoeffAccumulator> {
        let mut out = a.clone();
        out.merge(b)?;
        Ok(out)
    }

    fn half_value(&self, k: usize) -> Complex64 {
        self.sum[k] + self.comp[k]
    }

    /// `sum_j exp(-i <z, x_j>)` over the full lattice, in lattice order.
    pub fn sums(&self) -> Vec<Complex64> {
        let len = self.shape.len();
        let center = self.shape.center();
        (0..len)
            .map(|i| {
                if i >= center {
                    self.half_value(i - center)
                } else {
                    self.half_value(len - 1 - i - center).conj()
                }
            })
            .collect()
    }

    /// Empirical coefficients `p_hat(z) = sums / n`.
    pub fn coefficients(&self) -> Result<Vec<Complex64>> {
        if self.n == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.n as f64;
        Ok(self.sums().into_iter().map(|s| s / n).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape(dim: usize, zn: usize) -> LatticeShape {
        LatticeShape::new(dim, zn).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn single_origin_point_gives_ones() {
        let acc =
            CoeffAccumulator::from_samples(shape(1, 1), &Samples::from_column(vec![0.0])).unwrap();
        let c = acc.coefficients().unwrap();
        assert_eq!(c, vec![Complex64::new(1.0, 0.0); 3]);
    }

    #[test]
    fn two_antipodal_points_cancel_first_harmonic() {
        let acc = CoeffAccumulator::from_samples(shape(1, 1), &Samples::from_column(vec![0.0, PI]))
            .unwrap();
        let c = acc.coefficients().unwrap();
        assert!(c[2].norm() < 1e-15);
        assert_eq!(c[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn quarter_turn_contributes_minus_i() {
        let acc =
            CoeffAccumulator::from_samples(shape(1, 1), &Samples::from_column(vec![PI / 2.0]))
                .unwrap();
        let s = acc.sums();
        assert!(close(s[2], Complex64::new(0.0, -1.0), 1e-15));
        assert!(close(s[0], Complex64::new(0.0, 1.0), 1e-15));
    }

    #[test]
    fn rejects_out_of_box_and_empty() {
        let mut acc = CoeffAccumulator::new(shape(2, 1));
        assert!(matches!(
            acc.update(&[0.0, 3.5]),
            Err(Error::OutOfBox { dim: 1, .. })
        ));
        assert!(matches!(
            acc.update(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(acc.coefficients(), Err(Error::EmptyAccumulator)));
    }

    #[test]
    fn merge_examples() {
        let s = shape(1, 2);
        let a = CoeffAccumulator::from_samples(s, &Samples::from_column(vec![0.0])).unwrap();
        let b = CoeffAccumulator::from_samples(s, &Samples::from_column(vec![PI])).unwrap();
        let ab = CoeffAccumulator::from_samples(s, &Samples::from_column(vec![0.0, PI])).unwrap();
        let m = CoeffAccumulator::merged(&a, &b).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.sums(), ab.sums());
        assert_eq!(CoeffAccumulator::merged(&b, &a).unwrap().sums(), m.sums());
        let e = CoeffAccumulator::merged(&a, &CoeffAccumulator::new(s)).unwrap();
        assert_eq!(e.sums(), a.sums());
        assert_eq!(e.n(), a.n());
        assert!(matches!(
            CoeffAccumulator::merged(&a, &CoeffAccumulator::new(shape(1, 3))),
            Err(Error::SpecMismatch { .. })
        ));
    }

    #[test]
    fn phases_match_direct_trig_in_three_dimensions() {
        let s = shape(3, 2);
        let x = [0.3, -1.2, 2.9];
        let acc =
            CoeffAccumulator::from_samples(s, &Samples::from_rows(&[x.to_vec()]).unwrap()).unwrap();
        for (i, v) in acc.sums().iter().enumerate() {
            let z = s.multi_index(i);
            let dot: f64 = z
                .coords()
                .iter()
                .zip(&x)
                .map(|(&c, &xj)| c as f64 * xj)
                .sum();
            assert!(
                close(*v, Complex64::new(dot.cos(), -dot.sin()), 1e-13),
                "z={z:?}"
            );
        }
    }

    fn points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-PI..PI, dim), 1..40)
    }

    fn ulps(a: f64, b: f64) -> u64 {
        if a == b {
            return 0;
        }
        let scale = a.abs().max(b.abs());
        ((a - b).abs() / (scale * f64::EPSILON)).ceil() as u64
    }

    proptest! {
        #[test]
        fn invariants_hold(rows in points(2), zn in 0usize..4) {
            let s = shape(2, zn);
            let acc = CoeffAccumulator::from_samples(s, &Samples::from_rows(&rows).unwrap()).unwrap();
            let sums = acc.sums();
            let n = rows.len() as f64;
            prop_assert_eq!(sums[s.center()], Complex64::new(n, 0.0));
            for (i, v) in sums.iter().enumerate() {
                prop_assert!(v.norm() <= n * (1.0 + 1e-12));
                prop_assert_eq!(*v, sums[s.mirror(i)].conj());
            }
        }

        #[test]
        fn order_and_sharding_do_not_matter(rows in points(1), split in 0usize..40, zn in 1usize..6) {
            let s = shape(1, zn);
            let data = Samples::from_rows(&rows).unwrap();
            let serial = CoeffAccumulator::from_samples(s, &data).unwrap();
            let mut rev = rows.clone();
            rev.reverse();
            let reversed = CoeffAccumulator::from_samples(s, &Samples::from_rows(&rev).unwrap()).unwrap();
            let k = split % (rows.len() + 1);
            let a = CoeffAccumulator::from_samples(s, &data.slice(0..k)).unwrap();
            let b = CoeffAccumulator::from_samples(s, &data.slice(k..rows.len())).unwrap();
            let merged = CoeffAccumulator::merged(&a, &b).unwrap();
            let sharded = CoeffAccumulator::from_samples_sharded(s, &data, 4).unwrap();
            prop_assert_eq!(merged.n(), serial.n());
            for other in [&reversed, &merged, &sharded] {
                for (x, y) in serial.sums().iter().zip(other.sums()) {
                    // one ulp, with an absolute floor for sums that cancel to ~0
                    prop_assert!(ulps(x.re, y.re) <= 1 || (x.re - y.re).abs() < 1e-28);
                    prop_assert!(ulps(x.im, y.im) <= 1 || (x.im - y.im).abs() < 1e-28);
                }
            }
        }
    }
}
