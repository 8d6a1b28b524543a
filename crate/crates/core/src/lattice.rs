//! Truncated frequency lattices and Sobolev weights.
//!
//! A lattice of radius `zn` in dimension `dim` is the cube
//! `{z in Z^dim : max_j |z_j| <= zn}`. Indices are laid out lexicographically
//! (first coordinate slowest, each coordinate running from `-zn` to `zn`),
//! which has the useful property that `index(-z) = len - 1 - index(z)`: the
//! lattice is its own mirror image around the center entry `z = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer frequency vector `z`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<i64>);

impl MultiIndex {
    pub fn new(coords: Vec<i64>) -> Self {
        MultiIndex(coords)
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn negated(&self) -> Self {
        MultiIndex(self.0.iter().map(|c| -c).collect())
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(coords: Vec<i64>) -> Self {
        MultiIndex(coords)
    }
}

/// Geometry of a cubic lattice: ambient dimension and truncation radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeShape {
    pub dim: usize,
    pub zn: usize,
}

impl LatticeShape {
    pub fn new(dim: usize, zn: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        let side = 2 * zn + 1;
        if (side as f64).powi(dim as i32) > (usize::MAX / 16) as f64 {
            return Err(Error::InvalidSpec(format!(
                "lattice (2*{zn}+1)^{dim} does not fit in memory"
            )));
        }
        Ok(LatticeShape { dim, zn })
    }

    /// Number of points along one axis, `2 zn + 1`.
    pub fn side(&self) -> usize {
        2 * self.zn + 1
    }

    /// `(2 zn + 1)^dim`.
    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of `z = 0` in lexicographic order.
    pub fn center(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Position of the mirror frequency `-z`.
    pub fn mirror(&self, index: usize) -> usize {
        self.len() - 1 - index
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        if z.len() != self.dim {
            return None;
        }
        let zn = self.zn as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &c in z {
            if c < -zn || c > zn {
                return None;
            }
            idx = idx * side + (c + zn) as usize;
        }
        Some(idx)
    }

    pub fn multi_index(&self, mut index: usize) -> MultiIndex {
        let side = self.side();
        let mut coords = vec![0i64; self.dim];
        for c in coords.iter_mut().rev() {
            *c = (index % side) as i64 - self.zn as i64;
            index /= side;
        }
        MultiIndex(coords)
    }

    pub fn iter(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len()).map(move |i| self.multi_index(i))
    }
}

/// A lattice together with the Sobolev order `s` of the weights placed on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub shape: LatticeShape,
    pub order: f64,
}

impl LatticeSpec {
    /// `zn` is signed so callers forwarding user input get a proper error
    /// instead of a wrap-around.
    pub fn new(dim: usize, zn: i64, order: f64) -> Result<Self> {
        if zn < 0 {
            return Err(Error::InvalidSpec(format!(
                "truncation radius must be non-negative, got {zn}"
            )));
        }
        if !(order.is_finite() && order >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "Sobolev order must be finite and non-negative, got {order}"
            )));
        }
        Ok(LatticeSpec {
            shape: LatticeShape::new(dim, zn as usize)?,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    pub fn zn(&self) -> usize {
        self.shape.zn
    }

    /// Weights `z^{2s}` for every lattice index, in lattice order.
    pub fn weights(&self) -> Vec<f64> {
        let side = self.shape.side();
        let axis: Vec<f64> = (0..side)
            .map(|k| axis_weight(k as i64 - self.shape.zn as i64, self.order))
            .collect();
        let mut out = vec![1.0f64];
        for _ in 0..self.shape.dim {
            out = out
                .iter()
                .flat_map(|&w| axis.iter().map(move |&a| w * a))
                .collect();
        }
        out
    }
}

/// Every `z` with `||z||_inf <= zn`, in lexicographic order.
pub fn enumerate_lattice(spec: &LatticeSpec) -> Vec<MultiIndex> {
    spec.shape.iter().collect()
}

/// `(z_j^2)^s` for a single coordinate, with `0^0 = 1`.
fn axis_weight(c: i64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    if c == 0 {
        return 0.0;
    }
    let sq = (c as f64) * (c as f64);
    if s.fract() == 0.0 && s <= 16.0 {
        let sq = (c as i128) * (c as i128);
        let mut acc: i128 = 1;
        for _ in 0..s as u32 {
            match acc.checked_mul(sq) {
                Some(v) => acc = v,
                None => return (sq as f64).powf(s),
            }
        }
        acc as f64
    } else {
        sq.powf(s)
    }
}

/// Sobolev weight `z^{2s} = prod_j (z_j^2)^s`, with the convention `0^0 = 1`.
pub fn sobolev_weight(z: &MultiIndex, s: f64) -> f64 {
    z.coords().iter().map(|&c| axis_weight(c, s)).product()
}

/// Frequencies used to build two-sample and variance features.
///
/// Drops `z = 0` always, and for `s > 0` every index with a zero coordinate,
/// since those carry zero weight. The result is closed under negation.
pub fn test_frequency_set(spec: &LatticeSpec) -> Result<Vec<MultiIndex>> {
    let set: Vec<MultiIndex> = spec
        .shape
        .iter()
        .filter(|z| !z.is_zero())
        .filter(|z| spec.order == 0.0 || z.coords().iter().all(|&c| c != 0))
        .collect();
    if set.is_empty() {
        return Err(Error::InvalidSpec(format!(
            "test frequency set is empty for zn={}",
            spec.zn()
        )));
    }
    Ok(set)
}

/// Lattice indices of the test frequencies lying in the positive half
/// (`index > center`). Exactly one of each pair `{z, -z}` is kept.
pub fn test_half_space(spec: &LatticeSpec) -> Result<Vec<usize>> {
    let center = spec.shape.center();
    Ok(test_frequency_set(spec)?
        .iter()
        .filter_map(|z| spec.shape.index_of(z.coords()))
        .filter(|&i| i > center)
        .collect())
}
