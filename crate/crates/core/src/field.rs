use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NeighborhoodSpec;

/// How sites near the lattice edge are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Wrap-around in both directions; every site has a full neighbourhood.
    #[default]
    Toroidal,
    /// Only sites whose whole neighbourhood lies inside the lattice are
    /// evaluated (and resampled).
    InteriorOnly,
}

/// A lattice outcome of the random field, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    values: Vec<f64>,
    height: usize,
    width: usize,
    boundary: Boundary,
}

pub(crate) const MIN_SIDE: usize = 3;

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::LatticeTooSmall {
            height,
            width,
            min: MIN_SIDE,
        });
    }
    Ok(())
}

impl FieldSample {
    pub fn new(height: usize, width: usize, values: Vec<f64>, boundary: Boundary) -> Result<Self> {
        check_dims(height, width)?;
        if values.len() != height * width {
            return Err(Error::Shape {
                expected: height * width,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field value"));
        }
        Ok(FieldSample {
            values,
            height,
            width,
            boundary,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64, boundary: Boundary) -> Result<Self> {
        Self::new(height, width, vec![value; height * width], boundary)
    }

    /// Builds a field from nested rows.
    pub fn from_rows(rows: &[Vec<f64>], boundary: Boundary) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::domain("ragged rows"));
        }
        Self::new(height, width, rows.concat(), boundary)
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        values: Vec<f64>,
        boundary: Boundary,
    ) -> Self {
        debug_assert_eq!(values.len(), height * width);
        FieldSample {
            values,
            height,
            width,
            boundary,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Flat index of the site at `(row + dr, col + dc)`, wrapping on a torus.
    /// Under `InteriorOnly` the caller guarantees the offset stays inside.
    #[inline]
    pub(crate) fn offset_index(&self, row: usize, col: usize, dr: isize, dc: isize) -> usize {
        let (h, w) = (self.height as isize, self.width as isize);
        let r = (row as isize + dr).rem_euclid(h) as usize;
        let c = (col as isize + dc).rem_euclid(w) as usize;
        r * self.width + c
    }

    /// Sites that carry a full neighbourhood of the given radius.
    pub fn evaluated_sites(&self, radius: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (r0, r1, c0, c1) = match self.boundary {
            Boundary::Toroidal => (0, self.height, 0, self.width),
            Boundary::InteriorOnly => (
                radius,
                self.height.saturating_sub(radius),
                radius,
                self.width.saturating_sub(radius),
            ),
        };
        (r0..r1.max(r0)).flat_map(move |r| (c0..c1.max(c0)).map(move |c| (r, c)))
    }

    pub fn evaluated_count(&self, radius: usize) -> usize {
        match self.boundary {
            Boundary::Toroidal => self.height * self.width,
            Boundary::InteriorOnly => {
                self.height.saturating_sub(2 * radius) * self.width.saturating_sub(2 * radius)
            }
        }
    }

    /// Fails when no site has a full neighbourhood.
    pub(crate) fn check_evaluable(&self, hood: &NeighborhoodSpec) -> Result<()> {
        let side = 2 * hood.radius() + 1;
        let ok = match self.boundary {
            Boundary::Toroidal => self.height >= side && self.width >= side,
            Boundary::InteriorOnly => self.evaluated_count(hood.radius()) > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::LatticeTooSmall {
                height: self.height,
                width: self.width,
                min: side,
            })
        }
    }

    /// Writes the neighbour values of `(row, col)` into `out` (length `Δ`).
    pub fn neighbor_values(&self, row: usize, col: usize, hood: &NeighborhoodSpec, out: &mut [f64]) {
        for (slot, &(dr, dc)) in out.iter_mut().zip(hood.offsets()) {
            *slot = self.values[self.offset_index(row, col, dr, dc)];
        }
    }

    /// `Σ_{j∈η_i} (x_j − μ)`.
    #[inline]
    pub fn neighbor_deviation_sum(
        &self,
        row: usize,
        col: usize,
        hood: &NeighborhoodSpec,
        mu: f64,
    ) -> f64 {
        hood.offsets()
            .iter()
            .map(|&(dr, dc)| self.values[self.offset_index(row, col, dr, dc)] - mu)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Variance with divisor `n`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }
}
