use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Vec3;

/// A point `(μ, σ², β)` on the manifold.
///
/// Coordinate order follows the rest of the crate: index 0 is the mean,
/// index 1 the conditional variance and index 2 the inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub sigma2: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(mu: f64, sigma2: f64, beta: f64) -> Result<Self> {
        let params = ModelParams { mu, sigma2, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn from_array(theta: Vec3) -> Result<Self> {
        Self::new(theta[0], theta[1], theta[2])
    }

    pub fn to_array(self) -> Vec3 {
        [self.mu, self.sigma2, self.beta]
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.mu, "mu")?;
        ensure_finite(self.sigma2, "sigma2")?;
        ensure_finite(self.beta, "beta")?;
        if self.sigma2 <= 0.0 {
            return Err(Error::domain(alloc::format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodOrder {
    First,
    Second,
    Third,
}

const FIRST: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const SECOND: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];
const THIRD: [(isize, isize); 12] = [
    (-2, 0),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -2),
    (0, -1),
    (0, 1),
    (0, 2),
    (1, -1),
    (1, 0),
    (1, 1),
    (2, 0),
];

/// Neighbourhood system `η_i`. The neighbour count `Δ` follows from the order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub order: NeighborhoodOrder,
}

impl NeighborhoodSpec {
    pub const fn new(order: NeighborhoodOrder) -> Self {
        NeighborhoodSpec { order }
    }

    /// The 8-neighbour system every metric formula is written for.
    pub const fn second_order() -> Self {
        Self::new(NeighborhoodOrder::Second)
    }

    pub fn delta(&self) -> usize {
        self.offsets().len()
    }

    /// Row/column offsets of the neighbours, in raster order.
    pub fn offsets(&self) -> &'static [(isize, isize)] {
        match self.order {
            NeighborhoodOrder::First => &FIRST,
            NeighborhoodOrder::Second => &SECOND,
            NeighborhoodOrder::Third => &THIRD,
        }
    }

    /// Largest offset along either axis.
    pub fn radius(&self) -> usize {
        match self.order {
            NeighborhoodOrder::First | NeighborhoodOrder::Second => 1,
            NeighborhoodOrder::Third => 2,
        }
    }
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self::second_order()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_follows_order() {
        assert_eq!(NeighborhoodSpec::new(NeighborhoodOrder::First).delta(), 4);
        assert_eq!(NeighborhoodSpec::second_order().delta(), 8);
        assert_eq!(NeighborhoodSpec::new(NeighborhoodOrder::Third).delta(), 12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(
            ModelParams::new(0.0, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            ModelParams::new(f64::NAN, 1.0, 0.0),
            Err(Error::NonFinite("mu"))
        ));
        assert!(ModelParams::new(0.0, 1.0, -3.0).is_ok());
    }
}
