//! 3×3 patch covariance and the quantities the tensorial metric is built from.
//!
//! Every 3×3 neighbourhood is flattened row by row into a 9-vector, so the
//! central site sits at flat index [`CENTER`]. From the 9×9 covariance `Σp`
//! of those vectors we keep `ρ` (central row without its diagonal entry) and
//! `Σp⁻` (central row and column removed).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldSample;

pub const PATCH_LEN: usize = 9;
pub const CENTER: usize = 4;

pub type Patch = [f64; PATCH_LEN];
pub type PatchCovariance = [[f64; PATCH_LEN]; PATCH_LEN];

/// Anything whose entries can be summed by [`sum_all`].
pub trait Entries {
    fn entries(&self) -> &[f64];
}

impl Entries for [f64] {
    fn entries(&self) -> &[f64] {
        self
    }
}

impl<const N: usize> Entries for [f64; N] {
    fn entries(&self) -> &[f64] {
        self
    }
}

impl<const N: usize, const M: usize> Entries for [[f64; N]; M] {
    fn entries(&self) -> &[f64] {
        self.as_flattened()
    }
}

impl Entries for Vec<f64> {
    fn entries(&self) -> &[f64] {
        self
    }
}

/// `‖a‖₊`: the sum of every entry.
pub fn sum_all<A: Entries + ?Sized>(a: &A) -> f64 {
    a.entries().iter().sum()
}

/// `‖a ⊗ b‖₊`.
///
/// Every entry of the Kronecker product is some `a_i · b_j`, each pair once,
/// so the sum factors as `‖a‖₊ · ‖b‖₊`.
pub fn kron_sum<A: Entries + ?Sized, B: Entries + ?Sized>(a: &A, b: &B) -> f64 {
    sum_all(a) * sum_all(b)
}

/// One flattened patch per evaluated centre site.
///
/// Toroidal fields yield `height · width` patches, interior-only fields
/// `(height − 2)(width − 2)`.
pub fn extract_patches(field: &FieldSample) -> Result<Vec<Patch>> {
    let (h, w) = field.dims();
    if h < 3 || w < 3 {
        return Err(Error::LatticeTooSmall { height: h, width: w, min: 3 });
    }
    let mut patches = Vec::with_capacity(field.evaluated_count(1));
    for (row, col) in field.evaluated_sites(1) {
        let mut patch = [0.0; PATCH_LEN];
        let mut k = 0;
        for dr in -1..=1 {
            for dc in -1..=1 {
                patch[k] = field.values()[field.offset_index(row, col, dr, dc)];
                k += 1;
            }
        }
        patches.push(patch);
    }
    Ok(patches)
}

/// Sample covariance of the patch vectors with divisor `n`.
pub fn patch_covariance(patches: &[Patch]) -> Result<PatchCovariance> {
    let n = patches.len();
    if n < 2 {
        return Err(Error::domain(alloc::format!(
            "patch covariance needs at least 2 patches, got {n}"
        )));
    }
    let mut mean = [0.0; PATCH_LEN];
    for p in patches {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = [[0.0; PATCH_LEN]; PATCH_LEN];
    let mut centered = [0.0; PATCH_LEN];
    for p in patches {
        for k in 0..PATCH_LEN {
            centered[k] = p[k] - mean[k];
        }
        for i in 0..PATCH_LEN {
            for j in i..PATCH_LEN {
                cov[i][j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..PATCH_LEN {
        for j in i..PATCH_LEN {
            let v = cov[i][j] / n as f64;
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    Ok(cov)
}

/// Splits `Σp` into `ρ` and `Σp⁻`.
pub fn decompose(sigma_p: &PatchCovariance) -> ([f64; 8], [[f64; 8]; 8]) {
    let others = |k: usize| if k < CENTER { k } else { k + 1 };
    let mut rho = [0.0; 8];
    let mut minus = [[0.0; 8]; 8];
    for a in 0..8 {
        rho[a] = sigma_p[CENTER][others(a)];
        for b in 0..8 {
            minus[a][b] = sigma_p[others(a)][others(b)];
        }
    }
    (rho, minus)
}

/// Covariance summary of a field sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchStats {
    pub sigma_p: PatchCovariance,
    pub rho: [f64; 8],
    pub sigma_minus: [[f64; 8]; 8],
    pub n_patches: usize,
}

impl PatchStats {
    pub fn from_covariance(sigma_p: PatchCovariance, n_patches: usize) -> Self {
        let (rho, sigma_minus) = decompose(&sigma_p);
        PatchStats {
            sigma_p,
            rho,
            sigma_minus,
            n_patches,
        }
    }

    /// Exact covariances of an i.i.d. field with variance `sigma2`:
    /// `ρ = 0`, `Σp⁻ = σ² I`.
    pub fn independent(sigma2: f64) -> Self {
        let mut sigma_p = [[0.0; PATCH_LEN]; PATCH_LEN];
        for (i, row) in sigma_p.iter_mut().enumerate() {
            row[i] = sigma2;
        }
        Self::from_covariance(sigma_p, 0)
    }

    /// Pools the patches of several fields into one covariance estimate.
    pub fn pooled<'a>(fields: impl IntoIterator<Item = &'a FieldSample>) -> Result<Self> {
        let mut patches = Vec::new();
        for f in fields {
            patches.extend(extract_patches(f)?);
        }
        let cov = patch_covariance(&patches)?;
        Ok(Self::from_covariance(cov, patches.len()))
    }
}

pub fn patch_stats(field: &FieldSample) -> Result<PatchStats> {
    let patches = extract_patches(field)?;
    let cov = patch_covariance(&patches)?;
    Ok(PatchStats::from_covariance(cov, patches.len()))
}
