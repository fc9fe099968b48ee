//! Fluid operators in the divergence-free basis: Leray projection, Stokes
//! operator, Helmholtz filter and the Camassa-Holm form
//! `B̃(w, u) = −P[w × (∇ × u)]`.
//!
//! In 2D the curl is the scalar `ω = ∂ₓu₂ − ∂ᵧu₁` and the cross product
//! with the out-of-plane vorticity is
//!
//! ```text
//! w × ω = (w₂ ω, −w₁ ω)
//! ```
//!
//! which is pointwise orthogonal to `w`.

use serde::{Deserialize, Serialize};

use crate::basis::{Domain, Grid};
use crate::error::{Error, Result};
use crate::field::{curl_grid, VelocityField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    pub alpha: f64,
    pub nu: f64,
}

impl Default for AlphaParams {
    fn default() -> Self {
        Self { alpha: 1.0, nu: 1.0 }
    }
}

impl AlphaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be > 0".into()));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter("nu must be > 0".into()));
        }
        Ok(())
    }

    /// `1 + α²λ`.
    #[inline]
    pub fn helmholtz_symbol(&self, lambda: f64) -> f64 {
        1.0 + self.alpha * self.alpha * lambda
    }
}

/// Coefficients `⟨g, e_jk⟩` of a sampled vector field.
pub fn leray_project(domain: &Domain, g: [&Grid; 2]) -> Result<VelocityField> {
    domain.from_grid_vec(g)
}

fn diagonal(domain: &Domain, u: &VelocityField, symbol: impl Fn(f64) -> f64) -> VelocityField {
    VelocityField::from_coeffs(
        u.n(),
        u.coeffs()
            .iter()
            .zip(domain.eigenvalues())
            .map(|(c, &l)| symbol(l) * c)
            .collect(),
    )
}

/// `Au`.
pub fn stokes_apply(domain: &Domain, u: &VelocityField) -> VelocityField {
    diagonal(domain, u, |l| l)
}

/// `(I + α²A)u`.
pub fn helmholtz_apply(domain: &Domain, u: &VelocityField, alpha: f64) -> VelocityField {
    diagonal(domain, u, |l| 1.0 + alpha * alpha * l)
}

/// `(I + α²A)⁻¹u`.
pub fn helmholtz_inverse(domain: &Domain, u: &VelocityField, alpha: f64) -> VelocityField {
    diagonal(domain, u, |l| 1.0 / (1.0 + alpha * alpha * l))
}

/// Grid values of `w × (∇ × u)`.
pub fn cross_curl_grid(domain: &Domain, w: &VelocityField, u: &VelocityField) -> [Grid; 2] {
    let [w1, w2] = domain.to_grid_vec(w);
    let omega = curl_grid(domain, u);
    [w2.mul(&omega), w1.mul(&omega).scale(-1.0)]
}

/// `B̃(w, u) = −P[w × (∇ × u)]`, with the curl taken spectrally.
pub fn b_tilde(domain: &Domain, w: &VelocityField, u: &VelocityField) -> Result<VelocityField> {
    let [c1, c2] = cross_curl_grid(domain, w, u);
    Ok(leray_project(domain, [&c1, &c2])?.scale(-1.0))
}
