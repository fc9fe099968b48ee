//! Scalar and velocity fields in the analytic eigenbases, with the
//! products, norms and inner products used across the crate.

use serde::{Deserialize, Serialize};

use crate::basis::{Domain, Grid, Parity, AREA, NORM};
use crate::error::{Error, Result};

/// Coefficients of a scalar field in the Dirichlet sine basis.
///
/// With `offset` set the represented function is `φ = −1 + Σ c_jk η_jk`,
/// so that `φ = −1` and `Δφ = 0` hold on ∂Q by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    n: usize,
    coeffs: Vec<f64>,
    offset: bool,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![0.0; n * n],
            offset: false,
        }
    }

    /// The phase field `φ ≡ −1`.
    pub fn phase(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![0.0; n * n],
            offset: true,
        }
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<f64>, offset: bool) -> Self {
        assert_eq!(coeffs.len(), n * n, "coefficient count must be N²");
        Self { n, coeffs, offset }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_offset(&self) -> bool {
        self.offset
    }

    pub fn with_offset(mut self, offset: bool) -> Self {
        self.offset = offset;
        self
    }

    /// Linear combination `self + s·other` of the sine parts; the offset flag
    /// of `self` is kept.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> ScalarField {
        assert_eq!(self.n, other.n);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + s * b)
            .collect();
        ScalarField {
            n: self.n,
            coeffs,
            offset: self.offset,
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
            offset: self.offset,
        }
    }

    /// Sine-part difference, a plain field.
    pub fn diff(&self, other: &ScalarField) -> ScalarField {
        self.axpy(-1.0, other).with_offset(false)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Coefficients over the divergence-free modes `e_jk`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    n: usize,
    coeffs: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![0.0; n * n],
        }
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), n * n, "coefficient count must be N²");
        Self { n, coeffs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn axpy(&self, s: f64, other: &VelocityField) -> VelocityField {
        assert_eq!(self.n, other.n);
        VelocityField {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> VelocityField {
        VelocityField {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub l2: f64,
    pub grad_l2: f64,
    pub lap_l2: f64,
    pub l4: f64,
    pub l6: f64,
    pub linf: f64,
    /// `|φ∇φ|₂`; zero for velocity fields.
    pub phi_grad_phi_l2: f64,
}

fn check_n(domain: &Domain, n: usize) -> Result<()> {
    if n != domain.n() {
        return Err(Error::Shape {
            expected: domain.n(),
            found: n,
        });
    }
    Ok(())
}

/// Dealiased product: the L² projection of `f·g` onto the band.
pub fn product(domain: &Domain, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    check_n(domain, f.n)?;
    check_n(domain, g.n)?;
    domain.project(&domain.to_grid(f).mul(&domain.to_grid(g)))
}

/// `∫_Q f g`, offsets included.
pub fn inner(domain: &Domain, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    check_n(domain, f.n)?;
    check_n(domain, g.n)?;
    let ints = domain.mode_integrals();
    let mean = |c: &[f64]| -> f64 { c.iter().zip(ints).map(|(a, b)| a * b).sum() };
    let mut total: f64 = f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| a * b).sum();
    if f.offset {
        total -= mean(&g.coeffs);
    }
    if g.offset {
        total -= mean(&f.coeffs);
    }
    if f.offset && g.offset {
        total += AREA;
    }
    Ok(total)
}

pub fn inner_vec(u: &VelocityField, v: &VelocityField) -> Result<f64> {
    if u.n != v.n {
        return Err(Error::Shape {
            expected: u.n,
            found: v.n,
        });
    }
    Ok(u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a * b).sum())
}

fn weighted_sq(domain: &Domain, c: &[f64], power: i32) -> f64 {
    c.iter()
        .zip(domain.eigenvalues())
        .map(|(x, l)| l.powi(power) * x * x)
        .sum()
}

pub fn norms(domain: &Domain, f: &ScalarField) -> Result<NormBundle> {
    check_n(domain, f.n)?;
    let g = domain.to_grid(f);
    let sq = g.mul(&g);
    let [gx, gy] = gradient(domain, f)?;
    let grad_sq = gx.mul(&gx).add(&gy.mul(&gy));
    Ok(NormBundle {
        l2: inner(domain, f, f)?.max(0.0).sqrt(),
        grad_l2: weighted_sq(domain, &f.coeffs, 1).sqrt(),
        lap_l2: weighted_sq(domain, &f.coeffs, 2).sqrt(),
        l4: domain.integrate(&sq.mul(&sq))?.max(0.0).powf(0.25),
        l6: domain.integrate(&sq.mul(&sq).mul(&sq))?.max(0.0).powf(1.0 / 6.0),
        linf: g.physical_max_abs(),
        phi_grad_phi_l2: domain.integrate(&sq.mul(&grad_sq))?.max(0.0).sqrt(),
    })
}

pub fn norms_vec(domain: &Domain, u: &VelocityField) -> Result<NormBundle> {
    check_n(domain, u.n)?;
    let [u1, u2] = domain.to_grid_vec(u);
    let sq = u1.mul(&u1).add(&u2.mul(&u2));
    Ok(NormBundle {
        l2: weighted_sq(domain, &u.coeffs, 0).sqrt(),
        grad_l2: weighted_sq(domain, &u.coeffs, 1).sqrt(),
        lap_l2: weighted_sq(domain, &u.coeffs, 2).sqrt(),
        l4: domain.integrate(&sq.mul(&sq))?.max(0.0).powf(0.25),
        l6: domain.integrate(&sq.mul(&sq).mul(&sq))?.max(0.0).powf(1.0 / 6.0),
        linf: sq.physical_max_abs().sqrt(),
        phi_grad_phi_l2: 0.0,
    })
}

/// `(∂ₓf, ∂ᵧf)` sampled on the grid.
pub fn gradient(domain: &Domain, f: &ScalarField) -> Result<[Grid; 2]> {
    check_n(domain, f.n)?;
    Ok(domain.gradient_grid(&f.coeffs))
}

/// `Δf` on the grid; the offset is harmonic and drops out.
pub fn laplacian_grid(domain: &Domain, f: &ScalarField) -> Grid {
    let c: Vec<f64> = f
        .coeffs
        .iter()
        .zip(domain.eigenvalues())
        .map(|(c, l)| -l * c)
        .collect();
    domain.sine_grid(&c)
}

/// Scalar vorticity `∂ₓu₂ − ∂ᵧu₁` on the grid. For `u = Σ u_jk e_jk` this is
/// `Σ u_jk √λ_jk η_jk`.
pub fn curl_grid(domain: &Domain, u: &VelocityField) -> Grid {
    let c: Vec<f64> = u
        .coeffs
        .iter()
        .zip(domain.eigenvalues())
        .map(|(c, l)| l.sqrt() * c)
        .collect();
    domain.sine_grid(&c)
}

/// Largest `|∂ₓu₁ + ∂ᵧu₂|` over the physical nodes, each derivative taken
/// spectrally from the component series.
pub fn divergence_residual(domain: &Domain, u: &VelocityField) -> Result<f64> {
    check_n(domain, u.n)?;
    let n = domain.n();
    let lam = domain.eigenvalues();
    let mut dx = vec![0.0; n * n];
    let mut dy = vec![0.0; n * n];
    for j in 1..=n {
        for k in 1..=n {
            let idx = domain.index(j, k);
            let s = NORM * u.coeffs[idx] / lam[idx].sqrt();
            // u₁ = s k sin(jx) cos(ky), u₂ = −s j cos(jx) sin(ky)
            dx[idx] = s * (k * j) as f64;
            dy[idx] = -s * (j * k) as f64;
        }
    }
    let a = domain.synthesize(&dx, Parity::Cos, Parity::Cos);
    let b = domain.synthesize(&dy, Parity::Cos, Parity::Cos);
    let side = domain.grid_side();
    let half = domain.m();
    let mut worst = 0.0_f64;
    for i in 0..=half {
        for l in 0..=half {
            let idx = i * side + l;
            worst = worst.max((a[idx] + b[idx]).abs());
        }
    }
    Ok(worst)
}

/// `G(φ) = |Δφ|₂² + |∇φ|₂² + |φ|₂²`, the H²-equivalent functional.
pub fn g_functional(domain: &Domain, f: &ScalarField) -> Result<f64> {
    check_n(domain, f.n)?;
    Ok(weighted_sq(domain, &f.coeffs, 2)
        + weighted_sq(domain, &f.coeffs, 1)
        + inner(domain, f, f)?)
}

/// Spectral H² norm `(Σ (1+λ)² c²)^{1/2}` of a plain field; for offset
/// fields the equivalent `G(φ)^{1/2}`, which accounts for the constant.
pub fn h2_norm(domain: &Domain, f: &ScalarField) -> Result<f64> {
    check_n(domain, f.n)?;
    if f.offset {
        return Ok(g_functional(domain, f)?.sqrt());
    }
    Ok(f
        .coeffs
        .iter()
        .zip(domain.eigenvalues())
        .map(|(c, l)| (1.0 + l).powi(2) * c * c)
        .sum::<f64>()
        .sqrt())
}

/// `‖u‖_V² = Σ (1+λ) u²`.
pub fn v_norm(domain: &Domain, u: &VelocityField) -> f64 {
    u.coeffs
        .iter()
        .zip(domain.eigenvalues())
        .map(|(c, l)| (1.0 + l) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// `‖u‖_{D(A)}² = Σ (1+λ²) u²`.
pub fn da_norm(domain: &Domain, u: &VelocityField) -> f64 {
    u.coeffs
        .iter()
        .zip(domain.eigenvalues())
        .map(|(c, l)| (1.0 + l * l) * c * c)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dom() -> Domain {
        Domain::with_modes(4).unwrap()
    }

    fn eta(d: &Domain, j: usize, k: usize) -> ScalarField {
        d.scalar_eigenpair(j, k).unwrap().1
    }

    #[test]
    fn norms_of_single_mode() {
        let d = dom();
        let nb = norms(&d, &eta(&d, 1, 1)).unwrap();
        assert!((nb.l2 - 1.0).abs() < 1e-14);
        assert!((nb.grad_l2 - 2f64.sqrt()).abs() < 1e-14);
        assert!((nb.lap_l2 - 2.0).abs() < 1e-14);
        assert!((nb.linf - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn norms_of_zero() {
        let d = dom();
        let nb = norms(&d, &ScalarField::zeros(4)).unwrap();
        assert_eq!(nb, NormBundle::default());
    }

    #[test]
    fn constant_phase_has_area_norm() {
        let d = dom();
        let nb = norms(&d, &ScalarField::phase(4)).unwrap();
        assert!((nb.l2 - PI).abs() < 1e-13);
        assert!((nb.l4.powi(4) - AREA).abs() < 1e-12);
        assert_eq!(nb.grad_l2, 0.0);
    }

    #[test]
    fn inner_basics() {
        let d = dom();
        assert!((inner(&d, &eta(&d, 1, 1), &eta(&d, 1, 1)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(inner(&d, &eta(&d, 1, 1), &eta(&d, 2, 2)).unwrap(), 0.0);
        assert!(inner(&d, &eta(&d, 1, 1), &ScalarField::zeros(3)).is_err());
    }

    #[test]
    fn inner_with_offset_matches_quadrature() {
        let d = dom();
        let mut phi = ScalarField::phase(4);
        phi.coeffs_mut()[0] = 0.3;
        phi.coeffs_mut()[5] = -0.2;
        let g = d.to_grid(&phi);
        let q = d.integrate(&g.mul(&g)).unwrap();
        assert!((inner(&d, &phi, &phi).unwrap() - q).abs() < 1e-12);
    }

    #[test]
    fn product_with_zero() {
        let d = dom();
        let p = product(&d, &ScalarField::zeros(4), &eta(&d, 1, 2)).unwrap();
        assert!(p.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn gradient_vanishes_at_center_for_first_mode() {
        let d = dom();
        let [gx, gy] = gradient(&d, &eta(&d, 1, 1)).unwrap();
        let mid = d.m() / 2;
        assert!(gx.at(mid, mid).abs() < 1e-15);
        assert!(gy.at(mid, mid).abs() < 1e-15);
    }

    #[test]
    fn curl_of_velocity_mode_is_scaled_eta() {
        let d = dom();
        let (lambda, e) = d.velocity_eigenpair(2, 1).unwrap();
        let w = curl_grid(&d, &e);
        let expect = d.to_grid(&eta(&d, 2, 1)).scale(lambda.sqrt());
        for (a, b) in w.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn g_functional_single_mode() {
        let d = dom();
        let f = eta(&d, 1, 1);
        let g = g_functional(&d, &f).unwrap();
        let h2 = h2_norm(&d, &f).unwrap();
        assert!((g / (h2 * h2) - 7.0 / 9.0).abs() < 1e-14);
    }
}
