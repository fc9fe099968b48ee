//! Penalized bending energy with ε = k = 1:
//!
//! ```text
//! E(φ) = ½|f(φ)|₂² + ½M₁(A(φ) − a)² + ½M₂(B(φ) − b)²
//! f(φ) = −Δφ + φ³ − φ
//! A(φ) = ∫φ,   B(φ) = ∫ ½|∇φ|² + ¼(φ² − 1)²
//! ```
//!
//! Every integral is evaluated by exact quadrature of the band-limited
//! phase field, so the discrete energy is the continuous one restricted to
//! the band and its gradient in coefficient space is the in-band chemical
//! potential.

use serde::{Deserialize, Serialize};

use crate::basis::{Domain, Grid, AREA};
use crate::error::{Error, Result};
use crate::field::{laplacian_grid, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Volume penalty M₁.
    pub m1: f64,
    /// Area penalty M₂.
    pub m2: f64,
    /// Target volume.
    pub a: f64,
    /// Target surface.
    pub b: f64,
    /// Mobility γ.
    pub gamma: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            a: -AREA,
            b: 0.0,
            gamma: 1.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m1 >= 0.0 && self.m2 >= 0.0) {
            return Err(Error::InvalidParameter("penalties must be >= 0".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter("gamma must be > 0".into()));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidParameter("targets must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub volume_penalty: f64,
    pub area_penalty: f64,
    pub total: f64,
    pub a_phi: f64,
    pub b_phi: f64,
}

/// Grid quantities of a phase field shared by the energy, its variations
/// and the drift.
#[derive(Clone, Debug)]
pub struct PhaseGrids {
    pub phi: Grid,
    pub phi_x: Grid,
    pub phi_y: Grid,
    pub lap: Grid,
    /// `f(φ)`.
    pub f: Grid,
    /// `3φ² − 1`.
    pub q: Grid,
    pub a_phi: f64,
    pub b_phi: f64,
}

impl PhaseGrids {
    pub fn new(domain: &Domain, phi: &ScalarField) -> Result<Self> {
        if phi.n() != domain.n() {
            return Err(Error::Shape {
                expected: domain.n(),
                found: phi.n(),
            });
        }
        let g = domain.to_grid(phi);
        let [phi_x, phi_y] = domain.gradient_grid(phi.coeffs());
        let lap = laplacian_grid(domain, phi);
        let sq = g.mul(&g);
        let cubic = sq.mul(&g).sub(&g);
        let f = cubic.sub(&lap);
        let q = sq.scale(3.0).add_scalar(-1.0);

        let mut a_phi: f64 = phi
            .coeffs()
            .iter()
            .zip(domain.mode_integrals())
            .map(|(c, i)| c * i)
            .sum();
        if phi.is_offset() {
            a_phi -= AREA;
        }
        let grad_sq: f64 = phi
            .coeffs()
            .iter()
            .zip(domain.eigenvalues())
            .map(|(c, l)| l * c * c)
            .sum();
        let well = sq.add_scalar(-1.0);
        let b_phi = 0.5 * grad_sq + 0.25 * domain.integrate(&well.mul(&well))?;
        Ok(Self {
            phi: g,
            phi_x,
            phi_y,
            lap,
            f,
            q,
            a_phi,
            b_phi,
        })
    }

    pub fn breakdown(&self, domain: &Domain, p: &EnergyParams) -> Result<EnergyBreakdown> {
        let bending = 0.5 * domain.integrate(&self.f.mul(&self.f))?;
        let volume_penalty = 0.5 * p.m1 * (self.a_phi - p.a).powi(2);
        let area_penalty = 0.5 * p.m2 * (self.b_phi - p.b).powi(2);
        Ok(EnergyBreakdown {
            bending,
            volume_penalty,
            area_penalty,
            total: bending + volume_penalty + area_penalty,
            a_phi: self.a_phi,
            b_phi: self.b_phi,
        })
    }

    /// In-band chemical potential from the weak form
    /// `⟨δE/δφ, η⟩ = ⟨f, f'(φ)η⟩ + M₁(A−a)A(η) + M₂(B−b)⟨f, η⟩`.
    pub fn chemical_potential(&self, domain: &Domain, p: &EnergyParams) -> Result<ScalarField> {
        let pf = domain.project(&self.f)?;
        let pqf = domain.project(&self.q.mul(&self.f))?;
        let shift = p.m2 * (self.b_phi - p.b);
        let vol = p.m1 * (self.a_phi - p.a);
        let coeffs = pf
            .coeffs()
            .iter()
            .zip(pqf.coeffs())
            .zip(domain.eigenvalues().iter().zip(domain.mode_integrals()))
            .map(|((f, qf), (l, i))| (l + shift) * f + qf + vol * i)
            .collect();
        Ok(ScalarField::from_coeffs(domain.n(), coeffs, false))
    }

    /// `f'(φ)ψ = −Δψ + (3φ² − 1)ψ` on the grid.
    pub fn linearized(&self, domain: &Domain, psi: &ScalarField) -> Grid {
        let g = domain.to_grid(psi);
        self.q.mul(&g).sub(&laplacian_grid(domain, psi))
    }
}

fn require_offset(phi: &ScalarField) -> Result<()> {
    if !phi.is_offset() {
        return Err(Error::InvalidParameter(
            "phase field must carry the -1 boundary offset".into(),
        ));
    }
    Ok(())
}

fn require_plain(psi: &ScalarField) -> Result<()> {
    if psi.is_offset() {
        return Err(Error::InvalidParameter(
            "variation directions must be plain fields".into(),
        ));
    }
    Ok(())
}

/// In-band projection of `f(φ)`.
pub fn f_of_phi(domain: &Domain, phi: &ScalarField) -> Result<ScalarField> {
    require_offset(phi)?;
    domain.project(&PhaseGrids::new(domain, phi)?.f)
}

pub fn energy(domain: &Domain, phi: &ScalarField, p: &EnergyParams) -> Result<EnergyBreakdown> {
    require_offset(phi)?;
    PhaseGrids::new(domain, phi)?.breakdown(domain, p)
}

pub fn chemical_potential(
    domain: &Domain,
    phi: &ScalarField,
    p: &EnergyParams,
) -> Result<ScalarField> {
    require_offset(phi)?;
    PhaseGrids::new(domain, phi)?.chemical_potential(domain, p)
}

/// `δ²E(φ)(ψ, ρ)`.
pub fn second_variation(
    domain: &Domain,
    phi: &ScalarField,
    psi: &ScalarField,
    rho: &ScalarField,
    p: &EnergyParams,
) -> Result<f64> {
    require_offset(phi)?;
    require_plain(psi)?;
    require_plain(rho)?;
    let pg = PhaseGrids::new(domain, phi)?;
    second_variation_with(domain, &pg, psi, rho, p)
}

pub fn second_variation_with(
    domain: &Domain,
    pg: &PhaseGrids,
    psi: &ScalarField,
    rho: &ScalarField,
    p: &EnergyParams,
) -> Result<f64> {
    let lpsi = pg.linearized(domain, psi);
    let lrho = pg.linearized(domain, rho);
    let gpsi = domain.to_grid(psi);
    let grho = domain.to_grid(rho);
    let ints = domain.mode_integrals();
    let area = |c: &[f64]| -> f64 { c.iter().zip(ints).map(|(a, b)| a * b).sum() };

    let t1 = domain.integrate(&lpsi.mul(&lrho))?;
    let t2 = 6.0 * domain.integrate(&pg.f.mul(&pg.phi).mul(&gpsi.mul(&grho)))?;
    let t3 = p.m1 * area(psi.coeffs()) * area(rho.coeffs());
    let t4 = p.m2 * domain.integrate(&pg.f.mul(&grho))? * domain.integrate(&pg.f.mul(&gpsi))?;
    let t5 = p.m2 * (pg.b_phi - p.b) * domain.integrate(&lrho.mul(&gpsi))?;
    Ok(t1 + t2 + t3 + t4 + t5)
}

/// Splits the chemical potential as `M(φ) + N(φ)` with
/// `M(φ) = Δ²φ − Δφ + φ`, diagonal `(λ² + λ + 1)` on the sine part plus the
/// projected constant `−1`.
pub fn mn_split(
    domain: &Domain,
    phi: &ScalarField,
    p: &EnergyParams,
) -> Result<(ScalarField, ScalarField)> {
    require_offset(phi)?;
    let mu = chemical_potential(domain, phi, p)?;
    let m_phi = m_operator(domain, phi);
    let n_phi = mu.axpy(-1.0, &m_phi);
    Ok((m_phi, n_phi))
}

/// In-band coefficients of `M(φ)`.
pub fn m_operator(domain: &Domain, phi: &ScalarField) -> ScalarField {
    let offset = if phi.is_offset() { 1.0 } else { 0.0 };
    let coeffs = phi
        .coeffs()
        .iter()
        .zip(domain.eigenvalues().iter().zip(domain.mode_integrals()))
        .map(|(c, (l, i))| (l * l + l + 1.0) * c - offset * i)
        .collect();
    ScalarField::from_coeffs(domain.n(), coeffs, false)
}

/// Diagonal symbol `λ² + λ + 1` of the stiff linear part.
pub fn m_symbol(lambda: f64) -> f64 {
    lambda * lambda + lambda + 1.0
}
