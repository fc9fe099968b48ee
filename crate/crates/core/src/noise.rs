//! Diagonal trace-class noise for both equations.
//!
//! Mode variances follow power laws in the eigenvalue,
//! `σ^A_jk = ζ_A λ^{−p_A}` on the velocity modes and `σ^B_jk = ζ_B λ^{−p_B}`
//! on the phase modes. Increments are generated from a counter-based
//! stream: the standard normal behind `(seed, stream_id, equation, step,
//! mode)` is a pure function of those keys, and modes are enumerated in
//! square shells so that the draws of mode `(j, k)` do not depend on N.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::{shell_index, Domain, Parity, NORM};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub zeta_a: f64,
    pub p_a: f64,
    pub zeta_b: f64,
    pub p_b: f64,
    pub seed: u64,
    pub stream_id: u64,
    /// Permits simulation when the trace hypothesis fails.
    #[serde(default)]
    pub override_hypothesis: bool,
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self {
            zeta_a: 0.0,
            p_a: 2.0,
            zeta_b: 0.0,
            p_b: 2.0,
            seed: 0,
            stream_id: 0,
            override_hypothesis: false,
        }
    }

    pub fn power_law(zeta_a: f64, p_a: f64, zeta_b: f64, p_b: f64, seed: u64) -> Self {
        Self {
            zeta_a,
            p_a,
            zeta_b,
            p_b,
            seed,
            stream_id: 0,
            override_hypothesis: false,
        }
    }

    pub fn with_stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }

    #[inline]
    pub fn sigma_a(&self, lambda: f64) -> f64 {
        if self.zeta_a == 0.0 {
            0.0
        } else {
            self.zeta_a * lambda.powf(-self.p_a)
        }
    }

    #[inline]
    pub fn sigma_b(&self, lambda: f64) -> f64 {
        if self.zeta_b == 0.0 {
            0.0
        } else {
            self.zeta_b * lambda.powf(-self.p_b)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zeta_a == 0.0 && self.zeta_b == 0.0
    }

    /// `Tr[C_A*C_A] < ∞` and `Tr[C_B*Δ²C_B] < ∞` for the power laws on the
    /// square, where `#{λ ≤ L} ~ πL/4`.
    pub fn hypothesis_holds(&self) -> bool {
        (self.zeta_a == 0.0 || self.p_a > 0.5) && (self.zeta_b == 0.0 || self.p_b > 1.5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta_a >= 0.0 && self.zeta_b >= 0.0) {
            return Err(Error::InvalidParameter("noise amplitudes must be >= 0".into()));
        }
        if !(self.p_a.is_finite() && self.p_b.is_finite()) {
            return Err(Error::InvalidParameter("decay exponents must be finite".into()));
        }
        if !self.hypothesis_holds() && !self.override_hypothesis {
            return Err(Error::TraceClass(format!(
                "need p_A > 1/2 and p_B > 3/2 (got p_A = {}, p_B = {})",
                self.p_a, self.p_b
            )));
        }
        Ok(())
    }

    /// Standard normals for one equation and one step, tensor layout.
    fn normals(&self, domain: &Domain, equation: u64, step: u64, out: &mut [f64]) {
        let n = domain.n();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id.wrapping_mul(2).wrapping_add(equation));
        rng.set_word_pos(u128::from(step) << 40);
        let unit = Normal::standard();
        let mut shell = vec![0.0; n * n];
        for z in shell.iter_mut() {
            let bits = rng.next_u64();
            let u = ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            *z = unit.inverse_cdf(u);
        }
        for j in 1..=n {
            for k in 1..=n {
                out[domain.index(j, k)] = shell[shell_index(j, k)];
            }
        }
    }

    /// `(C_A dW, C_B dZ)` for step `step` with time step `dt`, in coefficient
    /// form; independent `N(0, σ² dt)` entries.
    pub fn increments(&self, domain: &Domain, dt: f64, step: u64) -> Result<Increments> {
        self.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be > 0".into()));
        }
        let mut inc = Increments::zeros(domain.mode_count());
        self.accumulate(domain, dt, step, &mut inc);
        Ok(inc)
    }

    fn accumulate(&self, domain: &Domain, dt: f64, step: u64, inc: &mut Increments) {
        let sq = dt.sqrt();
        let mut z = vec![0.0; domain.mode_count()];
        if self.zeta_a != 0.0 {
            self.normals(domain, 0, step, &mut z);
            for ((d, z), l) in inc.dw.iter_mut().zip(&z).zip(domain.eigenvalues()) {
                *d += self.sigma_a(*l) * sq * z;
            }
        }
        if self.zeta_b != 0.0 {
            self.normals(domain, 1, step, &mut z);
            for ((d, z), l) in inc.dz.iter_mut().zip(&z).zip(domain.eigenvalues()) {
                *d += self.sigma_b(*l) * sq * z;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Increments {
    /// Velocity-mode increments.
    pub dw: Vec<f64>,
    /// Phase-mode increments.
    pub dz: Vec<f64>,
}

impl Increments {
    pub fn zeros(len: usize) -> Self {
        Self {
            dw: vec![0.0; len],
            dz: vec![0.0; len],
        }
    }
}

/// A Brownian path sampled on a fine grid of width `base_dt`; one step of
/// the path covers `substeps` fine steps and sums their increments. Paths
/// with equal `base_dt` share the fine increments, whatever `substeps` is.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    pub spec: NoiseSpec,
    pub base_dt: f64,
    pub substeps: u64,
}

impl NoisePath {
    pub fn new(spec: NoiseSpec, dt: f64) -> Self {
        Self {
            spec,
            base_dt: dt,
            substeps: 1,
        }
    }

    pub fn coarsened(spec: NoiseSpec, base_dt: f64, substeps: u64) -> Self {
        Self {
            spec,
            base_dt,
            substeps,
        }
    }

    pub fn dt(&self) -> f64 {
        self.base_dt * self.substeps as f64
    }

    pub fn increments(&self, domain: &Domain, step: u64) -> Result<Increments> {
        self.spec.validate()?;
        if !(self.base_dt > 0.0) || self.substeps == 0 {
            return Err(Error::InvalidParameter("noise path needs dt > 0".into()));
        }
        let mut inc = Increments::zeros(domain.mode_count());
        if self.spec.is_zero() {
            return Ok(inc);
        }
        for r in 0..self.substeps {
            self.spec
                .accumulate(domain, self.base_dt, step * self.substeps + r, &mut inc);
        }
        Ok(inc)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    /// `Σ (σ^A)² / (1 + α²λ)`.
    pub tr_a_weighted: f64,
    /// `Σ (σ^B)²`.
    pub tr_b: f64,
    /// `Σ (σ^B)² λ²`.
    pub tr_b_delta2: f64,
}

fn leading(domain: &Domain, n: usize) -> Result<&[crate::basis::ScalarMode]> {
    let modes = domain.modes();
    if n > modes.len() {
        return Err(Error::InvalidParameter(format!(
            "{n} modes requested, domain has {}",
            modes.len()
        )));
    }
    Ok(&modes[..n])
}

/// Traces over the first `n` modes in eigenvalue order.
pub fn trace_diagnostics(
    spec: &NoiseSpec,
    domain: &Domain,
    n: usize,
    alpha: f64,
) -> Result<TraceDiagnostics> {
    let mut d = TraceDiagnostics::default();
    for m in leading(domain, n)? {
        let l = m.eigenvalue;
        let sa = spec.sigma_a(l);
        let sb = spec.sigma_b(l);
        d.tr_a_weighted += sa * sa / (1.0 + alpha * alpha * l);
        d.tr_b += sb * sb;
        d.tr_b_delta2 += sb * sb * l * l;
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SobolevSums {
    /// `Σ |C_B η|∞²`.
    pub sum_inf: f64,
    /// `Σ ‖C_B η‖²_{W^{2,2}}`.
    pub sum_w22: f64,
    /// `Σ |∇C_B η|₃²`.
    pub sum_grad3: f64,
}

/// Partial sums over the first `n` modes of the phase-noise images.
///
/// The sup and `W^{2,2}` terms are closed form (`(2/π)σ` and
/// `σ²(1 + λ + λ²)`); the `L³` gradient norm is computed by quadrature.
pub fn sobolev_sums(spec: &NoiseSpec, domain: &Domain, n: usize) -> Result<SobolevSums> {
    let mut s = SobolevSums::default();
    let count = domain.mode_count();
    for m in leading(domain, n)? {
        let l = m.eigenvalue;
        let sb = spec.sigma_b(l);
        if sb == 0.0 {
            continue;
        }
        s.sum_inf += sb * sb * NORM * NORM;
        s.sum_w22 += sb * sb * (1.0 + l + l * l);

        let mut ax = vec![0.0; count];
        let mut ay = vec![0.0; count];
        let idx = domain.index(m.j, m.k);
        ax[idx] = NORM * m.j as f64;
        ay[idx] = NORM * m.k as f64;
        let gx = domain.synthesize(&ax, Parity::Cos, Parity::Sin);
        let gy = domain.synthesize(&ay, Parity::Sin, Parity::Cos);
        let cube: Vec<f64> = gx
            .iter()
            .zip(&gy)
            .map(|(a, b)| (a * a + b * b).powf(1.5))
            .collect();
        let l3 = domain.integrate_even(&cube).cbrt();
        s.sum_grad3 += sb * sb * l3 * l3;
    }
    Ok(s)
}
