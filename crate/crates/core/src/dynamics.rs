//! Galerkin right-hand side and Euler–Maruyama time stepping.
//!
//! The state carries `v = (I + α²A)w` in velocity modes and the sine part of
//! `φ = −1 + ψ`. With `μ = π_n δE/δφ` the drift is
//!
//! ```text
//! dv = −νAv + P_n[w × ω] + P_n[μ∇φ]
//! dψ = −π_n(w·∇φ) − γμ
//! ```
//!
//! where `ω = ∇ × v` (`u = w + α²Aw` is exactly `v`). All products are
//! formed from the same grid samples, so the coupling terms cancel exactly
//! in the energy balance.

use serde::{Deserialize, Serialize};

use crate::basis::Domain;
use crate::energy::{m_symbol, EnergyBreakdown, EnergyParams, PhaseGrids};
use crate::error::{Error, Result};
use crate::field::{curl_grid, ScalarField, VelocityField};
use crate::fluid::AlphaParams;
use crate::ledger::{record_step, BalanceRecord, TraceKernel};
use crate::noise::{Increments, NoisePath};

#[derive(Clone, Debug)]
pub struct Model {
    pub domain: Domain,
    pub alpha: AlphaParams,
    pub energy: EnergyParams,
}

impl Model {
    pub fn new(domain: Domain, alpha: AlphaParams, energy: EnergyParams) -> Result<Self> {
        alpha.validate()?;
        energy.validate()?;
        Ok(Self {
            domain,
            alpha,
            energy,
        })
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    /// `1 + α²λ` per mode.
    pub fn helmholtz(&self) -> Vec<f64> {
        self.domain
            .eigenvalues()
            .iter()
            .map(|&l| self.alpha.helmholtz_symbol(l))
            .collect()
    }

    /// Active-mode mask for a Galerkin truncation `n ≤ N`.
    pub fn mask(&self, galerkin_n: usize) -> Vec<bool> {
        let n = self.n();
        let mut m = vec![false; n * n];
        for j in 1..=galerkin_n.min(n) {
            for k in 1..=galerkin_n.min(n) {
                m[self.domain.index(j, k)] = true;
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// `v = (I + α²A)w` in velocity modes.
    pub v: Vec<f64>,
    /// Sine part of `φ = −1 + ψ`.
    pub phi: Vec<f64>,
    pub t: f64,
    pub step: u64,
}

impl SystemState {
    /// `w ≡ 0`, `φ ≡ −1`.
    pub fn equilibrium(n: usize) -> Self {
        Self {
            v: vec![0.0; n * n],
            phi: vec![0.0; n * n],
            t: 0.0,
            step: 0,
        }
    }

    pub fn n(&self) -> usize {
        (self.v.len() as f64).sqrt().round() as usize
    }

    pub fn phase(&self) -> ScalarField {
        ScalarField::from_coeffs(self.n(), self.phi.clone(), true)
    }

    pub fn v_field(&self) -> VelocityField {
        VelocityField::from_coeffs(self.n(), self.v.clone())
    }

    pub fn w_field(&self, model: &Model) -> VelocityField {
        VelocityField::from_coeffs(self.n(), self.w(model))
    }

    /// `w = v / (1 + α²λ)`.
    pub fn w(&self, model: &Model) -> Vec<f64> {
        self.v
            .iter()
            .zip(model.domain.eigenvalues())
            .map(|(v, &l)| v / model.alpha.helmholtz_symbol(l))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.v.iter().chain(&self.phi).all(|x| x.is_finite())
    }

    /// Zeroes every coefficient outside the mask.
    pub fn masked(mut self, mask: &[bool]) -> Self {
        for (i, &on) in mask.iter().enumerate() {
            if !on {
                self.v[i] = 0.0;
                self.phi[i] = 0.0;
            }
        }
        self
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.v.len() != n * n || self.phi.len() != n * n {
            return Err(Error::Shape {
                expected: n * n,
                found: self.v.len().max(self.phi.len()),
            });
        }
        if !self.is_finite() {
            return Err(Error::NonFinite { step: self.step });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEm,
    ImexEm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    /// Active modes per axis.
    pub galerkin_n: usize,
    /// Blow-up guard on F.
    #[serde(default = "default_f_max")]
    pub f_max: f64,
}

fn default_f_max() -> f64 {
    1e12
}

impl StepperConfig {
    pub fn new(scheme: Scheme, dt: f64, t_final: f64, galerkin_n: usize) -> Self {
        Self {
            scheme,
            dt,
            t_final,
            galerkin_n,
            f_max: default_f_max(),
        }
    }

    /// Number of steps covering `[0, T]`.
    pub fn steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("dt must be > 0".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter("T must be >= 0".into()));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidParameter("dt must not exceed T".into()));
        }
        if self.galerkin_n == 0 || self.galerkin_n > model.n() {
            return Err(Error::InvalidParameter(format!(
                "galerkin_n must lie in 1..={}",
                model.n()
            )));
        }
        if !(self.f_max > 0.0) {
            return Err(Error::InvalidParameter("f_max must be > 0".into()));
        }
        if self.scheme == Scheme::ExplicitEm {
            let lmax = (2 * self.galerkin_n * self.galerkin_n) as f64;
            let stiff = (model.alpha.nu * lmax).max(model.energy.gamma * (lmax + 2.0).powi(2));
            if self.dt * stiff > 2.0 {
                return Err(Error::Stability(format!(
                    "dt·max(νλ, γ(λ+2)²) = {:.3e} exceeds 2; use imex_em or a smaller dt",
                    self.dt * stiff
                )));
            }
        }
        Ok(())
    }
}

/// Everything the drift and the ledger need from one state.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub w: Vec<f64>,
    /// In-band chemical potential, masked.
    pub mu: Vec<f64>,
    /// `P_n[w × ω]`, i.e. `−P_n B̃(w, v)`.
    pub advection: Vec<f64>,
    /// `P_n[μ∇φ]`.
    pub coupling: Vec<f64>,
    /// `π_n(w·∇φ)`.
    pub transport: Vec<f64>,
    pub energy: EnergyBreakdown,
    /// `½(|w|² + α²|∇w|²)` split into its two parts.
    pub kinetic: f64,
    pub grad_kinetic: f64,
    pub phase: PhaseGrids,
}

impl Evaluation {
    /// `F = ½(|w|² + α²|∇w|²) + E(φ)`.
    pub fn f_total(&self) -> f64 {
        self.kinetic + self.grad_kinetic + self.energy.total
    }

    /// `(dv, dψ)` of the Galerkin system.
    pub fn drift(&self, model: &Model, state: &SystemState, mask: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let lam = model.domain.eigenvalues();
        let nu = model.alpha.nu;
        let gamma = model.energy.gamma;
        let n2 = lam.len();
        let mut dv = vec![0.0; n2];
        let mut dphi = vec![0.0; n2];
        for i in 0..n2 {
            if mask[i] {
                dv[i] = -nu * lam[i] * state.v[i] + self.advection[i] + self.coupling[i];
                dphi[i] = -self.transport[i] - gamma * self.mu[i];
            }
        }
        (dv, dphi)
    }
}

fn apply_mask(mut c: Vec<f64>, mask: &[bool]) -> Vec<f64> {
    for (x, &on) in c.iter_mut().zip(mask) {
        if !on {
            *x = 0.0;
        }
    }
    c
}

pub fn evaluate(model: &Model, state: &SystemState, mask: &[bool]) -> Result<Evaluation> {
    let d = &model.domain;
    state.check(d.n())?;
    let w = apply_mask(state.w(model), mask);
    let wf = VelocityField::from_coeffs(d.n(), w.clone());
    let [w1, w2] = d.to_grid_vec(&wf);
    let omega = curl_grid(d, &state.v_field());

    let phase = PhaseGrids::new(d, &state.phase())?;
    let energy = phase.breakdown(d, &model.energy)?;
    let mu = apply_mask(
        phase.chemical_potential(d, &model.energy)?.into_coeffs(),
        mask,
    );
    let mu_grid = d.to_grid(&ScalarField::from_coeffs(d.n(), mu.clone(), false));

    let adv1 = w2.mul(&omega);
    let adv2 = w1.mul(&omega).scale(-1.0);
    let advection = apply_mask(d.from_grid_vec([&adv1, &adv2])?.into_coeffs(), mask);
    let c1 = mu_grid.mul(&phase.phi_x);
    let c2 = mu_grid.mul(&phase.phi_y);
    let coupling = apply_mask(d.from_grid_vec([&c1, &c2])?.into_coeffs(), mask);
    let tr = w1.mul(&phase.phi_x).add(&w2.mul(&phase.phi_y));
    let transport = apply_mask(d.project(&tr)?.into_coeffs(), mask);

    let a2 = model.alpha.alpha * model.alpha.alpha;
    let (mut kinetic, mut grad_kinetic) = (0.0, 0.0);
    for (wi, &l) in w.iter().zip(d.eigenvalues()) {
        kinetic += 0.5 * wi * wi;
        grad_kinetic += 0.5 * a2 * l * wi * wi;
    }
    Ok(Evaluation {
        w,
        mu,
        advection,
        coupling,
        transport,
        energy,
        kinetic,
        grad_kinetic,
        phase,
    })
}

/// Advances one step from a state whose evaluation is already known.
pub fn advance(
    model: &Model,
    state: &SystemState,
    eval: &Evaluation,
    inc: &Increments,
    cfg: &StepperConfig,
    mask: &[bool],
) -> SystemState {
    let lam = model.domain.eigenvalues();
    let dt = cfg.dt;
    let nu = model.alpha.nu;
    let gamma = model.energy.gamma;
    let (dv, dphi) = eval.drift(model, state, mask);
    let n2 = lam.len();
    let mut v = vec![0.0; n2];
    let mut phi = vec![0.0; n2];
    for i in 0..n2 {
        if !mask[i] {
            continue;
        }
        match cfg.scheme {
            Scheme::ExplicitEm => {
                v[i] = state.v[i] + dt * dv[i] + inc.dw[i];
                phi[i] = state.phi[i] + dt * dphi[i] + inc.dz[i];
            }
            Scheme::ImexEm => {
                let stiff_v = nu * lam[i];
                v[i] = (state.v[i] + dt * (dv[i] + stiff_v * state.v[i]) + inc.dw[i])
                    / (1.0 + dt * stiff_v);
                let stiff_phi = gamma * m_symbol(lam[i]);
                phi[i] = (state.phi[i] + dt * (dphi[i] + stiff_phi * state.phi[i]) + inc.dz[i])
                    / (1.0 + dt * stiff_phi);
            }
        }
    }
    SystemState {
        v,
        phi,
        t: state.t + dt,
        step: state.step + 1,
    }
}

/// One step from `state` driven by `noise`.
pub fn step(
    model: &Model,
    state: &SystemState,
    cfg: &StepperConfig,
    noise: &NoisePath,
) -> Result<SystemState> {
    cfg.validate(model)?;
    let mask = model.mask(cfg.galerkin_n);
    let eval = evaluate(model, state, &mask)?;
    let inc = masked_increments(model, noise, state.step, &mask)?;
    let next = advance(model, state, &eval, &inc, cfg, &mask);
    if !next.is_finite() {
        return Err(Error::BlowUp {
            t: next.t,
            reason: "non-finite state".into(),
            last_finite: Box::new(state.clone()),
        });
    }
    Ok(next)
}

pub fn masked_increments(
    model: &Model,
    noise: &NoisePath,
    step: u64,
    mask: &[bool],
) -> Result<Increments> {
    let mut inc = noise.increments(&model.domain, step)?;
    for (i, &on) in mask.iter().enumerate() {
        if !on {
            inc.dw[i] = 0.0;
            inc.dz[i] = 0.0;
        }
    }
    Ok(inc)
}

/// Receives every step of a run.
pub trait Observer {
    fn start(&mut self, _state: &SystemState, _eval: &Evaluation) -> Result<()> {
        Ok(())
    }

    fn observe(&mut self, state: &SystemState, record: &BalanceRecord) -> Result<()>;
}

/// Discards everything.
pub struct NullObserver;

impl Observer for NullObserver {
    fn observe(&mut self, _: &SystemState, _: &BalanceRecord) -> Result<()> {
        Ok(())
    }
}

/// Keeps every record.
#[derive(Default)]
pub struct RecordingObserver {
    pub records: Vec<BalanceRecord>,
}

impl Observer for RecordingObserver {
    fn observe(&mut self, _: &SystemState, record: &BalanceRecord) -> Result<()> {
        self.records.push(*record);
        Ok(())
    }
}

impl<F> Observer for F
where
    F: FnMut(&SystemState, &BalanceRecord) -> Result<()>,
{
    fn observe(&mut self, state: &SystemState, record: &BalanceRecord) -> Result<()> {
        self(state, record)
    }
}

/// Integrates from `initial` over `[t, t + T]`, reporting one balance record
/// per step.
pub fn run(
    model: &Model,
    initial: &SystemState,
    cfg: &StepperConfig,
    noise: &NoisePath,
    observer: &mut dyn Observer,
) -> Result<SystemState> {
    cfg.validate(model)?;
    if (noise.dt() - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(Error::InvalidParameter(format!(
            "noise path step {} does not match dt {}",
            noise.dt(),
            cfg.dt
        )));
    }
    let mask = model.mask(cfg.galerkin_n);
    let mut state = initial.clone().masked(&mask);
    state.check(model.n())?;
    let kernel = TraceKernel::new(model, &noise.spec, &mask);
    let mut eval = evaluate(model, &state, &mask)?;
    observer.start(&state, &eval)?;
    for _ in 0..cfg.steps() {
        let inc = masked_increments(model, noise, state.step, &mask)?;
        let next = advance(model, &state, &eval, &inc, cfg, &mask);
        let blow = |reason: String| Error::BlowUp {
            t: next.t,
            reason,
            last_finite: Box::new(state.clone()),
        };
        if !next.is_finite() {
            return Err(blow("non-finite state".into()));
        }
        let next_eval = evaluate(model, &next, &mask)?;
        let f = next_eval.f_total();
        if !f.is_finite() || f > cfg.f_max {
            return Err(blow(format!("F = {f:e} exceeds guard {:e}", cfg.f_max)));
        }
        let record = record_step(model, &kernel, &state, &eval, &next, &next_eval, &inc, cfg.dt)?;
        observer.observe(&next, &record)?;
        state = next;
        eval = next_eval;
    }
    Ok(state)
}

pub mod presets {
    //! Initial data.

    use std::f64::consts::{PI, SQRT_2};

    use rand_chacha::rand_core::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    use super::SystemState;
    use crate::basis::{shell_index, Domain};
    use crate::error::Result;

    pub fn equilibrium(domain: &Domain) -> SystemState {
        SystemState::equilibrium(domain.n())
    }

    /// Projected `φ = tanh((r₀ − |x − x₀|)/(√2·width))`, at rest.
    pub fn circle_vesicle(
        domain: &Domain,
        center: (f64, f64),
        radius: f64,
        width: f64,
    ) -> Result<SystemState> {
        let g = domain.sample_odd(|x, y| {
            let r = ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt();
            1.0 + ((radius - r) / (SQRT_2 * width)).tanh()
        });
        let psi = domain.project(&g)?;
        Ok(SystemState {
            phi: psi.into_coeffs(),
            ..SystemState::equilibrium(domain.n())
        })
    }

    /// Centred vesicle with `r₀ = π/4`.
    pub fn default_vesicle(domain: &Domain) -> Result<SystemState> {
        circle_vesicle(domain, (PI / 2.0, PI / 2.0), PI / 4.0, 0.3)
    }

    /// Gaussian coefficients `amplitude·z/λ^decay` on both fields, drawn per
    /// mode from a counter stream so that low modes do not depend on N.
    pub fn random(domain: &Domain, seed: u64, amplitude: f64, decay: f64) -> SystemState {
        let n = domain.n();
        let unit = Normal::standard();
        let draws = |stream: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let shell: Vec<f64> = (0..n * n)
                .map(|_| {
                    let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                    unit.inverse_cdf(u)
                })
                .collect();
            let mut out = vec![0.0; n * n];
            for j in 1..=n {
                for k in 1..=n {
                    let idx = domain.index(j, k);
                    let l = domain.eigenvalues()[idx];
                    out[idx] = amplitude * shell[shell_index(j, k)] * l.powf(-decay);
                }
            }
            out
        };
        SystemState {
            v: draws(0),
            phi: draws(1),
            t: 0.0,
            step: 0,
        }
    }
}
