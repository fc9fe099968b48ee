//! Itô energy accounting per step and ensemble statistics.
//!
//! For `F = ½(|w|² + α²|∇w|²) + E(φ)` the Galerkin system satisfies
//!
//! ```text
//! dF = −[ν(|∇w|² + α²|Aw|²) + γ|μ|²] dt
//!      + ½ Σ (σ^A)²/(1 + α²λ) dt + ½ Σ (σ^B_i)² δ²E(φ)(η_i, η_i) dt
//!      + ⟨w, C_A dW⟩ + ⟨μ, C_B dZ⟩
//! ```
//!
//! Every term is evaluated at the pre-step state; the residual of the
//! discrete identity is what is left after one Euler–Maruyama step.

use serde::{Deserialize, Serialize};

use crate::basis::{Domain, Grid, NORM};
use crate::dynamics::{Evaluation, Model, SystemState};
use crate::energy::{second_variation_with, PhaseGrids};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::noise::{Increments, NoiseSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceRecord {
    pub t: f64,
    /// F after the step.
    pub f: f64,
    pub kinetic: f64,
    pub grad_kinetic: f64,
    pub e_bending: f64,
    pub e_volume: f64,
    pub e_area: f64,
    pub dissipation: f64,
    pub trace_input: f64,
    pub martingale_increment: f64,
    pub residual: f64,
    /// F after minus F before.
    pub delta_f: f64,
    pub dt: f64,
}

impl BalanceRecord {
    /// F at the start of the step.
    pub fn f_before(&self) -> f64 {
        self.f - self.delta_f
    }
}

/// State-independent parts of the phase-noise trace correction.
///
/// Since `f'(φ)η_i = (λ_i + q)η_i` pointwise, the trace sum collapses to
/// quadratures against `S_p = Σ σ_i² λ_i^p η_i²`, p = 0, 1, 2.
#[derive(Clone, Debug)]
pub struct TraceKernel {
    /// `½ Σ (σ^A)²/(1 + α²λ)` over active modes.
    half_tr_a: f64,
    /// Masked `(σ^B)²`, tensor layout.
    sigma2: Vec<f64>,
    s: Option<[Grid; 3]>,
    /// `Σ σ² A(η)²`.
    area_sum: f64,
}

impl TraceKernel {
    pub fn new(model: &Model, spec: &NoiseSpec, mask: &[bool]) -> Self {
        let d = &model.domain;
        let lam = d.eigenvalues();
        let mut half_tr_a = 0.0;
        let mut sigma2 = vec![0.0; lam.len()];
        for i in 0..lam.len() {
            if mask[i] {
                let sa = spec.sigma_a(lam[i]);
                half_tr_a += 0.5 * sa * sa / model.alpha.helmholtz_symbol(lam[i]);
                sigma2[i] = spec.sigma_b(lam[i]).powi(2);
            }
        }
        let area_sum = sigma2
            .iter()
            .zip(d.mode_integrals())
            .map(|(s, i)| s * i * i)
            .sum();
        let s = if sigma2.iter().any(|&s| s != 0.0) {
            Some([0, 1, 2].map(|p| squares_grid(d, &sigma2, p)))
        } else {
            None
        };
        Self {
            half_tr_a,
            sigma2,
            s,
            area_sum,
        }
    }

    pub fn half_tr_a(&self) -> f64 {
        self.half_tr_a
    }

    /// `Σ σ_i² δ²E(φ)(η_i, η_i)` from the assembled kernel.
    pub fn second_variation_trace(&self, model: &Model, pg: &PhaseGrids) -> Result<f64> {
        let Some([s0, s1, s2]) = &self.s else {
            return Ok(0.0);
        };
        let d = &model.domain;
        let p = &model.energy;
        let shift = p.m2 * (pg.b_phi - p.b);
        let q = &pg.q;
        let mut integrand = s2.add(&q.mul(s1).scale(2.0));
        integrand.axpy(1.0, &q.mul(q).mul(s0));
        integrand.axpy(6.0, &pg.f.mul(&pg.phi).mul(s0));
        if shift != 0.0 {
            integrand.axpy(shift, &s1.add(&q.mul(s0)));
        }
        let mut total = d.integrate(&integrand)? + p.m1 * self.area_sum;
        if p.m2 != 0.0 {
            let pf = d.project(&pg.f)?;
            total += p.m2
                * pf
                    .coeffs()
                    .iter()
                    .zip(&self.sigma2)
                    .map(|(c, s)| s * c * c)
                    .sum::<f64>();
        }
        Ok(total)
    }

    /// The same sum, one quadratic form per mode.
    pub fn second_variation_trace_direct(&self, model: &Model, pg: &PhaseGrids) -> Result<f64> {
        let d = &model.domain;
        let mut total = 0.0;
        for (i, &s) in self.sigma2.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let mut eta = ScalarField::zeros(d.n());
            eta.coeffs_mut()[i] = 1.0;
            total += s * second_variation_with(d, pg, &eta, &eta, &model.energy)?;
        }
        Ok(total)
    }

    /// `½ tr_A + ½ Σ σ² δ²E(η, η)`.
    pub fn trace_input(&self, model: &Model, pg: &PhaseGrids) -> Result<f64> {
        Ok(self.half_tr_a + 0.5 * self.second_variation_trace(model, pg)?)
    }
}

/// `Σ_jk a_jk λ^p η_jk²` on the grid; separable since
/// `η² = (2/π)² sin²(jx) sin²(ky)`.
fn squares_grid(d: &Domain, a: &[f64], p: i32) -> Grid {
    let n = d.n();
    let side = d.grid_side();
    let mut sq = vec![0.0; n * side];
    for j in 1..=n {
        for i in 0..side {
            sq[(j - 1) * side + i] = (j as f64 * d.node(i)).sin().powi(2);
        }
    }
    let mut partial = vec![0.0; n * side];
    for j in 1..=n {
        for k in 1..=n {
            let idx = d.index(j, k);
            let c = NORM * NORM * a[idx] * d.eigenvalues()[idx].powi(p);
            if c == 0.0 {
                continue;
            }
            let row = &mut partial[(j - 1) * side..j * side];
            for (r, s) in row.iter_mut().zip(&sq[(k - 1) * side..k * side]) {
                *r += c * s;
            }
        }
    }
    let mut out = vec![0.0; side * side];
    for i in 0..side {
        let dst = &mut out[i * side..(i + 1) * side];
        for j in 0..n {
            let x = sq[j * side + i];
            for (o, s) in dst.iter_mut().zip(&partial[j * side..(j + 1) * side]) {
                *o += x * s;
            }
        }
    }
    Grid::new(side, out, 2 * n).expect("grid shape")
}

/// `ν(|∇w|² + α²|Aw|²) + γ|μ|²`.
pub fn dissipation(model: &Model, eval: &Evaluation) -> f64 {
    let a2 = model.alpha.alpha * model.alpha.alpha;
    let viscous: f64 = eval
        .w
        .iter()
        .zip(model.domain.eigenvalues())
        .map(|(w, &l)| (l + a2 * l * l) * w * w)
        .sum();
    let chem: f64 = eval.mu.iter().map(|m| m * m).sum();
    model.alpha.nu * viscous + model.energy.gamma * chem
}

/// `⟨w, C_A dW⟩ + ⟨μ, C_B dZ⟩`.
pub fn martingale_increment(eval: &Evaluation, inc: &Increments) -> f64 {
    let a: f64 = eval.w.iter().zip(&inc.dw).map(|(w, d)| w * d).sum();
    let b: f64 = eval.mu.iter().zip(&inc.dz).map(|(m, d)| m * d).sum();
    a + b
}

#[allow(clippy::too_many_arguments)]
pub fn record_step(
    model: &Model,
    kernel: &TraceKernel,
    _before: &SystemState,
    eval_before: &Evaluation,
    after: &SystemState,
    eval_after: &Evaluation,
    inc: &Increments,
    dt: f64,
) -> Result<BalanceRecord> {
    let diss = dissipation(model, eval_before);
    let trace = kernel.trace_input(model, &eval_before.phase)?;
    let mart = martingale_increment(eval_before, inc);
    let f0 = eval_before.f_total();
    let f1 = eval_after.f_total();
    let delta_f = f1 - f0;
    Ok(BalanceRecord {
        t: after.t,
        f: f1,
        kinetic: eval_after.kinetic,
        grad_kinetic: eval_after.grad_kinetic,
        e_bending: eval_after.energy.bending,
        e_volume: eval_after.energy.volume_penalty,
        e_area: eval_after.energy.area_penalty,
        dissipation: diss,
        trace_input: trace,
        martingale_increment: mart,
        residual: delta_f + diss * dt - trace * dt - mart,
        delta_f,
        dt,
    })
}

/// Merges consecutive records into one covering their whole window: rates
/// become time averages, increments add up, levels are taken at the end.
/// The balance `ΔF + D·Δt − T·Δt − M = residual` carries over.
pub fn merge_records(window: &[BalanceRecord]) -> Result<BalanceRecord> {
    let Some(last) = window.last() else {
        return Err(Error::Insufficient("empty window".into()));
    };
    let dt = pairwise_sum(&window.iter().map(|r| r.dt).collect::<Vec<_>>());
    let sum = |f: fn(&BalanceRecord) -> f64| pairwise_sum(&window.iter().map(f).collect::<Vec<_>>());
    Ok(BalanceRecord {
        dissipation: sum(|r| r.dissipation * r.dt) / dt,
        trace_input: sum(|r| r.trace_input * r.dt) / dt,
        martingale_increment: sum(|r| r.martingale_increment),
        residual: sum(|r| r.residual),
        delta_f: sum(|r| r.delta_f),
        dt,
        ..*last
    })
}

/// Pairwise (tree) summation with a fixed split, independent of threading.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and standard-error half-width `σ̂/√R`.
pub fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = pairwise_sum(values) / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (r - 1.0);
    (mean, (var / r).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    pub trajectories: usize,
    pub times: Vec<f64>,
    /// `E[F(t)^k]` with half-widths.
    pub mean_fk: Vec<f64>,
    pub half_width_fk: Vec<f64>,
    /// `sup_t E[F(t)^k]`.
    pub sup_mean_fk: f64,
    /// `E[sup_t F(t)^k]`.
    pub mean_sup_fk: f64,
    pub half_width_sup_fk: f64,
    /// `E[∫ F^{k−1} · dissipation dt]`.
    pub dissipation_integral: f64,
    pub half_width_dissipation: f64,
    /// Mean cumulative martingale term at the final time.
    pub martingale_mean: f64,
    pub half_width_martingale: f64,
}

/// Monte Carlo moments over aligned trajectories. The initial F enters every
/// series, so time index 0 is the common start.
pub fn ensemble_moments(records: &[Vec<BalanceRecord>], k: u32) -> Result<MomentReport> {
    let r = records.len();
    if r < 2 {
        return Err(Error::Insufficient(format!("need at least 2 trajectories, got {r}")));
    }
    let len = records[0].len();
    if len == 0 {
        return Err(Error::Insufficient("empty trajectories".into()));
    }
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != len {
            return Err(Error::Misaligned(format!(
                "trajectory {i} has {} records, expected {len}",
                rec.len()
            )));
        }
        for (a, b) in rec.iter().zip(&records[0]) {
            if (a.t - b.t).abs() > 1e-12 * b.t.abs().max(1.0) {
                return Err(Error::Misaligned(format!(
                    "trajectory {i} time {} vs {}",
                    a.t, b.t
                )));
            }
        }
    }
    let kk = k as i32;
    let t0 = records[0][0].t - records[0][0].dt;
    let mut times = vec![t0];
    times.extend(records[0].iter().map(|x| x.t));

    let series = |rec: &Vec<BalanceRecord>| -> Vec<f64> {
        let mut s = vec![rec[0].f_before()];
        s.extend(rec.iter().map(|x| x.f));
        s
    };
    let all: Vec<Vec<f64>> = records.iter().map(series).collect();

    let mut mean_fk = Vec::with_capacity(len + 1);
    let mut half_width_fk = Vec::with_capacity(len + 1);
    for ti in 0..=len {
        let col: Vec<f64> = all.iter().map(|s| s[ti].powi(kk)).collect();
        let (m, h) = mean_and_half_width(&col);
        mean_fk.push(m);
        half_width_fk.push(h);
    }
    let sup_mean_fk = mean_fk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sups: Vec<f64> = all
        .iter()
        .map(|s| s.iter().map(|f| f.powi(kk)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (mean_sup_fk, half_width_sup_fk) = mean_and_half_width(&sups);
    let diss: Vec<f64> = records
        .iter()
        .map(|rec| {
            let terms: Vec<f64> = rec
                .iter()
                .map(|x| x.f_before().powi(kk - 1) * x.dissipation * x.dt)
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    let (dissipation_integral, half_width_dissipation) = mean_and_half_width(&diss);
    let mart: Vec<f64> = records
        .iter()
        .map(|rec| {
            let terms: Vec<f64> = rec.iter().map(|x| x.martingale_increment).collect();
            pairwise_sum(&terms)
        })
        .collect();
    let (martingale_mean, half_width_martingale) = mean_and_half_width(&mart);
    Ok(MomentReport {
        k,
        trajectories: r,
        times,
        mean_fk,
        half_width_fk,
        sup_mean_fk,
        mean_sup_fk,
        half_width_sup_fk,
        dissipation_integral,
        half_width_dissipation,
        martingale_mean,
        half_width_martingale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub lag: f64,
    /// `E‖w(t + lag) − w(t)‖²_V`.
    pub velocity: f64,
    /// `E|φ(t + lag) − φ(t)|₂²`.
    pub phase: f64,
}

/// Mean-square moduli over every pair of snapshots `lag` samples apart,
/// averaged over base times and trajectories. Snapshots must be equally
/// spaced in time and aligned across trajectories.
pub fn mean_square_continuity(
    model: &Model,
    snapshots: &[Vec<SystemState>],
    lags: &[usize],
) -> Result<Vec<ContinuityRow>> {
    let Some(first) = snapshots.first() else {
        return Err(Error::Insufficient("no trajectories".into()));
    };
    let len = first.len();
    if len < 2 {
        return Err(Error::Insufficient("need at least 2 snapshots".into()));
    }
    if snapshots.iter().any(|s| s.len() != len) {
        return Err(Error::Misaligned("snapshot counts differ".into()));
    }
    let spacing = first[1].t - first[0].t;
    let lam = model.domain.eigenvalues();
    let mut rows = Vec::with_capacity(lags.len());
    for &lag in lags {
        if lag >= len {
            return Err(Error::Insufficient(format!(
                "lag {lag} needs more than {len} snapshots"
            )));
        }
        let mut vel = Vec::new();
        let mut pha = Vec::new();
        for traj in snapshots {
            for i in 0..len - lag {
                let (a, b) = (&traj[i], &traj[i + lag]);
                let wa = a.w(model);
                let wb = b.w(model);
                vel.push(
                    wa.iter()
                        .zip(&wb)
                        .zip(lam)
                        .map(|((x, y), l)| (1.0 + l) * (y - x).powi(2))
                        .sum::<f64>(),
                );
                pha.push(
                    a.phi
                        .iter()
                        .zip(&b.phi)
                        .map(|(x, y)| (y - x).powi(2))
                        .sum::<f64>(),
                );
            }
        }
        rows.push(ContinuityRow {
            lag: lag as f64 * spacing,
            velocity: pairwise_sum(&vel) / vel.len() as f64,
            phase: pairwise_sum(&pha) / pha.len() as f64,
        });
    }
    Ok(rows)
}
