//! Randomized checks of the exact identities and the existential-constant
//! inequalities satisfied by the discrete operators.
//!
//! Identities are asserted against a relative tolerance. Inequalities
//! `LHS ≤ c·RHS` with unknown `c` are swept: the report keeps the largest
//! observed `LHS/RHS` per resolution and passes when the ratios are finite
//! and do not grow by more than a fixed factor between resolutions.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::{shell_index, Domain};
use crate::dynamics::{evaluate, Model, SystemState};
use crate::energy::{
    chemical_potential, energy, m_operator, mn_split, second_variation, EnergyParams, PhaseGrids,
};
use crate::error::{Error, Result};
use crate::field::{
    da_norm, g_functional, h2_norm, inner_vec, norms, v_norm, ScalarField, VelocityField,
};
use crate::fluid::{b_tilde, helmholtz_apply, AlphaParams};
use crate::noise::NoiseSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub n_samples: usize,
    /// Spectral decay exponents `s` in `c_jk ~ ζ/λ^s`.
    pub smoothness: Vec<f64>,
    /// Amplitudes `ζ`.
    pub amplitudes: Vec<f64>,
    pub seed: u64,
    /// Modes per axis for each sweep.
    pub resolutions: Vec<usize>,
    /// Allowed growth of the empirical maximum between resolutions.
    pub growth_factor: f64,
    /// Relative tolerance for identities.
    pub identity_tolerance: f64,
    pub energy: EnergyParams,
    pub alpha: f64,
    /// Phase-noise law used for the `C_B*` estimate.
    pub noise_zeta_b: f64,
    pub noise_p_b: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            smoothness: vec![1.0, 1.5, 2.0],
            amplitudes: vec![0.1, 1.0, 5.0],
            seed: 2024,
            resolutions: vec![12, 24],
            growth_factor: 3.0,
            identity_tolerance: 1e-9,
            energy: EnergyParams {
                m1: 1.0,
                m2: 1.0,
                a: -crate::basis::AREA,
                b: 0.0,
                gamma: 1.0,
            },
            alpha: 1.0,
            noise_zeta_b: 1.0,
            noise_p_b: 2.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::InvalidParameter("n_samples must be >= 100".into()));
        }
        if self.resolutions.len() < 2 {
            return Err(Error::InvalidParameter("need at least two resolutions".into()));
        }
        if self.smoothness.is_empty() || self.amplitudes.is_empty() {
            return Err(Error::InvalidParameter("empty field family".into()));
        }
        if !(self.growth_factor >= 1.0) || !(self.identity_tolerance > 0.0) {
            return Err(Error::InvalidParameter("bad tolerances".into()));
        }
        Ok(())
    }

    fn class(&self, sample: usize) -> (f64, f64) {
        let combos = self.smoothness.len() * self.amplitudes.len();
        let c = sample % combos;
        (
            self.smoothness[c / self.amplitudes.len()],
            self.amplitudes[c % self.amplitudes.len()],
        )
    }

    /// Coefficients `ζ z_jk / λ^s` for one role of one sample. Draws are keyed
    /// by shell index, so a finer resolution extends a coarser one.
    fn coefficients(&self, domain: &Domain, sample: usize, role: u64) -> Vec<f64> {
        let (s, zeta) = self.class(sample);
        let n = domain.n();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample as u64 * 8 + role);
        let unit = Normal::standard();
        let shell: Vec<f64> = (0..n * n)
            .map(|_| unit.inverse_cdf(((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64))
            .collect();
        let mut out = vec![0.0; n * n];
        for j in 1..=n {
            for k in 1..=n {
                let idx = domain.index(j, k);
                out[idx] = zeta * shell[shell_index(j, k)] * domain.eigenvalues()[idx].powf(-s);
            }
        }
        out
    }

    /// Offset phase field `−1 + Σ c η` of sample `sample`.
    pub fn phase_sample(&self, domain: &Domain, sample: usize, role: u64) -> ScalarField {
        ScalarField::from_coeffs(domain.n(), self.coefficients(domain, sample, role), true)
    }

    pub fn plain_sample(&self, domain: &Domain, sample: usize, role: u64) -> ScalarField {
        ScalarField::from_coeffs(domain.n(), self.coefficients(domain, sample, role), false)
    }

    pub fn velocity_sample(&self, domain: &Domain, sample: usize, role: u64) -> VelocityField {
        VelocityField::from_coeffs(domain.n(), self.coefficients(domain, sample, role))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Identity,
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstSample {
    pub resolution: usize,
    pub sample: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub id: String,
    pub kind: CheckKind,
    pub empirical_max_ratio: f64,
    /// 50%, 90% and 99% quantiles over all samples.
    pub quantiles: [f64; 3],
    pub per_resolution_max: Vec<(usize, f64)>,
    pub worst: Option<WorstSample>,
    pub pass: bool,
}

impl RatioReport {
    pub fn summary(&self) -> String {
        format!(
            "{:<28} {:<8} max {:>12.4e}  q50 {:>11.4e}  q99 {:>11.4e}  {}",
            self.id,
            match self.kind {
                CheckKind::Identity => "identity",
                CheckKind::Ratio => "ratio",
            },
            self.empirical_max_ratio,
            self.quantiles[0],
            self.quantiles[2],
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Collects per-resolution samples of one check.
struct Collector {
    id: String,
    kind: CheckKind,
    values: Vec<(usize, usize, f64)>,
}

impl Collector {
    fn new(id: &str, kind: CheckKind) -> Self {
        Self {
            id: id.to_string(),
            kind,
            values: Vec::new(),
        }
    }

    fn push(&mut self, resolution: usize, sample: usize, value: f64) {
        self.values.push((resolution, sample, value));
    }

    fn finish(self, cfg: &SweepConfig) -> RatioReport {
        let mut all: Vec<f64> = self.values.iter().map(|v| v.2).collect();
        let finite = all.iter().all(|v| v.is_finite());
        all.sort_by(f64::total_cmp);
        let mut per_resolution_max = Vec::new();
        for &r in &cfg.resolutions {
            let m = self
                .values
                .iter()
                .filter(|v| v.0 == r)
                .map(|v| v.2)
                .fold(f64::NEG_INFINITY, f64::max);
            per_resolution_max.push((r, m));
        }
        let worst = self
            .values
            .iter()
            .filter(|v| v.2.is_finite())
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .map(|&(resolution, sample, value)| WorstSample {
                resolution,
                sample,
                value,
            });
        let empirical_max_ratio = all.last().copied().unwrap_or(f64::NAN);
        let pass = finite
            && match self.kind {
                CheckKind::Identity => empirical_max_ratio <= cfg.identity_tolerance,
                CheckKind::Ratio => per_resolution_max
                    .windows(2)
                    .all(|w| growth_ok(w[0].1, w[1].1, cfg.growth_factor)),
            };
        RatioReport {
            id: self.id,
            kind: self.kind,
            empirical_max_ratio,
            quantiles: [quantile(&all, 0.5), quantile(&all, 0.9), quantile(&all, 0.99)],
            per_resolution_max,
            worst,
            pass,
        }
    }
}

/// Cross-resolution stability of an empirical maximum. A maximum that stays
/// nonpositive is stable; one that turns positive from a nonpositive start
/// is not.
fn growth_ok(coarse: f64, fine: f64, factor: f64) -> bool {
    if !(coarse.is_finite() && fine.is_finite()) {
        return false;
    }
    if fine <= 0.0 {
        return true;
    }
    if coarse <= 0.0 {
        return false;
    }
    fine <= factor * coarse
}

fn domains(cfg: &SweepConfig) -> Result<Vec<Domain>> {
    cfg.validate()?;
    cfg.resolutions.iter().map(|&r| Domain::with_modes(r)).collect()
}

fn rel(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff.abs()
    } else {
        diff.abs() / scale
    }
}

/// Both sides of the expansion
/// `|f(φ)|² = |Δφ|² + 6|φ∇φ|² − 2|∇φ|² + |φ|₆⁶ − 2|φ|₄⁴ + |φ|₂²`
/// and the sum of the absolute values of its terms.
pub fn bending_expansion_sides(domain: &Domain, phi: &ScalarField) -> Result<(f64, f64, f64)> {
    let pg = PhaseGrids::new(domain, phi)?;
    let lhs = domain.integrate(&pg.f.mul(&pg.f))?;
    let nb = norms(domain, phi)?;
    let terms = [
        nb.lap_l2.powi(2),
        6.0 * nb.phi_grad_phi_l2.powi(2),
        -2.0 * nb.grad_l2.powi(2),
        nb.l6.powi(6),
        -2.0 * nb.l4.powi(4),
        nb.l2.powi(2),
    ];
    let rhs: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    Ok((lhs, rhs, scale))
}

pub fn check_bending_expansion(cfg: &SweepConfig) -> Result<RatioReport> {
    let mut c = Collector::new("bending_expansion", CheckKind::Identity);
    for d in domains(cfg)? {
        for i in 0..cfg.n_samples {
            let phi = cfg.phase_sample(&d, i, 0);
            let (lhs, rhs, scale) = bending_expansion_sides(&d, &phi)?;
            c.push(d.n(), i, rel(lhs - rhs, scale));
        }
    }
    Ok(c.finish(cfg))
}

/// Exact identities of the discrete system: M + N = δE/δφ, transport and
/// coupling cancellation, divergence-freeness.
pub fn check_exact_identities(cfg: &SweepConfig) -> Result<Vec<RatioReport>> {
    let mut mn = Collector::new("mn_split", CheckKind::Identity);
    let mut cancel = Collector::new("transport_cancellation", CheckKind::Identity);
    let mut div = Collector::new("divergence_free", CheckKind::Identity);
    for d in domains(cfg)? {
        let model = Model::new(
            d.clone(),
            AlphaParams {
                alpha: cfg.alpha,
                nu: 1.0,
            },
            cfg.energy,
        )?;
        let mask = model.mask(d.n());
        for i in 0..cfg.n_samples {
            let phi = cfg.phase_sample(&d, i, 0);
            let (m, n) = mn_split(&d, &phi, &cfg.energy)?;
            let mu = chemical_potential(&d, &phi, &cfg.energy)?;
            let worst = m
                .coeffs()
                .iter()
                .zip(n.coeffs())
                .zip(mu.coeffs())
                .map(|((a, b), c)| rel(a + b - c, a.abs() + b.abs()))
                .fold(0.0, f64::max);
            mn.push(d.n(), i, worst);

            let u = cfg.velocity_sample(&d, i, 3);
            let state = SystemState {
                v: u.coeffs().to_vec(),
                phi: phi.coeffs().to_vec(),
                t: 0.0,
                step: 0,
            };
            let ev = evaluate(&model, &state, &mask)?;
            let a: Vec<f64> = ev.coupling.iter().zip(&ev.w).map(|(x, y)| x * y).collect();
            let b: Vec<f64> = ev.mu.iter().zip(&ev.transport).map(|(x, y)| x * y).collect();
            let scale: f64 = a.iter().chain(&b).map(|x| x.abs()).sum();
            cancel.push(
                d.n(),
                i,
                rel(a.iter().sum::<f64>() - b.iter().sum::<f64>(), scale),
            );

            let nb = crate::field::norms_vec(&d, &u)?;
            let r = crate::field::divergence_residual(&d, &u)?;
            div.push(d.n(), i, rel(r, nb.linf));
        }
    }
    Ok(vec![mn.finish(cfg), cancel.finish(cfg), div.finish(cfg)])
}

pub fn check_inequalities(cfg: &SweepConfig) -> Result<Vec<RatioReport>> {
    let mut e2 = Collector::new("energy_controls_h2", CheckKind::Ratio);
    let mut e2bis = Collector::new("energy_h2_growth", CheckKind::Ratio);
    let mut e3 = Collector::new("bilaplacian_control", CheckKind::Ratio);
    let mut ce = Collector::new("noisy_mu_growth", CheckKind::Ratio);
    let mut tr = Collector::new("second_variation_bound", CheckKind::Ratio);
    let mut bn = Collector::new("nonlinear_lipschitz", CheckKind::Ratio);
    let p = &cfg.energy;
    let noise = NoiseSpec::power_law(0.0, 1.0, cfg.noise_zeta_b, cfg.noise_p_b, 0);
    for d in domains(cfg)? {
        let lam = d.eigenvalues();
        for i in 0..cfg.n_samples {
            let r = d.n();
            let phi = cfg.phase_sample(&d, i, 0);
            let nb = norms(&d, &phi)?;
            let e = energy(&d, &phi, p)?.total;
            let mu = chemical_potential(&d, &phi, p)?;

            let lhs = nb.lap_l2.powi(2)
                + nb.grad_l2.powi(4)
                + nb.phi_grad_phi_l2.powi(2)
                + nb.l4.powi(8)
                + nb.l6.powi(6);
            e2.push(r, i, lhs / (1.0 + e));

            let h2 = h2_norm(&d, &phi)?;
            e2bis.push(r, i, e / (1.0 + h2.powi(8)));

            let bilap: f64 = phi
                .coeffs()
                .iter()
                .zip(lam)
                .map(|(c, l)| l.powi(4) * c * c)
                .sum::<f64>()
                .sqrt();
            let mu_l2 = mu.coeffs().iter().map(|m| m * m).sum::<f64>().sqrt();
            e3.push(r, i, (bilap - mu_l2) / (1.0 + e * e));

            let cmu = mu
                .coeffs()
                .iter()
                .zip(lam)
                .map(|(m, &l)| (noise.sigma_b(l) * m).powi(2))
                .sum::<f64>()
                .sqrt();
            let env = 1.0 + nb.l4.powi(8) + nb.l6.powi(3) + nb.grad_l2.powi(4) + nb.lap_l2.powi(2);
            ce.push(r, i, cmu / env);

            let psi = cfg.plain_sample(&d, i, 2);
            let pn = norms(&d, &psi)?;
            let q = second_variation(&d, &phi, &psi, &psi, p)?;
            let env = (nb.lap_l2.powi(2) + nb.grad_l2.powi(4) + nb.l4.powi(2) + 1.0)
                * (pn.l2.powi(2) + pn.grad_l2.powi(2) + pn.lap_l2.powi(2));
            tr.push(r, i, q / env);

            let phi2 = cfg.phase_sample(&d, i, 1);
            let (m1, n1) = mn_split(&d, &phi, p)?;
            let (m2, n2) = mn_split(&d, &phi2, p)?;
            debug_assert_eq!(m1.n(), m2.n());
            let dn = n1
                .coeffs()
                .iter()
                .zip(n2.coeffs())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let h2b = h2_norm(&d, &phi2)?;
            let diff = h2_norm(&d, &phi.diff(&phi2))?;
            let env = (1.0 + h2.powi(6) + h2b.powi(6)) * diff;
            bn.push(r, i, if env == 0.0 { 0.0 } else { dn / env });
        }
    }
    Ok(vec![
        e2.finish(cfg),
        e2bis.finish(cfg),
        e3.finish(cfg),
        ce.finish(cfg),
        tr.finish(cfg),
        bn.finish(cfg),
    ])
}

pub fn check_bilinear_bounds(cfg: &SweepConfig) -> Result<Vec<RatioReport>> {
    let mut skew = Collector::new("b_tilde_skew", CheckKind::Identity);
    let mut anti = Collector::new("b_tilde_antisymmetry", CheckKind::Identity);
    let mut neutral = Collector::new("b_tilde_energy_neutrality", CheckKind::Identity);
    let mut v1 = Collector::new("b_tilde_bound_V1", CheckKind::Ratio);
    let mut v2 = Collector::new("b_tilde_bound_V2", CheckKind::Ratio);
    let mut da = Collector::new("b_tilde_bound_DA", CheckKind::Ratio);
    for d in domains(cfg)? {
        for i in 0..cfg.n_samples {
            let r = d.n();
            let u = cfg.velocity_sample(&d, i, 3);
            let v = cfg.velocity_sample(&d, i, 4);
            let w = cfg.velocity_sample(&d, i, 5);
            let (hu, hv, hw) = (
                inner_vec(&u, &u)?.sqrt(),
                inner_vec(&v, &v)?.sqrt(),
                inner_vec(&w, &w)?.sqrt(),
            );
            let (vu, vv, vw) = (v_norm(&d, &u), v_norm(&d, &v), v_norm(&d, &w));

            let buv = b_tilde(&d, &u, &v)?;
            let bwv = b_tilde(&d, &w, &v)?;
            let s = inner_vec(&buv, &u)?;
            skew.push(r, i, rel(s, vu * vu * vv));
            let a = inner_vec(&buv, &w)?;
            let b = inner_vec(&bwv, &u)?;
            anti.push(r, i, rel(a + b, vu * vv * vw));

            let total = helmholtz_apply(&d, &w, cfg.alpha);
            let e = inner_vec(&b_tilde(&d, &w, &total)?, &w)?;
            neutral.push(r, i, rel(e, vw * vw * v_norm(&d, &total)));

            v1.push(r, i, a.abs() / ((hu * vu).sqrt() * vv * vw));
            v2.push(r, i, a.abs() / (vu * vv * (hw * vw).sqrt()));
            da.push(r, i, a.abs() / (vu * hv * da_norm(&d, &w)));
        }
    }
    Ok(vec![
        skew.finish(cfg),
        anti.finish(cfg),
        neutral.finish(cfg),
        v1.finish(cfg),
        v2.finish(cfg),
        da.finish(cfg),
    ])
}

/// Closed-form bracket of `G(φ)/‖φ‖²_{H²}` over the mode set, `‖·‖_{H²}`
/// being `Σ (1+λ)² c²`: the ratio is a convex combination of
/// `(λ² + λ + 1)/(1 + λ)²`.
pub fn g_norm_bracket(domain: &Domain) -> (f64, f64) {
    domain
        .eigenvalues()
        .iter()
        .map(|&l| (l * l + l + 1.0) / (1.0 + l).powi(2))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

pub fn check_g_norm_equivalence(cfg: &SweepConfig) -> Result<RatioReport> {
    let mut c = Collector::new("g_norm_equivalence", CheckKind::Ratio);
    let mut inside = true;
    for d in domains(cfg)? {
        let (lo, hi) = g_norm_bracket(&d);
        let constant = hi.max(1.0 / lo);
        for i in 0..cfg.n_samples {
            let psi = cfg.plain_sample(&d, i, 0);
            let g = g_functional(&d, &psi)?;
            let h = h2_norm(&d, &psi)?.powi(2);
            let ratio = g / h;
            inside &= ratio >= lo * (1.0 - 1e-12)
                && ratio <= hi * (1.0 + 1e-12)
                && ratio >= 1.0 / constant
                && ratio <= constant;
            c.push(d.n(), i, ratio);
        }
    }
    let mut rep = c.finish(cfg);
    rep.pass &= inside;
    Ok(rep)
}

/// Every suite, in a fixed order.
pub fn run_all(cfg: &SweepConfig) -> Result<Vec<RatioReport>> {
    let mut out = vec![check_bending_expansion(cfg)?];
    out.extend(check_exact_identities(cfg)?);
    out.extend(check_bilinear_bounds(cfg)?);
    out.extend(check_inequalities(cfg)?);
    out.push(check_g_norm_equivalence(cfg)?);
    Ok(out)
}

/// `M(φ)` applied to a field whose sine part is a single mode: the diagonal
/// factor `λ² + λ + 1` of that mode.
pub fn m_diagonal_factor(domain: &Domain, j: usize, k: usize) -> Result<f64> {
    let (_, eta) = domain.scalar_eigenpair(j, k)?;
    Ok(m_operator(domain, &eta).coeffs()[domain.index(j, k)])
}
