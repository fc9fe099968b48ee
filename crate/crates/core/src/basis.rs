//! Analytic eigenbases on the square Q = (0, π)² and the pseudospectral
//! collocation machinery shared by every other module.
//!
//! Scalar modes are the Dirichlet Laplacian eigenfunctions
//! `η_jk = (2/π) sin(jx) sin(ky)` with `λ_jk = j² + k²`. Velocity modes are
//! the free-slip stream-function family `e_jk = ∇⊥η_jk / √λ_jk`:
//!
//! ```text
//! e_jk = (2/π)/√λ · ( k sin(jx) cos(ky), −j cos(jx) sin(ky) )
//! ```
//!
//! Each `e_jk` is pointwise divergence free, tangent to ∂Q, L²-orthonormal
//! and satisfies `−Δe = λe`.
//!
//! # Collocation grid
//!
//! Sine and cosine series continue to 2π-periodic trigonometric polynomials,
//! so every product appearing in the model is one as well. Fields are sampled
//! on the periodic grid `x_i = iπ/M`, `i = 0..2M`; nodes `0..=M` cover the
//! closed physical square. Integrals over Q use the interpolatory weights
//!
//! ```text
//! W_i = π/(2M) + (2/M) Σ_{m odd, m < M} sin(m x_i) / m
//! ```
//!
//! which integrate every trigonometric polynomial of degree ≤ M over (0, π)
//! exactly (M even), odd-parity terms such as `∫ sin(jx)` included.
//! Projections onto degree-N modes are therefore exact for integrands of
//! bandwidth ≤ M − N.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VelocityField};

/// Normalisation of the one-dimensional sine factors, `√(2/π)` squared.
pub const NORM: f64 = 2.0 / PI;

/// Area of the physical square.
pub const AREA: f64 = PI * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Modes per axis, N.
    pub modes_per_axis: usize,
    /// Grid intervals per axis on [0, π], M.
    pub collocation_per_axis: usize,
}

impl DomainSpec {
    /// Default oversampling M = 8N.
    pub fn new(modes_per_axis: usize) -> Self {
        Self {
            modes_per_axis,
            collocation_per_axis: 8 * modes_per_axis,
        }
    }

    /// Minimal exact grid M = 6N.
    pub fn minimal(modes_per_axis: usize) -> Self {
        Self {
            modes_per_axis,
            collocation_per_axis: 6 * modes_per_axis,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.modes_per_axis, self.collocation_per_axis);
        if n < 2 {
            return Err(Error::InvalidDomain(format!("need N >= 2, got {n}")));
        }
        if m < 6 * n {
            return Err(Error::InvalidDomain(format!(
                "need M >= 6N = {}, got {m}",
                6 * n
            )));
        }
        if m % 2 != 0 {
            return Err(Error::InvalidDomain(format!("M must be even, got {m}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarMode {
    pub j: usize,
    pub k: usize,
    pub eigenvalue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityMode {
    pub j: usize,
    pub k: usize,
    pub eigenvalue: f64,
    pub stream_normalizer: f64,
}

/// One-dimensional factor of a separable series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Sin,
    Cos,
}

impl Parity {
    /// Sign picked up under `x -> 2π - x`.
    fn reflection(self) -> f64 {
        match self {
            Parity::Sin => -1.0,
            Parity::Cos => 1.0,
        }
    }
}

/// Values on the full periodic collocation grid, row index along x.
///
/// `bandwidth` is an upper bound on the trigonometric degree per axis of the
/// sampled function; it grows additively under multiplication and is what the
/// dealiasing checks in [`Domain::integrate`] and [`Domain::project`] use.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    side: usize,
    values: Vec<f64>,
    bandwidth: usize,
}

impl Grid {
    pub fn new(side: usize, values: Vec<f64>, bandwidth: usize) -> Result<Self> {
        if values.len() != side * side {
            return Err(Error::Shape {
                expected: side * side,
                found: values.len(),
            });
        }
        Ok(Self {
            side,
            values,
            bandwidth,
        })
    }

    pub fn constant(side: usize, value: f64) -> Self {
        Self {
            side,
            values: vec![value; side * side],
            bandwidth: 0,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.side + l]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64, bandwidth: usize) -> Grid {
        Grid {
            side: self.side,
            values: self.values.iter().map(|&v| f(v)).collect(),
            bandwidth,
        }
    }

    pub fn zip_with(&self, other: &Grid, bandwidth: usize, f: impl Fn(f64, f64) -> f64) -> Grid {
        debug_assert_eq!(self.side, other.side);
        Grid {
            side: self.side,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            bandwidth,
        }
    }

    pub fn mul(&self, other: &Grid) -> Grid {
        self.zip_with(other, self.bandwidth + other.bandwidth, |a, b| a * b)
    }

    pub fn add(&self, other: &Grid) -> Grid {
        self.zip_with(other, self.bandwidth.max(other.bandwidth), |a, b| a + b)
    }

    pub fn sub(&self, other: &Grid) -> Grid {
        self.zip_with(other, self.bandwidth.max(other.bandwidth), |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Grid {
        self.map(|v| s * v, self.bandwidth)
    }

    pub fn add_scalar(&self, s: f64) -> Grid {
        self.map(|v| v + s, self.bandwidth)
    }

    /// `self += s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Grid) {
        axpy(s, &other.values, &mut self.values);
        self.bandwidth = self.bandwidth.max(other.bandwidth);
    }

    /// Largest absolute value over the nodes of the closed physical square.
    pub fn physical_max_abs(&self) -> f64 {
        let half = self.side / 2;
        let mut best = 0.0_f64;
        for i in 0..=half {
            for l in 0..=half {
                best = best.max(self.at(i, l).abs());
            }
        }
        best
    }
}

struct Tables {
    n: usize,
    m: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `sin(j x_i)` for j = 1..=N, i = 0..=M, row-major in j.
    sin: Vec<f64>,
    cos: Vec<f64>,
    /// λ_jk in tensor layout.
    eigen: Vec<f64>,
    /// ∫_Q η_jk in tensor layout.
    mode_integral: Vec<f64>,
    /// Modes sorted by (λ, j, k).
    ordered: Vec<ScalarMode>,
}

/// A discretised square: mode set `{1..N}²` plus its collocation grid.
///
/// Cheap to clone; the tables are shared.
#[derive(Clone)]
pub struct Domain {
    spec: DomainSpec,
    tables: Arc<Tables>,
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain").field("spec", &self.spec).finish()
    }
}

/// `dst += a * src`
#[inline]
pub(crate) fn axpy(a: f64, src: &[f64], dst: &mut [f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integral of `sin(j x)` over (0, π).
fn sine_integral(j: usize) -> f64 {
    if j % 2 == 1 {
        2.0 / j as f64
    } else {
        0.0
    }
}

/// Position of mode (j, k) in the square-shell enumeration: all modes with
/// `max(j, k) <= n` occupy indices `0..n²`, independently of any grid size.
pub fn shell_index(j: usize, k: usize) -> usize {
    let s = j.max(k);
    let base = (s - 1) * (s - 1);
    if j == s {
        base + (k - 1)
    } else {
        base + s + (j - 1)
    }
}

pub fn shell_mode(index: usize) -> (usize, usize) {
    let s = (index as f64).sqrt() as usize + 1;
    // guard against rounding in the square root
    let s = if (s - 1) * (s - 1) > index { s - 1 } else if s * s <= index { s + 1 } else { s };
    let off = index - (s - 1) * (s - 1);
    if off < s {
        (s, off + 1)
    } else {
        (off - s + 1, s)
    }
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.modes_per_axis;
        let m = spec.collocation_per_axis;
        let side = 2 * m;
        let h = PI / m as f64;
        let nodes: Vec<f64> = (0..side).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let odd: f64 = (1..m)
                    .step_by(2)
                    .map(|q| (q as f64 * x).sin() / q as f64)
                    .sum();
                PI / side as f64 + 4.0 / side as f64 * odd
            })
            .collect();
        let mut sin = Vec::with_capacity(n * (m + 1));
        let mut cos = Vec::with_capacity(n * (m + 1));
        for j in 1..=n {
            for &x in &nodes[..=m] {
                let jx = j as f64 * x;
                // exact zeros at the nodes where sin(jx) vanishes keep
                // boundary values clean
                let s = if (j * (x / h).round() as usize).is_multiple_of(m) {
                    0.0
                } else {
                    jx.sin()
                };
                sin.push(s);
                cos.push(jx.cos());
            }
        }
        let mut eigen = Vec::with_capacity(n * n);
        let mut mode_integral = Vec::with_capacity(n * n);
        let mut ordered = Vec::with_capacity(n * n);
        for j in 1..=n {
            for k in 1..=n {
                let lambda = (j * j + k * k) as f64;
                eigen.push(lambda);
                mode_integral.push(NORM * sine_integral(j) * sine_integral(k));
                ordered.push(ScalarMode {
                    j,
                    k,
                    eigenvalue: lambda,
                });
            }
        }
        ordered.sort_by(|a, b| {
            a.eigenvalue
                .total_cmp(&b.eigenvalue)
                .then(a.j.cmp(&b.j))
                .then(a.k.cmp(&b.k))
        });
        Ok(Self {
            spec,
            tables: Arc::new(Tables {
                n,
                m,
                nodes,
                weights,
                sin,
                cos,
                eigen,
                mode_integral,
                ordered,
            }),
        })
    }

    pub fn with_modes(n: usize) -> Result<Self> {
        Self::new(DomainSpec::new(n))
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    /// Modes per axis.
    pub fn n(&self) -> usize {
        self.tables.n
    }

    /// Grid intervals per axis on [0, π].
    pub fn m(&self) -> usize {
        self.tables.m
    }

    /// Nodes per axis of the periodic grid, 2M.
    pub fn grid_side(&self) -> usize {
        2 * self.tables.m
    }

    pub fn node(&self, i: usize) -> f64 {
        self.tables.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.tables.weights
    }

    pub fn mode_count(&self) -> usize {
        self.tables.n * self.tables.n
    }

    /// Tensor-layout index of (j, k), both 1-based.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        (j - 1) * self.tables.n + (k - 1)
    }

    pub fn check_mode(&self, j: usize, k: usize) -> Result<()> {
        let n = self.tables.n;
        if j == 0 || k == 0 || j > n || k > n {
            return Err(Error::ModeIndex { j, k, n });
        }
        Ok(())
    }

    /// λ_jk in tensor layout.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.tables.eigen
    }

    /// `∫_Q η_jk` in tensor layout; `8/(π j k)` for odd j, k, zero otherwise.
    pub fn mode_integrals(&self) -> &[f64] {
        &self.tables.mode_integral
    }

    /// Modes sorted by `(λ, j, k)`.
    pub fn modes(&self) -> &[ScalarMode] {
        &self.tables.ordered
    }

    pub fn velocity_modes(&self) -> Vec<VelocityMode> {
        self.modes()
            .iter()
            .map(|m| VelocityMode {
                j: m.j,
                k: m.k,
                eigenvalue: m.eigenvalue,
                stream_normalizer: 1.0 / m.eigenvalue.sqrt(),
            })
            .collect()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        2.0 * (self.tables.n * self.tables.n) as f64
    }

    pub fn scalar_eigenpair(&self, j: usize, k: usize) -> Result<(f64, ScalarField)> {
        self.check_mode(j, k)?;
        let mut f = ScalarField::zeros(self.n());
        f.coeffs_mut()[self.index(j, k)] = 1.0;
        Ok((self.tables.eigen[self.index(j, k)], f))
    }

    pub fn velocity_eigenpair(&self, j: usize, k: usize) -> Result<(f64, VelocityField)> {
        self.check_mode(j, k)?;
        let mut u = VelocityField::zeros(self.n());
        u.coeffs_mut()[self.index(j, k)] = 1.0;
        Ok((self.tables.eigen[self.index(j, k)], u))
    }

    fn table(&self, p: Parity) -> &[f64] {
        match p {
            Parity::Sin => &self.tables.sin,
            Parity::Cos => &self.tables.cos,
        }
    }

    /// Evaluates `Σ a_jk X_j(x) Y_k(y)` on the periodic grid.
    ///
    /// Only the closed physical quarter is computed; the rest follows from the
    /// reflection parity of the factors.
    pub fn synthesize(&self, coeffs: &[f64], px: Parity, py: Parity) -> Vec<f64> {
        let n = self.n();
        let m = self.m();
        let h = m + 1;
        let side = 2 * m;
        debug_assert_eq!(coeffs.len(), n * n);
        let xt = self.table(px);
        let yt = self.table(py);

        let mut partial = vec![0.0; n * h];
        for j in 0..n {
            let row = &mut partial[j * h..(j + 1) * h];
            for k in 0..n {
                let a = coeffs[j * n + k];
                if a != 0.0 {
                    axpy(a, &yt[k * h..(k + 1) * h], row);
                }
            }
        }

        let mut out = vec![0.0; side * side];
        let sy = py.reflection();
        for i in 0..h {
            let row = &mut out[i * side..(i + 1) * side];
            for j in 0..n {
                let x = xt[j * h + i];
                if x != 0.0 {
                    axpy(x, &partial[j * h..(j + 1) * h], &mut row[..h]);
                }
            }
            for l in 1..m {
                row[side - l] = sy * row[l];
            }
        }
        let sx = px.reflection();
        for i in 1..m {
            let (upper, lower) = out.split_at_mut((side - i) * side);
            let src = &upper[i * side..(i + 1) * side];
            for (d, s) in lower[..side].iter_mut().zip(src) {
                *d = sx * s;
            }
        }
        out
    }

    /// Weighted analysis `∫_Q g X_j(x) Y_k(y)` for all j, k ≤ N.
    pub fn analyze(&self, values: &[f64], px: Parity, py: Parity) -> Vec<f64> {
        let n = self.n();
        let m = self.m();
        let h = m + 1;
        let side = 2 * m;
        debug_assert_eq!(values.len(), side * side);
        let w = &self.tables.weights;
        let sx = px.reflection();
        let sy = py.reflection();

        let fold_row = |row: &[f64], out: &mut [f64], scale: f64| {
            out[0] += scale * w[0] * row[0];
            out[m] += scale * w[m] * row[m];
            for l in 1..m {
                out[l] += scale * (w[l] * row[l] + sy * w[side - l] * row[side - l]);
            }
        };
        let mut folded = vec![0.0; h * h];
        for i in 0..h {
            let dst = &mut folded[i * h..(i + 1) * h];
            fold_row(&values[i * side..(i + 1) * side], dst, w[i]);
            if i > 0 && i < m {
                let mirror = side - i;
                fold_row(
                    &values[mirror * side..(mirror + 1) * side],
                    dst,
                    sx * w[mirror],
                );
            }
        }

        let xt = self.table(px);
        let yt = self.table(py);
        let mut partial = vec![0.0; n * h];
        for i in 0..h {
            let src = &folded[i * h..(i + 1) * h];
            for j in 0..n {
                let x = xt[j * h + i];
                if x != 0.0 {
                    axpy(x, src, &mut partial[j * h..(j + 1) * h]);
                }
            }
        }
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            let u = &partial[j * h..(j + 1) * h];
            for k in 0..n {
                out[j * n + k] = dot(u, &yt[k * h..(k + 1) * h]);
            }
        }
        out
    }

    /// Exact quadrature of a grid function over Q.
    pub fn integrate(&self, g: &Grid) -> Result<f64> {
        self.check_grid(g)?;
        if g.bandwidth > self.m() {
            return Err(Error::Dealiasing {
                bandwidth: g.bandwidth,
                needed: g.bandwidth,
                limit: self.m(),
            });
        }
        let side = self.grid_side();
        let w = &self.tables.weights;
        Ok(g.values()
            .chunks_exact(side)
            .zip(w)
            .map(|(row, wi)| wi * dot(row, w))
            .sum())
    }

    /// Trapezoid rule over the physical nodes only. Spectrally accurate for
    /// smooth integrands whose reflections about both walls are even, such as
    /// powers of `|∇η|`; used where the integrand is not a trigonometric
    /// polynomial and the exact weights do not apply.
    pub fn integrate_even(&self, values: &[f64]) -> f64 {
        let m = self.m();
        let side = self.grid_side();
        let h = PI / m as f64;
        let w = |i: usize| if i == 0 || i == m { 0.5 * h } else { h };
        (0..=m)
            .map(|i| w(i) * (0..=m).map(|l| w(l) * values[i * side + l]).sum::<f64>())
            .sum()
    }

    fn check_grid(&self, g: &Grid) -> Result<()> {
        if g.side != self.grid_side() {
            return Err(Error::Shape {
                expected: self.grid_side(),
                found: g.side,
            });
        }
        Ok(())
    }

    fn check_projectable(&self, g: &Grid) -> Result<()> {
        self.check_grid(g)?;
        if g.bandwidth + self.n() > self.m() {
            return Err(Error::Dealiasing {
                bandwidth: g.bandwidth,
                needed: g.bandwidth + self.n(),
                limit: self.m(),
            });
        }
        Ok(())
    }

    /// L² projection onto the scalar band: `⟨g, η_jk⟩` for all modes.
    pub fn project(&self, g: &Grid) -> Result<ScalarField> {
        self.check_projectable(g)?;
        let mut c = self.analyze(g.values(), Parity::Sin, Parity::Sin);
        c.iter_mut().for_each(|v| *v *= NORM);
        Ok(ScalarField::from_coeffs(self.n(), c, false))
    }

    /// Physical field values on the grid, offset included.
    pub fn to_grid(&self, f: &ScalarField) -> Grid {
        let scaled: Vec<f64> = f.coeffs().iter().map(|c| NORM * c).collect();
        let mut values = self.synthesize(&scaled, Parity::Sin, Parity::Sin);
        if f.is_offset() {
            values.iter_mut().for_each(|v| *v -= 1.0);
        }
        Grid {
            side: self.grid_side(),
            values,
            bandwidth: self.n(),
        }
    }

    /// Discrete sine analysis. The result is a plain (non-offset) field.
    pub fn from_grid(&self, g: &Grid) -> Result<ScalarField> {
        self.project(g)
    }

    /// Velocity components `(u₁, u₂)` on the grid.
    pub fn to_grid_vec(&self, u: &VelocityField) -> [Grid; 2] {
        let n = self.n();
        let lam = self.eigenvalues();
        let mut a1 = vec![0.0; n * n];
        let mut a2 = vec![0.0; n * n];
        for j in 1..=n {
            for k in 1..=n {
                let idx = self.index(j, k);
                let s = NORM * u.coeffs()[idx] / lam[idx].sqrt();
                a1[idx] = s * k as f64;
                a2[idx] = -s * j as f64;
            }
        }
        let side = self.grid_side();
        [
            Grid {
                side,
                values: self.synthesize(&a1, Parity::Sin, Parity::Cos),
                bandwidth: n,
            },
            Grid {
                side,
                values: self.synthesize(&a2, Parity::Cos, Parity::Sin),
                bandwidth: n,
            },
        ]
    }

    /// Coefficients `⟨(g₁, g₂), e_jk⟩`: the truncated Leray projection.
    pub fn from_grid_vec(&self, g: [&Grid; 2]) -> Result<VelocityField> {
        self.check_projectable(g[0])?;
        self.check_projectable(g[1])?;
        let n = self.n();
        let p1 = self.analyze(g[0].values(), Parity::Sin, Parity::Cos);
        let p2 = self.analyze(g[1].values(), Parity::Cos, Parity::Sin);
        let lam = self.eigenvalues();
        let mut out = vec![0.0; n * n];
        for j in 1..=n {
            for k in 1..=n {
                let idx = self.index(j, k);
                out[idx] = NORM / lam[idx].sqrt() * (k as f64 * p1[idx] - j as f64 * p2[idx]);
            }
        }
        Ok(VelocityField::from_coeffs(n, out))
    }

    /// Samples `g` on the physical square and continues it oddly across both
    /// walls, so that [`Domain::project`] returns its sine coefficients.
    ///
    /// The result is marked band-limited; for functions that are not, the
    /// projection is the discrete sine analysis, an approximation.
    pub fn sample_odd(&self, g: impl Fn(f64, f64) -> f64) -> Grid {
        let m = self.m();
        let side = self.grid_side();
        let mut values = vec![0.0; side * side];
        let fold = |i: usize| if i <= m { (i, 1.0) } else { (side - i, -1.0) };
        for i in 0..side {
            let (ii, si) = fold(i);
            for l in 0..side {
                let (ll, sl) = fold(l);
                values[i * side + l] = if ii == 0 || ii == m || ll == 0 || ll == m {
                    0.0
                } else {
                    si * sl * g(self.node(ii), self.node(ll))
                };
            }
        }
        Grid {
            side,
            values,
            bandwidth: 0,
        }
    }

    /// Grid of `Σ a_jk η_jk` for raw coefficients (no offset).
    pub(crate) fn sine_grid(&self, coeffs: &[f64]) -> Grid {
        let scaled: Vec<f64> = coeffs.iter().map(|c| NORM * c).collect();
        Grid {
            side: self.grid_side(),
            values: self.synthesize(&scaled, Parity::Sin, Parity::Sin),
            bandwidth: self.n(),
        }
    }

    /// `(∂ₓf, ∂ᵧf)` on the grid for a scalar field; the offset drops out.
    pub fn gradient_grid(&self, coeffs: &[f64]) -> [Grid; 2] {
        let n = self.n();
        let mut ax = vec![0.0; n * n];
        let mut ay = vec![0.0; n * n];
        for j in 1..=n {
            for k in 1..=n {
                let idx = self.index(j, k);
                ax[idx] = NORM * j as f64 * coeffs[idx];
                ay[idx] = NORM * k as f64 * coeffs[idx];
            }
        }
        let side = self.grid_side();
        [
            Grid {
                side,
                values: self.synthesize(&ax, Parity::Cos, Parity::Sin),
                bandwidth: n,
            },
            Grid {
                side,
                values: self.synthesize(&ay, Parity::Sin, Parity::Cos),
                bandwidth: n,
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(n: usize) -> Domain {
        Domain::with_modes(n).unwrap()
    }

    #[test]
    fn eigenvalues_are_sums_of_squares() {
        let d = dom(4);
        assert_eq!(d.scalar_eigenpair(1, 1).unwrap().0, 2.0);
        assert_eq!(d.scalar_eigenpair(2, 3).unwrap().0, 13.0);
        assert_eq!(d.velocity_eigenpair(1, 1).unwrap().0, 2.0);
    }

    #[test]
    fn out_of_range_modes_are_rejected() {
        let d = dom(4);
        assert!(matches!(
            d.scalar_eigenpair(0, 1),
            Err(Error::ModeIndex { .. })
        ));
        assert!(matches!(
            d.velocity_eigenpair(1, 5),
            Err(Error::ModeIndex { .. })
        ));
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::new(DomainSpec {
            modes_per_axis: 4,
            collocation_per_axis: 20
        })
        .is_err());
        assert!(Domain::new(DomainSpec {
            modes_per_axis: 4,
            collocation_per_axis: 25
        })
        .is_err());
        assert!(Domain::new(DomainSpec {
            modes_per_axis: 1,
            collocation_per_axis: 8
        })
        .is_err());
        assert!(Domain::new(DomainSpec::minimal(4)).is_ok());
    }

    #[test]
    fn modes_sorted_by_eigenvalue_then_indices() {
        let d = dom(5);
        let modes = d.modes();
        assert_eq!(modes.len(), 25);
        assert_eq!((modes[0].j, modes[0].k), (1, 1));
        assert_eq!((modes[1].j, modes[1].k), (1, 2));
        assert_eq!((modes[2].j, modes[2].k), (2, 1));
        for w in modes.windows(2) {
            assert!((w[0].eigenvalue, w[0].j, w[0].k) < (w[1].eigenvalue, w[1].j, w[1].k));
        }
    }

    #[test]
    fn shell_index_roundtrip_and_nesting() {
        let mut seen = vec![false; 100];
        for j in 1..=10 {
            for k in 1..=10 {
                let idx = shell_index(j, k);
                assert_eq!(shell_mode(idx), (j, k));
                seen[idx] = true;
                if j <= 4 && k <= 4 {
                    assert!(idx < 16);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn weights_integrate_trig_monomials() {
        let d = dom(3);
        let m = d.m();
        let w = d.weights();
        for q in 0..=m {
            let c: f64 = (0..2 * m).map(|i| w[i] * (q as f64 * d.node(i)).cos()).sum();
            let s: f64 = (0..2 * m).map(|i| w[i] * (q as f64 * d.node(i)).sin()).sum();
            let c_exact = if q == 0 { PI } else { 0.0 };
            assert!((c - c_exact).abs() < 1e-13, "cos {q}: {c}");
            assert!((s - sine_integral(q)).abs() < 1e-13, "sin {q}: {s}");
        }
    }

    #[test]
    fn single_mode_at_center_node() {
        let d = dom(4);
        let (_, eta) = d.scalar_eigenpair(1, 1).unwrap();
        let g = d.to_grid(&eta);
        let mid = d.m() / 2;
        assert!((d.node(mid) - PI / 2.0).abs() < 1e-15);
        assert!((g.at(mid, mid) - 2.0 / PI).abs() < 1e-15);
        assert_eq!(g.physical_max_abs(), g.at(mid, mid).abs());
    }

    #[test]
    fn zero_coefficients_give_zero_grid() {
        let d = dom(4);
        let g = d.to_grid(&ScalarField::zeros(4));
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eta_orthonormal_under_quadrature() {
        let d = dom(4);
        let (_, a) = d.scalar_eigenpair(1, 1).unwrap();
        let (_, b) = d.scalar_eigenpair(2, 1).unwrap();
        let ga = d.to_grid(&a);
        let gb = d.to_grid(&b);
        assert!((d.integrate(&ga.mul(&ga)).unwrap() - 1.0).abs() < 1e-14);
        assert!(d.integrate(&ga.mul(&gb)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn velocity_mode_one_one_matches_closed_form() {
        let d = dom(4);
        let (_, e) = d.velocity_eigenpair(1, 1).unwrap();
        let [u1, u2] = d.to_grid_vec(&e);
        let amp = 2.0 / (PI * 2f64.sqrt());
        for i in 0..=d.m() {
            for l in 0..=d.m() {
                let (x, y) = (d.node(i), d.node(l));
                assert!((u1.at(i, l) - amp * x.sin() * y.cos()).abs() < 1e-14);
                assert!((u2.at(i, l) + amp * x.cos() * y.sin()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn velocity_modes_orthonormal() {
        let d = dom(4);
        let (_, e11) = d.velocity_eigenpair(1, 1).unwrap();
        let (_, e12) = d.velocity_eigenpair(1, 2).unwrap();
        let a = d.to_grid_vec(&e11);
        let b = d.to_grid_vec(&e12);
        let ip = |x: &[Grid; 2], y: &[Grid; 2]| {
            d.integrate(&x[0].mul(&y[0])).unwrap() + d.integrate(&x[1].mul(&y[1])).unwrap()
        };
        assert!((ip(&a, &a) - 1.0).abs() < 1e-14);
        assert!(ip(&a, &b).abs() < 1e-14);
    }

    #[test]
    fn band_edge_mode_projects_to_zero() {
        // η_{N+1,1} sampled on the grid is out of band
        let d = dom(4);
        let n = d.n();
        let side = d.grid_side();
        let mut vals = vec![0.0; side * side];
        for i in 0..side {
            for l in 0..side {
                vals[i * side + l] =
                    NORM * ((n + 1) as f64 * d.node(i)).sin() * d.node(l).sin();
            }
        }
        let g = Grid::new(side, vals, n + 1).unwrap();
        let c = d.from_grid(&g).unwrap();
        assert!(c.coeffs().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_projects_onto_odd_modes() {
        let d = dom(5);
        let g = Grid::constant(d.grid_side(), 1.0);
        let c = d.from_grid(&g).unwrap();
        for j in 1..=5 {
            for k in 1..=5 {
                let expect = if j % 2 == 1 && k % 2 == 1 {
                    (2.0 / PI) * (2.0 / j as f64) * (2.0 / k as f64)
                } else {
                    0.0
                };
                assert!((c.coeffs()[d.index(j, k)] - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn projection_budget_is_enforced() {
        let d = Domain::new(DomainSpec::minimal(4)).unwrap();
        let g = d.to_grid(&ScalarField::zeros(4));
        let g5 = g.mul(&g).mul(&g).mul(&g).mul(&g);
        assert!(d.project(&g5).is_ok());
        let g6 = g5.mul(&g);
        assert!(matches!(d.project(&g6), Err(Error::Dealiasing { .. })));
        assert!(d.integrate(&g6).is_ok());
        assert!(d.integrate(&g6.mul(&g)).is_err());
    }
}
