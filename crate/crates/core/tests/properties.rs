//! Structural invariants on random band-limited data.

use proptest::prelude::*;

use vesicle_core::basis::Domain;
use vesicle_core::dynamics::{evaluate, Model, SystemState};
use vesicle_core::energy::{self, EnergyParams};
use vesicle_core::field::{self, ScalarField, VelocityField};
use vesicle_core::fluid::{self, AlphaParams};
use vesicle_core::ledger::TraceKernel;
use vesicle_core::noise::{NoisePath, NoiseSpec};
use vesicle_core::veriflab::g_norm_bracket;

const N: usize = 4;

fn dom() -> Domain {
    Domain::with_modes(N).unwrap()
}

fn coeffs(amp: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-amp..amp, N * N)
}

fn plain(c: Vec<f64>) -> ScalarField {
    ScalarField::from_coeffs(N, c, false)
}

fn phase(c: Vec<f64>) -> ScalarField {
    ScalarField::from_coeffs(N, c, true)
}

fn vel(c: Vec<f64>) -> VelocityField {
    VelocityField::from_coeffs(N, c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn params() -> EnergyParams {
    EnergyParams {
        m1: 0.6,
        m2: 0.9,
        a: -5.0,
        b: 4.0,
        gamma: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(c in coeffs(2.0)) {
        let d = dom();
        let f = plain(c.clone());
        let quad = d.integrate(&d.to_grid(&f).mul(&d.to_grid(&f))).unwrap();
        prop_assert!(close(quad, dot(&c, &c), 1e-12));
        prop_assert!(close(field::inner(&d, &f, &f).unwrap(), dot(&c, &c), 1e-14));
    }

    #[test]
    fn laplacian_is_diagonal(c in coeffs(2.0), offset in any::<bool>()) {
        let d = dom();
        let f = ScalarField::from_coeffs(N, c.clone(), offset);
        let back = d.project(&field::laplacian_grid(&d, &f)).unwrap();
        for (i, l) in d.eigenvalues().iter().enumerate() {
            prop_assert!((back.coeffs()[i] + l * c[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn integration_by_parts(a in coeffs(1.0), b in coeffs(1.0)) {
        let d = dom();
        let (f, g) = (plain(a.clone()), plain(b.clone()));
        let [fx, fy] = field::gradient(&d, &f).unwrap();
        let [gx, gy] = field::gradient(&d, &g).unwrap();
        let lhs = d.integrate(&fx.mul(&gx).add(&fy.mul(&gy))).unwrap();
        let rhs: f64 = a.iter().zip(&b).zip(d.eigenvalues()).map(|((x, y), l)| l * x * y).sum();
        let minus_lap = -d.integrate(&field::laplacian_grid(&d, &f).mul(&d.to_grid(&g))).unwrap();
        prop_assert!(close(lhs, rhs, 1e-11));
        prop_assert!(close(minus_lap, rhs, 1e-11));
    }

    #[test]
    fn g_functional_lies_in_its_bracket(c in coeffs(3.0)) {
        let d = dom();
        let f = plain(c);
        let (lo, hi) = g_norm_bracket(&d);
        let g = field::g_functional(&d, &f).unwrap();
        let h = field::h2_norm(&d, &f).unwrap().powi(2);
        prop_assume!(h > 1e-12);
        prop_assert!(g >= lo * h * (1.0 - 1e-12) && g <= hi * h * (1.0 + 1e-12));
    }

    #[test]
    fn holder_interpolation(c in coeffs(2.0), offset in any::<bool>()) {
        // ∫f⁴ ≤ |f|₂ |f|₆³ and |f|₆ ≤ |f|∞ |Q|^{1/6}
        let d = dom();
        let nb = field::norms(&d, &ScalarField::from_coeffs(N, c, offset)).unwrap();
        prop_assert!(nb.l4.powi(4) <= nb.l2 * nb.l6.powi(3) * (1.0 + 1e-12) + 1e-14);
        prop_assert!(nb.l6 <= nb.linf * std::f64::consts::PI.powf(1.0 / 3.0) * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn product_is_bilinear_and_commutative(
        a in coeffs(1.0), b in coeffs(1.0), e in coeffs(1.0), s in -3.0..3.0f64,
    ) {
        let d = dom();
        let (f, g, h) = (plain(a), plain(b), plain(e));
        let fg = field::product(&d, &f, &g).unwrap();
        let gf = field::product(&d, &g, &f).unwrap();
        let lin = field::product(&d, &f.axpy(s, &h), &g).unwrap();
        let hg = field::product(&d, &h, &g).unwrap();
        for i in 0..N * N {
            prop_assert!((fg.coeffs()[i] - gf.coeffs()[i]).abs() < 1e-13);
            let expect = fg.coeffs()[i] + s * hg.coeffs()[i];
            prop_assert!((lin.coeffs()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn rotational_term_is_skew(a in coeffs(1.0), b in coeffs(1.0), c in coeffs(1.0)) {
        let d = dom();
        let (w, u, v) = (vel(a), vel(b), vel(c));
        let bwu = fluid::b_tilde(&d, &w, &u).unwrap();
        let bvu = fluid::b_tilde(&d, &v, &u).unwrap();
        let scale = 1.0 + field::v_norm(&d, &w) * field::v_norm(&d, &u) * field::v_norm(&d, &v);
        prop_assert!(field::inner_vec(&bwu, &w).unwrap().abs() < 1e-12 * scale);
        let sum = field::inner_vec(&bwu, &v).unwrap() + field::inner_vec(&bvu, &w).unwrap();
        prop_assert!(sum.abs() < 1e-12 * scale);
    }

    #[test]
    fn leray_projection_is_idempotent(c in coeffs(2.0)) {
        let d = dom();
        let u = vel(c);
        let [g1, g2] = d.to_grid_vec(&u);
        let back = fluid::leray_project(&d, [&g1, &g2]).unwrap();
        let twice = {
            let [h1, h2] = d.to_grid_vec(&back);
            fluid::leray_project(&d, [&h1, &h2]).unwrap()
        };
        for i in 0..N * N {
            prop_assert!((back.coeffs()[i] - u.coeffs()[i]).abs() < 1e-12);
            prop_assert!((twice.coeffs()[i] - back.coeffs()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn helmholtz_inverse_inverts(c in coeffs(2.0), alpha in 0.05..3.0f64) {
        let d = dom();
        let u = vel(c);
        let back = fluid::helmholtz_inverse(&d, &fluid::helmholtz_apply(&d, &u, alpha), alpha);
        for i in 0..N * N {
            prop_assert!((back.coeffs()[i] - u.coeffs()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn chemical_potential_is_the_energy_gradient(c in coeffs(0.8), dir in coeffs(1.0)) {
        let d = dom();
        let p = params();
        let phi = phase(c.clone());
        let mu = energy::chemical_potential(&d, &phi, &p).unwrap();
        let h = 1e-5;
        let at = |s: f64| {
            let shifted: Vec<f64> = c.iter().zip(&dir).map(|(x, y)| x + s * y).collect();
            energy::energy(&d, &phase(shifted), &p).unwrap().total
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!(close(dot(mu.coeffs(), &dir), fd, 1e-6), "{} vs {}", dot(mu.coeffs(), &dir), fd);
    }

    #[test]
    fn second_variation_is_symmetric_and_a_second_difference(
        c in coeffs(0.8), a in coeffs(1.0), b in coeffs(1.0),
    ) {
        let d = dom();
        let p = params();
        let phi = phase(c.clone());
        let (psi, rho) = (plain(a.clone()), plain(b.clone()));
        let ab = energy::second_variation(&d, &phi, &psi, &rho, &p).unwrap();
        let ba = energy::second_variation(&d, &phi, &rho, &psi, &p).unwrap();
        prop_assert!(close(ab, ba, 1e-12));
        // directional derivative of ⟨μ, ρ⟩ along ψ
        let h = 1e-5;
        let dmu = |s: f64| {
            let shifted: Vec<f64> = c.iter().zip(&a).map(|(x, y)| x + s * y).collect();
            let mu = energy::chemical_potential(&d, &phase(shifted), &p).unwrap();
            dot(mu.coeffs(), &b)
        };
        let fd = (dmu(h) - dmu(-h)) / (2.0 * h);
        prop_assert!(close(ab, fd, 1e-6), "{ab} vs {fd}");
    }

    #[test]
    fn chemical_potential_splits_as_m_plus_n(c in coeffs(1.5)) {
        let d = dom();
        let phi = phase(c);
        let (m, n) = energy::mn_split(&d, &phi, &params()).unwrap();
        let mu = energy::chemical_potential(&d, &phi, &params()).unwrap();
        for i in 0..N * N {
            prop_assert!((m.coeffs()[i] + n.coeffs()[i] - mu.coeffs()[i]).abs() < 1e-12 * (1.0 + mu.coeffs()[i].abs()));
        }
    }

    #[test]
    fn coupling_and_transport_cancel(v in coeffs(1.0), c in coeffs(1.0)) {
        let model = Model::new(dom(), AlphaParams { alpha: 0.7, nu: 1.0 }, params()).unwrap();
        let state = SystemState { v, phi: c, t: 0.0, step: 0 };
        let mask = model.mask(N);
        let e = evaluate(&model, &state, &mask).unwrap();
        let a = dot(&e.coupling, &e.w);
        let b = dot(&e.transport, &e.mu);
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        prop_assert!(dot(&e.advection, &e.w).abs() < 1e-10 * (1.0 + dot(&e.w, &e.w)));
    }

    #[test]
    fn noise_is_a_pure_function_of_its_keys(seed in any::<u64>(), stream in 0u64..1000, step in 0u64..1_000_000) {
        let d = dom();
        let spec = NoiseSpec::power_law(1.0, 1.0, 1.0, 2.0, seed).with_stream(stream);
        let a = spec.increments(&d, 1e-3, step).unwrap();
        let b = spec.increments(&d, 1e-3, step).unwrap();
        prop_assert_eq!(&a, &b);
        // low modes do not depend on the truncation
        let big = Domain::with_modes(N + 3).unwrap();
        let c = spec.increments(&big, 1e-3, step).unwrap();
        for j in 1..=N {
            for k in 1..=N {
                prop_assert_eq!(a.dw[d.index(j, k)], c.dw[big.index(j, k)]);
                prop_assert_eq!(a.dz[d.index(j, k)], c.dz[big.index(j, k)]);
            }
        }
    }

    #[test]
    fn coarse_path_sums_fine_increments(seed in any::<u64>(), step in 0u64..10_000, sub in 1u64..5) {
        let d = dom();
        let spec = NoiseSpec::power_law(0.5, 1.0, 0.5, 2.0, seed);
        let fine = NoisePath::new(spec, 1e-3);
        let coarse = NoisePath::coarsened(spec, 1e-3, sub);
        prop_assert!((coarse.dt() - sub as f64 * 1e-3).abs() < 1e-15);
        let c = coarse.increments(&d, step).unwrap();
        let mut sum = vec![0.0; N * N];
        for s in 0..sub {
            let f = fine.increments(&d, step * sub + s).unwrap();
            sum.iter_mut().zip(&f.dz).for_each(|(a, b)| *a += b);
        }
        for i in 0..N * N {
            prop_assert!((c.dz[i] - sum[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn assembled_trace_equals_mode_by_mode(c in coeffs(1.0), zeta in 0.1..3.0f64, p_b in 1.6..3.0f64) {
        let model = Model::new(dom(), AlphaParams::default(), params()).unwrap();
        let spec = NoiseSpec::power_law(0.0, 1.0, zeta, p_b, 0);
        let mask = model.mask(N);
        let kernel = TraceKernel::new(&model, &spec, &mask);
        let pg = energy::PhaseGrids::new(&model.domain, &phase(c)).unwrap();
        let a = kernel.second_variation_trace(&model, &pg).unwrap();
        let b = kernel.second_variation_trace_direct(&model, &pg).unwrap();
        prop_assert!(close(a, b, 1e-11), "{a} vs {b}");
    }
}

