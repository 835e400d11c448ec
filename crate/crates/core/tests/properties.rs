use nkl::bound_checker::{rate_k, rate_u};
use nkl::discretization::{assemble_divergence_form, build_grid, weighted_inner, BoundaryCondition};
use nkl::fractional_calculus::{balakrishnan_rule, balakrishnan_scalar, subordination_measure};
use nkl::measure_models::DensityModel;
use nkl::nash_verifier::{
    fractional_nash_terms, gamma_certificate, jensen_check, shifted_power_check, GammaCertificate, NashRate,
};
use nkl::spectral_engine::eigendecompose;
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = DensityModel> {
    prop_oneof![
        (1.2f64..4.0).prop_map(|b| DensityModel::cauchy(b, 1).unwrap()),
        (0.3f64..1.8).prop_map(|a| DensityModel::exp_smooth(a, 1).unwrap()),
        Just(DensityModel::gauss(1).unwrap()),
    ]
}

fn bc_strategy() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![Just(BoundaryCondition::Neumann), Just(BoundaryCondition::Dirichlet)]
}

/// Adaptive Simpson on `[a, b]`.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `int_x^inf du / (gamma u B(gamma u)^alpha)` with `B(s) = s^{2/d}`, via `u = x e^s`.
fn rate_u_by_quadrature(alpha: f64, gamma: f64, d: u32, x: f64) -> f64 {
    let b = |s: f64| s.powf(2.0 / d as f64);
    let integrand = |s: f64| {
        let u = x * s.exp();
        u / (gamma * u * b(gamma * u).powf(alpha))
    };
    let head = integrand(0.0);
    let decay = 2.0 * alpha / d as f64;
    let end = 45.0 / decay;
    simpson(&integrand, 0.0, end, 1e-13 * head / decay)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_self_adjoint_nonnegative_with_nonpositive_couplings(
        model in model_strategy(),
        bc in bc_strategy(),
        l in 2.0f64..15.0,
        n in 5usize..120,
        seed in any::<u64>(),
    ) {
        let grid = build_grid(l, n).unwrap();
        let op = assemble_divergence_form(&model, &grid, bc).unwrap();
        prop_assert!(op.sub.iter().all(|s| *s <= 0.0));
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let f: Vec<f64> = (0..n).map(|_| next()).collect();
        let g: Vec<f64> = (0..n).map(|_| next()).collect();
        let af = op.apply(&f).unwrap();
        let ag = op.apply(&g).unwrap();
        let lhs = weighted_inner(&af, &g, &op).unwrap();
        let rhs = weighted_inner(&f, &ag, &op).unwrap();
        let scale = op.spectral_bound() * op.weights.iter().sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale, "lhs {lhs} rhs {rhs}");
        prop_assert!(op.energy(&f).unwrap() >= -1e-12 * scale);
    }

    #[test]
    fn second_order_consistency(model in model_strategy(), shift in -0.5f64..0.5) {
        // f = exp(-(x-s)^2/2) cos(x - s) and its exact derivatives
        let f = |x: f64| (-(x - shift).powi(2) / 2.0).exp() * (x - shift).cos();
        let df = |x: f64| {
            let y = x - shift;
            (-y * y / 2.0).exp() * (-y * y.cos() - y.sin())
        };
        let d2f = |x: f64| {
            let y = x - shift;
            (-y * y / 2.0).exp() * ((y * y - 2.0) * y.cos() + 2.0 * y * y.sin())
        };
        let exact = |x: f64| -d2f(x) - model.grad_log_rho(x) * df(x);
        let err = |n: usize, stride: usize| {
            let grid = build_grid(6.0, n).unwrap();
            let op = assemble_divergence_form(&model, &grid, BoundaryCondition::Neumann).unwrap();
            let vals: Vec<f64> = grid.nodes.iter().map(|x| f(*x)).collect();
            let a = op.apply(&vals).unwrap();
            (0..n)
                .step_by(stride)
                .filter(|&i| grid.nodes[i].abs() <= 3.0)
                .map(|i| (a[i] - exact(grid.nodes[i])).abs())
                .fold(0.0, f64::max)
        };
        let coarse = err(121, 1);
        let fine = err(241, 2);
        let ratio = coarse / fine;
        prop_assert!((ratio - 4.0).abs() <= 0.8, "ratio {ratio}");
    }

    #[test]
    fn rate_inverse_relation(alpha in 0.1f64..3.0, gamma in 0.05f64..2.0, d in 1u32..5, ly in -6.0f64..6.0) {
        let y = 10f64.powf(ly);
        let k = rate_k(alpha, gamma, d, rate_u(alpha, gamma, d, y).unwrap()).unwrap();
        prop_assert!((k * k - y).abs() <= 1e-10 * y);
    }

    #[test]
    fn rate_u_matches_defining_integral(alpha in 0.1f64..2.0, gamma in 0.1f64..2.0, d in 1u32..4, lx in -3.0f64..3.0) {
        let x = 10f64.powf(lx);
        let closed = rate_u(alpha, gamma, d, x).unwrap();
        let quad = rate_u_by_quadrature(alpha, gamma, d, x);
        prop_assert!((closed - quad).abs() <= 1e-8 * closed, "closed {closed} quad {quad}");
    }

    #[test]
    fn gamma_certificate_invariants(alpha in 0.01f64..0.99, eps in 0.05f64..0.95) {
        let c = gamma_certificate(alpha, eps).unwrap();
        let alpha_n = 0.5f64.powi(c.n_steps as i32);
        prop_assert!(alpha_n <= alpha && 2.0 * alpha_n > alpha);
        prop_assert!(c.a_n > 0.0 && c.a_n <= 1.0 && c.b_n > 0.0 && c.b_n <= 1.0);
        prop_assert_eq!(c.gamma, c.a_n.powf(alpha / alpha_n).min(c.b_n));
        prop_assert!((c.b_n - eps.powi(c.n_steps as i32)).abs() <= 1e-14);
    }

    #[test]
    fn shifted_power_inequality(llam in -4.0f64..6.0, c in 0.0f64..50.0, alpha in 0.05f64..4.0) {
        let r = shifted_power_check(10f64.powf(llam), c, alpha);
        prop_assert!(r.ok, "lhs {} rhs {}", r.lhs, r.rhs);
    }

    #[test]
    fn balakrishnan_reproduces_powers(llam in -4.0f64..6.0, alpha in 0.05f64..0.95) {
        let lambda = 10f64.powf(llam);
        let rule = balakrishnan_rule(alpha, 1e-4, 1e6).unwrap();
        let q = balakrishnan_scalar(lambda, alpha, &rule).unwrap();
        let exact = lambda.powf(alpha);
        prop_assert!((q - exact).abs() <= 1e-8 * exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn subordination_laplace_identity(t in 0.3f64..2.5, alpha in 0.3f64..0.9, lambda in 0.0f64..100.0) {
        let m = subordination_measure(t, alpha).unwrap();
        prop_assert!((m.laplace(lambda) - (-t * lambda.powf(alpha)).exp()).abs() <= 1e-6);
    }

    #[test]
    fn jensen_and_gap_monotone_in_gamma(beta in 1.5f64..3.0, seed in any::<u64>(), alpha in 0.2f64..0.9) {
        let model = DensityModel::cauchy(beta, 1).unwrap();
        let grid = build_grid(6.0, 80).unwrap();
        let op = assemble_divergence_form(&model, &grid, BoundaryCondition::Neumann).unwrap();
        let dec = eigendecompose(&op).unwrap();
        let mut state = seed | 1;
        let raw: Vec<f64> = (0..grid.n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let norm = op.norm2(&raw).unwrap().sqrt();
        let f: Vec<f64> = raw.iter().map(|a| a / norm).collect();
        let lmax = dec.eigenvalues.iter().copied().fold(0.0, f64::max);
        for phi in [
            Box::new(|t: f64| t.powf(1.5)) as Box<dyn Fn(f64) -> f64>,
            Box::new(|t: f64| t * t),
            Box::new(move |t: f64| (t / lmax).exp()),
        ] {
            prop_assert!(jensen_check(&dec, &f, phi).unwrap().ok);
        }

        let v: Vec<f64> = grid.nodes.iter().map(|x| model.lyapunov_v(*x)).collect();
        let cert = gamma_certificate(alpha, 0.5).unwrap();
        let rate = NashRate::classical(1);
        let c = model.lyapunov_constant();
        let mut last = f64::INFINITY;
        for factor in [1.0, 1.25, 1.5, 2.0] {
            let bumped = GammaCertificate { gamma: cert.gamma * factor, ..cert };
            let gap = fractional_nash_terms(&dec, &f, alpha, &bumped, c, &rate, &v).unwrap().gap();
            prop_assert!(gap <= last + 1e-12 * last.abs().max(1.0));
            last = gap;
        }
    }
}
