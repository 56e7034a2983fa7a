//! Hand-derived reference values, each checked against a closed form computed here.

use std::f64::consts::{E, PI};

use hodgeqi_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

fn random_points(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if x.iter().map(|v| v * v).sum::<f64>() > 0.01 {
                break x;
            }
        })
        .collect()
}

#[test]
fn green_constants() {
    let c = fundamental_constant(1, 3).unwrap();
    assert!((c.e - (-0.079_577_471_545_947_67)).abs() < 1e-16);
    assert!(!c.logarithmic);
    let c = fundamental_constant(1, 2).unwrap();
    assert_eq!(c.e_rational, rat(1, 2));
    assert!((c.c - 0.159_154_943_091_895_35).abs() < 1e-16 && c.d == 0.0);
    let c = fundamental_constant(2, 2).unwrap();
    assert_eq!(c.e_rational, rat(1, 8));
    assert!((c.c - 1.0 / (8.0 * PI)).abs() < 1e-17 && c.d == 0.0);
}

#[test]
fn newtonian_potential_is_harmonic_by_finite_differences() {
    let phi = phi_expr(1, 3).unwrap();
    let h = 1e-3;
    for x in random_points(1, 20, 3) {
        let f = |p: &[f64]| phi.evaluate(p, 0.0).unwrap();
        let mut lap = -6.0 * f(&x);
        for s in 0..3 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[s] += h;
            b[s] -= h;
            lap += f(&a) + f(&b);
        }
        lap /= h * h;
        assert!(lap.abs() < 1e-4 * f(&x).abs().max(1.0), "{lap} at {x:?}");
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((f(&x) + 1.0 / (4.0 * PI * r)).abs() < 1e-15 / r);
    }
}

#[test]
fn single_term_fundamental_solutions() {
    let t = phi_expr(2, 2).unwrap().terms();
    assert_eq!(t.len(), 1);
    assert_eq!((t[0].rpow, t[0].logpow, t[0].coeff), (2, 1, rat(1, 8)));
    let t = phi_expr(1, 3).unwrap().terms();
    assert_eq!(t.len(), 1);
    assert_eq!((t[0].rpow, t[0].logpow, t[0].coeff), (-1, 0, rat(-1, 4)));
    let t = phi_expr(1, 2).unwrap().terms();
    assert_eq!(t.len(), 1);
    assert_eq!((t[0].rpow, t[0].logpow, t[0].coeff), (0, 1, rat(1, 2)));
}

#[test]
fn symbolic_laplacians_vanish() {
    let harm = phi_expr(1, 3).unwrap().laplacian().unwrap();
    let bih = phi_expr(2, 2).unwrap().laplacian().unwrap().laplacian().unwrap();
    for x in random_points(2, 100, 3) {
        assert!(harm.evaluate(&x, 0.0).unwrap().abs() <= 1e-12);
        assert!(bih.evaluate(&x[..2], 0.0).unwrap().abs() <= 1e-12);
    }
}

#[test]
fn rabut_coefficients_from_factorials() {
    let fact = |n: i128| -> i128 { (1..=n).product() };
    let closed: Vec<Rational> =
        (0..3).map(|i| rat(if i % 2 == 0 { 2 } else { -2 } * fact(i) * fact(i), fact(2 * i + 2))).collect();
    assert_eq!(closed, vec![rat(1, 1), rat(-1, 12), rat(1, 90)]);
    assert_eq!(rabut_coefficients(1), closed[..1].to_vec());
    assert_eq!(rabut_coefficients(2), closed[..2].to_vec());
    assert_eq!(rabut_coefficients(3), closed);
}

#[test]
fn truncated_stencil_polynomials() {
    let q = build_q(1, 2, 1).unwrap();
    assert_eq!(q.coeff(&[1]), rat(1, 1));
    assert_eq!(q.coeff(&[2]), rat(-1, 12));
    assert_eq!(q.degree(), Some(2));
    assert_eq!(q.terms().count(), 2);
    let q = build_q(1, 2, 2).unwrap();
    assert_eq!(q.coeff(&[1, 0]), rat(1, 1));
    assert_eq!(q.coeff(&[0, 1]), rat(1, 1));
    assert_eq!(q.coeff(&[2, 0]), rat(-1, 12));
    assert_eq!(q.coeff(&[0, 2]), rat(-1, 12));
    assert_eq!(q.coeff(&[1, 1]), rat(0, 1));
    assert_eq!(q.terms().count(), 4);
}

#[test]
fn squared_second_difference() {
    let mut q = MultiPoly::zero(1);
    q.add_term(vec![2], rat(1, 1));
    let s = Stencil::from_poly(&q);
    let expected = [(-2, 1), (-1, -4), (0, 6), (1, -4), (2, 1)];
    assert_eq!(s.len(), expected.len());
    for (o, w) in expected {
        assert_eq!(s.weight(&[o]), rat(w, 1));
    }
}

#[test]
fn one_dimensional_symbol_at_pi() {
    let q = build_q(1, 1, 1).unwrap();
    let v = psi_hat(&q, 1, &[PI]);
    assert!((v - 4.0 / (PI * PI)).abs() < 1e-15);
    assert!((v - 0.405_284_734_569_351_1).abs() < 1e-15);
}

#[test]
fn harmonic_kernel_vanishes_off_the_origin() {
    let ev = KernelEvaluator::new(KernelSpec::harmonic(2, 2, 2).unwrap()).unwrap();
    for x in random_points(3, 100, 2) {
        let m = ev.eval(&x, &[0, 0]).unwrap();
        assert!(m.max_abs() <= 1e-12, "{m:?} at {x:?}");
    }
}

#[test]
fn matern_at_unit_argument() {
    let v = matern_c8(1.0, 1.0);
    assert!((v - 266.0 / (105.0 * E)).abs() < 1e-15);
    assert!((v - 0.931_961_250_967_653_9).abs() < 1e-15);
    assert!((matern_c8(0.5, 2.0) - v).abs() < 1e-15);
}

#[test]
fn kernel_scale_rule() {
    let h = select_kernel_scale(0.1, 2, 2, 1e-3, 0.05).unwrap();
    assert!((h - 0.05 * 0.1_f64.powf(1.0 / 5.999)).abs() < 1e-16);
    assert!((h - 0.034_06).abs() < 1e-5);
}

#[test]
fn builtin_field_values_and_structure() {
    let v = BuiltinField::WsDiv.value(&[0.25, 0.25]);
    assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] + 0.5).abs() < 1e-15);
    let h = 1e-4;
    let fd = |f: BuiltinField, x: &[f64], comp: usize, axis: usize| {
        let (mut a, mut b) = (x.to_vec(), x.to_vec());
        a[axis] += h;
        b[axis] -= h;
        (f.value(&a)[comp] - f.value(&b)[comp]) / (2.0 * h)
    };
    for x in random_points(4, 50, 2) {
        let div = fd(BuiltinField::WsDiv, &x, 0, 0) + fd(BuiltinField::WsDiv, &x, 1, 1);
        assert!(div.abs() < 1e-6, "{div}");
        let curl = fd(BuiltinField::WsCurl, &x, 1, 0) - fd(BuiltinField::WsCurl, &x, 0, 1);
        assert!(curl.abs() < 1e-6, "{curl}");
        let p = |y: &[f64]| -(PI * y[0]).cos() * (PI * y[1]).sin();
        let grad = [
            (p(&[x[0] + h, x[1]]) - p(&[x[0] - h, x[1]])) / (2.0 * h),
            (p(&[x[0], x[1] + h]) - p(&[x[0], x[1] - h])) / (2.0 * h),
        ];
        let c = BuiltinField::WsCurl.value(&x);
        assert!((c[0] - grad[0]).abs() < 1e-6 && (c[1] - grad[1]).abs() < 1e-6);
    }
}

#[test]
fn spectral_projection_of_trigonometric_fields() {
    let n = 64;
    let sample =
        |f: BuiltinField| GridField::sample(vec![0.0, 0.0], 1.0 / n as f64, vec![n, n], move |x| f.value(x)).unwrap();
    let rows = |g: &GridField| -> Vec<Vec<f64>> { (0..g.node_count()).map(|i| g.value(i).to_vec()).collect() };
    let zeros = vec![vec![0.0, 0.0]; n * n];
    let d = sample(BuiltinField::WsDiv);
    assert!(rmse(&rows(&fft_project(&d, Part::Div).unwrap()), &rows(&d)) <= 1e-12);
    let c = GridField::sample(vec![0.0, 0.0], 2.0 / n as f64, vec![n, n], |x| BuiltinField::WsCurl.value(x)).unwrap();
    assert!(rmse(&rows(&fft_project(&c, Part::Div).unwrap()), &zeros) <= 1e-12);
    assert!(rmse(&rows(&fft_project(&c, Part::Curl).unwrap()), &rows(&c)) <= 1e-12);
}

fn ws_rmse(part: BuiltinField, project: Part, h: f64) -> f64 {
    let (origin, extents) = GridField::lattice_for_box(&[0.0, 0.0], &[12.0, 12.0], h).unwrap();
    let data = GridField::sample(origin, h, extents, move |x| part.value(x)).unwrap();
    let points = uniform_mesh(&[5.5, 5.5], &[6.5, 6.5], 6);
    let out = match project {
        Part::Div => project_div(&data, 2, 2, &points, &[0, 0], Truncation::All).unwrap(),
        _ => project_curl(&data, 2, 2, &points, &[0, 0], Truncation::All).unwrap(),
    };
    let values: Vec<Vec<f64>> = out.into_iter().map(|e| e.value).collect();
    rmse(&values, &vec![vec![0.0, 0.0]; points.len()])
}

#[test]
fn projections_annihilate_the_complementary_part() {
    let (a, b) = (ws_rmse(BuiltinField::WsCurl, Part::Div, 0.4), ws_rmse(BuiltinField::WsCurl, Part::Div, 0.2));
    assert!(b < a / 4.0 && b < 1e-2, "{a} {b}");
    let (a, b) = (ws_rmse(BuiltinField::WsDiv, Part::Curl, 0.4), ws_rmse(BuiltinField::WsDiv, Part::Curl, 0.2));
    assert!(b < a / 4.0 && b < 1e-2, "{a} {b}");
}

#[test]
fn curl_convolution_of_divergence_free_field_shrinks() {
    let ev = KernelEvaluator::new(KernelSpec::curl(2, 2, 2).unwrap()).unwrap();
    let f = |t: &[f64]| BuiltinField::WsDiv.value(t);
    let x = [0.3, 0.4];
    let size = |big_h: f64| {
        let v = dense_convolution(&ev, big_h, &f, &x, Quadrature::for_scale(big_h)).unwrap().value;
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    };
    let (a, b) = (size(0.2), size(0.1));
    assert!(b < a / 4.0, "{a} {b}");
}

#[test]
fn strangfix_suite_passes_for_biharmonic_kernel() {
    let p = ValidateParams { kernels: vec![(2, 2)], ..Default::default() };
    let entries = strangfix_suite(&p).unwrap();
    assert_eq!(entries.len(), 3);
    assert!(entries.iter().all(|e| e.passed), "{entries:?}");
}
