//! Gauss quadrature on the P1 mesh against fine Riemann sums of the interpolant.

mod common;

use common::riemann;
use enray::Mesh;
use proptest::prelude::*;

const CELLS: usize = 100_000;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn power_integrals_match_riemann_sums() {
    let m = Mesh::new(200, 3).unwrap();
    let u = m.interpolate(|x| (std::f64::consts::PI * x).sin() + 0.3 * (3.0 * std::f64::consts::PI * x).sin());
    for p in [1.5_f64, 2.0, 4.0] {
        let gauss = m.integrate(&u, |_, s| s.abs().powf(p)).unwrap();
        let oracle = riemann(u.as_slice(), CELLS, |_, s| s.abs().powf(p));
        assert!(close(gauss, oracle, 1e-7), "p = {p}: {gauss} vs {oracle}");
    }
}

#[test]
fn stiffness_form_is_the_dirichlet_integral() {
    let m = Mesh::new(50, 2).unwrap();
    let u = m.interpolate(|x| x * (1.0 - x) * (1.0 + 2.0 * x));
    let h = m.h();
    let mut nodal = vec![0.0];
    nodal.extend_from_slice(u.as_slice());
    nodal.push(0.0);
    let exact: f64 = nodal.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum();
    assert!(close(m.stiffness().quad_form(&u), exact, 1e-13));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_quad_form_matches_riemann(vals in prop::collection::vec(-2.0..2.0_f64, 30)) {
        let m = Mesh::new(30, 3).unwrap();
        let u = enray::Field(vals);
        let oracle = riemann(u.as_slice(), CELLS, |_, s| s * s);
        prop_assert!(close(m.mass().quad_form(&u), oracle, 1e-8));
        let gauss = m.integrate(&u, |_, s| s * s).unwrap();
        prop_assert!(close(gauss, oracle, 1e-8));
    }

    #[test]
    fn load_vector_pairs_like_the_integral(
        vals in prop::collection::vec(0.1..2.0_f64, 25),
        test in prop::collection::vec(-1.0..1.0_f64, 25),
        order in 2usize..=5,
    ) {
        let m = Mesh::new(25, order).unwrap();
        let u = enray::Field(vals);
        let w = enray::Field(test);
        // degree ≤ 3 per element once multiplied by the test function: exact for every order
        let load = m.load(&u, |x, s| x * s + s * s).unwrap();
        let wu = w.as_slice();
        // ∫ f(x, u_h) w_h as a Riemann sum, with w_h the interpolant of the test vector
        let dx = 1.0 / CELLS as f64;
        let oracle: f64 = (0..CELLS)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                let s = common::p1_eval(u.as_slice(), x);
                (x * s + s * s) * common::p1_eval(wu, x)
            })
            .sum::<f64>() * dx;
        // the midpoint oracle resolves element kinks only to O(dx²·n²)
        prop_assert!(close(load.dot(&w), oracle, 1e-6), "{} vs {}", load.dot(&w), oracle);
    }
}
