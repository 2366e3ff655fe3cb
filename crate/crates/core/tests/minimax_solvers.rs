mod common;

use std::sync::OnceLock;

use common::{fraction_problem, gap_problem, N};
use enray::minimax::{
    build_linking_frame, newton_refine, peak_selection, Constants, FrameSamples, PeakOptions,
};
use enray::verify::cerami_monitor;
use enray::{Error, Field, ProblemSpec, SaddleResult, Solver, SolverOptions, TruncationParams};

const E0: f64 = 0.01;

fn k0_problem() -> &'static ProblemSpec {
    static P: OnceLock<ProblemSpec> = OnceLock::new();
    P.get_or_init(|| fraction_problem(N, 0.5))
}

fn k1_problem() -> &'static ProblemSpec {
    static P: OnceLock<ProblemSpec> = OnceLock::new();
    P.get_or_init(|| gap_problem(N, 1, 0.5))
}

fn k0_solver() -> &'static Solver<'static> {
    static S: OnceLock<Solver<'static>> = OnceLock::new();
    S.get_or_init(|| Solver::new(k0_problem(), SolverOptions::default()).unwrap())
}

fn k1_solver() -> &'static Solver<'static> {
    static S: OnceLock<Solver<'static>> = OnceLock::new();
    S.get_or_init(|| Solver::new(k1_problem(), SolverOptions::default()).unwrap())
}

fn k0_lmm() -> &'static SaddleResult {
    static R: OnceLock<SaddleResult> = OnceLock::new();
    R.get_or_init(|| k0_solver().solve(E0).unwrap())
}

/// Golden-section maximizer of a unimodal `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-13 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn synthetic_constants_match_scan_maximizer() {
    // 1 − C₁ε = 0.75, γ = 4, C₂ = 0.25
    let c = Constants::from_parts(1.0, 0.25, 0.25, 4.0, 1.5, 1.0).unwrap();
    let f = |r: f64| 0.5 * 0.75 * r * r - 0.25 * r.powi(4);
    let m = 300_000;
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
    for i in 1..=m {
        let r = 3.0 * i as f64 / m as f64;
        if f(r) > best {
            best = f(r);
            arg = r;
        }
    }
    let h = 3.0 / m as f64;
    // refine by bisection on the sign of f′(r) = 0.75r − r³
    let df = |r: f64| 0.75 * r - r.powi(3);
    let (mut lo, mut hi) = (arg - h, arg + h);
    assert!(df(lo) > 0.0 && df(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if df(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_star = 0.5 * (lo + hi);
    assert!((c.r_k_lambda - r_star).abs() <= 1e-9, "{} vs {r_star}", c.r_k_lambda);
    assert!((c.e_k_lambda - f(r_star)).abs() <= 1e-9);
    assert!((c.r_k_lambda - 0.75f64.sqrt()).abs() <= 1e-9);
    assert!((c.e_k_lambda - 0.140625).abs() <= 1e-9);
    for i in 1..=1000 {
        let r = 3.0 * i as f64 / 1000.0;
        assert!(c.f(c.r_k_lambda) >= c.f(r));
    }
}

#[test]
fn constants_reject_bad_coercivity() {
    assert!(Constants::from_parts(4.0, 0.25, 0.25, 4.0, 1.5, 1.0).is_err());
}

#[test]
fn frame_shapes_follow_the_minus_space() {
    let samples = FrameSamples { t: 7, s: 5, sphere: 6, plus_sphere: 10 };
    let p1 = k1_problem();
    let f1 = build_linking_frame(&p1.spectral, p1.spectral.unit_mode(1), 20.0, samples, 0);
    assert_eq!(f1.sphere, vec![vec![1.0], vec![-1.0]]);
    assert!((p1.spectral.norm1(&f1.minus_basis[0]).total - 1.0).abs() <= 1e-12);
    assert_eq!(f1.cap_points().len(), 7 * 2);
    // t ∈ {0, T}: the s = 0 point once, then both signs for 4 positive s
    assert_eq!(f1.side_points().len(), 2 * (1 + 4 * 2));

    let p0 = k0_problem();
    let f0 = build_linking_frame(&p0.spectral, p0.spectral.unit_mode(0), 20.0, samples, 0);
    assert!(f0.cap_points().is_empty());
    let side = f0.side_points();
    assert_eq!(side.len(), 2);
    assert_eq!(side[0].max_abs(), 0.0);
    let n1 = p0.spectral.norm1(&side[1]).total;
    assert!((n1 - 20.0).abs() <= 1e-10 * 20.0, "{n1}");

    let p3 = gap_problem(40, 3, 0.5);
    let f3 = build_linking_frame(&p3.spectral, p3.spectral.unit_mode(3), 5.0, samples, 0);
    assert_eq!(f3.sphere.len(), 6);
    for c in &f3.sphere {
        assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn cap_values_are_nonpositive_for_any_frame() {
    let p = k1_problem();
    let s = k1_solver();
    let e = 0.2 * s.constants().e_k_lambda;
    let r = s.constants().r_k_lambda;
    for t_max in [1.5 * r, 4.0 * r, 16.0 * r] {
        for rho in [0.1, 0.5 * r] {
            let frame = build_linking_frame(&p.spectral, p.spectral.unit_mode(1), t_max, FrameSamples::default(), 0);
            let tp = TruncationParams { rho };
            for u in frame.cap_points() {
                assert!(p.rayleigh_trunc(&u, e, tp).unwrap() <= 0.0);
            }
        }
    }
}

#[test]
fn linking_values_separate_for_both_gaps() {
    for (s, scale) in [(k0_solver(), None), (k1_solver(), Some(0.2))] {
        let e = scale.map_or(E0, |f| f * s.constants().e_k_lambda);
        let frame = s.frame(e).unwrap();
        let lv = s.linking_values(&frame, e).unwrap();
        assert!(lv.b <= 0.0 && lv.a > 0.0, "b = {}, a = {}", lv.b, lv.a);
        assert!(lv.b_c <= 0.0);
        // the analytic lower bound from the constants
        assert!(lv.a >= lv.delta_e, "a = {} < δ_E = {}", lv.a, lv.delta_e);

        // enlarging the frame never raises the side value
        let tp = s.truncation(e);
        let bigger = build_linking_frame(
            &s.problem().spectral,
            frame.u_bar_plus.clone(),
            2.0 * frame.t_max,
            frame.samples,
            0,
        );
        let sup = |pts: Vec<Field>| {
            pts.iter()
                .map(|u| s.problem().rayleigh_trunc(u, e, tp).unwrap())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        assert!(sup(bigger.side_points()) <= sup(frame.side_points()));
    }
}

#[test]
fn peak_in_two_dimensional_subspace_dominates_grid_scan() {
    let s = k1_solver();
    let p = s.problem();
    let e = 0.2 * s.constants().e_k_lambda;
    let frame = s.frame(e).unwrap();
    let lv = s.linking_values(&frame, e).unwrap();
    let tp = s.truncation(e);
    let opts = PeakOptions { start_t: s.constants().r_k_lambda, tol: 1e-10, max_iter: 500 };
    let peak = peak_selection(p, &frame, &frame.u_bar_plus, e, tp, None, opts).unwrap();

    // independent grid over (t, s) ∈ [0, T] × [−T, T]
    let big_t = frame.t_max;
    let m = 120;
    let mut grid_max = f64::NEG_INFINITY;
    for i in 0..=m {
        let t = big_t * i as f64 / m as f64;
        for j in 0..=2 * m {
            let sc = big_t * (j as f64 / m as f64 - 1.0);
            let u = frame.u_bar_plus.scaled(t).add_scaled(sc, &frame.minus_basis[0]);
            grid_max = grid_max.max(p.rayleigh_trunc(&u, e, tp).unwrap());
        }
    }
    assert!(peak.value >= grid_max - 1e-9, "peak {} < grid {grid_max}", peak.value);
    assert!(peak.value >= lv.a);
    let start = p.rayleigh_trunc(&frame.u_bar_plus.scaled(opts.start_t), e, tp).unwrap();
    assert!(peak.value >= start);
}

#[test]
fn peak_for_mountain_pass_is_a_ray_maximum() {
    let s = k0_solver();
    let p = s.problem();
    let frame = s.frame(E0).unwrap();
    let tp = s.truncation(E0);
    let opts = PeakOptions { start_t: s.constants().r_k_lambda, tol: 1e-10, max_iter: 500 };
    let peak = peak_selection(p, &frame, &frame.u_bar_plus, E0, tp, None, opts).unwrap();
    assert_eq!(peak.coords.len(), 1);
    let ray = |t: f64| p.rayleigh_trunc(&frame.u_bar_plus.scaled(t), E0, tp).unwrap();
    let t_star = golden_max(ray, 0.5 * peak.t(), 2.0 * peak.t());
    assert!((peak.t() - t_star).abs() <= 1e-5 * t_star);
    assert!(peak.value >= ray(t_star) - 1e-12);
}

fn assert_prescribed_energy(p: &ProblemSpec, r: &SaddleResult, e: f64) {
    assert!(r.converged);
    assert!((p.rayleigh(&r.u, e).unwrap() - r.mu).abs() <= 1e-8);
    assert!(p.grad_energy(&r.u, r.mu).unwrap().dual_residual <= 1e-10);
    assert!((p.energy(&r.u, r.mu).unwrap() - e).abs() <= 1e-8);
    assert!(r.mu > 0.0);
    assert!(r.norm1 > r.rho);
    let tp = TruncationParams { rho: r.rho };
    assert_eq!(p.rayleigh_trunc(&r.u, e, tp).unwrap(), p.rayleigh(&r.u, e).unwrap());
}

#[test]
fn local_minimax_mountain_pass_case() {
    let s = k0_solver();
    let r = k0_lmm();
    assert_prescribed_energy(s.problem(), r, E0);
    assert!((r.energy_achieved - E0).abs() <= 1e-8);
    let frame = s.frame(E0).unwrap();
    let lv = s.linking_values(&frame, E0).unwrap();
    assert!(r.mu >= lv.a - 1e-6);
    assert!(r.lq_norm > 0.0);
}

#[test]
fn composed_values_do_not_increase_along_the_descent() {
    let r = k0_lmm();
    assert!(r.trace.len() >= 2);
    // the last record belongs to the refined solution; the others are outer steps
    let outer = &r.trace[..r.trace.len() - 1];
    for w in outer.windows(2) {
        assert!(w[1].value <= w[0].value + 1e-12 * w[0].value.abs());
    }
}

#[test]
fn cerami_quantities_are_driven_to_zero() {
    let rep = cerami_monitor(&k0_lmm().trace).unwrap();
    assert!(rep.final_scaled_residual <= 1e-6);
    assert!(rep.bounded);
    assert!(!rep.lq_collapsing);
}

#[test]
fn cerami_monitor_rejects_empty_trace() {
    assert!(matches!(cerami_monitor(&[]), Err(Error::EmptyTrace)));
}

#[test]
fn refinement_of_a_solution_is_a_fixed_point() {
    let p = k0_problem();
    let r = k0_lmm();
    let rep = newton_refine(p, &r.u, r.mu, E0, &SolverOptions::default()).unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.mu, r.mu);
    assert_eq!(rep.u, r.u);
}

#[test]
fn refinement_restores_the_prescribed_energy() {
    let p = k0_problem();
    let r = k0_lmm();
    // a nearby point with energy defect of order 1e−4: the energy is
    // stationary in u at a solution, so the multiplier is perturbed as well
    let u0 = r.u.scaled(1.0 + 1e-3);
    let lq = p.parts(&r.u).unwrap().lq;
    let mu0 = r.mu + 5e-5 * p.q / lq;
    let defect0 = (p.energy(&u0, mu0).unwrap() - E0).abs();
    assert!(defect0 <= 1e-4 && defect0 > 1e-6, "initial defect {defect0}");
    let rep = newton_refine(p, &u0, mu0, E0, &SolverOptions::default()).unwrap();
    assert!(rep.iterations <= 10);
    assert!(rep.dual_residual <= 1e-10);
    assert!(rep.energy_defect.abs() <= 1e-10);
    assert!((rep.mu - r.mu).abs() <= 1e-8);
}

#[test]
fn paths_agree_with_local_minimax() {
    let s = k0_solver();
    let p = s.problem();
    let m = s.solve_mpa(E0).unwrap();
    assert_prescribed_energy(p, &m, E0);
    assert!((m.mu - k0_lmm().mu).abs() <= 1e-4, "{} vs {}", m.mu, k0_lmm().mu);
}

#[test]
fn initial_mountain_pass_path_crosses_the_sphere() {
    let s = k0_solver();
    let p = s.problem();
    let tp = s.truncation(E0);
    let bar = s.start_direction(0);
    let mut t = s.constants().r_k_lambda;
    while p.rayleigh_trunc(&bar.scaled(t), E0, tp).unwrap() >= 0.0 {
        t *= 2.0;
    }
    assert!(p.rayleigh(&bar.scaled(t), E0).unwrap() < 0.0);
    let frame = s.frame(E0).unwrap();
    let a = s.linking_values(&frame, E0).unwrap().a;
    let np = SolverOptions::default().path_points;
    let path_max = (0..np)
        .map(|j| p.rayleigh_trunc(&bar.scaled(t * j as f64 / (np - 1) as f64), E0, tp).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(path_max >= a, "path max {path_max} < a = {a}");
}

#[test]
fn mountain_pass_requires_positive_operator() {
    assert!(matches!(k1_solver().solve_mpa(0.1), Err(Error::InvalidParameter(_))));
}

#[test]
fn energies_outside_the_range_are_rejected() {
    let s = k0_solver();
    let ek = s.constants().e_k_lambda;
    for e in [0.0, -1.0, ek, 2.0 * ek] {
        assert!(matches!(s.solve(e), Err(Error::EnergyOutOfRange { .. })), "E = {e}");
    }
}

#[test]
fn local_minimax_linking_case() {
    let s = k1_solver();
    let p = s.problem();
    let e = 0.2 * s.constants().e_k_lambda;
    let frame = s.frame(e).unwrap();
    let lv = s.linking_values(&frame, e).unwrap();
    let r = s.solve(e).unwrap();
    assert_prescribed_energy(p, &r, e);
    assert!(r.mu >= lv.a - 1e-6, "μ = {} < a = {}", r.mu, lv.a);
    // the solution has a genuine W⁻ component
    let (_, minus) = p.spectral.split(&r.u);
    assert!(minus.max_abs() > 0.0);
}
