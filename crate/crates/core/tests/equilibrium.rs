use std::f64::consts::{PI, SQRT_2};

use betagas::equilibrium::{
    check_edge_regularity, detect_support, energy, euler_lagrange_residual, solve_equilibrium,
    solve_equilibrium_from, EdgeClass, EquilibriumSolution, GridConfig,
};
use betagas::measure::{uniform_cells, DiscreteMeasure};
use betagas::potential::{Domain, Potential};
use betagas::Error;
use proptest::prelude::*;

fn quadratic() -> Potential {
    Potential::polynomial(Domain::interval(-3.0, 3.0).unwrap(), vec![0.0, 0.0, 1.0]).unwrap()
}

fn flat() -> Potential {
    Potential::polynomial(Domain::interval(-1.0, 1.0).unwrap(), vec![0.0]).unwrap()
}

fn semicircle_cdf(x: f64) -> f64 {
    let t = x.clamp(-SQRT_2, SQRT_2);
    0.5 + (t * (2.0 - t * t).sqrt() / 2.0 + (t / SQRT_2).asin()) / PI
}

fn arcsine_cdf(x: f64) -> f64 {
    0.5 + x.clamp(-1.0, 1.0).asin() / PI
}

fn semicircle_solution() -> EquilibriumSolution {
    solve_equilibrium(&quadratic(), &GridConfig::with_nodes(512)).unwrap()
}

#[test]
fn semicircle_oracle() {
    let sol = semicircle_solution();
    assert_eq!(sol.support.len(), 1);
    let s = &sol.support[0];
    assert!((s.lo + SQRT_2).abs() < 1e-2 && (s.hi - SQRT_2).abs() < 1e-2);
    assert_eq!((s.lo_class, s.hi_class), (EdgeClass::Soft, EdgeClass::Soft));
    assert!((sol.robin_constant + 1.0 + 2f64.ln()).abs() < 1e-2);
    assert!((sol.filling_fractions[0] - 1.0).abs() < 1e-12);
    let cells = sol.measure.cells().unwrap();
    let mut err = 0.0f64;
    for (i, &(a, b)) in cells.iter().enumerate() {
        let exact = (semicircle_cdf(b) - semicircle_cdf(a)) / (b - a);
        err = err.max((sol.measure.density(i) - exact).abs());
    }
    assert!(err < 2e-2, "density error {err}");
    assert!(sol.kkt_residual <= 1e-9, "{}", sol.kkt_residual);
    assert!(sol.residuals.on_support < 5e-3 && sol.residuals.off_support < 5e-3, "{:?}", sol.residuals);
    assert!((sol.measure.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(sol.measure.weights().iter().all(|w| *w >= 0.0));
}

#[test]
fn arcsine_oracle() {
    let sol = solve_equilibrium(&flat(), &GridConfig::with_nodes(512)).unwrap();
    assert_eq!(sol.support.len(), 1);
    let s = &sol.support[0];
    assert_eq!((s.lo_class, s.hi_class), (EdgeClass::Hard, EdgeClass::Hard));
    assert_eq!((s.lo, s.hi), (-1.0, 1.0));
    assert!((sol.robin_constant + 2.0 * 2f64.ln()).abs() < 1e-2);
    let mut err = 0.0f64;
    for (i, &x) in sol.measure.nodes().iter().enumerate() {
        if x.abs() < 0.9 {
            let exact = 1.0 / (PI * (1.0 - x * x).sqrt());
            err = err.max((sol.measure.density(i) - exact).abs());
        }
    }
    assert!(err < 5e-2, "density error {err}");
}

#[test]
fn double_well_two_cuts() {
    let v = Potential::polynomial(Domain::interval(-3.0, 3.0).unwrap(), vec![0.0, 0.0, -3.0, 0.0, 1.0]).unwrap();
    let sol = solve_equilibrium(&v, &GridConfig::with_nodes(512)).unwrap();
    assert_eq!(sol.support.len(), 2);
    assert!((sol.filling_fractions[0] - 0.5).abs() < 1e-2);
    assert!((sol.filling_fractions[1] - 0.5).abs() < 1e-2);
    assert!((sol.filling_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let (again, fractions) = detect_support(&sol.measure, 1e-3, v.domain()).unwrap();
    assert_eq!(again, sol.support);
    assert_eq!(fractions, sol.filling_fractions);
}

#[test]
fn injected_semicircle_residual() {
    let cells = uniform_cells(&[(-3.0, 3.0)], 1024).unwrap();
    let m = DiscreteMeasure::from_cdf(cells, semicircle_cdf).unwrap();
    let sol = EquilibriumSolution::from_measure(m, &quadratic(), 1e-3).unwrap();
    let r = euler_lagrange_residual(&sol, &quadratic());
    assert!(r.on_support < 5e-3, "{r:?}");
}

#[test]
fn injected_arcsine_residual() {
    let cells = uniform_cells(&[(-1.0, 1.0)], 4096).unwrap();
    let m = DiscreteMeasure::from_cdf(cells, arcsine_cdf).unwrap();
    let sol = EquilibriumSolution::from_measure(m, &flat(), 1e-3).unwrap();
    let r = euler_lagrange_residual(&sol, &flat());
    assert!(r.on_support < 5e-3, "{r:?}");
}

#[test]
fn perturbation_increases_energy() {
    let sol = semicircle_solution();
    let e0 = energy(&sol.measure, &quadratic(), 2.0).unwrap();
    let mid = sol.measure.len() / 2;
    for i in [mid - 40, mid, mid + 17] {
        let mut w = sol.measure.weights().to_vec();
        w[i] += 1e-2;
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let e1 = energy(&sol.measure.with_weights(w).unwrap(), &quadratic(), 2.0).unwrap();
        assert!(e1 > e0, "node {i}: {e1} <= {e0}");
    }
}

#[test]
fn energy_examples() {
    let atoms = DiscreteMeasure::atoms(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
    assert_eq!(energy(&atoms, &flat(), 2.0).unwrap(), f64::INFINITY);

    let cells = uniform_cells(&[(-1.0, 1.0)], 4096).unwrap();
    let m = DiscreteMeasure::from_cdf(cells, arcsine_cdf).unwrap();
    let e = energy(&m, &flat(), 2.0).unwrap();
    assert!((e - 2f64.ln()).abs() < 5e-3, "{e}");
    let e4 = energy(&m, &flat(), 4.0).unwrap();
    assert!((e4 - 2.0 * e).abs() < 1e-12 * e.abs());

    let narrow = Potential::polynomial(Domain::interval(-0.5, 0.5).unwrap(), vec![0.0]).unwrap();
    assert!(matches!(energy(&m, &narrow, 2.0), Err(Error::Domain(_))));
}

#[test]
fn warm_start_is_idempotent() {
    let v = quadratic();
    let grid = GridConfig::with_nodes(256);
    let sol = solve_equilibrium(&v, &grid).unwrap();
    let again = solve_equilibrium_from(&v, &sol.measure, &grid).unwrap();
    let e0 = energy(&sol.measure, &v, 2.0).unwrap();
    let e1 = energy(&again.measure, &v, 2.0).unwrap();
    assert!((e0 - e1).abs() < 1e-10, "{e0} vs {e1}");
}

#[test]
fn minimizer_is_beta_invariant() {
    let v = quadratic();
    let sol = solve_equilibrium(&v, &GridConfig::with_nodes(256)).unwrap();
    let e1 = energy(&sol.measure, &v, 1.0).unwrap();
    let e4 = energy(&sol.measure, &v, 4.0).unwrap();
    assert!((e4 - 4.0 * e1).abs() < 1e-12 * e1.abs());
    assert!((sol.energy(4.0) - 4.0 * sol.energy(1.0)).abs() < 1e-12);
    let mut w = sol.measure.weights().to_vec();
    w.rotate_left(1);
    let shifted = sol.measure.with_weights(w).unwrap();
    for beta in [1.0, 4.0] {
        assert!(energy(&shifted, &v, beta).unwrap() > energy(&sol.measure, &v, beta).unwrap());
    }
}

#[test]
fn grid_refinement_moves_constant_little() {
    let coarse = solve_equilibrium(&quadratic(), &GridConfig::with_nodes(256)).unwrap();
    let fine = solve_equilibrium(&quadratic(), &GridConfig::with_nodes(512)).unwrap();
    assert!((coarse.robin_constant - fine.robin_constant).abs() < 5e-3);
}

#[test]
fn edge_regularity_identities() {
    for sol in [semicircle_solution(), solve_equilibrium(&flat(), &GridConfig::with_nodes(512)).unwrap()] {
        let reg = check_edge_regularity(&sol).unwrap();
        let hi = sol.support[0].hi;
        let dev = reg
            .values
            .iter()
            .filter(|(x, _)| x.abs() < 0.9 * hi)
            .map(|(_, s)| (s - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 2e-2, "interior deviation {dev}");
        assert!(reg.is_regular());
    }
}

#[test]
fn zeroed_density_flags_violation() {
    let sol = semicircle_solution();
    let mid = sol.measure.len() / 2;
    let mut w = sol.measure.weights().to_vec();
    w[mid] = 0.0;
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let mut broken = sol.clone();
    broken.measure = std::sync::Arc::new(sol.measure.with_weights(w).unwrap());
    let reg = check_edge_regularity(&broken).unwrap();
    assert!(reg.min.abs() < 1e-12);
    assert!(!reg.is_regular());
}

#[test]
fn solver_rejects_coarse_grid() {
    assert!(matches!(
        solve_equilibrium(&quadratic(), &GridConfig::with_nodes(32)),
        Err(Error::InvalidSpec(_))
    ));
}

fn random_weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|mut w| {
        w[0] += 1e-3;
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_midpoint_convex(a in random_weights(48), b in random_weights(48), beta in 0.5f64..4.0) {
        let v = quadratic();
        let cells = uniform_cells(&[(-2.0, 2.0)], 48).unwrap();
        let m1 = DiscreteMeasure::from_cells(cells.clone(), a.clone()).unwrap();
        let m2 = DiscreteMeasure::from_cells(cells.clone(), b.clone()).unwrap();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let mm = DiscreteMeasure::from_cells(cells, mid).unwrap();
        let e1 = energy(&m1, &v, beta).unwrap();
        let e2 = energy(&m2, &v, beta).unwrap();
        let em = energy(&mm, &v, beta).unwrap();
        prop_assume!(e1.is_finite() && e2.is_finite());
        prop_assert!(em <= 0.5 * (e1 + e2) + 1e-9);
    }
}
