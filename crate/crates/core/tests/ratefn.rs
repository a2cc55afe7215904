use std::sync::Arc;

use betagas::equilibrium::{solve_equilibrium, EquilibriumSolution, GridConfig};
use betagas::potential::{
    build_critical_potential, CriticalPotentialSpec, Domain, Interval, Neighborhood, Potential, WellPlacement,
};
use betagas::ratefn::{rate_function, scan_criticality, RateFunction};
use betagas::Error;

fn semicircle_effective(x: f64) -> f64 {
    let r = (x * x - 2.0).sqrt();
    x * r - 2.0 * ((x + r) / 2f64.sqrt()).ln()
}

struct Base {
    w: Potential,
    sol: EquilibriumSolution,
    a: Neighborhood,
}

fn base(upper: f64) -> Base {
    let w = Potential::polynomial(Domain::interval(-3.0, upper).unwrap(), vec![0.0, 0.0, 1.0]).unwrap();
    let sol = solve_equilibrium(&w, &GridConfig::with_nodes(512)).unwrap();
    let a = Neighborhood::new(vec![Interval::new(-1.6, 1.6).unwrap()]).unwrap();
    Base { w, sol, a }
}

fn critical(b: &Base, placement: WellPlacement, power: u32) -> RateFunction {
    let spec = CriticalPotentialSpec {
        measure: b.sol.measure.clone(),
        robin_constant: b.sol.robin_constant,
        neighborhood: b.a.clone(),
        placement,
        power,
    };
    let c = build_critical_potential(&spec, &b.w).unwrap();
    let vsol = EquilibriumSolution::from_measure((*b.sol.measure).clone(), &c.potential, 1e-3).unwrap();
    RateFunction::new(Arc::new(vsol), c.potential.clone())
}

#[test]
fn quadratic_closed_form() {
    let b = base(4.0);
    let rf = RateFunction::new(Arc::new(b.sol.clone()), Arc::new(b.w.clone()));
    for x in [1.6, 2.0, 3.0, 3.9] {
        let j = rate_function(&rf, x).unwrap();
        assert!((j - semicircle_effective(x)).abs() < 1e-3, "x = {x}: {j}");
        assert!(j > 0.0);
    }
    assert_eq!(rate_function(&rf, 0.3).unwrap(), 0.0);
    assert!(matches!(rate_function(&rf, 4.5), Err(Error::Domain(_))));
}

#[test]
fn quadratic_is_not_critical() {
    let b = base(3.0);
    let rf = RateFunction::new(Arc::new(b.sol.clone()), Arc::new(b.w.clone()));
    let report = scan_criticality(&rf, &b.a, 4000).unwrap();
    assert!(report.critical_points.is_empty());
    assert!(report.plateaus.is_empty());
    assert!(!report.certifies_quadratic());
}

#[test]
fn unit_depth_well() {
    let b = base(4.0);
    let rf = critical(&b, WellPlacement::Depth(1.0), 2);
    let report = scan_criticality(&rf, &b.a, 4000).unwrap();
    assert_eq!(report.critical_points.len(), 1);
    let p = &report.critical_points[0];
    let expected = 1.6 + semicircle_effective(1.6).sqrt();
    assert!((p.c0 - expected).abs() <= report.step, "{} vs {expected}", p.c0);
    assert!((p.second_derivative - 2.0).abs() < 0.2);
    assert!((p.q - 2.0).abs() < 0.1);
    assert!((p.beta_q - 1.0).abs() < 0.05);
    assert!(report.certifies_quadratic());
}

#[test]
fn quartic_well() {
    let b = base(4.0);
    let rf = critical(&b, WellPlacement::At(2.6), 4);
    let report = scan_criticality(&rf, &b.a, 4000).unwrap();
    assert_eq!(report.critical_points.len(), 1);
    let p = &report.critical_points[0];
    assert!((p.q - 4.0).abs() < 0.3, "q = {}", p.q);
    assert!((p.beta_q - 0.5).abs() < 0.05);
    assert!(!report.certifies_quadratic());
}

#[test]
fn rate_function_is_nonnegative() {
    let b = base(4.0);
    for rf in [
        RateFunction::new(Arc::new(b.sol.clone()), Arc::new(b.w.clone())),
        critical(&b, WellPlacement::At(2.6), 2),
    ] {
        let min = rf.evaluation_grid(4000).iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-6, "min {min}");
    }
}

#[test]
fn confining_tail_is_monotone() {
    let w = Potential::polynomial(Domain::interval(-3.0, 12.0).unwrap(), vec![0.0, 0.0, 1.0]).unwrap();
    let sol = solve_equilibrium(&w, &GridConfig::with_nodes(512)).unwrap();
    let rf = RateFunction::new(Arc::new(sol), Arc::new(w));
    let x0 = 2.0 * 3.0;
    let j0 = rf.eval(x0).unwrap();
    let mut previous = j0;
    for k in 1..=60 {
        let x = x0 + 0.1 * k as f64;
        let j = rf.eval(x).unwrap();
        assert!(j >= j0 && j >= previous);
        previous = j;
    }
}

#[test]
fn scan_is_stable_under_refinement() {
    let b = base(4.0);
    let rf = critical(&b, WellPlacement::At(2.6), 2);
    let coarse = scan_criticality(&rf, &b.a, 2000).unwrap();
    let fine = scan_criticality(&rf, &b.a, 4000).unwrap();
    assert_eq!(coarse.critical_points.len(), fine.critical_points.len());
    for (c, f) in coarse.critical_points.iter().zip(&fine.critical_points) {
        assert!((c.c0 - f.c0).abs() < coarse.step);
        assert!(b.a.distance(c.c0) > 0.0);
    }
}

#[test]
fn neighborhood_must_cover_support() {
    let b = base(4.0);
    let rf = RateFunction::new(Arc::new(b.sol.clone()), Arc::new(b.w.clone()));
    let small = Neighborhood::new(vec![Interval::new(-1.0, 1.0).unwrap()]).unwrap();
    assert!(matches!(scan_criticality(&rf, &small, 1000), Err(Error::InvalidSpec(_))));
}
