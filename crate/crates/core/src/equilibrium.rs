//! Equilibrium measures of the logarithmic energy on a grid.
//!
//! The energy `E[μ] = (β/4) ∬ (V(ξ) + V(η) - 2 log|ξ - η|) dμ dμ` is
//! discretised with piecewise-constant densities on grid cells, giving the
//! quadratic form `(β/2) (v·w - wᵀ K w)` where `K` holds exact cell-pair
//! averages of the log kernel. `-K` is positive definite on zero-mass
//! directions, so the problem is a strictly convex QP over the simplex. It
//! is solved by accelerated projected gradient, then polished by an exact
//! active-set solve of the KKT system.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{dot, Execution};
use crate::measure::{cell_pair_log_average, uniform_cells, DiscreteMeasure};
use crate::potential::{Domain, Potential};

/// Largest grid the dense kernel is built for.
pub const MAX_NODES: usize = 4096;

/// Node weights above this make a grid measure count as atomic.
pub const ATOMICITY_THRESHOLD: f64 = 0.5;

/// Thresholds at which the number of cuts is re-counted for the sensitivity report.
pub const SENSITIVITY_THRESHOLDS: [f64; 4] = [1e-4, 1e-3, 1e-2, 5e-2];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub nodes: usize,
    /// Truncation window; required when the domain is unbounded.
    pub window: Option<(f64, f64)>,
    /// Relative density threshold for support detection.
    pub support_threshold: f64,
    /// KKT tolerance of the discrete problem.
    pub tolerance: f64,
    pub max_iterations: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nodes: 512,
            window: None,
            support_threshold: 1e-3,
            tolerance: 1e-9,
            max_iterations: 20_000,
            execution: Execution::Auto,
        }
    }
}

impl GridConfig {
    pub fn with_nodes(nodes: usize) -> Self {
        Self {
            nodes,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    Hard,
    Soft,
}

/// One connected component `[α_h⁻, α_h⁺]` of the detected support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_class: EdgeClass,
    pub hi_class: EdgeClass,
    /// Index range of grid nodes in this component.
    pub first: usize,
    pub last: usize,
}

impl SupportInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max |2∫log|x-ξ|dμ - V(x) - C_V|` over support nodes.
    pub on_support: f64,
    /// `max (2∫log|x-ξ|dμ - V(x) - C_V)_+` over off-support nodes.
    pub off_support: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub measure: Arc<DiscreteMeasure>,
    pub support: Vec<SupportInterval>,
    /// `C_V`.
    pub robin_constant: f64,
    /// Masses `f⋆_h` of the support components.
    pub filling_fractions: Vec<f64>,
    pub residuals: Residuals,
    /// KKT residual of the discrete problem.
    pub kkt_residual: f64,
    /// `∫V dμ - ∬ log|ξ-η| dμ dμ`, i.e. the energy at `β = 2`.
    pub log_energy: f64,
    pub iterations: usize,
    pub support_threshold: f64,
    /// `(threshold, number of cuts)` pairs.
    pub cut_sensitivity: Vec<(f64, usize)>,
}

impl EquilibriumSolution {
    /// Wraps a given measure (e.g. a closed-form one) with the derived
    /// quantities: support, `C_V` and residuals.
    pub fn from_measure(measure: DiscreteMeasure, potential: &Potential, threshold: f64) -> Result<Self> {
        let cells = measure
            .cells()
            .ok_or_else(|| Error::InvalidSpec("equilibrium measures need grid cells".into()))?
            .to_vec();
        let v: Vec<f64> = cells.iter().map(|&(a, b)| potential.cell_average(a, b)).collect();
        let kernel = LogKernel::new(&cells, Execution::Sequential)?;
        let mut kw = vec![0.0; cells.len()];
        kernel.apply(measure.weights(), &mut kw, Execution::Sequential);
        Self::assemble(
            Arc::new(measure),
            potential,
            &v,
            &kw,
            threshold,
            0,
        )
    }

    fn assemble(
        measure: Arc<DiscreteMeasure>,
        potential: &Potential,
        v: &[f64],
        kw: &[f64],
        threshold: f64,
        iterations: usize,
    ) -> Result<Self> {
        let w = measure.weights();
        let phi: Vec<f64> = v.iter().zip(kw).map(|(vi, k)| vi - 2.0 * k).collect();
        let mut on_support: Vec<f64> = phi
            .iter()
            .zip(w)
            .filter(|(_, wi)| **wi > 0.0)
            .map(|(p, _)| *p)
            .collect();
        let c = median(&mut on_support);
        let kkt = kkt_residual(w, &phi, c);
        let robin_constant = -c;
        let (support, filling_fractions) = detect_support(&measure, threshold, potential.domain())?;
        let log_energy = dot(w, v) - dot(w, kw);
        let cut_sensitivity = SENSITIVITY_THRESHOLDS
            .iter()
            .map(|&t| {
                (
                    t,
                    detect_support(&measure, t, potential.domain()).map_or(0, |(s, _)| s.len()),
                )
            })
            .collect();
        let mut sol = Self {
            measure,
            support,
            robin_constant,
            filling_fractions,
            residuals: Residuals {
                on_support: 0.0,
                off_support: 0.0,
            },
            kkt_residual: kkt,
            log_energy,
            iterations,
            support_threshold: threshold,
            cut_sensitivity,
        };
        sol.residuals = euler_lagrange_residual(&sol, potential);
        Ok(sol)
    }

    /// Whether `x` lies in a detected support component.
    pub fn in_support(&self, x: f64) -> bool {
        self.support.iter().any(|s| s.contains(x))
    }

    /// `2 ∫ log|x - ξ| dμ(ξ)`.
    pub fn log_field(&self, x: f64) -> f64 {
        self.measure.log_field(x)
    }

    /// `E[μ_eq]` at inverse temperature `β`.
    pub fn energy(&self, beta: f64) -> f64 {
        0.5 * beta * self.log_energy
    }
}

/// Dense Galerkin matrix `K_ij` of cell-pair log averages.
pub struct LogKernel {
    n: usize,
    matrix: Vec<f64>,
}

impl LogKernel {
    pub fn new(cells: &[(f64, f64)], exec: Execution) -> Result<Self> {
        let n = cells.len();
        if n > MAX_NODES {
            return Err(Error::InvalidSpec(format!("grid of {n} nodes exceeds {MAX_NODES}")));
        }
        let uniform = is_uniform(cells);
        let mut matrix = vec![0.0; n * n];
        if uniform {
            // Toeplitz: entries depend on |i - j| only.
            let diag: Vec<f64> = (0..n).map(|k| cell_pair_log_average(cells[0], cells[k])).collect();
            for i in 0..n {
                for j in 0..n {
                    matrix[i * n + j] = diag[i.abs_diff(j)];
                }
            }
        } else {
            let rows: Vec<Vec<f64>> = exec.map((0..n).collect(), |i| {
                (0..n).map(|j| cell_pair_log_average(cells[i], cells[j])).collect()
            });
            for (i, r) in rows.into_iter().enumerate() {
                matrix[i * n..(i + 1) * n].copy_from_slice(&r);
            }
        }
        Ok(Self { n, matrix })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    /// `out = K w`.
    pub fn apply(&self, w: &[f64], out: &mut [f64], exec: Execution) {
        exec.matvec(&self.matrix, w, out);
    }
}

fn is_uniform(cells: &[(f64, f64)]) -> bool {
    let w0 = cells[0].1 - cells[0].0;
    cells.windows(2).all(|c| c[0].1 == c[1].0)
        && cells.iter().all(|c| ((c.1 - c.0) - w0).abs() <= 1e-12 * w0)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Galerkin KKT residual: spread of the effective potential on the support
/// plus violation of the inequality off it.
fn kkt_residual(w: &[f64], phi: &[f64], c: f64) -> f64 {
    let mut r = 0.0f64;
    for (wi, p) in w.iter().zip(phi) {
        if *wi > 0.0 {
            r = r.max((p - c).abs());
        } else {
            r = r.max(c - p);
        }
    }
    r
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(x: &mut [f64]) {
    let mut u: Vec<f64> = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for xi in x.iter_mut() {
        *xi = (*xi - theta).max(0.0);
    }
}

/// `E[μ] = (β/4) ∬ (V(ξ) + V(η) - 2 log|ξ - η|) dμ(ξ) dμ(η)`.
///
/// Atomic measures, and grid measures with a node heavier than
/// [`ATOMICITY_THRESHOLD`], have infinite energy.
pub fn energy(measure: &DiscreteMeasure, potential: &Potential, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidSpec(format!("beta = {beta} must be positive")));
    }
    if let Some(&x) = measure.nodes().iter().find(|x| !potential.domain().contains(**x)) {
        return Err(Error::Domain(format!("grid node {x} lies outside the potential's domain")));
    }
    let cells = match measure.cells() {
        Some(c) if measure.weights().iter().all(|w| *w <= ATOMICITY_THRESHOLD) => c,
        _ => return Ok(f64::INFINITY),
    };
    let w = measure.weights();
    let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let mut potential_term = 0.0;
    let mut log_term = 0.0;
    for &i in &active {
        potential_term += w[i] * potential.cell_average(cells[i].0, cells[i].1);
        let mut row = 0.0;
        for &j in &active {
            row += w[j] * cell_pair_log_average(cells[i], cells[j]);
        }
        log_term += w[i] * row;
    }
    Ok(0.5 * beta * (potential_term - log_term))
}

/// Minimises the discrete energy over the weight simplex.
pub fn solve_equilibrium(potential: &Potential, grid: &GridConfig) -> Result<EquilibriumSolution> {
    if grid.nodes < 64 {
        return Err(Error::InvalidSpec(format!("grid needs at least 64 nodes, got {}", grid.nodes)));
    }
    let domain = grid_domain(potential.domain(), grid.window)?;
    let intervals: Vec<(f64, f64)> = domain.intervals().iter().map(|i| (i.lo, i.hi)).collect();
    let cells = uniform_cells(&intervals, grid.nodes)?;
    let n = cells.len();
    solve_on_cells(potential, cells, vec![1.0 / n as f64; n], grid)
}

/// Re-solves on the grid of `initial`, starting from its weights.
pub fn solve_equilibrium_from(
    potential: &Potential,
    initial: &DiscreteMeasure,
    grid: &GridConfig,
) -> Result<EquilibriumSolution> {
    let cells = initial
        .cells()
        .ok_or_else(|| Error::InvalidSpec("warm start needs a grid measure".into()))?
        .to_vec();
    if let Some(&(a, b)) = cells.iter().find(|(a, b)| !potential.domain().contains(0.5 * (a + b))) {
        return Err(Error::Domain(format!("cell [{a}, {b}] lies outside the potential's domain")));
    }
    solve_on_cells(potential, cells, initial.weights().to_vec(), grid)
}

fn solve_on_cells(
    potential: &Potential,
    cells: Vec<(f64, f64)>,
    mut w: Vec<f64>,
    grid: &GridConfig,
) -> Result<EquilibriumSolution> {
    let exec = grid.execution;
    let n = cells.len();
    let v: Vec<f64> = cells.iter().map(|&(a, b)| potential.cell_average(a, b)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("potential is not finite on the grid".into()));
    }
    let kernel = LogKernel::new(&cells, exec)?;

    let iterations = accelerated_projected_gradient(&kernel, &v, &mut w, grid, exec);

    let mut kw = vec![0.0; n];
    if let Some(polished) = active_set_polish(&kernel, &v, &w, grid.tolerance) {
        w = polished;
    }
    kernel.apply(&w, &mut kw, exec);
    let phi: Vec<f64> = v.iter().zip(&kw).map(|(vi, k)| vi - 2.0 * k).collect();
    let mut on: Vec<f64> = phi.iter().zip(&w).filter(|(_, x)| **x > 0.0).map(|(p, _)| *p).collect();
    let c = median(&mut on);
    let kkt = kkt_residual(&w, &phi, c);
    if !(kkt <= grid.tolerance) {
        let on_support = w
            .iter()
            .zip(&phi)
            .filter(|(x, _)| **x > 0.0)
            .map(|(_, p)| (p - c).abs())
            .fold(0.0, f64::max);
        let off_support = w
            .iter()
            .zip(&phi)
            .filter(|(x, _)| **x == 0.0)
            .map(|(_, p)| (c - p).max(0.0))
            .fold(0.0, f64::max);
        return Err(Error::Convergence {
            iterations,
            on_support,
            off_support,
        });
    }
    let measure = DiscreteMeasure::from_cells(cells, w)?;
    EquilibriumSolution::assemble(
        Arc::new(measure),
        potential,
        &v,
        &kw,
        grid.support_threshold,
        iterations,
    )
}

fn grid_domain(domain: &Domain, window: Option<(f64, f64)>) -> Result<Domain> {
    match window {
        Some((lo, hi)) => domain.truncate(lo, hi),
        None if domain.is_bounded() => Ok(domain.clone()),
        None => Err(Error::Domain(
            "unbounded domain: set a grid window to truncate it".into(),
        )),
    }
}

/// Largest eigenvalue of `-2K` on zero-sum vectors, by power iteration.
fn curvature_bound(kernel: &LogKernel, exec: Execution) -> f64 {
    let n = kernel.len();
    let mut x: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) * 0.7).sin()).collect();
    let mut y = vec![0.0; n];
    let mut lambda = 1.0;
    for _ in 0..60 {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let norm = dot(&x, &x).sqrt();
        if norm == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        kernel.apply(&x, &mut y, exec);
        y.iter_mut().for_each(|v| *v *= -2.0);
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= mean);
        lambda = dot(&x, &y);
        std::mem::swap(&mut x, &mut y);
    }
    lambda.abs().max(1e-12)
}

/// FISTA with adaptive restart on `F(w) = v·w - wᵀKw`. Returns the number
/// of iterations used.
fn accelerated_projected_gradient(
    kernel: &LogKernel,
    v: &[f64],
    w: &mut [f64],
    grid: &GridConfig,
    exec: Execution,
) -> usize {
    let n = w.len();
    let mut lipschitz = 1.1 * curvature_bound(kernel, exec);
    let mut x = w.to_vec();
    let mut y = x.clone();
    let mut ky = vec![0.0; n];
    let mut kx = vec![0.0; n];
    let mut t = 1.0f64;
    let objective = |w: &[f64], kw: &[f64]| dot(v, w) - dot(w, kw);
    kernel.apply(&x, &mut kx, exec);
    let mut fx = objective(&x, &kx);
    let mut iterations = 0;
    // The active-set polish finishes the job; a loose stop suffices here.
    let stop = (grid.tolerance * 1e3).max(1e-7);
    while iterations < grid.max_iterations {
        iterations += 1;
        kernel.apply(&y, &mut ky, exec);
        let mut z: Vec<f64> = (0..n).map(|i| y[i] - (v[i] - 2.0 * ky[i]) / lipschitz).collect();
        project_simplex(&mut z);
        let mut kz = vec![0.0; n];
        kernel.apply(&z, &mut kz, exec);
        let fz = objective(&z, &kz);
        if fz > fx + 1e-15 * fx.abs().max(1.0) {
            // Momentum overshoot or step too long: restart from x.
            if t == 1.0 {
                lipschitz *= 2.0;
            }
            t = 1.0;
            y.copy_from_slice(&x);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = z[i] + beta * (z[i] - x[i]);
        }
        x = z;
        kx = kz;
        fx = fz;
        t = t_next;
        if iterations % 25 == 0 {
            let phi: Vec<f64> = (0..n).map(|i| v[i] - 2.0 * kx[i]).collect();
            let mut on: Vec<f64> = phi.iter().zip(&x).filter(|(_, w)| **w > 0.0).map(|(p, _)| *p).collect();
            let c = median(&mut on);
            if kkt_residual(&x, &phi, c) < stop {
                break;
            }
        }
    }
    w.copy_from_slice(&x);
    iterations
}

/// Solves the KKT system exactly on a support set, adjusting the set until
/// weights are nonnegative and the off-support inequality holds.
fn active_set_polish(kernel: &LogKernel, v: &[f64], w0: &[f64], tolerance: f64) -> Option<Vec<f64>> {
    let n = v.len();
    let mut active: Vec<bool> = w0.iter().map(|w| *w > 0.0).collect();
    for _ in 0..200 {
        let idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
        let m = idx.len();
        if m == 0 {
            return None;
        }
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut b = DVector::<f64>::zeros(m + 1);
        for (r, &i) in idx.iter().enumerate() {
            for (s, &j) in idx.iter().enumerate() {
                a[(r, s)] = 2.0 * kernel.entry(i, j);
            }
            a[(r, m)] = 1.0;
            a[(m, r)] = 1.0;
            b[r] = v[i];
        }
        b[m] = 1.0;
        let sol = a.lu().solve(&b)?;
        let c = sol[m];
        let mut w = vec![0.0; n];
        for (r, &i) in idx.iter().enumerate() {
            w[i] = sol[r];
        }
        let negatives: Vec<usize> = idx.iter().copied().filter(|&i| w[i] < 0.0).collect();
        if !negatives.is_empty() {
            for i in negatives {
                active[i] = false;
            }
            continue;
        }
        let mut kw = vec![0.0; n];
        kernel.apply(&w, &mut kw, Execution::Sequential);
        let violators: Vec<usize> = (0..n)
            .filter(|&j| !active[j] && v[j] - 2.0 * kw[j] < c - 0.1 * tolerance)
            .collect();
        if !violators.is_empty() {
            for j in violators {
                active[j] = true;
            }
            continue;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        return Some(w);
    }
    None
}

/// Groups nodes whose density exceeds `threshold × max density` into
/// support intervals and computes filling fractions.
///
/// Endpoints are cell edges, refined at soft edges by extrapolating the
/// squared density (which is linear near a square-root edge) to zero.
pub fn detect_support(
    measure: &DiscreteMeasure,
    threshold: f64,
    domain: &Domain,
) -> Result<(Vec<SupportInterval>, Vec<f64>)> {
    let cells = measure
        .cells()
        .ok_or_else(|| Error::InvalidSpec("support detection needs a grid measure".into()))?;
    let density = measure.densities();
    let max = density.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::Threshold(threshold));
    }
    let cut = threshold * max;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..density.len() {
        let above = density[i] > cut;
        let contiguous = i == 0 || cells[i - 1].1 == cells[i].0;
        match (start, above) {
            (None, true) => start = Some(i),
            (Some(s), true) if !contiguous => {
                runs.push((s, i - 1));
                start = Some(i);
            }
            (Some(s), false) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, density.len() - 1));
    }
    if runs.is_empty() {
        return Err(Error::Threshold(threshold));
    }

    let scale = domain
        .intervals()
        .iter()
        .flat_map(|i| [i.lo.abs(), i.hi.abs()])
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let nodes = measure.nodes();
    let support = runs
        .iter()
        .map(|&(first, last)| {
            let lo_edge = cells[first].0;
            let hi_edge = cells[last].1;
            let lo_class = if domain.is_endpoint(lo_edge, tol) {
                EdgeClass::Hard
            } else {
                EdgeClass::Soft
            };
            let hi_class = if domain.is_endpoint(hi_edge, tol) {
                EdgeClass::Hard
            } else {
                EdgeClass::Soft
            };
            let lo = if lo_class == EdgeClass::Soft {
                refine_soft_edge(nodes, &density, cells, first, last, false).unwrap_or(lo_edge)
            } else {
                lo_edge
            };
            let hi = if hi_class == EdgeClass::Soft {
                refine_soft_edge(nodes, &density, cells, first, last, true).unwrap_or(hi_edge)
            } else {
                hi_edge
            };
            SupportInterval {
                lo,
                hi,
                lo_class,
                hi_class,
                first,
                last,
            }
        })
        .collect::<Vec<_>>();

    // Every node's weight goes to the nearest run, so fractions sum to one.
    let mut fractions = vec![0.0; runs.len()];
    for (i, &w) in measure.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let h = runs
            .iter()
            .enumerate()
            .min_by_key(|(_, &(a, b))| if i < a { a - i } else { i.saturating_sub(b) })
            .map(|(h, _)| h)
            .unwrap_or(0);
        fractions[h] += w;
    }
    Ok((support, fractions))
}

fn refine_soft_edge(
    nodes: &[f64],
    density: &[f64],
    cells: &[(f64, f64)],
    first: usize,
    last: usize,
    upper: bool,
) -> Option<f64> {
    const FIT: usize = 4;
    if last < first + FIT + 2 {
        return None;
    }
    let idx: Vec<usize> = if upper {
        (last - FIT..last).collect()
    } else {
        (first + 1..first + 1 + FIT).collect()
    };
    let xs: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| density[i] * density[i]).collect();
    let mx = xs.iter().sum::<f64>() / FIT as f64;
    let my = ys.iter().sum::<f64>() / FIT as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let width = cells[if upper { last } else { first }].1 - cells[if upper { last } else { first }].0;
    if upper {
        if !(slope < 0.0) {
            return None;
        }
        let alpha = mx - my / slope;
        (alpha >= nodes[last] - width && alpha <= cells[last].1 + width).then_some(alpha)
    } else {
        if !(slope > 0.0) {
            return None;
        }
        let alpha = mx - my / slope;
        (alpha >= cells[first].0 - width && alpha <= nodes[first] + width).then_some(alpha)
    }
}

/// Pointwise Euler–Lagrange residuals at the grid nodes.
pub fn euler_lagrange_residual(sol: &EquilibriumSolution, potential: &Potential) -> Residuals {
    let m = &sol.measure;
    let mut on = 0.0f64;
    let mut off = 0.0f64;
    for (i, &x) in m.nodes().iter().enumerate() {
        let Ok(vx) = potential.eval(x) else { continue };
        let r = m.log_field(x) - vx - sol.robin_constant;
        let in_support = sol.support.iter().any(|s| s.first <= i && i <= s.last);
        if in_support {
            on = on.max(r.abs());
        } else {
            off = off.max(r);
        }
    }
    Residuals {
        on_support: on,
        off_support: off,
    }
}

/// Values of `S(x) = π ρ(x) √|Π_hard (x - a) / Π_soft (x - a)|` at interior
/// support nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRegularity {
    pub min: f64,
    pub max: f64,
    pub values: Vec<(f64, f64)>,
}

impl EdgeRegularity {
    /// Positive minimum certifies the edge-regularity assumption numerically.
    pub fn is_regular(&self) -> bool {
        self.min > 0.0
    }
}

/// Nodes this close to a support edge are excluded from the regularity scan.
pub const EDGE_MARGIN_NODES: usize = 3;

pub fn check_edge_regularity(sol: &EquilibriumSolution) -> Result<EdgeRegularity> {
    let m = &sol.measure;
    let mut hard = Vec::new();
    let mut soft = Vec::new();
    for s in &sol.support {
        match s.lo_class {
            EdgeClass::Hard => hard.push(s.lo),
            EdgeClass::Soft => soft.push(s.lo),
        }
        match s.hi_class {
            EdgeClass::Hard => hard.push(s.hi),
            EdgeClass::Soft => soft.push(s.hi),
        }
    }
    let mut values = Vec::new();
    for s in &sol.support {
        let lo = s.first + EDGE_MARGIN_NODES;
        let hi = s.last.saturating_sub(EDGE_MARGIN_NODES);
        if (s.first..=s.last).all(|i| m.density(i) <= 0.0) {
            return Err(Error::Inconsistency(format!(
                "support component [{}, {}] carries no mass",
                s.lo, s.hi
            )));
        }
        for i in lo..=hi.max(lo) {
            if i > s.last {
                break;
            }
            let x = m.nodes()[i];
            let num: f64 = hard.iter().map(|a| x - a).product();
            let den: f64 = soft.iter().map(|a| x - a).product();
            let value = std::f64::consts::PI * m.density(i) * (num / den).abs().sqrt();
            values.push((x, value));
        }
    }
    if values.is_empty() {
        return Err(Error::Inconsistency("support too narrow for an interior scan".into()));
    }
    let min = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let max = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(EdgeRegularity { min, max, values })
}
