//! Grid probability measures and their logarithmic potentials.
//!
//! A [`DiscreteMeasure`] carries either *cells* (each node owns an interval
//! and its weight is spread uniformly over it) or bare *atoms*. The log
//! kernel is integrated exactly over cells, which keeps the singular
//! self-interaction finite: at a cell centre the average of `log|x - y|`
//! over a cell of width `Δ` is `log(Δ/2) - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ weights = 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Separation (in cell widths) beyond which kernel averages switch to
/// their multipole expansion.
const FAR_FIELD: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per-node cell `[lo, hi]`; `None` for atomic measures.
    cells: Option<Vec<(f64, f64)>>,
}

impl DiscreteMeasure {
    /// Measure with weight spread uniformly over each cell. Nodes are the
    /// cell midpoints.
    pub fn from_cells(cells: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if cells.len() != weights.len() {
            return Err(Error::InvalidSpec(format!(
                "{} cells but {} weights",
                cells.len(),
                weights.len()
            )));
        }
        for (i, &(lo, hi)) in cells.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSpec(format!("cell {i} = [{lo}, {hi}] is degenerate")));
            }
            if i > 0 && lo < cells[i - 1].1 - 1e-12 * (1.0 + lo.abs()) {
                return Err(Error::InvalidSpec(format!("cell {i} overlaps its predecessor")));
            }
        }
        let nodes = cells.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let m = Self {
            nodes,
            weights,
            cells: Some(cells),
        };
        m.validate_weights()?;
        Ok(m)
    }

    /// Purely atomic measure `Σ w_i δ_{x_i}`.
    pub fn atoms(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidSpec(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSpec("atom nodes must be strictly ascending".into()));
        }
        let m = Self {
            nodes,
            weights,
            cells: None,
        };
        m.validate_weights()?;
        Ok(m)
    }

    /// Cell measure whose weights are the exact cell masses of a distribution
    /// with cumulative distribution function `cdf`, renormalised to one.
    pub fn from_cdf(cells: Vec<(f64, f64)>, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let mut weights: Vec<f64> = cells
            .iter()
            .map(|&(lo, hi)| (cdf(hi) - cdf(lo)).max(0.0))
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidSpec("cdf assigns no mass to the cells".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::from_cells(cells, weights)
    }

    /// Rebuilds cells from bare node positions (as read back from a
    /// `node,weight` file): edges sit at midpoints, and a spacing jump larger
    /// than 1.5x the neighbouring spacing is treated as a break between
    /// domain intervals.
    pub fn from_nodes(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Self::atoms(nodes, weights);
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSpec("nodes must be strictly ascending".into()));
        }
        let gaps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        // A gap is a break if it is much wider than both of its neighbours.
        let is_break = |k: usize| -> bool {
            let left = if k > 0 { gaps[k - 1] } else { f64::INFINITY };
            let right = if k + 1 < gaps.len() { gaps[k + 1] } else { f64::INFINITY };
            let reference = left.min(right);
            reference.is_finite() && gaps[k] > 1.5 * reference
        };
        let mut cells = Vec::with_capacity(n);
        for i in 0..n {
            let lo = if i == 0 || is_break(i - 1) {
                let own = if i < gaps.len() { gaps[i] } else { gaps[i - 1] };
                nodes[i] - 0.5 * own
            } else {
                0.5 * (nodes[i - 1] + nodes[i])
            };
            let hi = if i + 1 == n || is_break(i) {
                let own = if i > 0 { gaps[i - 1] } else { gaps[0] };
                nodes[i] + 0.5 * own
            } else {
                0.5 * (nodes[i] + nodes[i + 1])
            };
            cells.push((lo, hi));
        }
        let mut m = Self::from_cells(cells, weights)?;
        // Keep the caller's node positions bit-for-bit.
        m.nodes = nodes;
        Ok(m)
    }

    /// Same grid, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.nodes.len() {
            return Err(Error::InvalidSpec("weight vector length mismatch".into()));
        }
        let m = Self {
            nodes: self.nodes.clone(),
            weights,
            cells: self.cells.clone(),
        };
        m.validate_weights()?;
        Ok(m)
    }

    fn validate_weights(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidSpec("measure has no nodes".into()));
        }
        if let Some(i) = self.weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "weight {i} = {} is negative or not finite",
                self.weights[i]
            )));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE * self.weights.len().max(1) as f64 {
            return Err(Error::InvalidSpec(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cells(&self) -> Option<&[(f64, f64)]> {
        self.cells.as_deref()
    }

    pub fn is_atomic(&self) -> bool {
        self.cells.is_none()
    }

    /// Width of the cell owned by node `i` (zero for atoms).
    pub fn cell_width(&self, i: usize) -> f64 {
        self.cells.as_ref().map_or(0.0, |c| c[i].1 - c[i].0)
    }

    /// Density estimate `w_i / Δ_i`; atoms report `+∞` where they carry mass.
    pub fn density(&self, i: usize) -> f64 {
        let width = self.cell_width(i);
        if width > 0.0 {
            self.weights[i] / width
        } else if self.weights[i] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.density(i)).collect()
    }

    /// `∫ g dμ` with `g` sampled at the nodes.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * g(*x))
            .sum()
    }

    /// Smallest and largest node carrying positive weight.
    pub fn support_hull(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                let (a, b) = match &self.cells {
                    Some(c) => c[i],
                    None => (self.nodes[i], self.nodes[i]),
                };
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo, hi)
    }

    /// The logarithmic potential `f(x) = 2 ∫ log|x - y| dμ(y)`.
    pub fn log_field(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        match &self.cells {
            Some(cells) => {
                for (&(lo, hi), &w) in cells.iter().zip(&self.weights) {
                    if w > 0.0 {
                        acc += w * cell_log_average(x, lo, hi);
                    }
                }
            }
            None => {
                for (&y, &w) in self.nodes.iter().zip(&self.weights) {
                    if w > 0.0 {
                        acc += w * (x - y).abs().ln();
                    }
                }
            }
        }
        2.0 * acc
    }

    /// First or second derivative of [`Self::log_field`].
    pub fn log_field_derivative(&self, x: f64, order: u8) -> f64 {
        let mut acc = 0.0;
        match &self.cells {
            Some(cells) => {
                for (&(lo, hi), &w) in cells.iter().zip(&self.weights) {
                    if w > 0.0 {
                        acc += w * cell_log_average_derivative(x, lo, hi, order);
                    }
                }
            }
            None => {
                for (&y, &w) in self.nodes.iter().zip(&self.weights) {
                    if w > 0.0 {
                        let t = x - y;
                        acc += w * if order == 1 { 1.0 / t } else { -1.0 / (t * t) };
                    }
                }
            }
        }
        2.0 * acc
    }

    /// `∫ dμ(y) / (x - y)`, the Stieltjes transform at a real point away from
    /// the support.
    pub fn stieltjes(&self, x: f64) -> f64 {
        0.5 * self.log_field_derivative(x, 1)
    }
}

fn xlogx_minus_x(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.abs().ln() - t
    }
}

fn second_antiderivative(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        0.5 * t * t * t.abs().ln() - 0.75 * t * t
    }
}

/// Average of `log|x - y|` for `y` uniform on `[lo, hi]`.
pub fn cell_log_average(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let d = x - 0.5 * (lo + hi);
    if d.abs() > FAR_FIELD * width {
        let r2 = (width / d).powi(2);
        // E[log(1 + s/d)] for s uniform on [-Δ/2, Δ/2].
        d.abs().ln() - r2 / 24.0 - r2 * r2 / 320.0 - r2 * r2 * r2 / 2688.0
    } else {
        (xlogx_minus_x(x - lo) - xlogx_minus_x(x - hi)) / width
    }
}

fn cell_log_average_derivative(x: f64, lo: f64, hi: f64, order: u8) -> f64 {
    let width = hi - lo;
    let d = x - 0.5 * (lo + hi);
    if d.abs() > FAR_FIELD * width {
        let r2 = (width / d).powi(2);
        let m2 = r2 / 12.0;
        let m4 = r2 * r2 / 80.0;
        let m6 = r2 * r2 * r2 / 448.0;
        if order == 1 {
            (1.0 + m2 + m4 + m6) / d
        } else {
            -(1.0 + 3.0 * m2 + 5.0 * m4 + 7.0 * m6) / (d * d)
        }
    } else if order == 1 {
        ((x - lo).abs().ln() - (x - hi).abs().ln()) / width
    } else {
        (1.0 / (x - lo) - 1.0 / (x - hi)) / width
    }
}

/// Average of `log|x - y|` for `x` uniform on cell `a` and `y` uniform on
/// cell `b`. Symmetric in its arguments; the diagonal value for a cell of
/// width `Δ` is `log Δ - 3/2`.
pub fn cell_pair_log_average(a: (f64, f64), b: (f64, f64)) -> f64 {
    let wa = a.1 - a.0;
    let wb = b.1 - b.0;
    let d = 0.5 * (a.0 + a.1) - 0.5 * (b.0 + b.1);
    if d.abs() > FAR_FIELD * wa.max(wb) {
        // Moments of u = s - t, s ~ U(wa), t ~ U(wb).
        let (a2, b2) = (wa * wa, wb * wb);
        let e2 = (a2 + b2) / 12.0;
        let e4 = a2 * a2 / 80.0 + a2 * b2 / 24.0 + b2 * b2 / 80.0;
        let e6 = a2 * a2 * a2 / 448.0
            + 15.0 * (a2 * a2 / 80.0) * (b2 / 12.0)
            + 15.0 * (a2 / 12.0) * (b2 * b2 / 80.0)
            + b2 * b2 * b2 / 448.0;
        let d2 = d * d;
        d.abs().ln() - e2 / (2.0 * d2) - e4 / (4.0 * d2 * d2) - e6 / (6.0 * d2 * d2 * d2)
    } else {
        let g = second_antiderivative;
        (g(a.1 - b.0) - g(a.0 - b.0) - g(a.1 - b.1) + g(a.0 - b.1)) / (wa * wb)
    }
}

/// Uniform cells partitioning each interval, with node counts proportional
/// to interval length (at least two per interval).
pub fn uniform_cells(intervals: &[(f64, f64)], nodes: usize) -> Result<Vec<(f64, f64)>> {
    if intervals.is_empty() {
        return Err(Error::InvalidSpec("no intervals to grid".into()));
    }
    let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Domain("grid window must be bounded with positive length".into()));
    }
    let mut cells = Vec::with_capacity(nodes);
    for &(a, b) in intervals {
        let k = (((b - a) / total) * nodes as f64).round().max(2.0) as usize;
        let step = (b - a) / k as f64;
        for j in 0..k {
            let lo = a + j as f64 * step;
            let hi = if j + 1 == k { b } else { a + (j + 1) as f64 * step };
            cells.push((lo, hi));
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_pair(a: (f64, f64), b: (f64, f64)) -> f64 {
        let n = 400;
        let mut acc = 0.0;
        for i in 0..n {
            let x = a.0 + (i as f64 + 0.5) * (a.1 - a.0) / n as f64;
            for j in 0..n {
                let y = b.0 + (j as f64 + 0.5) * (b.1 - b.0) / n as f64;
                acc += (x - y).abs().ln();
            }
        }
        acc / (n * n) as f64
    }

    #[test]
    fn diagonal_rule_matches_cell_average() {
        let d: f64 = 0.01;
        let v = cell_log_average(0.0, -d / 2.0, d / 2.0);
        assert!((v - ((d / 2.0).ln() - 1.0)).abs() < 1e-14);
        let g = cell_pair_log_average((0.0, d), (0.0, d));
        assert!((g - (d.ln() - 1.5)).abs() < 1e-13);
    }

    #[test]
    fn pair_average_near_and_far_agree_with_brute_force() {
        for &(a, b) in &[
            ((0.0, 1.0), (1.0, 2.0)),
            ((0.0, 1.0), (3.0, 3.5)),
            ((0.0, 0.1), (2.5, 2.6)),
            ((0.0, 0.01), (0.5, 0.51)),
        ] {
            let exact = cell_pair_log_average(a, b);
            assert!((exact - brute_pair(a, b)).abs() < 2e-5, "{a:?} {b:?}");
            assert!((exact - cell_pair_log_average(b, a)).abs() < 1e-14);
        }
    }

    #[test]
    fn far_field_switch_is_continuous() {
        let (lo, hi) = (0.0, 0.1);
        let x = 0.05 + FAR_FIELD * 0.1;
        let near = (xlogx_minus_x(x - lo) - xlogx_minus_x(x - hi)) / 0.1;
        let far = cell_log_average(x + 1e-12, lo, hi) - 1e-12 / (x - 0.05);
        assert!((near - far).abs() < 1e-12);
        let a = (0.0, 0.1);
        let b = (a.0 + FAR_FIELD * 0.1, a.1 + FAR_FIELD * 0.1);
        let g = second_antiderivative;
        let direct = (g(a.1 - b.0) - g(a.0 - b.0) - g(a.1 - b.1) + g(a.0 - b.1)) / 0.01;
        let b2 = (b.0 + 1e-9, b.1 + 1e-9);
        assert!((direct - (cell_pair_log_average(a, b2) - 1e-9 / (FAR_FIELD * 0.1))).abs() < 1e-10);
    }

    #[test]
    fn two_atom_field_at_midpoint_is_zero() {
        let m = DiscreteMeasure::atoms(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.log_field(0.0), 0.0);
    }

    #[test]
    fn rejects_unnormalised_or_negative_weights() {
        assert!(DiscreteMeasure::atoms(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::atoms(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::atoms(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn from_nodes_recovers_uniform_cells() {
        let cells = uniform_cells(&[(-1.0, 1.0)], 8).unwrap();
        let w = vec![0.125; 8];
        let m = DiscreteMeasure::from_cells(cells.clone(), w.clone()).unwrap();
        let back = DiscreteMeasure::from_nodes(m.nodes().to_vec(), w).unwrap();
        for (c, d) in cells.iter().zip(back.cells().unwrap()) {
            assert!((c.0 - d.0).abs() < 1e-15 && (c.1 - d.1).abs() < 1e-15);
        }
    }

    #[test]
    fn from_nodes_detects_interval_breaks() {
        let mut cells = uniform_cells(&[(-3.0, -1.0), (1.0, 3.0)], 8).unwrap();
        cells.truncate(8);
        let m = DiscreteMeasure::from_cells(cells.clone(), vec![0.125; 8]).unwrap();
        let back = DiscreteMeasure::from_nodes(m.nodes().to_vec(), vec![0.125; 8]).unwrap();
        for (c, d) in cells.iter().zip(back.cells().unwrap()) {
            assert!((c.0 - d.0).abs() < 1e-12 && (c.1 - d.1).abs() < 1e-12, "{c:?} {d:?}");
        }
    }

    #[test]
    fn field_derivatives_match_finite_differences() {
        let cells = uniform_cells(&[(-1.0, 1.0)], 64).unwrap();
        let m = DiscreteMeasure::from_cdf(cells, |x: f64| 0.5 + x.clamp(-1.0, 1.0).asin() / std::f64::consts::PI)
            .unwrap();
        for &x in &[1.3, 2.0, 5.0, -1.7, 0.013] {
            let h = 1e-5;
            let d1 = (m.log_field(x + h) - m.log_field(x - h)) / (2.0 * h);
            let d2 = (m.log_field(x + h) - 2.0 * m.log_field(x) + m.log_field(x - h)) / (h * h);
            assert!((d1 - m.log_field_derivative(x, 1)).abs() < 1e-6, "x={x}");
            assert!((d2 - m.log_field_derivative(x, 2)).abs() < 1e-3 * (1.0 + d2.abs()), "x={x}");
        }
    }
}
