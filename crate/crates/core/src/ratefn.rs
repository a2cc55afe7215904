//! The effective potential `J̃(x) = V(x) - 2∫log|x-ξ|dμ_eq(ξ) + C_V` and the
//! scan for critical points where it vanishes off the support.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::potential::{Interval, Neighborhood, Potential};

/// Relative tolerance (of the scanned `J̃` range) below which a minimum counts as a zero.
pub const SCAN_TOLERANCE: f64 = 1e-4;

/// A zero whose offset ladder is not fitted this well by a power law is
/// reported as a degenerate plateau.
const MIN_FIT_R2: f64 = 0.98;

#[derive(Debug, Clone)]
pub struct RateFunction {
    solution: Arc<EquilibriumSolution>,
    potential: Arc<Potential>,
}

impl RateFunction {
    pub fn new(solution: Arc<EquilibriumSolution>, potential: Arc<Potential>) -> Self {
        Self { solution, potential }
    }

    pub fn solution(&self) -> &EquilibriumSolution {
        &self.solution
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `J̃(x)`, zero on the detected support.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.potential.domain().contains(x) {
            return Err(Error::Domain(format!("x = {x} lies outside the domain")));
        }
        if self.solution.in_support(x) {
            return Ok(0.0);
        }
        Ok(self.raw(x))
    }

    /// `V(x) - 2∫log|x-ξ|dμ_eq + C_V` without zeroing on the support.
    /// Infinite outside the domain.
    pub fn raw(&self, x: f64) -> f64 {
        let v = self.potential.value_unchecked(x);
        if !v.is_finite() {
            return f64::INFINITY;
        }
        v - self.solution.log_field(x) + self.solution.robin_constant
    }

    /// Central finite difference of [`raw`](Self::raw) with step `h`.
    pub fn derivative(&self, x: f64, order: u8, h: f64) -> f64 {
        match order {
            1 => (self.raw(x + h) - self.raw(x - h)) / (2.0 * h),
            _ => (self.raw(x + h) - 2.0 * self.raw(x) + self.raw(x - h)) / (h * h),
        }
    }

    /// Scan interval: the domain clipped to the solution grid.
    pub fn window(&self) -> (f64, f64) {
        let (lo, hi) = match self.solution.measure.cells() {
            Some(c) => (c[0].0, c[c.len() - 1].1),
            None => self.solution.measure.support_hull(),
        };
        (
            lo.max(self.potential.domain().lower()),
            hi.min(self.potential.domain().upper()),
        )
    }

    /// `(x, J̃(x))` on `resolution` evenly spaced points of the scan window.
    pub fn evaluation_grid(&self, resolution: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.window();
        let n = resolution.max(2);
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .filter(|x| self.potential.domain().contains(*x))
            .map(|x| (x, self.eval(x).unwrap_or(f64::INFINITY)))
            .collect()
    }
}

pub fn rate_function(rf: &RateFunction, x: f64) -> Result<f64> {
    rf.eval(x)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub c0: f64,
    pub value: f64,
    pub second_derivative: f64,
    /// Local exponent in `J̃(c₀ + t) ~ |t|^q`.
    pub q: f64,
    /// Predicted threshold `β_q = 2 / q`.
    pub beta_q: f64,
    /// Offset scale of the exponent fit.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub critical_points: Vec<CriticalPoint>,
    /// Runs of scan nodes where `J̃` stays below tolerance.
    pub plateaus: Vec<(f64, f64)>,
    pub neighborhood: Neighborhood,
    pub tolerance: f64,
    pub resolution: usize,
    pub step: f64,
}

impl CriticalityReport {
    /// One critical point with a quadratic local exponent.
    pub fn certifies_quadratic(&self) -> bool {
        self.critical_points.len() == 1
            && self.plateaus.is_empty()
            && (self.critical_points[0].q - 2.0).abs() <= 0.2
            && self.critical_points[0].second_derivative > 0.0
    }
}

/// Locates the zeros of `J̃` on `B ∖ closure(A)`.
pub fn scan_criticality(rf: &RateFunction, a: &Neighborhood, resolution: usize) -> Result<CriticalityReport> {
    if resolution < 8 {
        return Err(Error::InvalidSpec(format!("scan resolution {resolution} below 8")));
    }
    for s in &rf.solution.support {
        if !(a.contains(s.lo) || a.closure_contains(s.lo)) || !(a.contains(s.hi) || a.closure_contains(s.hi)) {
            return Err(Error::InvalidSpec(format!(
                "neighborhood does not contain the support component [{}, {}]",
                s.lo, s.hi
            )));
        }
    }
    let (lo, hi) = rf.window();
    let step = (hi - lo) / (resolution - 1) as f64;
    let regions = scan_regions(rf, a, lo, hi);

    let mut samples: Vec<Vec<(f64, f64)>> = Vec::new();
    for r in &regions {
        let n = ((r.length() / step).ceil() as usize).max(2);
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let x = r.lo + r.length() * k as f64 / n as f64;
                (x, rf.raw(x))
            })
            .collect();
        samples.push(pts);
    }
    let finite = samples.iter().flatten().map(|p| p.1).filter(|v| v.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut report = CriticalityReport {
        critical_points: Vec::new(),
        plateaus: Vec::new(),
        neighborhood: a.clone(),
        tolerance: 0.0,
        resolution,
        step,
    };
    if !min.is_finite() {
        return Ok(report);
    }
    let tol = SCAN_TOLERANCE * (max - min);
    report.tolerance = tol;

    for (r, pts) in regions.iter().zip(&samples) {
        let mut k = 0;
        while k < pts.len() {
            if pts[k].1 >= tol {
                k += 1;
                continue;
            }
            let start = k;
            while k < pts.len() && pts[k].1 < tol {
                k += 1;
            }
            let end = k - 1;
            // Lowest node of the sub-tolerance run.
            let m = (start..=end).min_by(|&i, &j| pts[i].1.total_cmp(&pts[j].1)).unwrap_or(start);
            let left = m.saturating_sub(1);
            let right = (m + 1).min(pts.len() - 1);
            let c0 = golden_section(|x| rf.raw(x), pts[left].0, pts[right].0, 1e-12 * (1.0 + pts[m].0.abs()));
            match characterise(rf, a, r, c0) {
                Some(point) => report.critical_points.push(point),
                None => report.plateaus.push((pts[start].0, pts[end].0)),
            }
        }
    }
    Ok(report)
}

/// Closed pieces of the scan window outside `closure(A)` and inside `B`.
fn scan_regions(rf: &RateFunction, a: &Neighborhood, lo: f64, hi: f64) -> Vec<Interval> {
    let mut out = Vec::new();
    for b in rf.potential.domain().intervals() {
        let mut pieces = vec![(b.lo.max(lo), b.hi.min(hi))];
        for hole in a.intervals() {
            pieces = pieces
                .into_iter()
                .flat_map(|(l, h)| {
                    let mut v = Vec::new();
                    if l < hole.lo {
                        v.push((l, h.min(hole.lo)));
                    }
                    if h > hole.hi {
                        v.push((l.max(hole.hi), h));
                    }
                    v
                })
                .collect();
        }
        out.extend(
            pieces
                .into_iter()
                .filter(|(l, h)| h > l)
                .filter_map(|(l, h)| Interval::new(l, h).ok()),
        );
    }
    out
}

fn characterise(rf: &RateFunction, a: &Neighborhood, region: &Interval, c0: f64) -> Option<CriticalPoint> {
    let distance = a.distance(c0);
    let epsilon = if distance > 0.0 { 0.5 * distance } else { 0.5 * region.length() };
    let value = rf.raw(c0);
    let h = (epsilon / 64.0).min(1e-3 * (1.0 + c0.abs()));
    let second_derivative = rf.derivative(c0, 2, h);

    // Half-dyadic ladder ε/8 … ε/2 on each side.
    let ladder: Vec<f64> = (0..5).map(|k| epsilon / 8.0 * 2f64.powf(k as f64 / 2.0)).collect();
    let mut fits = Vec::new();
    for sign in [-1.0, 1.0] {
        let pts: Vec<(f64, f64)> = ladder
            .iter()
            .filter(|t| region.contains(c0 + sign * **t))
            .map(|t| (t.ln(), rf.raw(c0 + sign * t) - value))
            .filter(|(_, j)| *j > 0.0)
            .map(|(lt, j)| (lt, j.ln()))
            .collect();
        if pts.len() >= 3 {
            fits.push(log_log_fit(&pts));
        }
    }
    if fits.is_empty() || fits.iter().any(|(_, r2)| *r2 < MIN_FIT_R2) {
        return None;
    }
    let q = fits.iter().map(|f| f.0).sum::<f64>() / fits.len() as f64;
    Some(CriticalPoint {
        c0,
        value,
        second_derivative,
        q,
        beta_q: 2.0 / q,
        epsilon,
    })
}

/// Slope and R² of a least-squares line.
fn log_log_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    (slope, r2)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_vertex() {
        let x = golden_section(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.2, 0.4].iter().map(|t| (t.ln(), 3.0 * t.ln() + 1.0)).collect();
        let (q, r2) = log_log_fit(&pts);
        assert!((q - 3.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
