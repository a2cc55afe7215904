//! Confining potentials on unions of intervals, and the critical-potential
//! builder that glues a well onto the log-field of an equilibrium measure.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Continuity tolerance across piece boundaries.
pub const CONTINUITY_TOLERANCE: f64 = 1e-9;

/// Closed interval `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidSpec(format!("interval [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Membership in the open interval `(lo, hi)`.
    pub fn contains_open(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Distance from `x` to the closed interval (zero inside).
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Sorted list of disjoint intervals.
fn validate_disjoint(intervals: &[Interval], what: &str) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::InvalidSpec(format!("{what} needs at least one interval")));
    }
    for w in intervals.windows(2) {
        if !(w[0].hi < w[1].lo) {
            return Err(Error::InvalidSpec(format!(
                "{what} intervals {} and {} are not disjoint and ascending",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// The set `B` on which eigenvalues live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    intervals: Vec<Interval>,
}

impl Domain {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        validate_disjoint(&intervals, "domain")?;
        Ok(Self { intervals })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![Interval::new(lo, hi)?])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    pub fn lower(&self) -> f64 {
        self.intervals[0].lo
    }

    pub fn upper(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lower().is_finite() && self.upper().is_finite()
    }

    /// Total length (infinite for unbounded domains).
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    /// Intersection with `[lo, hi]`, dropping empty pieces.
    pub fn truncate(&self, lo: f64, hi: f64) -> Result<Self> {
        let kept: Vec<Interval> = self
            .intervals
            .iter()
            .filter_map(|i| {
                let a = i.lo.max(lo);
                let b = i.hi.min(hi);
                (a < b).then_some(Interval { lo: a, hi: b })
            })
            .collect();
        if kept.is_empty() {
            return Err(Error::Domain(format!("domain does not meet [{lo}, {hi}]")));
        }
        Self::new(kept)
    }

    /// True if `x` is one of the interval endpoints.
    pub fn is_endpoint(&self, x: f64, tol: f64) -> bool {
        self.intervals
            .iter()
            .any(|i| (i.lo - x).abs() <= tol || (i.hi - x).abs() <= tol)
    }
}

/// An open neighbourhood `A = ∪ (a_h⁻, a_h⁺)` of the equilibrium support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    intervals: Vec<Interval>,
}

impl Neighborhood {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        validate_disjoint(&intervals, "neighbourhood")?;
        if intervals.iter().any(|i| !(i.lo < i.hi)) {
            return Err(Error::InvalidSpec("neighbourhood intervals must be open and non-empty".into()));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Membership in the open set `A`.
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains_open(x))
    }

    /// Membership in the closure of `A`.
    pub fn closure_contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// Distance from `x` to the closure of `A`.
    pub fn distance(&self, x: f64) -> f64 {
        self.intervals
            .iter()
            .map(|i| i.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// `a_g⁺`, the right end of the last component.
    pub fn upper(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].hi
    }

    pub fn lower(&self) -> f64 {
        self.intervals[0].lo
    }
}

/// One additive term of a potential piece.
#[derive(Debug, Clone)]
pub enum Term {
    /// `Σ c_k x^k`, coefficients in ascending order.
    Polynomial(Vec<f64>),
    /// `depth · (x - center)^power`.
    Well { depth: f64, center: f64, power: u32 },
    /// `2 ∫ log|x - y| dμ(y)`.
    LogField(Arc<DiscreteMeasure>),
}

impl Term {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Term::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            Term::Well { depth, center, power } => depth * (x - center).powi(*power as i32),
            Term::LogField(m) => m.log_field(x),
        }
    }

    pub fn derivative(&self, x: f64, order: u8) -> f64 {
        match self {
            Term::Polynomial(c) => {
                let k0 = order as usize;
                c.iter().enumerate().skip(k0).rev().fold(0.0, |acc, (k, &a)| {
                    let falling: f64 = (0..k0).map(|j| (k - j) as f64).product();
                    acc * x + a * falling
                })
            }
            Term::Well { depth, center, power } => {
                let p = *power as i32;
                match order {
                    1 if p >= 1 => depth * p as f64 * (x - center).powi(p - 1),
                    2 if p >= 2 => depth * (p * (p - 1)) as f64 * (x - center).powi(p - 2),
                    _ => 0.0,
                }
            }
            Term::LogField(m) => m.log_field_derivative(x, order),
        }
    }
}

/// A sum of terms plus an explicit additive constant, valid on one interval.
#[derive(Debug, Clone)]
pub struct Piece {
    pub interval: Interval,
    pub terms: Vec<Term>,
    pub constant: f64,
}

impl Piece {
    pub fn new(interval: Interval, terms: Vec<Term>, constant: f64) -> Self {
        Self {
            interval,
            terms,
            constant,
        }
    }

    pub fn polynomial(interval: Interval, coefficients: Vec<f64>) -> Self {
        Self::new(interval, vec![Term::Polynomial(coefficients)], 0.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.constant + self.terms.iter().map(|t| t.value(x)).sum::<f64>()
    }

    pub fn derivative(&self, x: f64, order: u8) -> f64 {
        self.terms.iter().map(|t| t.derivative(x, order)).sum()
    }
}

/// Piecewise potential `V` on a [`Domain`]. Immutable once built.
#[derive(Debug, Clone)]
pub struct Potential {
    domain: Domain,
    pieces: Vec<Piece>,
    scale: f64,
}

impl Potential {
    /// Validates coverage, continuity and (for unbounded domains) growth.
    pub fn new(domain: Domain, mut pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidSpec("potential has no pieces".into()));
        }
        pieces.sort_by(|a, b| a.interval.lo.total_cmp(&b.interval.lo));
        for w in pieces.windows(2) {
            if w[1].interval.lo < w[0].interval.hi {
                return Err(Error::InvalidSpec(format!(
                    "pieces {} and {} overlap",
                    w[0].interval, w[1].interval
                )));
            }
        }
        for di in domain.intervals() {
            let mut reach = di.lo;
            for p in &pieces {
                if p.interval.lo <= reach && p.interval.hi >= reach {
                    reach = reach.max(p.interval.hi);
                }
            }
            if reach < di.hi {
                return Err(Error::InvalidSpec(format!(
                    "pieces do not cover domain interval {di} (covered up to {reach})"
                )));
            }
        }
        let finite_ends = domain
            .intervals()
            .iter()
            .flat_map(|i| [i.lo, i.hi])
            .chain(pieces.iter().flat_map(|p| [p.interval.lo, p.interval.hi]))
            .filter(|v| v.is_finite())
            .map(f64::abs)
            .fold(0.0, f64::max);
        let scale = finite_ends.max(1.0);
        let potential = Self {
            domain,
            pieces,
            scale,
        };
        potential.check_continuity()?;
        if !potential.domain.is_bounded() {
            potential.check_growth()?;
        }
        Ok(potential)
    }

    /// `V(x) = Σ coefficients[k] x^k` on the whole domain.
    pub fn polynomial(domain: Domain, coefficients: Vec<f64>) -> Result<Self> {
        let hull = Interval {
            lo: domain.lower(),
            hi: domain.upper(),
        };
        Self::new(domain, vec![Piece::polynomial(hull, coefficients)])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Characteristic length used for finite-difference steps and growth probes.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Internal boundaries shared by two consecutive pieces.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces
            .windows(2)
            .filter(|w| w[0].interval.hi == w[1].interval.lo)
            .map(|w| w[0].interval.hi)
            .collect()
    }

    fn piece_at(&self, x: f64) -> Option<&Piece> {
        self.pieces.iter().find(|p| p.interval.contains(x))
    }

    /// `V(x)`; fails outside the domain.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!("x = {x} is outside the domain")));
        }
        self.piece_at(x)
            .map(|p| p.value(x))
            .ok_or_else(|| Error::Domain(format!("no piece covers x = {x}")))
    }

    /// `V(x)` without the domain check, `+∞` where no piece applies. Used on
    /// the sampler's hot path after its own domain test.
    pub fn value_unchecked(&self, x: f64) -> f64 {
        self.piece_at(x).map_or(f64::INFINITY, |p| p.value(x))
    }

    /// Cell average of `V` by Simpson's rule.
    pub fn cell_average(&self, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        let (a, m, b) = (
            self.value_unchecked(lo),
            self.value_unchecked(mid),
            self.value_unchecked(hi),
        );
        (a + 4.0 * m + b) / 6.0
    }

    /// First or second derivative inside a piece.
    pub fn derivative(&self, x: f64, order: u8) -> Result<f64> {
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidSpec(format!("derivative order {order} not supported")));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!("x = {x} is outside the domain")));
        }
        if let Some(b) = self.breakpoints().into_iter().find(|&b| b == x) {
            return Err(Error::Boundary { x, boundary: b });
        }
        self.piece_at(x)
            .map(|p| p.derivative(x, order))
            .ok_or_else(|| Error::Domain(format!("no piece covers x = {x}")))
    }

    fn check_continuity(&self) -> Result<()> {
        for w in self.pieces.windows(2) {
            let b = w[0].interval.hi;
            if b != w[1].interval.lo || !b.is_finite() {
                continue;
            }
            let left = w[0].value(b);
            let right = w[1].value(b);
            let tol = CONTINUITY_TOLERANCE * (1.0 + left.abs());
            if (left - right).abs() > tol {
                return Err(Error::Construction(format!(
                    "potential jumps by {:.3e} at x = {b}",
                    right - left
                )));
            }
        }
        Ok(())
    }

    /// `liminf V(x) / (2 log|x|) > 1`, probed at `±10², ±10³` times the scale.
    fn check_growth(&self) -> Result<()> {
        for k in [1e2, 1e3] {
            for sign in [-1.0, 1.0] {
                let x = sign * k * self.scale;
                if !self.domain.contains(x) {
                    continue;
                }
                let ratio = self.value_unchecked(x) / (2.0 * x.abs().ln());
                if !(ratio > 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "potential does not outgrow 2 log|x| at x = {x} (ratio {ratio:.3})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Minimum of `V''` on a uniform grid of `[lo, hi]`, skipping breakpoints.
    pub fn convexity_audit(&self, lo: f64, hi: f64, samples: usize) -> Result<f64> {
        let samples = samples.max(2);
        let mut min = f64::INFINITY;
        for k in 0..samples {
            let x = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            match self.derivative(x, 2) {
                Ok(v) => min = min.min(v),
                Err(Error::Boundary { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(min)
    }
}

/// How the glued well is pinned down by the continuity condition
/// `d (a_g⁺ - c₀)^p = J̃_W(a_g⁺)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellPlacement {
    /// Fix `c₀`; solve for the depth `d`.
    At(f64),
    /// Fix the depth `d`; solve for `c₀`.
    Depth(f64),
}

/// Input to [`build_critical_potential`].
#[derive(Debug, Clone)]
pub struct CriticalPotentialSpec {
    /// Equilibrium measure `μ` of the base potential `W`.
    pub measure: Arc<DiscreteMeasure>,
    /// `C_W`: the constant with `2∫log|x-ξ|dμ(ξ) - W(x) = C_W` on the support.
    pub robin_constant: f64,
    /// Neighbourhood `A` of the support of `μ`.
    pub neighborhood: Neighborhood,
    pub placement: WellPlacement,
    /// Exponent of the well; 2 gives a non-degenerate critical point.
    pub power: u32,
}

/// A potential produced by [`build_critical_potential`], with the well data
/// that downstream experiments need.
#[derive(Debug, Clone)]
pub struct CriticalConstruction {
    pub potential: Arc<Potential>,
    pub c0: f64,
    pub depth: f64,
    pub power: u32,
    pub neighborhood: Neighborhood,
    /// Default half-width of the window around `c₀`: half the distance from
    /// `c₀` to the closure of `A`.
    pub epsilon: f64,
    /// `J̃_W(a_g⁺)`, the matched value at the gluing point.
    pub glue_value: f64,
    /// Minimum of `W''` over `A`.
    pub convexity: f64,
}

/// `V = W + C_W` left of `a_g⁺` and `V = f + d (x - c₀)^p` right of it,
/// where `f` is the log-field of `μ`. The result has `μ` as its
/// equilibrium measure and an effective potential vanishing at `c₀`.
pub fn build_critical_potential(
    spec: &CriticalPotentialSpec,
    base: &Potential,
) -> Result<CriticalConstruction> {
    let a = spec.neighborhood.upper();
    let power = spec.power;
    if power < 2 || power % 2 != 0 {
        return Err(Error::InvalidSpec(format!("well power {power} must be even and at least 2")));
    }
    let domain = base.domain().clone();

    let (hull_lo, hull_hi) = spec.measure.support_hull();
    for (i, &w) in spec.measure.weights().iter().enumerate() {
        if w > 0.0 && !spec.neighborhood.contains(spec.measure.nodes()[i]) {
            return Err(Error::InvalidSpec(format!(
                "support node {} lies outside the neighbourhood A",
                spec.measure.nodes()[i]
            )));
        }
    }
    if !(spec.neighborhood.closure_contains(hull_lo) && spec.neighborhood.closure_contains(hull_hi)) {
        return Err(Error::InvalidSpec("support hull is not covered by A".into()));
    }
    if !domain.contains(a) {
        return Err(Error::InvalidSpec(format!("gluing point a_g+ = {a} is outside the domain")));
    }

    let convexity = spec
        .neighborhood
        .intervals()
        .iter()
        .map(|i| {
            let lo = i.lo.max(domain.lower());
            let hi = i.hi.min(domain.upper());
            base.convexity_audit(lo, hi, 257)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(convexity > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "base potential is not strictly convex on A (min W'' = {convexity:.3e})"
        )));
    }

    let glue_value = base.eval(a)? - spec.measure.log_field(a) + spec.robin_constant;
    if !(glue_value > 0.0) {
        return Err(Error::Construction(format!(
            "effective potential at a_g+ = {a} is {glue_value:.3e}; matching needs it positive"
        )));
    }

    let (c0, depth) = match spec.placement {
        WellPlacement::At(c0) => {
            if !(c0 > a) {
                return Err(Error::InvalidSpec(format!("c0 = {c0} must exceed a_g+ = {a}")));
            }
            (c0, glue_value / (c0 - a).powi(power as i32))
        }
        WellPlacement::Depth(d) => {
            if !(d > 0.0) {
                return Err(Error::InvalidSpec(format!("well depth {d} must be positive")));
            }
            (a + (glue_value / d).powf(1.0 / power as f64), d)
        }
    };
    if !domain.contains(c0) {
        return Err(Error::InvalidSpec(format!("c0 = {c0} is outside the domain")));
    }

    let mut pieces: Vec<Piece> = base
        .pieces()
        .iter()
        .filter(|p| p.interval.lo < a)
        .map(|p| {
            let mut clipped = p.clone();
            clipped.interval.hi = clipped.interval.hi.min(a);
            clipped.constant += spec.robin_constant;
            clipped
        })
        .collect();
    pieces.push(Piece::new(
        Interval {
            lo: a,
            hi: domain.upper().max(a),
        },
        vec![
            Term::LogField(spec.measure.clone()),
            Term::Well {
                depth,
                center: c0,
                power,
            },
        ],
        0.0,
    ));
    let potential = Potential::new(domain, pieces)?;

    Ok(CriticalConstruction {
        potential: Arc::new(potential),
        c0,
        depth,
        power,
        neighborhood: spec.neighborhood.clone(),
        epsilon: 0.5 * spec.neighborhood.distance(c0),
        glue_value,
        convexity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::uniform_cells;

    fn quadratic() -> Potential {
        Potential::polynomial(Domain::interval(-3.0, 3.0).unwrap(), vec![0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn evaluates_polynomial() {
        assert_eq!(quadratic().eval(2.0).unwrap(), 4.0);
    }

    #[test]
    fn outside_domain_is_an_error() {
        assert!(matches!(quadratic().eval(3.5), Err(Error::Domain(_))));
    }

    #[test]
    fn well_vanishes_at_its_centre() {
        let t = Term::Well {
            depth: 1.0,
            center: 3.0,
            power: 2,
        };
        assert_eq!(t.value(3.0), 0.0);
        assert_eq!(t.derivative(4.0, 1), 2.0);
        assert_eq!(t.derivative(10.0, 2), 2.0);
    }

    #[test]
    fn polynomial_derivatives() {
        let p = quadratic();
        for x in [-2.5, 0.0, 1.7] {
            assert_eq!(p.derivative(x, 2).unwrap(), 2.0);
            assert!((p.derivative(x, 1).unwrap() - 2.0 * x).abs() < 1e-15);
        }
        let cubic = Term::Polynomial(vec![1.0, -2.0, 0.5, 3.0]);
        assert!((cubic.derivative(2.0, 1) - (-2.0 + 2.0 + 36.0)).abs() < 1e-12);
        assert!((cubic.derivative(2.0, 2) - (1.0 + 36.0)).abs() < 1e-12);
    }

    #[test]
    fn discontinuous_pieces_are_rejected() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let pieces = vec![
            Piece::polynomial(Interval::new(-1.0, 0.0).unwrap(), vec![0.0]),
            Piece::polynomial(Interval::new(0.0, 1.0).unwrap(), vec![1e-6]),
        ];
        assert!(matches!(Potential::new(d, pieces), Err(Error::Construction(_))));
    }

    #[test]
    fn uncovered_domain_is_rejected() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let pieces = vec![Piece::polynomial(Interval::new(-1.0, 0.5).unwrap(), vec![0.0])];
        assert!(Potential::new(d, pieces).is_err());
    }

    #[test]
    fn growth_condition_on_unbounded_domain() {
        let d = Domain::interval(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!(Potential::polynomial(d.clone(), vec![0.0, 0.0, 1.0]).is_ok());
        // 2 log|x| exactly does not grow faster than itself.
        let pieces = vec![Piece::new(
            Interval::new(f64::NEG_INFINITY, f64::INFINITY).unwrap(),
            vec![Term::LogField(Arc::new(
                DiscreteMeasure::atoms(vec![0.0], vec![1.0]).unwrap(),
            ))],
            0.0,
        )];
        assert!(Potential::new(d, pieces).is_err());
    }

    #[test]
    fn derivative_at_breakpoint_is_rejected() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let pieces = vec![
            Piece::polynomial(Interval::new(-1.0, 0.0).unwrap(), vec![0.0, 1.0]),
            Piece::polynomial(Interval::new(0.0, 1.0).unwrap(), vec![0.0, 2.0]),
        ];
        let p = Potential::new(d, pieces).unwrap();
        assert!(matches!(p.derivative(0.0, 1), Err(Error::Boundary { .. })));
        assert_eq!(p.derivative(0.5, 1).unwrap(), 2.0);
    }

    fn semicircle_spec(placement: WellPlacement, power: u32) -> (CriticalPotentialSpec, Potential) {
        let cells = uniform_cells(&[(-3.0, 3.0)], 600).unwrap();
        let r = 2f64.sqrt();
        let cdf = move |x: f64| {
            let x = x.clamp(-r, r);
            0.5 + (x * (2.0 - x * x).sqrt() / 2.0 + (x / r).asin()) / std::f64::consts::PI
        };
        let mu = Arc::new(DiscreteMeasure::from_cdf(cells, cdf).unwrap());
        let spec = CriticalPotentialSpec {
            measure: mu,
            robin_constant: -(1.0 + 2f64.ln()),
            neighborhood: Neighborhood::new(vec![Interval::new(-2.0, 2.0).unwrap()]).unwrap(),
            placement,
            power,
        };
        (spec, quadratic())
    }

    #[test]
    fn critical_build_matches_glue_value() {
        let (spec, base) = semicircle_spec(WellPlacement::At(2.7), 2);
        let c = build_critical_potential(&spec, &base).unwrap();
        let a = 2.0;
        assert!((c.depth * (a - c.c0).powi(2) - c.glue_value).abs() < 1e-12);
        let v = &c.potential;
        let f = spec.measure.log_field(c.c0);
        assert!((v.eval(c.c0).unwrap() - f).abs() < 1e-12);
        assert!((v.eval(a - 1e-12).unwrap() - v.eval(a + 1e-12).unwrap()).abs() < 1e-9);
        assert!((c.epsilon - 0.35).abs() < 1e-12);
    }

    #[test]
    fn critical_build_from_depth() {
        let (spec, base) = semicircle_spec(WellPlacement::Depth(4.0), 2);
        let c = build_critical_potential(&spec, &base).unwrap();
        assert!((c.depth - 4.0).abs() < 1e-15);
        assert!((c.c0 - 2.0 - (c.glue_value / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn critical_build_rejects_bad_specs() {
        let (spec, base) = semicircle_spec(WellPlacement::At(1.9), 2);
        assert!(matches!(build_critical_potential(&spec, &base), Err(Error::InvalidSpec(_))));
        let (mut spec, base) = semicircle_spec(WellPlacement::At(2.7), 2);
        spec.neighborhood = Neighborhood::new(vec![Interval::new(-1.0, 1.0).unwrap()]).unwrap();
        assert!(build_critical_potential(&spec, &base).is_err());
        let (mut spec, base) = semicircle_spec(WellPlacement::At(2.7), 2);
        spec.robin_constant -= 10.0;
        assert!(matches!(build_critical_potential(&spec, &base), Err(Error::Construction(_))));
    }
}
