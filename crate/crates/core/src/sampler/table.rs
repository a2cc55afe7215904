use crate::potential::{Piece, Potential, Term};

/// Grid step for tabulated log-field pieces.
const TABLE_STEP: f64 = 1e-3;

/// Fast evaluator of a potential on `[lo, hi]`: polynomial and well pieces
/// are evaluated directly, log-field pieces through cubic Hermite tables.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    pieces: Vec<Segment>,
}

#[derive(Debug, Clone)]
enum Segment {
    Exact { lo: f64, hi: f64, piece: Piece },
    Hermite { lo: f64, hi: f64, step: f64, values: Vec<f64>, slopes: Vec<f64> },
}

impl PotentialTable {
    pub fn new(potential: &Potential, lo: f64, hi: f64) -> Self {
        let pieces = potential
            .pieces()
            .iter()
            .filter(|p| p.interval.hi >= lo && p.interval.lo <= hi)
            .map(|p| {
                let (a, b) = (p.interval.lo.max(lo), p.interval.hi.min(hi));
                let tabulate = p.terms.iter().any(|t| matches!(t, Term::LogField(_)));
                if !tabulate || b <= a {
                    return Segment::Exact { lo: a, hi: b, piece: p.clone() };
                }
                let n = ((b - a) / TABLE_STEP).ceil().max(1.0) as usize;
                let step = (b - a) / n as f64;
                let xs: Vec<f64> = (0..=n).map(|k| if k == n { b } else { a + step * k as f64 }).collect();
                Segment::Hermite {
                    lo: a,
                    hi: b,
                    step,
                    values: xs.iter().map(|&x| p.value(x)).collect(),
                    slopes: xs.iter().map(|&x| p.derivative(x, 1)).collect(),
                }
            })
            .collect();
        Self { pieces }
    }

    /// `V(x)`, `+∞` outside the tabulated range.
    pub fn value(&self, x: f64) -> f64 {
        for seg in &self.pieces {
            match seg {
                Segment::Exact { lo, hi, piece } if *lo <= x && x <= *hi => return piece.value(x),
                Segment::Hermite { lo, hi, step, values, slopes } if *lo <= x && x <= *hi => {
                    let s = (x - lo) / step;
                    let k = (s.floor() as usize).min(values.len() - 2);
                    let t = s - k as f64;
                    let (t2, t3) = (t * t, t * t * t);
                    return (2.0 * t3 - 3.0 * t2 + 1.0) * values[k]
                        + (t3 - 2.0 * t2 + t) * step * slopes[k]
                        + (-2.0 * t3 + 3.0 * t2) * values[k + 1]
                        + (t3 - t2) * step * slopes[k + 1];
                }
                _ => {}
            }
        }
        f64::INFINITY
    }
}
