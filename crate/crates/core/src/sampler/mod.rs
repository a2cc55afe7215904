//! Metropolis sampling of the β-ensemble
//! `∝ Π|λ_i - λ_j|^β exp(-(Nβ/2) Σ V(λ_i))` on `B^N`.
//!
//! A sweep is one Gaussian random-walk update per particle, optionally
//! followed by a uniform teleport and by exchange moves that redraw one
//! particle from a fixed mixture of the equilibrium density and a Gaussian
//! at the critical point. Every move is a Metropolis–Hastings step for the
//! same target, so their composition is stationary for it.

mod table;
pub mod tridiag;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measure::DiscreteMeasure;
use crate::potential::{Domain, Interval, Neighborhood, Potential};
use crate::stats;

pub use table::PotentialTable;
pub use tridiag::{symmetric_tridiagonal_eigenvalues, tridiagonal_sample};

/// Target acceptance rate of the random-walk moves during burn-in.
pub const TARGET_ACCEPTANCE: f64 = 0.4;

/// Burn-in sweeps between proposal-scale adjustments.
const TUNE_WINDOW: usize = 25;

/// Records between full recomputations of the running log density.
const RESYNC_RECORDS: usize = 64;

/// `-(Nβ/2) Σ V(λ_i) + β Σ_{i<j} log|λ_i - λ_j|`; `-∞` for positions
/// outside `B` or coincident pairs.
pub fn log_density(positions: &[f64], potential: &Potential, domain: &Domain, beta: f64) -> f64 {
    let n = positions.len() as f64;
    let mut external = 0.0;
    for &x in positions {
        if !domain.contains(x) {
            return f64::NEG_INFINITY;
        }
        let v = potential.value_unchecked(x);
        if !v.is_finite() {
            return f64::NEG_INFINITY;
        }
        external += v;
    }
    -0.5 * n * beta * external + beta * pair_log_sum(positions)
}

/// `Σ_{i<j} log|λ_i - λ_j|`.
pub fn pair_log_sum(positions: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (i, &x) in positions.iter().enumerate() {
        for &y in &positions[i + 1..] {
            sum += (x - y).abs().ln();
        }
    }
    sum
}

/// `Σ_{j≠i} log|new - λ_j| - log|old - λ_j|`, accumulated as products of
/// ratios with one logarithm per block.
fn interaction_delta(positions: &[f64], i: usize, old: f64, new: f64) -> f64 {
    const BLOCK: usize = 16;
    let mut acc = 0.0;
    for part in [&positions[..i], &positions[i + 1..]] {
        for chunk in part.chunks(BLOCK) {
            let mut prod = 1.0;
            for &l in chunk {
                prod *= (new - l) / (old - l);
            }
            acc += prod.abs().ln();
        }
    }
    acc
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Mode {
    Free,
    /// Fixed filling fractions: `counts[h]` particles confined to `boxes[h]`.
    Restricted { counts: Vec<usize>, boxes: Vec<Interval> },
}

/// Independence proposal that redraws one particle from
/// `½ N(center, sigma²) + ½ ρ_eq`.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub center: f64,
    pub sigma: f64,
    pub bulk: Arc<DiscreteMeasure>,
    pub moves_per_sweep: usize,
}

/// Region bookkeeping behind the escape and near-`c₀` counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub neighborhood: Neighborhood,
    pub c0: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub enum Init {
    /// Evenly spaced over the middle half of the domain hull.
    Spread,
    /// Quantiles `(k + ½)/N` of a measure.
    Quantiles(Arc<DiscreteMeasure>),
    Positions(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub n: usize,
    pub beta: f64,
    pub potential: Arc<Potential>,
    pub domain: Domain,
    /// Recorded sweeps after burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Initial random-walk scale; `1/N` when unset. Zero freezes the chain.
    pub proposal_scale: Option<f64>,
    pub tune: bool,
    pub seed: u64,
    pub stream: u64,
    pub mode: Mode,
    /// Teleports per sweep; `1/N` when unset.
    pub teleport_probability: Option<f64>,
    pub exchange: Option<Exchange>,
    pub observation: Option<Observation>,
    pub init: Init,
    pub record_positions: bool,
    /// Maintain per-particle interaction sums.
    pub cache: bool,
}

impl ChainConfig {
    pub fn new(n: usize, beta: f64, potential: Arc<Potential>, domain: Domain) -> Self {
        Self {
            n,
            beta,
            potential,
            domain,
            sweeps: 1000,
            burn_in: 100,
            thinning: 1,
            proposal_scale: None,
            tune: true,
            seed: 0,
            stream: 0,
            mode: Mode::Free,
            teleport_probability: None,
            exchange: None,
            observation: None,
            init: Init::Spread,
            record_positions: false,
            cache: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta = {} must be positive", self.beta)));
        }
        if self.sweeps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be positive".into()));
        }
        if !self.domain.is_bounded() {
            return Err(Error::Config("sampling needs a bounded domain; truncate B first".into()));
        }
        if let Some(s) = self.proposal_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("proposal scale {s} must be nonnegative")));
            }
        }
        if let Some(p) = self.teleport_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("teleport probability {p} outside [0, 1]")));
            }
        }
        if let Some(e) = &self.exchange {
            if !(e.sigma > 0.0) {
                return Err(Error::Config("exchange width must be positive".into()));
            }
        }
        if let Mode::Restricted { counts, boxes } = &self.mode {
            if counts.len() != boxes.len() || counts.is_empty() {
                return Err(Error::Config("restricted mode needs one count per box".into()));
            }
            if counts.iter().sum::<usize>() != self.n {
                return Err(Error::Config(format!(
                    "box counts sum to {}, not N = {}",
                    counts.iter().sum::<usize>(),
                    self.n
                )));
            }
            for w in boxes.windows(2) {
                if !(w[0].hi < w[1].lo) {
                    return Err(Error::Config("restricted boxes must be disjoint and ascending".into()));
                }
            }
            for b in boxes {
                if !(self.domain.contains(b.lo) && self.domain.contains(b.hi)) {
                    return Err(Error::Config(format!("box {b} is not inside the domain")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub sweep: usize,
    pub log_density: f64,
    /// `#{i : λ_i ∉ A}`.
    pub escape_count: usize,
    /// `#{i : |λ_i - c₀| < ε}`.
    pub near_count: usize,
    /// Random-walk acceptance since the previous record.
    pub acceptance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub positions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    pub proposed: usize,
    pub accepted: usize,
}

impl SweepStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Resumable chain state in plain text (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub stream: u64,
    /// ChaCha word position, decimal.
    pub word_pos: String,
    pub sweep: usize,
    pub proposal_scale: f64,
    pub log_density: f64,
    pub records: usize,
    pub positions: Vec<f64>,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<checkpoint>".into(),
            message: e.to_string(),
        })
    }
}

/// A running chain.
pub struct Chain {
    config: ChainConfig,
    table: PotentialTable,
    positions: Vec<f64>,
    potential_values: Vec<f64>,
    boxes: Option<Vec<Interval>>,
    assignment: Vec<usize>,
    cache: Option<Vec<f64>>,
    rng: ChaCha8Rng,
    scale: f64,
    sweep: usize,
    records: usize,
    log_density: f64,
    bulk_cdf: Vec<f64>,
    domain_length: f64,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Result<Self> {
        config.validate()?;
        let positions = initial_positions(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(config.stream);
        let scale = config.proposal_scale.unwrap_or(1.0 / config.n as f64);
        Self::assemble(config, positions, rng, scale, 0, 0, None)
    }

    /// Continues a chain from a checkpoint; the continuation is identical
    /// to an uninterrupted run.
    pub fn resume(config: ChainConfig, checkpoint: &Checkpoint) -> Result<Self> {
        config.validate()?;
        if checkpoint.positions.len() != config.n {
            return Err(Error::Config(format!(
                "checkpoint holds {} positions, config has N = {}",
                checkpoint.positions.len(),
                config.n
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(checkpoint.seed);
        rng.set_stream(checkpoint.stream);
        let word_pos: u128 = checkpoint.word_pos.parse().map_err(|_| Error::Parse {
            path: "<checkpoint>".into(),
            message: format!("bad word position {}", checkpoint.word_pos),
        })?;
        rng.set_word_pos(word_pos);
        Self::assemble(
            config,
            checkpoint.positions.clone(),
            rng,
            checkpoint.proposal_scale,
            checkpoint.sweep,
            checkpoint.records,
            Some(checkpoint.log_density),
        )
    }

    fn assemble(
        config: ChainConfig,
        positions: Vec<f64>,
        rng: ChaCha8Rng,
        scale: f64,
        sweep: usize,
        records: usize,
        resumed_density: Option<f64>,
    ) -> Result<Self> {
        let (lo, hi) = (config.domain.lower(), config.domain.upper());
        let table = PotentialTable::new(&config.potential, lo, hi);
        let potential_values: Vec<f64> = positions.iter().map(|&x| table.value(x)).collect();
        let boxes = match &config.mode {
            Mode::Free => None,
            Mode::Restricted { boxes, .. } => Some(boxes.clone()),
        };
        let assignment = match &config.mode {
            Mode::Free => vec![0; config.n],
            Mode::Restricted { boxes, .. } => positions
                .iter()
                .map(|&x| {
                    boxes.iter().position(|b| b.contains(x)).ok_or_else(|| {
                        Error::Config(format!("position {x} lies in no restricted box"))
                    })
                })
                .collect::<Result<_>>()?,
        };
        if let Mode::Restricted { counts, .. } = &config.mode {
            for (h, &c) in counts.iter().enumerate() {
                if assignment.iter().filter(|&&a| a == h).count() != c {
                    return Err(Error::Config(format!("box {h} does not hold {c} particles")));
                }
            }
        }
        let beta = config.beta;
        let current = log_density(&positions, &config.potential, &config.domain, beta);
        if current == f64::NEG_INFINITY {
            return Err(Error::Config("initial positions have zero density".into()));
        }
        let cache = config.cache.then(|| interaction_sums(&positions));
        let bulk_cdf = config
            .exchange
            .as_ref()
            .map(|e| {
                let mut acc = 0.0;
                e.bulk
                    .weights()
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect()
            })
            .unwrap_or_default();
        let domain_length = config.domain.length();
        Ok(Self {
            table,
            positions,
            potential_values,
            boxes,
            assignment,
            cache,
            rng,
            scale,
            sweep,
            records,
            log_density: resumed_density.unwrap_or(current),
            bulk_cdf,
            domain_length,
            config,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn proposal_scale(&self) -> f64 {
        self.scale
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweep
    }

    /// Per-particle sums `Σ_{j≠i} log|λ_i - λ_j|`, when cached.
    pub fn interaction_cache(&self) -> Option<&[f64]> {
        self.cache.as_deref()
    }

    /// Largest deviation of the cached sums from a fresh recomputation.
    pub fn audit_cache(&self) -> Option<f64> {
        let cache = self.cache.as_ref()?;
        let fresh = interaction_sums(&self.positions);
        Some(
            cache
                .iter()
                .zip(&fresh)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn log_density(&self) -> f64 {
        self.log_density
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.config.seed,
            stream: self.config.stream,
            word_pos: self.rng.get_word_pos().to_string(),
            sweep: self.sweep,
            proposal_scale: self.scale,
            log_density: self.log_density,
            records: self.records,
            positions: self.positions.clone(),
        }
    }

    fn allowed(&self, i: usize, x: f64) -> bool {
        match &self.boxes {
            Some(b) => b[self.assignment[i]].contains(x),
            None => self.config.domain.contains(x),
        }
    }

    fn density_change(&self, i: usize, new: f64) -> (f64, f64) {
        let v_new = self.table.value(new);
        let n = self.config.n as f64;
        let beta = self.config.beta;
        let delta = -0.5 * n * beta * (v_new - self.potential_values[i])
            + beta * interaction_delta(&self.positions, i, self.positions[i], new);
        (delta, v_new)
    }

    /// Change of the log density when particle `i` moves to `new`, as used
    /// in the acceptance test; `-∞` for moves the chain forbids.
    pub fn log_density_change(&self, i: usize, new: f64) -> f64 {
        if !self.allowed(i, new) {
            return f64::NEG_INFINITY;
        }
        self.density_change(i, new).0
    }

    /// Metropolis–Hastings step moving particle `i` to `new`;
    /// `log_q_ratio = log q(old) - log q(new)` for asymmetric proposals.
    fn try_move(&mut self, i: usize, new: f64, log_q_ratio: f64) -> bool {
        let u: f64 = self.rng.random();
        if !self.allowed(i, new) {
            return false;
        }
        let old = self.positions[i];
        let (delta, v_new) = self.density_change(i, new);
        if !(u.ln() < delta + log_q_ratio) {
            return false;
        }
        if let Some(cache) = self.cache.as_mut() {
            let mut own = 0.0;
            for (j, &l) in self.positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let ln_new = (new - l).abs().ln();
                cache[j] += ln_new - (old - l).abs().ln();
                own += ln_new;
            }
            cache[i] = own;
        }
        self.positions[i] = new;
        self.potential_values[i] = v_new;
        self.log_density += delta;
        true
    }

    /// One sweep: a random-walk update of every particle, then teleport and
    /// exchange moves. A zero proposal scale makes the sweep the identity.
    pub fn sweep(&mut self) -> SweepStats {
        let mut stats = SweepStats {
            proposed: 0,
            accepted: 0,
        };
        self.sweep += 1;
        if self.scale == 0.0 {
            return stats;
        }
        let n = self.config.n;
        for i in 0..n {
            let z: f64 = self.rng.sample(StandardNormal);
            let new = self.positions[i] + self.scale * z;
            stats.proposed += 1;
            if self.try_move(i, new, 0.0) {
                stats.accepted += 1;
            }
        }
        let p_tel = self.config.teleport_probability.unwrap_or(1.0 / n as f64);
        if p_tel > 0.0 && self.rng.random::<f64>() < p_tel {
            let i = self.rng.random_range(0..n);
            let new = self.uniform_position(i);
            self.try_move(i, new, 0.0);
        }
        if matches!(self.config.mode, Mode::Free) {
            if let Some(moves) = self.config.exchange.as_ref().map(|e| e.moves_per_sweep) {
                for _ in 0..moves {
                    self.exchange_move();
                }
            }
        }
        stats
    }

    fn uniform_position(&mut self, i: usize) -> f64 {
        let intervals: Vec<Interval> = match &self.boxes {
            Some(b) => vec![b[self.assignment[i]]],
            None => self.config.domain.intervals().to_vec(),
        };
        let total: f64 = intervals.iter().map(|iv| iv.length()).sum();
        let mut u = self.rng.random::<f64>() * total;
        for iv in &intervals {
            if u <= iv.length() {
                return iv.lo + u;
            }
            u -= iv.length();
        }
        intervals[intervals.len() - 1].hi
    }

    fn exchange_move(&mut self) {
        let Some(ex) = self.config.exchange.clone() else { return };
        let i = self.rng.random_range(0..self.config.n);
        let new = if self.rng.random::<f64>() < 0.5 {
            let z: f64 = self.rng.sample(StandardNormal);
            ex.center + ex.sigma * z
        } else {
            let u: f64 = self.rng.random();
            let k = self.bulk_cdf.partition_point(|&c| c < u).min(self.bulk_cdf.len() - 1);
            let cells = ex.bulk.cells().expect("exchange bulk measure has cells");
            let (a, b) = cells[k];
            a + (b - a) * self.rng.random::<f64>()
        };
        let old = self.positions[i];
        let ratio = exchange_log_density(&ex, old) - exchange_log_density(&ex, new);
        self.try_move(i, new, ratio);
    }

    fn record(&mut self, window: SweepStats) -> ObservableRecord {
        self.records += 1;
        if self.records % RESYNC_RECORDS == 0 {
            self.log_density = log_density(
                &self.positions,
                &self.config.potential,
                &self.config.domain,
                self.config.beta,
            );
        }
        let (escape_count, near_count) = match &self.config.observation {
            Some(o) => (
                self.positions.iter().filter(|x| !o.neighborhood.contains(**x)).count(),
                self.positions.iter().filter(|x| (**x - o.c0).abs() < o.epsilon).count(),
            ),
            None => (0, 0),
        };
        ObservableRecord {
            sweep: self.sweep,
            log_density: self.log_density,
            escape_count,
            near_count,
            acceptance: window.acceptance(),
            positions: self.config.record_positions.then(|| self.positions.clone()),
        }
    }

    /// Burn-in with scale tuning (unless disabled), then the recorded sweeps.
    pub fn run(mut self) -> Result<ChainRun> {
        let mut window = SweepStats {
            proposed: 0,
            accepted: 0,
        };
        while self.sweep < self.config.burn_in {
            let s = self.sweep();
            window.proposed += s.proposed;
            window.accepted += s.accepted;
            if self.config.tune && self.sweep % TUNE_WINDOW == 0 && window.proposed > 0 {
                let rate = window.acceptance();
                let max_scale = self.domain_length;
                self.scale = (self.scale * (2.0 * (rate - TARGET_ACCEPTANCE)).exp()).clamp(1e-9, max_scale);
                window = SweepStats {
                    proposed: 0,
                    accepted: 0,
                };
            }
        }
        self.continue_run()
    }

    /// Recorded sweeps only, from the current position.
    pub fn continue_run(mut self) -> Result<ChainRun> {
        let end = self.config.burn_in + self.config.sweeps;
        let mut records = Vec::with_capacity(self.config.sweeps / self.config.thinning + 1);
        let mut window = SweepStats {
            proposed: 0,
            accepted: 0,
        };
        let mut total = window;
        while self.sweep < end {
            let s = self.sweep();
            window.proposed += s.proposed;
            window.accepted += s.accepted;
            if (self.sweep - self.config.burn_in) % self.config.thinning == 0 {
                total.proposed += window.proposed;
                total.accepted += window.accepted;
                records.push(self.record(window));
                window = SweepStats {
                    proposed: 0,
                    accepted: 0,
                };
            }
        }
        Ok(ChainRun {
            acceptance: total.acceptance(),
            proposal_scale: self.scale,
            cache_deviation: self.audit_cache(),
            checkpoint: self.checkpoint(),
            records,
        })
    }
}

/// `log(½ φ_σ(x - center) + ½ ρ_eq(x))`.
fn exchange_log_density(ex: &Exchange, x: f64) -> f64 {
    let z = (x - ex.center) / ex.sigma;
    let log_gauss = -0.5 * z * z - (ex.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let rho = bulk_density(&ex.bulk, x);
    if rho > 0.0 {
        (0.5 * rho).ln() + (log_gauss - rho.ln()).exp().ln_1p()
    } else {
        0.5f64.ln() + log_gauss
    }
}

fn bulk_density(m: &DiscreteMeasure, x: f64) -> f64 {
    let Some(cells) = m.cells() else { return 0.0 };
    let k = cells.partition_point(|c| c.1 < x);
    if k < cells.len() && cells[k].0 <= x {
        m.density(k)
    } else {
        0.0
    }
}

fn interaction_sums(positions: &[f64]) -> Vec<f64> {
    positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            positions
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &y)| (x - y).abs().ln())
                .sum()
        })
        .collect()
}

fn initial_positions(config: &ChainConfig) -> Result<Vec<f64>> {
    let n = config.n;
    let positions = match (&config.mode, &config.init) {
        (_, Init::Positions(p)) => {
            if p.len() != n {
                return Err(Error::Config(format!("{} initial positions for N = {n}", p.len())));
            }
            p.clone()
        }
        (Mode::Restricted { counts, boxes }, _) => counts
            .iter()
            .zip(boxes)
            .flat_map(|(&c, b)| {
                (0..c).map(move |k| b.lo + b.length() * (k as f64 + 0.5) / c as f64)
            })
            .collect(),
        (Mode::Free, Init::Quantiles(m)) => quantiles(m, n),
        (Mode::Free, Init::Spread) => {
            let (lo, hi) = (config.domain.lower(), config.domain.upper());
            let (a, b) = (lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo));
            (0..n).map(|k| a + (b - a) * (k as f64 + 0.5) / n as f64).collect()
        }
    };
    // Snap points that fall into gaps of a multi-interval domain.
    Ok(positions
        .into_iter()
        .map(|x| {
            if config.domain.contains(x) {
                x
            } else {
                config
                    .domain
                    .intervals()
                    .iter()
                    .map(|iv| x.clamp(iv.lo, iv.hi))
                    .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
                    .unwrap_or(x)
            }
        })
        .collect())
}

/// Quantiles `(k + ½)/N` of a grid measure, linear within cells.
pub fn quantiles(m: &DiscreteMeasure, n: usize) -> Vec<f64> {
    let cells = m.cells();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut k = 0;
    for (idx, &w) in m.weights().iter().enumerate() {
        while k < n && (k as f64 + 0.5) / n as f64 <= acc + w {
            let target = (k as f64 + 0.5) / n as f64;
            let x = match cells {
                Some(c) => c[idx].0 + (c[idx].1 - c[idx].0) * ((target - acc) / w).clamp(0.0, 1.0),
                None => m.nodes()[idx],
            };
            out.push(x);
            k += 1;
        }
        acc += w;
    }
    let last = m.nodes()[m.len() - 1];
    out.resize(n, last);
    out
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub records: Vec<ObservableRecord>,
    pub acceptance: f64,
    pub proposal_scale: f64,
    pub cache_deviation: Option<f64>,
    pub checkpoint: Checkpoint,
}

/// One Metropolis sweep; see [`Chain::sweep`].
pub fn mcmc_sweep(chain: &mut Chain) -> SweepStats {
    chain.sweep()
}

pub fn run_chain(config: ChainConfig) -> Result<ChainRun> {
    Chain::new(config)?.run()
}

/// Runs independent chains under an execution policy, in input order.
pub fn run_chains(configs: Vec<ChainConfig>, exec: Execution) -> Result<Vec<ChainRun>> {
    exec.map(configs, run_chain).into_iter().collect()
}

/// Monte Carlo estimate of `W₁(x) = E[Σ 1/(x - λ_i)]` with an
/// autocorrelation-corrected standard error.
pub fn estimate_correlator(
    samples: &[Vec<f64>],
    x: f64,
    neighborhood: &Neighborhood,
    margin: f64,
) -> Result<(f64, f64)> {
    if neighborhood.closure_contains(x) || neighborhood.distance(x) < margin {
        return Err(Error::Margin { x, margin });
    }
    if samples.is_empty() {
        return Err(Error::Precondition("no samples for the correlator".into()));
    }
    let values: Vec<f64> = samples
        .iter()
        .map(|s| s.iter().map(|l| 1.0 / (x - l)).sum())
        .collect();
    let ess = stats::effective_sample_size(&values);
    Ok((stats::mean(&values), (stats::variance(&values) / ess).sqrt()))
}
