//! TOML run configuration and assembly of the potential, equilibrium and
//! criticality certificate it describes.
//!
//! All quantities are dimensionless: positions on the real line, potentials
//! in units where the ensemble weight is `exp(-Nβ/2 Σ V)`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve_equilibrium, EquilibriumSolution, GridConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::{ChainBudget, EscapeSetup};
use crate::io;
use crate::measure::DiscreteMeasure;
use crate::potential::{
    build_critical_potential, CriticalConstruction, CriticalPotentialSpec, Domain, Interval, Neighborhood, Piece,
    Potential, Term, WellPlacement,
};
use crate::ratefn::{scan_criticality, CriticalityReport, RateFunction};

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub domain: DomainSection,
    pub potential: Vec<PieceSection>,
    #[serde(default)]
    pub grid: GridSection,
    pub critical: Option<CriticalSection>,
    pub scan: Option<ScanSection>,
    pub sample: Option<SampleSection>,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Disjoint intervals making up `B`; infinite ends are written `inf`.
    pub intervals: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSection {
    pub interval: [f64; 2],
    /// Coefficients in ascending order.
    #[serde(default)]
    pub polynomial: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
    pub well: Option<WellSection>,
    /// `node,weight` CSV whose log-field `2∫log|x-y|dμ(y)` is added.
    pub log_field: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellSection {
    pub depth: f64,
    pub center: f64,
    pub power: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nodes: usize,
    pub window: Option<[f64; 2]>,
    pub support_threshold: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            nodes: g.nodes,
            window: None,
            support_threshold: g.support_threshold,
            tolerance: g.tolerance,
            max_iterations: g.max_iterations,
        }
    }
}

impl GridSection {
    pub fn grid_config(&self, execution: Execution) -> GridConfig {
        GridConfig {
            nodes: self.nodes,
            window: self.window.map(|[a, b]| (a, b)),
            support_threshold: self.support_threshold,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            execution,
        }
    }
}

/// Glues a well onto the potential described by `[[potential]]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalSection {
    /// Neighbourhood `A` of the base support.
    pub neighborhood: Vec<[f64; 2]>,
    /// Either `c0` or `depth`, not both.
    pub c0: Option<f64>,
    pub depth: Option<f64>,
    #[serde(default = "two")]
    pub power: u32,
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Defaults to the critical neighbourhood when `[critical]` is present.
    pub neighborhood: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    4000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub beta: f64,
    pub n: usize,
    #[serde(default = "one")]
    pub chains: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    pub proposal_scale: Option<f64>,
    pub teleport_probability: Option<f64>,
    #[serde(default)]
    pub record_positions: bool,
    #[serde(default)]
    pub format: RecordFormat,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub betas: Vec<f64>,
    pub ns: Vec<usize>,
    /// Half-width of the window around `c₀` in which near counts are taken.
    pub epsilon: f64,
    /// `N` of the cross-β comparison; the largest of `ns` when unset.
    pub phase_n: Option<usize>,
    #[serde(default = "one")]
    pub chains: usize,
    pub sweeps: usize,
    #[serde(default)]
    pub sweep_growth: f64,
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    #[serde(default = "default_exchange_rate")]
    pub exchange_rate: f64,
    /// `N` values at which the Laplace ratio is evaluated.
    #[serde(default)]
    pub laplace_ns: Vec<f64>,
    pub control: Option<ControlSection>,
}

fn default_exchange_rate() -> f64 {
    2.0
}

/// Runs the unglued base potential with the same `A` as a non-critical control.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub beta: f64,
    pub n: usize,
    pub sweeps: usize,
}

impl ExperimentSection {
    pub fn budget(&self, seed: u64) -> ChainBudget {
        ChainBudget {
            chains: self.chains,
            sweeps: self.sweeps,
            sweep_growth: self.sweep_growth,
            burn_in: self.burn_in,
            thinning: self.thinning,
            exchange_rate: self.exchange_rate,
            seed,
        }
    }
}

fn intervals(raw: &[[f64; 2]]) -> Result<Vec<Interval>> {
    raw.iter().map(|[a, b]| Interval::new(*a, *b)).collect()
}

fn check_beta(beta: f64, section: &str) -> Result<()> {
    if beta == 1.0 {
        return Err(Error::Config(format!(
            "[{section}] beta = 1 is the critical case, whose study is postponed; choose beta < 1 or beta > 1"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("[{section}] beta = {beta} must be positive")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Checks the sections that carry physical parameters.
    pub fn validate(&self) -> Result<()> {
        if self.potential.is_empty() {
            return Err(Error::Config("at least one [[potential]] piece is required".into()));
        }
        if let Some(c) = &self.critical {
            if c.c0.is_some() == c.depth.is_some() {
                return Err(Error::Config("[critical] needs exactly one of c0 and depth".into()));
            }
        }
        if let Some(s) = &self.sample {
            check_beta(s.beta, "sample")?;
            if s.n == 0 || s.sweeps == 0 || s.chains == 0 || s.thinning == 0 {
                return Err(Error::Config("[sample] n, sweeps, chains and thinning must be positive".into()));
            }
        }
        if let Some(e) = &self.experiment {
            for &b in &e.betas {
                check_beta(b, "experiment")?;
            }
            if e.ns.is_empty() || e.ns.contains(&0) {
                return Err(Error::Config("[experiment] ns must list positive particle numbers".into()));
            }
            if !(e.epsilon > 0.0) {
                return Err(Error::Config(format!("[experiment] epsilon = {} must be positive", e.epsilon)));
            }
            if e.sweeps == 0 || e.chains == 0 || e.thinning == 0 {
                return Err(Error::Config("[experiment] sweeps, chains and thinning must be positive".into()));
            }
            if let Some(c) = &e.control {
                check_beta(c.beta, "experiment.control")?;
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(intervals(&self.domain.intervals)?)
    }

    /// The potential of `[[potential]]`; relative `log_field` paths resolve against `base_dir`.
    pub fn base_potential(&self, base_dir: &Path) -> Result<Potential> {
        let domain = self.domain()?;
        let pieces = self
            .potential
            .iter()
            .map(|p| {
                let [lo, hi] = p.interval;
                let mut terms = Vec::new();
                if !p.polynomial.is_empty() {
                    terms.push(Term::Polynomial(p.polynomial.clone()));
                }
                if let Some(w) = &p.well {
                    terms.push(Term::Well {
                        depth: w.depth,
                        center: w.center,
                        power: w.power,
                    });
                }
                if let Some(file) = &p.log_field {
                    let path = base_dir.join(file);
                    let (nodes, weights) = io::read_measure_csv(&path)?;
                    terms.push(Term::LogField(Arc::new(DiscreteMeasure::from_nodes(nodes, weights)?)));
                }
                Ok(Piece::new(Interval::new(lo, hi)?, terms, p.constant))
            })
            .collect::<Result<Vec<_>>>()?;
        Potential::new(domain, pieces)
    }
}

/// Potential, equilibrium and (optionally) glued well described by a config.
#[derive(Debug, Clone)]
pub struct Model {
    pub domain: Domain,
    pub base: Arc<Potential>,
    pub base_solution: Arc<EquilibriumSolution>,
    pub potential: Arc<Potential>,
    pub solution: Arc<EquilibriumSolution>,
    pub critical: Option<CriticalConstruction>,
}

impl Model {
    pub fn build(config: &RunConfig, base_dir: &Path, execution: Execution) -> Result<Self> {
        config.validate()?;
        let domain = config.domain()?;
        let base = Arc::new(config.base_potential(base_dir)?);
        let grid = config.grid.grid_config(execution);
        let base_solution = Arc::new(solve_equilibrium(&base, &grid)?);
        let Some(section) = &config.critical else {
            return Ok(Self {
                domain,
                potential: base.clone(),
                solution: base_solution.clone(),
                base,
                base_solution,
                critical: None,
            });
        };
        let placement = match (section.c0, section.depth) {
            (Some(c0), None) => WellPlacement::At(c0),
            (None, Some(d)) => WellPlacement::Depth(d),
            _ => return Err(Error::Config("[critical] needs exactly one of c0 and depth".into())),
        };
        let spec = CriticalPotentialSpec {
            measure: base_solution.measure.clone(),
            robin_constant: base_solution.robin_constant,
            neighborhood: Neighborhood::new(intervals(&section.neighborhood)?)?,
            placement,
            power: section.power,
        };
        let construction = build_critical_potential(&spec, &base)?;
        // The base measure is, by construction, the equilibrium measure of the glued potential.
        let solution = EquilibriumSolution::from_measure(
            (*base_solution.measure).clone(),
            &construction.potential,
            grid.support_threshold,
        )?;
        Ok(Self {
            domain,
            potential: construction.potential.clone(),
            solution: Arc::new(solution),
            base,
            base_solution,
            critical: Some(construction),
        })
    }

    pub fn rate_function(&self) -> RateFunction {
        RateFunction::new(self.solution.clone(), self.potential.clone())
    }

    /// `A` for the scan: `[scan].neighborhood`, else the critical neighbourhood.
    pub fn scan_neighborhood(&self, config: &RunConfig) -> Result<Neighborhood> {
        if let Some(raw) = config.scan.as_ref().and_then(|s| s.neighborhood.as_ref()) {
            return Neighborhood::new(intervals(raw)?);
        }
        match &self.critical {
            Some(c) => Ok(c.neighborhood.clone()),
            None => Err(Error::Config("[scan] neighborhood is required without [critical]".into())),
        }
    }

    pub fn scan(&self, config: &RunConfig) -> Result<CriticalityReport> {
        let a = self.scan_neighborhood(config)?;
        let resolution = config.scan.as_ref().map_or_else(default_resolution, |s| s.resolution);
        scan_criticality(&self.rate_function(), &a, resolution)
    }

    /// Escape setup around the certified point of `report`.
    pub fn escape_setup(&self, report: CriticalityReport, epsilon: f64) -> Result<EscapeSetup> {
        let c0 = match (&self.critical, report.critical_points.as_slice()) {
            (Some(c), _) => c.c0,
            (None, [p]) => p.c0,
            _ => {
                return Err(Error::Precondition(
                    "escape experiments need a certified critical point".into(),
                ))
            }
        };
        Ok(EscapeSetup {
            potential: self.potential.clone(),
            domain: self.domain.clone(),
            neighborhood: report.neighborhood.clone(),
            c0,
            epsilon,
            equilibrium: self.solution.clone(),
            report,
        })
    }

    /// Setup for the base potential with the same `A`, as a non-critical control.
    pub fn control_setup(&self, neighborhood: &Neighborhood, resolution: usize, epsilon: f64) -> Result<EscapeSetup> {
        let rf = RateFunction::new(self.base_solution.clone(), self.base.clone());
        let report = scan_criticality(&rf, neighborhood, resolution)?;
        let c0 = self.critical.as_ref().map_or(neighborhood.upper(), |c| c.c0);
        Ok(EscapeSetup {
            potential: self.base.clone(),
            domain: self.domain.clone(),
            neighborhood: neighborhood.clone(),
            c0,
            epsilon,
            equilibrium: self.base_solution.clone(),
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUADRATIC: &str = r#"
        [domain]
        intervals = [[-3.0, 3.0]]

        [[potential]]
        interval = [-3.0, 3.0]
        polynomial = [0.0, 0.0, 1.0]
    "#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_toml(QUADRATIC, Path::new("q.toml")).unwrap();
        assert_eq!(c.seed(), DEFAULT_SEED);
        assert_eq!(c.grid.nodes, 512);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{QUADRATIC}\nbogus = 1\n");
        assert!(matches!(RunConfig::from_toml(&text, Path::new("q.toml")), Err(Error::Parse { .. })));
    }

    #[test]
    fn beta_one_rejected() {
        let text = format!(
            "{QUADRATIC}\n[sample]\nbeta = 1.0\nn = 8\nsweeps = 10\nburn_in = 0\n"
        );
        let c = RunConfig::from_toml(&text, Path::new("q.toml")).unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("postponed"));
    }

    #[test]
    fn sample_needs_beta() {
        let text = format!("{QUADRATIC}\n[sample]\nn = 8\nsweeps = 10\nburn_in = 0\n");
        assert!(RunConfig::from_toml(&text, Path::new("q.toml")).is_err());
    }
}
