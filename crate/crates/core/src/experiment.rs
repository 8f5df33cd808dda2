//! Convergence experiments: configuration, refinement ladders and output
//! files.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::{compute_errors_with, fit_rates, ErrorReport, ExactBranch, RateTable};
use crate::assembly::{assemble, solve, AssemblyOptions, DiscreteSolution};
use crate::ife_space::IfeSpace;
use crate::linalg::{SolveMethod, SolverOptions};
use crate::mesh::TriMesh;
use crate::problem::{example1, example2, Problem};
use crate::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("refinement ladder must be strictly increasing powers of two: {0:?}")]
    InvalidLadder(Vec<usize>),
    #[error("N = {0} exceeds 512; set allow_fine = true to run it")]
    TooFine(usize),
    #[error("coefficients must be positive (beta_plus = {0}, beta_minus = {1})")]
    NonPositiveCoefficient(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    Example1,
    Example2,
}

impl FromStr for ExampleId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "example1" => Ok(ExampleId::Example1),
            "example2" => Ok(ExampleId::Example2),
            _ => Err(format!("unknown example `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: ExampleId,
    /// Used by the constant-coefficient example only.
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub n_ladder: Vec<usize>,
    pub assembly: AssemblyOptions,
    pub error_degree: usize,
    /// Branch of the exact solution compared on the mismatch region between
    /// the interface and its chords. The discrete side reproduces the
    /// published tables.
    pub exact_branch: ExactBranch,
    pub solver: SolverOptions,
    pub out_dir: Option<PathBuf>,
    pub verify: bool,
    pub seed: u64,
    pub allow_fine: bool,
    pub dump_mesh: bool,
    pub dump_matrix: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            example: ExampleId::Example1,
            beta_plus: 10.0,
            beta_minus: 1.0,
            n_ladder: vec![8, 16, 32, 64, 128, 256],
            assembly: AssemblyOptions::default(),
            error_degree: 6,
            exact_branch: ExactBranch::Discrete,
            solver: SolverOptions::default(),
            out_dir: None,
            verify: false,
            seed: 20_240_611,
            allow_fine: false,
            dump_mesh: false,
            dump_matrix: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

/// Parses a comma-separated list of mesh sizes.
pub fn parse_ladder(value: &str) -> Result<Vec<usize>, ConfigError> {
    value
        .split(',')
        .map(|s| parse_value("n_ladder", s.trim()))
        .collect()
}

impl RunConfig {
    /// Applies `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "example" => {
                self.example = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                })?
            }
            "beta_plus" => self.beta_plus = parse_value(key, value)?,
            "beta_minus" => self.beta_minus = parse_value(key, value)?,
            "n_ladder" => self.n_ladder = parse_ladder(value)?,
            "stiffness_degree" => self.assembly.stiffness_degree = parse_value(key, value)?,
            "load_degree" => self.assembly.load_degree = parse_value(key, value)?,
            "error_degree" => self.error_degree = parse_value(key, value)?,
            "exact_branch" => {
                self.exact_branch = match value {
                    "true" => ExactBranch::True,
                    "discrete" => ExactBranch::Discrete,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                        })
                    }
                }
            }
            "solver_tol" => self.solver.tol = parse_value(key, value)?,
            "max_iter" => self.solver.max_iter = parse_value(key, value)?,
            "direct_threshold" => self.solver.direct_threshold = parse_value(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "verify" => self.verify = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "allow_fine" => self.allow_fine = parse_value(key, value)?,
            "dump_mesh" => self.dump_mesh = parse_value(key, value)?,
            "dump_matrix" => self.dump_matrix = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let l = &self.n_ladder;
        let ok = !l.is_empty()
            && l.iter().all(|n| n.is_power_of_two() && *n >= 2)
            && l.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(ConfigError::InvalidLadder(l.clone()));
        }
        if let Some(&n) = l.iter().find(|&&n| n > 512) {
            if !self.allow_fine {
                return Err(ConfigError::TooFine(n));
            }
        }
        if !(self.beta_plus > 0.0 && self.beta_minus > 0.0) {
            return Err(ConfigError::NonPositiveCoefficient(
                self.beta_plus,
                self.beta_minus,
            ));
        }
        for d in [
            self.assembly.stiffness_degree,
            self.assembly.load_degree,
            self.error_degree,
        ] {
            if !(1..=6).contains(&d) {
                return Err(ConfigError::BadValue {
                    key: "quadrature degree".into(),
                    value: d.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Problem {
        match self.example {
            ExampleId::Example1 => example1(self.beta_plus, self.beta_minus),
            ExampleId::Example2 => example2(),
        }
    }
}

/// Result of one refinement level.
#[derive(Debug, Clone)]
pub struct LevelOutcome {
    pub report: ErrorReport,
    pub method: Option<SolveMethod>,
    pub interface_elements: usize,
    pub interface_edges: usize,
    /// `x, y, u_h, u, u - u_h` at every vertex.
    pub samples: Vec<[f64; 5]>,
}

/// Everything produced by a ladder run. When a level fails, the levels before
/// it are kept and the failure is recorded.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub problem: String,
    pub levels: Vec<LevelOutcome>,
    pub table: Option<RateTable>,
    pub failure: Option<(usize, String)>,
}

impl ExperimentReport {
    pub fn reports(&self) -> Vec<ErrorReport> {
        self.levels.iter().map(|l| l.report).collect()
    }
}

/// Solves `problem` on the `n × n` grid and measures the errors.
pub fn run_level(problem: &Problem, n: usize, cfg: &RunConfig) -> Result<LevelOutcome, Error> {
    let (space, system) = build_system(problem, n, cfg)?;
    let sol = solve(&space, &system, &cfg.solver)?;
    let exact = problem.exact.as_ref().ok_or(Error::NoExactSolution)?;
    let report = compute_errors_with(&sol, exact.as_ref(), cfg.error_degree, cfg.exact_branch);
    if let Some(dir) = &cfg.out_dir {
        if cfg.dump_mesh {
            space
                .mesh
                .write_text(fs::File::create(dir.join(format!("mesh_N{n}.txt")))?)?;
        }
        if cfg.dump_matrix {
            system
                .matrix
                .write_coo(fs::File::create(dir.join(format!("matrix_N{n}.txt")))?)?;
        }
    }
    Ok(LevelOutcome {
        report,
        method: sol.method,
        interface_elements: space.classification.num_interface_elements(),
        interface_edges: space.classification.interface_edges.len(),
        samples: vertex_samples(&sol, problem),
    })
}

/// Builds the IFE space and the full linear system of `problem` on an
/// `n × n` grid.
pub fn build_system(
    problem: &Problem,
    n: usize,
    cfg: &RunConfig,
) -> Result<(IfeSpace, crate::assembly::LinearSystem), Error> {
    let mesh = TriMesh::cartesian(problem.geometry.domain, n);
    let space = IfeSpace::new(mesh, problem.geometry.clone(), problem.coefficient.clone())?;
    let system = assemble(
        &space,
        problem.source.as_ref(),
        problem.dirichlet.as_ref(),
        &cfg.assembly,
    );
    Ok((space, system))
}

fn vertex_samples(sol: &DiscreteSolution, problem: &Problem) -> Vec<[f64; 5]> {
    let space = sol.space;
    space
        .mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let side = space.classification.vertex_signs[i].side();
            let u = problem
                .exact
                .as_ref()
                .map_or(f64::NAN, |e| e.value(x, side));
            [x.x, x.y, sol.coeffs[i], u, u - sol.coeffs[i]]
        })
        .collect()
}

/// Runs the whole ladder. Stops at the first failing level and keeps what
/// was computed before it.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport, Error> {
    cfg.validate()?;
    if cfg.n_ladder.iter().any(|&n| n > 512) {
        eprintln!("warning: meshes finer than N = 512 take a long time");
    }
    let problem = cfg.problem();
    let mut levels = Vec::new();
    let mut failure = None;
    for &n in &cfg.n_ladder {
        match run_level(&problem, n, cfg) {
            Ok(level) => levels.push(level),
            Err(e) => {
                failure = Some((n, e.to_string()));
                break;
            }
        }
    }
    let reports: Vec<ErrorReport> = levels.iter().map(|l| l.report).collect();
    let table = fit_rates(&reports).ok();
    Ok(ExperimentReport {
        problem: problem.name.clone(),
        levels,
        table,
        failure,
    })
}

/// Writes `rates.csv` and one `run_N<k>.csv` per level into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    if let Some(table) = &report.table {
        fs::write(dir.join("rates.csv"), table.to_csv())?;
    }
    for level in &report.levels {
        let mut text = String::from("x,y,u_h,u,error\n");
        for s in &level.samples {
            text.push_str(&format!(
                "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                s[0], s[1], s[2], s[3], s[4]
            ));
        }
        fs::write(dir.join(format!("run_N{}.csv", level.report.n)), text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config() {
        let cfg = RunConfig::parse(
            "# ladder\nexample = example2\nn_ladder = 8, 16,32\nbeta_plus=2\nverify = true\nexact_branch = true\n",
        )
        .unwrap();
        assert_eq!(cfg.example, ExampleId::Example2);
        assert_eq!(cfg.n_ladder, vec![8, 16, 32]);
        assert_eq!(cfg.beta_plus, 2.0);
        assert!(cfg.verify);
        assert_eq!(cfg.exact_branch, ExactBranch::True);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RunConfig::parse("nonsense"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            RunConfig::parse("colour = red"),
            Err(ConfigError::UnknownKey(_))
        ));
        let mut cfg = RunConfig::default();
        for ladder in [vec![8, 12], vec![16, 8], vec![8, 8], vec![]] {
            cfg.n_ladder = ladder;
            assert!(matches!(cfg.validate(), Err(ConfigError::InvalidLadder(_))));
        }
        cfg.n_ladder = vec![512, 1024];
        assert_eq!(cfg.validate(), Err(ConfigError::TooFine(1024)));
        cfg.allow_fine = true;
        cfg.validate().unwrap();
        cfg.beta_minus = 0.0;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::NonPositiveCoefficient(..))
        ));
    }

    #[test]
    fn small_ladder_runs_and_writes_outputs() {
        let dir = std::env::temp_dir().join(format!("ppife-exp-{}", std::process::id()));
        let cfg = RunConfig {
            n_ladder: vec![4, 8],
            out_dir: Some(dir.clone()),
            dump_mesh: true,
            dump_matrix: true,
            ..Default::default()
        };
        fs::create_dir_all(&dir).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failure.is_none());
        write_outputs(&report, &dir).unwrap();
        let rates = fs::read_to_string(dir.join("rates.csv")).unwrap();
        assert_eq!(rates.lines().count(), 3);
        assert!(dir.join("run_N8.csv").exists());
        assert!(dir.join("mesh_N4.txt").exists());
        assert!(dir.join("matrix_N8.txt").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
