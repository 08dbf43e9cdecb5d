//! Scenario files: a problem plus everything needed to run or verify it.
//!
//! On top of the graph and problem records a scenario accepts
//!
//! ```text
//! model LUMI 2                 # tag and palette (palette defaults to 1 for OBLOT, 2 otherwise)
//! scheduler SSYNC
//! algorithm suir-oblot         # or: algorithm table <path>
//! bounds depth=14 window=3 palette=2
//! seed 7
//! symmetry automorphic         # or: isometric
//! expect unsolvable            # or: solvable
//! ```
//!
//! Every record is optional except the problem itself.

use std::fmt;

use thiserror::Error;

use crate::checker::Bounds;
use crate::engine::{ModelTag, RobotModel, Scheduler};
use crate::graph::{Arena, GraphBuilder, GraphError, SymmetryMode};
use crate::problems::{ProblemBuilder, ProblemError, ProblemSpec};
use crate::text::{records, ParseError, Record};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("inconsistent scenario: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgorithmRef {
    Builtin(String),
    /// Path to a table file, relative to the scenario file.
    TableFile(String),
}

impl fmt::Display for AlgorithmRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmRef::Builtin(name) => f.write_str(name),
            AlgorithmRef::TableFile(path) => write!(f, "table {path}"),
        }
    }
}

/// What the scenario's author claims about the problem in this variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Solvable,
    Unsolvable,
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expectation::Solvable => "solvable",
            Expectation::Unsolvable => "unsolvable",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub problem: ProblemSpec,
    pub symmetry: SymmetryMode,
    pub model: RobotModel,
    pub scheduler: Scheduler,
    pub algorithm: Option<AlgorithmRef>,
    pub bounds: Bounds,
    pub seed: u64,
    pub expect: Option<Expectation>,
}

const DEFAULT_BOUNDS: Bounds = Bounds { max_depth: 12, window: 3, palette: 2 };

fn default_palette(tag: ModelTag) -> u8 {
    if tag == ModelTag::Oblot {
        1
    } else {
        2
    }
}

/// Returns whether the record set the palette.
fn parse_bounds(rec: &Record<'_>, into: &mut Bounds) -> Result<bool, ParseError> {
    let mut palette = false;
    for tok in rec.args() {
        let (name, value) =
            tok.text.split_once('=').ok_or_else(|| tok.error(format!("expected name=value, found `{}`", tok.text)))?;
        let n: usize = value.parse().map_err(|_| tok.error(format!("bad count `{value}`")))?;
        match name {
            "depth" => into.max_depth = n,
            "window" => into.window = n,
            "palette" => {
                into.palette = u8::try_from(n).map_err(|_| tok.error("palette too large"))?;
                palette = true;
            }
            other => return Err(tok.error(format!("unknown bound `{other}`"))),
        }
    }
    Ok(palette)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut graph = GraphBuilder::new();
    let mut problem = ProblemBuilder::new();
    let mut symmetry = SymmetryMode::Automorphic;
    let mut model = None;
    let mut scheduler = Scheduler::Fsync;
    let mut algorithm = None;
    let mut bounds = DEFAULT_BOUNDS;
    let mut palette_given = false;
    let mut seed = 0;
    let mut expect = None;
    for rec in records(text) {
        if graph.accept(&rec)? || problem.accept(&rec)? {
            continue;
        }
        match rec.keyword() {
            "model" => {
                let args = rec.args();
                if args.is_empty() || args.len() > 2 {
                    return Err(rec.error("`model` takes a tag and an optional palette").into());
                }
                let tag: ModelTag = args[0].parse("a model tag")?;
                let palette = match args.get(1) {
                    Some(tok) => tok.parse("a palette size")?,
                    None => default_palette(tag),
                };
                model = Some((RobotModel::new(tag, palette).map_err(|e| rec.error(e.to_string()))?, rec.line));
            }
            "scheduler" => scheduler = rec.expect_args(1)?[0].parse("a scheduler")?,
            "algorithm" => {
                algorithm = Some(match rec.args() {
                    [name] => AlgorithmRef::Builtin(name.text.to_string()),
                    [kw, path] if kw.text == "table" => AlgorithmRef::TableFile(path.text.to_string()),
                    _ => return Err(rec.error("expected `algorithm <builtin>` or `algorithm table <path>`").into()),
                })
            }
            "bounds" => palette_given |= parse_bounds(&rec, &mut bounds)?,
            "seed" => seed = rec.expect_args(1)?[0].parse("a seed")?,
            "symmetry" => {
                let tok = rec.expect_args(1)?[0];
                symmetry = match tok.text {
                    "automorphic" => SymmetryMode::Automorphic,
                    "isometric" => SymmetryMode::Isometric,
                    other => return Err(tok.error(format!("unknown symmetry mode `{other}`")).into()),
                }
            }
            "expect" => {
                let tok = rec.expect_args(1)?[0];
                expect = Some(match tok.text {
                    "solvable" => Expectation::Solvable,
                    "unsolvable" => Expectation::Unsolvable,
                    other => {
                        return Err(tok.error(format!("expected `solvable` or `unsolvable`, found `{other}`")).into())
                    }
                })
            }
            other => return Err(rec.error(format!("unknown record `{other}`")).into()),
        }
    }
    let problem = problem.build(Arena::new(graph.build()?, symmetry))?;
    let model = match model {
        Some((m, line)) => {
            for cfg in &problem.initial {
                cfg.validate(problem.graph(), m)
                    .map_err(|e| ParseError::new(line, 1, format!("initial configuration: {e}")))?;
            }
            m
        }
        None => RobotModel::oblot(),
    };
    if !palette_given {
        // the impossibility palette bound follows the model unless stated
        bounds.palette = model.palette;
    }
    let scenario = Scenario { problem, symmetry, model, scheduler, algorithm, bounds, seed, expect };
    scenario.check()?;
    Ok(scenario)
}

impl Scenario {
    /// Cross-section consistency: a builtin algorithm must exist, target
    /// this problem and be legal for the model.
    pub fn check(&self) -> Result<(), ScenarioError> {
        if let Some(AlgorithmRef::Builtin(name)) = &self.algorithm {
            let algo = crate::algorithms::builtin_for(name, &self.problem)
                .map_err(|e| ScenarioError::Inconsistent(e.to_string()))?;
            algo.check_model(self.model).map_err(|e| ScenarioError::Inconsistent(e.to_string()))?;
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal scenario.
    pub fn to_text(&self) -> String {
        let mut out = self.problem.graph().to_records();
        out.push('\n');
        out.push_str(&self.problem.to_records());
        out.push('\n');
        if self.symmetry != SymmetryMode::Automorphic {
            out.push_str("symmetry isometric\n");
        }
        out.push_str(&format!("model {} {}\n", self.model.tag, self.model.palette));
        out.push_str(&format!("scheduler {}\n", self.scheduler));
        if let Some(a) = &self.algorithm {
            out.push_str(&format!("algorithm {a}\n"));
        }
        let b = self.bounds;
        out.push_str(&format!("bounds depth={} window={} palette={}\n", b.max_depth, b.window, b.palette));
        out.push_str(&format!("seed {}\n", self.seed));
        if let Some(e) = self.expect {
            out.push_str(&format!("expect {e}\n"));
        }
        out
    }
}
